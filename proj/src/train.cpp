#include "sifmi/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "sifmi/common.hpp"

namespace sifmi {

void TrainConfig::validate() const {
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (l2 < 0) throw ConfigError("l2 must be >= 0");
    if (momentum < 0 || momentum >= 1) throw ConfigError("momentum must be in [0,1)");
    if (lr <= 0) throw ConfigError("lr must be positive");
    if (lr_decay.enabled) {
        if (lr_decay.factor <= 0 || lr_decay.factor >= 1)
            throw ConfigError("lr_decay.factor must be in (0,1)");
        if (lr_decay.patience < 1) throw ConfigError("lr_decay.patience must be >= 1");
    }
}

std::uint64_t Checkpoint::fingerprint() const {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    auto mix = [&](const void* data, std::size_t n) {
        const unsigned char* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ULL;
        }
    };
    std::string spec_json = spec.to_json();
    mix(spec_json.data(), spec_json.size());
    mix(params.data(), params.size() * sizeof(double));
    return h;
}

ParamVector init_params(const ModelSpec& spec, std::uint64_t seed) {
    ParamLayout layout = spec.layout();
    ParamVector p = ParamVector::zeros(layout);
    std::mt19937_64 rng(seed);

    // fan-in per weight slice, derived from the architecture.
    auto fan_in_of = [&](const std::string& name) -> std::size_t {
        if (spec.arch == Arch::SmallCnn) {
            if (name == "conv0.weight") return static_cast<std::size_t>(spec.in_channels) * 9;
            if (name == "conv1.weight") return static_cast<std::size_t>(spec.conv_channels) * 9;
            if (name == "fc.weight")
                return static_cast<std::size_t>(2 * spec.conv_channels) * (spec.in_h / 4) *
                       (spec.in_w / 4);
        } else {
            std::vector<int> widths;
            widths.push_back(spec.input_dim);
            for (int hdim : spec.hidden) widths.push_back(hdim);
            widths.push_back(spec.num_classes);
            for (std::size_t l = 0; l + 1 < widths.size(); ++l)
                if (name == "fc" + std::to_string(l) + ".weight") return widths[l];
        }
        throw Error("unknown weight slice '" + name + "'");
    };

    for (const LayerSlice& sl : layout) {
        if (sl.name.find(".weight") == std::string::npos) continue;  // biases stay zero
        double bound = std::sqrt(6.0 / static_cast<double>(fan_in_of(sl.name)));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (std::size_t i = sl.offset; i < sl.offset + sl.length; ++i) p[i] = u(rng);
    }
    return p;
}

namespace {

Batch gather_batch(const LabeledDataset& ds, const std::vector<int>& idx, std::size_t begin,
                   std::size_t end, const AugmentationFamily& family, std::mt19937_64& rng) {
    std::vector<Tensor> xs;
    std::vector<int> ys;
    xs.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
        Sample s = ds.sample(idx[i]);
        if (!family.is_identity()) s = augment(family, s, rng);
        xs.push_back(std::move(s.input));
        ys.push_back(s.label);
    }
    return make_batch(xs, ys);
}

double accuracy_on(const ModelSpec& spec, const ParamVector& params, const LabeledDataset& ds,
                   const std::vector<int>& idx) {
    if (idx.empty()) return 0.0;
    int hits = 0;
    for (int i : idx)
        if (predict(spec, params, ds.inputs[i]).label == ds.labels[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(idx.size());
}

}  // namespace

Checkpoint train_target(const ModelSpec& spec, const LabeledDataset& dataset,
                        const MiSplit& split, const TrainConfig& cfg) {
    cfg.validate();
    dataset.validate();
    if (cfg.lr_decay.enabled && split.validation.empty())
        throw ConfigError("lr decay needs a nonempty validation split");
    std::vector<int> train_idx = split.members();
    if (train_idx.empty()) throw Error("empty member set");

    Checkpoint ckpt;
    ckpt.spec = spec;
    ckpt.params = init_params(spec, cfg.seed);
    ckpt.l2 = cfg.l2;
    ckpt.augmentation = cfg.augmentation;
    ckpt.train_seed = cfg.seed;

    const bool has_val = !split.validation.empty();
    ParamVector params = ckpt.params;
    ParamVector velocity = ParamVector::zeros(spec.layout());
    std::mt19937_64 rng(derive_seed(cfg.seed, 0xbadcafeULL));

    double best_val = has_val ? accuracy_on(spec, params, dataset, split.validation) : -1.0;
    ckpt.best_val_acc = std::max(best_val, 0.0);
    ckpt.best_epoch = 0;

    double lr = cfg.lr;
    int stale = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(train_idx.begin(), train_idx.end(), rng);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        EpochStats st;
        try {
            for (std::size_t begin = 0; begin < train_idx.size(); begin += cfg.batch_size) {
                std::size_t end = std::min(train_idx.size(), begin + cfg.batch_size);
                Batch b = gather_batch(dataset, train_idx, begin, end, cfg.augmentation, rng);
                ParamVector g = grad(spec, params, b, cfg.l2);
                epoch_loss += forward_loss(spec, params, b, cfg.l2);
                ++batches;
                // v <- mu*v + g; theta <- theta - lr*(g + mu*v) (Nesterov) or -lr*v
                velocity *= cfg.momentum;
                velocity += g;
                if (cfg.nesterov) {
                    params.axpy(-lr, g);
                    params.axpy(-lr * cfg.momentum, velocity);
                } else {
                    params.axpy(-lr, velocity);
                }
            }
            if (!params.all_finite()) throw NumericError("non-finite parameters");
            st.train_acc = accuracy_on(spec, params, dataset, train_idx);
            st.val_acc = has_val ? accuracy_on(spec, params, dataset, split.validation) : 0.0;
        } catch (const NumericError& e) {
            throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ": " +
                                      e.what() + " (last finite epoch " +
                                      std::to_string(epoch - 1) + ")",
                                  epoch - 1);
        }
        st.epoch = epoch;
        st.loss = batches ? epoch_loss / static_cast<double>(batches) : 0.0;
        st.lr = lr;
        ckpt.history.push_back(st);

        if (has_val) {
            bool strict = st.val_acc > best_val;
            // Ties keep the latest epoch: at equal validation accuracy the
            // longer-trained parameters are the better overfitting checkpoint.
            if (st.val_acc >= best_val) {
                best_val = st.val_acc;
                ckpt.params = params;
                ckpt.best_epoch = epoch;
                ckpt.best_val_acc = st.val_acc;
            }
            if (strict) {
                stale = 0;
            } else {
                ++stale;
                if (cfg.lr_decay.enabled && stale >= cfg.lr_decay.patience) {
                    lr *= cfg.lr_decay.factor;
                    stale = 0;
                }
            }
        } else {
            ckpt.params = params;
            ckpt.best_epoch = epoch;
        }
    }
    ckpt.epochs_run = cfg.epochs;
    return ckpt;
}

double evaluate_accuracy(const Checkpoint& ckpt, const LabeledDataset& dataset,
                         const std::vector<int>& indices) {
    if (indices.empty()) throw Error("evaluate_accuracy needs at least one sample");
    return accuracy_on(ckpt.spec, ckpt.params, dataset, indices);
}

double evaluate_accuracy(const Checkpoint& ckpt, const std::vector<Sample>& samples) {
    if (samples.empty()) throw Error("evaluate_accuracy needs at least one sample");
    int hits = 0;
    for (const Sample& s : samples)
        if (predict(ckpt.spec, ckpt.params, s.input).label == s.label) ++hits;
    return static_cast<double>(hits) / static_cast<double>(samples.size());
}

namespace {

nlohmann::json history_json(const std::vector<EpochStats>& h) {
    nlohmann::json arr = nlohmann::json::array();
    for (const EpochStats& s : h)
        arr.push_back({{"epoch", s.epoch},
                       {"loss", s.loss},
                       {"train_acc", s.train_acc},
                       {"val_acc", s.val_acc},
                       {"lr", s.lr}});
    return arr;
}

std::vector<EpochStats> history_from_json(const nlohmann::json& arr) {
    std::vector<EpochStats> h;
    for (const auto& j : arr) {
        EpochStats s;
        s.epoch = j.at("epoch").get<int>();
        s.loss = j.at("loss").get<double>();
        s.train_acc = j.at("train_acc").get<double>();
        s.val_acc = j.at("val_acc").get<double>();
        s.lr = j.at("lr").get<double>();
        h.push_back(s);
    }
    return h;
}

template <class T>
void write_pod(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::ifstream& in, const std::string& path) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw FormatError("truncated checkpoint '" + path + "'");
    return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint '" + path + "'");
    out.write("SIFC", 4);
    write_pod<std::uint32_t>(out, 1);

    std::string spec_json = ckpt.spec.to_json();
    write_pod<std::uint64_t>(out, spec_json.size());
    out.write(spec_json.data(), static_cast<std::streamsize>(spec_json.size()));

    write_pod<std::uint64_t>(out, ckpt.params.size());
    out.write(reinterpret_cast<const char*>(ckpt.params.data()),
              static_cast<std::streamsize>(ckpt.params.size() * sizeof(double)));

    nlohmann::json meta;
    meta["best_epoch"] = ckpt.best_epoch;
    meta["best_val_acc"] = ckpt.best_val_acc;
    meta["epochs_run"] = ckpt.epochs_run;
    meta["l2"] = ckpt.l2;
    meta["augmentation"] = nlohmann::json::parse(ckpt.augmentation.to_json());
    meta["train_seed"] = ckpt.train_seed;
    meta["history"] = history_json(ckpt.history);
    std::string meta_json = meta.dump();
    write_pod<std::uint64_t>(out, meta_json.size());
    out.write(meta_json.data(), static_cast<std::streamsize>(meta_json.size()));
    if (!out) throw Error("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open checkpoint '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "SIFC", 4) != 0)
        throw FormatError("bad checkpoint magic in '" + path + "' at byte offset 0");
    std::uint32_t version = read_pod<std::uint32_t>(in, path);
    if (version != 1)
        throw FormatError("unsupported checkpoint version " + std::to_string(version));

    std::uint64_t spec_len = read_pod<std::uint64_t>(in, path);
    std::string spec_json(spec_len, '\0');
    in.read(spec_json.data(), static_cast<std::streamsize>(spec_len));
    if (!in) throw FormatError("truncated checkpoint '" + path + "' (spec blob)");

    Checkpoint ckpt;
    ckpt.spec = ModelSpec::from_json(spec_json);

    std::uint64_t n = read_pod<std::uint64_t>(in, path);
    std::vector<double> data(n);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw FormatError("truncated checkpoint '" + path + "' (params payload)");
    ckpt.params = ParamVector(ckpt.spec.layout(), std::move(data));

    std::uint64_t meta_len = read_pod<std::uint64_t>(in, path);
    std::string meta_json(meta_len, '\0');
    in.read(meta_json.data(), static_cast<std::streamsize>(meta_len));
    if (!in) throw FormatError("truncated checkpoint '" + path + "' (metadata blob)");
    nlohmann::json meta = nlohmann::json::parse(meta_json);
    ckpt.best_epoch = meta.at("best_epoch").get<int>();
    ckpt.best_val_acc = meta.at("best_val_acc").get<double>();
    ckpt.epochs_run = meta.at("epochs_run").get<int>();
    ckpt.l2 = meta.at("l2").get<double>();
    ckpt.augmentation = AugmentationFamily::from_json(meta.at("augmentation").dump());
    ckpt.train_seed = meta.at("train_seed").get<std::uint64_t>();
    ckpt.history = history_from_json(meta.at("history"));
    return ckpt;
}

}  // namespace sifmi
