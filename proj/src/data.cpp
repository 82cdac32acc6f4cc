#include "sifmi/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sifmi/common.hpp"

namespace sifmi {

void LabeledDataset::validate() const {
    if (inputs.empty()) throw Error("dataset '" + name + "' is empty");
    if (inputs.size() != labels.size())
        throw DimensionError("dataset '" + name + "' input/label count mismatch");
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (!inputs[i].same_shape(inputs[0]))
            throw DimensionError("dataset '" + name + "' sample " + std::to_string(i) +
                                 " shape differs");
        if (labels[i] < 0 || labels[i] >= num_classes)
            throw DimensionError("dataset '" + name + "' label " + std::to_string(labels[i]) +
                                 " outside [0," + std::to_string(num_classes) + ")");
    }
}

std::vector<int> MiSplit::members() const {
    std::vector<int> out(mem_train);
    out.insert(out.end(), mem_test.begin(), mem_test.end());
    return out;
}

std::vector<int> MiSplit::nonmembers() const {
    std::vector<int> out(nonmem_train);
    out.insert(out.end(), nonmem_test.begin(), nonmem_test.end());
    return out;
}

void MiSplit::validate(std::size_t dataset_size) const {
    if (mem_train.size() != mem_test.size() || mem_train.size() != nonmem_train.size() ||
        mem_train.size() != nonmem_test.size())
        throw Error("split subsets must have equal sizes");
    std::set<int> seen;
    auto add_all = [&](const std::vector<int>& v, const char* which) {
        for (int i : v) {
            if (i < 0 || static_cast<std::size_t>(i) >= dataset_size)
                throw Error(std::string("split index out of range in ") + which);
            if (!seen.insert(i).second)
                throw Error(std::string("split index ") + std::to_string(i) +
                            " appears twice (in " + which + ")");
        }
    };
    add_all(mem_train, "mem_train");
    add_all(mem_test, "mem_test");
    add_all(nonmem_train, "nonmem_train");
    add_all(nonmem_test, "nonmem_test");
    add_all(validation, "validation");
}

std::string MiSplit::to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["mem_size"] = mem_size;
    j["stratified"] = stratified;
    j["mem_train"] = mem_train;
    j["mem_test"] = mem_test;
    j["nonmem_train"] = nonmem_train;
    j["nonmem_test"] = nonmem_test;
    j["validation"] = validation;
    return j.dump(2);
}

MiSplit MiSplit::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    MiSplit s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.mem_size = j.at("mem_size").get<int>();
    s.stratified = j.value("stratified", true);
    s.mem_train = j.at("mem_train").get<std::vector<int>>();
    s.mem_test = j.at("mem_test").get<std::vector<int>>();
    s.nonmem_train = j.at("nonmem_train").get<std::vector<int>>();
    s.nonmem_test = j.at("nonmem_test").get<std::vector<int>>();
    s.validation = j.at("validation").get<std::vector<int>>();
    return s;
}

namespace {

// Distribute `total` slots over classes proportionally to the remaining pool
// sizes, capped by availability; leftovers go to the largest remainders.
std::vector<int> apportion(int total, const std::vector<int>& avail) {
    long long pool = std::accumulate(avail.begin(), avail.end(), 0LL);
    std::vector<int> quota(avail.size(), 0);
    std::vector<std::pair<double, int>> frac;
    long long assigned = 0;
    for (std::size_t c = 0; c < avail.size(); ++c) {
        double ideal = pool > 0 ? static_cast<double>(total) * avail[c] / pool : 0.0;
        quota[c] = std::min<long long>(avail[c], static_cast<long long>(ideal));
        assigned += quota[c];
        frac.push_back({ideal - quota[c], static_cast<int>(c)});
    }
    std::sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    long long remaining = total - assigned;
    std::size_t k = 0;
    while (remaining > 0) {
        bool progressed = false;
        for (std::size_t step = 0; step < frac.size() && remaining > 0; ++step) {
            int c = frac[(k + step) % frac.size()].second;
            if (quota[c] < avail[c]) {
                ++quota[c];
                --remaining;
                progressed = true;
            }
        }
        k = 0;
        if (!progressed) throw Error("apportion: no capacity left");
    }
    return quota;
}

}  // namespace

MiSplit make_splits(const LabeledDataset& dataset, int mem_size, std::uint64_t seed,
                    bool stratify) {
    dataset.validate();
    if (mem_size <= 0) throw ConfigError("mem_size must be positive");
    if (mem_size % 2 != 0)
        throw ConfigError("mem_size must be even so fit/eval halves have equal sizes");
    if (stratify && mem_size < dataset.num_classes)
        throw ConfigError("stratified split needs mem_size >= num_classes");

    const int n = static_cast<int>(dataset.size());
    const int val_size = std::max(1, static_cast<int>(std::llround(0.05 * n)));
    const int required = 2 * mem_size + val_size;
    if (n < required)
        throw Error("make_splits needs " + std::to_string(required) + " samples (" +
                    std::to_string(mem_size) + " members + " + std::to_string(mem_size) +
                    " non-members + " + std::to_string(val_size) + " validation) but dataset '" +
                    dataset.name + "' has " + std::to_string(n));

    MiSplit split;
    split.seed = seed;
    split.mem_size = mem_size;
    split.stratified = stratify;

    // Balanced halving: odd per-class quotas alternate sides so the totals
    // come out exactly equal (mem_size is even).
    auto halve = [](const std::vector<std::vector<int>>& per_class, std::vector<int>& first,
                    std::vector<int>& second) {
        int n_first = 0, n_second = 0;
        for (const auto& cls : per_class) {
            int take_first = static_cast<int>(cls.size()) / 2;
            if (cls.size() % 2 == 1 && n_first <= n_second) ++take_first;
            for (std::size_t i = 0; i < cls.size(); ++i) {
                if (static_cast<int>(i) < take_first)
                    first.push_back(cls[i]);
                else
                    second.push_back(cls[i]);
            }
            n_first += take_first;
            n_second += static_cast<int>(cls.size()) - take_first;
        }
    };

    if (stratify) {
        std::vector<std::vector<int>> by_class(dataset.num_classes);
        for (int i = 0; i < n; ++i) by_class[dataset.labels[i]].push_back(i);
        for (int c = 0; c < dataset.num_classes; ++c) {
            std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
            std::shuffle(by_class[c].begin(), by_class[c].end(), rng);
        }
        std::vector<int> avail(dataset.num_classes);
        for (int c = 0; c < dataset.num_classes; ++c) avail[c] = static_cast<int>(by_class[c].size());

        std::vector<int> mem_q = apportion(mem_size, avail);
        for (int c = 0; c < dataset.num_classes; ++c) avail[c] -= mem_q[c];
        std::vector<int> val_q = apportion(val_size, avail);
        for (int c = 0; c < dataset.num_classes; ++c) avail[c] -= val_q[c];
        std::vector<int> nonmem_q = apportion(mem_size, avail);

        std::vector<std::vector<int>> mem_cls(dataset.num_classes), nonmem_cls(dataset.num_classes);
        for (int c = 0; c < dataset.num_classes; ++c) {
            auto it = by_class[c].begin();
            mem_cls[c].assign(it, it + mem_q[c]);
            it += mem_q[c];
            split.validation.insert(split.validation.end(), it, it + val_q[c]);
            it += val_q[c];
            nonmem_cls[c].assign(it, it + nonmem_q[c]);
        }
        halve(mem_cls, split.mem_train, split.mem_test);
        halve(nonmem_cls, split.nonmem_train, split.nonmem_test);
    } else {
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 rng(derive_seed(seed, 0));
        std::shuffle(order.begin(), order.end(), rng);
        auto it = order.begin();
        split.mem_train.assign(it, it + mem_size / 2);
        it += mem_size / 2;
        split.mem_test.assign(it, it + mem_size / 2);
        it += mem_size / 2;
        split.validation.assign(it, it + val_size);
        it += val_size;
        split.nonmem_train.assign(it, it + mem_size / 2);
        it += mem_size / 2;
        split.nonmem_test.assign(it, it + mem_size / 2);
    }

    split.validate(dataset.size());
    return split;
}

AugmentationFamily AugmentationFamily::identity() { return {}; }

AugmentationFamily AugmentationFamily::image_crop_flip(int pad, double flip_prob) {
    if (pad < 0) throw ConfigError("crop pad must be >= 0");
    if (flip_prob < 0.0 || flip_prob > 1.0) throw ConfigError("flip_prob must be in [0,1]");
    AugmentationFamily f;
    f.kind = Kind::ImageCropFlip;
    f.pad = pad;
    f.flip_prob = flip_prob;
    return f;
}

AugmentationFamily AugmentationFamily::vector_jitter(double sigma) {
    if (sigma < 0.0) throw ConfigError("jitter sigma must be >= 0");
    AugmentationFamily f;
    f.kind = Kind::VectorJitter;
    f.sigma = sigma;
    return f;
}

std::string AugmentationFamily::to_json() const {
    nlohmann::json j;
    switch (kind) {
        case Kind::Identity: j["kind"] = "identity"; break;
        case Kind::ImageCropFlip:
            j["kind"] = "image_crop_flip";
            j["pad"] = pad;
            j["flip_prob"] = flip_prob;
            break;
        case Kind::VectorJitter:
            j["kind"] = "vector_jitter";
            j["sigma"] = sigma;
            break;
    }
    return j.dump();
}

AugmentationFamily AugmentationFamily::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "identity") return identity();
    if (kind == "image_crop_flip")
        return image_crop_flip(j.at("pad").get<int>(), j.value("flip_prob", 0.5));
    if (kind == "vector_jitter") return vector_jitter(j.at("sigma").get<double>());
    throw ConfigError("unknown augmentation kind '" + kind + "'");
}

namespace {

// Mirror index into [0, n) without repeating the edge sample.
inline int reflect(int q, int n) {
    if (q < 0) q = -q;
    if (q >= n) q = 2 * n - 2 - q;
    return q;
}

}  // namespace

Tensor crop_flip(const Tensor& image, int pad, int oy, int ox, bool flip) {
    std::size_t rank = image.shape.size();
    if (rank != 2 && rank != 3)
        throw DimensionError("crop_flip expects (H,W) or (C,H,W), got " + image.shape_str());
    int c = rank == 3 ? static_cast<int>(image.shape[0]) : 1;
    int h = static_cast<int>(image.shape[rank - 2]);
    int w = static_cast<int>(image.shape[rank - 1]);
    if (pad > h - 1 || pad > w - 1)
        throw DimensionError("reflect pad " + std::to_string(pad) + " too large for " +
                             image.shape_str());
    if (oy < 0 || oy > 2 * pad || ox < 0 || ox > 2 * pad)
        throw DimensionError("crop offset outside [0, 2*pad]");

    Tensor out = Tensor::zeros(image.shape);
    for (int ch = 0; ch < c; ++ch) {
        const double* src = image.data.data() + static_cast<std::size_t>(ch) * h * w;
        double* dst = out.data.data() + static_cast<std::size_t>(ch) * h * w;
        for (int y = 0; y < h; ++y) {
            int sy = reflect(y + oy - pad, h);
            for (int x = 0; x < w; ++x) {
                int tx = flip ? w - 1 - x : x;
                int sx = reflect(tx + ox - pad, w);
                dst[y * w + x] = src[sy * w + sx];
            }
        }
    }
    return out;
}

Sample augment(const AugmentationFamily& family, const Sample& sample, std::mt19937_64& rng) {
    switch (family.kind) {
        case AugmentationFamily::Kind::Identity:
            return sample;
        case AugmentationFamily::Kind::ImageCropFlip: {
            std::uniform_int_distribution<int> off(0, 2 * family.pad);
            int oy = off(rng);
            int ox = off(rng);
            std::uniform_real_distribution<double> u(0.0, 1.0);
            bool flip = u(rng) < family.flip_prob;
            return {crop_flip(sample.input, family.pad, oy, ox, flip), sample.label};
        }
        case AugmentationFamily::Kind::VectorJitter: {
            Sample out = sample;
            std::normal_distribution<double> noise(0.0, family.sigma);
            for (double& v : out.input.data) v += noise(rng);
            return out;
        }
    }
    throw Error("unreachable augmentation kind");
}

LabeledDataset synth_blobs(int num_classes, int dim, int per_class, double spread,
                           std::uint64_t seed) {
    if (num_classes <= 0 || dim <= 0 || per_class <= 0 || spread <= 0)
        throw ConfigError("synth_blobs arguments must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);

    std::vector<std::vector<double>> means(num_classes, std::vector<double>(dim));
    for (auto& m : means) {
        double norm = 0.0;
        for (double& v : m) {
            v = nd(rng);
            norm += v * v;
        }
        norm = std::sqrt(std::max(norm, 1e-300));
        for (double& v : m) v = v / norm * spread;
    }

    LabeledDataset ds;
    ds.num_classes = num_classes;
    ds.name = "blobs";
    for (int c = 0; c < num_classes; ++c) {
        for (int i = 0; i < per_class; ++i) {
            Tensor t = Tensor::zeros({static_cast<std::size_t>(dim)});
            for (int d = 0; d < dim; ++d) t.data[d] = means[c][d] + nd(rng);
            ds.inputs.push_back(std::move(t));
            ds.labels.push_back(c);
        }
    }
    ds.validate();
    return ds;
}

namespace {

std::vector<unsigned char> read_all(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path + "'");
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in),
                                      std::istreambuf_iterator<char>());
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off, const std::string& path) {
    if (off + 4 > b.size())
        throw FormatError("truncated IDX file '" + path + "' at byte offset " +
                          std::to_string(off));
    return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) |
           (std::uint32_t(b[off + 2]) << 8) | std::uint32_t(b[off + 3]);
}

}  // namespace

LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path) {
    auto img = read_all(images_path);
    auto lab = read_all(labels_path);

    std::uint32_t magic = be32(img, 0, images_path);
    if (magic != 0x00000803u) {
        std::ostringstream os;
        os << "bad IDX image magic 0x" << std::hex << magic << " at byte offset 0 in '"
           << images_path << "'";
        throw FormatError(os.str());
    }
    std::uint32_t n = be32(img, 4, images_path);
    std::uint32_t h = be32(img, 8, images_path);
    std::uint32_t w = be32(img, 12, images_path);
    std::size_t need = 16 + static_cast<std::size_t>(n) * h * w;
    if (img.size() < need)
        throw FormatError("truncated IDX image payload in '" + images_path + "': need " +
                          std::to_string(need) + " bytes, have " + std::to_string(img.size()) +
                          " (payload starts at byte offset 16)");

    std::uint32_t lmagic = be32(lab, 0, labels_path);
    if (lmagic != 0x00000801u) {
        std::ostringstream os;
        os << "bad IDX label magic 0x" << std::hex << lmagic << " at byte offset 0 in '"
           << labels_path << "'";
        throw FormatError(os.str());
    }
    std::uint32_t ln = be32(lab, 4, labels_path);
    if (ln != n)
        throw FormatError("IDX image/label count mismatch: " + std::to_string(n) + " vs " +
                          std::to_string(ln));
    if (lab.size() < 8 + static_cast<std::size_t>(ln))
        throw FormatError("truncated IDX label payload in '" + labels_path +
                          "' (payload starts at byte offset 8)");

    LabeledDataset ds;
    ds.name = images_path;
    int max_label = 0;
    for (std::uint32_t i = 0; i < n; ++i) {
        Tensor t = Tensor::zeros({1, h, w});
        const unsigned char* px = img.data() + 16 + static_cast<std::size_t>(i) * h * w;
        for (std::size_t j = 0; j < static_cast<std::size_t>(h) * w; ++j)
            t.data[j] = px[j] / 255.0;
        ds.inputs.push_back(std::move(t));
        int y = lab[8 + i];
        ds.labels.push_back(y);
        max_label = std::max(max_label, y);
    }
    ds.num_classes = max_label + 1;
    ds.validate();
    return ds;
}

LabeledDataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw FormatError("empty CSV file '" + path + "'");
    if (line.rfind("label", 0) != 0)
        throw FormatError("CSV header must start with 'label' in '" + path + "'");

    LabeledDataset ds;
    ds.name = path;
    int max_label = 0;
    std::size_t line_no = 1;
    std::size_t dim = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> values;
        while (std::getline(ss, cell, ',')) {
            try {
                values.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw FormatError("bad number '" + cell + "' at line " + std::to_string(line_no) +
                                  " in '" + path + "'");
            }
        }
        if (values.size() < 2)
            throw FormatError("too few columns at line " + std::to_string(line_no) + " in '" +
                              path + "'");
        if (dim == 0) dim = values.size() - 1;
        if (values.size() - 1 != dim)
            throw FormatError("inconsistent column count at line " + std::to_string(line_no) +
                              " in '" + path + "'");
        int y = static_cast<int>(std::llround(values[0]));
        max_label = std::max(max_label, y);
        ds.labels.push_back(y);
        ds.inputs.push_back(Tensor::checked({dim}, {values.begin() + 1, values.end()}));
    }
    ds.num_classes = max_label + 1;
    ds.validate();
    return ds;
}

ChannelStats channel_stats(const LabeledDataset& dataset, const std::vector<int>& indices) {
    if (indices.empty()) throw Error("channel_stats needs at least one sample");
    const Tensor& first = dataset.inputs[indices[0]];
    std::size_t channels = first.shape.size() >= 2 ? first.shape[0] : first.size();
    std::size_t per = first.size() / channels;

    ChannelStats st;
    st.mean.assign(channels, 0.0);
    st.stddev.assign(channels, 0.0);
    double count = static_cast<double>(indices.size()) * per;
    for (int i : indices) {
        const Tensor& t = dataset.inputs[i];
        for (std::size_t c = 0; c < channels; ++c)
            for (std::size_t j = 0; j < per; ++j) st.mean[c] += t.data[c * per + j];
    }
    for (std::size_t c = 0; c < channels; ++c) st.mean[c] /= count;
    for (int i : indices) {
        const Tensor& t = dataset.inputs[i];
        for (std::size_t c = 0; c < channels; ++c)
            for (std::size_t j = 0; j < per; ++j) {
                double d = t.data[c * per + j] - st.mean[c];
                st.stddev[c] += d * d;
            }
    }
    for (std::size_t c = 0; c < channels; ++c)
        st.stddev[c] = std::max(std::sqrt(st.stddev[c] / count), 1e-12);
    return st;
}

void standardize(LabeledDataset& dataset, const ChannelStats& stats) {
    if (dataset.inputs.empty()) return;
    const Tensor& first = dataset.inputs[0];
    std::size_t channels = first.shape.size() >= 2 ? first.shape[0] : first.size();
    std::size_t per = first.size() / channels;
    if (channels != stats.mean.size())
        throw DimensionError("channel stats size mismatch");
    for (Tensor& t : dataset.inputs)
        for (std::size_t c = 0; c < channels; ++c)
            for (std::size_t j = 0; j < per; ++j)
                t.data[c * per + j] = (t.data[c * per + j] - stats.mean[c]) / stats.stddev[c];
}

}  // namespace sifmi
