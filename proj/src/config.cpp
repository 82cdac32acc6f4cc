#include "sifmi/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sifmi/common.hpp"

namespace sifmi {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            throw ConfigError("unknown config key '" + it.key() + "' in " + where);
}

DatasetSpec parse_dataset(const json& j) {
    reject_unknown(j, {"kind", "classes", "dim", "per_class", "spread", "seed", "images",
                       "labels", "standardize", "path"},
                   "dataset");
    DatasetSpec d;
    d.kind = j.value("kind", "blobs");
    if (d.kind == "blobs") {
        d.classes = j.value("classes", d.classes);
        d.dim = j.value("dim", d.dim);
        d.per_class = j.value("per_class", d.per_class);
        d.spread = j.value("spread", d.spread);
        d.seed = j.value("seed", d.seed);
    } else if (d.kind == "idx") {
        d.images = j.at("images").get<std::string>();
        d.labels = j.at("labels").get<std::string>();
        d.standardize = j.value("standardize", false);
    } else if (d.kind == "csv") {
        d.path = j.at("path").get<std::string>();
        d.standardize = j.value("standardize", false);
    } else {
        throw ConfigError("unknown dataset kind '" + d.kind + "'");
    }
    return d;
}

AugmentationFamily parse_augmentation(const json& j) {
    reject_unknown(j, {"kind", "pad", "flip_prob", "sigma"}, "augmentation");
    try {
        return AugmentationFamily::from_json(j.dump());
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("bad augmentation block: ") + e.what());
    }
}

}  // namespace

ExperimentConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    reject_unknown(j,
                   {"dataset", "mem_size", "split_seed", "stratify", "model", "train",
                    "augmentation", "scorer", "grid_size", "histogram_bins", "out_dir",
                    "threads"},
                   "top level");

    ExperimentConfig cfg;
    try {
        cfg.dataset = parse_dataset(j.at("dataset"));
        cfg.mem_size = j.at("mem_size").get<int>();
        cfg.split_seed = j.value("split_seed", 0ULL);
        cfg.stratify = j.value("stratify", true);

        // in_channels/in_h/in_w appear in resolved dumps; dims always come
        // from the dataset, so they are accepted and re-derived.
        const json& jm = j.at("model");
        reject_unknown(jm, {"arch", "dim", "classes", "hidden", "channels", "in_channels",
                            "in_h", "in_w"},
                       "model");
        cfg.model_arch = jm.at("arch").get<std::string>();
        cfg.model_dim = jm.value("dim", 0);
        cfg.model_classes = jm.value("classes", 0);
        cfg.model_hidden = jm.value("hidden", std::vector<int>{});
        cfg.cnn_channels = jm.value("channels", 4);

        const json& jt = j.at("train");
        reject_unknown(jt,
                       {"epochs", "batch_size", "l2", "momentum", "nesterov", "lr", "lr_decay",
                        "seed"},
                       "train");
        cfg.train.epochs = jt.value("epochs", 400);
        cfg.train.batch_size = jt.value("batch_size", 100);
        cfg.train.l2 = jt.value("l2", 1e-4);
        cfg.train.momentum = jt.value("momentum", 0.9);
        cfg.train.nesterov = jt.value("nesterov", true);
        cfg.train.lr = jt.at("lr").get<double>();  // mandatory, per-arch tuning required
        if (jt.contains("lr_decay")) {
            const json& jd = jt.at("lr_decay");
            reject_unknown(jd, {"enabled", "factor", "patience"}, "train.lr_decay");
            cfg.train.lr_decay.enabled = jd.value("enabled", true);
            cfg.train.lr_decay.factor = jd.value("factor", 0.1);
            cfg.train.lr_decay.patience = jd.value("patience", 20);
        }
        cfg.train.seed = jt.value("seed", 0ULL);

        if (j.contains("augmentation")) cfg.augmentation = parse_augmentation(j.at("augmentation"));
        cfg.train.augmentation = cfg.augmentation;

        if (j.contains("scorer")) {
            // "family" appears in resolved dumps; it always mirrors the
            // top-level augmentation block.
            const json& js = j.at("scorer");
            reject_unknown(js,
                           {"kind", "r", "d", "damping", "scale", "sample_batch", "seed",
                            "grad_samples", "ensemble_k", "family"},
                           "scorer");
            cfg.scorer.kind = js.value("kind", "sif");
            cfg.scorer.lissa.repeats = js.value("r", cfg.scorer.kind == "adasif" ? 8 : 1);
            cfg.scorer.lissa.depth = js.value("d", 0);
            cfg.scorer.lissa.damping = js.value("damping", 0.01);
            cfg.scorer.lissa.scale = js.value("scale", 25.0);
            cfg.scorer.lissa.sample_batch = js.value("sample_batch", 1);
            cfg.scorer.lissa.seed = js.value("seed", 0ULL);
            cfg.scorer.grad_samples = js.value("grad_samples", 128);
            cfg.scorer.ensemble_k = js.value("ensemble_k", 8);
        } else {
            cfg.scorer.lissa.repeats = 1;
        }
        if (cfg.scorer.kind != "sif" && cfg.scorer.kind != "adasif" && cfg.scorer.kind != "avgsif")
            throw ConfigError("scorer kind must be sif, adasif or avgsif");
        cfg.scorer.family = cfg.augmentation;

        cfg.grid_size = j.value("grid_size", 1000);
        cfg.histogram_bins = j.value("histogram_bins", 50);
        cfg.out_dir = j.value("out_dir", "out");
        cfg.threads = j.value("threads", 1);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("bad config: ") + e.what());
    }

    if (cfg.mem_size <= 0) throw ConfigError("mem_size must be positive");
    if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
    if (cfg.grid_size < 2) throw ConfigError("grid_size must be >= 2");
    cfg.train.validate();
    cfg.scorer.lissa.validate();

    // Referenced input paths must exist up front.
    if (cfg.dataset.kind == "idx") {
        for (const std::string& p : {cfg.dataset.images, cfg.dataset.labels})
            if (!std::filesystem::exists(p))
                throw ConfigError("dataset file does not exist: '" + p + "'");
    }
    if (cfg.dataset.kind == "csv" && !std::filesystem::exists(cfg.dataset.path))
        throw ConfigError("dataset file does not exist: '" + cfg.dataset.path + "'");
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json(ss.str());
}

LabeledDataset load_dataset(const DatasetSpec& spec) {
    if (spec.kind == "blobs")
        return synth_blobs(spec.classes, spec.dim, spec.per_class, spec.spread, spec.seed);
    if (spec.kind == "idx") return load_idx(spec.images, spec.labels);
    if (spec.kind == "csv") return load_csv(spec.path);
    throw ConfigError("unknown dataset kind '" + spec.kind + "'");
}

ModelSpec resolve_model(const ExperimentConfig& cfg, const LabeledDataset& dataset) {
    int classes = cfg.model_classes > 0 ? cfg.model_classes : dataset.num_classes;
    const Tensor& first = dataset.inputs.at(0);
    if (cfg.model_arch == "logreg" || cfg.model_arch == "mlp") {
        int dim = cfg.model_dim > 0 ? cfg.model_dim : static_cast<int>(first.size());
        if (dim != static_cast<int>(first.size()))
            throw ConfigError("model dim " + std::to_string(dim) + " does not match dataset (" +
                              std::to_string(first.size()) + ")");
        if (cfg.model_arch == "logreg") return ModelSpec::logreg(dim, classes);
        return ModelSpec::mlp(dim, cfg.model_hidden, classes);
    }
    if (cfg.model_arch == "smallcnn") {
        if (first.shape.size() != 3)
            throw ConfigError("smallcnn needs (C,H,W) inputs, dataset has " + first.shape_str());
        return ModelSpec::smallcnn(static_cast<int>(first.shape[0]),
                                   static_cast<int>(first.shape[1]),
                                   static_cast<int>(first.shape[2]), cfg.cnn_channels, classes);
    }
    throw ConfigError("unknown model arch '" + cfg.model_arch + "'");
}

std::string resolved_config_json(const ExperimentConfig& cfg, const ModelSpec& model) {
    json j;
    json jd;
    jd["kind"] = cfg.dataset.kind;
    if (cfg.dataset.kind == "blobs") {
        jd["classes"] = cfg.dataset.classes;
        jd["dim"] = cfg.dataset.dim;
        jd["per_class"] = cfg.dataset.per_class;
        jd["spread"] = cfg.dataset.spread;
        jd["seed"] = cfg.dataset.seed;
    } else if (cfg.dataset.kind == "idx") {
        jd["images"] = cfg.dataset.images;
        jd["labels"] = cfg.dataset.labels;
        jd["standardize"] = cfg.dataset.standardize;
    } else {
        jd["path"] = cfg.dataset.path;
        jd["standardize"] = cfg.dataset.standardize;
    }
    j["dataset"] = jd;
    j["mem_size"] = cfg.mem_size;
    j["split_seed"] = cfg.split_seed;
    j["stratify"] = cfg.stratify;
    j["model"] = json::parse(model.to_json());
    j["train"] = {{"epochs", cfg.train.epochs},
                  {"batch_size", cfg.train.batch_size},
                  {"l2", cfg.train.l2},
                  {"momentum", cfg.train.momentum},
                  {"nesterov", cfg.train.nesterov},
                  {"lr", cfg.train.lr},
                  {"lr_decay",
                   {{"enabled", cfg.train.lr_decay.enabled},
                    {"factor", cfg.train.lr_decay.factor},
                    {"patience", cfg.train.lr_decay.patience}}},
                  {"seed", cfg.train.seed}};
    j["augmentation"] = json::parse(cfg.augmentation.to_json());
    j["scorer"] = json::parse(cfg.scorer.to_json());
    j["grid_size"] = cfg.grid_size;
    j["histogram_bins"] = cfg.histogram_bins;
    j["out_dir"] = cfg.out_dir;
    j["threads"] = cfg.threads;
    return j.dump(2);
}

}  // namespace sifmi
