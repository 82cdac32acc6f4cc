#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sifmi/attack.hpp"
#include "sifmi/data.hpp"
#include "sifmi/train.hpp"

namespace sifmi {

struct DatasetSpec {
    std::string kind = "blobs";  // blobs | idx | csv
    // blobs
    int classes = 5;
    int dim = 20;
    int per_class = 250;
    double spread = 2.0;
    std::uint64_t seed = 1;
    // idx
    std::string images;
    std::string labels;
    bool standardize = false;  // per-channel, member statistics only
    // csv
    std::string path;
};

// Full experiment description. One JSON file; every defaulted field is
// materialized into the resolved copy written next to the outputs.
struct ExperimentConfig {
    DatasetSpec dataset;
    int mem_size = 0;
    std::uint64_t split_seed = 0;
    bool stratify = true;

    std::string model_arch = "logreg";
    int model_dim = 0;      // 0 = infer from dataset
    int model_classes = 0;  // 0 = infer from dataset
    std::vector<int> model_hidden;
    int cnn_channels = 4;

    TrainConfig train;
    AugmentationFamily augmentation;  // shared by training and the scorers
    ScorerDescriptor scorer;
    int grid_size = 1000;
    int histogram_bins = 50;

    std::string out_dir = "out";
    int threads = 1;
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig config_from_json(const std::string& text);

// The fully-resolved dump: defaults filled in, model dims made explicit.
std::string resolved_config_json(const ExperimentConfig& cfg, const ModelSpec& model);

// Builds the model spec against the loaded dataset (inferring dim/classes).
ModelSpec resolve_model(const ExperimentConfig& cfg, const LabeledDataset& dataset);
LabeledDataset load_dataset(const DatasetSpec& spec);

}  // namespace sifmi
