#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sifmi/data.hpp"
#include "sifmi/model.hpp"

namespace sifmi {

struct LrDecay {
    bool enabled = true;
    double factor = 0.1;
    int patience = 20;  // epochs without validation improvement before decaying
};

struct TrainConfig {
    int epochs = 400;
    int batch_size = 100;
    double l2 = 1e-4;
    double momentum = 0.9;
    bool nesterov = true;
    double lr = 0.0;  // mandatory, no sensible universal default
    LrDecay lr_decay;
    AugmentationFamily augmentation;  // identity means train on raw samples
    std::uint64_t seed = 0;

    void validate() const;
};

struct EpochStats {
    int epoch = 0;
    double loss = 0.0;
    double train_acc = 0.0;
    double val_acc = 0.0;
    double lr = 0.0;
};

// Frozen target model: parameters from the best-validation epoch plus the
// training metadata the scorers need (notably the l2 the loss was trained
// with and the augmentation family).
struct Checkpoint {
    ModelSpec spec;
    ParamVector params;
    int best_epoch = 0;
    double best_val_acc = 0.0;
    int epochs_run = 0;
    double l2 = 0.0;
    AugmentationFamily augmentation;
    std::uint64_t train_seed = 0;
    std::vector<EpochStats> history;

    std::uint64_t fingerprint() const;
};

// Kaiming-uniform fan-in weights, zero biases.
ParamVector init_params(const ModelSpec& spec, std::uint64_t seed);

// Minibatch SGD with momentum/Nesterov on the member subset, per-sample
// augmentation when configured, lr decayed on stalled validation accuracy.
// Returns the parameters of the epoch with the highest validation accuracy.
Checkpoint train_target(const ModelSpec& spec, const LabeledDataset& dataset,
                        const MiSplit& split, const TrainConfig& cfg);

double evaluate_accuracy(const Checkpoint& ckpt, const LabeledDataset& dataset,
                         const std::vector<int>& indices);
double evaluate_accuracy(const Checkpoint& ckpt, const std::vector<Sample>& samples);

// Versioned binary container: magic "SIFC", u32 version, spec JSON blob,
// little-endian f64 parameter payload, metadata JSON blob.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace sifmi
