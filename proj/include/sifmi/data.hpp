#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sifmi/tensor.hpp"

namespace sifmi {

struct Sample {
    Tensor input;
    int label = 0;
};

struct LabeledDataset {
    std::vector<Tensor> inputs;
    std::vector<int> labels;
    int num_classes = 0;
    std::string name;

    std::size_t size() const { return inputs.size(); }
    Sample sample(std::size_t i) const { return {inputs[i], labels[i]}; }
    void validate() const;
};

// Four-way member/non-member split plus the validation slice used by the
// training schedule. All index lists are pairwise disjoint; the four
// attack subsets have equal sizes.
struct MiSplit {
    std::vector<int> mem_train;
    std::vector<int> mem_test;
    std::vector<int> nonmem_train;
    std::vector<int> nonmem_test;
    std::vector<int> validation;

    std::uint64_t seed = 0;
    int mem_size = 0;
    bool stratified = true;

    std::vector<int> members() const;
    std::vector<int> nonmembers() const;
    void validate(std::size_t dataset_size) const;

    std::string to_json() const;
    static MiSplit from_json(const std::string& text);
};

// The members pool doubles as the target training set; validation is carved
// as ~5% of the dataset; non-members come from the remainder. Each of the
// member and non-member pools is split in half into fit/eval subsets.
MiSplit make_splits(const LabeledDataset& dataset, int mem_size, std::uint64_t seed,
                    bool stratify = true);

// Label-preserving input transformation family used during target training
// and by the augmentation-adaptive scorer.
struct AugmentationFamily {
    enum class Kind { Identity, ImageCropFlip, VectorJitter };
    Kind kind = Kind::Identity;
    int pad = 0;
    double flip_prob = 0.5;
    double sigma = 0.0;

    static AugmentationFamily identity();
    static AugmentationFamily image_crop_flip(int pad, double flip_prob);
    static AugmentationFamily vector_jitter(double sigma);

    bool is_identity() const { return kind == Kind::Identity; }
    std::string to_json() const;
    static AugmentationFamily from_json(const std::string& text);
};

// Deterministic crop/flip kernel: reflect-pad by `pad`, crop back to the
// original size at offset (oy, ox) in [0, 2*pad]^2, then mirror horizontally
// when `flip` is set. Accepts (H,W) or (C,H,W) tensors.
Tensor crop_flip(const Tensor& image, int pad, int oy, int ox, bool flip);

Sample augment(const AugmentationFamily& family, const Sample& sample, std::mt19937_64& rng);

// Gaussian class clusters around unit-norm means scaled by `spread`.
LabeledDataset synth_blobs(int num_classes, int dim, int per_class, double spread,
                           std::uint64_t seed);

// IDX image/label file pair (big-endian dims, unsigned byte payload).
// Pixels are scaled to [0,1]; sample shape is (1,H,W).
LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path);

// CSV with header row `label,f0,f1,...`.
LabeledDataset load_csv(const std::string& path);

struct ChannelStats {
    std::vector<double> mean;
    std::vector<double> stddev;
};

// Per-channel statistics over the given sample indices (members only, so the
// preprocessing never sees non-member pixels).
ChannelStats channel_stats(const LabeledDataset& dataset, const std::vector<int>& indices);
void standardize(LabeledDataset& dataset, const ChannelStats& stats);

}  // namespace sifmi
