#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sifmi/influence.hpp"

namespace sifmi {

// Which score feeds the attack, with everything needed to reproduce it.
struct ScorerDescriptor {
    std::string kind = "sif";  // sif | adasif | avgsif
    LissaConfig lissa;
    AugmentationFamily family;
    int grad_samples = 128;  // adasif gradient averaging draws
    int ensemble_k = 8;      // avgsif ensemble size

    std::string to_json() const;
    static ScorerDescriptor from_json(const std::string& text);
};

struct FitRecords {
    std::vector<SifRecord> members;
    std::vector<SifRecord> nonmembers;
};

// Candidate grids: 1000 evenly spaced values around the member minimum and
// maximum. A zero member spread expands to an epsilon band placed strictly
// below/above the common value so a fitted pair always straddles it.
struct ThresholdGrids {
    std::vector<double> tau1;
    std::vector<double> tau2;
};
ThresholdGrids threshold_grids(const std::vector<double>& member_scores, int grid_size = 1000);

struct ThresholdFit {
    double tau1 = 0.0;
    double tau2 = 0.0;
    double balanced_acc = 0.0;
    long long correct = 0;  // integer numerator of the balanced accuracy
};

// Grid search maximizing balanced accuracy; a sample is predicted member iff
// tau1 < s < tau2 and its label-match bit is set (strict inequalities).
// First maximum in scan order (ascending tau1 index, then tau2 index) wins.
// The optimized version uses prefix counts over sorted scores; the naive one
// is the O(grid^2 * n) reference scan kept as the equivalence oracle.
ThresholdFit set_thresholds(const FitRecords& fit, int grid_size = 1000);
ThresholdFit set_thresholds_naive(const FitRecords& fit, int grid_size = 1000);

struct AttackModel {
    double tau1 = 0.0;
    double tau2 = 0.0;
    ScorerDescriptor scorer;
    std::uint64_t checkpoint_fingerprint = 0;
    double fit_balanced_acc = 0.0;
    int grid_size = 1000;
    std::uint64_t seed = 0;

    std::string to_json() const;
    static AttackModel from_json(const std::string& text);
};

void save_attack(const AttackModel& attack, const std::string& path);
AttackModel load_attack(const std::string& path);

// Fit from already-computed records.
AttackModel fit_sif_attack(const Checkpoint& ckpt, const FitRecords& records,
                           const ScorerDescriptor& scorer, int grid_size = 1000);

// Fit by scoring the given fit-subset ids. Individual scorer failures are
// dropped and reported through `dropped`; more than 1% of them aborts.
AttackModel fit_sif_attack(const Checkpoint& ckpt, const std::vector<int>& mem_fit_ids,
                           const std::vector<int>& nonmem_fit_ids,
                           const std::function<SifRecord(int)>& score_one,
                           const ScorerDescriptor& scorer, int grid_size = 1000,
                           std::vector<int>* dropped = nullptr);

// 1 iff tau1 < score < tau2 and the target predicts the sample's own label.
int infer_membership(const AttackModel& attack, const Checkpoint& ckpt, double score,
                     int label_match);
int infer_membership(const AttackModel& attack, const Checkpoint& ckpt, const Sample& z,
                     double score);

// Baseline: member iff the target classifies the sample correctly.
int gap_attack(const Checkpoint& ckpt, const Sample& z);

// Black-box baseline: regularized logistic classifier over the target's
// output statistics (sorted probabilities, loss, label-match bit).
struct BlackboxAttack {
    ModelSpec spec;
    ParamVector params;
    std::vector<double> feature_mean;
    std::vector<double> feature_std;
};

std::vector<double> blackbox_features(const Checkpoint& ckpt, const Sample& z);
BlackboxAttack fit_blackbox_attack(const Checkpoint& ckpt, const LabeledDataset& dataset,
                                   const std::vector<int>& mem_fit_ids,
                                   const std::vector<int>& nonmem_fit_ids, double l2 = 1e-2);
int blackbox_predict(const BlackboxAttack& attack, const Checkpoint& ckpt, const Sample& z);

}  // namespace sifmi
