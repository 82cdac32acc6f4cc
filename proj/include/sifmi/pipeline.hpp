#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "sifmi/config.hpp"
#include "sifmi/metrics.hpp"
#include "sifmi/score_io.hpp"

namespace sifmi {

// Verb-specific failures the CLI maps to exit codes.
struct ScorerBudgetExceeded : Error {
    using Error::Error;
};
struct FitFailure : Error {
    using Error::Error;
};

namespace pipeline {

// Loaded experiment: dataset (standardized when requested), split, resolved
// model and scorer. The scorer's depth default depends on the split, so the
// stored config is the fully-resolved one.
struct RunContext {
    ExperimentConfig cfg;
    LabeledDataset dataset;
    MiSplit split;
    ModelSpec model;
};

RunContext prepare(const ExperimentConfig& cfg, std::ostream* log = nullptr);

// Writes resolved_config.json and split.json into out_dir.
void write_run_manifest(const RunContext& ctx, const std::string& out_dir);

struct TrainArtifacts {
    Checkpoint ckpt;
    std::string checkpoint_path;
    std::string metrics_path;
};

// Trains the target and writes checkpoint + Table-style accuracy metrics.
TrainArtifacts run_train(const RunContext& ctx, const std::string& out_dir,
                         const std::string& checkpoint_override = "");

// Per-sample scorer for the given descriptor (seeds derived per sample id, so
// results are independent of scheduling).
std::function<SifRecord(int)> make_scorer(const RunContext& ctx, const Checkpoint& ckpt,
                                          const ScorerDescriptor& desc);

// Estimates ||H|| over the member set and warns when ||H||/scale >= 1.
double spectral_check(const RunContext& ctx, const Checkpoint& ckpt,
                      const ScorerDescriptor& desc, std::ostream* log);

struct ScoreRunResult {
    std::vector<ScoreRow> rows;  // ascending sample id
    std::vector<int> failed_ids;
};

// Scores a subset ("fit", "eval" or "all") into csv_path. Existing rows are
// reused (resume); progress is persisted every 100 samples; more than 1%
// scorer failures aborts.
ScoreRunResult run_score(const RunContext& ctx, const Checkpoint& ckpt,
                         const std::string& subset, const ScorerDescriptor& desc,
                         const std::string& csv_path, int threads,
                         std::ostream* log = nullptr);

struct AttackComparison {
    AttackModel attack;                // the configured score-threshold attack
    std::vector<EvalReport> reports;   // gap, blackbox, sif, [adasif], [avgsif]
    double model_acc_members = 0.0;    // target accuracy on eval members
    double model_acc_nonmembers = 0.0; // target accuracy on eval non-members
};

// Fits the threshold attack from fit-subset scores and evaluates it plus the
// baselines on the eval subsets. Writes attack JSON, prediction CSVs and
// comparison.json under out_dir.
AttackComparison run_attack(const RunContext& ctx, const Checkpoint& ckpt,
                            const std::string& out_dir, std::ostream* log = nullptr);

struct OracleCheck {
    std::string name;
    double tolerance = 0.0;
    double measured = 0.0;
    bool pass = false;
    std::string direction;  // "max" (measured <= tolerance) or "min"
};

struct OracleResult {
    bool pass = false;
    std::vector<OracleCheck> checks;
    std::string to_json() const;
};

// Finite-difference, exact-vs-LiSSA, and leave-one-out retraining checks.
// corrupt_gradient is a fault-injection hook used by tests.
OracleResult run_oracle(const RunContext& ctx, bool corrupt_gradient = false,
                        std::ostream* log = nullptr);

// Rebuilds an evaluation report (+ score histogram) from persisted artifacts.
EvalReport run_report(const RunContext& ctx, const std::string& attack_json_path,
                      const std::string& scores_csv_path, const std::string& out_dir);

}  // namespace pipeline
}  // namespace sifmi
