#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "sifmi/data.hpp"
#include "sifmi/train.hpp"

namespace sifmi {

// Stochastic inverse-HVP estimator parameters. depth 0 means "resolve the
// per-scorer default": min(|D_mem|, 1000) for the vanilla scorer, 8 for the
// augmentation-adaptive one.
struct LissaConfig {
    int repeats = 1;       // r: independent estimates, averaged
    int depth = 0;         // d: recursion steps per estimate
    double damping = 0.01; // lambda added to the Hessian diagonal
    double scale = 25.0;   // c: ||H||/c must stay below 1 for convergence
    int sample_batch = 1;  // samples drawn per recursion step
    std::uint64_t seed = 0;

    void validate() const;
    int resolved_depth(int default_depth) const;
};

struct SifRecord {
    int sample_id = -1;
    double score = 0.0;
    int label_match = 0;  // 1 iff the target predicts the sample's own label
    int membership = -1;  // ground truth when known
};

// One-step Hessian-vector operator over a freshly drawn batch.
using HvpFn = std::function<ParamVector(const ParamVector&)>;
// Draws the next batch and returns its operator; LiSSA calls this once per step.
using HvpSampler = std::function<HvpFn()>;

// Dense damped Hessian for the small-model oracle path. Only constructible
// below the dimension cap; the Cholesky factorization is done up front.
class ExactHessian {
public:
    static constexpr std::size_t kOracleCap = 2000;

    ExactHessian(Eigen::MatrixXd damped, double damping);

    std::size_t dim() const { return static_cast<std::size_t>(h_.rows()); }
    double damping() const { return damping_; }
    const Eigen::MatrixXd& matrix() const { return h_; }
    bool positive_definite() const { return llt_ok_; }

    // Solves (H + damping*I) x = g; residual-checked.
    Eigen::VectorXd solve(const Eigen::VectorXd& g) const;

private:
    Eigen::MatrixXd h_;  // damping already on the diagonal
    Eigen::LLT<Eigen::MatrixXd> llt_;
    bool llt_ok_ = false;
    double damping_ = 0.0;
};

// Mean per-sample Hessian over the given training samples plus damping,
// assembled column-by-column from HVPs with basis vectors. Uses the l2 the
// checkpoint was trained with.
ExactHessian exact_hessian(const Checkpoint& ckpt, const LabeledDataset& dataset,
                           const std::vector<int>& train_indices, double damping,
                           int threads = 1);
// Same assembly from an arbitrary full-batch operator (test oracles plug
// quadratics in here).
ExactHessian exact_hessian_of(std::size_t dim, const HvpFn& full_hvp, double damping,
                              int threads = 1);

ParamVector inverse_hvp_exact(const ExactHessian& hessian, const ParamVector& g);

// LiSSA recursion: x_0 = g, x_{t+1} = g + (I - (H_b + damping I)/c) x_t,
// returning x_d / c averaged over `repeats` independent runs.
ParamVector inverse_hvp_lissa(const HvpSampler& sampler, const ParamVector& g,
                              const LissaConfig& cfg, int default_depth = 1000);

// Samplers for the two estimation regimes: training-point draws for the
// vanilla score, augmented copies of one sample for the adaptive score.
HvpSampler make_train_sampler(const Checkpoint& ckpt, const LabeledDataset& dataset,
                              std::vector<int> indices, int sample_batch, std::uint64_t seed);
HvpSampler make_full_batch_sampler(const Checkpoint& ckpt, const LabeledDataset& dataset,
                                   std::vector<int> indices);
HvpSampler make_augmentation_sampler(const Checkpoint& ckpt, const Sample& z,
                                     const AugmentationFamily& family, int sample_batch,
                                     std::uint64_t seed);

// Power-iteration estimate of ||H|| for the pre-run convergence check.
double spectral_norm_estimate(const HvpFn& op, const ParamVector& prototype, int iters,
                              std::uint64_t seed);

ParamVector sample_grad(const Checkpoint& ckpt, const Sample& z);
int label_match(const Checkpoint& ckpt, const Sample& z);

// Self-influence score -<s(z), grad(z)> with s(z) from LiSSA over the given
// training sampler.
SifRecord sif(const Checkpoint& ckpt, const HvpSampler& train_sampler, const Sample& z,
              const LissaConfig& cfg, int sample_id = -1, int default_depth = 1000);

// Exact-solve route; enforces the sign guarantee of an SPD solve.
SifRecord sif_exact(const Checkpoint& ckpt, const ExactHessian& hessian, const Sample& z,
                    int sample_id = -1);

// Augmentation-adaptive score: both the inverse-HVP estimate and the gradient
// are averaged over draws from the family, the gradient over `grad_samples`
// independent augmentations.
SifRecord ada_sif(const Checkpoint& ckpt, const Sample& z, const AugmentationFamily& family,
                  const LissaConfig& cfg, int grad_samples = 128, int sample_id = -1);

// Plain ensemble: mean vanilla score over k augmentations of z. The augmented
// copies share the sampler seed so the identity family reproduces the vanilla
// score bit-for-bit.
using ScoreFn = std::function<double(const Sample&)>;
SifRecord avg_sif(const ScoreFn& score_one, const Checkpoint& ckpt, const Sample& z,
                  const AugmentationFamily& family, std::uint64_t aug_seed, int k = 8,
                  int sample_id = -1);
SifRecord avg_sif(const Checkpoint& ckpt, const LabeledDataset& dataset,
                  const std::vector<int>& train_indices, const Sample& z,
                  const AugmentationFamily& family, const LissaConfig& cfg, int k = 8,
                  int sample_id = -1);

// -grad(z_test)^T H^{-1} grad(z_train), exact or estimated.
double pairwise_influence_exact(const Checkpoint& ckpt, const ExactHessian& hessian,
                                const Sample& z_train, const Sample& z_test);
double pairwise_influence_lissa(const Checkpoint& ckpt, const HvpSampler& sampler,
                                const Sample& z_train, const Sample& z_test,
                                const LissaConfig& cfg);

// Full-batch Newton minimizer for the strictly convex (logreg + l2) training
// objective used by the retraining oracle.
ParamVector newton_minimize(const ModelSpec& spec, const LabeledDataset& dataset,
                            const std::vector<int>& indices, double l2, double tol = 1e-10,
                            int max_iter = 200);

// Retrains with and without one training point and reports the change in the
// evaluation sample's loss: L(z_eval; theta_without) - L(z_eval; theta_full).
double loo_retrain_oracle(const ModelSpec& spec, const LabeledDataset& dataset,
                          const std::vector<int>& train_indices, double l2, int removed_index,
                          const Sample& z_eval, double tol = 1e-10, int max_iter = 200);

}  // namespace sifmi
