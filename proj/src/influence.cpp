#include "sifmi/influence.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <thread>

#include "sifmi/common.hpp"

namespace sifmi {

void LissaConfig::validate() const {
    if (repeats < 1) throw ConfigError("lissa repeats must be >= 1");
    if (depth < 0) throw ConfigError("lissa depth must be >= 1 (0 selects the default)");
    if (damping < 0) throw ConfigError("lissa damping must be >= 0");
    if (scale <= 0) throw ConfigError("lissa scale must be positive");
    if (sample_batch < 1) throw ConfigError("lissa sample_batch must be >= 1");
}

int LissaConfig::resolved_depth(int default_depth) const {
    return depth > 0 ? depth : default_depth;
}

ExactHessian::ExactHessian(Eigen::MatrixXd damped, double damping)
    : h_(std::move(damped)), damping_(damping) {
    if (h_.rows() != h_.cols()) throw DimensionError("hessian must be square");
    if (static_cast<std::size_t>(h_.rows()) > kOracleCap)
        throw Error("hessian dimension " + std::to_string(h_.rows()) +
                    " exceeds the oracle cap " + std::to_string(kOracleCap));
    double scale = std::max(1.0, h_.cwiseAbs().maxCoeff());
    double asym = (h_ - h_.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-8 * scale)
        throw NumericError("hessian asymmetry " + std::to_string(asym) +
                           " exceeds tolerance");
    llt_.compute(h_);
    llt_ok_ = llt_.info() == Eigen::Success;
}

Eigen::VectorXd ExactHessian::solve(const Eigen::VectorXd& g) const {
    if (!llt_ok_)
        throw NumericError(
            "damped hessian is not positive definite; increase the damping value");
    if (g.size() != h_.rows()) throw DimensionError("solve rhs dimension mismatch");
    double gnorm = g.norm();
    if (gnorm == 0.0) return Eigen::VectorXd::Zero(g.size());
    Eigen::VectorXd x = llt_.solve(g);
    double resid = (h_ * x - g).norm() / gnorm;
    if (resid >= 1e-8)
        throw NumericError("exact solve residual " + std::to_string(resid) +
                           " above 1e-8; hessian too ill-conditioned");
    return x;
}

ExactHessian exact_hessian_of(std::size_t dim, const HvpFn& full_hvp, double damping,
                              int threads) {
    if (dim > ExactHessian::kOracleCap)
        throw Error("parameter count " + std::to_string(dim) + " exceeds the oracle cap " +
                    std::to_string(ExactHessian::kOracleCap));
    if (damping < 0) throw ConfigError("damping must be >= 0");
    Eigen::MatrixXd h(dim, dim);

    // One basis-vector HVP per column; columns are independent.
    ParamLayout flat{{"flat", 0, dim, true}};
    auto fill_range = [&](std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j) {
            ParamVector e = ParamVector::zeros(flat);
            e[j] = 1.0;
            ParamVector col = full_hvp(e);
            if (col.size() != dim) throw DimensionError("hvp returned wrong dimension");
            for (std::size_t i = 0; i < dim; ++i) h(static_cast<Eigen::Index>(i),
                                                    static_cast<Eigen::Index>(j)) = col[i];
        }
    };
    int nthreads = std::max(1, threads);
    if (nthreads == 1 || dim < 8) {
        fill_range(0, dim);
    } else {
        std::vector<std::thread> pool;
        std::size_t chunk = (dim + nthreads - 1) / nthreads;
        for (int t = 0; t < nthreads; ++t) {
            std::size_t b = t * chunk, e = std::min(dim, b + chunk);
            if (b >= e) break;
            pool.emplace_back(fill_range, b, e);
        }
        for (auto& th : pool) th.join();
    }
    h.diagonal().array() += damping;
    return ExactHessian(std::move(h), damping);
}

namespace {

Batch batch_of_indices(const LabeledDataset& ds, const std::vector<int>& idx) {
    std::vector<Tensor> xs;
    std::vector<int> ys;
    xs.reserve(idx.size());
    for (int i : idx) {
        xs.push_back(ds.inputs[i]);
        ys.push_back(ds.labels[i]);
    }
    return make_batch(xs, ys);
}

ParamVector flatten_like(const ParamVector& src, const ParamLayout& layout) {
    return ParamVector(layout, src.raw());
}

}  // namespace

ExactHessian exact_hessian(const Checkpoint& ckpt, const LabeledDataset& dataset,
                           const std::vector<int>& train_indices, double damping,
                           int threads) {
    if (train_indices.empty()) throw Error("exact_hessian needs at least one training sample");
    Batch full = batch_of_indices(dataset, train_indices);
    const ParamLayout layout = ckpt.spec.layout();
    ParamLayout flat{{"flat", 0, layout_size(layout), true}};
    HvpFn op = [&](const ParamVector& v) {
        ParamVector hv = hvp(ckpt.spec, ckpt.params, full, flatten_like(v, layout), ckpt.l2);
        return flatten_like(hv, flat);
    };
    return exact_hessian_of(ckpt.params.size(), op, damping, threads);
}

ParamVector inverse_hvp_exact(const ExactHessian& hessian, const ParamVector& g) {
    if (g.size() != hessian.dim()) throw DimensionError("inverse_hvp_exact dimension mismatch");
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(g.size()));
    for (std::size_t i = 0; i < g.size(); ++i) rhs[static_cast<Eigen::Index>(i)] = g[i];
    Eigen::VectorXd x = hessian.solve(rhs);
    ParamVector out = ParamVector::zeros(g.layout());
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = x[static_cast<Eigen::Index>(i)];
    return out;
}

ParamVector inverse_hvp_lissa(const HvpSampler& sampler, const ParamVector& g,
                              const LissaConfig& cfg, int default_depth) {
    cfg.validate();
    const int depth = cfg.resolved_depth(default_depth);
    const double inv_c = 1.0 / cfg.scale;

    ParamVector acc = ParamVector::zeros(g.layout());
    for (int rep = 0; rep < cfg.repeats; ++rep) {
        ParamVector x = g;
        for (int t = 1; t <= depth; ++t) {
            HvpFn op = sampler();
            ParamVector hx = op(x);
            hx.axpy(cfg.damping, x);  // (H_b + damping I) x
            // x <- g + x - (H_b + damping I) x / c
            x += g;
            x.axpy(-inv_c, hx);
            if (!x.all_finite())
                throw DivergenceError("LiSSA iterate diverged at step " + std::to_string(t) +
                                          " (repeat " + std::to_string(rep) + ")",
                                      t);
        }
        acc.axpy(inv_c / cfg.repeats, x);
    }
    return acc;
}

HvpSampler make_train_sampler(const Checkpoint& ckpt, const LabeledDataset& dataset,
                              std::vector<int> indices, int sample_batch, std::uint64_t seed) {
    if (indices.empty()) throw Error("train sampler needs a nonempty index set");
    auto rng = std::make_shared<std::mt19937_64>(seed);
    auto idx = std::make_shared<std::vector<int>>(std::move(indices));
    return [&ckpt, &dataset, rng, idx, sample_batch]() -> HvpFn {
        std::uniform_int_distribution<std::size_t> pick(0, idx->size() - 1);
        std::vector<int> chosen(sample_batch);
        for (int k = 0; k < sample_batch; ++k) chosen[k] = (*idx)[pick(*rng)];
        auto batch = std::make_shared<Batch>(batch_of_indices(dataset, chosen));
        return [&ckpt, batch](const ParamVector& v) {
            return hvp(ckpt.spec, ckpt.params, *batch, v, ckpt.l2);
        };
    };
}

HvpSampler make_full_batch_sampler(const Checkpoint& ckpt, const LabeledDataset& dataset,
                                   std::vector<int> indices) {
    if (indices.empty()) throw Error("full-batch sampler needs a nonempty index set");
    auto batch = std::make_shared<Batch>(batch_of_indices(dataset, indices));
    return [&ckpt, batch]() -> HvpFn {
        return [&ckpt, batch](const ParamVector& v) {
            return hvp(ckpt.spec, ckpt.params, *batch, v, ckpt.l2);
        };
    };
}

HvpSampler make_augmentation_sampler(const Checkpoint& ckpt, const Sample& z,
                                     const AugmentationFamily& family, int sample_batch,
                                     std::uint64_t seed) {
    auto rng = std::make_shared<std::mt19937_64>(seed);
    auto base = std::make_shared<Sample>(z);
    auto fam = std::make_shared<AugmentationFamily>(family);
    return [&ckpt, rng, base, fam, sample_batch]() -> HvpFn {
        std::vector<Tensor> xs;
        std::vector<int> ys;
        for (int k = 0; k < sample_batch; ++k) {
            Sample s = augment(*fam, *base, *rng);
            xs.push_back(std::move(s.input));
            ys.push_back(s.label);
        }
        auto batch = std::make_shared<Batch>(make_batch(xs, ys));
        return [&ckpt, batch](const ParamVector& v) {
            return hvp(ckpt.spec, ckpt.params, *batch, v, ckpt.l2);
        };
    };
}

double spectral_norm_estimate(const HvpFn& op, const ParamVector& prototype, int iters,
                              std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    ParamVector v = prototype;
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = nd(rng);
    double norm = v.norm2();
    if (norm == 0.0) return 0.0;
    v *= 1.0 / norm;
    double estimate = 0.0;
    for (int t = 0; t < iters; ++t) {
        ParamVector hv = op(v);
        estimate = hv.norm2();
        if (estimate == 0.0) return 0.0;
        hv *= 1.0 / estimate;
        v = hv;
    }
    return estimate;
}

ParamVector sample_grad(const Checkpoint& ckpt, const Sample& z) {
    Batch b = make_batch({z.input}, {z.label});
    return grad(ckpt.spec, ckpt.params, b, ckpt.l2);
}

int label_match(const Checkpoint& ckpt, const Sample& z) {
    return predict(ckpt.spec, ckpt.params, z.input).label == z.label ? 1 : 0;
}

SifRecord sif(const Checkpoint& ckpt, const HvpSampler& train_sampler, const Sample& z,
              const LissaConfig& cfg, int sample_id, int default_depth) {
    ParamVector g = sample_grad(ckpt, z);
    ParamVector s = inverse_hvp_lissa(train_sampler, g, cfg, default_depth);
    SifRecord rec;
    rec.sample_id = sample_id;
    rec.score = -s.dot(g);
    rec.label_match = label_match(ckpt, z);
    if (!std::isfinite(rec.score)) throw NumericError("non-finite self-influence score");
    return rec;
}

SifRecord sif_exact(const Checkpoint& ckpt, const ExactHessian& hessian, const Sample& z,
                    int sample_id) {
    ParamVector g = sample_grad(ckpt, z);
    ParamVector s = inverse_hvp_exact(hessian, g);
    SifRecord rec;
    rec.sample_id = sample_id;
    rec.score = -s.dot(g);
    rec.label_match = label_match(ckpt, z);
    // -g^T H^{-1} g of an SPD solve is never positive beyond roundoff.
    double tol = 1e-9 * std::max(1.0, std::abs(rec.score));
    if (rec.score > tol)
        throw NumericError("exact-path self-influence " + std::to_string(rec.score) +
                           " is positive; SPD solve violated");
    return rec;
}

SifRecord ada_sif(const Checkpoint& ckpt, const Sample& z, const AugmentationFamily& family,
                  const LissaConfig& cfg, int grad_samples, int sample_id) {
    cfg.validate();
    if (grad_samples < 1) throw ConfigError("grad_samples must be >= 1");

    // Mean gradient over independent augmentations of z.
    std::mt19937_64 grad_rng(derive_seed(cfg.seed, 0x6772ad5ULL));
    ParamVector gbar = ParamVector::zeros(ckpt.spec.layout());
    for (int k = 0; k < grad_samples; ++k) {
        Sample s = augment(family, z, grad_rng);
        gbar += sample_grad(ckpt, s);
    }
    gbar *= 1.0 / static_cast<double>(grad_samples);

    HvpSampler sampler = make_augmentation_sampler(ckpt, z, family, cfg.sample_batch,
                                                   derive_seed(cfg.seed, 0xada51fULL));
    ParamVector sbar = inverse_hvp_lissa(sampler, gbar, cfg, /*default_depth=*/8);

    SifRecord rec;
    rec.sample_id = sample_id;
    rec.score = -sbar.dot(gbar);
    rec.label_match = label_match(ckpt, z);
    if (!std::isfinite(rec.score)) throw NumericError("non-finite adaptive score");
    return rec;
}

namespace {

// Pairwise reduction; sums of k identical values are exact when k is a power
// of two, so a degenerate family reproduces the single score bit-for-bit.
double pairwise_sum(const double* p, std::size_t n) {
    if (n == 1) return p[0];
    std::size_t half = n / 2;
    return pairwise_sum(p, half) + pairwise_sum(p + half, n - half);
}

}  // namespace

SifRecord avg_sif(const ScoreFn& score_one, const Checkpoint& ckpt, const Sample& z,
                  const AugmentationFamily& family, std::uint64_t aug_seed, int k,
                  int sample_id) {
    if (k < 1) throw ConfigError("avg_sif needs k >= 1");
    std::mt19937_64 rng(derive_seed(aug_seed, 0xa7657fULL));
    std::vector<double> scores;
    scores.reserve(k);
    for (int i = 0; i < k; ++i) {
        Sample s = augment(family, z, rng);
        scores.push_back(score_one(s));
    }
    SifRecord rec;
    rec.sample_id = sample_id;
    rec.score = pairwise_sum(scores.data(), scores.size()) / static_cast<double>(k);
    rec.label_match = label_match(ckpt, z);
    if (!std::isfinite(rec.score)) throw NumericError("non-finite ensemble score");
    return rec;
}

SifRecord avg_sif(const Checkpoint& ckpt, const LabeledDataset& dataset,
                  const std::vector<int>& train_indices, const Sample& z,
                  const AugmentationFamily& family, const LissaConfig& cfg, int k,
                  int sample_id) {
    int default_depth = static_cast<int>(std::min<std::size_t>(train_indices.size(), 1000));
    // Every augmented copy scores with an identically seeded sampler, so the
    // identity family collapses to the vanilla score exactly.
    ScoreFn one = [&](const Sample& s) {
        HvpSampler sampler =
            make_train_sampler(ckpt, dataset, train_indices, cfg.sample_batch, cfg.seed);
        return sif(ckpt, sampler, s, cfg, -1, default_depth).score;
    };
    return avg_sif(one, ckpt, z, family, cfg.seed, k, sample_id);
}

double pairwise_influence_exact(const Checkpoint& ckpt, const ExactHessian& hessian,
                                const Sample& z_train, const Sample& z_test) {
    ParamVector g_train = sample_grad(ckpt, z_train);
    ParamVector g_test = sample_grad(ckpt, z_test);
    return -g_test.dot(inverse_hvp_exact(hessian, g_train));
}

double pairwise_influence_lissa(const Checkpoint& ckpt, const HvpSampler& sampler,
                                const Sample& z_train, const Sample& z_test,
                                const LissaConfig& cfg) {
    ParamVector g_train = sample_grad(ckpt, z_train);
    ParamVector g_test = sample_grad(ckpt, z_test);
    return -g_test.dot(inverse_hvp_lissa(sampler, g_train, cfg));
}

ParamVector newton_minimize(const ModelSpec& spec, const LabeledDataset& dataset,
                            const std::vector<int>& indices, double l2, double tol,
                            int max_iter) {
    if (spec.arch != Arch::LogReg)
        throw ConfigError("newton_minimize supports the convex logreg objective only");
    if (l2 <= 0) throw ConfigError("newton_minimize needs l2 > 0 for strict convexity");
    if (indices.empty()) throw Error("newton_minimize needs training samples");

    Batch full = batch_of_indices(dataset, indices);
    ParamVector theta = ParamVector::zeros(spec.layout());
    double loss = forward_loss(spec, theta, full, l2);
    const ParamLayout layout = spec.layout();
    ParamLayout flat{{"flat", 0, layout_size(layout), true}};

    for (int it = 0; it < max_iter; ++it) {
        ParamVector g = grad(spec, theta, full, l2);
        double gnorm = g.norm2();
        if (gnorm <= tol) return theta;

        HvpFn op = [&](const ParamVector& v) {
            ParamVector hv = hvp(spec, theta, full, flatten_like(v, layout), l2);
            return flatten_like(hv, flat);
        };
        ExactHessian h = exact_hessian_of(theta.size(), op, 0.0);
        ParamVector step = inverse_hvp_exact(h, flatten_like(g, flat));

        double t = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            ParamVector cand = theta;
            cand.axpy(-t, flatten_like(step, layout));
            double cand_loss = forward_loss(spec, cand, full, l2);
            if (cand_loss <= loss) {
                theta = cand;
                loss = cand_loss;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted)
            throw NumericError("newton line search stalled at gradient norm " +
                               std::to_string(gnorm));
    }
    double final_norm = grad(spec, theta, full, l2).norm2();
    if (final_norm > tol)
        throw NumericError("newton did not converge: final gradient norm " +
                           std::to_string(final_norm) + " > " + std::to_string(tol));
    return theta;
}

double loo_retrain_oracle(const ModelSpec& spec, const LabeledDataset& dataset,
                          const std::vector<int>& train_indices, double l2, int removed_index,
                          const Sample& z_eval, double tol, int max_iter) {
    if (train_indices.size() > 200)
        throw ConfigError("loo_retrain_oracle is limited to n <= 200 training samples");
    std::vector<int> without;
    without.reserve(train_indices.size());
    bool found = false;
    for (int i : train_indices) {
        if (i == removed_index && !found) {
            found = true;
            continue;
        }
        without.push_back(i);
    }
    if (!found) throw Error("removed_index is not part of the training indices");
    if (without.empty()) throw Error("cannot remove the only training sample");

    ParamVector theta_full = newton_minimize(spec, dataset, train_indices, l2, tol, max_iter);
    ParamVector theta_without = newton_minimize(spec, dataset, without, l2, tol, max_iter);

    Batch eval = make_batch({z_eval.input}, {z_eval.label});
    double with_loss = forward_loss(spec, theta_full, eval, l2);
    double without_loss = forward_loss(spec, theta_without, eval, l2);
    return without_loss - with_loss;
}

}  // namespace sifmi
