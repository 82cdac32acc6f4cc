#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "sifmi/attack.hpp"
#include "sifmi/influence.hpp"
#include "sifmi/metrics.hpp"

using namespace sifmi;

namespace {

ParamLayout flat_layout(std::size_t n) { return {{"flat", 0, n, true}}; }

ParamVector flat_vec(std::vector<double> v) {
    ParamLayout l = flat_layout(v.size());
    return ParamVector(l, std::move(v));
}

// Fixed-matrix quadratic objective: hvp is v -> A v.
HvpFn matrix_op(const std::vector<std::vector<double>>& a) {
    return [a](const ParamVector& v) {
        ParamVector out = ParamVector::zeros(v.layout());
        for (std::size_t i = 0; i < a.size(); ++i)
            for (std::size_t j = 0; j < a.size(); ++j) out[i] += a[i][j] * v[j];
        return out;
    };
}

struct LogregWorld {
    LabeledDataset ds;
    std::vector<int> train_ids;
    std::vector<int> heldout_ids;
    Checkpoint ckpt;
};

LogregWorld make_logreg_world(int classes, int dim, int per_class, double spread, double l2,
                              std::uint64_t seed, double input_scale = 1.0) {
    LogregWorld w;
    w.ds = synth_blobs(classes, dim, per_class, spread, seed);
    if (input_scale != 1.0)
        for (Tensor& t : w.ds.inputs)
            for (double& v : t.data) v *= input_scale;
    int n = static_cast<int>(w.ds.size());
    for (int i = 0; i < n; ++i) (i % 2 == 0 ? w.train_ids : w.heldout_ids).push_back(i);
    w.ckpt.spec = ModelSpec::logreg(dim, classes);
    w.ckpt.params = newton_minimize(w.ckpt.spec, w.ds, w.train_ids, l2, 1e-10, 200);
    w.ckpt.l2 = l2;
    return w;
}

}  // namespace

TEST_CASE("quadratic hessian assembles as A plus damping") {
    std::vector<std::vector<double>> a = {{1.0, 0.0}, {0.0, 2.0}};
    ExactHessian h = exact_hessian_of(2, matrix_op(a), 0.25);
    CHECK(h.matrix()(0, 0) == doctest::Approx(1.25).epsilon(1e-15));
    CHECK(h.matrix()(1, 1) == doctest::Approx(2.25).epsilon(1e-15));
    CHECK(h.matrix()(0, 1) == 0.0);
    CHECK(h.dim() == 2);

    // diag(1,2) against (1,1) is the textbook product.
    ParamVector v = flat_vec({1.0, 1.0});
    ParamVector hv = matrix_op(a)(v);
    CHECK(hv[0] == 1.0);
    CHECK(hv[1] == 2.0);
}

TEST_CASE("oracle cap is enforced") {
    std::vector<std::vector<double>> a(1, std::vector<double>(1, 1.0));
    CHECK_THROWS_AS(exact_hessian_of(ExactHessian::kOracleCap + 1, matrix_op(a), 0.0), Error);
}

TEST_CASE("logreg exact hessian is symmetric and matches finite differences") {
    LogregWorld w = make_logreg_world(3, 4, 14, 2.0, 0.05, 17);
    std::vector<int> twenty(w.train_ids.begin(), w.train_ids.begin() + 20);
    ExactHessian h = exact_hessian(w.ckpt, w.ds, twenty, 0.0);

    double asym = (h.matrix() - h.matrix().transpose()).cwiseAbs().maxCoeff();
    CHECK(asym < 1e-8);

    std::vector<Tensor> xs;
    std::vector<int> ys;
    for (int i : twenty) {
        xs.push_back(w.ds.inputs[i]);
        ys.push_back(w.ds.labels[i]);
    }
    Batch full = make_batch(xs, ys);
    const double step = 1e-5;
    std::size_t p = w.ckpt.params.size();
    for (std::size_t j = 0; j < p; ++j) {
        ParamVector tp = w.ckpt.params, tm = w.ckpt.params;
        tp[j] += step;
        tm[j] -= step;
        ParamVector gp = grad(w.ckpt.spec, tp, full, w.ckpt.l2);
        ParamVector gm = grad(w.ckpt.spec, tm, full, w.ckpt.l2);
        for (std::size_t i = 0; i < p; ++i) {
            double fd = (gp[i] - gm[i]) / (2 * step);
            CHECK(h.matrix()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) ==
                  doctest::Approx(fd).epsilon(1e-3).scale(1.0));
        }
    }
}

TEST_CASE("exact inverse solve on identity and diagonal systems") {
    std::vector<std::vector<double>> eye = {{1.0, 0.0}, {0.0, 1.0}};
    ExactHessian h_eye = exact_hessian_of(2, matrix_op(eye), 0.0);
    ParamVector g = flat_vec({3.0, -4.0});
    ParamVector x = inverse_hvp_exact(h_eye, g);
    CHECK(x[0] == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(x[1] == doctest::Approx(-4.0).epsilon(1e-14));

    std::vector<std::vector<double>> diag = {{2.0, 0.0}, {0.0, 4.0}};
    ExactHessian h_diag = exact_hessian_of(2, matrix_op(diag), 0.0);
    ParamVector x2 = inverse_hvp_exact(h_diag, flat_vec({2.0, 4.0}));
    CHECK(x2[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(x2[1] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("random SPD solve keeps the residual tiny") {
    const std::size_t n = 50;
    std::mt19937_64 rng(23);
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::MatrixXd b(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) b(i, j) = nd(rng);
    Eigen::MatrixXd spd = b * b.transpose() + 0.5 * Eigen::MatrixXd::Identity(n, n);

    std::vector<std::vector<double>> a(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a[i][j] = spd(i, j);
    ExactHessian h = exact_hessian_of(n, matrix_op(a), 0.0);

    ParamVector g = ParamVector::zeros(flat_layout(n));
    for (std::size_t i = 0; i < n; ++i) g[i] = nd(rng);
    ParamVector x = inverse_hvp_exact(h, g);

    Eigen::VectorXd xe(n), ge(n);
    for (std::size_t i = 0; i < n; ++i) {
        xe(i) = x[i];
        ge(i) = g[i];
    }
    CHECK((spd * xe - ge).norm() / ge.norm() < 1e-10);
}

TEST_CASE("indefinite matrix is rejected with a damping hint") {
    std::vector<std::vector<double>> indef = {{1.0, 0.0}, {0.0, -2.0}};
    ExactHessian h = exact_hessian_of(2, matrix_op(indef), 0.0);
    CHECK(!h.positive_definite());
    try {
        inverse_hvp_exact(h, flat_vec({1.0, 1.0}));
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("damping") != std::string::npos);
    }
}

TEST_CASE("lissa fixpoint: identity hessian returns g for any depth") {
    std::vector<std::vector<double>> eye = {{1.0, 0.0}, {0.0, 1.0}};
    HvpFn op = matrix_op(eye);
    HvpSampler sampler = [&]() { return op; };
    ParamVector g = flat_vec({0.7, -1.3});
    for (int depth : {1, 5, 50}) {
        LissaConfig cfg;
        cfg.depth = depth;
        cfg.damping = 0.0;
        cfg.scale = 1.0;
        ParamVector x = inverse_hvp_lissa(sampler, g, cfg);
        CHECK(x[0] == g[0]);
        CHECK(x[1] == g[1]);
    }
}

TEST_CASE("full-batch lissa converges to the exact damped solve") {
    const std::size_t n = 30;
    std::mt19937_64 rng(29);
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::MatrixXd b(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) b(i, j) = nd(rng);
    Eigen::MatrixXd spd = b * b.transpose();
    spd /= spd.norm();  // keep the spectrum tame
    spd += 0.4 * Eigen::MatrixXd::Identity(n, n);

    std::vector<std::vector<double>> a(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a[i][j] = spd(i, j);
    HvpFn op = matrix_op(a);
    HvpSampler sampler = [&]() { return op; };

    double damping = 0.05;
    ExactHessian h = exact_hessian_of(n, op, damping);

    LissaConfig cfg;
    cfg.depth = 200;
    cfg.damping = damping;
    cfg.scale = 2.0;

    LissaConfig shallow = cfg;
    shallow.depth = 20;

    double err200 = 0.0, err20 = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        ParamVector g = ParamVector::zeros(flat_layout(n));
        for (std::size_t i = 0; i < n; ++i) g[i] = nd(rng);
        ParamVector exact = inverse_hvp_exact(h, g);
        auto err_of = [&](const ParamVector& approx) {
            ParamVector diff = approx;
            diff -= exact;
            return diff.norm2() / exact.norm2();
        };
        double e200 = err_of(inverse_hvp_lissa(sampler, g, cfg));
        double e20 = err_of(inverse_hvp_lissa(sampler, g, shallow));
        CHECK(e200 < 1e-3);
        CHECK(e200 <= e20);
        err200 += e200;
        err20 += e20;
    }
    CHECK(err200 / 10 < err20 / 10);
}

TEST_CASE("lissa reports the diverging step") {
    std::vector<std::vector<double>> eye = {{1.0, 0.0}, {0.0, 1.0}};
    HvpFn op = matrix_op(eye);
    HvpSampler sampler = [&]() { return op; };
    LissaConfig cfg;
    cfg.depth = 2000;
    cfg.damping = 1e6;  // (H + damping)/scale far above 1: iterates explode
    cfg.scale = 1.0;
    try {
        inverse_hvp_lissa(sampler, flat_vec({1.0, 1.0}), cfg);
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        CHECK(e.last_finite_step >= 1);
    }
}

TEST_CASE("repeat averaging shrinks the stochastic variance") {
    LogregWorld w = make_logreg_world(3, 6, 30, 2.0, 0.05, 31);
    Sample z = w.ds.sample(w.heldout_ids[0]);
    ParamVector g = sample_grad(w.ckpt, z);

    auto score_with = [&](int repeats, std::uint64_t seed) {
        LissaConfig cfg;
        cfg.repeats = repeats;
        cfg.depth = 25;
        cfg.damping = 0.05;
        cfg.scale = 8.0;
        HvpSampler sampler = make_train_sampler(w.ckpt, w.ds, w.train_ids, 1, seed);
        ParamVector s = inverse_hvp_lissa(sampler, g, cfg);
        return -s.dot(g);
    };

    auto variance = [&](int repeats) {
        std::vector<double> vals;
        for (std::uint64_t seed = 1; seed <= 20; ++seed)
            vals.push_back(score_with(repeats, seed));
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= vals.size();
        double var = 0.0;
        for (double v : vals) var += (v - mean) * (v - mean);
        return var / (vals.size() - 1);
    };
    CHECK(variance(8) <= variance(1));
}

TEST_CASE("one-parameter quadratic self-influence in closed form") {
    // L(z, theta) = (theta - z)^2 / 2 around the minimizer theta = 0:
    // the hessian is 1 and the gradient at z' is -z'.
    std::vector<std::vector<double>> one = {{1.0}};
    ExactHessian h = exact_hessian_of(1, matrix_op(one), 0.0);

    ParamVector g_member = flat_vec({0.0});  // z = 0 sits at its own minimizer
    CHECK(-inverse_hvp_exact(h, g_member).dot(g_member) == 0.0);

    ParamVector g_non = flat_vec({-2.0});  // z' = 2
    CHECK(-inverse_hvp_exact(h, g_non).dot(g_non) == doctest::Approx(-4.0).epsilon(1e-15));
}

TEST_CASE("lissa and exact sif scores agree in rank") {
    LogregWorld w = make_logreg_world(5, 9, 24, 1.5, 0.1, 37, 0.35);
    REQUIRE(w.ckpt.params.size() <= 200);
    ExactHessian h = exact_hessian(w.ckpt, w.ds, w.train_ids, 0.01);
    HvpSampler full = make_full_batch_sampler(w.ckpt, w.ds, w.train_ids);

    double hnorm = spectral_norm_estimate(full(), ParamVector::zeros(w.ckpt.spec.layout()), 30, 5);
    LissaConfig cfg;
    cfg.depth = 200;
    cfg.damping = 0.01;
    cfg.scale = 1.5 * (hnorm + cfg.damping);

    std::vector<double> exact_scores, lissa_scores;
    for (int k = 0; k < 100; ++k) {
        int id = k % 2 == 0 ? w.train_ids[k / 2] : w.heldout_ids[k / 2];
        Sample z = w.ds.sample(id);
        SifRecord e = sif_exact(w.ckpt, h, z, id);
        SifRecord l = sif(w.ckpt, full, z, cfg, id);
        CHECK(e.score <= 1e-12);  // SPD exact route is never positive
        exact_scores.push_back(e.score);
        lissa_scores.push_back(l.score);
    }
    CHECK(spearman(exact_scores, lissa_scores) > 0.99);
}

TEST_CASE("adaptive score with identity family equals the vanilla score") {
    LogregWorld w = make_logreg_world(3, 5, 20, 2.5, 0.05, 41);
    Sample z = w.ds.sample(w.heldout_ids[3]);

    LissaConfig cfg;
    cfg.repeats = 2;
    cfg.depth = 15;
    cfg.damping = 0.05;
    cfg.scale = 6.0;
    cfg.seed = 99;

    SifRecord ada = ada_sif(w.ckpt, z, AugmentationFamily::identity(), cfg, 128, 3);
    // The identity-family estimator draws the sample itself at every step, so
    // the matching vanilla configuration uses the same degenerate sampler.
    HvpSampler same = make_augmentation_sampler(w.ckpt, z, AugmentationFamily::identity(), 1,
                                                derive_seed(cfg.seed, 0xada51fULL));
    SifRecord vanilla = sif(w.ckpt, same, z, cfg, 3);
    CHECK(std::abs(ada.score - vanilla.score) <=
          1e-6 * std::max(std::abs(ada.score), std::abs(vanilla.score)));
    CHECK(ada.label_match == vanilla.label_match);
}

TEST_CASE("vanishing jitter reproduces the exact gradient average") {
    LogregWorld w = make_logreg_world(3, 5, 20, 2.5, 0.05, 43);
    Sample z = w.ds.sample(w.heldout_ids[1]);
    LissaConfig cfg;
    cfg.depth = 12;
    cfg.damping = 0.05;
    cfg.scale = 6.0;
    cfg.seed = 7;
    SifRecord tiny = ada_sif(w.ckpt, z, AugmentationFamily::vector_jitter(1e-9), cfg, 128, 1);
    SifRecord ident = ada_sif(w.ckpt, z, AugmentationFamily::identity(), cfg, 128, 1);
    CHECK(std::abs(tiny.score - ident.score) <= 1e-6 * std::abs(ident.score));
}

TEST_CASE("ensemble score over the identity family is bit-equal to one score") {
    LogregWorld w = make_logreg_world(3, 5, 20, 2.5, 0.05, 47);
    Sample z = w.ds.sample(w.heldout_ids[2]);
    LissaConfig cfg;
    cfg.depth = 10;
    cfg.damping = 0.05;
    cfg.scale = 6.0;
    cfg.seed = 13;

    SifRecord ens = avg_sif(w.ckpt, w.ds, w.train_ids, z, AugmentationFamily::identity(), cfg,
                            8, 2);
    HvpSampler sampler = make_train_sampler(w.ckpt, w.ds, w.train_ids, 1, cfg.seed);
    SifRecord one = sif(w.ckpt, sampler, z, cfg, 2);
    CHECK(ens.score == one.score);
}

TEST_CASE("k=1 ensemble equals the score of that one augmented draw") {
    LogregWorld w = make_logreg_world(3, 5, 20, 2.5, 0.05, 53);
    Sample z = w.ds.sample(w.heldout_ids[4]);
    AugmentationFamily fam = AugmentationFamily::vector_jitter(0.2);
    LissaConfig cfg;
    cfg.depth = 10;
    cfg.damping = 0.05;
    cfg.scale = 6.0;
    cfg.seed = 21;

    SifRecord ens = avg_sif(w.ckpt, w.ds, w.train_ids, z, fam, cfg, 1, 4);

    std::mt19937_64 rng(derive_seed(cfg.seed, 0xa7657fULL));
    Sample drawn = augment(fam, z, rng);
    HvpSampler sampler = make_train_sampler(w.ckpt, w.ds, w.train_ids, 1, cfg.seed);
    SifRecord direct = sif(w.ckpt, sampler, drawn, cfg, 4);
    CHECK(ens.score == direct.score);
}

TEST_CASE("stubbed ensemble mean is the arithmetic mean") {
    LogregWorld w = make_logreg_world(2, 3, 10, 3.0, 0.05, 59);
    Sample z = w.ds.sample(0);
    std::vector<double> values = {1.25, -3.5, 0.75, 10.0};
    int call = 0;
    ScoreFn stub = [&](const Sample&) { return values[call++ % values.size()]; };
    SifRecord rec = avg_sif(stub, w.ckpt, z, AugmentationFamily::identity(), 0, 4, 0);
    double mean = (1.25 - 3.5 + 0.75 + 10.0) / 4.0;
    CHECK(std::abs(rec.score - mean) < 1e-12);
}

TEST_CASE("pairwise influence of a sample with itself is its self influence") {
    LogregWorld w = make_logreg_world(3, 5, 16, 2.0, 0.05, 61);
    ExactHessian h = exact_hessian(w.ckpt, w.ds, w.train_ids, 0.01);
    Sample z = w.ds.sample(w.train_ids[5]);
    CHECK(pairwise_influence_exact(w.ckpt, h, z, z) == sif_exact(w.ckpt, h, z, 5).score);
}

TEST_CASE("pairwise influence is symmetric under the exact solver") {
    LogregWorld w = make_logreg_world(3, 5, 16, 2.0, 0.05, 67);
    ExactHessian h = exact_hessian(w.ckpt, w.ds, w.train_ids, 0.01);
    Sample a = w.ds.sample(w.train_ids[1]);
    Sample b = w.ds.sample(w.heldout_ids[1]);
    double ab = pairwise_influence_exact(w.ckpt, h, a, b);
    double ba = pairwise_influence_exact(w.ckpt, h, b, a);
    CHECK(std::abs(ab - ba) / std::max(std::abs(ab), 1e-12) < 1e-10);
}

TEST_CASE("removing a duplicated point moves the refit less than a unique one") {
    // A twin cannot make the removal free: the 1/n reweighting alone shifts
    // the minimizer, so the honest bound is comparative, not absolute.
    LabeledDataset ds = synth_blobs(2, 4, 20, 3.0, 71);
    ds.inputs.push_back(ds.inputs[0]);
    ds.labels.push_back(ds.labels[0]);
    std::vector<int> with_twin(ds.size());
    for (std::size_t i = 0; i < with_twin.size(); ++i) with_twin[i] = static_cast<int>(i);
    std::vector<int> without_twin(with_twin.begin(), with_twin.end() - 1);
    ModelSpec spec = ModelSpec::logreg(4, 2);
    Sample z_eval = ds.sample(7);
    double twin = loo_retrain_oracle(spec, ds, with_twin, 0.05, 0, z_eval, 1e-10, 200);
    double unique = loo_retrain_oracle(spec, ds, without_twin, 0.05, 0, z_eval, 1e-10, 200);
    CHECK(std::abs(twin) <= std::abs(unique));
    CHECK(std::abs(twin) < 1e-3);  // single-point effects are O(1/n)
}

TEST_CASE("self leave-one-out loss change is non-negative in the convex regime") {
    LabeledDataset ds = synth_blobs(2, 4, 20, 2.0, 73);
    std::vector<int> train(ds.size());
    for (std::size_t i = 0; i < train.size(); ++i) train[i] = static_cast<int>(i);
    ModelSpec spec = ModelSpec::logreg(4, 2);
    for (int k = 0; k < 50; ++k) {
        int id = k % static_cast<int>(ds.size());
        double delta = loo_retrain_oracle(spec, ds, train, 0.05, id, ds.sample(id), 1e-10, 200);
        CHECK(delta >= -1e-9);
    }
}

TEST_CASE("loo oracle enforces its preconditions") {
    LabeledDataset ds = synth_blobs(2, 3, 150, 2.0, 79);
    std::vector<int> train(ds.size());
    for (std::size_t i = 0; i < train.size(); ++i) train[i] = static_cast<int>(i);
    ModelSpec logreg_spec = ModelSpec::logreg(3, 2);
    CHECK_THROWS_AS(
        loo_retrain_oracle(logreg_spec, ds, train, 0.05, 0, ds.sample(1), 1e-10, 200),
        ConfigError);  // n > 200
    ModelSpec mlp_spec = ModelSpec::mlp(3, {4}, 2);
    std::vector<int> small(train.begin(), train.begin() + 50);
    CHECK_THROWS_AS(
        loo_retrain_oracle(mlp_spec, ds, small, 0.05, 0, ds.sample(1), 1e-10, 200),
        ConfigError);  // non-convex arch
}

TEST_CASE("spectral norm estimate recovers the top eigenvalue") {
    std::vector<std::vector<double>> a = {{3.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 0.5}};
    double est = spectral_norm_estimate(matrix_op(a), ParamVector::zeros(flat_layout(3)), 50, 3);
    CHECK(est == doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("members concentrate inside the fitted interval on an overfit target") {
    LabeledDataset ds = synth_blobs(4, 10, 100, 2.4, 83);  // 400 samples
    MiSplit split = make_splits(ds, 160, 5);
    ModelSpec spec = ModelSpec::mlp(10, {32}, 4);
    TrainConfig tcfg;
    tcfg.epochs = 400;
    tcfg.batch_size = 40;
    tcfg.lr = 0.1;
    tcfg.l2 = 1e-4;
    tcfg.lr_decay.factor = 0.5;
    tcfg.lr_decay.patience = 40;
    tcfg.seed = 3;
    Checkpoint ckpt = train_target(spec, ds, split, tcfg);
    REQUIRE(evaluate_accuracy(ckpt, ds, split.members()) >= 0.99);

    ExactHessian h = exact_hessian(ckpt, ds, split.members(), 0.1);
    auto score_all = [&](const std::vector<int>& ids) {
        std::vector<SifRecord> recs;
        for (int id : ids) {
            SifRecord r = sif_exact(ckpt, h, ds.sample(id), id);
            recs.push_back(r);
        }
        return recs;
    };
    FitRecords fit;
    fit.members = score_all(split.mem_train);
    fit.nonmembers = score_all(split.nonmem_train);

    std::vector<double> mem_scores, nonmem_scores;
    for (const auto& r : fit.members) mem_scores.push_back(r.score);
    for (const auto& r : fit.nonmembers) nonmem_scores.push_back(r.score);
    CHECK(interquartile_range(mem_scores) < interquartile_range(nonmem_scores));

    ThresholdFit tf = set_thresholds(fit);
    int inside = 0;
    for (double s : mem_scores) inside += (tf.tau1 < s && s < tf.tau2);
    CHECK(static_cast<double>(inside) / mem_scores.size() >= 0.95);
}

TEST_CASE("convolutional target scores through the exact influence path") {
    LabeledDataset ds;
    ds.num_classes = 2;
    ds.name = "tiles";
    std::mt19937_64 rng(37);
    std::normal_distribution<double> noise(0.0, 0.2);
    for (int i = 0; i < 80; ++i) {
        int label = i % 2;
        Tensor t = Tensor::zeros({1, 8, 8});
        for (double& v : t.data) v = (label == 0 ? -0.6 : 0.6) + noise(rng);
        ds.inputs.push_back(std::move(t));
        ds.labels.push_back(label);
    }
    MiSplit split = make_splits(ds, 30, 38);
    ModelSpec spec = ModelSpec::smallcnn(1, 8, 8, 2, 2);
    TrainConfig cfg;
    cfg.epochs = 40;
    cfg.batch_size = 10;
    cfg.lr = 0.05;
    cfg.l2 = 1e-3;
    cfg.seed = 39;
    Checkpoint ckpt = train_target(spec, ds, split, cfg);

    REQUIRE(ckpt.params.size() <= ExactHessian::kOracleCap);
    ExactHessian h = exact_hessian(ckpt, ds, split.members(), 0.1);
    for (int id : {split.mem_train[0], split.nonmem_train[0]}) {
        SifRecord r = sif_exact(ckpt, h, ds.sample(id), id);
        CHECK(r.score <= 1e-12);
        CHECK(std::isfinite(r.score));
    }
}
