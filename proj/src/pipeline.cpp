#include "sifmi/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "sifmi/common.hpp"

namespace sifmi::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ostream& logger(std::ostream* log) { return log ? *log : std::cerr; }

ScorerDescriptor resolve_scorer(const ScorerDescriptor& in, const MiSplit& split,
                                std::ostream* log) {
    ScorerDescriptor desc = in;
    if (desc.kind == "adasif" && desc.family.is_identity()) {
        // The adaptive score over a degenerate family is the vanilla score;
        // the adaptive repeat/depth setup does not carry over.
        logger(log) << "[sifmi] adasif with identity family resolves to the sif scorer\n";
        desc.kind = "sif";
        desc.lissa.repeats = 1;
        desc.lissa.depth = 0;
    }
    if (desc.lissa.depth == 0) {
        if (desc.kind == "adasif") {
            desc.lissa.depth = 8;
        } else {
            desc.lissa.depth =
                static_cast<int>(std::min<std::size_t>(split.members().size(), 1000));
        }
    }
    return desc;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    out << text;
    if (!text.empty() && text.back() != '\n') out << "\n";
}

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

RunContext prepare(const ExperimentConfig& cfg, std::ostream* log) {
    RunContext ctx;
    ctx.cfg = cfg;
    ctx.dataset = load_dataset(cfg.dataset);
    ctx.split = make_splits(ctx.dataset, cfg.mem_size, cfg.split_seed, cfg.stratify);
    if (cfg.dataset.standardize) {
        // Member statistics only; non-members must not leak into preprocessing.
        ChannelStats stats = channel_stats(ctx.dataset, ctx.split.members());
        standardize(ctx.dataset, stats);
    }
    ctx.model = resolve_model(cfg, ctx.dataset);
    ctx.cfg.scorer = resolve_scorer(cfg.scorer, ctx.split, log);
    ctx.cfg.train.augmentation = cfg.augmentation;
    return ctx;
}

void write_run_manifest(const RunContext& ctx, const std::string& out_dir) {
    fs::create_directories(out_dir);
    write_text(out_dir + "/resolved_config.json", resolved_config_json(ctx.cfg, ctx.model));
    write_text(out_dir + "/split.json", ctx.split.to_json());
}

TrainArtifacts run_train(const RunContext& ctx, const std::string& out_dir,
                         const std::string& checkpoint_override) {
    write_run_manifest(ctx, out_dir);
    TrainArtifacts art;
    art.ckpt = train_target(ctx.model, ctx.dataset, ctx.split, ctx.cfg.train);
    art.checkpoint_path =
        checkpoint_override.empty() ? out_dir + "/checkpoint.sifc" : checkpoint_override;
    save_checkpoint(art.ckpt, art.checkpoint_path);

    double train_acc = evaluate_accuracy(art.ckpt, ctx.dataset, ctx.split.members());
    double val_acc = ctx.split.validation.empty()
                         ? 0.0
                         : evaluate_accuracy(art.ckpt, ctx.dataset, ctx.split.validation);
    double test_acc = evaluate_accuracy(art.ckpt, ctx.dataset, ctx.split.nonmembers());

    json metrics;
    metrics["train_acc"] = train_acc;
    metrics["val_acc"] = val_acc;
    metrics["test_acc"] = test_acc;
    metrics["best_epoch"] = art.ckpt.best_epoch;
    metrics["best_val_acc"] = art.ckpt.best_val_acc;
    metrics["epochs_run"] = art.ckpt.epochs_run;
    json hist = json::array();
    for (const EpochStats& s : art.ckpt.history)
        hist.push_back({{"epoch", s.epoch},
                        {"loss", s.loss},
                        {"train_acc", s.train_acc},
                        {"val_acc", s.val_acc},
                        {"lr", s.lr}});
    metrics["history"] = hist;
    art.metrics_path = out_dir + "/train_metrics.json";
    write_text(art.metrics_path, metrics.dump(2));
    return art;
}

std::function<SifRecord(int)> make_scorer(const RunContext& ctx, const Checkpoint& ckpt,
                                          const ScorerDescriptor& desc) {
    auto members = std::make_shared<std::vector<int>>(ctx.split.members());
    int default_depth = static_cast<int>(std::min<std::size_t>(members->size(), 1000));
    ScorerDescriptor d = desc;

    if (d.kind == "sif") {
        return [&ctx, &ckpt, d, members, default_depth](int id) {
            LissaConfig c = d.lissa;
            c.seed = derive_seed(d.lissa.seed, static_cast<std::uint64_t>(id));
            HvpSampler sampler =
                make_train_sampler(ckpt, ctx.dataset, *members, c.sample_batch, c.seed);
            return sif(ckpt, sampler, ctx.dataset.sample(id), c, id, default_depth);
        };
    }
    if (d.kind == "adasif") {
        return [&ctx, &ckpt, d](int id) {
            LissaConfig c = d.lissa;
            c.seed = derive_seed(d.lissa.seed, static_cast<std::uint64_t>(id));
            return ada_sif(ckpt, ctx.dataset.sample(id), d.family, c, d.grad_samples, id);
        };
    }
    if (d.kind == "avgsif") {
        return [&ctx, &ckpt, d, members](int id) {
            LissaConfig c = d.lissa;
            c.seed = derive_seed(d.lissa.seed, static_cast<std::uint64_t>(id));
            return avg_sif(ckpt, ctx.dataset, *members, ctx.dataset.sample(id), d.family, c,
                           d.ensemble_k, id);
        };
    }
    throw ConfigError("unknown scorer kind '" + d.kind + "'");
}

double spectral_check(const RunContext& ctx, const Checkpoint& ckpt,
                      const ScorerDescriptor& desc, std::ostream* log) {
    std::vector<int> members = ctx.split.members();
    if (members.size() > 256) members.resize(256);
    HvpSampler full = make_full_batch_sampler(ckpt, ctx.dataset, members);
    HvpFn op = full();
    double est = spectral_norm_estimate(op, ParamVector::zeros(ckpt.spec.layout()), 30,
                                        derive_seed(desc.lissa.seed, 0x5bec7ULL));
    if ((est + desc.lissa.damping) / desc.lissa.scale >= 1.0)
        logger(log) << "[sifmi] warning: estimated Hessian norm " << est
                    << " with damping " << desc.lissa.damping
                    << " is not below the LiSSA scale " << desc.lissa.scale
                    << "; the recursion may diverge\n";
    return est;
}

namespace {

struct SubsetIds {
    std::vector<int> ids;
    std::map<int, int> membership;  // id -> 0/1
};

SubsetIds subset_ids(const MiSplit& split, const std::string& subset) {
    SubsetIds s;
    auto add = [&](const std::vector<int>& v, int m) {
        for (int id : v) {
            s.ids.push_back(id);
            s.membership[id] = m;
        }
    };
    if (subset == "fit" || subset == "all") {
        add(split.mem_train, 1);
        add(split.nonmem_train, 0);
    }
    if (subset == "eval" || subset == "all") {
        add(split.mem_test, 1);
        add(split.nonmem_test, 0);
    }
    if (s.ids.empty() && subset != "fit" && subset != "eval" && subset != "all")
        throw ConfigError("subset must be fit, eval or all");
    std::sort(s.ids.begin(), s.ids.end());
    return s;
}

void persist_rows(const std::string& path, const std::map<int, ScoreRow>& done) {
    std::vector<ScoreRow> rows;
    rows.reserve(done.size());
    for (const auto& [id, row] : done) rows.push_back(row);
    std::string tmp = path + ".tmp";
    write_scores_csv(tmp, rows);
    fs::rename(tmp, path);
}

}  // namespace

ScoreRunResult run_score(const RunContext& ctx, const Checkpoint& ckpt,
                         const std::string& subset, const ScorerDescriptor& desc,
                         const std::string& csv_path, int threads, std::ostream* log) {
    SubsetIds sel = subset_ids(ctx.split, subset);
    spectral_check(ctx, ckpt, desc, log);
    auto scorer = make_scorer(ctx, ckpt, desc);

    std::map<int, ScoreRow> done;
    if (fs::exists(csv_path)) {
        for (const ScoreRow& row : read_scores_csv(csv_path)) {
            if (!sel.membership.count(row.sample_id)) continue;
            if (row.scorer != desc.kind)
                throw Error("scores CSV '" + csv_path + "' was produced by scorer '" +
                            row.scorer + "', expected '" + desc.kind + "'");
            done[row.sample_id] = row;
        }
    }

    std::vector<int> todo;
    for (int id : sel.ids)
        if (!done.count(id)) todo.push_back(id);

    std::vector<int> failed;
    const int chunk_size = 100;  // persistence cadence for resumability
    for (std::size_t begin = 0; begin < todo.size(); begin += chunk_size) {
        std::size_t end = std::min(todo.size(), begin + chunk_size);
        std::vector<std::optional<ScoreRow>> slots(end - begin);
        std::vector<int> chunk_failed;
        std::mutex fail_mu;
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            while (true) {
                std::size_t k = next.fetch_add(1);
                if (k >= slots.size()) break;
                int id = todo[begin + k];
                try {
                    SifRecord rec = scorer(id);
                    ScoreRow row;
                    row.sample_id = id;
                    row.score = rec.score;
                    row.label_match = rec.label_match;
                    row.membership = sel.membership.at(id);
                    row.scorer = desc.kind;
                    row.r = desc.lissa.repeats;
                    row.d = desc.lissa.depth;
                    row.lambda = desc.lissa.damping;
                    row.seed = desc.lissa.seed;
                    slots[k] = row;
                } catch (const Error& e) {
                    std::lock_guard<std::mutex> lk(fail_mu);
                    chunk_failed.push_back(id);
                    logger(log) << "[sifmi] scorer failed on sample " << id << ": " << e.what()
                                << "\n";
                }
            }
        };
        int nthreads = std::max(1, threads);
        if (nthreads == 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
            for (auto& th : pool) th.join();
        }
        for (auto& slot : slots)
            if (slot) done[slot->sample_id] = *slot;
        failed.insert(failed.end(), chunk_failed.begin(), chunk_failed.end());
        persist_rows(csv_path, done);
    }
    // Nothing left to compute: still canonicalize the file (drops torn rows).
    if (todo.empty()) persist_rows(csv_path, done);

    if (!failed.empty() && failed.size() * 100 > sel.ids.size()) {
        std::ostringstream os;
        os << "scorer failed on " << failed.size() << "/" << sel.ids.size()
           << " samples (budget 1%); ids:";
        for (int id : failed) os << " " << id;
        throw ScorerBudgetExceeded(os.str());
    }

    ScoreRunResult res;
    for (const auto& [id, row] : done) res.rows.push_back(row);
    std::sort(failed.begin(), failed.end());
    res.failed_ids = failed;
    return res;
}

namespace {

FitRecords records_from_rows(const std::vector<ScoreRow>& rows) {
    FitRecords rec;
    for (const ScoreRow& r : rows) {
        SifRecord s;
        s.sample_id = r.sample_id;
        s.score = r.score;
        s.label_match = r.label_match;
        s.membership = r.membership;
        (r.membership == 1 ? rec.members : rec.nonmembers).push_back(s);
    }
    return rec;
}

EvalReport threshold_attack_report(const std::string& name, const AttackModel& attack,
                                   const Checkpoint& ckpt,
                                   const std::vector<ScoreRow>& eval_rows,
                                   std::vector<PredictionRow>& preds_out) {
    std::vector<int> mem_preds, nonmem_preds;
    for (const ScoreRow& r : eval_rows) {
        int pred = infer_membership(attack, ckpt, r.score, r.label_match);
        (r.membership == 1 ? mem_preds : nonmem_preds).push_back(pred);
        preds_out.push_back({r.sample_id, pred, r.membership});
    }
    return eval_from_predictions(name, mem_preds, nonmem_preds);
}

}  // namespace

AttackComparison run_attack(const RunContext& ctx, const Checkpoint& ckpt,
                            const std::string& out_dir, std::ostream* log) {
    fs::create_directories(out_dir);
    const ScorerDescriptor primary = ctx.cfg.scorer;
    const int threads = ctx.cfg.threads;

    auto scores_path = [&](const std::string& kind, const std::string& subset) {
        return out_dir + "/scores_" + kind + "_" + subset + ".csv";
    };
    auto score_kind = [&](const ScorerDescriptor& desc, const std::string& subset) {
        return run_score(ctx, ckpt, subset, desc, scores_path(desc.kind, subset), threads, log);
    };

    AttackComparison cmp;

    // The report always carries the vanilla scorer row.
    ScorerDescriptor sif_desc = primary;
    if (sif_desc.kind != "sif") {
        sif_desc.kind = "sif";
        sif_desc.lissa.depth =
            static_cast<int>(std::min<std::size_t>(ctx.split.members().size(), 1000));
        sif_desc.lissa.repeats = 1;
    }

    struct ThresholdRow {
        ScorerDescriptor desc;
        std::string name;
    };
    std::vector<ThresholdRow> rows;
    rows.push_back({sif_desc, "sif"});
    if (!ctx.cfg.augmentation.is_identity()) {
        ScorerDescriptor ada = primary;
        ada.kind = "adasif";
        if (primary.kind != "adasif") {
            ada.lissa.repeats = 8;
            ada.lissa.depth = 8;
        }
        rows.push_back({ada, "adasif"});
    }
    if (primary.kind == "avgsif") rows.push_back({primary, "avgsif"});

    bool primary_set = false;
    for (const ThresholdRow& row : rows) {
        ScoreRunResult fit_scores = score_kind(row.desc, "fit");
        ScoreRunResult eval_scores = score_kind(row.desc, "eval");

        AttackModel attack;
        try {
            attack = fit_sif_attack(ckpt, records_from_rows(fit_scores.rows), row.desc,
                                    ctx.cfg.grid_size);
        } catch (const Error& e) {
            throw FitFailure(std::string("attack fitting failed: ") + e.what());
        }
        save_attack(attack, out_dir + "/attack_" + row.name + ".json");

        std::vector<PredictionRow> preds;
        EvalReport rep = threshold_attack_report(row.name, attack, ckpt, eval_scores.rows, preds);
        write_predictions_csv(out_dir + "/predictions_" + row.name + ".csv", preds);
        cmp.reports.push_back(rep);
        if (row.name == primary.kind) {
            cmp.attack = attack;
            primary_set = true;
        }
    }
    if (!primary_set) cmp.attack = load_attack(out_dir + "/attack_sif.json");

    // Gap baseline.
    {
        std::vector<int> mem_preds, nonmem_preds;
        std::vector<PredictionRow> preds;
        for (int id : ctx.split.mem_test) {
            int p = gap_attack(ckpt, ctx.dataset.sample(id));
            mem_preds.push_back(p);
            preds.push_back({id, p, 1});
        }
        for (int id : ctx.split.nonmem_test) {
            int p = gap_attack(ckpt, ctx.dataset.sample(id));
            nonmem_preds.push_back(p);
            preds.push_back({id, p, 0});
        }
        write_predictions_csv(out_dir + "/predictions_gap.csv", preds);
        cmp.reports.insert(cmp.reports.begin(), eval_from_predictions("gap", mem_preds,
                                                                      nonmem_preds));
    }

    // Black-box confidence baseline.
    {
        BlackboxAttack bb = fit_blackbox_attack(ckpt, ctx.dataset, ctx.split.mem_train,
                                                ctx.split.nonmem_train);
        std::vector<int> mem_preds, nonmem_preds;
        std::vector<PredictionRow> preds;
        for (int id : ctx.split.mem_test) {
            int p = blackbox_predict(bb, ckpt, ctx.dataset.sample(id));
            mem_preds.push_back(p);
            preds.push_back({id, p, 1});
        }
        for (int id : ctx.split.nonmem_test) {
            int p = blackbox_predict(bb, ckpt, ctx.dataset.sample(id));
            nonmem_preds.push_back(p);
            preds.push_back({id, p, 0});
        }
        write_predictions_csv(out_dir + "/predictions_blackbox.csv", preds);
        cmp.reports.insert(cmp.reports.begin() + 1,
                           eval_from_predictions("blackbox", mem_preds, nonmem_preds));
    }

    cmp.model_acc_members = evaluate_accuracy(ckpt, ctx.dataset, ctx.split.mem_test);
    cmp.model_acc_nonmembers = evaluate_accuracy(ckpt, ctx.dataset, ctx.split.nonmem_test);

    json out;
    out["model_acc_members"] = cmp.model_acc_members;
    out["model_acc_nonmembers"] = cmp.model_acc_nonmembers;
    json reports = json::array();
    for (const EvalReport& r : cmp.reports) reports.push_back(json::parse(r.to_json()));
    out["attacks"] = reports;
    write_text(out_dir + "/comparison.json", out.dump(2));
    return cmp;
}

std::string OracleResult::to_json() const {
    json j;
    j["pass"] = pass;
    json checks_json = json::array();
    for (const OracleCheck& c : checks)
        checks_json.push_back({{"name", c.name},
                               {"tolerance", c.tolerance},
                               {"measured", c.measured},
                               {"direction", c.direction},
                               {"pass", c.pass}});
    j["checks"] = checks_json;
    return j.dump(2);
}

namespace {

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-10});
}

}  // namespace

OracleResult run_oracle(const RunContext& ctx, bool corrupt_gradient, std::ostream* log) {
    OracleResult result;
    auto add = [&](const std::string& name, double tol, double measured, bool max_dir) {
        OracleCheck c;
        c.name = name;
        c.tolerance = tol;
        c.measured = measured;
        c.direction = max_dir ? "max" : "min";
        c.pass = max_dir ? measured <= tol : measured >= tol;
        result.checks.push_back(c);
    };

    if (ctx.model.param_count() > ExactHessian::kOracleCap)
        throw ConfigError("oracle checks need a model within the dense-Hessian cap (" +
                          std::to_string(ExactHessian::kOracleCap) + " params), got " +
                          std::to_string(ctx.model.param_count()));

    // Finite-difference gradient / HVP checks on the configured architecture.
    {
        std::mt19937_64 rng(derive_seed(ctx.cfg.train.seed, 0xfdULL));
        std::normal_distribution<double> nd(0.0, 0.5);
        ParamVector theta = init_params(ctx.model, derive_seed(ctx.cfg.train.seed, 1));
        std::vector<Tensor> xs;
        std::vector<int> ys;
        for (int i = 0; i < 16; ++i) {
            int id = static_cast<int>(rng() % ctx.dataset.size());
            xs.push_back(ctx.dataset.inputs[id]);
            ys.push_back(ctx.dataset.labels[id]);
        }
        Batch b = make_batch(xs, ys);
        double l2 = 0.01;
        ParamVector g = grad(ctx.model, theta, b, l2);
        if (corrupt_gradient) g[0] += 0.05;  // fault-injection hook
        const double h = 1e-5;
        double worst = 0.0;
        for (std::size_t i = 0; i < theta.size(); ++i) {
            ParamVector tp = theta, tm = theta;
            tp[i] += h;
            tm[i] -= h;
            double fd =
                (forward_loss(ctx.model, tp, b, l2) - forward_loss(ctx.model, tm, b, l2)) /
                (2 * h);
            if (std::abs(fd - g[i]) > 1e-9) worst = std::max(worst, rel_err(fd, g[i]));
        }
        add("grad_finite_difference", 1e-4, worst, true);

        double worst_hvp = 0.0;
        for (int trial = 0; trial < 3; ++trial) {
            ParamVector v = ParamVector::zeros(ctx.model.layout());
            for (std::size_t i = 0; i < v.size(); ++i) v[i] = nd(rng);
            ParamVector hv = hvp(ctx.model, theta, b, v, l2);
            ParamVector tp = theta, tm = theta;
            tp.axpy(h, v);
            tm.axpy(-h, v);
            ParamVector gp = grad(ctx.model, tp, b, l2), gm = grad(ctx.model, tm, b, l2);
            for (std::size_t i = 0; i < hv.size(); ++i) {
                double fd = (gp[i] - gm[i]) / (2 * h);
                if (std::abs(fd - hv[i]) > 1e-8) worst_hvp = std::max(worst_hvp, rel_err(fd, hv[i]));
            }
        }
        add("hvp_finite_difference", 1e-3, worst_hvp, true);
    }

    // Exact-vs-LiSSA on a convex logreg head trained on the member subset.
    {
        std::vector<int> members = ctx.split.members();
        if (members.size() > 100) members.resize(100);
        int dim = static_cast<int>(ctx.dataset.inputs[0].size());
        ModelSpec side = ModelSpec::logreg(dim, ctx.dataset.num_classes);
        if (side.param_count() > ExactHessian::kOracleCap)
            throw ConfigError("oracle logreg head exceeds the dense-Hessian cap");
        double l2 = std::max(ctx.cfg.train.l2, 1e-2);
        Checkpoint side_ckpt;
        side_ckpt.spec = side;
        side_ckpt.params = newton_minimize(side, ctx.dataset, members, l2, 1e-9, 200);
        side_ckpt.l2 = l2;

        double damping = ctx.cfg.scorer.lissa.damping;
        ExactHessian hess = exact_hessian(side_ckpt, ctx.dataset, members, damping);
        HvpSampler full = make_full_batch_sampler(side_ckpt, ctx.dataset, members);
        double hnorm = spectral_norm_estimate(full(), ParamVector::zeros(side.layout()), 30,
                                              derive_seed(ctx.cfg.scorer.lissa.seed, 7));
        LissaConfig lc;
        lc.repeats = 1;
        lc.depth = 200;
        lc.damping = damping;
        lc.scale = 1.5 * (hnorm + damping);
        lc.seed = ctx.cfg.scorer.lissa.seed;

        double worst = 0.0;
        for (int k = 0; k < 20; ++k) {
            Sample z = ctx.dataset.sample(members[k % members.size()]);
            ParamVector g = sample_grad(side_ckpt, z);
            ParamVector exact = inverse_hvp_exact(hess, g);
            ParamVector approx = inverse_hvp_lissa(full, g, lc);
            ParamVector diff = approx;
            diff -= exact;
            double denom = std::max(exact.norm2(), 1e-12);
            worst = std::max(worst, diff.norm2() / denom);
        }
        add("lissa_vs_exact_solve", 1e-2, worst, true);

        std::vector<double> exact_scores, lissa_scores;
        std::vector<int> probe = ctx.split.members();
        std::vector<int> nonmem = ctx.split.nonmembers();
        probe.insert(probe.end(), nonmem.begin(), nonmem.end());
        if (probe.size() > 100) probe.resize(100);
        for (int id : probe) {
            Sample z = ctx.dataset.sample(id);
            exact_scores.push_back(sif_exact(side_ckpt, hess, z, id).score);
            lissa_scores.push_back(sif(side_ckpt, full, z, lc, id).score);
        }
        add("sif_rank_agreement", 0.99, spearman(exact_scores, lissa_scores), false);

        // Leave-one-out retraining vs pairwise influence.
        std::vector<int> loo_train = ctx.split.members();
        if (loo_train.size() > 100) loo_train.resize(100);
        Sample z_eval = ctx.dataset.sample(ctx.split.nonmem_test.at(0));
        Checkpoint loo_ckpt;
        loo_ckpt.spec = side;
        loo_ckpt.params = newton_minimize(side, ctx.dataset, loo_train, l2, 1e-10, 200);
        loo_ckpt.l2 = l2;
        ExactHessian loo_hess = exact_hessian(loo_ckpt, ctx.dataset, loo_train, 0.0);
        int removals = std::min<int>(50, static_cast<int>(loo_train.size()));
        std::vector<double> predicted, actual;
        double n = static_cast<double>(loo_train.size());
        for (int k = 0; k < removals; ++k) {
            int target = loo_train[k * static_cast<int>(loo_train.size()) / removals];
            double pw = pairwise_influence_exact(loo_ckpt, loo_hess,
                                                 ctx.dataset.sample(target), z_eval);
            predicted.push_back(-pw / n);
            actual.push_back(loo_retrain_oracle(side, ctx.dataset, loo_train, l2, target,
                                                z_eval, 1e-10, 200));
        }
        add("loo_rank_agreement", 0.9, spearman(predicted, actual), false);
    }

    result.pass = true;
    for (const OracleCheck& c : result.checks) result.pass = result.pass && c.pass;
    if (!result.pass) logger(log) << "[sifmi] oracle checks failed\n";
    return result;
}

EvalReport run_report(const RunContext& ctx, const std::string& attack_json_path,
                      const std::string& scores_csv_path, const std::string& out_dir) {
    fs::create_directories(out_dir);
    AttackModel attack = load_attack(attack_json_path);
    std::vector<ScoreRow> rows = read_scores_csv(scores_csv_path);

    std::map<int, ScoreRow> by_id;
    for (const ScoreRow& r : rows) by_id[r.sample_id] = r;

    std::vector<int> mem_preds, nonmem_preds;
    std::vector<PredictionRow> preds;
    auto consume = [&](const std::vector<int>& ids, int membership) {
        for (int id : ids) {
            auto it = by_id.find(id);
            if (it == by_id.end())
                throw Error("scores CSV is missing eval sample " + std::to_string(id));
            int p = attack.tau1 < it->second.score && it->second.score < attack.tau2 &&
                            it->second.label_match == 1
                        ? 1
                        : 0;
            (membership == 1 ? mem_preds : nonmem_preds).push_back(p);
            preds.push_back({id, p, membership});
        }
    };
    consume(ctx.split.mem_test, 1);
    consume(ctx.split.nonmem_test, 0);

    EvalReport rep = eval_from_predictions(attack.scorer.kind, mem_preds, nonmem_preds);
    write_text(out_dir + "/report.json", rep.to_json());
    write_predictions_csv(out_dir + "/predictions_report.csv", preds);

    std::vector<SifRecord> recs;
    for (const ScoreRow& r : rows) {
        SifRecord s;
        s.sample_id = r.sample_id;
        s.score = r.score;
        s.label_match = r.label_match;
        s.membership = r.membership;
        recs.push_back(s);
    }
    write_histogram_csv(histogram_export(recs, ctx.cfg.histogram_bins),
                        out_dir + "/histogram.csv");
    return rep;
}

}  // namespace sifmi::pipeline
