#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sifmi/pipeline.hpp"

using namespace sifmi;
namespace fs = std::filesystem;

namespace {

std::string scratch_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("sifmi_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p.string();
}

std::string write_file(const std::string& dir, const std::string& name,
                       const std::string& text) {
    std::string path = dir + "/" + name;
    std::ofstream out(path);
    out << text;
    return path;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Small, fast experiment: overfit a narrow mlp on blob data.
std::string base_config(const std::string& out_dir, const std::string& scorer_kind,
                        const std::string& aug = R"({"kind":"identity"})") {
    std::ostringstream os;
    os << R"({
  "dataset": {"kind": "blobs", "classes": 3, "dim": 8, "per_class": 60, "spread": 2.0, "seed": 5},
  "mem_size": 60,
  "split_seed": 9,
  "model": {"arch": "mlp", "hidden": [12]},
  "train": {"epochs": 120, "batch_size": 30, "lr": 0.08, "l2": 1e-4, "seed": 21},
  "augmentation": )" << aug << R"(,
  "scorer": {"kind": ")" << scorer_kind
       << R"(", "seed": 31, "scale": 10.0, "d": 40},
  "grid_size": 400,
  "out_dir": ")" << out_dir << R"(",
  "threads": 2
})";
    return os.str();
}

int run_cli(const std::string& args) {
    std::string cmd = std::string(SIFMI_BIN) + " " + args + " >/dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("train writes a SIFC checkpoint and accuracy metrics") {
    std::string dir = scratch_dir("train");
    ExperimentConfig cfg = config_from_json(base_config(dir, "sif"));
    pipeline::RunContext ctx = pipeline::prepare(cfg);
    pipeline::TrainArtifacts art = pipeline::run_train(ctx, dir);

    std::ifstream ck(art.checkpoint_path, std::ios::binary);
    char magic[4];
    ck.read(magic, 4);
    CHECK(std::string(magic, 4) == "SIFC");

    nlohmann::json metrics = nlohmann::json::parse(read_file(art.metrics_path));
    CHECK(metrics["train_acc"].get<double>() >= metrics["test_acc"].get<double>());
    CHECK(fs::exists(dir + "/resolved_config.json"));
    CHECK(fs::exists(dir + "/split.json"));

    // The resolved dump materializes the per-scorer depth default.
    nlohmann::json resolved = nlohmann::json::parse(read_file(dir + "/resolved_config.json"));
    CHECK(resolved["scorer"]["d"].get<int>() == 40);
}

TEST_CASE("training reruns are byte-identical") {
    std::string dir_a = scratch_dir("rerun_a");
    std::string dir_b = scratch_dir("rerun_b");
    ExperimentConfig cfg_a = config_from_json(base_config(dir_a, "sif"));
    ExperimentConfig cfg_b = config_from_json(base_config(dir_b, "sif"));
    pipeline::run_train(pipeline::prepare(cfg_a), dir_a);
    pipeline::run_train(pipeline::prepare(cfg_b), dir_b);
    CHECK(read_file(dir_a + "/checkpoint.sifc") == read_file(dir_b + "/checkpoint.sifc"));
}

TEST_CASE("scoring persists, resumes, and parallelizes deterministically") {
    std::string dir = scratch_dir("score");
    ExperimentConfig cfg = config_from_json(base_config(dir, "sif"));
    pipeline::RunContext ctx = pipeline::prepare(cfg);
    pipeline::TrainArtifacts art = pipeline::run_train(ctx, dir);

    std::string csv = dir + "/scores_sif_fit.csv";
    pipeline::ScoreRunResult full =
        pipeline::run_score(ctx, art.ckpt, "fit", ctx.cfg.scorer, csv, 1);
    CHECK(full.rows.size() == 60);
    std::string uninterrupted = read_file(csv);

    // Simulate a killed run: keep only the first 20 rows, then resume.
    {
        std::istringstream in(uninterrupted);
        std::ostringstream partial;
        std::string line;
        for (int i = 0; i <= 20 && std::getline(in, line); ++i) partial << line << "\n";
        std::ofstream out(csv);
        out << partial.str();
    }
    pipeline::run_score(ctx, art.ckpt, "fit", ctx.cfg.scorer, csv, 1);
    CHECK(read_file(csv) == uninterrupted);

    // A multi-threaded rerun from scratch produces the same bytes.
    fs::remove(csv);
    pipeline::run_score(ctx, art.ckpt, "fit", ctx.cfg.scorer, csv, 4);
    CHECK(read_file(csv) == uninterrupted);

    // Resuming with a torn trailing line also converges to the same file.
    {
        std::ofstream out(csv, std::ios::app);
        out << "999,0.5,1";  // torn row
    }
    pipeline::run_score(ctx, art.ckpt, "fit", ctx.cfg.scorer, csv, 1);
    CHECK(read_file(csv) == uninterrupted);
}

TEST_CASE("empty selector writes just the header") {
    std::string dir = scratch_dir("empty");
    ExperimentConfig cfg = config_from_json(base_config(dir, "sif"));
    pipeline::RunContext ctx = pipeline::prepare(cfg);
    std::vector<ScoreRow> rows;
    std::string csv = dir + "/scores_empty.csv";
    write_scores_csv(csv, rows);
    CHECK(read_file(csv) == "sample_id,score,label_match,membership,scorer,r,d,lambda,seed\n");
    CHECK(read_scores_csv(csv).empty());
}

TEST_CASE("adaptive scorer with identity family scores like the vanilla one") {
    std::string dir_a = scratch_dir("ada_ident_a");
    std::string dir_b = scratch_dir("ada_ident_b");
    // Both scorers on pure defaults: the adaptive one must resolve to the
    // same vanilla configuration when the family is degenerate.
    auto cfg_text = [](const std::string& dir, const std::string& kind) {
        return std::string(R"({
  "dataset": {"kind": "blobs", "classes": 3, "dim": 8, "per_class": 60, "spread": 2.0, "seed": 5},
  "mem_size": 60,
  "split_seed": 9,
  "model": {"arch": "mlp", "hidden": [12]},
  "train": {"epochs": 120, "batch_size": 30, "lr": 0.08, "l2": 1e-4, "seed": 21},
  "scorer": {"kind": ")") + kind + R"(", "seed": 31, "scale": 10.0},
  "out_dir": ")" + dir + R"("})";
    };
    ExperimentConfig cfg_sif = config_from_json(cfg_text(dir_a, "sif"));
    ExperimentConfig cfg_ada = config_from_json(cfg_text(dir_b, "adasif"));

    pipeline::RunContext ctx_sif = pipeline::prepare(cfg_sif);
    pipeline::RunContext ctx_ada = pipeline::prepare(cfg_ada);
    CHECK(ctx_ada.cfg.scorer.kind == "sif");  // identity family resolves to vanilla

    pipeline::TrainArtifacts art = pipeline::run_train(ctx_sif, dir_a);
    pipeline::ScoreRunResult a = pipeline::run_score(ctx_sif, art.ckpt, "fit",
                                                     ctx_sif.cfg.scorer,
                                                     dir_a + "/scores_sif_fit.csv", 1);
    pipeline::ScoreRunResult b = pipeline::run_score(ctx_ada, art.ckpt, "fit",
                                                     ctx_ada.cfg.scorer,
                                                     dir_b + "/scores_sif_fit.csv", 1);
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].sample_id == b.rows[i].sample_id);
        CHECK(std::abs(a.rows[i].score - b.rows[i].score) <=
              1e-6 * std::max(1.0, std::abs(a.rows[i].score)));
    }
}

TEST_CASE("attack comparison carries the expected rows and the gap identity") {
    std::string dir = scratch_dir("attack");
    ExperimentConfig cfg = config_from_json(base_config(dir, "sif"));
    pipeline::RunContext ctx = pipeline::prepare(cfg);
    pipeline::TrainArtifacts art = pipeline::run_train(ctx, dir);
    pipeline::AttackComparison cmp = pipeline::run_attack(ctx, art.ckpt, dir);

    std::vector<std::string> names;
    for (const auto& r : cmp.reports) names.push_back(r.attack);
    CHECK(names == std::vector<std::string>{"gap", "blackbox", "sif"});

    const EvalReport& gap = cmp.reports[0];
    double expected = 0.5 + 0.5 * (cmp.model_acc_members - cmp.model_acc_nonmembers);
    CHECK(std::abs(gap.balanced_acc - expected) < 1e-9);

    CHECK(fs::exists(dir + "/attack_sif.json"));
    CHECK(fs::exists(dir + "/predictions_sif.csv"));
    CHECK(fs::exists(dir + "/comparison.json"));

    // report verb rebuilds the eval report from the persisted artifacts
    EvalReport rebuilt = pipeline::run_report(ctx, dir + "/attack_sif.json",
                                              dir + "/scores_sif_eval.csv", dir);
    const EvalReport* sif_row = nullptr;
    for (const auto& r : cmp.reports)
        if (r.attack == "sif") sif_row = &r;
    REQUIRE(sif_row != nullptr);
    CHECK(rebuilt.balanced_acc == sif_row->balanced_acc);
    CHECK(fs::exists(dir + "/histogram.csv"));
}

TEST_CASE("augmented experiments add the adaptive attack row") {
    std::string dir = scratch_dir("attack_aug");
    ExperimentConfig cfg = config_from_json(
        base_config(dir, "adasif", R"({"kind":"vector_jitter","sigma":0.4})"));
    cfg.train.epochs = 60;  // keep the integration run quick
    cfg.scorer.lissa.depth = 8;
    cfg.scorer.lissa.repeats = 2;
    cfg.scorer.grad_samples = 16;
    pipeline::RunContext ctx = pipeline::prepare(cfg);
    pipeline::TrainArtifacts art = pipeline::run_train(ctx, dir);
    pipeline::AttackComparison cmp = pipeline::run_attack(ctx, art.ckpt, dir);

    std::vector<std::string> names;
    for (const auto& r : cmp.reports) names.push_back(r.attack);
    CHECK(names == std::vector<std::string>{"gap", "blackbox", "sif", "adasif"});
    CHECK(fs::exists(dir + "/attack_adasif.json"));
}

TEST_CASE("oracle checks pass on a compliant config and fail when corrupted") {
    std::string dir = scratch_dir("oracle");
    std::string cfg_text = R"({
  "dataset": {"kind": "blobs", "classes": 4, "dim": 6, "per_class": 50, "spread": 1.6, "seed": 3},
  "mem_size": 80,
  "split_seed": 2,
  "model": {"arch": "logreg"},
  "train": {"epochs": 10, "batch_size": 20, "lr": 0.1, "l2": 0.02, "seed": 4},
  "out_dir": ")" + dir + R"("
})";
    ExperimentConfig cfg = config_from_json(cfg_text);
    pipeline::RunContext ctx = pipeline::prepare(cfg);

    pipeline::OracleResult res = pipeline::run_oracle(ctx);
    CHECK(res.pass);
    CHECK(res.checks.size() == 5);
    for (const auto& c : res.checks) {
        CHECK(c.tolerance != 0.0);
        CHECK(std::isfinite(c.measured));
    }
    nlohmann::json rep = nlohmann::json::parse(res.to_json());
    CHECK(rep["checks"].size() == 5);
    for (const auto& c : rep["checks"]) {
        CHECK(c.contains("tolerance"));
        CHECK(c.contains("measured"));
    }

    pipeline::OracleResult bad = pipeline::run_oracle(ctx, /*corrupt_gradient=*/true);
    CHECK(!bad.pass);
    CHECK(bad.checks[0].name == "grad_finite_difference");
    CHECK(!bad.checks[0].pass);
}

TEST_CASE("ensemble scorer flows through the attack comparison") {
    std::string dir = scratch_dir("avgsif");
    ExperimentConfig cfg = config_from_json(base_config(dir, "avgsif",
                                                        R"({"kind":"vector_jitter","sigma":0.3})"));
    cfg.train.epochs = 60;
    cfg.scorer.ensemble_k = 2;
    cfg.scorer.lissa.depth = 12;
    pipeline::RunContext ctx = pipeline::prepare(cfg);
    pipeline::TrainArtifacts art = pipeline::run_train(ctx, dir);
    pipeline::AttackComparison cmp = pipeline::run_attack(ctx, art.ckpt, dir);

    std::vector<std::string> names;
    for (const auto& r : cmp.reports) names.push_back(r.attack);
    CHECK(names == std::vector<std::string>{"gap", "blackbox", "sif", "adasif", "avgsif"});
    CHECK(fs::exists(dir + "/attack_avgsif.json"));

    std::string hist = dir + "/hist";
    pipeline::run_report(ctx, dir + "/attack_avgsif.json", dir + "/scores_avgsif_eval.csv",
                         hist);
    std::ifstream in(hist + "/histogram.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "bin_left,bin_right,member_count,nonmember_count");
}

TEST_CASE("the resolved config reproduces the run without hidden state") {
    std::string dir = scratch_dir("roundtrip");
    ExperimentConfig cfg = config_from_json(base_config(dir, "sif"));
    pipeline::RunContext ctx = pipeline::prepare(cfg);
    pipeline::TrainArtifacts art = pipeline::run_train(ctx, dir);
    pipeline::AttackComparison cmp = pipeline::run_attack(ctx, art.ckpt, dir);

    // Reloading the resolved dump is a fixpoint of resolution...
    ExperimentConfig again = load_config(dir + "/resolved_config.json");
    pipeline::RunContext ctx2 = pipeline::prepare(again);
    CHECK(resolved_config_json(ctx2.cfg, ctx2.model) ==
          resolved_config_json(ctx.cfg, ctx.model));
    CHECK(ctx2.split.mem_train == ctx.split.mem_train);

    // ...and together with the persisted artifacts it regenerates the report.
    std::string rep_dir = scratch_dir("roundtrip_rep");
    EvalReport rebuilt = pipeline::run_report(ctx2, dir + "/attack_sif.json",
                                              dir + "/scores_sif_eval.csv", rep_dir);
    const EvalReport* sif_row = nullptr;
    for (const auto& r : cmp.reports)
        if (r.attack == "sif") sif_row = &r;
    REQUIRE(sif_row != nullptr);
    CHECK(rebuilt.balanced_acc == sif_row->balanced_acc);
    CHECK(rebuilt.counts.tp == sif_row->counts.tp);
}

TEST_CASE("config validation rejects unknown keys and bad values") {
    CHECK_THROWS_AS(config_from_json("{not json"), ConfigError);
    CHECK_THROWS_AS(config_from_json(R"({"dataset":{"kind":"blobs"},"mem_size":10,
        "model":{"arch":"mlp"},"train":{"lr":0.1},"bogus_key":1})"),
                    ConfigError);
    CHECK_THROWS_AS(config_from_json(R"({"dataset":{"kind":"blobs"},"mem_size":10,
        "model":{"arch":"mlp"},"train":{}})"),
                    ConfigError);  // lr is mandatory
    CHECK_THROWS_AS(config_from_json(R"({"dataset":{"kind":"idx","images":"/nope.idx",
        "labels":"/nope2.idx"},"mem_size":10,"model":{"arch":"mlp"},"train":{"lr":0.1}})"),
                    ConfigError);  // missing files
}

TEST_CASE("cli binary maps failures to documented exit codes") {
    std::string dir = scratch_dir("cli_bin");
    std::string bad_cfg = write_file(dir, "bad.json", "{\"mem_size\": true");
    CHECK(run_cli("train --config " + bad_cfg) == 2);

    std::string diverge_cfg = write_file(
        dir, "diverge.json",
        R"({"dataset": {"kind":"blobs","classes":3,"dim":6,"per_class":40,"spread":2.0,"seed":1},
            "mem_size": 40, "model": {"arch":"mlp","hidden":[8]},
            "train": {"epochs": 40, "batch_size": 20, "lr": 1e9, "seed": 1},
            "out_dir": ")" + dir + R"(/diverge"})");
    CHECK(run_cli("train --config " + diverge_cfg) == 3);

    // A valid run end-to-end through the binary.
    std::string ok_dir = dir + "/ok";
    std::string ok_cfg = write_file(dir, "ok.json", base_config(ok_dir, "sif"));
    CHECK(run_cli("train --config " + ok_cfg) == 0);
    CHECK(run_cli("score --config " + ok_cfg + " --subset fit") == 0);
    CHECK(run_cli("score --config " + ok_cfg + " --subset eval") == 0);
    CHECK(run_cli("score --config " + ok_cfg + " --subset all --threads 2") == 0);
    CHECK(run_cli("attack --config " + ok_cfg) == 0);
    CHECK(run_cli("report --config " + ok_cfg + " --attack " + ok_dir +
                  "/attack_sif.json --scores " + ok_dir + "/scores_sif_eval.csv") == 0);

    // Scorer divergence: damping far above the scale explodes the recursion.
    std::string div_score_cfg = write_file(
        dir, "scorer_diverge.json",
        R"({"dataset": {"kind":"blobs","classes":3,"dim":6,"per_class":40,"spread":2.0,"seed":1},
            "mem_size": 40, "model": {"arch":"logreg"},
            "train": {"epochs": 20, "batch_size": 20, "lr": 0.2, "seed": 1},
            "scorer": {"kind":"sif","damping": 1e7, "scale": 1.0, "d": 2000},
            "out_dir": ")" + dir + R"(/sdiv"})");
    CHECK(run_cli("train --config " + div_score_cfg) == 0);
    CHECK(run_cli("score --config " + div_score_cfg + " --subset fit") == 4);
}
