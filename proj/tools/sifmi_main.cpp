// sifmi: membership-inference pipeline driver.
//   train  - fit the target model and write a checkpoint
//   score  - compute self-influence scores for a subset
//   attack - fit the threshold attack and compare it against the baselines
//   oracle - run the numerical sanity checks (finite differences, exact vs
//            stochastic inverse-HVP, leave-one-out retraining)
//   report - rebuild an evaluation report from persisted artifacts

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "sifmi/pipeline.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitScorer = 4;
constexpr int kExitFit = 5;
constexpr int kExitOracle = 6;

struct CommonArgs {
    std::string config;
    std::string checkpoint;
    std::string out;
    std::string scorer;
    std::string subset = "fit";
    int threads = 0;
    long long seed = -1;
};

sifmi::ExperimentConfig load_and_override(const CommonArgs& args) {
    sifmi::ExperimentConfig cfg = sifmi::load_config(args.config);
    if (args.threads > 0) cfg.threads = args.threads;
    if (!args.out.empty()) cfg.out_dir = args.out;
    if (!args.scorer.empty()) {
        if (args.scorer != "sif" && args.scorer != "adasif" && args.scorer != "avgsif")
            throw sifmi::ConfigError("--scorer must be sif, adasif or avgsif");
        cfg.scorer.kind = args.scorer;
        cfg.scorer.lissa.depth = 0;  // re-resolve the per-scorer default
    }
    if (args.seed >= 0) cfg.scorer.lissa.seed = static_cast<std::uint64_t>(args.seed);
    return cfg;
}

sifmi::Checkpoint load_ckpt(const CommonArgs& args, const sifmi::ExperimentConfig& cfg) {
    std::string path =
        args.checkpoint.empty() ? cfg.out_dir + "/checkpoint.sifc" : args.checkpoint;
    return sifmi::load_checkpoint(path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"self-influence membership inference pipeline"};
    app.require_subcommand(1);

    CommonArgs args;
    auto add_common = [&](CLI::App* cmd, bool needs_ckpt) {
        cmd->add_option("--config", args.config, "experiment config JSON")->required();
        cmd->add_option("--out", args.out, "output directory override");
        cmd->add_option("--threads", args.threads, "worker threads");
        cmd->add_option("--seed", args.seed, "scorer seed override");
        if (needs_ckpt) cmd->add_option("--checkpoint", args.checkpoint, "checkpoint path");
    };

    CLI::App* cmd_train = app.add_subcommand("train", "train the target model");
    add_common(cmd_train, true);

    CLI::App* cmd_score = app.add_subcommand("score", "compute influence scores");
    add_common(cmd_score, true);
    cmd_score->add_option("--scorer", args.scorer, "sif|adasif|avgsif");
    cmd_score->add_option("--subset", args.subset, "fit|eval|all")
        ->check(CLI::IsMember({"fit", "eval", "all"}));

    CLI::App* cmd_attack = app.add_subcommand("attack", "fit and evaluate attacks");
    add_common(cmd_attack, true);

    CLI::App* cmd_oracle = app.add_subcommand("oracle", "numerical oracle checks");
    add_common(cmd_oracle, false);

    CLI::App* cmd_report = app.add_subcommand("report", "rebuild evaluation report");
    add_common(cmd_report, false);
    std::string attack_json, scores_csv;
    cmd_report->add_option("--attack", attack_json, "attack model JSON")->required();
    cmd_report->add_option("--scores", scores_csv, "scores CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        sifmi::ExperimentConfig cfg = load_and_override(args);
        sifmi::pipeline::RunContext ctx = sifmi::pipeline::prepare(cfg);

        if (cmd_train->parsed()) {
            if (args.seed >= 0) {
                ctx.cfg.train.seed = static_cast<std::uint64_t>(args.seed);
            }
            try {
                auto art = sifmi::pipeline::run_train(ctx, ctx.cfg.out_dir, args.checkpoint);
                std::cout << "checkpoint: " << art.checkpoint_path << "\n"
                          << "metrics: " << art.metrics_path << "\n";
            } catch (const sifmi::DivergenceError& e) {
                std::cerr << "error: " << e.what() << "\n";
                return kExitDivergence;
            }
        } else if (cmd_score->parsed()) {
            sifmi::Checkpoint ckpt = load_ckpt(args, ctx.cfg);
            sifmi::pipeline::write_run_manifest(ctx, ctx.cfg.out_dir);
            std::string csv = ctx.cfg.out_dir + "/scores_" + ctx.cfg.scorer.kind + "_" +
                              args.subset + ".csv";
            try {
                auto res = sifmi::pipeline::run_score(ctx, ckpt, args.subset, ctx.cfg.scorer,
                                                      csv, ctx.cfg.threads);
                std::cout << "scores: " << csv << " (" << res.rows.size() << " rows, "
                          << res.failed_ids.size() << " failures)\n";
            } catch (const sifmi::ScorerBudgetExceeded& e) {
                std::cerr << "error: " << e.what() << "\n";
                return kExitScorer;
            }
        } else if (cmd_attack->parsed()) {
            sifmi::Checkpoint ckpt = load_ckpt(args, ctx.cfg);
            sifmi::pipeline::write_run_manifest(ctx, ctx.cfg.out_dir);
            try {
                auto cmp = sifmi::pipeline::run_attack(ctx, ckpt, ctx.cfg.out_dir);
                std::cout << "attack           member  nonmem  balanced\n";
                for (const auto& rep : cmp.reports) {
                    std::printf("%-16s %.3f   %.3f   %.3f\n", rep.attack.c_str(),
                                sifmi::round3(rep.member_accuracy),
                                sifmi::round3(rep.nonmember_accuracy),
                                sifmi::round3(rep.balanced_acc));
                }
                std::cout << "report: " << ctx.cfg.out_dir + "/comparison.json" << "\n";
            } catch (const sifmi::ScorerBudgetExceeded& e) {
                std::cerr << "error: " << e.what() << "\n";
                return kExitScorer;
            } catch (const sifmi::FitFailure& e) {
                std::cerr << "error: " << e.what() << "\n";
                return kExitFit;
            }
        } else if (cmd_oracle->parsed()) {
            auto res = sifmi::pipeline::run_oracle(ctx);
            std::filesystem::create_directories(ctx.cfg.out_dir);
            std::ofstream out(ctx.cfg.out_dir + "/oracle_report.json");
            out << res.to_json() << "\n";
            for (const auto& c : res.checks)
                std::printf("[%s] %-24s measured %.3e (%s %.3e)\n", c.pass ? "pass" : "FAIL",
                            c.name.c_str(), c.measured, c.direction == "max" ? "<=" : ">=",
                            c.tolerance);
            if (!res.pass) return kExitOracle;
        } else if (cmd_report->parsed()) {
            auto rep = sifmi::pipeline::run_report(ctx, attack_json, scores_csv, ctx.cfg.out_dir);
            std::cout << rep.to_json() << "\n";
        }
    } catch (const sifmi::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const sifmi::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
