#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mec/harness.hpp"

// Exit codes: 0 success, 2 config error, 3 budget truncation (valid partial
// output), 4 training divergence.
int main(int argc, char** argv) {
    CLI::App app{"Multi-user MEC task-offloading simulator and trainer"};
    app.require_subcommand(1);

    auto* run_cmd = app.add_subcommand("run", "Train one algorithm and write metrics");
    std::string config_path, algorithm, out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int episodes = 0;
    double budget_minutes = -1.0;
    bool dump = false;
    run_cmd->add_option("--config", config_path, "JSON config file (defaults to desk scale)");
    run_cmd->add_option("--algorithm", algorithm,
                        "ccm | maddpg | maddpg-stf | maddpg-dsf | random-master");
    run_cmd->add_option("--seed", seed, "run seed")->each([&](const std::string&) { seed_set = true; });
    run_cmd->add_option("--out", out_dir, "output directory");
    run_cmd->add_option("--episodes", episodes, "override max_episodes");
    run_cmd->add_option("--budget-minutes", budget_minutes, "wall-clock budget (0 = unlimited)");
    run_cmd->add_flag("--dump-trajectories", dump, "write trajectories.jsonl");

    auto* agg_cmd = app.add_subcommand("aggregate", "Mean and 95% CI across runs");
    std::vector<std::string> run_dirs;
    std::string agg_out = "aggregate.csv";
    agg_cmd->add_option("dirs", run_dirs, "run directories")->required();
    agg_cmd->add_option("--out", agg_out, "output CSV path");

    auto* replay_cmd = app.add_subcommand("replay", "Re-score a trajectory dump");
    std::string traj_path;
    double tol = 1.0e-9;
    replay_cmd->add_option("--trajectories", traj_path, "trajectories.jsonl path")->required();
    replay_cmd->add_option("--tol", tol, "relative tolerance");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) {
            mec::harness::RunConfig cfg = config_path.empty()
                                              ? mec::harness::desk_scale_config()
                                              : mec::harness::load_config(config_path);
            if (!algorithm.empty()) cfg.algorithm = mec::harness::algorithm_from_string(algorithm);
            if (seed_set) cfg.run_seed = seed;
            if (!out_dir.empty()) cfg.out_dir = out_dir;
            if (episodes > 0) cfg.max_episodes = episodes;
            if (budget_minutes >= 0.0) cfg.budget_minutes = budget_minutes;
            if (dump) cfg.dump_trajectories = true;
            if (cfg.out_dir.empty()) {
                std::fprintf(stderr, "error: --out is required\n");
                return 2;
            }

            const auto summary = mec::harness::run(cfg);
            std::printf("%s: %d episode(s) completed%s%s\n",
                        mec::harness::to_string(cfg.algorithm).c_str(), summary.episodes_completed,
                        summary.truncated ? ", truncated by budget" : "",
                        summary.diverged ? ", diverged" : "");
            if (summary.diverged) {
                std::fprintf(stderr, "divergence: %s\n", summary.message.c_str());
                return 4;
            }
            if (summary.truncated) return 3;
            return 0;
        }
        if (agg_cmd->parsed()) {
            const int episodes_out = mec::harness::aggregate(run_dirs, agg_out);
            std::printf("aggregated %zu run(s) over %d episode(s) -> %s\n", run_dirs.size(),
                        episodes_out, agg_out.c_str());
            return 0;
        }
        if (replay_cmd->parsed()) {
            const int steps = mec::harness::replay_rescore(traj_path, tol);
            std::printf("replay: %d step(s) verified against the closed-form model\n", steps);
            return 0;
        }
    } catch (const mec::harness::ConfigError& ex) {
        std::fprintf(stderr, "config error: %s\n", ex.what());
        return 2;
    } catch (const std::exception& ex) {
        std::fprintf(stderr, "error: %s\n", ex.what());
        return 1;
    }
    return 0;
}
