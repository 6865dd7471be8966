#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mec/agents.hpp"
#include "mec/env.hpp"

namespace mec::harness {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Algorithm { kCcm, kMaddpg, kMaddpgStf, kMaddpgDsf, kRandomMaster };

Algorithm algorithm_from_string(const std::string& s);
std::string to_string(Algorithm a);

struct RunConfig {
    Algorithm algorithm = Algorithm::kCcm;
    env::EpisodeConfig env;
    rl::Hyper hyper;
    int max_episodes = 2000;
    int eval_episodes = 50;
    int eval_stride = 1; // evaluate every k-th training episode
    std::uint64_t run_seed = 37;
    std::uint64_t eval_seed_base = 0; // eval episode e uses seed base + e
    std::string out_dir;
    double budget_minutes = 0.0; // 0 = unlimited
    bool dump_trajectories = false;
    bool use_openmp = true;
    int checkpoint_stride = 0; // 0 = final checkpoint only
};

// Parses a JSON config file; values are given in the units the experiment
// tables use (MB, dBm, dB, GHz, MHz, MJ) and converted to SI on load.
RunConfig load_config(const std::string& path);
RunConfig desk_scale_config(); // built-in default, no file needed

struct MetricsRow {
    int episode = 0;
    double mean_eval_reward = 0.0;
    double pct_expired_tasks = 0.0;
    double pct_battery_violations = 0.0;
    double train_td_error = 0.0; // NaN while the replay is warming up
    double epsilon = 0.0;
};

struct RunSummary {
    int episodes_completed = 0;
    bool truncated = false; // wall-clock budget hit; output is a valid prefix
    bool diverged = false;  // non-finite loss; aborted with a diagnostic record
    std::string message;
    std::vector<MetricsRow> rows;
};

// Algorithm 1 at full fidelity: per training episode, roll the exploration
// environment for T steps, store transitions, train once the replay holds a
// minibatch, then score the frozen policies on eval episodes seeded by their
// index. Writes metrics.csv/timings.csv/meta.json (+ checkpoints, optional
// trajectories.jsonl) under cfg.out_dir.
RunSummary run(const RunConfig& cfg);

// Per-episode mean and 95% t-interval across runs, clipped to the shortest
// run. Returns the number of aggregated episodes.
int aggregate(const std::vector<std::string>& run_dirs, const std::string& out_csv);

// Re-scores a trajectory dump through the closed-form physics and the
// scheduler and checks the recorded costs, penalties and rewards. Returns
// the number of verified steps; throws on mismatch beyond `tol`.
int replay_rescore(const std::string& trajectories_path, double tol = 1.0e-9);

} // namespace mec::harness
