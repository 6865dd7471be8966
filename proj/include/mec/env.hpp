#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "mec/physics.hpp"
#include "mec/rng.hpp"
#include "mec/scheduler.hpp"

namespace mec::env {

// Static per-device parameters, fixed for one episode. Gains are linear,
// powers in watts, frequencies in Hz, batteries in joules.
struct DeviceProfile {
    double gain_linear = 1.0;
    double power_min_w = 0.0;
    double power_max_w = 0.0;
    double freq_min_hz = 0.0;
    double freq_max_hz = 0.0;
    double battery_min_j = 0.0;
    double battery_max_j = 0.0;
};

struct TaskSpec {
    double size_bits = 0.0;
    double cycles_per_bit = 0.0;
    double deadline_s = 0.0;
};

// Raw client output after scaling, all components in [0,1]:
// x (offload proposal), p (transmit power fraction), f (cpu fraction).
struct ClientAction {
    double x = 0.0;
    double p = 0.0;
    double f = 0.0;
};

struct DecodedAction {
    bool propose = false;
    double power_w = 0.0;
    double freq_hz = 0.0;
};

// Server-side accept decision; accept[n]=1 only where the client proposed.
struct MasterDecision {
    std::vector<std::uint8_t> accept;
};

// What happens to proposals the server rejects: processed locally (most
// algorithms) or dropped entirely (plain-MADDPG channel assignment).
enum class RejectedFate { kLocal, kDrop };

using Observation = std::array<double, 7>; // [z, c, tau, g, p_max, f_max, b], all in [0,1]

struct TaskOutcome {
    bool offloaded = false; // accepted by the server
    bool dropped = false;   // rejected under RejectedFate::kDrop
    double latency_s = 0.0; // nominal completion time (cost clock)
    double energy_j = 0.0;
    double cost = 0.0;      // L_n
    double penalty = 0.0;   // L'_n, always <= 0
    bool expired = false;
    bool battery_violation = false;
};

struct StepOutcome {
    std::vector<TaskOutcome> tasks;
    double reward = 0.0;
    int count_offloaded = 0;
    int count_expired = 0;
    int count_battery_violation = 0;
};

// Uniform sampling ranges in the units configs are written in; converted on
// use via UnitProfile. Device power budgets are sampled uniformly in dBm and
// gains in dB (the stated ranges live in log space), then converted.
struct SamplingRanges {
    std::array<double, 2> task_size_mb{1.0, 50.0};
    std::array<double, 2> task_cycles_per_bit{300.0, 737.5};
    std::array<double, 2> task_deadline_s{0.1, 0.9};
    std::array<double, 2> gain_db{5.0, 14.0};
    std::array<double, 2> power_dbm{1.0, 24.0};          // [P_min, P_max]; per-device max drawn here
    std::array<double, 2> freq_ghz{0.4, 1.5};            // [f_min, f_max]; per-device max drawn here
    std::array<double, 2> battery_mj{0.5, 3.2};          // [b_min, b_max]; per-device max drawn here
    std::optional<double> battery_max_offset_j;          // if set: b_max = b_min + offset (in J)
};

struct EpisodeConfig {
    int n_devices = 1;
    int steps = 1;
    double tau_max_s = 1.0;
    physics::UnitProfile units;
    physics::RadioParams radio;
    sched::ServerConfig server;
    physics::EnergyParams energy;
    physics::CostWeights weights;
    SamplingRanges ranges;
    bool charge_drop_transmit_energy = false;

    void validate() const;
};

// Episodic multi-user offloading environment. A (config, seed) pair fully
// determines every sampled quantity; replaying the same action sequence
// reproduces bit-identical outcomes.
class Env {
public:
    Env(EpisodeConfig cfg, std::uint64_t seed);

    const std::vector<Observation>& observations() const { return observations_; }
    const std::vector<TaskSpec>& tasks() const { return tasks_; }
    const std::vector<DeviceProfile>& profiles() const { return profiles_; }
    const std::vector<double>& batteries() const { return batteries_; }
    const EpisodeConfig& config() const { return cfg_; }
    int step_index() const { return step_; } // steps completed so far
    bool done() const { return step_ >= cfg_.steps; }
    std::uint64_t seed() const { return seed_; }

    std::vector<DecodedAction> decode_actions(const std::vector<ClientAction>& raw) const;

    // Applies one step. The mask must satisfy the channel and storage
    // constraints and only mark proposed tasks; the env validates and throws
    // rather than repairing.
    StepOutcome step(const std::vector<DecodedAction>& decoded, const MasterDecision& mask,
                     RejectedFate fate = RejectedFate::kLocal);

    // instrumentation: number of schedule_step invocations so far
    std::uint64_t scheduler_calls() const { return scheduler_calls_; }

private:
    void generate_tasks();
    void rebuild_observations();

    EpisodeConfig cfg_;
    std::uint64_t seed_;
    Rng task_rng_;
    std::vector<DeviceProfile> profiles_;
    std::vector<TaskSpec> tasks_;
    std::vector<double> batteries_;
    std::vector<Observation> observations_;
    int step_ = 0;
    std::uint64_t scheduler_calls_ = 0;
};

} // namespace mec::env
