#pragma once

#include <atomic>
#include <cstdint>
#include <span>
#include <vector>

#include "mec/env.hpp"
#include "mec/mlp.hpp"
#include "mec/replay.hpp"
#include "mec/rng.hpp"

namespace mec::rl {

inline constexpr int kObsWidth = 7;
inline constexpr int kActWidth = 3;
inline constexpr int kSlotWidth = kObsWidth + kActWidth;

enum class NoiseKind { kNormal, kUniformSymmetric };

struct Hyper {
    double gamma = 0.99;
    int batch = 64;
    std::size_t replay_capacity = 10000;
    double lr_client = 1.0e-4;
    double lr_master = 1.0e-3;
    PerParams per;
    double eps_min = 0.01;
    double eps_max = 1.0;
    std::vector<int> client_hidden{64, 32};
    std::vector<int> master_hidden{512, 128};
    nn::Activation hidden_activation = nn::Activation::kRelu;
    nn::Activation master_output = nn::Activation::kIdentity;
    double actor_final_layer_scale = 0.01;
    NoiseKind noise = NoiseKind::kNormal;
};

// Per-device actor: 7 -> hidden -> 3 with tanh output, plus a hard-copied
// target twin.
struct ClientAgent {
    nn::Mlp online;
    nn::Mlp target;
    nn::Adam opt;

    ClientAgent(const Hyper& h, Rng& init_rng);
};

// Server-side per-client value network. Input is the joint state and action
// of every client followed by one candidate's (state, action) slot:
// 10*N + 10 entries.
class MasterAgent {
public:
    MasterAgent(const Hyper& h, int n_devices, Rng& init_rng);
    MasterAgent(MasterAgent&& other) noexcept
        : online(std::move(other.online)),
          target(std::move(other.target)),
          opt(std::move(other.opt)),
          n_devices_(other.n_devices_),
          q_evals_(other.q_evals_.load(std::memory_order_relaxed)) {}

    int n_devices() const { return n_devices_; }
    int input_width() const { return kSlotWidth * (n_devices_ + 1); }

    // Q(S, A, S_n, A_n); the all-zeros candidate encodes "nothing offloaded".
    double q(std::span<const double> joint, std::span<const double> cand_state,
             std::span<const double> cand_action, bool use_target) const;

    std::uint64_t q_eval_count() const { return q_evals_.load(std::memory_order_relaxed); }

    nn::Mlp online;
    nn::Mlp target;
    nn::Adam opt;

private:
    int n_devices_;
    mutable std::atomic<std::uint64_t> q_evals_{0};
};

// Raw policy output for one device: tanh forward, exploration noise scaled by
// epsilon in training, clipped to [-1,1], then mapped to [0,1] via a/2 + 0.5.
env::ClientAction client_act(const ClientAgent& agent, const env::Observation& obs, double epsilon,
                             bool evaluation, NoiseKind noise, Rng& noise_rng);

// Greedy admission shared by the master and the heuristic baselines: walk the
// proposals in the given order, accept while fewer than `subchannels` tasks
// are in and the next task still fits the storage budget; oversized tasks are
// skipped, not terminal.
std::vector<std::uint8_t> greedy_admit(const std::vector<int>& ordered_proposals,
                                       const std::vector<double>& size_bits, std::size_t n_devices,
                                       int subchannels, double storage_bits);

struct SelectionResult {
    std::vector<env::ClientAction> actions; // scaled to [0,1]
    env::MasterDecision decision;
};

// Combinatorial action selection. Exploitation ranks proposals by the
// master's Q and admits greedily under the channel/storage constraints;
// with probability epsilon in training the ranking is replaced by a random
// shuffle. Evaluation always exploits.
SelectionResult select_actions(const std::vector<ClientAgent>& clients, const MasterAgent& master,
                               const std::vector<env::Observation>& observations,
                               const std::vector<double>& task_size_bits, int subchannels,
                               double storage_bits, double epsilon, bool evaluation, NoiseKind noise,
                               Rng& noise_rng, Rng& explore_rng);

struct TrainResult {
    double td_error = 0.0;   // pooled mean squared TD residual (unweighted)
    std::size_t pairs = 0;   // Q/target pairs behind the mean
};

// One joint update from a prioritized minibatch: per-client DQN targets with
// DDQN next-candidate selection, master descent on the weighted TD loss,
// client ascent of the feedback Q (best-proposer candidate or the all-zeros
// placeholder) through both the client's joint slot and, for the best
// proposer, the candidate slot, and hard target syncs. Also refreshes the
// sampled transitions' priorities.
TrainResult train(std::vector<ClientAgent>& clients, MasterAgent& master, ReplayMemory& memory,
                  std::size_t batch, double gamma, double beta, Rng& sample_rng, bool parallel);

void sync_targets(std::vector<ClientAgent>& clients, MasterAgent& master);

} // namespace mec::rl
