#pragma once

#include <string>
#include <vector>

#include "mec/agents.hpp"
#include "mec/env.hpp"
#include "mec/mlp.hpp"
#include "mec/replay.hpp"

namespace mec::rl {

// Rule-based admission used instead of a learned master. kFifoDrop rejects
// into a drop (the plain-MADDPG penalty convention); the others reject into
// local processing.
enum class AdmissionRule { kFifoDrop, kShortestOffloadFirst, kDeadlineOverSizeFirst, kRandom };

AdmissionRule admission_rule_from_string(const std::string& s);
std::string to_string(AdmissionRule r);

env::RejectedFate rejected_fate(AdmissionRule r);

struct Proposal {
    int device = 0;
    double t_off_s = 0.0;
    double deadline_s = 0.0;
    double size_bits = 0.0;
};

// Orders proposals per the rule, then admits greedily under the subchannel
// and storage constraints. Ties break by ascending device id; kRandom
// shuffles with the provided stream.
env::MasterDecision admit(AdmissionRule rule, const std::vector<Proposal>& proposals,
                          std::size_t n_devices, int subchannels, double storage_bits,
                          Rng& shuffle_rng);

// Centralized MADDPG critic over the joint state and action (10*N inputs).
class CriticAgent {
public:
    CriticAgent(const Hyper& h, int n_devices, Rng& init_rng);

    int n_devices() const { return n_devices_; }
    double value(std::span<const double> joint, bool use_target) const;

    nn::Mlp online;
    nn::Mlp target;
    nn::Adam opt;

private:
    int n_devices_;
};

// Standard MADDPG update sharing the optimizer, replay and sync conventions
// of the client-master trainer: critic regresses the bootstrapped target
// with target-actor next actions, each actor ascends the critic with its own
// action slot replaced by its current policy, hard target syncs every call.
TrainResult maddpg_train(std::vector<ClientAgent>& actors, CriticAgent& critic, ReplayMemory& memory,
                         std::size_t batch, double gamma, double beta, Rng& sample_rng, bool parallel);

} // namespace mec::rl
