#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "mec/rng.hpp"

namespace mec::rl {

// One environment step as stored for training. Layouts are flat:
// state/next_state are N*7, action is N*3 (already scaled to [0,1]),
// accept_mask is N.
struct Transition {
    std::vector<double> state;
    std::vector<double> action;
    std::vector<std::uint8_t> accept_mask;
    double reward = 0.0;
    std::vector<double> next_state;
    bool done = false;
};

struct PerParams {
    double alpha = 0.6;      // prioritization exponent
    double beta_start = 0.4; // importance-sampling exponent, annealed to beta_end
    double beta_end = 1.0;
    double epsilon = 1.0e-6; // keeps priorities strictly positive
};

// Ring buffer with proportional prioritized sampling:
// P(i) ~ (|td_i| + eps)^alpha, importance weight (size*P(i))^-beta normalized
// by the batch max. New transitions enter at the current max priority.
class ReplayMemory {
public:
    ReplayMemory(std::size_t capacity, PerParams per) : capacity_(capacity), per_(per) {
        if (capacity_ == 0) throw std::invalid_argument("ReplayMemory: capacity must be positive");
        storage_.reserve(capacity_);
        priorities_.reserve(capacity_);
    }

    void push(Transition t);

    struct Sample {
        std::vector<std::size_t> indices;
        std::vector<double> weights; // max-normalized importance weights
    };

    // m draws with replacement, proportional to stored priorities.
    Sample sample(std::size_t m, double beta, Rng& rng) const;

    void update_priorities(std::span<const std::size_t> indices, std::span<const double> abs_td);

    const Transition& at(std::size_t i) const { return storage_[i]; }
    std::size_t size() const { return storage_.size(); }
    std::size_t capacity() const { return capacity_; }
    const PerParams& per() const { return per_; }

    // normalized P(i); exposed for tests and instrumentation
    std::vector<double> sampling_probabilities() const;

private:
    std::size_t capacity_;
    PerParams per_;
    std::vector<Transition> storage_;
    std::vector<double> priorities_; // already exponentiated: (|td|+eps)^alpha
    std::size_t next_slot_ = 0;
    double max_priority_ = 1.0;
};

} // namespace mec::rl
