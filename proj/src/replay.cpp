#include "mec/replay.hpp"

#include <algorithm>
#include <cmath>

namespace mec::rl {

void ReplayMemory::push(Transition t) {
    if (storage_.size() < capacity_) {
        storage_.push_back(std::move(t));
        priorities_.push_back(max_priority_);
    } else {
        storage_[next_slot_] = std::move(t); // ring eviction of the oldest
        priorities_[next_slot_] = max_priority_;
    }
    next_slot_ = (next_slot_ + 1) % capacity_;
}

std::vector<double> ReplayMemory::sampling_probabilities() const {
    std::vector<double> p(priorities_.begin(), priorities_.end());
    double total = 0.0;
    for (const double x : p) total += x;
    if (total <= 0.0) throw std::logic_error("ReplayMemory: priorities must stay positive");
    for (double& x : p) x /= total;
    return p;
}

ReplayMemory::Sample ReplayMemory::sample(std::size_t m, double beta, Rng& rng) const {
    if (m == 0 || m > storage_.size())
        throw std::out_of_range("ReplayMemory: cannot sample " + std::to_string(m) + " of " +
                                std::to_string(storage_.size()));
    std::vector<double> cumulative(priorities_.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < priorities_.size(); ++i) {
        acc += priorities_[i];
        cumulative[i] = acc;
    }

    Sample s;
    s.indices.resize(m);
    s.weights.resize(m);
    const double n = static_cast<double>(storage_.size());
    double max_w = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        const double u = rng.uniform() * acc;
        const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        const std::size_t idx =
            std::min(static_cast<std::size_t>(it - cumulative.begin()), storage_.size() - 1);
        const double p = priorities_[idx] / acc;
        const double w = std::pow(n * p, -beta);
        s.indices[k] = idx;
        s.weights[k] = w;
        max_w = std::max(max_w, w);
    }
    for (double& w : s.weights) w /= max_w;
    return s;
}

void ReplayMemory::update_priorities(std::span<const std::size_t> indices,
                                     std::span<const double> abs_td) {
    if (indices.size() != abs_td.size())
        throw std::invalid_argument("update_priorities: size mismatch");
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const double p = std::pow(std::abs(abs_td[k]) + per_.epsilon, per_.alpha);
        priorities_.at(indices[k]) = p;
        max_priority_ = std::max(max_priority_, p);
    }
}

} // namespace mec::rl
