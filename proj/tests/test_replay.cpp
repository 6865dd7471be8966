#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "mec/replay.hpp"
#include "mec/rng.hpp"

using namespace mec;
using namespace mec::rl;

namespace {

Transition make_tr(double reward) {
    Transition t;
    t.state = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
    t.action = {0.5, 0.5, 0.5};
    t.accept_mask = {1};
    t.reward = reward;
    t.next_state = t.state;
    t.done = false;
    return t;
}

} // namespace

TEST_CASE("alpha zero samples uniformly") {
    PerParams per;
    per.alpha = 0.0;
    ReplayMemory mem(16, per);
    for (int i = 0; i < 5; ++i) mem.push(make_tr(i));
    std::vector<std::size_t> idx{0, 1, 2, 3, 4};
    mem.update_priorities(idx, std::vector<double>{10.0, 1.0, 0.1, 5.0, 2.0});
    for (const double p : mem.sampling_probabilities()) CHECK(p == doctest::Approx(0.2));
}

TEST_CASE("proportional probabilities: 3 and 1 give 0.75 / 0.25") {
    PerParams per;
    per.alpha = 1.0;
    per.epsilon = 0.0;
    ReplayMemory mem(4, per);
    mem.push(make_tr(0));
    mem.push(make_tr(1));
    std::vector<std::size_t> idx{0, 1};
    mem.update_priorities(idx, std::vector<double>{3.0, 1.0});
    const auto p = mem.sampling_probabilities();
    CHECK(p[0] == doctest::Approx(0.75));
    CHECK(p[1] == doctest::Approx(0.25));
}

TEST_CASE("ring eviction replaces the oldest entry") {
    ReplayMemory mem(3, PerParams{});
    for (int i = 0; i < 5; ++i) mem.push(make_tr(i));
    CHECK(mem.size() == 3);
    // slots 0 and 1 were overwritten by rewards 3 and 4
    CHECK(mem.at(0).reward == doctest::Approx(3.0));
    CHECK(mem.at(1).reward == doctest::Approx(4.0));
    CHECK(mem.at(2).reward == doctest::Approx(2.0));
}

TEST_CASE("new transitions enter at max priority") {
    PerParams per;
    per.alpha = 1.0;
    per.epsilon = 0.0;
    ReplayMemory mem(8, per);
    mem.push(make_tr(0));
    std::vector<std::size_t> idx{0};
    mem.update_priorities(idx, std::vector<double>{6.0});
    mem.push(make_tr(1)); // should arrive with priority 6
    const auto p = mem.sampling_probabilities();
    CHECK(p[0] == doctest::Approx(0.5));
    CHECK(p[1] == doctest::Approx(0.5));
}

TEST_CASE("sampling from an empty or undersized memory throws") {
    ReplayMemory mem(8, PerParams{});
    Rng rng(1);
    CHECK_THROWS_AS(mem.sample(1, 0.4, rng), std::out_of_range);
    mem.push(make_tr(0));
    CHECK_THROWS_AS(mem.sample(2, 0.4, rng), std::out_of_range);
    CHECK_NOTHROW(mem.sample(1, 0.4, rng));
}

TEST_CASE("importance weights follow (n P)^-beta, max-normalized") {
    PerParams per;
    per.alpha = 1.0;
    per.epsilon = 0.0;
    ReplayMemory mem(4, per);
    mem.push(make_tr(0));
    mem.push(make_tr(1));
    std::vector<std::size_t> idx{0, 1};
    mem.update_priorities(idx, std::vector<double>{3.0, 1.0});
    // P = [0.75, 0.25], n = 2; w_raw = (n P)^-beta = [1.5^-b, 0.5^-b]
    const double beta = 0.4;
    Rng rng(7);
    const double w_hi = std::pow(2.0 * 0.25, -beta); // rarer item carries the larger weight
    const double w_lo = std::pow(2.0 * 0.75, -beta);
    bool saw_both = false;
    for (int rep = 0; rep < 64; ++rep) {
        const auto s = mem.sample(2, beta, rng);
        bool batch_has_rare = false;
        for (const auto i : s.indices) batch_has_rare |= (i == 1);
        for (std::size_t k = 0; k < s.indices.size(); ++k) {
            if (!batch_has_rare) {
                CHECK(s.weights[k] == doctest::Approx(1.0)); // max-normalized within the batch
            } else if (s.indices[k] == 0) {
                CHECK(s.weights[k] == doctest::Approx(w_lo / w_hi));
            } else {
                CHECK(s.weights[k] == doctest::Approx(1.0));
                saw_both = true;
            }
        }
    }
    CHECK(saw_both);
}

TEST_CASE("empirical sampling frequencies match P(i) within 3 sigma") {
    PerParams per;
    per.alpha = 0.6;
    ReplayMemory mem(32, per);
    Rng prio_rng(21);
    for (int i = 0; i < 20; ++i) mem.push(make_tr(i));
    std::vector<std::size_t> idx(20);
    std::vector<double> tds(20);
    for (std::size_t i = 0; i < 20; ++i) {
        idx[i] = i;
        tds[i] = prio_rng.uniform(0.0, 8.0);
    }
    mem.update_priorities(idx, tds);
    const auto p = mem.sampling_probabilities();

    const std::size_t draws = 100000;
    std::vector<long> counts(20, 0);
    Rng rng(22);
    for (std::size_t rep = 0; rep < draws / 20; ++rep) {
        const auto s = mem.sample(20, 0.4, rng);
        for (const auto i : s.indices) ++counts[i];
    }
    for (std::size_t i = 0; i < 20; ++i) {
        const double expect = static_cast<double>(draws) * p[i];
        const double sigma = std::sqrt(static_cast<double>(draws) * p[i] * (1.0 - p[i]));
        CHECK(std::abs(static_cast<double>(counts[i]) - expect) <= 3.0 * sigma + 1.0);
    }
}
