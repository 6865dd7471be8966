#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "mec/physics.hpp"
#include "mec/rng.hpp"

using namespace mec;
using namespace mec::physics;

namespace {
bool close(double a, double b, double rel = 1.0e-12) {
    return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)});
}
} // namespace

TEST_CASE("decibel conversions") {
    CHECK(close(dbm_to_watts(30.0), 1.0));
    CHECK(close(dbm_to_watts(0.0), 0.001));
    CHECK(close(dbm_to_watts(24.0), 0.251188643150958));
    CHECK(close(db_to_linear(0.0), 1.0));
    CHECK(close(db_to_linear(10.0), 10.0));
    CHECK(close(db_to_linear(14.0), 25.1188643150958));
    // round trips
    CHECK(close(watts_to_dbm(dbm_to_watts(17.3)), 17.3));
}

TEST_CASE("local latency") {
    CHECK(close(local_latency(1.0e9, 1.0, 1.0e9), 1.0));
    CHECK(close(local_latency(8.0e6, 300.0, 1.5e9), 1.6));
    CHECK(local_latency(0.0, 300.0, 1.0e9) == 0.0);
    CHECK_THROWS_AS(local_latency(1.0, 1.0, 0.0), std::domain_error);
}

TEST_CASE("local energy") {
    CHECK(local_energy(0.0, 300.0, 1.0e9, 5.0e-27) == 0.0);
    CHECK(close(local_energy(8.0e6, 300.0, 1.5e9, 5.0e-27), 27.0));
    // quadratic in f, linear in z and c
    Rng rng(11);
    for (int i = 0; i < 50; ++i) {
        const double z = rng.uniform(1.0, 1.0e9);
        const double c = rng.uniform(1.0, 1000.0);
        const double f = rng.uniform(1.0e8, 3.0e9);
        const double e = local_energy(z, c, f, 5.0e-27);
        CHECK(close(local_energy(z, c, 2.0 * f, 5.0e-27), 4.0 * e));
        CHECK(close(local_energy(2.0 * z, c, f, 5.0e-27), 2.0 * e));
        CHECK(close(local_energy(z, 3.0 * c, f, 5.0e-27), 3.0 * e));
    }
}

TEST_CASE("channel rate") {
    CHECK(close(channel_rate(40.0e6, 10, 1.0, 1.0), 4.0e6));
    CHECK(channel_rate(40.0e6, 10, 0.0, 5.0) == 0.0);
    CHECK(close(channel_rate(40.0e6, 10, 3.0, 1.0), 8.0e6));
    CHECK_THROWS_AS(channel_rate(40.0e6, 10, -1.0, 1.0), std::domain_error);

    // monotone non-decreasing in p and g
    Rng rng(13);
    for (int i = 0; i < 200; ++i) {
        const double p = rng.uniform(0.0, 0.3);
        const double g = rng.uniform(0.0, 30.0);
        const double d = channel_rate(40.0e6, 10, p, g);
        CHECK(channel_rate(40.0e6, 10, p + rng.uniform(0.0, 0.1), g) >= d);
        CHECK(channel_rate(40.0e6, 10, p, g + rng.uniform(0.0, 5.0)) >= d);
    }
}

TEST_CASE("offload time and energy") {
    CHECK(close(offload_time(4.0e6, 4.0e6), 1.0));
    CHECK(offload_time(0.0, 0.0) == 0.0);
    CHECK(offload_time(1.0, 0.0) == std::numeric_limits<double>::infinity());
    CHECK(close(offload_energy(0.25, 0.7), 0.175));
    CHECK(offload_energy(0.25, 0.0) == 0.0);
    CHECK(offload_energy(0.0, 3.0) == 0.0);
}

TEST_CASE("server service time") {
    CHECK(close(server_service_time(8.0e6, 300.0, 4.0e9), 0.6));
    CHECK(server_service_time(0.0, 300.0, 4.0e9) == 0.0);
    CHECK(close(server_service_time(8.0e6, 300.0, 2.0e9), 2.0 * server_service_time(8.0e6, 300.0, 4.0e9)));
    CHECK_THROWS_AS(server_service_time(1.0, 1.0, 0.0), std::domain_error);
}

TEST_CASE("task cost") {
    const CostWeights even{0.5, 0.5};
    CHECK(close(task_cost(1.0, 1.0, even), 1.0));
    CHECK(close(task_cost(0.2, 0.1, CostWeights{1.0, 5.0}), 0.7));
    CHECK(task_cost(0.0, 0.0, even) == 0.0);
}

TEST_CASE("task penalty") {
    const CostWeights even{0.5, 0.5};
    CHECK(task_penalty(0.5, 0.9, 10.0, 1.0, even) == 0.0);
    CHECK(close(task_penalty(1.0, 0.5, 10.0, 1.0, even), -0.25));
    CHECK(close(task_penalty(0.1, 0.9, 3.0, 5.0, even), -1.0));

    // <= 0 always, and 0 exactly on the feasible region
    Rng rng(17);
    for (int i = 0; i < 500; ++i) {
        const double t = rng.uniform(0.0, 2.0);
        const double tau = rng.uniform(0.1, 1.0);
        const double b = rng.uniform(0.0, 10.0);
        const double bmin = rng.uniform(0.0, 10.0);
        const double p = task_penalty(t, tau, b, bmin, even);
        CHECK(p <= 0.0);
        if (t <= tau && b >= bmin) CHECK(p == 0.0);
        if (p == 0.0) {
            CHECK(t <= tau);
            CHECK(b >= bmin);
        }
    }
}

TEST_CASE("system reward") {
    {
        std::vector<double> costs{0.5}, pens{0.0};
        CHECK(close(system_reward(costs, pens), -0.5));
    }
    {
        std::vector<double> costs{1.0, 1.0}, pens{0.0, -1.0};
        CHECK(close(system_reward(costs, pens), -1.5));
    }
    {
        std::vector<double> costs{0.0, 0.0, 0.0}, pens{0.0, 0.0, 0.0};
        CHECK(system_reward(costs, pens) == 0.0);
    }
    std::vector<double> empty;
    CHECK_THROWS_AS(system_reward(empty, empty), std::domain_error);

    // equals the negated mean cost whenever penalties vanish
    Rng rng(19);
    for (int i = 0; i < 100; ++i) {
        const std::size_t n = 1 + rng.uniform_index(10);
        std::vector<double> costs(n), pens(n, 0.0);
        double acc = 0.0;
        for (auto& c : costs) {
            c = rng.uniform(0.0, 5.0);
            acc += c;
        }
        CHECK(close(system_reward(costs, pens), -acc / static_cast<double>(n)));
    }
}

TEST_CASE("battery step") {
    CHECK(close(battery_step(1.0, 0.3, 0.001, 3.2e6), 0.701));
    CHECK(battery_step(0.1, 0.5, 0.0, 3.2e6) == 0.0);
    CHECK(battery_step(3.2e6, 0.0, 0.001, 3.2e6) == 3.2e6);

    Rng rng(23);
    for (int i = 0; i < 500; ++i) {
        const double bmax = rng.uniform(0.1, 10.0);
        const double b = rng.uniform(0.0, bmax);
        const double out = battery_step(b, rng.uniform(0.0, 20.0), rng.uniform(0.0, 20.0), bmax);
        CHECK(out >= 0.0);
        CHECK(out <= bmax);
    }
}

TEST_CASE("epsilon schedule") {
    CHECK(close(epsilon_schedule(0, 2000, 0.01, 1.0), 1.0));
    CHECK(close(epsilon_schedule(2000, 2000, 0.01, 1.0), 0.01 + 0.99 * std::exp(-1.0)));
    CHECK(close(epsilon_schedule(2000, 2000, 0.01, 1.0), 0.3742006467597279));
    CHECK(close(epsilon_schedule(123, 2000, 0.3, 0.3), 0.3));
}

TEST_CASE("purity: identical inputs give bit-identical outputs") {
    Rng rng(29);
    for (int i = 0; i < 100; ++i) {
        const double z = rng.uniform(0.0, 4.0e8);
        const double c = rng.uniform(1.0, 800.0);
        const double f = rng.uniform(1.0e8, 2.0e9);
        CHECK(local_latency(z, c, f) == local_latency(z, c, f));
        CHECK(local_energy(z, c, f, 5.0e-27) == local_energy(z, c, f, 5.0e-27));
        CHECK(channel_rate(4.0e7, 10, f * 1e-10, c) == channel_rate(4.0e7, 10, f * 1e-10, c));
    }
}
