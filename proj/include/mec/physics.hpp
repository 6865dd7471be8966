#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>

// Closed-form system-model formulas. Everything downstream (environment,
// scheduler, baselines, metrics) computes latency/energy/cost through these
// functions, so they are the single source of truth for the arithmetic.
namespace mec::physics {

// Conversion factors between the units configs are written in and the SI
// units used internally (bits, Hz, s, W, J).
struct UnitProfile {
    double bits_per_mb = 8.0e6;     // decimal megabyte, 8 bits per byte
    double joules_per_mj = 1.0e6;
    double hz_per_ghz = 1.0e9;
    double hz_per_mhz = 1.0e6;

    void validate() const {
        if (bits_per_mb <= 0.0 || joules_per_mj <= 0.0 || hz_per_ghz <= 0.0 || hz_per_mhz <= 0.0)
            throw std::invalid_argument("UnitProfile: conversion factors must be positive");
    }
};

struct RadioParams {
    double bandwidth_hz = 0.0; // W
    int subchannels = 1;       // K

    void validate() const {
        if (bandwidth_hz <= 0.0) throw std::invalid_argument("RadioParams: bandwidth must be positive");
        if (subchannels < 1) throw std::invalid_argument("RadioParams: need at least one subchannel");
    }
};

struct EnergyParams {
    double kappa = 5.0e-27;   // J*s^2/cycle
    double harvest_j = 0.0;   // energy harvested per step

    void validate() const {
        if (kappa <= 0.0) throw std::invalid_argument("EnergyParams: kappa must be positive");
        if (harvest_j < 0.0) throw std::invalid_argument("EnergyParams: harvest must be >= 0");
    }
};

struct CostWeights {
    double lambda1 = 0.5; // latency weight
    double lambda2 = 0.5; // energy weight

    void validate() const {
        if (lambda1 < 0.0 || lambda2 < 0.0) throw std::invalid_argument("CostWeights: weights must be >= 0");
    }
};

inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

inline double watts_to_dbm(double w) { return 10.0 * std::log10(w) + 30.0; }

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

// T_loc = z*c/f
inline double local_latency(double z_bits, double cycles_per_bit, double f_hz) {
    if (f_hz <= 0.0) throw std::domain_error("local_latency: cpu frequency must be positive");
    return z_bits * cycles_per_bit / f_hz;
}

// E_loc = kappa*z*c*f^2
inline double local_energy(double z_bits, double cycles_per_bit, double f_hz, double kappa) {
    return kappa * z_bits * cycles_per_bit * f_hz * f_hz;
}

// Shannon uplink rate over one of K equal subchannels: (W/K)*log2(1 + p*g),
// with p in watts and g already linear.
inline double channel_rate(double bandwidth_hz, int subchannels, double power_w, double gain_linear) {
    const double snr = power_w * gain_linear;
    if (snr < 0.0) throw std::domain_error("channel_rate: p*g must be >= 0");
    return bandwidth_hz / static_cast<double>(subchannels) * std::log2(1.0 + snr);
}

// T_off = z/d; a zero rate with pending bits yields an infinite-time
// sentinel that the environment clips during deadline accounting.
inline double offload_time(double z_bits, double rate_bps) {
    if (z_bits == 0.0) return 0.0;
    if (rate_bps == 0.0) return std::numeric_limits<double>::infinity();
    return z_bits / rate_bps;
}

// E_off = p*T_off
inline double offload_energy(double power_w, double t_off_s) { return power_w * t_off_s; }

// T_ser = z*c/f_e
inline double server_service_time(double z_bits, double cycles_per_bit, double f_e_hz) {
    if (f_e_hz <= 0.0) throw std::domain_error("server_service_time: unit speed must be positive");
    return z_bits * cycles_per_bit / f_e_hz;
}

// L = lambda1*T + lambda2*E
inline double task_cost(double latency_s, double energy_j, const CostWeights& w) {
    return w.lambda1 * latency_s + w.lambda2 * energy_j;
}

// L' = lambda1*min(tau - T, 0) + lambda2*min(b - b_min, 0); always <= 0 and
// zero exactly when both the deadline and the battery threshold are met.
inline double task_penalty(double latency_s, double deadline_s, double battery_j, double battery_min_j,
                           const CostWeights& w) {
    const double deadline_term = std::min(deadline_s - latency_s, 0.0);
    const double battery_term = std::min(battery_j - battery_min_j, 0.0);
    return w.lambda1 * deadline_term + w.lambda2 * battery_term;
}

// r = -(1/N) * sum(L_n - L'_n)
inline double system_reward(std::span<const double> costs, std::span<const double> penalties) {
    if (costs.empty() || costs.size() != penalties.size())
        throw std::domain_error("system_reward: need equal, non-empty cost/penalty lists");
    double acc = 0.0;
    for (std::size_t i = 0; i < costs.size(); ++i) acc += costs[i] - penalties[i];
    return -acc / static_cast<double>(costs.size());
}

// b' = clamp(b - E + e, 0, b_max)
inline double battery_step(double battery_j, double spent_j, double harvested_j, double battery_max_j) {
    return std::min(std::max(battery_j - spent_j + harvested_j, 0.0), battery_max_j);
}

// eps = eps_min + (eps_max - eps_min)*exp(-episode/max_episodes)
inline double epsilon_schedule(int episode, int max_episodes, double eps_min, double eps_max) {
    return eps_min + (eps_max - eps_min) *
                         std::exp(-static_cast<double>(episode) / static_cast<double>(max_episodes));
}

} // namespace mec::physics
