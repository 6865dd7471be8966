#include "mec/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mec::env {

namespace {

double normalized(double v, double lo, double hi) {
    if (hi <= lo) return 0.0;
    return std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
}

} // namespace

void EpisodeConfig::validate() const {
    if (n_devices < 1) throw std::invalid_argument("EpisodeConfig: need at least one device");
    if (steps < 1) throw std::invalid_argument("EpisodeConfig: need at least one step");
    if (tau_max_s < ranges.task_deadline_s[1])
        throw std::invalid_argument("EpisodeConfig: tau_max must cover the largest deadline");
    units.validate();
    radio.validate();
    server.validate();
    energy.validate();
    weights.validate();
    const auto ordered = [](const std::array<double, 2>& r) { return r[0] <= r[1]; };
    if (!ordered(ranges.task_size_mb) || !ordered(ranges.task_cycles_per_bit) ||
        !ordered(ranges.task_deadline_s) || !ordered(ranges.gain_db) || !ordered(ranges.power_dbm) ||
        !ordered(ranges.freq_ghz) || !ordered(ranges.battery_mj))
        throw std::invalid_argument("EpisodeConfig: sampling ranges must be ordered lo <= hi");
    if (ranges.task_size_mb[0] <= 0.0 || ranges.task_cycles_per_bit[0] <= 0.0 ||
        ranges.task_deadline_s[0] <= 0.0)
        throw std::invalid_argument("EpisodeConfig: task ranges must be positive");
    if (ranges.freq_ghz[0] <= 0.0) throw std::invalid_argument("EpisodeConfig: f_min must be positive");
    if (ranges.battery_mj[0] < 0.0) throw std::invalid_argument("EpisodeConfig: batteries must be >= 0");
}

Env::Env(EpisodeConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)), seed_(seed), task_rng_(derive_stream(seed, "tasks")) {
    cfg_.validate();

    Rng profile_rng = derive_stream(seed, "profiles");
    const auto& r = cfg_.ranges;
    profiles_.reserve(static_cast<std::size_t>(cfg_.n_devices));
    for (int n = 0; n < cfg_.n_devices; ++n) {
        DeviceProfile p;
        p.gain_linear = physics::db_to_linear(profile_rng.uniform(r.gain_db[0], r.gain_db[1]));
        p.power_min_w = physics::dbm_to_watts(r.power_dbm[0]);
        p.power_max_w = physics::dbm_to_watts(profile_rng.uniform(r.power_dbm[0], r.power_dbm[1]));
        p.freq_min_hz = r.freq_ghz[0] * cfg_.units.hz_per_ghz;
        p.freq_max_hz = profile_rng.uniform(r.freq_ghz[0], r.freq_ghz[1]) * cfg_.units.hz_per_ghz;
        p.battery_min_j = r.battery_mj[0] * cfg_.units.joules_per_mj;
        if (r.battery_max_offset_j)
            p.battery_max_j = p.battery_min_j + *r.battery_max_offset_j;
        else
            p.battery_max_j = profile_rng.uniform(r.battery_mj[0], r.battery_mj[1]) * cfg_.units.joules_per_mj;
        profiles_.push_back(p);
    }

    batteries_.assign(static_cast<std::size_t>(cfg_.n_devices), 0.0);
    for (int n = 0; n < cfg_.n_devices; ++n)
        batteries_[static_cast<std::size_t>(n)] = profiles_[static_cast<std::size_t>(n)].battery_max_j;

    generate_tasks();
    rebuild_observations();
}

void Env::generate_tasks() {
    const auto& r = cfg_.ranges;
    tasks_.assign(static_cast<std::size_t>(cfg_.n_devices), TaskSpec{});
    for (auto& t : tasks_) {
        t.size_bits = task_rng_.uniform(r.task_size_mb[0], r.task_size_mb[1]) * cfg_.units.bits_per_mb;
        t.cycles_per_bit = task_rng_.uniform(r.task_cycles_per_bit[0], r.task_cycles_per_bit[1]);
        t.deadline_s = task_rng_.uniform(r.task_deadline_s[0], r.task_deadline_s[1]);
    }
}

void Env::rebuild_observations() {
    const auto& r = cfg_.ranges;
    const double z_lo = r.task_size_mb[0] * cfg_.units.bits_per_mb;
    const double z_hi = r.task_size_mb[1] * cfg_.units.bits_per_mb;
    const double g_lo = physics::db_to_linear(r.gain_db[0]);
    const double g_hi = physics::db_to_linear(r.gain_db[1]);
    const double p_lo = physics::dbm_to_watts(r.power_dbm[0]);
    const double p_hi = physics::dbm_to_watts(r.power_dbm[1]);
    const double f_lo = r.freq_ghz[0] * cfg_.units.hz_per_ghz;
    const double f_hi = r.freq_ghz[1] * cfg_.units.hz_per_ghz;

    observations_.assign(static_cast<std::size_t>(cfg_.n_devices), Observation{});
    for (int n = 0; n < cfg_.n_devices; ++n) {
        const auto& t = tasks_[static_cast<std::size_t>(n)];
        const auto& p = profiles_[static_cast<std::size_t>(n)];
        Observation& o = observations_[static_cast<std::size_t>(n)];
        o[0] = normalized(t.size_bits, z_lo, z_hi);
        o[1] = normalized(t.cycles_per_bit, r.task_cycles_per_bit[0], r.task_cycles_per_bit[1]);
        o[2] = normalized(t.deadline_s, r.task_deadline_s[0], r.task_deadline_s[1]);
        o[3] = normalized(p.gain_linear, g_lo, g_hi);
        o[4] = normalized(p.power_max_w, p_lo, p_hi);
        o[5] = normalized(p.freq_max_hz, f_lo, f_hi);
        o[6] = p.battery_max_j > 0.0
                   ? std::clamp(batteries_[static_cast<std::size_t>(n)] / p.battery_max_j, 0.0, 1.0)
                   : 0.0;
    }
}

std::vector<DecodedAction> Env::decode_actions(const std::vector<ClientAction>& raw) const {
    if (raw.size() != profiles_.size())
        throw std::invalid_argument("decode_actions: one action per device required");
    std::vector<DecodedAction> out(raw.size());
    for (std::size_t n = 0; n < raw.size(); ++n) {
        const auto& a = raw[n];
        if (a.x < 0.0 || a.x > 1.0 || a.p < 0.0 || a.p > 1.0 || a.f < 0.0 || a.f > 1.0)
            throw std::invalid_argument("decode_actions: components must lie in [0,1]");
        const auto& p = profiles_[n];
        out[n].propose = a.x >= 0.5;
        out[n].power_w = std::max(p.power_min_w, a.p * p.power_max_w);
        out[n].freq_hz = std::max(p.freq_min_hz, a.f * p.freq_max_hz);
    }
    return out;
}

StepOutcome Env::step(const std::vector<DecodedAction>& decoded, const MasterDecision& mask,
                      RejectedFate fate) {
    if (done()) throw std::logic_error("Env::step: episode already finished");
    const std::size_t n_dev = profiles_.size();
    if (decoded.size() != n_dev || mask.accept.size() != n_dev)
        throw std::invalid_argument("Env::step: decoded actions and mask must cover every device");

    // constraint checks; the env never repairs the master's mask
    int accepted = 0;
    double accepted_bits = 0.0;
    for (std::size_t n = 0; n < n_dev; ++n) {
        if (!mask.accept[n]) continue;
        if (!decoded[n].propose)
            throw std::invalid_argument("Env::step: mask accepts a task that was not proposed");
        ++accepted;
        accepted_bits += tasks_[n].size_bits;
    }
    if (accepted > cfg_.radio.subchannels)
        throw std::invalid_argument("Env::step: mask exceeds the subchannel count");
    if (accepted_bits > cfg_.server.storage_bits)
        throw std::invalid_argument("Env::step: mask exceeds the server storage");

    StepOutcome out;
    out.tasks.assign(n_dev, TaskOutcome{});

    // offloaded tasks go through the per-step FIFO scheduler
    std::vector<sched::TaskArrival> arrivals;
    std::vector<double> t_off(n_dev, 0.0);
    arrivals.reserve(static_cast<std::size_t>(accepted));
    for (std::size_t n = 0; n < n_dev; ++n) {
        if (!mask.accept[n]) continue;
        const double rate = physics::channel_rate(cfg_.radio.bandwidth_hz, cfg_.radio.subchannels,
                                                  decoded[n].power_w, profiles_[n].gain_linear);
        t_off[n] = physics::offload_time(tasks_[n].size_bits, rate);
        if (std::isfinite(t_off[n])) {
            arrivals.push_back({static_cast<int>(n), t_off[n],
                                physics::server_service_time(tasks_[n].size_bits,
                                                             tasks_[n].cycles_per_bit,
                                                             cfg_.server.unit_speed_hz)});
        }
    }
    std::vector<double> t_finish(n_dev, 0.0);
    if (!arrivals.empty()) {
        ++scheduler_calls_;
        for (const auto& entry : sched::schedule_step(std::move(arrivals), cfg_.server))
            t_finish[static_cast<std::size_t>(entry.task_id)] = sched::t_mec(entry);
    }

    std::vector<double> costs(n_dev, 0.0);
    std::vector<double> penalties(n_dev, 0.0);
    for (std::size_t n = 0; n < n_dev; ++n) {
        const auto& task = tasks_[n];
        const auto& prof = profiles_[n];
        TaskOutcome& to = out.tasks[n];

        double latency = 0.0;
        double energy = 0.0;
        if (mask.accept[n]) {
            to.offloaded = true;
            if (std::isfinite(t_off[n])) {
                latency = t_finish[n];
                energy = physics::offload_energy(decoded[n].power_w, t_off[n]);
            } else {
                // untransmittable: the radio is busy for the whole step, then
                // the task is discarded at the step boundary
                latency = cfg_.tau_max_s;
                energy = physics::offload_energy(decoded[n].power_w, cfg_.tau_max_s);
            }
        } else if (decoded[n].propose && fate == RejectedFate::kDrop) {
            to.dropped = true;
            latency = cfg_.tau_max_s; // drop penalty clock
            energy = cfg_.charge_drop_transmit_energy
                         ? physics::offload_energy(
                               decoded[n].power_w,
                               std::min(physics::offload_time(
                                            task.size_bits,
                                            physics::channel_rate(cfg_.radio.bandwidth_hz,
                                                                  cfg_.radio.subchannels,
                                                                  decoded[n].power_w, prof.gain_linear)),
                                        cfg_.tau_max_s))
                         : 0.0;
        } else {
            latency = physics::local_latency(task.size_bits, task.cycles_per_bit, decoded[n].freq_hz);
            energy = physics::local_energy(task.size_bits, task.cycles_per_bit, decoded[n].freq_hz,
                                           cfg_.energy.kappa);
        }

        to.expired = latency > task.deadline_s;
        to.latency_s = latency;
        to.energy_j = energy;
        to.cost = physics::task_cost(latency, energy, cfg_.weights);

        const double battery_after = physics::battery_step(batteries_[n], energy,
                                                           cfg_.energy.harvest_j, prof.battery_max_j);
        batteries_[n] = battery_after;
        to.battery_violation = battery_after < prof.battery_min_j;

        // the penalty clock saturates at the step boundary
        const double penalty_latency = std::min(latency, cfg_.tau_max_s);
        to.penalty = physics::task_penalty(penalty_latency, task.deadline_s, battery_after,
                                           prof.battery_min_j, cfg_.weights);

        costs[n] = to.cost;
        penalties[n] = to.penalty;
        out.count_offloaded += to.offloaded ? 1 : 0;
        out.count_expired += to.expired ? 1 : 0;
        out.count_battery_violation += to.battery_violation ? 1 : 0;
    }
    out.reward = physics::system_reward(costs, penalties);

    ++step_;
    generate_tasks();
    rebuild_observations();
    return out;
}

} // namespace mec::env
