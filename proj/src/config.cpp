#include <fstream>

#include <json.hpp>

#include "mec/baselines.hpp"
#include "mec/harness.hpp"

namespace mec::harness {

using nlohmann::json;

Algorithm algorithm_from_string(const std::string& s) {
    if (s == "ccm") return Algorithm::kCcm;
    if (s == "maddpg") return Algorithm::kMaddpg;
    if (s == "maddpg-stf") return Algorithm::kMaddpgStf;
    if (s == "maddpg-dsf") return Algorithm::kMaddpgDsf;
    if (s == "random-master") return Algorithm::kRandomMaster;
    throw ConfigError("unknown algorithm: " + s);
}

std::string to_string(Algorithm a) {
    switch (a) {
        case Algorithm::kCcm: return "ccm";
        case Algorithm::kMaddpg: return "maddpg";
        case Algorithm::kMaddpgStf: return "maddpg-stf";
        case Algorithm::kMaddpgDsf: return "maddpg-dsf";
        case Algorithm::kRandomMaster: return "random-master";
    }
    return "?";
}

namespace {

std::array<double, 2> range_from(const json& j) {
    auto v = j.get<std::vector<double>>();
    if (v.size() != 2) throw ConfigError("ranges must hold exactly [lo, hi]");
    return {v[0], v[1]};
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

} // namespace

RunConfig desk_scale_config() {
    RunConfig cfg;
    cfg.algorithm = Algorithm::kCcm;
    cfg.max_episodes = 300;
    cfg.eval_episodes = 10;

    // Desk-scale sizing: task and power ranges are shrunk so per-step costs
    // stay O(1) and a 300-episode run can separate admission policies; the
    // cycle/deadline/gain/battery ranges and the cost weights match the
    // full-scale config.
    auto& e = cfg.env;
    e.n_devices = 5;
    e.steps = 10;
    e.tau_max_s = 1.0;
    e.radio.bandwidth_hz = 8.0e6; // keeps the per-channel slice at 4 MHz with K = 2
    e.radio.subchannels = 2;
    e.server.units = 2;
    e.server.unit_speed_hz = 4.0e9;
    e.server.storage_bits = 0.05 * e.units.bits_per_mb; // subset packing binds most steps
    e.energy.kappa = 5.0e-27;
    e.energy.harvest_j = 0.001;
    e.weights = {0.5, 0.5};
    e.ranges.task_size_mb = {0.005, 0.045};
    e.ranges.task_cycles_per_bit = {300.0, 737.5};
    e.ranges.task_deadline_s = {0.1, 0.9};
    e.ranges.gain_db = {5.0, 14.0};
    e.ranges.power_dbm = {10.0, 24.0};
    e.ranges.freq_ghz = {0.1, 0.4};
    e.ranges.battery_mj = {0.5, 3.2};
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const std::exception& ex) {
        throw ConfigError("bad config JSON: " + std::string(ex.what()));
    }

    try {
        RunConfig cfg = desk_scale_config();
        if (j.contains("algorithm")) cfg.algorithm = algorithm_from_string(j.at("algorithm"));
        maybe(j, "max_episodes", cfg.max_episodes);
        maybe(j, "eval_episodes", cfg.eval_episodes);
        maybe(j, "eval_stride", cfg.eval_stride);
        maybe(j, "run_seed", cfg.run_seed);
        maybe(j, "eval_seed_base", cfg.eval_seed_base);
        maybe(j, "out_dir", cfg.out_dir);
        maybe(j, "budget_minutes", cfg.budget_minutes);
        maybe(j, "dump_trajectories", cfg.dump_trajectories);
        maybe(j, "use_openmp", cfg.use_openmp);
        maybe(j, "checkpoint_stride", cfg.checkpoint_stride);

        if (j.contains("env")) {
            const auto& je = j.at("env");
            auto& e = cfg.env;
            maybe(je, "n_devices", e.n_devices);
            maybe(je, "steps", e.steps);
            maybe(je, "tau_max_s", e.tau_max_s);
            if (je.contains("bandwidth_mhz"))
                e.radio.bandwidth_hz = je.at("bandwidth_mhz").get<double>() * e.units.hz_per_mhz;
            maybe(je, "subchannels", e.radio.subchannels);
            if (je.contains("server")) {
                const auto& js = je.at("server");
                maybe(js, "units", e.server.units);
                if (js.contains("unit_speed_ghz"))
                    e.server.unit_speed_hz = js.at("unit_speed_ghz").get<double>() * e.units.hz_per_ghz;
                if (js.contains("storage_mb"))
                    e.server.storage_bits = js.at("storage_mb").get<double>() * e.units.bits_per_mb;
            }
            if (je.contains("kappa")) e.energy.kappa = je.at("kappa").get<double>();
            if (je.contains("harvest_j")) e.energy.harvest_j = je.at("harvest_j").get<double>();
            if (je.contains("lambda1")) e.weights.lambda1 = je.at("lambda1").get<double>();
            if (je.contains("lambda2")) e.weights.lambda2 = je.at("lambda2").get<double>();
            auto& r = e.ranges;
            if (je.contains("task_size_mb")) r.task_size_mb = range_from(je.at("task_size_mb"));
            if (je.contains("task_cycles_per_bit"))
                r.task_cycles_per_bit = range_from(je.at("task_cycles_per_bit"));
            if (je.contains("task_deadline_s")) r.task_deadline_s = range_from(je.at("task_deadline_s"));
            if (je.contains("gain_db")) r.gain_db = range_from(je.at("gain_db"));
            if (je.contains("power_dbm")) r.power_dbm = range_from(je.at("power_dbm"));
            if (je.contains("freq_ghz")) r.freq_ghz = range_from(je.at("freq_ghz"));
            if (je.contains("battery_mj")) r.battery_mj = range_from(je.at("battery_mj"));
            if (je.contains("battery_max_offset_j") && !je.at("battery_max_offset_j").is_null())
                r.battery_max_offset_j = je.at("battery_max_offset_j").get<double>();
            maybe(je, "charge_drop_transmit_energy", e.charge_drop_transmit_energy);
        }

        if (j.contains("hyper")) {
            const auto& jh = j.at("hyper");
            auto& h = cfg.hyper;
            maybe(jh, "gamma", h.gamma);
            maybe(jh, "batch", h.batch);
            maybe(jh, "replay_capacity", h.replay_capacity);
            maybe(jh, "lr_client", h.lr_client);
            maybe(jh, "lr_master", h.lr_master);
            maybe(jh, "per_alpha", h.per.alpha);
            maybe(jh, "per_beta_start", h.per.beta_start);
            maybe(jh, "per_beta_end", h.per.beta_end);
            maybe(jh, "per_epsilon", h.per.epsilon);
            maybe(jh, "eps_min", h.eps_min);
            maybe(jh, "eps_max", h.eps_max);
            maybe(jh, "client_hidden", h.client_hidden);
            maybe(jh, "master_hidden", h.master_hidden);
            if (jh.contains("hidden_activation"))
                h.hidden_activation = nn::activation_from_string(jh.at("hidden_activation"));
            if (jh.contains("master_output_activation"))
                h.master_output = nn::activation_from_string(jh.at("master_output_activation"));
            maybe(jh, "actor_final_layer_scale", h.actor_final_layer_scale);
            if (jh.contains("noise")) {
                const std::string n = jh.at("noise");
                if (n == "normal")
                    h.noise = rl::NoiseKind::kNormal;
                else if (n == "uniform-symmetric")
                    h.noise = rl::NoiseKind::kUniformSymmetric;
                else
                    throw ConfigError("unknown noise kind: " + n);
            }
        }

        cfg.env.validate();
        if (cfg.max_episodes < 1 || cfg.eval_episodes < 1 || cfg.eval_stride < 1)
            throw ConfigError("episode counts and strides must be >= 1");
        if (cfg.hyper.batch < 1) throw ConfigError("batch must be >= 1");
        return cfg;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& ex) {
        throw ConfigError(std::string("bad config: ") + ex.what());
    }
}

} // namespace mec::harness
