#include "mec/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "mec/baselines.hpp"
#include "mec/checkpoint.hpp"
#include "mec/physics.hpp"
#include "mec/scheduler.hpp"

namespace mec::harness {

using nlohmann::json;

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

struct AgentSet {
    std::vector<rl::ClientAgent> clients;
    std::unique_ptr<rl::MasterAgent> master;  // ccm only
    std::unique_ptr<rl::CriticAgent> critic;  // maddpg variants
    std::optional<rl::AdmissionRule> rule;    // maddpg variants
};

AgentSet make_agents(const RunConfig& cfg, Rng& init_rng) {
    AgentSet a;
    a.clients.reserve(static_cast<std::size_t>(cfg.env.n_devices));
    for (int n = 0; n < cfg.env.n_devices; ++n) a.clients.emplace_back(cfg.hyper, init_rng);
    if (cfg.algorithm == Algorithm::kCcm) {
        a.master = std::make_unique<rl::MasterAgent>(cfg.hyper, cfg.env.n_devices, init_rng);
    } else {
        a.critic = std::make_unique<rl::CriticAgent>(cfg.hyper, cfg.env.n_devices, init_rng);
        switch (cfg.algorithm) {
            case Algorithm::kMaddpg: a.rule = rl::AdmissionRule::kFifoDrop; break;
            case Algorithm::kMaddpgStf: a.rule = rl::AdmissionRule::kShortestOffloadFirst; break;
            case Algorithm::kMaddpgDsf: a.rule = rl::AdmissionRule::kDeadlineOverSizeFirst; break;
            case Algorithm::kRandomMaster: a.rule = rl::AdmissionRule::kRandom; break;
            default: break;
        }
    }
    return a;
}

struct Selection {
    std::vector<env::ClientAction> actions;
    std::vector<env::DecodedAction> decoded;
    env::MasterDecision decision;
    env::RejectedFate fate = env::RejectedFate::kLocal;
};

Selection select_step(const AgentSet& agents, const env::Env& e, const RunConfig& cfg, double epsilon,
                      bool evaluation, Rng& noise_rng, Rng& explore_rng) {
    Selection sel;
    const auto& obs = e.observations();
    if (agents.master) {
        std::vector<double> sizes(obs.size(), 0.0);
        for (std::size_t n = 0; n < sizes.size(); ++n) sizes[n] = e.tasks()[n].size_bits;
        auto res = rl::select_actions(agents.clients, *agents.master, obs, sizes,
                                      cfg.env.radio.subchannels, cfg.env.server.storage_bits, epsilon,
                                      evaluation, cfg.hyper.noise, noise_rng, explore_rng);
        sel.actions = std::move(res.actions);
        sel.decision = std::move(res.decision);
        sel.decoded = e.decode_actions(sel.actions);
        sel.fate = env::RejectedFate::kLocal;
        return sel;
    }

    sel.actions.resize(obs.size());
    for (std::size_t n = 0; n < obs.size(); ++n)
        sel.actions[n] =
            rl::client_act(agents.clients[n], obs[n], epsilon, evaluation, cfg.hyper.noise, noise_rng);
    sel.decoded = e.decode_actions(sel.actions);

    std::vector<rl::Proposal> proposals;
    for (std::size_t n = 0; n < sel.decoded.size(); ++n) {
        if (!sel.decoded[n].propose) continue;
        const auto& task = e.tasks()[n];
        const double rate =
            physics::channel_rate(cfg.env.radio.bandwidth_hz, cfg.env.radio.subchannels,
                                  sel.decoded[n].power_w, e.profiles()[n].gain_linear);
        proposals.push_back({static_cast<int>(n), physics::offload_time(task.size_bits, rate),
                             task.deadline_s, task.size_bits});
    }
    sel.decision = rl::admit(*agents.rule, proposals, obs.size(), cfg.env.radio.subchannels,
                             cfg.env.server.storage_bits, explore_rng);
    sel.fate = rl::rejected_fate(*agents.rule);
    return sel;
}

json profiles_json(const env::Env& e) {
    json arr = json::array();
    for (const auto& p : e.profiles())
        arr.push_back({p.gain_linear, p.power_min_w, p.power_max_w, p.freq_min_hz, p.freq_max_hz,
                       p.battery_min_j, p.battery_max_j});
    return arr;
}

json episode_header(const env::Env& e, const char* mode, int episode, int eval_index) {
    const auto& c = e.config();
    json j{{"kind", "episode"},
           {"mode", mode},
           {"episode", episode},
           {"seed", e.seed()},
           {"n_devices", c.n_devices},
           {"steps", c.steps},
           {"tau_max_s", c.tau_max_s},
           {"bandwidth_hz", c.radio.bandwidth_hz},
           {"subchannels", c.radio.subchannels},
           {"server_units", c.server.units},
           {"server_speed_hz", c.server.unit_speed_hz},
           {"storage_bits", c.server.storage_bits},
           {"kappa", c.energy.kappa},
           {"harvest_j", c.energy.harvest_j},
           {"lambda1", c.weights.lambda1},
           {"lambda2", c.weights.lambda2},
           {"charge_drop_transmit_energy", c.charge_drop_transmit_energy},
           {"profiles", profiles_json(e)}};
    if (eval_index >= 0) j["eval_index"] = eval_index;
    return j;
}

json step_record(int t, const std::vector<env::Observation>& obs,
                 const std::vector<env::TaskSpec>& tasks, const Selection& sel,
                 const env::StepOutcome& out, const std::vector<double>& batteries_after) {
    json jo = json::array();
    for (const auto& o : obs) jo.push_back(std::vector<double>(o.begin(), o.end()));
    json jt = json::array();
    for (const auto& task : tasks) jt.push_back({task.size_bits, task.cycles_per_bit, task.deadline_s});
    json jd = json::array();
    for (const auto& d : sel.decoded) jd.push_back({d.propose ? 1 : 0, d.power_w, d.freq_hz});
    json ja = json::array();
    for (const auto& a : sel.actions) ja.push_back({a.x, a.p, a.f});
    json jm = json::array();
    for (const auto v : sel.decision.accept) jm.push_back(static_cast<int>(v));
    json latency = json::array(), energy = json::array(), cost = json::array(),
         penalty = json::array(), expired = json::array(), bviol = json::array(),
         offloaded = json::array(), dropped = json::array();
    for (const auto& to : out.tasks) {
        latency.push_back(to.latency_s);
        energy.push_back(to.energy_j);
        cost.push_back(to.cost);
        penalty.push_back(to.penalty);
        expired.push_back(to.expired ? 1 : 0);
        bviol.push_back(to.battery_violation ? 1 : 0);
        offloaded.push_back(to.offloaded ? 1 : 0);
        dropped.push_back(to.dropped ? 1 : 0);
    }
    return json{{"kind", "step"},
                {"t", t},
                {"obs", jo},
                {"tasks", jt},
                {"actions", ja},
                {"decoded", jd},
                {"mask", jm},
                {"fate", sel.fate == env::RejectedFate::kDrop ? "drop" : "local"},
                {"reward", out.reward},
                {"latency", latency},
                {"energy", energy},
                {"cost", cost},
                {"penalty", penalty},
                {"expired", expired},
                {"battery_violation", bviol},
                {"offloaded", offloaded},
                {"dropped", dropped},
                {"battery_after", batteries_after}};
}

struct EvalResult {
    double reward_sum = 0.0;
    long expired = 0;
    long battery_violations = 0;
    std::string dump; // JSONL lines when dumping is enabled
};

EvalResult run_eval_episode(const AgentSet& agents, const RunConfig& cfg, int episode, int eval_index) {
    const std::uint64_t seed = cfg.eval_seed_base + static_cast<std::uint64_t>(eval_index);
    env::Env e(cfg.env, seed);
    // evaluation never touches the run's exploration streams; the shuffle
    // stream for the random-master rule derives from the eval seed itself
    Rng dummy_noise(stream_seed(seed, "eval-noise"));
    Rng admit_rng(stream_seed(seed, "eval-admit"));

    EvalResult res;
    std::ostringstream dump;
    if (cfg.dump_trajectories)
        dump << episode_header(e, "eval", episode, eval_index).dump() << "\n";
    for (int t = 0; t < cfg.env.steps; ++t) {
        const auto tasks = e.tasks();
        const auto obs = e.observations();
        const Selection sel = select_step(agents, e, cfg, 0.0, true, dummy_noise, admit_rng);
        const env::StepOutcome out = e.step(sel.decoded, sel.decision, sel.fate);
        res.reward_sum += out.reward;
        res.expired += out.count_expired;
        res.battery_violations += out.count_battery_violation;
        if (cfg.dump_trajectories)
            dump << step_record(t, obs, tasks, sel, out, e.batteries()).dump() << "\n";
    }
    res.dump = dump.str();
    return res;
}

json config_echo(const RunConfig& cfg) {
    const auto& e = cfg.env;
    const auto& h = cfg.hyper;
    return json{
        {"algorithm", to_string(cfg.algorithm)},
        {"max_episodes", cfg.max_episodes},
        {"eval_episodes", cfg.eval_episodes},
        {"eval_stride", cfg.eval_stride},
        {"run_seed", cfg.run_seed},
        {"eval_seed_base", cfg.eval_seed_base},
        {"env",
         {{"n_devices", e.n_devices},
          {"steps", e.steps},
          {"tau_max_s", e.tau_max_s},
          {"bandwidth_hz", e.radio.bandwidth_hz},
          {"subchannels", e.radio.subchannels},
          {"server_units", e.server.units},
          {"server_speed_hz", e.server.unit_speed_hz},
          {"storage_bits", e.server.storage_bits},
          {"kappa", e.energy.kappa},
          {"harvest_j", e.energy.harvest_j},
          {"lambda1", e.weights.lambda1},
          {"lambda2", e.weights.lambda2},
          {"task_size_mb", e.ranges.task_size_mb},
          {"task_cycles_per_bit", e.ranges.task_cycles_per_bit},
          {"task_deadline_s", e.ranges.task_deadline_s},
          {"gain_db", e.ranges.gain_db},
          {"power_dbm", e.ranges.power_dbm},
          {"freq_ghz", e.ranges.freq_ghz},
          {"battery_mj", e.ranges.battery_mj},
          {"battery_max_offset_j",
           e.ranges.battery_max_offset_j ? json(*e.ranges.battery_max_offset_j) : json(nullptr)},
          {"charge_drop_transmit_energy", e.charge_drop_transmit_energy}}},
        {"hyper",
         {{"gamma", h.gamma},
          {"batch", h.batch},
          {"replay_capacity", h.replay_capacity},
          {"lr_client", h.lr_client},
          {"lr_master", h.lr_master},
          {"per_alpha", h.per.alpha},
          {"per_beta_start", h.per.beta_start},
          {"per_beta_end", h.per.beta_end},
          {"per_epsilon", h.per.epsilon},
          {"eps_min", h.eps_min},
          {"eps_max", h.eps_max},
          {"client_hidden", h.client_hidden},
          {"master_hidden", h.master_hidden},
          {"hidden_activation", nn::to_string(h.hidden_activation)},
          {"master_output_activation", nn::to_string(h.master_output)},
          {"actor_final_layer_scale", h.actor_final_layer_scale},
          {"noise", h.noise == rl::NoiseKind::kNormal ? "normal" : "uniform-symmetric"}}}};
}

} // namespace

RunSummary run(const RunConfig& cfg) {
    if (cfg.out_dir.empty()) throw ConfigError("run: out_dir must be set");
    cfg.env.validate();
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);

    const auto t_start = std::chrono::steady_clock::now();

    Rng init_rng = derive_stream(cfg.run_seed, "init");
    Rng env_rng = derive_stream(cfg.run_seed, "env");
    Rng noise_rng = derive_stream(cfg.run_seed, "client-noise");
    Rng explore_rng = derive_stream(cfg.run_seed, "master-explore");
    Rng replay_rng = derive_stream(cfg.run_seed, "replay");

    AgentSet agents = make_agents(cfg, init_rng);
    rl::ReplayMemory memory(cfg.hyper.replay_capacity, cfg.hyper.per);

    std::ofstream metrics(fs::path(cfg.out_dir) / "metrics.csv");
    metrics << "episode,mean_eval_reward,pct_expired_tasks,pct_battery_violations,train_td_error,"
               "epsilon\n";
    metrics.flush();
    std::ofstream timings(fs::path(cfg.out_dir) / "timings.csv");
    timings << "episode,wall_time_s\n";
    std::ofstream traj;
    if (cfg.dump_trajectories) traj.open(fs::path(cfg.out_dir) / "trajectories.jsonl");

    RunSummary summary;
    const int n_dev = cfg.env.n_devices;
    const double eval_total =
        static_cast<double>(n_dev) * cfg.env.steps * static_cast<double>(cfg.eval_episodes);

    for (int ep = 0; ep < cfg.max_episodes; ++ep) {
        const auto t_ep = std::chrono::steady_clock::now();
        const double epsilon =
            physics::epsilon_schedule(ep, cfg.max_episodes, cfg.hyper.eps_min, cfg.hyper.eps_max);

        // ---- exploration episode -----------------------------------------
        env::Env e(cfg.env, env_rng.next_u64());
        if (cfg.dump_trajectories) traj << episode_header(e, "train", ep, -1).dump() << "\n";
        for (int t = 0; t < cfg.env.steps; ++t) {
            const auto tasks = e.tasks();
            const auto obs_before = e.observations();
            const Selection sel = select_step(agents, e, cfg, epsilon, false, noise_rng, explore_rng);
            const env::StepOutcome out = e.step(sel.decoded, sel.decision, sel.fate);

            rl::Transition tr;
            tr.state.resize(static_cast<std::size_t>(n_dev) * rl::kObsWidth);
            tr.next_state.resize(tr.state.size());
            tr.action.resize(static_cast<std::size_t>(n_dev) * rl::kActWidth);
            for (int n = 0; n < n_dev; ++n) {
                const auto& o = obs_before[static_cast<std::size_t>(n)];
                std::copy(o.begin(), o.end(), tr.state.begin() + n * rl::kObsWidth);
                const auto& o2 = e.observations()[static_cast<std::size_t>(n)];
                std::copy(o2.begin(), o2.end(), tr.next_state.begin() + n * rl::kObsWidth);
                const auto& a = sel.actions[static_cast<std::size_t>(n)];
                tr.action[static_cast<std::size_t>(n * rl::kActWidth + 0)] = a.x;
                tr.action[static_cast<std::size_t>(n * rl::kActWidth + 1)] = a.p;
                tr.action[static_cast<std::size_t>(n * rl::kActWidth + 2)] = a.f;
            }
            tr.accept_mask = sel.decision.accept;
            tr.reward = out.reward;
            tr.done = e.done();
            memory.push(std::move(tr));

            if (cfg.dump_trajectories)
                traj << step_record(t, obs_before, tasks, sel, out, e.batteries()).dump() << "\n";
        }

        // ---- one training call per episode --------------------------------
        double td = std::numeric_limits<double>::quiet_NaN();
        if (memory.size() >= static_cast<std::size_t>(cfg.hyper.batch)) {
            const double frac = cfg.max_episodes > 1
                                    ? static_cast<double>(ep) / static_cast<double>(cfg.max_episodes - 1)
                                    : 1.0;
            const double beta = cfg.hyper.per.beta_start +
                                (cfg.hyper.per.beta_end - cfg.hyper.per.beta_start) * frac;
            try {
                if (agents.master) {
                    td = rl::train(agents.clients, *agents.master, memory,
                                   static_cast<std::size_t>(cfg.hyper.batch), cfg.hyper.gamma, beta,
                                   replay_rng, cfg.use_openmp)
                             .td_error;
                } else {
                    td = rl::maddpg_train(agents.clients, *agents.critic, memory,
                                          static_cast<std::size_t>(cfg.hyper.batch), cfg.hyper.gamma,
                                          beta, replay_rng, cfg.use_openmp)
                              .td_error;
                }
            } catch (const nn::TrainingError& ex) {
                summary.diverged = true;
                summary.message = ex.what();
                break;
            }
        }

        // ---- evaluation episodes, seeded by their index --------------------
        MetricsRow row;
        row.episode = ep;
        row.epsilon = epsilon;
        row.train_td_error = td;
        if (ep % cfg.eval_stride == 0) {
            std::vector<EvalResult> results(static_cast<std::size_t>(cfg.eval_episodes));
#pragma omp parallel for if (cfg.use_openmp) schedule(dynamic)
            for (long long k = 0; k < static_cast<long long>(cfg.eval_episodes); ++k)
                results[static_cast<std::size_t>(k)] =
                    run_eval_episode(agents, cfg, ep, static_cast<int>(k));
            double reward_acc = 0.0;
            long expired = 0, bviol = 0;
            for (const auto& r : results) {
                reward_acc += r.reward_sum;
                expired += r.expired;
                bviol += r.battery_violations;
            }
            row.mean_eval_reward = reward_acc / static_cast<double>(cfg.eval_episodes);
            row.pct_expired_tasks = 100.0 * static_cast<double>(expired) / eval_total;
            row.pct_battery_violations = 100.0 * static_cast<double>(bviol) / eval_total;
            if (cfg.dump_trajectories)
                for (const auto& r : results) traj << r.dump;
        } else {
            row.mean_eval_reward = std::numeric_limits<double>::quiet_NaN();
            row.pct_expired_tasks = std::numeric_limits<double>::quiet_NaN();
            row.pct_battery_violations = std::numeric_limits<double>::quiet_NaN();
        }

        metrics << row.episode << ',' << fmt(row.mean_eval_reward) << ','
                << fmt(row.pct_expired_tasks) << ',' << fmt(row.pct_battery_violations) << ','
                << fmt(row.train_td_error) << ',' << fmt(row.epsilon) << "\n";
        metrics.flush();
        const double ep_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_ep).count();
        timings << row.episode << ',' << fmt(ep_s) << "\n";
        timings.flush();
        summary.rows.push_back(row);
        summary.episodes_completed = ep + 1;

        if (cfg.checkpoint_stride > 0 && (ep + 1) % cfg.checkpoint_stride == 0)
            rl::save_checkpoint(
                (fs::path(cfg.out_dir) / ("checkpoint_ep" + std::to_string(ep + 1) + ".json")).string(),
                agents.clients, agents.master.get(), agents.critic.get());

        if (cfg.budget_minutes > 0.0) {
            const double mins =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count() / 60.0;
            if (mins > cfg.budget_minutes && ep + 1 < cfg.max_episodes) {
                summary.truncated = true;
                summary.message = "wall-clock budget reached";
                break;
            }
        }
    }

    rl::save_checkpoint((fs::path(cfg.out_dir) / "checkpoint_final.json").string(), agents.clients,
                        agents.master.get(), agents.critic.get());

    json meta = json{{"schema_version", 1},
                     {"config", config_echo(cfg)},
                     {"episodes_completed", summary.episodes_completed},
                     {"truncated", summary.truncated},
                     {"diverged", summary.diverged},
                     {"message", summary.message},
                     {"exploration_rule", "explore-when-random-below-epsilon"},
                     {"wall_time_s", std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                                   t_start)
                                         .count()}};
    std::ofstream meta_out(fs::path(cfg.out_dir) / "meta.json");
    meta_out << meta.dump(2) << "\n";

    return summary;
}

namespace {

// two-sided 95% critical values of Student's t; the largest tabulated df at
// or below the actual df is used, which errs on the wide side
double t_critical_95(int df) {
    static const std::pair<int, double> table[] = {
        {1, 12.706204736432095}, {2, 4.302652729749463},  {3, 3.182446305284263},
        {4, 2.7764451051977987}, {5, 2.5705818366147395}, {6, 2.4469118487916806},
        {7, 2.3646242510102993}, {8, 2.306004135033371},  {9, 2.2621571627409915},
        {10, 2.228138851986273}, {12, 2.1788128296634177}, {14, 2.144786687917803},
        {16, 2.1199052992210112}, {18, 2.100922040241039}, {20, 2.0859634472658364},
        {25, 2.0595385527532946}, {30, 2.042272456301238}, {40, 2.021075382995334},
        {60, 2.000297822201117}, {120, 1.9799304990522213}};
    if (df < 1) return 0.0;
    double value = 1.959963984540054; // df -> infinity
    for (const auto& [d, t] : table) {
        if (df < d) break;
        value = t;
    }
    return value;
}

struct ParsedRun {
    json config;
    std::vector<std::array<double, 3>> rows; // reward, pct_expired, pct_battery
};

ParsedRun parse_run(const std::string& dir) {
    namespace fs = std::filesystem;
    ParsedRun out;
    std::ifstream meta_in(fs::path(dir) / "meta.json");
    if (!meta_in) throw ConfigError("aggregate: missing meta.json in " + dir);
    json meta = json::parse(meta_in);
    out.config = meta.at("config");

    std::ifstream csv(fs::path(dir) / "metrics.csv");
    if (!csv) throw ConfigError("aggregate: missing metrics.csv in " + dir);
    std::string line;
    std::getline(csv, line); // header
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        std::array<double, 3> vals{};
        std::stringstream ss(line);
        std::string cell;
        int col = 0;
        while (std::getline(ss, cell, ',')) {
            if (col >= 1 && col <= 3) vals[static_cast<std::size_t>(col - 1)] = std::strtod(cell.c_str(), nullptr);
            ++col;
        }
        out.rows.push_back(vals);
    }
    return out;
}

} // namespace

int aggregate(const std::vector<std::string>& run_dirs, const std::string& out_csv) {
    if (run_dirs.empty()) throw ConfigError("aggregate: need at least one run directory");
    std::vector<ParsedRun> runs;
    runs.reserve(run_dirs.size());
    for (const auto& d : run_dirs) runs.push_back(parse_run(d));

    for (std::size_t i = 1; i < runs.size(); ++i) {
        json a = runs[0].config, b = runs[i].config;
        a.erase("run_seed");
        b.erase("run_seed");
        if (a != b)
            throw ConfigError("aggregate: incompatible configs between " + run_dirs[0] + " and " +
                              run_dirs[i]);
    }

    // truncated runs clip the aggregate to the shortest
    std::size_t episodes = runs[0].rows.size();
    for (const auto& r : runs) episodes = std::min(episodes, r.rows.size());

    const double n = static_cast<double>(runs.size());
    const double tcrit = runs.size() > 1 ? t_critical_95(static_cast<int>(runs.size()) - 1) : 0.0;

    std::ofstream out(out_csv);
    if (!out) throw ConfigError("aggregate: cannot write " + out_csv);
    out << "episode,n_runs,mean_eval_reward_mean,mean_eval_reward_ci95,pct_expired_tasks_mean,"
           "pct_expired_tasks_ci95,pct_battery_violations_mean,pct_battery_violations_ci95\n";
    for (std::size_t ep = 0; ep < episodes; ++ep) {
        out << ep << ',' << runs.size();
        for (int m = 0; m < 3; ++m) {
            double mean = 0.0;
            for (const auto& r : runs) mean += r.rows[ep][static_cast<std::size_t>(m)];
            mean /= n;
            double ci = 0.0;
            if (runs.size() > 1) {
                double ss = 0.0;
                for (const auto& r : runs) {
                    const double d = r.rows[ep][static_cast<std::size_t>(m)] - mean;
                    ss += d * d;
                }
                const double sd = std::sqrt(ss / (n - 1.0));
                ci = tcrit * sd / std::sqrt(n);
            }
            out << ',' << fmt(mean) << ',' << fmt(ci);
        }
        out << "\n";
    }
    return static_cast<int>(episodes);
}

int replay_rescore(const std::string& trajectories_path, double tol) {
    std::ifstream in(trajectories_path);
    if (!in) throw ConfigError("replay: cannot open " + trajectories_path);

    struct EpisodeCtx {
        int n_devices = 0;
        double tau_max = 0.0;
        double bandwidth = 0.0;
        int subchannels = 1;
        sched::ServerConfig server;
        double kappa = 0.0, harvest = 0.0;
        physics::CostWeights weights;
        bool charge_drop = false;
        std::vector<std::array<double, 7>> profiles;
        std::vector<double> batteries;
    };
    EpisodeCtx ctx;
    bool have_episode = false;
    int verified = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        const std::string kind = j.at("kind");
        if (kind == "episode") {
            ctx = EpisodeCtx{};
            ctx.n_devices = j.at("n_devices");
            ctx.tau_max = j.at("tau_max_s");
            ctx.bandwidth = j.at("bandwidth_hz");
            ctx.subchannels = j.at("subchannels");
            ctx.server.units = j.at("server_units");
            ctx.server.unit_speed_hz = j.at("server_speed_hz");
            ctx.server.storage_bits = j.at("storage_bits");
            ctx.kappa = j.at("kappa");
            ctx.harvest = j.at("harvest_j");
            ctx.weights.lambda1 = j.at("lambda1");
            ctx.weights.lambda2 = j.at("lambda2");
            ctx.charge_drop = j.at("charge_drop_transmit_energy");
            for (const auto& p : j.at("profiles"))
                ctx.profiles.push_back({p[0], p[1], p[2], p[3], p[4], p[5], p[6]});
            ctx.batteries.clear();
            for (const auto& p : ctx.profiles) ctx.batteries.push_back(p[6]); // start at b_max
            have_episode = true;
            continue;
        }
        if (kind != "step") continue;
        if (!have_episode) throw ConfigError("replay: step record before any episode header");

        const auto& jt = j.at("tasks");
        const auto& jd = j.at("decoded");
        const auto& jm = j.at("mask");
        const bool drop_fate = j.at("fate").get<std::string>() == "drop";

        const int n_dev = ctx.n_devices;
        std::vector<sched::TaskArrival> arrivals;
        std::vector<double> t_off(static_cast<std::size_t>(n_dev), 0.0);
        for (int nd = 0; nd < n_dev; ++nd) {
            const std::size_t ns = static_cast<std::size_t>(nd);
            if (!jm[ns].get<int>()) continue;
            const double rate = physics::channel_rate(ctx.bandwidth, ctx.subchannels,
                                                      jd[ns][1].get<double>(), ctx.profiles[ns][0]);
            t_off[ns] = physics::offload_time(jt[ns][0].get<double>(), rate);
            if (std::isfinite(t_off[ns]))
                arrivals.push_back({nd, t_off[ns],
                                    physics::server_service_time(jt[ns][0].get<double>(),
                                                                 jt[ns][1].get<double>(),
                                                                 ctx.server.unit_speed_hz)});
        }
        std::vector<double> finish(static_cast<std::size_t>(n_dev), 0.0);
        if (!arrivals.empty())
            for (const auto& entry : sched::schedule_step(std::move(arrivals), ctx.server))
                finish[static_cast<std::size_t>(entry.task_id)] = sched::t_mec(entry);

        std::vector<double> costs(static_cast<std::size_t>(n_dev), 0.0);
        std::vector<double> penalties(static_cast<std::size_t>(n_dev), 0.0);
        const auto near = [tol](double a, double b) {
            return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
        };
        for (int nd = 0; nd < n_dev; ++nd) {
            const std::size_t ns = static_cast<std::size_t>(nd);
            const double z = jt[ns][0].get<double>();
            const double c = jt[ns][1].get<double>();
            const double deadline = jt[ns][2].get<double>();
            const bool accepted = jm[ns].get<int>() != 0;
            const bool proposed = jd[ns][0].get<int>() != 0;
            double latency, energy;
            if (accepted) {
                if (std::isfinite(t_off[ns])) {
                    latency = finish[ns];
                    energy = physics::offload_energy(jd[ns][1].get<double>(), t_off[ns]);
                } else {
                    latency = ctx.tau_max;
                    energy = physics::offload_energy(jd[ns][1].get<double>(), ctx.tau_max);
                }
            } else if (proposed && drop_fate) {
                latency = ctx.tau_max;
                double drop_energy = 0.0;
                if (ctx.charge_drop) {
                    const double rate = physics::channel_rate(ctx.bandwidth, ctx.subchannels,
                                                              jd[ns][1].get<double>(), ctx.profiles[ns][0]);
                    drop_energy = physics::offload_energy(
                        jd[ns][1].get<double>(), std::min(physics::offload_time(z, rate), ctx.tau_max));
                }
                energy = drop_energy;
            } else {
                latency = physics::local_latency(z, c, jd[ns][2].get<double>());
                energy = physics::local_energy(z, c, jd[ns][2].get<double>(), ctx.kappa);
            }
            ctx.batteries[ns] =
                physics::battery_step(ctx.batteries[ns], energy, ctx.harvest, ctx.profiles[ns][6]);
            const double cost = physics::task_cost(latency, energy, ctx.weights);
            const double penalty = physics::task_penalty(std::min(latency, ctx.tau_max), deadline,
                                                         ctx.batteries[ns], ctx.profiles[ns][5],
                                                         ctx.weights);
            if (!near(cost, j.at("cost")[ns].get<double>()))
                throw ConfigError("replay: cost mismatch at device " + std::to_string(nd));
            if (!near(penalty, j.at("penalty")[ns].get<double>()))
                throw ConfigError("replay: penalty mismatch at device " + std::to_string(nd));
            if (!near(ctx.batteries[ns], j.at("battery_after")[ns].get<double>()))
                throw ConfigError("replay: battery mismatch at device " + std::to_string(nd));
            costs[ns] = cost;
            penalties[ns] = penalty;
        }
        const double reward = physics::system_reward(costs, penalties);
        if (!near(reward, j.at("reward").get<double>()))
            throw ConfigError("replay: reward mismatch");
        ++verified;
    }
    return verified;
}

} // namespace mec::harness
