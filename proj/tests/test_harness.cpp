#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mec/checkpoint.hpp"
#include "mec/harness.hpp"

using namespace mec;
using namespace mec::harness;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunConfig tiny_cfg(const std::string& out, Algorithm algo = Algorithm::kCcm) {
    RunConfig cfg = desk_scale_config();
    cfg.algorithm = algo;
    cfg.env.n_devices = 2;
    cfg.env.steps = 2;
    cfg.max_episodes = 3;
    cfg.eval_episodes = 2;
    cfg.hyper.batch = 4;
    cfg.hyper.client_hidden = {8};
    cfg.hyper.master_hidden = {16};
    cfg.out_dir = out;
    cfg.use_openmp = false;
    return cfg;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "mec-tests" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// eval-episode env content (profiles and task draws) from a trajectory dump
json eval_env_content(const fs::path& traj) {
    json out = json::array();
    std::ifstream in(traj);
    REQUIRE(in);
    std::string line;
    json current = nullptr;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        if (j.at("kind") == "episode") {
            const bool is_eval = j.at("mode") == "eval";
            if (!current.is_null()) out.push_back(current);
            current = nullptr;
            if (is_eval && j.at("episode") == 0) {
                current = json{{"eval_index", j.at("eval_index")},
                               {"profiles", j.at("profiles")},
                               {"tasks", json::array()}};
            }
        } else if (!current.is_null() && j.at("kind") == "step") {
            current["tasks"].push_back(j.at("tasks"));
        }
    }
    if (!current.is_null()) out.push_back(current);
    return out;
}

} // namespace

TEST_CASE("smallest loop: one episode, one step, one device") {
    const auto dir = fresh_dir("smallest");
    RunConfig cfg = tiny_cfg(dir.string());
    cfg.env.n_devices = 1;
    cfg.env.steps = 1;
    cfg.max_episodes = 1;
    cfg.eval_episodes = 1;
    const auto summary = run(cfg);
    CHECK(summary.episodes_completed == 1);
    CHECK_FALSE(summary.truncated);
    CHECK_FALSE(summary.diverged);
    REQUIRE(summary.rows.size() == 1);

    CHECK(fs::exists(dir / "metrics.csv"));
    CHECK(fs::exists(dir / "timings.csv"));
    CHECK(fs::exists(dir / "meta.json"));
    CHECK(fs::exists(dir / "checkpoint_final.json"));

    const std::string metrics = slurp(dir / "metrics.csv");
    CHECK(metrics.rfind("episode,mean_eval_reward,pct_expired_tasks,pct_battery_violations,"
                        "train_td_error,epsilon\n",
                        0) == 0);
    // header + exactly one row
    CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 2);
}

TEST_CASE("identical configs give byte-identical metrics") {
    for (const auto algo : {Algorithm::kMaddpgStf, Algorithm::kCcm}) {
        const auto dir_a = fresh_dir(std::string("det-a-") + to_string(algo));
        const auto dir_b = fresh_dir(std::string("det-b-") + to_string(algo));
        auto cfg_a = tiny_cfg(dir_a.string(), algo);
        auto cfg_b = tiny_cfg(dir_b.string(), algo);
        run(cfg_a);
        run(cfg_b);
        CHECK(slurp(dir_a / "metrics.csv") == slurp(dir_b / "metrics.csv"));
    }
}

TEST_CASE("parallel evaluation does not change the metrics") {
    const auto dir_serial = fresh_dir("omp-serial");
    const auto dir_omp = fresh_dir("omp-parallel");
    auto cfg_serial = tiny_cfg(dir_serial.string());
    auto cfg_omp = tiny_cfg(dir_omp.string());
    cfg_omp.use_openmp = true;
    run(cfg_serial);
    run(cfg_omp);
    CHECK(slurp(dir_serial / "metrics.csv") == slurp(dir_omp / "metrics.csv"));
}

TEST_CASE("evaluation environments depend on the eval seed base, not the run seed") {
    const auto dir_a = fresh_dir("seed-a");
    const auto dir_b = fresh_dir("seed-b");
    auto cfg_a = tiny_cfg(dir_a.string());
    auto cfg_b = tiny_cfg(dir_b.string());
    cfg_a.dump_trajectories = cfg_b.dump_trajectories = true;
    cfg_a.max_episodes = cfg_b.max_episodes = 1;
    cfg_b.run_seed = cfg_a.run_seed + 991; // exploration changes, eval envs must not
    run(cfg_a);
    run(cfg_b);
    const json eval_a = eval_env_content(dir_a / "trajectories.jsonl");
    const json eval_b = eval_env_content(dir_b / "trajectories.jsonl");
    REQUIRE(eval_a.size() == eval_b.size());
    REQUIRE(eval_a.size() > 0);
    for (std::size_t i = 0; i < eval_a.size(); ++i) {
        CHECK(eval_a[i]["profiles"] == eval_b[i]["profiles"]);
        CHECK(eval_a[i]["tasks"] == eval_b[i]["tasks"]);
    }
}

TEST_CASE("budget truncation leaves a valid prefix and is flagged") {
    const auto dir = fresh_dir("budget");
    auto cfg = tiny_cfg(dir.string());
    cfg.max_episodes = 50;
    cfg.budget_minutes = 1.0e-9;
    const auto summary = run(cfg);
    CHECK(summary.truncated);
    CHECK(summary.episodes_completed >= 1);
    CHECK(summary.episodes_completed < 50);
    const std::string metrics = slurp(dir / "metrics.csv");
    CHECK(std::count(metrics.begin(), metrics.end(), '\n') ==
          summary.episodes_completed + 1);
    json meta = json::parse(slurp(dir / "meta.json"));
    CHECK(meta.at("truncated") == true);
}

TEST_CASE("trajectory dumps re-score cleanly and back the reported percentages") {
    const auto dir = fresh_dir("rescore");
    auto cfg = tiny_cfg(dir.string(), Algorithm::kMaddpg); // exercises the drop fate too
    cfg.dump_trajectories = true;
    const auto summary = run(cfg);
    REQUIRE_FALSE(summary.diverged);

    const int steps = replay_rescore((dir / "trajectories.jsonl").string());
    // train + eval steps for every episode
    CHECK(steps == cfg.max_episodes * cfg.env.steps * (1 + cfg.eval_episodes));

    // recompute pct_expired for episode 0 from the dump
    std::ifstream in(dir / "trajectories.jsonl");
    std::string line;
    bool in_eval0 = false;
    long expired = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        if (j.at("kind") == "episode") {
            in_eval0 = (j.at("mode") == "eval" && j.at("episode") == 0);
        } else if (in_eval0 && j.at("kind") == "step") {
            for (const auto& e : j.at("expired")) expired += e.get<int>();
        }
    }
    const double expect = 100.0 * static_cast<double>(expired) /
                          (cfg.env.n_devices * cfg.env.steps * cfg.eval_episodes);
    CHECK(summary.rows[0].pct_expired_tasks == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("aggregate: single run, identical runs, and the three-run spreadsheet check") {
    // two byte-identical runs aggregate to mean = value, ci = 0
    const auto dir_a = fresh_dir("agg-a");
    const auto dir_b = fresh_dir("agg-b");
    run(tiny_cfg(dir_a.string()));
    run(tiny_cfg(dir_b.string()));

    const auto out_single = fresh_dir("agg-out") / "single.csv";
    aggregate({dir_a.string()}, out_single.string());
    {
        std::ifstream in(out_single);
        std::string header, row;
        std::getline(in, header);
        std::getline(in, row);
        CHECK(row.find(",1,") != std::string::npos); // n_runs column
    }

    const auto out_pair = fresh_dir("agg-out2") / "pair.csv";
    aggregate({dir_a.string(), dir_b.string()}, out_pair.string());
    {
        std::ifstream in(out_pair);
        std::string line;
        std::getline(in, line); // header
        while (std::getline(in, line)) {
            std::stringstream ss(line);
            std::string cell;
            std::vector<std::string> cells;
            while (std::getline(ss, cell, ',')) cells.push_back(cell);
            REQUIRE(cells.size() == 8);
            CHECK(std::strtod(cells[3].c_str(), nullptr) == 0.0); // ci of identical runs
        }
    }

    // hand-made three-run toy, checked against the spreadsheet formula
    std::vector<std::string> dirs;
    const double values[3] = {1.0, 2.0, 3.0};
    for (int r = 0; r < 3; ++r) {
        const auto d = fresh_dir("agg-toy-" + std::to_string(r));
        std::ofstream meta(d / "meta.json");
        meta << json{{"config", json{{"algorithm", "ccm"}, {"run_seed", r}}}}.dump();
        meta.close();
        std::ofstream csv(d / "metrics.csv");
        csv << "episode,mean_eval_reward,pct_expired_tasks,pct_battery_violations,train_td_error,"
               "epsilon\n";
        csv << "0," << values[r] << ",10,0,nan,1\n";
        dirs.push_back(d.string());
    }
    const auto out_toy = fresh_dir("agg-out3") / "toy.csv";
    aggregate(dirs, out_toy.string());
    std::ifstream in(out_toy);
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    std::stringstream ss(row);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    REQUIRE(cells.size() == 8);
    CHECK(std::strtod(cells[2].c_str(), nullptr) == doctest::Approx(2.0));
    // t(0.975, df=2) * sd / sqrt(3) with sd = 1
    const double want_ci = 4.302652729749463 * 1.0 / std::sqrt(3.0);
    CHECK(std::strtod(cells[3].c_str(), nullptr) == doctest::Approx(want_ci).epsilon(1e-9));

    // incompatible configs refuse to aggregate
    CHECK_THROWS_AS(aggregate({dir_a.string(), dirs[0]}, (fs::temp_directory_path() / "x.csv").string()),
                    ConfigError);
}

TEST_CASE("config loading converts units and rejects bad input") {
    const auto dir = fresh_dir("config");
    const auto path = dir / "cfg.json";
    {
        std::ofstream out(path);
        out << R"({
            "algorithm": "maddpg-dsf",
            "run_seed": 99,
            "max_episodes": 7,
            "env": {
                "n_devices": 3,
                "steps": 4,
                "bandwidth_mhz": 40,
                "subchannels": 10,
                "server": {"units": 8, "unit_speed_ghz": 4, "storage_mb": 400},
                "task_size_mb": [1, 50],
                "battery_max_offset_j": 1.0
            },
            "hyper": {"gamma": 0.9, "master_output_activation": "relu"}
        })";
    }
    const RunConfig cfg = load_config(path.string());
    CHECK(cfg.algorithm == Algorithm::kMaddpgDsf);
    CHECK(cfg.run_seed == 99);
    CHECK(cfg.max_episodes == 7);
    CHECK(cfg.env.n_devices == 3);
    CHECK(cfg.env.radio.bandwidth_hz == doctest::Approx(40.0e6));
    CHECK(cfg.env.radio.subchannels == 10);
    CHECK(cfg.env.server.unit_speed_hz == doctest::Approx(4.0e9));
    CHECK(cfg.env.server.storage_bits == doctest::Approx(400 * 8.0e6));
    CHECK(cfg.env.ranges.task_size_mb[1] == 50.0);
    REQUIRE(cfg.env.ranges.battery_max_offset_j.has_value());
    CHECK(*cfg.env.ranges.battery_max_offset_j == 1.0);
    CHECK(cfg.hyper.gamma == 0.9);
    CHECK(cfg.hyper.master_output == nn::Activation::kRelu);

    {
        std::ofstream out(path);
        out << R"({"env": {"n_devices": 0}})";
    }
    CHECK_THROWS_AS(load_config(path.string()), ConfigError);
    {
        std::ofstream out(path);
        out << "{not json";
    }
    CHECK_THROWS_AS(load_config(path.string()), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/path.json"), ConfigError);
}

TEST_CASE("checkpoints restore forwards and optimizer state exactly") {
    const auto dir = fresh_dir("ckpt");
    rl::Hyper h;
    h.client_hidden = {8};
    h.master_hidden = {8};

    Rng init(5);
    std::vector<rl::ClientAgent> clients;
    for (int i = 0; i < 2; ++i) clients.emplace_back(h, init);
    rl::MasterAgent master(h, 2, init);

    // push the optimizer state off its initial values
    rl::ReplayMemory mem(16, h.per);
    Rng trng(6);
    for (int i = 0; i < 8; ++i) {
        rl::Transition t;
        t.state.resize(14);
        t.next_state.resize(14);
        t.action.resize(6);
        for (auto& v : t.state) v = trng.uniform();
        for (auto& v : t.next_state) v = trng.uniform();
        for (auto& v : t.action) v = trng.uniform();
        t.accept_mask = {1, 0};
        t.reward = -1.0;
        t.done = false;
        mem.push(t);
    }
    Rng rng_a(7);
    rl::train(clients, master, mem, 4, 0.99, 0.4, rng_a, false);

    const auto path = (dir / "ck.json").string();
    rl::save_checkpoint(path, clients, &master, nullptr);

    Rng init2(99); // different init; loading must overwrite it completely
    std::vector<rl::ClientAgent> clients2;
    for (int i = 0; i < 2; ++i) clients2.emplace_back(h, init2);
    rl::MasterAgent master2(h, 2, init2);
    rl::load_checkpoint(path, clients2, &master2, nullptr);

    CHECK(clients2[0].online.params == clients[0].online.params);
    CHECK(clients2[1].target.params == clients[1].target.params);
    CHECK(master2.online.params == master.online.params);
    CHECK(master2.opt.m == master.opt.m);
    CHECK(master2.opt.t == master.opt.t);

    // resuming produces the same next update: feed both sides identical
    // fresh memories and rng streams
    const auto fill_memory = [&h]() {
        rl::ReplayMemory m(16, h.per);
        Rng trng2(61);
        for (int i = 0; i < 8; ++i) {
            rl::Transition t;
            t.state.resize(14);
            t.next_state.resize(14);
            t.action.resize(6);
            for (auto& v : t.state) v = trng2.uniform();
            for (auto& v : t.next_state) v = trng2.uniform();
            for (auto& v : t.action) v = trng2.uniform();
            t.accept_mask = {0, 1};
            t.reward = -0.7;
            t.done = false;
            m.push(t);
        }
        return m;
    };
    auto mem_a = fill_memory();
    auto mem_b = fill_memory();
    Rng rng_b1(8), rng_b2(8);
    rl::train(clients, master, mem_a, 4, 0.99, 0.4, rng_b1, false);
    rl::train(clients2, master2, mem_b, 4, 0.99, 0.4, rng_b2, false);
    CHECK(master2.online.params == master.online.params);
    CHECK(clients2[0].online.params == clients[0].online.params);
    CHECK(clients2[1].online.params == clients[1].online.params);
}

TEST_CASE("divergent training aborts with the divergence flag") {
    const auto dir = fresh_dir("diverge");
    auto cfg = tiny_cfg(dir.string());
    // one optimizer step of this size overflows the next forward pass
    cfg.hyper.lr_master = 1.0e308;
    cfg.max_episodes = 40;
    const auto summary = run(cfg);
    CHECK(summary.diverged);
    json meta = json::parse(slurp(dir / "meta.json"));
    CHECK(meta.at("diverged") == true);
}
