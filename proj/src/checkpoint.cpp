#include "mec/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace mec::rl {

namespace {

using nlohmann::json;

json spec_to_json(const nn::MlpSpec& s) {
    return json{{"widths", s.widths},
                {"hidden", nn::to_string(s.hidden)},
                {"output", nn::to_string(s.output)},
                {"final_layer_scale", s.final_layer_scale}};
}

void check_spec(const json& j, const nn::MlpSpec& s, const std::string& what) {
    const auto widths = j.at("widths").get<std::vector<int>>();
    if (widths != s.widths || j.at("hidden").get<std::string>() != nn::to_string(s.hidden) ||
        j.at("output").get<std::string>() != nn::to_string(s.output))
        throw std::runtime_error("checkpoint: " + what + " was saved with a different architecture");
}

json net_to_json(const nn::Mlp& online, const nn::Mlp& target, const nn::Adam& opt) {
    return json{{"spec", spec_to_json(online.spec)},
                {"params", online.params},
                {"target_params", target.params},
                {"adam", json{{"lr", opt.lr}, {"t", opt.t}, {"m", opt.m}, {"v", opt.v}}}};
}

void net_from_json(const json& j, nn::Mlp& online, nn::Mlp& target, nn::Adam& opt,
                   const std::string& what) {
    check_spec(j.at("spec"), online.spec, what);
    online.params = j.at("params").get<std::vector<double>>();
    target.params = j.at("target_params").get<std::vector<double>>();
    if (online.params.size() != online.spec.param_count() ||
        target.params.size() != online.params.size())
        throw std::runtime_error("checkpoint: " + what + " parameter count mismatch");
    const auto& a = j.at("adam");
    opt.lr = a.at("lr").get<double>();
    opt.t = a.at("t").get<long long>();
    opt.m = a.at("m").get<std::vector<double>>();
    opt.v = a.at("v").get<std::vector<double>>();
    if (opt.m.size() != online.params.size() || opt.v.size() != online.params.size())
        throw std::runtime_error("checkpoint: " + what + " optimizer state mismatch");
}

} // namespace

void save_checkpoint(const std::string& path, const std::vector<ClientAgent>& clients,
                     const MasterAgent* master, const CriticAgent* critic) {
    json j;
    j["version"] = 1;
    json cs = json::array();
    for (const auto& c : clients) cs.push_back(net_to_json(c.online, c.target, c.opt));
    j["clients"] = std::move(cs);
    if (master) j["master"] = net_to_json(master->online, master->target, master->opt);
    if (critic) j["critic"] = net_to_json(critic->online, critic->target, critic->opt);

    std::ofstream out(path);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    out << j.dump();
}

void load_checkpoint(const std::string& path, std::vector<ClientAgent>& clients, MasterAgent* master,
                     CriticAgent* critic) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("checkpoint: cannot read " + path);
    json j = json::parse(in);
    if (j.at("version").get<int>() != 1) throw std::runtime_error("checkpoint: unsupported version");

    const auto& cs = j.at("clients");
    if (cs.size() != clients.size())
        throw std::runtime_error("checkpoint: client count mismatch");
    for (std::size_t i = 0; i < clients.size(); ++i)
        net_from_json(cs[i], clients[i].online, clients[i].target, clients[i].opt,
                      "client " + std::to_string(i));
    if (master) net_from_json(j.at("master"), master->online, master->target, master->opt, "master");
    if (critic) net_from_json(j.at("critic"), critic->online, critic->target, critic->opt, "critic");
}

} // namespace mec::rl
