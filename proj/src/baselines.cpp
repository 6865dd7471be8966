#include "mec/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mec::rl {

AdmissionRule admission_rule_from_string(const std::string& s) {
    if (s == "fifo-drop") return AdmissionRule::kFifoDrop;
    if (s == "shortest-offload-first") return AdmissionRule::kShortestOffloadFirst;
    if (s == "deadline-over-size-first") return AdmissionRule::kDeadlineOverSizeFirst;
    if (s == "random") return AdmissionRule::kRandom;
    throw std::invalid_argument("unknown admission rule: " + s);
}

std::string to_string(AdmissionRule r) {
    switch (r) {
        case AdmissionRule::kFifoDrop: return "fifo-drop";
        case AdmissionRule::kShortestOffloadFirst: return "shortest-offload-first";
        case AdmissionRule::kDeadlineOverSizeFirst: return "deadline-over-size-first";
        case AdmissionRule::kRandom: return "random";
    }
    return "?";
}

env::RejectedFate rejected_fate(AdmissionRule r) {
    return r == AdmissionRule::kFifoDrop ? env::RejectedFate::kDrop : env::RejectedFate::kLocal;
}

env::MasterDecision admit(AdmissionRule rule, const std::vector<Proposal>& proposals,
                          std::size_t n_devices, int subchannels, double storage_bits,
                          Rng& shuffle_rng) {
    std::vector<double> sizes(n_devices, 0.0);
    for (const auto& p : proposals) sizes[static_cast<std::size_t>(p.device)] = p.size_bits;

    std::vector<int> order;
    order.reserve(proposals.size());

    switch (rule) {
        case AdmissionRule::kFifoDrop:
        case AdmissionRule::kShortestOffloadFirst: {
            std::vector<std::size_t> perm(proposals.size());
            for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
            std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
                if (proposals[a].t_off_s != proposals[b].t_off_s)
                    return proposals[a].t_off_s < proposals[b].t_off_s;
                return proposals[a].device < proposals[b].device;
            });
            for (const std::size_t i : perm) order.push_back(proposals[i].device);
            break;
        }
        case AdmissionRule::kDeadlineOverSizeFirst: {
            std::vector<std::size_t> perm(proposals.size());
            for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
            const auto ratio = [&](std::size_t i) {
                return proposals[i].deadline_s / proposals[i].size_bits;
            };
            std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
                if (ratio(a) != ratio(b)) return ratio(a) < ratio(b);
                return proposals[a].device < proposals[b].device;
            });
            for (const std::size_t i : perm) order.push_back(proposals[i].device);
            break;
        }
        case AdmissionRule::kRandom: {
            for (const auto& p : proposals) order.push_back(p.device);
            shuffle_rng.shuffle(order);
            break;
        }
    }

    env::MasterDecision d;
    d.accept = greedy_admit(order, sizes, n_devices, subchannels, storage_bits);
    return d;
}

namespace {

nn::MlpSpec critic_spec(const Hyper& h, int n_devices) {
    nn::MlpSpec spec;
    spec.widths.push_back(kSlotWidth * n_devices);
    for (const int w : h.master_hidden) spec.widths.push_back(w);
    spec.widths.push_back(1);
    spec.hidden = h.hidden_activation;
    spec.output = h.master_output;
    spec.final_layer_scale = 1.0;
    return spec;
}

} // namespace

CriticAgent::CriticAgent(const Hyper& h, int n_devices, Rng& init_rng)
    : online(nn::make_mlp(critic_spec(h, n_devices), init_rng)),
      target(online),
      opt(online.params.size(), h.lr_master),
      n_devices_(n_devices) {}

double CriticAgent::value(std::span<const double> joint, bool use_target) const {
    if (joint.size() != static_cast<std::size_t>(kSlotWidth * n_devices_))
        throw std::invalid_argument("CriticAgent::value: joint width mismatch");
    thread_local nn::Workspace ws;
    double out = 0.0;
    nn::forward(use_target ? target : online, joint, std::span<double>(&out, 1), ws);
    return out;
}

TrainResult maddpg_train(std::vector<ClientAgent>& actors, CriticAgent& critic, ReplayMemory& memory,
                         std::size_t batch, double gamma, double beta, Rng& sample_rng, bool parallel) {
    const int n_dev = critic.n_devices();
    const std::size_t joint_w = static_cast<std::size_t>(kSlotWidth) * static_cast<std::size_t>(n_dev);
    if (actors.size() != static_cast<std::size_t>(n_dev))
        throw std::invalid_argument("maddpg_train: actor count must match the critic's device count");

    const auto sample = memory.sample(batch, beta, sample_rng);
    const std::size_t m = sample.indices.size();

    // critic targets from target actors and the target critic
    std::vector<double> joints(m * joint_w, 0.0);
    std::vector<double> targets(m, 0.0);
    std::vector<double> q_now(m, 0.0);
#pragma omp parallel for if (parallel) schedule(static)
    for (long long ii = 0; ii < static_cast<long long>(m); ++ii) {
        const std::size_t i = static_cast<std::size_t>(ii);
        const Transition& tr = memory.at(sample.indices[i]);
        thread_local nn::Workspace ws;

        std::vector<double> next_joint(joint_w, 0.0);
        std::copy(tr.next_state.begin(), tr.next_state.end(), next_joint.begin());
        for (int dev = 0; dev < n_dev; ++dev) {
            std::array<double, kActWidth> raw{};
            nn::forward(actors[static_cast<std::size_t>(dev)].target,
                        std::span<const double>(tr.next_state.data() + dev * kObsWidth, kObsWidth),
                        std::span<double>(raw.data(), raw.size()), ws);
            double* slot = next_joint.data() + kObsWidth * n_dev + dev * kActWidth;
            for (int c = 0; c < kActWidth; ++c) slot[c] = raw[static_cast<std::size_t>(c)] / 2.0 + 0.5;
        }
        const double next_q = critic.value(next_joint, true);
        targets[i] = tr.reward + gamma * next_q * (tr.done ? 0.0 : 1.0);

        double* joint = joints.data() + i * joint_w;
        std::copy(tr.state.begin(), tr.state.end(), joint);
        std::copy(tr.action.begin(), tr.action.end(), joint + kObsWidth * n_dev);
        q_now[i] = critic.value(std::span<const double>(joint, joint_w), false);
    }

    double td_sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double r = targets[i] - q_now[i];
        td_sum += r * r;
    }
    const double td_error = td_sum / static_cast<double>(m);
    if (!std::isfinite(td_error)) throw nn::TrainingError("maddpg_train: non-finite TD error");

    {
        std::vector<double> upstream(m, 0.0);
        for (std::size_t i = 0; i < m; ++i)
            upstream[i] = -2.0 * sample.weights[i] * (targets[i] - q_now[i]) / static_cast<double>(m);
        std::vector<double> grad(critic.online.params.size(), 0.0);
        nn::batch_param_gradient(critic.online, joints, upstream, m, grad, parallel);
        critic.opt.step(critic.online.params, grad);
        critic.target = critic.online;
    }

    // each actor ascends the critic through its own action slot
    const std::size_t pc = actors.front().online.params.size();
    std::vector<double> slabs;
    for (int dev = 0; dev < n_dev; ++dev) {
        slabs.assign(m * pc, 0.0);
#pragma omp parallel for if (parallel) schedule(static)
        for (long long ii = 0; ii < static_cast<long long>(m); ++ii) {
            const std::size_t i = static_cast<std::size_t>(ii);
            const Transition& tr = memory.at(sample.indices[i]);
            thread_local nn::Workspace cws, vws;
            thread_local std::vector<double> cgrad_scratch;

            std::array<double, kActWidth> raw{};
            nn::forward(actors[static_cast<std::size_t>(dev)].online,
                        std::span<const double>(tr.state.data() + dev * kObsWidth, kObsWidth),
                        std::span<double>(raw.data(), raw.size()), cws);

            thread_local std::vector<double> joint;
            joint.assign(joints.data() + i * joint_w, joints.data() + (i + 1) * joint_w);
            double* slot = joint.data() + kObsWidth * n_dev + dev * kActWidth;
            for (int c = 0; c < kActWidth; ++c) slot[c] = raw[static_cast<std::size_t>(c)] / 2.0 + 0.5;

            double out = 0.0;
            nn::forward(critic.online, joint, std::span<double>(&out, 1), vws);
            cgrad_scratch.assign(critic.online.params.size(), 0.0);
            std::vector<double> input_grad(joint_w, 0.0);
            const double one = 1.0;
            nn::backward(critic.online, vws, std::span<const double>(&one, 1), cgrad_scratch, input_grad);

            std::array<double, kActWidth> up{};
            for (int c = 0; c < kActWidth; ++c)
                up[static_cast<std::size_t>(c)] =
                    input_grad[static_cast<std::size_t>(kObsWidth * n_dev + dev * kActWidth + c)] * 0.5;
            nn::backward(actors[static_cast<std::size_t>(dev)].online, cws,
                         std::span<const double>(up.data(), up.size()),
                         std::span<double>(slabs.data() + i * pc, pc));
        }

        std::vector<double> grad(pc, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            const double* s = slabs.data() + i * pc;
            for (std::size_t p = 0; p < pc; ++p) grad[p] += s[p];
        }
        const double scale = -1.0 / static_cast<double>(m);
        for (double& g : grad) g *= scale;
        auto& actor = actors[static_cast<std::size_t>(dev)];
        actor.opt.step(actor.online.params, grad);
        actor.target = actor.online;
    }

    std::vector<double> abs_tds(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) abs_tds[i] = std::abs(targets[i] - q_now[i]);
    memory.update_priorities(sample.indices, abs_tds);

    return {td_error, m};
}

} // namespace mec::rl
