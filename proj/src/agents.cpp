#include "mec/agents.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mec::rl {

namespace {

nn::MlpSpec client_spec(const Hyper& h) {
    nn::MlpSpec spec;
    spec.widths.push_back(kObsWidth);
    for (const int w : h.client_hidden) spec.widths.push_back(w);
    spec.widths.push_back(kActWidth);
    spec.hidden = h.hidden_activation;
    spec.output = nn::Activation::kTanh;
    spec.final_layer_scale = h.actor_final_layer_scale;
    return spec;
}

nn::MlpSpec master_spec(const Hyper& h, int n_devices) {
    nn::MlpSpec spec;
    spec.widths.push_back(kSlotWidth * (n_devices + 1));
    for (const int w : h.master_hidden) spec.widths.push_back(w);
    spec.widths.push_back(1);
    spec.hidden = h.hidden_activation;
    spec.output = h.master_output;
    spec.final_layer_scale = 1.0;
    return spec;
}

void build_master_input(std::span<const double> joint, std::span<const double> cand_state,
                        std::span<const double> cand_action, std::vector<double>& buf) {
    buf.resize(joint.size() + cand_state.size() + cand_action.size());
    std::copy(joint.begin(), joint.end(), buf.begin());
    std::copy(cand_state.begin(), cand_state.end(), buf.begin() + static_cast<std::ptrdiff_t>(joint.size()));
    std::copy(cand_action.begin(), cand_action.end(),
              buf.begin() + static_cast<std::ptrdiff_t>(joint.size() + cand_state.size()));
}

// descending Q, ties broken by ascending device id
void sort_by_q(std::vector<int>& ids, const std::vector<double>& qs) {
    std::vector<std::size_t> perm(ids.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
        if (qs[a] != qs[b]) return qs[a] > qs[b];
        return ids[a] < ids[b];
    });
    std::vector<int> sorted(ids.size());
    for (std::size_t i = 0; i < perm.size(); ++i) sorted[i] = ids[perm[i]];
    ids = std::move(sorted);
}

} // namespace

ClientAgent::ClientAgent(const Hyper& h, Rng& init_rng)
    : online(nn::make_mlp(client_spec(h), init_rng)),
      target(online),
      opt(online.params.size(), h.lr_client) {}

MasterAgent::MasterAgent(const Hyper& h, int n_devices, Rng& init_rng)
    : online(nn::make_mlp(master_spec(h, n_devices), init_rng)),
      target(online),
      opt(online.params.size(), h.lr_master),
      n_devices_(n_devices) {}

double MasterAgent::q(std::span<const double> joint, std::span<const double> cand_state,
                      std::span<const double> cand_action, bool use_target) const {
    if (joint.size() != static_cast<std::size_t>(kSlotWidth * n_devices_) ||
        cand_state.size() != kObsWidth || cand_action.size() != kActWidth)
        throw std::invalid_argument("MasterAgent::q: input slice widths do not match the device count");
    thread_local std::vector<double> buf;
    thread_local nn::Workspace ws;
    build_master_input(joint, cand_state, cand_action, buf);
    double out = 0.0;
    nn::forward(use_target ? target : online, buf, std::span<double>(&out, 1), ws);
    q_evals_.fetch_add(1, std::memory_order_relaxed);
    return out;
}

env::ClientAction client_act(const ClientAgent& agent, const env::Observation& obs, double epsilon,
                             bool evaluation, NoiseKind noise, Rng& noise_rng) {
    thread_local nn::Workspace ws;
    std::array<double, kActWidth> raw{};
    nn::forward(agent.online, std::span<const double>(obs.data(), obs.size()),
                std::span<double>(raw.data(), raw.size()), ws);
    if (!evaluation) {
        for (double& r : raw) {
            const double n = noise == NoiseKind::kNormal ? noise_rng.normal()
                                                         : noise_rng.uniform(-1.0, 1.0);
            r = std::clamp(r + n * epsilon, -1.0, 1.0);
        }
    }
    return {raw[0] / 2.0 + 0.5, raw[1] / 2.0 + 0.5, raw[2] / 2.0 + 0.5};
}

std::vector<std::uint8_t> greedy_admit(const std::vector<int>& ordered_proposals,
                                       const std::vector<double>& size_bits, std::size_t n_devices,
                                       int subchannels, double storage_bits) {
    std::vector<std::uint8_t> mask(n_devices, 0);
    int count = 0;
    double used_bits = 0.0;
    for (const int id : ordered_proposals) {
        if (count >= subchannels) break;
        const double z = size_bits[static_cast<std::size_t>(id)];
        if (used_bits + z <= storage_bits) {
            mask[static_cast<std::size_t>(id)] = 1;
            ++count;
            used_bits += z;
        }
        // an oversized task is skipped; later, smaller proposals may still fit
    }
    return mask;
}

SelectionResult select_actions(const std::vector<ClientAgent>& clients, const MasterAgent& master,
                               const std::vector<env::Observation>& observations,
                               const std::vector<double>& task_size_bits, int subchannels,
                               double storage_bits, double epsilon, bool evaluation, NoiseKind noise,
                               Rng& noise_rng, Rng& explore_rng) {
    const std::size_t n = observations.size();
    if (clients.size() != n || task_size_bits.size() != n)
        throw std::invalid_argument("select_actions: clients, observations and sizes must align");

    SelectionResult res;
    res.actions.resize(n);
    res.decision.accept.assign(n, 0);

    for (std::size_t i = 0; i < n; ++i)
        res.actions[i] = client_act(clients[i], observations[i], epsilon, evaluation, noise, noise_rng);

    std::vector<int> proposals;
    for (std::size_t i = 0; i < n; ++i)
        if (res.actions[i].x >= 0.5) proposals.push_back(static_cast<int>(i));
    if (proposals.empty()) return res; // the master does not intervene

    bool explore = false;
    if (!evaluation) explore = explore_rng.uniform() < epsilon;

    std::vector<int> order = proposals;
    if (explore) {
        explore_rng.shuffle(order);
    } else {
        std::vector<double> joint(static_cast<std::size_t>(kSlotWidth) * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            std::copy(observations[i].begin(), observations[i].end(),
                      joint.begin() + static_cast<std::ptrdiff_t>(i * kObsWidth));
            double* a = joint.data() + kObsWidth * n + i * kActWidth;
            a[0] = res.actions[i].x;
            a[1] = res.actions[i].p;
            a[2] = res.actions[i].f;
        }
        std::vector<double> qs(order.size(), 0.0);
        for (std::size_t k = 0; k < order.size(); ++k) {
            const std::size_t id = static_cast<std::size_t>(order[k]);
            const double* cs = joint.data() + id * kObsWidth;
            const double* ca = joint.data() + kObsWidth * n + id * kActWidth;
            qs[k] = master.q(joint, std::span<const double>(cs, kObsWidth),
                             std::span<const double>(ca, kActWidth), false);
        }
        sort_by_q(order, qs);
    }

    res.decision.accept = greedy_admit(order, task_size_bits, n, subchannels, storage_bits);
    return res;
}

TrainResult train(std::vector<ClientAgent>& clients, MasterAgent& master, ReplayMemory& memory,
                  std::size_t batch, double gamma, double beta, Rng& sample_rng, bool parallel) {
    const int n_dev = master.n_devices();
    const std::size_t joint_w = static_cast<std::size_t>(kSlotWidth) * static_cast<std::size_t>(n_dev);
    const std::size_t in_w = static_cast<std::size_t>(master.input_width());
    if (clients.size() != static_cast<std::size_t>(n_dev))
        throw std::invalid_argument("train: client count must match the master's device count");

    const auto sample = memory.sample(batch, beta, sample_rng);
    const std::size_t m = sample.indices.size();

    static const std::vector<double> zero_state(kObsWidth, 0.0);
    static const std::vector<double> zero_action(kActWidth, 0.0);

    // ---- phase 1: bootstrapped targets, one per entry --------------------
    std::vector<double> targets(m, 0.0);
#pragma omp parallel for if (parallel) schedule(static)
    for (long long ii = 0; ii < static_cast<long long>(m); ++ii) {
        const std::size_t i = static_cast<std::size_t>(ii);
        const Transition& tr = memory.at(sample.indices[i]);

        thread_local nn::Workspace cws;
        std::vector<double> next_joint(joint_w, 0.0);
        std::copy(tr.next_state.begin(), tr.next_state.end(), next_joint.begin());
        for (int dev = 0; dev < n_dev; ++dev) {
            std::array<double, kActWidth> raw{};
            nn::forward(clients[static_cast<std::size_t>(dev)].target,
                        std::span<const double>(tr.next_state.data() + dev * kObsWidth, kObsWidth),
                        std::span<double>(raw.data(), raw.size()), cws);
            double* slot = next_joint.data() + kObsWidth * n_dev + dev * kActWidth;
            for (int c = 0; c < kActWidth; ++c) slot[c] = raw[static_cast<std::size_t>(c)] / 2.0 + 0.5;
        }

        // DDQN: candidate chosen by the online net, valued by the target net
        int best = -1;
        double best_q = 0.0;
        for (int dev = 0; dev < n_dev; ++dev) {
            const double x = next_joint[static_cast<std::size_t>(kObsWidth * n_dev + dev * kActWidth)];
            if (x < 0.5) continue;
            const double q_online =
                master.q(next_joint,
                         std::span<const double>(next_joint.data() + dev * kObsWidth, kObsWidth),
                         std::span<const double>(next_joint.data() + kObsWidth * n_dev + dev * kActWidth,
                                                 kActWidth),
                         false);
            if (best < 0 || q_online > best_q) {
                best = dev;
                best_q = q_online;
            }
        }
        double next_q;
        if (best < 0) {
            next_q = master.q(next_joint, zero_state, zero_action, true);
        } else {
            next_q = master.q(next_joint,
                              std::span<const double>(next_joint.data() + best * kObsWidth, kObsWidth),
                              std::span<const double>(
                                  next_joint.data() + kObsWidth * n_dev + best * kActWidth, kActWidth),
                              true);
        }
        targets[i] = tr.reward + gamma * next_q * (tr.done ? 0.0 : 1.0);
    }

    // ---- phase 2: current Q for every accepted client (or the placeholder)
    std::vector<double> entry_abs_td(m, 0.0);
    std::vector<std::size_t> pair_base(m + 1, 0);
    for (std::size_t i = 0; i < m; ++i) {
        const Transition& tr = memory.at(sample.indices[i]);
        std::size_t pairs = 0;
        for (const std::uint8_t a : tr.accept_mask) pairs += a ? 1 : 0;
        pair_base[i + 1] = pair_base[i] + std::max<std::size_t>(pairs, 1);
    }
    const std::size_t total_pairs = pair_base[m];

    std::vector<double> pair_inputs(total_pairs * in_w, 0.0);
    std::vector<double> pair_q(total_pairs, 0.0);
    std::vector<double> pair_y(total_pairs, 0.0);
    std::vector<double> pair_w(total_pairs, 0.0);

#pragma omp parallel for if (parallel) schedule(static)
    for (long long ii = 0; ii < static_cast<long long>(m); ++ii) {
        const std::size_t i = static_cast<std::size_t>(ii);
        const Transition& tr = memory.at(sample.indices[i]);
        thread_local nn::Workspace mws;

        std::vector<double> joint(joint_w, 0.0);
        std::copy(tr.state.begin(), tr.state.end(), joint.begin());
        std::copy(tr.action.begin(), tr.action.end(),
                  joint.begin() + static_cast<std::ptrdiff_t>(kObsWidth * n_dev));

        std::size_t slot = pair_base[i];
        bool any = false;
        double abs_acc = 0.0;
        for (int dev = 0; dev < n_dev; ++dev) {
            if (!tr.accept_mask[static_cast<std::size_t>(dev)]) continue;
            any = true;
            double* input = pair_inputs.data() + slot * in_w;
            std::copy(joint.begin(), joint.end(), input);
            std::copy(tr.state.begin() + dev * kObsWidth, tr.state.begin() + (dev + 1) * kObsWidth,
                      input + joint_w);
            std::copy(tr.action.begin() + dev * kActWidth, tr.action.begin() + (dev + 1) * kActWidth,
                      input + joint_w + kObsWidth);
            double out = 0.0;
            nn::forward(master.online, std::span<const double>(input, in_w), std::span<double>(&out, 1),
                        mws);
            pair_q[slot] = out;
            pair_y[slot] = targets[i];
            pair_w[slot] = sample.weights[i];
            abs_acc += std::abs(targets[i] - out);
            ++slot;
        }
        if (!any) {
            double* input = pair_inputs.data() + slot * in_w;
            std::copy(joint.begin(), joint.end(), input);
            std::fill(input + joint_w, input + in_w, 0.0);
            double out = 0.0;
            nn::forward(master.online, std::span<const double>(input, in_w), std::span<double>(&out, 1),
                        mws);
            pair_q[slot] = out;
            pair_y[slot] = targets[i];
            pair_w[slot] = sample.weights[i];
            abs_acc += std::abs(targets[i] - out);
            ++slot;
        }
        entry_abs_td[i] = abs_acc / static_cast<double>(slot - pair_base[i]);
    }

    // ---- phase 3: master descent on the importance-weighted TD loss ------
    double td_sum = 0.0;
    for (std::size_t p = 0; p < total_pairs; ++p) {
        const double r = pair_y[p] - pair_q[p];
        td_sum += r * r;
    }
    const double td_error = td_sum / static_cast<double>(total_pairs);
    if (!std::isfinite(td_error)) throw nn::TrainingError("train: non-finite TD error");

    {
        std::vector<double> upstream(total_pairs, 0.0);
        for (std::size_t p = 0; p < total_pairs; ++p)
            upstream[p] = -2.0 * pair_w[p] * (pair_y[p] - pair_q[p]) / static_cast<double>(total_pairs);
        std::vector<double> grad(master.online.params.size(), 0.0);
        nn::batch_param_gradient(master.online, pair_inputs, upstream, total_pairs, grad, parallel);
        master.opt.step(master.online.params, grad);
        master.target = master.online; // hard sync every training call
    }

    // ---- phase 4: clients ascend the master's Q through the candidate slot
    const std::size_t pc = clients.front().online.params.size();
    std::vector<double> slabs;
    std::vector<std::uint8_t> contributes;
    for (int dev = 0; dev < n_dev; ++dev) {
        slabs.assign(m * pc, 0.0);
        contributes.assign(m, 0);

#pragma omp parallel for if (parallel) schedule(static)
        for (long long ii = 0; ii < static_cast<long long>(m); ++ii) {
            const std::size_t i = static_cast<std::size_t>(ii);
            const Transition& tr = memory.at(sample.indices[i]);
            thread_local nn::Workspace cws, mws;
            thread_local std::vector<double> mgrad_scratch;

            std::vector<double> joint(joint_w, 0.0);
            std::copy(tr.state.begin(), tr.state.end(), joint.begin());
            nn::Workspace own_ws; // kept alive for the chain through client `dev`
            for (int mdev = 0; mdev < n_dev; ++mdev) {
                std::array<double, kActWidth> raw{};
                nn::Workspace& ws = (mdev == dev) ? own_ws : cws;
                nn::forward(clients[static_cast<std::size_t>(mdev)].online,
                            std::span<const double>(tr.state.data() + mdev * kObsWidth, kObsWidth),
                            std::span<double>(raw.data(), raw.size()), ws);
                double* slot = joint.data() + kObsWidth * n_dev + mdev * kActWidth;
                for (int c = 0; c < kActWidth; ++c) slot[c] = raw[static_cast<std::size_t>(c)] / 2.0 + 0.5;
            }

            int best = -1;
            double best_q = 0.0;
            for (int mdev = 0; mdev < n_dev; ++mdev) {
                const double x = joint[static_cast<std::size_t>(kObsWidth * n_dev + mdev * kActWidth)];
                if (x < 0.5) continue;
                const double qv =
                    master.q(joint, std::span<const double>(joint.data() + mdev * kObsWidth, kObsWidth),
                             std::span<const double>(joint.data() + kObsWidth * n_dev + mdev * kActWidth,
                                                     kActWidth),
                             false);
                if (best < 0 || qv > best_q) {
                    best = mdev;
                    best_q = qv;
                }
            }

            // feedback Q: the best proposer's slot as the candidate, or the
            // all-zeros placeholder when every task stays local
            thread_local std::vector<double> input;
            input.resize(in_w);
            std::copy(joint.begin(), joint.end(), input.begin());
            if (best >= 0) {
                std::copy(joint.begin() + best * kObsWidth, joint.begin() + (best + 1) * kObsWidth,
                          input.begin() + static_cast<std::ptrdiff_t>(joint_w));
                std::copy(joint.begin() + kObsWidth * n_dev + best * kActWidth,
                          joint.begin() + kObsWidth * n_dev + (best + 1) * kActWidth,
                          input.begin() + static_cast<std::ptrdiff_t>(joint_w + kObsWidth));
            } else {
                std::fill(input.begin() + static_cast<std::ptrdiff_t>(joint_w), input.end(), 0.0);
            }
            double out = 0.0;
            nn::forward(master.online, input, std::span<double>(&out, 1), mws);

            mgrad_scratch.assign(master.online.params.size(), 0.0);
            std::vector<double> input_grad(in_w, 0.0);
            const double one = 1.0;
            nn::backward(master.online, mws, std::span<const double>(&one, 1), mgrad_scratch, input_grad);

            // this client's action reaches Q through its joint slot always
            // and additionally through the candidate slot when it is the
            // best proposer; d(scaled)/d(raw) = 1/2 on every component
            std::array<double, kActWidth> up{};
            for (int c = 0; c < kActWidth; ++c) {
                double g = input_grad[static_cast<std::size_t>(kObsWidth * n_dev + dev * kActWidth + c)];
                if (best == dev) g += input_grad[joint_w + kObsWidth + static_cast<std::size_t>(c)];
                up[static_cast<std::size_t>(c)] = g * 0.5;
            }
            nn::backward(clients[static_cast<std::size_t>(dev)].online, own_ws,
                         std::span<const double>(up.data(), up.size()),
                         std::span<double>(slabs.data() + i * pc, pc));
            contributes[i] = 1;
        }

        std::vector<double> grad(pc, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            if (!contributes[i]) continue;
            const double* s = slabs.data() + i * pc;
            for (std::size_t p = 0; p < pc; ++p) grad[p] += s[p];
        }
        // maximize mean Q  <=>  descend on its negation
        const double scale = -1.0 / static_cast<double>(m);
        for (double& g : grad) g *= scale;
        auto& agent = clients[static_cast<std::size_t>(dev)];
        agent.opt.step(agent.online.params, grad);
        agent.target = agent.online;
    }

    // refresh priorities with the pre-update residuals
    memory.update_priorities(sample.indices, entry_abs_td);

    return {td_error, total_pairs};
}

void sync_targets(std::vector<ClientAgent>& clients, MasterAgent& master) {
    for (auto& c : clients) c.target = c.online;
    master.target = master.online;
}

} // namespace mec::rl
