#pragma once

// Scripted spreadsheet-style trace of one client-master training step on
// frozen tiny networks (two clients {7,2,3}, master {30,2,1}, identity hidden
// layers). Everything here is computed with explicit loops, independent of
// the library's forward/backward code paths.

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace mec::testing {

struct TraceWeights {
    // client {7,2,3}: W1(2x7) b1(2) W2(3x2) b2(3)
    std::array<std::array<double, 25>, 2> client{};
    // master {30,2,1}: W1(2x30) b1(2) W2(1x2) b2(1)
    std::array<double, 65> master{};
};

inline double trace_fill(std::size_t i) {
    return (static_cast<double>((i * 7 + 3) % 11) - 5.0) / 50.0;
}

inline TraceWeights trace_weights() {
    TraceWeights w;
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < 25; ++i) w.client[c][i] = trace_fill(i + 13 * c);
    // proposal bias: client 0 leans local, client 1 leans offload
    w.client[0][22] = -0.4;
    w.client[1][22] = 0.4;
    for (std::size_t i = 0; i < 65; ++i) w.master[i] = trace_fill(i + 5);
    return w;
}

inline std::array<double, 3> oracle_client(const std::array<double, 25>& p, const double* s) {
    double h[2];
    for (int j = 0; j < 2; ++j) {
        h[j] = p[14 + static_cast<std::size_t>(j)];
        for (int k = 0; k < 7; ++k) h[j] += p[static_cast<std::size_t>(j * 7 + k)] * s[k];
    }
    std::array<double, 3> out{};
    for (int o = 0; o < 3; ++o) {
        double acc = p[22 + static_cast<std::size_t>(o)];
        for (int j = 0; j < 2; ++j) acc += p[16 + static_cast<std::size_t>(o * 2 + j)] * h[j];
        out[static_cast<std::size_t>(o)] = std::tanh(acc);
    }
    return out;
}

inline double oracle_master(const std::array<double, 65>& p, const double* x /*30*/) {
    double h[2];
    for (int j = 0; j < 2; ++j) {
        h[j] = p[60 + static_cast<std::size_t>(j)];
        for (int k = 0; k < 30; ++k) h[j] += p[static_cast<std::size_t>(j * 30 + k)] * x[k];
    }
    return p[64] + p[62] * h[0] + p[63] * h[1];
}

struct TraceData {
    std::array<double, 14> S{0.10, 0.20, 0.30, 0.40, 0.50, 0.60, 0.70,
                             0.65, 0.15, 0.45, 0.25, 0.85, 0.35, 0.55};
    std::array<double, 6> A{0.60, 0.50, 0.40, 0.20, 0.70, 0.30}; // client 0 proposed
    std::array<std::uint8_t, 2> mask{1, 0};
    double reward = -1.2;
    std::array<double, 14> S2{0.30, 0.10, 0.70, 0.20, 0.60, 0.40, 0.50,
                              0.05, 0.95, 0.15, 0.75, 0.25, 0.65, 0.35};
};

// Target actions, proposal tests, next-candidate choice, bootstrap target,
// current Q and the squared TD error of the single-entry minibatch.
struct TraceOracle {
    double next_q = 0.0;
    double y = 0.0;
    double q_pair = 0.0;
    double delta = 0.0;
    int next_proposer = -1;
    std::array<double, 30> pair_input{};

    TraceOracle(const TraceWeights& w, const TraceData& d, bool done, double gamma) {
        std::array<std::array<double, 3>, 2> a2{};
        for (int c = 0; c < 2; ++c) {
            const auto raw = oracle_client(w.client[static_cast<std::size_t>(c)], d.S2.data() + 7 * c);
            for (int k = 0; k < 3; ++k)
                a2[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)] =
                    raw[static_cast<std::size_t>(k)] / 2.0 + 0.5;
        }
        std::array<double, 30> next_in{};
        std::copy(d.S2.begin(), d.S2.end(), next_in.begin());
        for (int c = 0; c < 2; ++c)
            for (int k = 0; k < 3; ++k)
                next_in[static_cast<std::size_t>(14 + c * 3 + k)] =
                    a2[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)];

        double best = 0.0;
        for (int c = 0; c < 2; ++c) {
            if (a2[static_cast<std::size_t>(c)][0] < 0.5) continue;
            std::array<double, 30> in = next_in;
            std::copy(d.S2.begin() + 7 * c, d.S2.begin() + 7 * (c + 1), in.begin() + 20);
            for (int k = 0; k < 3; ++k)
                in[static_cast<std::size_t>(27 + k)] =
                    a2[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)];
            const double q = oracle_master(w.master, in.data());
            if (next_proposer < 0 || q > best) {
                next_proposer = c;
                best = q;
            }
        }
        if (next_proposer < 0) {
            std::array<double, 30> in = next_in;
            std::fill(in.begin() + 20, in.end(), 0.0);
            next_q = oracle_master(w.master, in.data());
        } else {
            next_q = best; // target net equals the online net before any update
        }
        y = d.reward + gamma * next_q * (done ? 0.0 : 1.0);

        std::copy(d.S.begin(), d.S.end(), pair_input.begin());
        std::copy(d.A.begin(), d.A.end(), pair_input.begin() + 14);
        std::copy(d.S.begin(), d.S.begin() + 7, pair_input.begin() + 20);
        std::copy(d.A.begin(), d.A.begin() + 3, pair_input.begin() + 27);
        q_pair = oracle_master(w.master, pair_input.data());
        delta = (y - q_pair) * (y - q_pair);
    }
};

} // namespace mec::testing
