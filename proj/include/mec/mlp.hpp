#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mec/rng.hpp"

namespace mec::nn {

enum class Activation { kIdentity, kRelu, kTanh };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

// Fully-connected network description. `widths` runs input -> hidden... ->
// output and needs at least one hidden layer.
struct MlpSpec {
    std::vector<int> widths;
    Activation hidden = Activation::kRelu;
    Activation output = Activation::kIdentity;
    double final_layer_scale = 1.0; // shrink last layer's init (near-neutral actors)

    int input_width() const { return widths.front(); }
    int output_width() const { return widths.back(); }
    std::size_t layer_count() const { return widths.size() - 1; }
    std::size_t param_count() const;
    void validate() const;
};

// Flat parameter vector, laid out per layer as row-major W (out x in)
// followed by b (out).
struct Mlp {
    MlpSpec spec;
    std::vector<double> params;
};

// Uniform fan-in init: U[-1/sqrt(in), 1/sqrt(in)] per layer, final layer
// additionally scaled by spec.final_layer_scale.
Mlp make_mlp(const MlpSpec& spec, Rng& init_rng);

// Scratch buffers for one forward/backward pass; reusable across calls with
// the same spec.
struct Workspace {
    std::vector<double> pre;  // pre-activations, all layers concatenated
    std::vector<double> post; // input + activations, all layers concatenated
    void resize_for(const MlpSpec& spec);
};

// Deterministic affine-plus-activation composition; caches activations in ws
// so a backward pass can follow.
void forward(const Mlp& net, std::span<const double> input, std::span<double> output, Workspace& ws);

// Convenience wrapper that owns its workspace (tests, cold paths).
std::vector<double> forward(const Mlp& net, std::span<const double> input);

// Exact reverse-mode gradient of the forward map captured in ws.
// param_grad is accumulated (+=) so batched callers sum in a fixed order;
// input_grad, when non-empty, is overwritten with d(out.upstream)/d(input).
void backward(const Mlp& net, const Workspace& ws, std::span<const double> upstream,
              std::span<double> param_grad, std::span<double> input_grad = {});

// Batched forward over `count` inputs stored back to back. The OpenMP path
// writes each row independently, so it is bit-identical to the serial
// reference for any thread count.
void batch_forward(const Mlp& net, std::span<const double> inputs, std::size_t count,
                   std::span<double> outputs, bool parallel);

// Serial reference for batch_forward; kept separate so tests and the
// benchmark can compare the two paths.
void batch_forward_serial(const Mlp& net, std::span<const double> inputs, std::size_t count,
                          std::span<double> outputs);

// Sum of per-sample parameter gradients, reduced in sample order. The
// parallel path computes per-sample slabs in fixed-size chunks and reduces
// them serially, so the result matches the serial reference bit for bit.
void batch_param_gradient(const Mlp& net, std::span<const double> inputs,
                          std::span<const double> upstreams, std::size_t count,
                          std::span<double> param_grad, bool parallel);

void batch_param_gradient_serial(const Mlp& net, std::span<const double> inputs,
                                 std::span<const double> upstreams, std::size_t count,
                                 std::span<double> param_grad);

// Raised when training produces non-finite values; the harness converts it
// into a divergence outcome instead of crashing.
struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Adam with standard defaults. step() descends: params -= lr * m_hat/(sqrt(v_hat)+eps).
struct Adam {
    double lr;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1.0e-8;
    long long t = 0;
    std::vector<double> m;
    std::vector<double> v;

    Adam(std::size_t n, double learning_rate) : lr(learning_rate), m(n, 0.0), v(n, 0.0) {}

    void step(std::span<double> params, std::span<const double> grad);
};

} // namespace mec::nn
