#include "mec/mlp.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mec::nn {

Activation activation_from_string(const std::string& s) {
    if (s == "identity" || s == "linear") return Activation::kIdentity;
    if (s == "relu") return Activation::kRelu;
    if (s == "tanh") return Activation::kTanh;
    throw std::invalid_argument("unknown activation: " + s);
}

std::string to_string(Activation a) {
    switch (a) {
        case Activation::kIdentity: return "identity";
        case Activation::kRelu: return "relu";
        case Activation::kTanh: return "tanh";
    }
    return "?";
}

void MlpSpec::validate() const {
    if (widths.size() < 3) throw std::invalid_argument("MlpSpec: need at least one hidden layer");
    for (const int w : widths)
        if (w < 1) throw std::invalid_argument("MlpSpec: widths must be positive");
}

std::size_t MlpSpec::param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l)
        n += static_cast<std::size_t>(widths[l + 1]) * static_cast<std::size_t>(widths[l]) +
             static_cast<std::size_t>(widths[l + 1]);
    return n;
}

Mlp make_mlp(const MlpSpec& spec, Rng& init_rng) {
    spec.validate();
    Mlp net{spec, std::vector<double>(spec.param_count(), 0.0)};
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
        const int in = spec.widths[l];
        const int out = spec.widths[l + 1];
        const bool last = (l + 2 == spec.widths.size());
        const double bound = (last ? spec.final_layer_scale : 1.0) / std::sqrt(static_cast<double>(in));
        for (int i = 0; i < out * in; ++i) net.params[off++] = init_rng.uniform(-bound, bound);
        for (int i = 0; i < out; ++i) net.params[off++] = 0.0;
    }
    return net;
}

void Workspace::resize_for(const MlpSpec& spec) {
    std::size_t pre_len = 0;
    std::size_t post_len = static_cast<std::size_t>(spec.widths.front());
    for (std::size_t l = 1; l < spec.widths.size(); ++l) {
        pre_len += static_cast<std::size_t>(spec.widths[l]);
        post_len += static_cast<std::size_t>(spec.widths[l]);
    }
    pre.assign(pre_len, 0.0);
    post.assign(post_len, 0.0);
}

namespace {

double apply_act(Activation a, double x) {
    switch (a) {
        case Activation::kIdentity: return x;
        case Activation::kRelu: return x > 0.0 ? x : 0.0;
        case Activation::kTanh: return std::tanh(x);
    }
    return x;
}

// derivative expressed through pre-activation x and activation value y
double act_grad(Activation a, double x, double y) {
    switch (a) {
        case Activation::kIdentity: return 1.0;
        case Activation::kRelu: return x > 0.0 ? 1.0 : 0.0;
        case Activation::kTanh: return 1.0 - y * y;
    }
    return 1.0;
}

} // namespace

void forward(const Mlp& net, std::span<const double> input, std::span<double> output, Workspace& ws) {
    const MlpSpec& spec = net.spec;
    if (input.size() != static_cast<std::size_t>(spec.input_width()))
        throw std::invalid_argument("forward: input width mismatch");
    if (output.size() != static_cast<std::size_t>(spec.output_width()))
        throw std::invalid_argument("forward: output width mismatch");
    ws.resize_for(spec);

    std::copy(input.begin(), input.end(), ws.post.begin());

    std::size_t w_off = 0;
    std::size_t pre_off = 0;
    std::size_t in_off = 0;
    for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
        const int in = spec.widths[l];
        const int out = spec.widths[l + 1];
        const bool last = (l + 2 == spec.widths.size());
        const Activation act = last ? spec.output : spec.hidden;
        const double* W = net.params.data() + w_off;
        const double* b = W + static_cast<std::size_t>(out) * in;
        const double* x = ws.post.data() + in_off;
        double* pre = ws.pre.data() + pre_off;
        double* post = ws.post.data() + in_off + in;
        for (int r = 0; r < out; ++r) {
            double acc = b[r];
            const double* wr = W + static_cast<std::size_t>(r) * in;
            for (int c = 0; c < in; ++c) acc += wr[c] * x[c];
            pre[r] = acc;
            post[r] = apply_act(act, acc);
        }
        w_off += static_cast<std::size_t>(out) * in + out;
        pre_off += static_cast<std::size_t>(out);
        in_off += static_cast<std::size_t>(in);
    }
    std::copy(ws.post.end() - spec.output_width(), ws.post.end(), output.begin());
}

std::vector<double> forward(const Mlp& net, std::span<const double> input) {
    Workspace ws;
    std::vector<double> out(static_cast<std::size_t>(net.spec.output_width()), 0.0);
    forward(net, input, out, ws);
    return out;
}

void backward(const Mlp& net, const Workspace& ws, std::span<const double> upstream,
              std::span<double> param_grad, std::span<double> input_grad) {
    const MlpSpec& spec = net.spec;
    if (upstream.size() != static_cast<std::size_t>(spec.output_width()))
        throw std::invalid_argument("backward: upstream width mismatch");
    if (param_grad.size() != net.params.size())
        throw std::invalid_argument("backward: param_grad size mismatch");
    if (!input_grad.empty() && input_grad.size() != static_cast<std::size_t>(spec.input_width()))
        throw std::invalid_argument("backward: input_grad size mismatch");

    const std::size_t layers = spec.layer_count();

    // per-layer offsets, recomputed cheaply (layer counts are tiny)
    std::vector<std::size_t> w_offs(layers), pre_offs(layers), in_offs(layers);
    {
        std::size_t w_off = 0, pre_off = 0, in_off = 0;
        for (std::size_t l = 0; l < layers; ++l) {
            w_offs[l] = w_off;
            pre_offs[l] = pre_off;
            in_offs[l] = in_off;
            w_off += static_cast<std::size_t>(spec.widths[l + 1]) * spec.widths[l] + spec.widths[l + 1];
            pre_off += static_cast<std::size_t>(spec.widths[l + 1]);
            in_off += static_cast<std::size_t>(spec.widths[l]);
        }
    }

    std::vector<double> delta(upstream.begin(), upstream.end());
    for (std::size_t li = layers; li-- > 0;) {
        const int in = spec.widths[li];
        const int out = spec.widths[li + 1];
        const bool last = (li + 1 == layers);
        const Activation act = last ? spec.output : spec.hidden;
        const double* pre = ws.pre.data() + pre_offs[li];
        const double* post = ws.post.data() + in_offs[li] + in;
        const double* x = ws.post.data() + in_offs[li];
        const double* W = net.params.data() + w_offs[li];
        double* gW = param_grad.data() + w_offs[li];
        double* gb = gW + static_cast<std::size_t>(out) * in;

        for (int r = 0; r < out; ++r) delta[static_cast<std::size_t>(r)] *= act_grad(act, pre[r], post[r]);

        std::vector<double> next_delta(static_cast<std::size_t>(in), 0.0);
        for (int r = 0; r < out; ++r) {
            const double d = delta[static_cast<std::size_t>(r)];
            double* gwr = gW + static_cast<std::size_t>(r) * in;
            const double* wr = W + static_cast<std::size_t>(r) * in;
            for (int c = 0; c < in; ++c) {
                gwr[c] += d * x[c];
                next_delta[static_cast<std::size_t>(c)] += d * wr[c];
            }
            gb[r] += d;
        }
        delta = std::move(next_delta);
    }
    if (!input_grad.empty()) std::copy(delta.begin(), delta.end(), input_grad.begin());
}

void batch_forward_serial(const Mlp& net, std::span<const double> inputs, std::size_t count,
                          std::span<double> outputs) {
    const std::size_t in_w = static_cast<std::size_t>(net.spec.input_width());
    const std::size_t out_w = static_cast<std::size_t>(net.spec.output_width());
    Workspace ws;
    for (std::size_t i = 0; i < count; ++i)
        forward(net, inputs.subspan(i * in_w, in_w), outputs.subspan(i * out_w, out_w), ws);
}

void batch_forward(const Mlp& net, std::span<const double> inputs, std::size_t count,
                   std::span<double> outputs, bool parallel) {
    if (!parallel) {
        batch_forward_serial(net, inputs, count, outputs);
        return;
    }
    const std::size_t in_w = static_cast<std::size_t>(net.spec.input_width());
    const std::size_t out_w = static_cast<std::size_t>(net.spec.output_width());
#pragma omp parallel
    {
        Workspace ws;
#pragma omp for schedule(static)
        for (long long i = 0; i < static_cast<long long>(count); ++i) {
            const std::size_t u = static_cast<std::size_t>(i);
            forward(net, inputs.subspan(u * in_w, in_w), outputs.subspan(u * out_w, out_w), ws);
        }
    }
}

void batch_param_gradient_serial(const Mlp& net, std::span<const double> inputs,
                                 std::span<const double> upstreams, std::size_t count,
                                 std::span<double> param_grad) {
    const std::size_t in_w = static_cast<std::size_t>(net.spec.input_width());
    const std::size_t out_w = static_cast<std::size_t>(net.spec.output_width());
    Workspace ws;
    std::vector<double> out(out_w, 0.0);
    for (std::size_t i = 0; i < count; ++i) {
        forward(net, inputs.subspan(i * in_w, in_w), out, ws);
        backward(net, ws, upstreams.subspan(i * out_w, out_w), param_grad);
    }
}

void batch_param_gradient(const Mlp& net, std::span<const double> inputs,
                          std::span<const double> upstreams, std::size_t count,
                          std::span<double> param_grad, bool parallel) {
#ifdef _OPENMP
    if (omp_get_max_threads() == 1) parallel = false;
#endif
    if (!parallel) {
        batch_param_gradient_serial(net, inputs, upstreams, count, param_grad);
        return;
    }
    const std::size_t in_w = static_cast<std::size_t>(net.spec.input_width());
    const std::size_t out_w = static_cast<std::size_t>(net.spec.output_width());
    const std::size_t n_params = net.params.size();

    // Per-sample gradient slabs, reduced in sample order. Chunking bounds the
    // slab memory while keeping the reduction order independent of the
    // thread count.
    constexpr std::size_t kChunk = 16;
    std::vector<double> slabs(kChunk * n_params, 0.0);
    for (std::size_t base = 0; base < count; base += kChunk) {
        const std::size_t len = std::min(kChunk, count - base);
        std::fill(slabs.begin(), slabs.begin() + static_cast<std::ptrdiff_t>(len * n_params), 0.0);
#pragma omp parallel
        {
            Workspace ws;
            std::vector<double> out(out_w, 0.0);
#pragma omp for schedule(static)
            for (long long k = 0; k < static_cast<long long>(len); ++k) {
                const std::size_t i = base + static_cast<std::size_t>(k);
                forward(net, inputs.subspan(i * in_w, in_w), out, ws);
                backward(net, ws, upstreams.subspan(i * out_w, out_w),
                         std::span<double>(slabs.data() + static_cast<std::size_t>(k) * n_params, n_params));
            }
        }
        for (std::size_t k = 0; k < len; ++k) {
            const double* s = slabs.data() + k * n_params;
            for (std::size_t p = 0; p < n_params; ++p) param_grad[p] += s[p];
        }
    }
}

void Adam::step(std::span<double> params, std::span<const double> grad) {
    if (params.size() != m.size() || grad.size() != m.size())
        throw std::invalid_argument("Adam: size mismatch");
    for (const double g : grad)
        if (!std::isfinite(g)) throw TrainingError("Adam: non-finite gradient");
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
}

} // namespace mec::nn
