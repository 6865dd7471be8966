#include <chrono>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mec/harness.hpp"
#include "mec/mlp.hpp"

using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void bench_batch_kernels() {
    mec::Rng rng(7);
    mec::nn::MlpSpec spec;
    spec.widths = {510, 512, 128, 1};
    spec.hidden = mec::nn::Activation::kRelu;
    const mec::nn::Mlp net = mec::nn::make_mlp(spec, rng);

    const std::size_t batch = 256;
    const std::size_t in_w = static_cast<std::size_t>(spec.input_width());
    std::vector<double> inputs(batch * in_w);
    for (double& x : inputs) x = rng.uniform(-1.0, 1.0);
    std::vector<double> outputs(batch, 0.0);
    std::vector<double> upstream(batch, 1.0);
    std::vector<double> grad(net.params.size(), 0.0);

    const int reps = 20;

    auto t0 = Clock::now();
    for (int r = 0; r < reps; ++r) mec::nn::batch_forward_serial(net, inputs, batch, outputs);
    const double fwd_serial = seconds_since(t0) / reps;

    t0 = Clock::now();
    for (int r = 0; r < reps; ++r) mec::nn::batch_forward(net, inputs, batch, outputs, true);
    const double fwd_omp = seconds_since(t0) / reps;

    t0 = Clock::now();
    for (int r = 0; r < reps; ++r) {
        std::fill(grad.begin(), grad.end(), 0.0);
        mec::nn::batch_param_gradient_serial(net, inputs, upstream, batch, grad);
    }
    const double bwd_serial = seconds_since(t0) / reps;

    t0 = Clock::now();
    for (int r = 0; r < reps; ++r) {
        std::fill(grad.begin(), grad.end(), 0.0);
        mec::nn::batch_param_gradient(net, inputs, upstream, batch, grad, true);
    }
    const double bwd_omp = seconds_since(t0) / reps;

    std::printf("batch_forward  (510/512/128/1, batch %zu): serial %8.3f ms   omp %8.3f ms   x%.2f\n",
                batch, fwd_serial * 1e3, fwd_omp * 1e3, fwd_serial / fwd_omp);
    std::printf("batch_gradient (510/512/128/1, batch %zu): serial %8.3f ms   omp %8.3f ms   x%.2f\n",
                batch, bwd_serial * 1e3, bwd_omp * 1e3, bwd_serial / bwd_omp);
}

void bench_eval_rollouts() {
    mec::harness::RunConfig cfg = mec::harness::desk_scale_config();
    cfg.max_episodes = 3;
    cfg.eval_episodes = 16;
    cfg.budget_minutes = 0.0;

    for (const bool omp : {false, true}) {
        cfg.use_openmp = omp;
        cfg.out_dir = std::string("/tmp/mec-bench-") + (omp ? "omp" : "serial");
        const auto t0 = Clock::now();
        mec::harness::run(cfg);
        std::printf("desk run, 3 episodes x 16 evals: %s %8.3f s\n", omp ? "omp   " : "serial",
                    seconds_since(t0));
    }
}

} // namespace

int main() {
#ifdef _OPENMP
    std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
    std::printf("built without openmp\n");
#endif
    bench_batch_kernels();
    bench_eval_rollouts();
    return 0;
}
