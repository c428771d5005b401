// Times the OpenMP kernels against the serial reference implementations and
// reports speedups plus the largest observed deviation between the two paths.

#include <omp.h>

#include <cmath>
#include <cstdio>
#include <functional>
#include <string>

#include "ldmres/network.hpp"
#include "ldmres/ops.hpp"
#include "ldmres/ref_ops.hpp"
#include "ldmres/rng.hpp"

using namespace ldmres;

namespace {

Tensor4 random_tensor(Shape4 d, Rng& rng, double scale = 1.0) {
    Tensor4 t(d);
    for (std::size_t i = 0; i < t.size(); ++i)
        t[i] = float(rng.uniform(-scale, scale));
    return t;
}

double max_abs_diff(const Tensor4& a, const Tensor4& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::fabs(double(a[i]) - b[i]));
    return m;
}

double time_best_of(int reps, const std::function<void()>& fn) {
    double best = 1e30;
    for (int r = 0; r < reps; ++r) {
        const double t0 = omp_get_wtime();
        fn();
        best = std::min(best, omp_get_wtime() - t0);
    }
    return best;
}

void report(const std::string& name, double t_ref, double t_omp, double diff) {
    std::printf("%-26s %10.3f ms %10.3f ms %7.2fx   %.3g\n", name.c_str(), t_ref * 1e3,
                t_omp * 1e3, t_ref / t_omp, diff);
}

}  // namespace

int main(int argc, char** argv) {
    int reps = 3;
    if (argc > 1) reps = std::max(1, std::atoi(argv[1]));

    std::printf("threads: %d, reps per timing: %d\n", omp_get_max_threads(), reps);
    std::printf("%-26s %13s %13s %8s   %s\n", "kernel", "serial", "openmp", "speedup",
                "max|diff|");

    Rng rng(7);

    {
        Tensor4 x = random_tensor({2, 16, 96, 96}, rng);
        Tensor4 w = random_tensor({16, 16, 3, 3}, rng, 0.2);
        Tensor4 out_ref, out_omp;
        const double tr = time_best_of(reps, [&] { out_ref = ref::conv2d(x, w); });
        const double to = time_best_of(reps, [&] { out_omp = conv2d(x, w); });
        report("conv2d 3x3 fwd", tr, to, max_abs_diff(out_ref, out_omp));

        Tensor4 g = random_tensor(out_ref.dims(), rng);
        Tensor4 gi_r, gw_r, gi_o, gw_o;
        const double trb =
            time_best_of(reps, [&] { ref::conv2d_backward(x, w, g, &gi_r, &gw_r, nullptr); });
        const double tob =
            time_best_of(reps, [&] { conv2d_backward(x, w, g, &gi_o, &gw_o, nullptr); });
        report("conv2d 3x3 bwd", trb, tob,
               std::max(max_abs_diff(gi_r, gi_o), max_abs_diff(gw_r, gw_o)));
    }

    {
        Tensor4 x = random_tensor({2, 32, 96, 96}, rng);
        Tensor4 w = random_tensor({32, 32, 1, 1}, rng, 0.3);
        Tensor4 out_ref, out_omp;
        const double tr = time_best_of(reps, [&] { out_ref = ref::conv2d(x, w); });
        const double to = time_best_of(reps, [&] { out_omp = conv2d(x, w); });
        report("conv2d 1x1 fwd", tr, to, max_abs_diff(out_ref, out_omp));
    }

    {
        Tensor4 x = random_tensor({4, 16, 128, 128}, rng);
        Tensor4 gamma(1, 16, 1, 1, 1.0f), beta(1, 16, 1, 1, 0.1f);
        Tensor4 rm_a(1, 16, 1, 1), rv_a(1, 16, 1, 1, 1.0f);
        Tensor4 rm_b = rm_a, rv_b = rv_a;
        Tensor4 out_ref, out_omp;
        const double tr = time_best_of(reps, [&] {
            out_ref = ref::batchnorm(x, gamma, beta, rm_a, rv_a, 1e-5f, 0.9f, BnMode::Train);
        });
        const double to = time_best_of(reps, [&] {
            out_omp = batchnorm(x, gamma, beta, rm_b, rv_b, 1e-5f, 0.9f, BnMode::Train);
        });
        report("batchnorm train", tr, to, max_abs_diff(out_ref, out_omp));
    }

    {
        Tensor4 x = random_tensor({4, 16, 128, 128}, rng);
        Tensor4 out_ref, out_omp;
        const double tr = time_best_of(reps, [&] { out_ref = ref::maxpool2x2(x); });
        const double to = time_best_of(reps, [&] { out_omp = maxpool2x2(x); });
        report("maxpool2x2", tr, to, max_abs_diff(out_ref, out_omp));

        Tensor4 u_ref, u_omp;
        const double tur = time_best_of(reps, [&] { u_ref = ref::upsample2x_nearest(out_ref); });
        const double tuo = time_best_of(reps, [&] { u_omp = upsample2x_nearest(out_omp); });
        report("upsample2x", tur, tuo, max_abs_diff(u_ref, u_omp));
    }

    {
        Tensor4 x = random_tensor({1, 2, 256, 256}, rng);
        Tensor4 out_ref, out_omp;
        const double tr = time_best_of(reps, [&] { out_ref = ref::softmax_channel(x); });
        const double to = time_best_of(reps, [&] { out_omp = softmax_channel(x); });
        report("softmax_channel", tr, to, max_abs_diff(out_ref, out_omp));
    }

    {
        // Whole-network inference; the serial path reuses the same graph with
        // the thread count pinned to one.
        NetworkConfig cfg;
        cfg.seed = 11;
        Network net = build_network(cfg);
        Tensor4 x = random_tensor({1, 3, 256, 256}, rng, 0.5);

        Tensor4 out_omp, out_ser;
        const double to = time_best_of(reps, [&] { out_omp = forward(net, x, BnMode::Infer); });
        const int saved = omp_get_max_threads();
        omp_set_num_threads(1);
        const double t1 = time_best_of(reps, [&] { out_ser = forward(net, x, BnMode::Infer); });
        omp_set_num_threads(saved);
        report("network fwd 256x256", t1, to, max_abs_diff(out_ser, out_omp));
    }

    return 0;
}
