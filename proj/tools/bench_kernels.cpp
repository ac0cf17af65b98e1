// Compares the serial reference kernels against the OpenMP versions and
// checks that both produce bitwise-identical results.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <vector>

#include <omp.h>

#include "nesycl/kernels.hpp"
#include "nesycl/knowledge.hpp"
#include "nesycl/rng.hpp"

using namespace nesycl;

namespace {

double now_sec() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

template <typename F>
double time_best_of(int reps, F&& f) {
    double best = 1e30;
    for (int r = 0; r < reps; ++r) {
        const double t0 = now_sec();
        f();
        best = std::min(best, now_sec() - t0);
    }
    return best;
}

}  // namespace

int main() {
    Rng rng(7);
    std::printf("threads available: %d\n\n", kernels::threads());

    {
        const std::size_t n = 512;
        std::vector<double> a(n * n), b(n * n), c_serial(n * n), c_par(n * n);
        for (double& v : a) v = rng.uniform(-1, 1);
        for (double& v : b) v = rng.uniform(-1, 1);
        const double ts = time_best_of(3, [&] {
            kernels::matmul_serial(a.data(), b.data(), c_serial.data(), n, n, n, false);
        });
        const double tp = time_best_of(3, [&] {
            kernels::matmul(a.data(), b.data(), c_par.data(), n, n, n, false);
        });
        const bool identical = std::memcmp(c_serial.data(), c_par.data(), n * n * sizeof(double)) == 0;
        std::printf("matmul %zux%zu:        serial %.3fs  openmp %.3fs  speedup %.2fx  bitwise-equal %s\n",
                    n, n, ts, tp, ts / tp, identical ? "yes" : "NO");
    }

    {
        const std::size_t rows = 20000, cols = 64;
        std::vector<double> in(rows * cols), out_serial(rows * cols), out_par(rows * cols);
        for (double& v : in) v = rng.uniform(-8, 8);
        const double ts = time_best_of(3, [&] {
            kernels::softmax_rows_serial(in.data(), out_serial.data(), rows, cols);
        });
        const double tp = time_best_of(3, [&] {
            kernels::softmax_rows(in.data(), out_par.data(), rows, cols);
        });
        const bool identical =
            std::memcmp(out_serial.data(), out_par.data(), rows * cols * sizeof(double)) == 0;
        std::printf("softmax %zux%zu:    serial %.3fs  openmp %.3fs  speedup %.2fx  bitwise-equal %s\n",
                    rows, cols, ts, tp, ts / tp, identical ? "yes" : "NO");
    }

    {
        // reasoning-layer marginalization on a large synthetic knowledge:
        // three slots of cardinality 40, label = their sum
        KnowledgeSpec spec;
        spec.name = "bench-sum3";
        spec.schema.slots = {{"a", 40}, {"b", 40}, {"c", 40}};
        spec.schema.label_cardinalities = {118};
        spec.predicate = [](std::span<const int> c, std::span<const int> y) {
            return c[0] + c[1] + c[2] == y[0];
        };
        const CompiledKnowledge ck = compile(spec);
        std::vector<std::vector<double>> marginals(3, std::vector<double>(40));
        for (auto& m : marginals) {
            double z = 0;
            for (double& v : m) z += (v = rng.uniform(0.01, 1.0));
            for (double& v : m) v /= z;
        }
        std::vector<double> out_serial(ck.num_labels()), out_par;
        const double ts = time_best_of(5, [&] {
            label_distribution_serial(ck, marginals, out_serial);
        });
        const double tp = time_best_of(5, [&] { out_par = label_distribution(ck, marginals); });
        const bool identical =
            std::memcmp(out_serial.data(), out_par.data(), out_par.size() * sizeof(double)) == 0;
        std::printf("reasoning 40^3:      serial %.3fs  openmp %.3fs  speedup %.2fx  bitwise-equal %s\n",
                    ts, tp, ts / tp, identical ? "yes" : "NO");
    }
    return 0;
}
