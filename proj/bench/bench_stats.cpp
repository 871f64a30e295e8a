// Times the OpenMP stats kernels against the serial reference implementation
// on large vectors and prints per-kernel speedups. Build target: bench_stats.

#include <chrono>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include <omp.h>

#include "agenteval/stats.hpp"
#include "support/reference_stats.hpp"

namespace st = agenteval::stats;

namespace {

double time_best_of(int repeats, const std::function<double()>& work, double* result) {
    double best = 1e100;
    for (int i = 0; i < repeats; ++i) {
        const auto start = std::chrono::steady_clock::now();
        *result = work();
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (elapsed < best) best = elapsed;
    }
    return best;
}

void report(const char* name, double serial_s, double parallel_s, double delta) {
    std::printf("%-10s serial %8.2f ms   omp %8.2f ms   speedup %5.2fx   |delta| %.3e\n",
                name, serial_s * 1e3, parallel_s * 1e3, serial_s / parallel_s, delta);
}

} // namespace

int main(int argc, char** argv) {
    std::size_t n = 1u << 24;
    if (argc > 1) n = std::stoul(argv[1]);
    const int repeats = 3;
    std::printf("n = %zu, omp threads = %d\n", n, omp_get_max_threads());

    std::mt19937 rng(42);
    std::uniform_real_distribution<double> score(1.0, 5.0);
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = score(rng);
        b[i] = score(rng);
    }

    double serial_out = 0.0, parallel_out = 0.0;

    double serial = time_best_of(repeats, [&] { return refstats::rmse(a, b); }, &serial_out);
    double parallel = time_best_of(repeats, [&] { return st::rmse(a, b); }, &parallel_out);
    report("rmse", serial, parallel, std::abs(serial_out - parallel_out));

    serial = time_best_of(repeats, [&] { return refstats::mae(a, b); }, &serial_out);
    parallel = time_best_of(repeats, [&] { return st::mae(a, b); }, &parallel_out);
    report("mae", serial, parallel, std::abs(serial_out - parallel_out));

    serial = time_best_of(repeats, [&] { return refstats::pearson(a, b); }, &serial_out);
    parallel = time_best_of(repeats, [&] { return st::pearson(a, b).r; }, &parallel_out);
    report("pearson", serial, parallel, std::abs(serial_out - parallel_out));

    std::vector<std::vector<double>> groups = {a, b};
    serial = time_best_of(repeats, [&] { return refstats::anova(groups).f_value; },
                          &serial_out);
    parallel = time_best_of(repeats, [&] { return st::anova_one_way(groups).f_value; },
                            &parallel_out);
    report("anova", serial, parallel, std::abs(serial_out - parallel_out));

    return 0;
}
