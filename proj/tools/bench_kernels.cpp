// Compares the serial reference gemm kernels against the OpenMP versions.
#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

#include <omp.h>

#include "caplab/kernels.hpp"

namespace {

using Kernel = void (*)(const double*, const double*, double*,
                        std::size_t, std::size_t, std::size_t);

double time_kernel(Kernel k, const std::vector<double>& a, const std::vector<double>& b,
                   std::vector<double>& c, std::size_t n, int reps) {
  double best = 1e30;
  for (int r = 0; r < reps; ++r) {
    std::fill(c.begin(), c.end(), 0.0);
    const auto t0 = std::chrono::steady_clock::now();
    k(a.data(), b.data(), c.data(), n, n, n);
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    best = std::min(best, dt);
  }
  return best;
}

}  // namespace

int main() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::printf("threads: %d\n", omp_get_max_threads());
  std::printf("%8s %14s %14s %10s\n", "n", "serial (s)", "parallel (s)", "speedup");
  for (std::size_t n : {64, 128, 256, 512, 1024}) {
    std::vector<double> a(n * n), b(n * n), c(n * n);
    for (double& v : a) v = uni(rng);
    for (double& v : b) v = uni(rng);
    const double ts = time_kernel(caplab::gemm_serial, a, b, c, n, 3);
    const std::vector<double> ref = c;
    const double tp = time_kernel(caplab::gemm_parallel, a, b, c, n, 3);
    if (c != ref) {
      std::printf("MISMATCH at n=%zu\n", n);
      return 1;
    }
    std::printf("%8zu %14.6f %14.6f %9.2fx\n", n, ts, tp, ts / tp);
  }
  return 0;
}
