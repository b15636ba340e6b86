#include "caplab/kernels.hpp"

#include <cstdint>

namespace caplab {

void gemm_serial(const double* a, const double* b, double* c,
                 std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t l = 0; l < k; ++l) {
      const double av = arow[l];
      if (av == 0.0) continue;
      const double* brow = b + l * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_parallel(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static) if (m * k * n > 8192)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t l = 0; l < k; ++l) {
      const double av = arow[l];
      if (av == 0.0) continue;
      const double* brow = b + l * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_at_b_serial(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t l = 0; l < k; ++l) {
      const double av = a[l * m + i];
      if (av == 0.0) continue;
      const double* brow = b + l * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_at_b_parallel(const double* a, const double* b, double* c,
                        std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static) if (m * k * n > 8192)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i) {
    double* crow = c + i * n;
    for (std::size_t l = 0; l < k; ++l) {
      const double av = a[l * m + i];
      if (av == 0.0) continue;
      const double* brow = b + l * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_a_bt_serial(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double acc = 0.0;
      for (std::size_t l = 0; l < k; ++l) acc += arow[l] * brow[l];
      crow[j] += acc;
    }
  }
}

void gemm_a_bt_parallel(const double* a, const double* b, double* c,
                        std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static) if (m * k * n > 8192)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double acc = 0.0;
      for (std::size_t l = 0; l < k; ++l) acc += arow[l] * brow[l];
      crow[j] += acc;
    }
  }
}

}  // namespace caplab
