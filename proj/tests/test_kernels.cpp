#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <vector>

#include "caplab/kernels.hpp"

using namespace caplab;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST_CASE("gemm matches a naive triple loop") {
  std::mt19937_64 rng(1);
  for (const auto [m, k, n] : {std::tuple<std::size_t, std::size_t, std::size_t>{1, 1, 1},
                               {3, 5, 2},
                               {17, 9, 23},
                               {40, 64, 33}}) {
    const auto a = random_vec(m * k, rng);
    const auto b = random_vec(k * n, rng);
    std::vector<double> c(m * n, 0.0), ref(m * n, 0.0);
    gemm_serial(a.data(), b.data(), c.data(), m, k, n);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t l = 0; l < k; ++l) s += a[i * k + l] * b[l * n + j];
        ref[i * n + j] = s;
      }
    for (std::size_t i = 0; i < c.size(); ++i)
      CHECK(c[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  }
}

TEST_CASE("parallel kernels are bit-identical to the serial reference") {
  std::mt19937_64 rng(2);
  for (const auto [m, k, n] : {std::tuple<std::size_t, std::size_t, std::size_t>{2, 3, 4},
                               {31, 17, 29},
                               {64, 64, 64},
                               {128, 50, 96}}) {
    const auto a = random_vec(m * k, rng);
    const auto b = random_vec(k * n, rng);

    std::vector<double> cs(m * n, 0.5), cp(m * n, 0.5);
    gemm_serial(a.data(), b.data(), cs.data(), m, k, n);
    gemm_parallel(a.data(), b.data(), cp.data(), m, k, n);
    CHECK(cs == cp);

    const auto at = random_vec(k * m, rng);
    std::fill(cs.begin(), cs.end(), -1.25);
    std::fill(cp.begin(), cp.end(), -1.25);
    gemm_at_b_serial(at.data(), b.data(), cs.data(), m, k, n);
    gemm_at_b_parallel(at.data(), b.data(), cp.data(), m, k, n);
    CHECK(cs == cp);

    const auto bt = random_vec(n * k, rng);
    std::fill(cs.begin(), cs.end(), 2.0);
    std::fill(cp.begin(), cp.end(), 2.0);
    gemm_a_bt_serial(a.data(), bt.data(), cs.data(), m, k, n);
    gemm_a_bt_parallel(a.data(), bt.data(), cp.data(), m, k, n);
    CHECK(cs == cp);
  }
}

TEST_CASE("transposed kernels compute the right product") {
  std::mt19937_64 rng(3);
  const std::size_t m = 7, k = 11, n = 5;
  const auto a = random_vec(k * m, rng);  // a is [k x m], used transposed
  const auto b = random_vec(k * n, rng);
  std::vector<double> c(m * n, 0.0);
  gemm_at_b_serial(a.data(), b.data(), c.data(), m, k, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t l = 0; l < k; ++l) s += a[l * m + i] * b[l * n + j];
      CHECK(c[i * n + j] == doctest::Approx(s).epsilon(1e-12));
    }

  const auto a2 = random_vec(m * k, rng);
  const auto b2 = random_vec(n * k, rng);  // b2 is [n x k], used transposed
  std::vector<double> c2(m * n, 0.0);
  gemm_a_bt_serial(a2.data(), b2.data(), c2.data(), m, k, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t l = 0; l < k; ++l) s += a2[i * k + l] * b2[j * k + l];
      CHECK(c2[i * n + j] == doctest::Approx(s).epsilon(1e-12));
    }
}

TEST_CASE("kernels accumulate into the output") {
  const std::vector<double> a{1.0, 2.0}, b{3.0, 4.0};  // [1x2] * [2x1]
  std::vector<double> c{10.0};
  gemm_serial(a.data(), b.data(), c.data(), 1, 2, 1);
  CHECK(c[0] == 10.0 + 11.0);
  gemm_parallel(a.data(), b.data(), c.data(), 1, 2, 1);
  CHECK(c[0] == 21.0 + 11.0);
}
