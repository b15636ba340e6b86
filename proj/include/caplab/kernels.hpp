#ifndef CAPLAB_KERNELS_HPP
#define CAPLAB_KERNELS_HPP

#include <cstddef>

namespace caplab {

// Dense matrix kernels, row-major. c += op(a) * op(b) where op is an
// optional transpose. The parallel versions partition rows of c with
// OpenMP; each output element is written by exactly one thread, so
// results are bit-identical to the serial reference for any thread count.

// c[m x n] += a[m x k] * b[k x n]
void gemm_serial(const double* a, const double* b, double* c,
                 std::size_t m, std::size_t k, std::size_t n);
void gemm_parallel(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t k, std::size_t n);

// c[m x n] += a[k x m]^T * b[k x n]
void gemm_at_b_serial(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n);
void gemm_at_b_parallel(const double* a, const double* b, double* c,
                        std::size_t m, std::size_t k, std::size_t n);

// c[m x n] += a[m x k] * b[n x k]^T
void gemm_a_bt_serial(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n);
void gemm_a_bt_parallel(const double* a, const double* b, double* c,
                        std::size_t m, std::size_t k, std::size_t n);

}  // namespace caplab

#endif
