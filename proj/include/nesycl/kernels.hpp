#pragma once

#include <cstddef>

// Dense numeric kernels. Every kernel comes in two flavors: a *_serial
// reference used by the tests, and an OpenMP version that parallelizes only
// over independent output elements (inner accumulation stays serial), so both
// produce bitwise-identical results for any thread count.

namespace nesycl::kernels {

// Global thread budget for the parallel kernels (defaults to OpenMP's).
void set_threads(int n);
int threads();

// C(m x n) = A(m x k) * B(k x n); accumulate=true adds into C.
void matmul_serial(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t k, std::size_t n, bool accumulate);
void matmul(const double* a, const double* b, double* c,
            std::size_t m, std::size_t k, std::size_t n, bool accumulate);

// C(m x k) = G(m x n) * B^T(n x k)   [dA of a matmul backward]
void matmul_nt_serial(const double* g, const double* b, double* c,
                      std::size_t m, std::size_t n, std::size_t k, bool accumulate);
void matmul_nt(const double* g, const double* b, double* c,
               std::size_t m, std::size_t n, std::size_t k, bool accumulate);

// C(k x n) = A^T(k x m) * G(m x n)   [dB of a matmul backward]
void matmul_tn_serial(const double* a, const double* g, double* c,
                      std::size_t m, std::size_t k, std::size_t n, bool accumulate);
void matmul_tn(const double* a, const double* g, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate);

// Row-stabilized softmax over each row of a (rows x cols) matrix.
void softmax_rows_serial(const double* in, double* out, std::size_t rows, std::size_t cols);
void softmax_rows(const double* in, double* out, std::size_t rows, std::size_t cols);

// dIn = s .* (g - rowsum(g .* s)) per row, accumulated.
void softmax_rows_backward(const double* softmax, const double* g, double* din,
                           std::size_t rows, std::size_t cols);

void relu(const double* in, double* out, std::size_t n);
void relu_backward(const double* in, const double* g, double* din, std::size_t n);

}  // namespace nesycl::kernels
