#include "nesycl/kernels.hpp"

#include <algorithm>
#include <cmath>

#include <omp.h>

namespace nesycl::kernels {

namespace {
int g_threads = 0;  // 0 = library default
}

void set_threads(int n) { g_threads = n; }

int threads() { return g_threads > 0 ? g_threads : omp_get_max_threads(); }

void matmul_serial(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
            if (accumulate)
                c[i * n + j] += acc;
            else
                c[i * n + j] = acc;
        }
    }
}

void matmul(const double* a, const double* b, double* c,
            std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
#pragma omp parallel for num_threads(threads()) schedule(static) if (m > 1)
    for (long long ii = 0; ii < static_cast<long long>(m); ++ii) {
        const std::size_t i = static_cast<std::size_t>(ii);
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
            if (accumulate)
                c[i * n + j] += acc;
            else
                c[i * n + j] = acc;
        }
    }
}

void matmul_nt_serial(const double* g, const double* b, double* c,
                      std::size_t m, std::size_t n, std::size_t k, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < n; ++p) acc += g[i * n + p] * b[j * n + p];
            if (accumulate)
                c[i * k + j] += acc;
            else
                c[i * k + j] = acc;
        }
    }
}

void matmul_nt(const double* g, const double* b, double* c,
               std::size_t m, std::size_t n, std::size_t k, bool accumulate) {
#pragma omp parallel for num_threads(threads()) schedule(static) if (m > 1)
    for (long long ii = 0; ii < static_cast<long long>(m); ++ii) {
        const std::size_t i = static_cast<std::size_t>(ii);
        for (std::size_t j = 0; j < k; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < n; ++p) acc += g[i * n + p] * b[j * n + p];
            if (accumulate)
                c[i * k + j] += acc;
            else
                c[i * k + j] = acc;
        }
    }
}

void matmul_tn_serial(const double* a, const double* g, double* c,
                      std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < m; ++p) acc += a[p * k + i] * g[p * n + j];
            if (accumulate)
                c[i * n + j] += acc;
            else
                c[i * n + j] = acc;
        }
    }
}

void matmul_tn(const double* a, const double* g, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
#pragma omp parallel for num_threads(threads()) schedule(static) if (k > 1)
    for (long long ii = 0; ii < static_cast<long long>(k); ++ii) {
        const std::size_t i = static_cast<std::size_t>(ii);
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < m; ++p) acc += a[p * k + i] * g[p * n + j];
            if (accumulate)
                c[i * n + j] += acc;
            else
                c[i * n + j] = acc;
        }
    }
}

namespace {

inline void softmax_row(const double* in, double* out, std::size_t cols) {
    double mx = in[0];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, in[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
        out[j] = std::exp(in[j] - mx);
        z += out[j];
    }
    for (std::size_t j = 0; j < cols; ++j) out[j] /= z;
}

}  // namespace

void softmax_rows_serial(const double* in, double* out, std::size_t rows, std::size_t cols) {
    for (std::size_t i = 0; i < rows; ++i) softmax_row(in + i * cols, out + i * cols, cols);
}

void softmax_rows(const double* in, double* out, std::size_t rows, std::size_t cols) {
#pragma omp parallel for num_threads(threads()) schedule(static) if (rows > 1)
    for (long long i = 0; i < static_cast<long long>(rows); ++i)
        softmax_row(in + static_cast<std::size_t>(i) * cols, out + static_cast<std::size_t>(i) * cols, cols);
}

void softmax_rows_backward(const double* softmax, const double* g, double* din,
                           std::size_t rows, std::size_t cols) {
    for (std::size_t i = 0; i < rows; ++i) {
        const double* s = softmax + i * cols;
        const double* gr = g + i * cols;
        double dot = 0.0;
        for (std::size_t j = 0; j < cols; ++j) dot += gr[j] * s[j];
        for (std::size_t j = 0; j < cols; ++j) din[i * cols + j] += s[j] * (gr[j] - dot);
    }
}

void relu(const double* in, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
}

void relu_backward(const double* in, const double* g, double* din, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (in[i] > 0.0) din[i] += g[i];
}

}  // namespace nesycl::kernels
