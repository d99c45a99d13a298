#pragma once

#include <cstddef>
#include <string>
#include <vector>

// Dense double-precision kernels behind the tensor layer. Two implementations
// ship: a scalar reference and an AVX2+FMA variant. The backend is picked once
// at startup from CPU capabilities and can be forced with the environment
// variable FADELAB_KERNELS=scalar|avx2. All matrices are row-major.

namespace fadelab::kernels {

struct Backend {
    const char* name;

    // c = a (m x k) * b (k x n)
    void (*gemm)(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
    // c (k x n) += a^T * b with a (m x k), b (m x n)
    void (*gemm_tn_acc)(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
    // c (m x n) += a * b^T with a (m x k), b (n x k)
    void (*gemm_nt_acc)(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);

    void (*add)(const double* x, const double* y, double* z, std::size_t n);
    void (*sub)(const double* x, const double* y, double* z, std::size_t n);
    void (*mul)(const double* x, const double* y, double* z, std::size_t n);
    void (*axpy)(double a, const double* x, double* y, std::size_t n);   // y += a*x
    void (*scale)(double a, const double* x, double* y, std::size_t n);  // y = a*x
    double (*dot)(const double* x, const double* y, std::size_t n);
    double (*sum)(const double* x, std::size_t n);
    // rows of x (m x n) each get the bias row (1 x n) added, in place
    void (*add_bias_rows)(double* x, const double* bias, std::size_t m, std::size_t n);
};

const Backend& scalar_backend();
bool avx2_supported();

// Selected backend (env override applied on first call).
const Backend& active();

// Forces a backend by name for the current process; throws on unknown name or
// unsupported hardware. Intended for tests.
void force_backend(const std::string& name);

std::vector<const Backend*> available_backends();

} // namespace fadelab::kernels
