#pragma once

// Dense kernels behind the convolution layers (CBLAS-backed).

#include <cstddef>

namespace nasality::compute {

// C = alpha * op(A) * op(B) + beta * C, row-major, op = transpose when flagged.
template <typename Real>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, Real alpha,
          const Real* a, std::size_t lda, const Real* b, std::size_t ldb, Real beta, Real* c,
          std::size_t ldc);

// Worker threads used inside a single GEMM. One thread gives bitwise
// reproducible results; it is the default.
void set_threads(int n);
int threads();

}  // namespace nasality::compute
