#pragma once

#include "dfbk/common.hpp"

namespace dfbk {

// C = alpha * op(A) * op(B) + beta * C, row-major. Dispatches to the BLAS
// sgemm/dgemm so the same templated layer code runs in both precisions.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a, int lda,
          const float* b, int ldb, float beta, float* c, int ldc);
void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a, int lda,
          const double* b, int ldb, double beta, double* c, int ldc);

// out = a * b for plain (non-transposed) matrices.
template <typename T>
Mat<T> matmul(const Mat<T>& a, const Mat<T>& b) {
    if (a.cols != b.rows)
        throw ShapeError("matmul: inner dimensions " + std::to_string(a.cols) + " vs " +
                         std::to_string(b.rows));
    Mat<T> out(a.rows, b.cols);
    if (a.rows == 0 || b.cols == 0) return out;
    gemm(false, false, a.rows, b.cols, a.cols, T(1), a.v.data(), a.cols, b.v.data(), b.cols, T(0),
         out.v.data(), out.cols);
    return out;
}

// out = a^T * b
template <typename T>
Mat<T> matmul_tn(const Mat<T>& a, const Mat<T>& b) {
    if (a.rows != b.rows) throw ShapeError("matmul_tn: row mismatch");
    Mat<T> out(a.cols, b.cols);
    gemm(true, false, a.cols, b.cols, a.rows, T(1), a.v.data(), a.cols, b.v.data(), b.cols, T(0),
         out.v.data(), out.cols);
    return out;
}

// out = a * b^T
template <typename T>
Mat<T> matmul_nt(const Mat<T>& a, const Mat<T>& b) {
    if (a.cols != b.cols) throw ShapeError("matmul_nt: col mismatch");
    Mat<T> out(a.rows, b.rows);
    gemm(false, true, a.rows, b.rows, a.cols, T(1), a.v.data(), a.cols, b.v.data(), b.cols, T(0),
         out.v.data(), out.cols);
    return out;
}

// c += a^T * b (gradient accumulation form)
template <typename T>
void matmul_tn_acc(const Mat<T>& a, const Mat<T>& b, Mat<T>& c) {
    if (a.cols != c.rows || b.cols != c.cols || a.rows != b.rows)
        throw ShapeError("matmul_tn_acc: shape mismatch");
    gemm(true, false, a.cols, b.cols, a.rows, T(1), a.v.data(), a.cols, b.v.data(), b.cols, T(1),
         c.v.data(), c.cols);
}

}  // namespace dfbk
