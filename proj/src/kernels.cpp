#include "mlt/kernels.hpp"

#include <cmath>
#include <omp.h>

namespace mlt::kernels {

namespace {

// Per-column bodies shared by both variants.
inline void marginals(const Mat& V, int n, int j, double* u, double* w) {
    for (int p = 0; p < n; ++p) {
        u[p] = 0.0;
        w[p] = 0.0;
    }
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            double x = V(a * n + b, j);
            u[b] += x;  // second character
            w[a] += x;  // first character
        }
}

inline void shift_column(const Mat& V, int n, int j, Mat& S) {
    const int M = static_cast<int>(V.cols());
    double u[64], w[64], tmp[64];
    marginals(V, n, j, u, tmp);
    marginals(V, n, (j + 1) % M, tmp, w);
    for (int p = 0; p < n; ++p)
        for (int q = 0; q < n; ++q) S(p * n + q, j) = u[p] * w[q];
}

// Column j of GV collects d/du_j from S(:,j) and d/dw from S(:,j-1).
inline void shift_back_column(const Mat& V, const Mat& GS, int n, int j, Mat& GV) {
    const int M = static_cast<int>(V.cols());
    const int jn = (j + 1) % M;
    const int jp = (j + M - 1) % M;
    double u[64], w[64], tmp[64], du[64], dw[64];
    // du_j[p] = sum_q GS(pq, j) w_{j+1}[q]
    marginals(V, n, jn, tmp, w);
    for (int p = 0; p < n; ++p) {
        double acc = 0.0;
        for (int q = 0; q < n; ++q) acc += GS(p * n + q, j) * w[q];
        du[p] = acc;
    }
    // dw_{j-1}[q] = sum_p GS(pq, j-1) u_{j-1}[p]
    marginals(V, n, jp, u, tmp);
    for (int q = 0; q < n; ++q) {
        double acc = 0.0;
        for (int p = 0; p < n; ++p) acc += GS(p * n + q, jp) * u[p];
        dw[q] = acc;
    }
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) GV(a * n + b, j) = du[b] + dw[a];
}

inline void softmax_column(const Mat& Z, double scale, int c, Mat& A) {
    const int R = static_cast<int>(Z.rows());
    double mx = Z(0, c);
    for (int r = 1; r < R; ++r) mx = std::max(mx, Z(r, c));
    double sum = 0.0;
    for (int r = 0; r < R; ++r) {
        double e = std::exp(scale * (Z(r, c) - mx));
        A(r, c) = e;
        sum += e;
    }
    for (int r = 0; r < R; ++r) A(r, c) /= sum;
}

inline void softmax_back_column(const Mat& A, const Mat& GA, double scale, int c, Mat& GZ) {
    const int R = static_cast<int>(A.rows());
    double dot = 0.0;
    for (int r = 0; r < R; ++r) dot += A(r, c) * GA(r, c);
    for (int r = 0; r < R; ++r) GZ(r, c) = scale * A(r, c) * (GA(r, c) - dot);
}

}  // namespace

namespace serial {

void shift_forward(const Mat& V, int n, Mat& S) {
    S.resize(V.rows(), V.cols());
    for (int j = 0; j < V.cols(); ++j) shift_column(V, n, j, S);
}

void shift_backward(const Mat& V, const Mat& GS, int n, Mat& GV) {
    GV.resize(V.rows(), V.cols());
    for (int j = 0; j < V.cols(); ++j) shift_back_column(V, GS, n, j, GV);
}

void softmax_cols(const Mat& Z, double scale, Mat& A) {
    A.resize(Z.rows(), Z.cols());
    for (int c = 0; c < Z.cols(); ++c) softmax_column(Z, scale, c, A);
}

void softmax_cols_backward(const Mat& A, const Mat& GA, double scale, Mat& GZ) {
    GZ.resize(A.rows(), A.cols());
    for (int c = 0; c < A.cols(); ++c) softmax_back_column(A, GA, scale, c, GZ);
}

}  // namespace serial

namespace omp {

void shift_forward(const Mat& V, int n, Mat& S) {
    S.resize(V.rows(), V.cols());
    const int M = static_cast<int>(V.cols());
#pragma omp parallel for schedule(static) if (M > 256)
    for (int j = 0; j < M; ++j) shift_column(V, n, j, S);
}

void shift_backward(const Mat& V, const Mat& GS, int n, Mat& GV) {
    GV.resize(V.rows(), V.cols());
    const int M = static_cast<int>(V.cols());
#pragma omp parallel for schedule(static) if (M > 256)
    for (int j = 0; j < M; ++j) shift_back_column(V, GS, n, j, GV);
}

void softmax_cols(const Mat& Z, double scale, Mat& A) {
    A.resize(Z.rows(), Z.cols());
    const int C = static_cast<int>(Z.cols());
#pragma omp parallel for schedule(static) if (C > 64)
    for (int c = 0; c < C; ++c) softmax_column(Z, scale, c, A);
}

void softmax_cols_backward(const Mat& A, const Mat& GA, double scale, Mat& GZ) {
    GZ.resize(A.rows(), A.cols());
    const int C = static_cast<int>(A.cols());
#pragma omp parallel for schedule(static) if (C > 64)
    for (int c = 0; c < C; ++c) softmax_back_column(A, GA, scale, c, GZ);
}

}  // namespace omp

}  // namespace mlt::kernels
