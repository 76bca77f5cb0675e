#pragma once

#include "mlt/embed.hpp"

// Dense column kernels used by the soft surrogate. Each exists as a serial
// reference and an OpenMP version; work is split by column and every output
// entry is reduced in the same order, so the two agree bit for bit.
namespace mlt::kernels {

namespace serial {
// S(:,j) = u_j (x) w_{j+1}, u_j = marginal of the second character of column j,
// w_{j+1} = marginal of the first character of column j+1 (mod M).
void shift_forward(const Mat& V, int n, Mat& S);
// Gradient of a loss w.r.t. V given its gradient GS w.r.t. S = shift(V).
void shift_backward(const Mat& V, const Mat& GS, int n, Mat& GV);
// A(:,c) = softmax(scale * Z(:,c)).
void softmax_cols(const Mat& Z, double scale, Mat& A);
// GZ = d/dZ given GA = d/dA, for A = softmax_cols(Z, scale).
void softmax_cols_backward(const Mat& A, const Mat& GA, double scale, Mat& GZ);
}  // namespace serial

namespace omp {
void shift_forward(const Mat& V, int n, Mat& S);
void shift_backward(const Mat& V, const Mat& GS, int n, Mat& GV);
void softmax_cols(const Mat& Z, double scale, Mat& A);
void softmax_cols_backward(const Mat& A, const Mat& GA, double scale, Mat& GZ);
}  // namespace omp

// The library calls these; they forward to the OpenMP versions.
using omp::shift_backward;
using omp::shift_forward;
using omp::softmax_cols;
using omp::softmax_cols_backward;

}  // namespace mlt::kernels
