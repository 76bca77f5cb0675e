#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mlt/core.hpp"

namespace mlt {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// One-hot column matrix of a sequence: column j is active at idx(s_2j, s_2j+1).
// Stored as the list of active indices; dense() builds the n^2 x (L/2) view.
struct SeqEmbedding {
    int n = 0;
    std::vector<int> active;

    int cols() const { return static_cast<int>(active.size()); }
    Mat dense() const;
    bool operator==(const SeqEmbedding&) const = default;
};

// Reads back a dense matrix whose columns must be exactly one-hot.
SeqEmbedding from_dense(const Mat& m, int n);

// n^2 x n^2 binary matrix whose columns are one-hot (row_of[c] >= 0) or
// all-zero (row_of[c] == -1).
struct StochasticMatrix {
    int n = 0;
    std::vector<int> row_of;

    static StochasticMatrix identity(int n);
    Mat dense() const;
    // Applies the matrix to one-hot columns; a zero column yields -1.
    std::vector<int> apply(const std::vector<int>& cols) const;
    bool is_permutation() const;
    bool operator==(const StochasticMatrix&) const = default;
};

SeqEmbedding mat(const Sequence& s);
Sequence unmat(const SeqEmbedding& V);

// Index-level circular shift of the embedding: column j becomes e_b (x) e_c
// where column j is (a,b) and column j+1 (mod M) is (c,d).
SeqEmbedding shift_op(const SeqEmbedding& V);

// Q = (I (x) 1)(1 (x) I)^T built from Kronecker products.
Mat q_matrix(int n);

// Shift on arbitrary real columns, evaluated literally as Q V_j .* Q^T V_{j+1}.
Mat shift_dense_formula(const Mat& V, int n);

StochasticMatrix matrix_of(const Phrasebook& pb);

}  // namespace mlt
