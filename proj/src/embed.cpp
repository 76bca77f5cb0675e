#include "mlt/embed.hpp"

#include <algorithm>

#include "mlt/errors.hpp"

namespace mlt {

Mat SeqEmbedding::dense() const {
    Mat m = Mat::Zero(n * n, cols());
    for (int j = 0; j < cols(); ++j) m(active[j], j) = 1.0;
    return m;
}

SeqEmbedding from_dense(const Mat& m, int n) {
    if (m.rows() != n * n) throw InvalidParameter("embedding must have n^2 rows");
    SeqEmbedding V{n, std::vector<int>(m.cols())};
    for (int j = 0; j < m.cols(); ++j) {
        int hot = -1;
        for (int r = 0; r < m.rows(); ++r) {
            double x = m(r, j);
            if (x == 1.0 && hot == -1)
                hot = r;
            else if (x != 0.0)
                throw NonDecodable("column " + std::to_string(j) + " is not one-hot");
        }
        if (hot == -1) throw NonDecodable("column " + std::to_string(j) + " is all zero");
        V.active[j] = hot;
    }
    return V;
}

StochasticMatrix StochasticMatrix::identity(int n) {
    StochasticMatrix s{n, std::vector<int>(n * n)};
    for (int i = 0; i < n * n; ++i) s.row_of[i] = i;
    return s;
}

Mat StochasticMatrix::dense() const {
    Mat m = Mat::Zero(n * n, n * n);
    for (int c = 0; c < n * n; ++c)
        if (row_of[c] >= 0) m(row_of[c], c) = 1.0;
    return m;
}

std::vector<int> StochasticMatrix::apply(const std::vector<int>& cols) const {
    std::vector<int> out(cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j) out[j] = cols[j] < 0 ? -1 : row_of[cols[j]];
    return out;
}

bool StochasticMatrix::is_permutation() const {
    std::vector<int> r = row_of;
    std::sort(r.begin(), r.end());
    for (std::size_t i = 0; i < r.size(); ++i)
        if (r[i] != static_cast<int>(i)) return false;
    return true;
}

SeqEmbedding mat(const Sequence& s) {
    if (s.length() % 2 != 0) throw InvalidParameter("sequence length must be even");
    SeqEmbedding V{s.n, std::vector<int>(s.chars.size() / 2)};
    for (int j = 0; j < V.cols(); ++j) V.active[j] = idx(s.chars[2 * j], s.chars[2 * j + 1], s.n);
    return V;
}

Sequence unmat(const SeqEmbedding& V) {
    Sequence s{V.n, std::vector<int>(2 * V.active.size())};
    for (int j = 0; j < V.cols(); ++j) {
        int t = V.active[j];
        if (t < 0 || t >= V.n * V.n) throw NonDecodable("column " + std::to_string(j) + " is not one-hot");
        s.chars[2 * j] = t / V.n;
        s.chars[2 * j + 1] = t % V.n;
    }
    return s;
}

SeqEmbedding shift_op(const SeqEmbedding& V) {
    const int M = V.cols();
    const int n = V.n;
    SeqEmbedding out{n, std::vector<int>(M)};
    for (int j = 0; j < M; ++j) {
        int b = V.active[j] % n;
        int c = V.active[(j + 1) % M] / n;
        out.active[j] = idx(b, c, n);
    }
    return out;
}

Mat q_matrix(int n) {
    // (I_n (x) 1_n) is n^2 x n, (1_n (x) I_n) is n^2 x n.
    Mat I = Mat::Identity(n, n);
    Vec one = Vec::Ones(n);
    Mat left(n * n, n), right(n * n, n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            left.row(a * n + b) = I.row(a) * one(b);
            right.row(a * n + b) = one(a) * I.row(b);
        }
    return left * right.transpose();
}

Mat shift_dense_formula(const Mat& V, int n) {
    const Mat Q = q_matrix(n);
    const int M = static_cast<int>(V.cols());
    Mat out(V.rows(), M);
    for (int j = 0; j < M; ++j)
        out.col(j) = (Q * V.col(j)).cwiseProduct(Q.transpose() * V.col((j + 1) % M));
    return out;
}

StochasticMatrix matrix_of(const Phrasebook& pb) {
    validate(pb);
    return StochasticMatrix{pb.n, pb.perm};
}

}  // namespace mlt
