#include "mlt/surrogate.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "mlt/errors.hpp"
#include "mlt/kernels.hpp"
#include "mlt/rng.hpp"

namespace mlt {

namespace {

void check_dims(const Weights& W, const ContextSet& C, int n) {
    if (W.n != n || C.n != n) throw InvalidParameter("alphabet mismatch between weights, context and input");
    if (W.d() != C.d()) throw InvalidParameter("weights and context have different depth");
}

}  // namespace

ContextSet ContextSet::zeros(int n, int d) {
    ContextSet c{n, {}};
    for (int i = 0; i < d; ++i) c.C.push_back(Mat::Zero(n * n, n * n));
    return c;
}

Weights Weights::zeros(int n, int d) {
    Weights w{n, {}};
    for (int i = 0; i < d; ++i) w.W.push_back(Mat::Zero(n * n, n * n));
    return w;
}

Hardmax hardmax_cols(const Mat& M) {
    const int R = static_cast<int>(M.rows());
    int n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(R))));
    Hardmax h{StochasticMatrix{n, std::vector<int>(M.cols())}, false};
    for (int c = 0; c < M.cols(); ++c) {
        int best = 0;
        for (int r = 1; r < R; ++r) {
            if (M(r, c) > M(best, c))
                best = r;
        }
        for (int r = best + 1; r < R && !h.tie; ++r)
            if (M(r, c) == M(best, c)) h.tie = true;
        h.m.row_of[c] = best;
    }
    return h;
}

std::vector<StochasticMatrix> effective_matrices(const Weights& W, const ContextSet& C, bool* tie) {
    check_dims(W, C, W.n);
    std::vector<StochasticMatrix> P;
    bool any = false;
    for (int i = 0; i < W.d(); ++i) {
        Hardmax h = hardmax_cols(C.C[i] + W.W[i]);
        any = any || h.tie;
        P.push_back(std::move(h.m));
    }
    if (tie) *tie = any;
    return P;
}

std::vector<int> forward_indices(const std::vector<StochasticMatrix>& P, const std::vector<int>& v1, int n) {
    std::vector<int> cur = v1, next(v1.size());
    const int M = static_cast<int>(v1.size());
    for (const auto& Pi : P) {
        for (int j = 0; j < M; ++j) {
            int x = cur[j], y = cur[(j + 1) % M];
            next[j] = (x < 0 || y < 0) ? -1 : Pi.row_of[idx(x % n, y / n, n)];
        }
        std::swap(cur, next);
    }
    return cur;
}

SeqEmbedding forward_hard(const Weights& W, const ContextSet& C, const SeqEmbedding& V, bool* tie) {
    check_dims(W, C, V.n);
    auto P = effective_matrices(W, C, tie);
    return SeqEmbedding{V.n, forward_indices(P, V.active, V.n)};
}

Mat forward_soft(const Weights& W, const ContextSet& C, const Mat& V, double scale) {
    check_dims(W, C, W.n);
    const int n = W.n;
    Mat cur = V, S, A;
    for (int i = 0; i < W.d(); ++i) {
        kernels::softmax_cols(C.C[i] + W.W[i], scale, A);
        kernels::shift_forward(cur, n, S);
        cur.noalias() = A * S;
    }
    return cur;
}

Mat forward_continuous(const std::vector<Mat>& P, const Mat& V) {
    const int n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(V.rows()))));
    Mat cur = V, S;
    for (const auto& Pi : P) {
        kernels::shift_forward(cur, n, S);
        cur.noalias() = Pi * S;
    }
    return cur;
}

bool context_augmented_equivalent(const Weights& W, const ContextSet& C, const SeqEmbedding& V) {
    check_dims(W, C, V.n);
    const int n = V.n, n2 = n * n, d = W.d(), M = V.cols();
    Mat X(n2, d * n2 + M);
    for (int i = 0; i < d; ++i) X.middleCols(i * n2, n2) = C.C[i];
    X.rightCols(M) = V.dense();
    for (int i = 0; i < d; ++i) {
        Mat Ci = X.middleCols(i * n2, n2);
        Mat P = hardmax_cols(Ci + W.W[i]).m.dense();
        Mat S;
        kernels::shift_forward(X.rightCols(M), n, S);
        Mat next(n2, d * n2 + M);
        next.leftCols(d * n2) = X.leftCols(d * n2);
        next.rightCols(M) = P * S;
        X = std::move(next);
    }
    for (int i = 0; i < d; ++i)
        if (X.middleCols(i * n2, n2) != C.C[i]) return false;
    return X.rightCols(M) == forward_hard(W, C, V).dense();
}

ContextSet context_from(const PhrasebookSet& pset) {
    ContextSet c{pset.n, {}};
    for (const auto& pb : pset.books) c.C.push_back(matrix_of(pb).dense());
    return c;
}

ContextSet drop_column(const ContextSet& C, int level, int k) {
    const int n2 = C.n * C.n;
    if (level < 1 || level > C.d()) throw InvalidParameter("level out of range");
    if (k < 0 || k >= n2) throw InvalidParameter("column out of range");
    ContextSet out = C;
    out.C[level - 1].col(k).setZero();
    return out;
}

DropResult random_drop(const PhrasebookSet& pset, const DropoutSpec& spec, std::uint64_t seed) {
    const int d = pset.d(), n2 = pset.n * pset.n;
    const bool use_mask = !spec.mask.empty();
    if (use_mask) {
        if (static_cast<int>(spec.mask.size()) != d) throw InvalidParameter("dropout mask must have d rows");
        for (const auto& row : spec.mask)
            if (static_cast<int>(row.size()) != n2) throw InvalidParameter("dropout mask rows must have n^2 entries");
    } else {
        if (static_cast<int>(spec.p.size()) != d) throw InvalidParameter("need one drop probability per level");
        for (double p : spec.p)
            if (!(p >= 0.0 && p <= 1.0)) throw InvalidParameter("drop probability outside [0,1]");
    }
    DropResult r{context_from(pset), std::vector<std::vector<bool>>(d, std::vector<bool>(n2, true))};
    Rng rng(seed);
    for (int i = 0; i < d; ++i)
        for (int k = 0; k < n2; ++k) {
            bool drop = use_mask ? spec.mask[i][k] : rng.bernoulli(spec.p[i]);
            if (drop) {
                r.retained[i][k] = false;
                r.ctx.C[i].col(k).setZero();
            }
        }
    return r;
}

bool is_coverable(const PhrasebookSet& pset, const Sequence& s) {
    const int n2 = s.n * s.n;
    if (s.length() / 2 < n2) return false;
    Intermediates im = intermediates(pset, s);
    for (const auto& sh : im.shifted) {
        std::vector<bool> seen(n2, false);
        int count = 0;
        for (int j = 0; j + 1 < sh.length(); j += 2) {
            int t = idx(sh.chars[j], sh.chars[j + 1], s.n);
            if (!seen[t]) {
                seen[t] = true;
                ++count;
            }
        }
        if (count < n2) return false;
    }
    return true;
}

int coverable_length(int n, int d, double delta) {
    if (!(delta > 0.0 && delta < 1.0)) throw InvalidParameter("delta must lie in (0,1)");
    double half = std::ceil(static_cast<double>(n) * n * std::log(static_cast<double>(n) * d / delta));
    return 2 * static_cast<int>(half);
}

CoverableSample sample_coverable(const PhrasebookSet& pset, double delta, std::uint64_t seed, int max_attempts) {
    const int L = coverable_length(pset.n, pset.d(), delta);
    for (int a = 1; a <= max_attempts; ++a) {
        Sequence s = uniform_sequence(pset.n, L, derive_seed(seed, a));
        if (is_coverable(pset, s)) return {s, a};
    }
    throw SamplingFailure("no coverable sequence of length " + std::to_string(L) + " within " +
                          std::to_string(max_attempts) + " attempts");
}

std::string format_matrices(const std::vector<Mat>& mats, int n) {
    std::string out = "MLT-MATS v1 d=" + std::to_string(mats.size()) + " n=" + std::to_string(n) + "\n";
    char buf[40];
    for (const auto& m : mats)
        for (int r = 0; r < m.rows(); ++r) {
            for (int c = 0; c < m.cols(); ++c) {
                std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
                if (c) out += ' ';
                out += buf;
            }
            out += '\n';
        }
    return out;
}

std::vector<Mat> parse_matrices(const std::string& text, int* n_out) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line)) throw ParseError("empty matrix file");
    int d = 0, n = 0;
    if (std::sscanf(line.c_str(), "MLT-MATS v1 d=%d n=%d", &d, &n) != 2 || d < 0 || n < 2)
        throw ParseError("expected header 'MLT-MATS v1 d=<d> n=<n>'", 1, 1);
    const int n2 = n * n;
    std::vector<Mat> mats;
    int lineno = 1;
    for (int i = 0; i < d; ++i) {
        Mat m(n2, n2);
        for (int r = 0; r < n2; ++r) {
            if (!std::getline(is, line)) throw ParseError("truncated matrix data", lineno + 1, 1);
            ++lineno;
            std::istringstream ls(line);
            for (int c = 0; c < n2; ++c)
                if (!(ls >> m(r, c))) throw ParseError("expected " + std::to_string(n2) + " numbers", lineno, 1);
            std::string extra;
            if (ls >> extra) throw ParseError("too many numbers on row", lineno, 1);
        }
        mats.push_back(std::move(m));
    }
    if (n_out) *n_out = n;
    return mats;
}

}  // namespace mlt
