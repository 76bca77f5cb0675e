#include "mlt/learn.hpp"

#include <cmath>
#include <cstdio>
#include <optional>

#include "mlt/errors.hpp"
#include "mlt/kernels.hpp"

namespace mlt {

double mse_loss(const std::vector<Mat>& P, const Mat& V1, const Mat& Vtarget) {
    return (forward_continuous(P, V1) - Vtarget).squaredNorm();
}

std::vector<Mat> mse_grad_all(const std::vector<Mat>& P, const Mat& V1, const Mat& Vtarget) {
    const int d = static_cast<int>(P.size());
    const int n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(V1.rows()))));
    std::vector<Mat> V(d + 1), S(d);
    V[0] = V1;
    for (int i = 0; i < d; ++i) {
        kernels::shift_forward(V[i], n, S[i]);
        V[i + 1].noalias() = P[i] * S[i];
    }
    std::vector<Mat> grads(d);
    Mat G = 2.0 * (V[d] - Vtarget), GS;
    for (int i = d - 1; i >= 0; --i) {
        grads[i].noalias() = G * S[i].transpose();
        if (i == 0) break;
        GS.noalias() = P[i].transpose() * G;
        kernels::shift_backward(V[i], GS, n, G);
    }
    return grads;
}

Vec oracle_grad(const std::vector<Mat>& P, const Mat& V1, const Mat& Vtarget, int level, int k, double h) {
    std::vector<Mat> Q = P;
    Mat& Pi = Q.at(level - 1);
    Vec g(Pi.rows());
    for (int r = 0; r < Pi.rows(); ++r) {
        const double x = Pi(r, k);
        Pi(r, k) = x + h;
        double up = mse_loss(Q, V1, Vtarget);
        Pi(r, k) = x - h;
        double down = mse_loss(Q, V1, Vtarget);
        Pi(r, k) = x;
        g(r) = (up - down) / (2.0 * h);
    }
    return g;
}

namespace {

// Case formulas for a column of the first of two layers. Returns nothing when
// their premises fail.
std::optional<SurrogateGrad> closed_form_layer1(const std::vector<StochasticMatrix>& P, const SeqEmbedding& V1,
                                                const SeqEmbedding& Vt, int k) {
    const int n = V1.n, n2 = n * n, M = V1.cols();
    if (!P[1].is_permutation()) return std::nullopt;
    std::vector<int> S1(M), V2(M), T2(M);
    for (int j = 0; j < M; ++j) S1[j] = idx(V1.active[j] % n, V1.active[(j + 1) % M] / n, n);
    for (int j = 0; j < M; ++j) V2[j] = P[0].row_of[S1[j]];
    std::vector<int> inv(n2);
    for (int c = 0; c < n2; ++c) inv[P[1].row_of[c]] = c;
    for (int m = 0; m < M; ++m) T2[m] = inv[Vt.active[m]];  // required shifted intermediate

    const int x = P[0].row_of[k];
    const int a = x / n, b = x % n;
    int as = -1, bs = -1;  // target characters, must agree across columns
    auto agree = [](int& slot, int v) {
        if (slot == -1) slot = v;
        return slot == v;
    };
    SurrogateGrad out;
    out.grad = Vec::Zero(n2);
    out.closed_form = true;
    for (int m = 0; m < M; ++m) {
        const bool left = S1[m] == k, right = S1[(m + 1) % M] == k;
        const int s2 = idx(V2[m] % n, V2[(m + 1) % M] / n, n);
        const int t0 = T2[m] / n, t1 = T2[m] % n;
        if (!left && !right) {
            if (s2 != T2[m]) return std::nullopt;
        } else if (left && !right) {
            if (t1 != V2[(m + 1) % M] / n || !agree(bs, t0)) return std::nullopt;
            ++out.tally.alpha;
        } else if (!left && right) {
            if (t0 != V2[m] % n || !agree(as, t1)) return std::nullopt;
            ++out.tally.alpha_right;
        } else {
            if (!agree(bs, t0) || !agree(as, t1)) return std::nullopt;
            ++out.tally.beta;
        }
    }
    if (out.tally.alpha != out.tally.alpha_right) return std::nullopt;
    if (out.tally.alpha == 0 && out.tally.beta == 0) return out;  // column unused

    const double al = out.tally.alpha, be = out.tally.beta;
    Vec left_b = Vec::Zero(n2), left_bs = Vec::Zero(n2), right_a = Vec::Zero(n2), right_as = Vec::Zero(n2);
    for (int p = 0; p < n; ++p) {
        left_b(idx(p, b, n)) = 1.0;    // 1 (x) e_b
        left_bs(idx(p, bs, n)) = 1.0;  // 1 (x) e_b*
        right_a(idx(a, p, n)) = 1.0;   // e_a (x) 1
        right_as(idx(as, p, n)) = 1.0; // e_a* (x) 1
    }
    out.grad = 2.0 * al * (left_b - left_bs + right_a - right_as) +
               2.0 * be * (left_b - (a == as ? 1.0 : 0.0) * left_bs + right_a - (b == bs ? 1.0 : 0.0) * right_as);
    return out;
}

SurrogateGrad closed_form_layer2(const std::vector<StochasticMatrix>& P, const SeqEmbedding& V1,
                                 const SeqEmbedding& Vt, int k) {
    const int n = V1.n, M = V1.cols();
    std::vector<int> S1(M), V2(M);
    for (int j = 0; j < M; ++j) S1[j] = idx(V1.active[j] % n, V1.active[(j + 1) % M] / n, n);
    for (int j = 0; j < M; ++j) V2[j] = P[0].row_of[S1[j]];
    SurrogateGrad out;
    out.grad = Vec::Zero(n * n);
    out.closed_form = true;
    const int cur = P[1].row_of[k];
    for (int m = 0; m < M; ++m) {
        if (V2[m] < 0 || V2[(m + 1) % M] < 0) continue;
        if (idx(V2[m] % n, V2[(m + 1) % M] / n, n) != k) continue;
        ++out.tally.alpha;
        if (cur >= 0) out.grad(cur) += 2.0;
        out.grad(Vt.active[m]) -= 2.0;
    }
    return out;
}

bool all_one_hot(const std::vector<StochasticMatrix>& P) {
    for (const auto& p : P)
        for (int r : p.row_of)
            if (r < 0) return false;
    return true;
}

}  // namespace

SurrogateGrad surrogate_grad_col(const std::vector<StochasticMatrix>& P, const SeqEmbedding& V1,
                                 const SeqEmbedding& Vtarget, int level, int k) {
    const int d = static_cast<int>(P.size());
    if (level < 1 || level > d) throw InvalidParameter("level out of range");
    if (V1.cols() != Vtarget.cols()) throw InvalidParameter("input and target lengths differ");
    if (d == 2) {
        if (level == 2) return closed_form_layer2(P, V1, Vtarget, k);
        if (all_one_hot(P))
            if (auto cf = closed_form_layer1(P, V1, Vtarget, k)) return *cf;
    }
    std::vector<Mat> dense;
    for (const auto& p : P) dense.push_back(p.dense());
    SurrogateGrad out;
    out.grad = mse_grad_all(dense, V1.dense(), Vtarget.dense())[level - 1].col(k);
    out.closed_form = false;
    return out;
}

std::vector<double> column_match_fraction(const Weights& W, const PhrasebookSet& target) {
    std::vector<double> f;
    for (int i = 0; i < W.d(); ++i) {
        StochasticMatrix h = hardmax_cols(W.W[i]).m;
        const auto& perm = target.books[i].perm;
        int hits = 0;
        for (std::size_t c = 0; c < perm.size(); ++c) hits += h.row_of[c] == perm[c];
        f.push_back(static_cast<double>(hits) / static_cast<double>(perm.size()));
    }
    return f;
}

std::string GdTrace::to_csv() const {
    std::string out = "step,masked_level,masked_col,loss";
    const std::size_t d = rows.empty() ? 0 : rows.front().match.size();
    for (std::size_t i = 1; i <= d; ++i) out += ",match_" + std::to_string(i);
    out += '\n';
    char buf[48];
    for (const auto& r : rows) {
        out += std::to_string(r.step) + ',' + std::to_string(r.masked_level) + ',' + std::to_string(r.masked_col);
        std::snprintf(buf, sizeof buf, ",%.17g", r.loss);
        out += buf;
        for (double m : r.match) {
            std::snprintf(buf, sizeof buf, ",%.6f", m);
            out += buf;
        }
        out += '\n';
    }
    return out;
}

Gd2Result gd_d2(const PhrasebookSet& target, const SeqEmbedding& V1, const SeqEmbedding& Vtarget,
                const Weights& W_init) {
    if (target.d() != 2) throw InvalidParameter("layerwise surrogate descent is defined for d = 2");
    const int n = target.n, n2 = n * n;
    if (W_init.n != n || W_init.d() != 2) throw InvalidParameter("initial weights have the wrong shape");
    for (const auto& w : W_init.W)
        if (w.cwiseAbs().maxCoeff() >= 0.5) throw InvalidParameter("initial weights must satisfy max|W| < 1/2");

    Gd2Result res;
    res.W = W_init;
    res.updates_per_column = {2, 1};
    const ContextSet full = context_from(target);
    long long step = 0;
    for (int level = 1; level <= 2; ++level) {
        const int updates = res.updates_per_column[level - 1];
        for (int k = 0; k < n2; ++k) {
            const ContextSet ctx = drop_column(full, level, k);
            for (int u = 0; u < updates; ++u) {
                std::vector<StochasticMatrix> P = effective_matrices(res.W, ctx);
                SurrogateGrad g = surrogate_grad_col(P, V1, Vtarget, level, k);
                res.used_closed_form = res.used_closed_form && g.closed_form;
                res.W.W[level - 1].col(k) -= g.grad;
                GdTraceRow row;
                row.step = ++step;
                row.masked_level = level;
                row.masked_col = k;
                // At one-hot P every output column is one-hot, so the MSE is 2 per wrong column.
                const auto out = forward_indices(P, V1.active, n);
                int wrong = 0;
                for (std::size_t m = 0; m < out.size(); ++m) wrong += out[m] != Vtarget.active[m];
                row.loss = 2.0 * wrong;
                row.match = column_match_fraction(res.W, target);
                res.trace.rows.push_back(std::move(row));
            }
        }
    }
    const auto f = column_match_fraction(res.W, target);
    res.success = f[0] == 1.0 && f[1] == 1.0;
    if (!res.success) res.message = "HardMax(W) does not reproduce the target phrasebooks (input not coverable?)";
    return res;
}

}  // namespace mlt
