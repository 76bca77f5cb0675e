#include "mlt/tfsim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "mlt/errors.hpp"

namespace mlt::tf {

namespace {

const double kSqrtHalfPi = std::sqrt(std::acos(-1.0) / 2.0);

enum class RowKind { ignored, target, sink };
struct RowPattern {
    RowKind kind = RowKind::ignored;
    int key = -1;
};

bool gated(const Layout& lay, const Mat& X, int p, Gate g) {
    if (X(lay.seg2(), p) != 1.0) return false;
    return g == Gate::segment2 || X(lay.end(), p) != 1.0;
}

int find_marker(const Mat& X, int dim, const char* what) {
    int found = -1;
    for (int p = 0; p < X.cols(); ++p) {
        if (X(dim, p) != 1.0) continue;
        if (found >= 0) throw LayoutError(std::string("more than one ") + what + " marker");
        found = p;
    }
    return found;
}

int argmax_block(const Mat& X, int p, int from, int len, double* best_out = nullptr) {
    int best = 0;
    for (int r = 1; r < len; ++r)
        if (X(from + r, p) > X(from + best, p)) best = r;
    if (best_out) *best_out = X(from + best, p);
    return best;
}

// The start row of a shift stage becomes a THINK position, so its output is ignored.
RowPattern row_pattern(const Layout& lay, const Mat& X, const EmbSeq& cur, PatternKind kind, int p, int start_pos,
                       bool shift_stage) {
    RowPattern rp;
    if (shift_stage && X(lay.start(), p) == 1.0) return rp;
    switch (kind) {
        case PatternKind::previous:
            if (p >= 1 && !cur.is_null(p - 1)) rp = {RowKind::target, p - 1};
            break;
        case PatternKind::self:
            rp = {RowKind::target, p};
            break;
        case PatternKind::end_to_start:
            if (X(lay.end(), p) == 1.0) {
                if (start_pos >= 0 && start_pos < p) rp = {RowKind::target, start_pos};
            } else {
                rp = {RowKind::sink, -1};
            }
            break;
        case PatternKind::context_match: {
            double mod_max = 0.0, tok_max = 0.0;
            const int level = argmax_block(X, p, lay.mod(), lay.d, &mod_max);
            const int r = argmax_block(X, p, lay.tok_a(), lay.n2(), &tok_max);
            if (mod_max <= 0.0 || tok_max <= 0.0) break;
            rp = {RowKind::target, level * lay.n2() + r};
            break;
        }
    }
    return rp;
}

// Applies one attention layer; returns the token-block update for gated rows.
void attention(const TransformerModel& model, const AttnLayer& layer, EmbSeq& cur, ForwardReport& rep) {
    const Layout& lay = cur.layout;
    const Mat& X = cur.X;
    const int P = cur.positions();
    const int start_pos = find_marker(X, lay.start(), "start");
    const bool shift_stage = layer.gate == Gate::segment2;
    Mat Y = Mat::Zero(X.rows(), P);
    std::vector<int> rows;
    for (int p = 0; p < P; ++p)
        if (gated(lay, X, p, layer.gate)) rows.push_back(p);

    for (const AttnHead& h : layer.heads) {
        const Mat V = h.Wv * X;
        if (model.mode == AttnMode::hard) {
            for (int p : rows) {
                const RowPattern rp = row_pattern(lay, X, cur, h.pattern, p, start_pos, shift_stage);
                Vec a = Vec::Zero(P);
                if (rp.kind == RowKind::target) a(rp.key) = 1.0;
                double sum = 0.0;
                for (int k = 0; k < P; ++k) {
                    if (a(k) != 0.0 && a(k) != 1.0) rep.hard_patterns_exact = false;
                    sum += a(k);
                }
                if (sum != 0.0 && sum != 1.0) rep.hard_patterns_exact = false;
                Y.col(p) += V * a;
            }
            continue;
        }
        const Mat Q = h.Wq * X;
        const Mat K = h.Wk * X;
        for (int p : rows) {
            Vec logit = Vec::Constant(P, -std::numeric_limits<double>::infinity());
            double mx = -std::numeric_limits<double>::infinity();
            for (int k = 0; k <= p; ++k) {
                if (cur.is_null(k)) continue;
                const std::size_t t = static_cast<std::size_t>(p - k);
                const double bias = t < h.rel_bias.size() ? h.rel_bias[t] : 0.0;
                logit(k) = Q.col(p).dot(K.col(k)) + bias;
                mx = std::max(mx, logit(k));
            }
            Vec a = Vec::Zero(P);
            double z = 0.0;
            for (int k = 0; k <= p; ++k) {
                if (std::isinf(logit(k))) continue;
                a(k) = std::exp(logit(k) - mx);
                z += a(k);
            }
            a /= z;
            Y.col(p) += V * a;

            const RowPattern rp = row_pattern(lay, X, cur, h.pattern, p, start_pos, shift_stage);
            double off = 0.0;
            if (rp.kind == RowKind::target) {
                for (int k = 0; k < P; ++k)
                    if (k != rp.key) off += a(k);
            } else if (rp.kind == RowKind::sink) {
                for (int k = 0; k < P; ++k)
                    if (X(lay.seg1(), k) != 1.0) off += a(k);
            }
            rep.max_offpattern_mass = std::max(rep.max_offpattern_mass, off);
        }
    }
    const int tok = 2 * lay.n2();
    for (int p : rows) cur.X.col(p).head(tok) = Y.col(p).head(tok);
}

void mlp(const TransformerModel& model, const MlpLayer& layer, EmbSeq& cur, ForwardReport& rep) {
    const Layout& lay = cur.layout;
    const int P = cur.positions();
    const int tok = 2 * lay.n2();
    const double N2 = model.N * model.N;
    for (int p = 0; p < P; ++p) {
        if (!gated(lay, cur.X, p, layer.gate)) continue;
        const Vec hidden = layer.W_inner * cur.X.col(p);
        const Vec act = hidden.unaryExpr([](double v) { return gelu(v); });
        Vec out = layer.W_outer * act;
        if (layer.product_stage && cur.X(lay.start(), p) != 1.0) {
            for (int k = 0; k < hidden.size() / 3; ++k) {
                const double exact = hidden(3 * k + 1) * hidden(3 * k + 2);
                const double err = std::abs(out(k) / N2 - exact);
                rep.max_product_residual = std::max(rep.max_product_residual, err);
                rep.max_product_residual_scaled = std::max(rep.max_product_residual_scaled, err * N2);
            }
        }
        if (layer.l2_normalize) {
            const double norm = out.head(lay.n2()).norm();
            if (norm > 0.0)
                out.head(lay.n2()) /= norm;
            else
                ++rep.zero_columns;
        }
        cur.X.col(p).head(tok) = out.head(tok);
    }
}

// Re-stamps the markers after a shift stage: the start position becomes a
// THINK (null) position, the start marker moves right by one and the end
// marker moves onto the next padding position, which joins the second segment.
void shift_bookkeeping(EmbSeq& cur, int module) {
    const Layout& lay = cur.layout;
    Mat& X = cur.X;
    const int P = cur.positions();
    const int s = find_marker(X, lay.start(), "start");
    const int e = find_marker(X, lay.end(), "end");
    if (s < 0 || e < 0 || s + 1 >= P) throw LayoutError("second segment lost its start or end marker");
    X.col(s).setZero();
    X(lay.start(), s + 1) = 1.0;
    X(lay.end(), e) = 0.0;
    if (e + 1 < P) {
        X(lay.end(), e + 1) = 1.0;
        X(lay.seg2(), e + 1) = 1.0;
        X.col(e + 1).segment(lay.mod(), lay.d).setZero();
        X(lay.mod() + module, e + 1) = 1.0;
    }
}

void advance_module(EmbSeq& cur, int next) {
    const Layout& lay = cur.layout;
    for (int p = 0; p < cur.positions(); ++p) {
        if (cur.X(lay.seg2(), p) != 1.0) continue;
        cur.X.col(p).segment(lay.mod(), lay.d).setZero();
        cur.X(lay.mod() + next, p) = 1.0;
    }
}

std::string gate_name(Gate g) { return g == Gate::segment2 ? "segment2" : "segment2_not_end"; }

std::string pattern_name(PatternKind k) {
    switch (k) {
        case PatternKind::previous: return "previous";
        case PatternKind::self: return "self";
        case PatternKind::end_to_start: return "end_to_start";
        case PatternKind::context_match: return "context_match";
    }
    return "?";
}

void dump_matrix(std::string& out, const char* name, const Mat& M) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s %d %d\n", name, static_cast<int>(M.rows()), static_cast<int>(M.cols()));
    out += buf;
    for (int r = 0; r < M.rows(); ++r) {
        for (int c = 0; c < M.cols(); ++c) {
            std::snprintf(buf, sizeof buf, c ? " %.17g" : "%.17g", M(r, c));
            out += buf;
        }
        out += '\n';
    }
}

}  // namespace

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

double gelu_product(double x, double y) { return kSqrtHalfPi * (gelu(x + y) - gelu(x) - gelu(y)); }

double gelu_product_residual(double x, double y) {
    const double s = x + y;
    return -(s * s * s * s - x * x * x * x - y * y * y * y) / 12.0;
}

std::string to_string(AttnMode m) { return m == AttnMode::hard ? "hard" : "saturated"; }

bool EmbSeq::is_null(int p) const { return X(layout.seg1(), p) == 0.0 && X(layout.seg2(), p) == 0.0; }

TransformerModel build_transformer(int n, int d, const Weights& W, AttnMode mode, double N, double Lambda) {
    if (n < 2) throw InvalidParameter("alphabet size must be >= 2");
    if (d < 1) throw InvalidParameter("depth must be >= 1");
    if (W.n != n || W.d() != d) throw InvalidParameter("weights do not match (n, d)");
    if (!(N > 0.0) || !(Lambda > 0.0)) throw InvalidParameter("N and Lambda must be positive");
    TransformerModel m;
    m.layout = Layout{n, d};
    m.N = N;
    m.Lambda = Lambda;
    m.mode = mode;
    const Layout& lay = m.layout;
    const int D = lay.width(), n2 = lay.n2();
    const double out_scale = kSqrtHalfPi * N * N;

    for (int i = 0; i < d; ++i) {
        Module mod;

        AttnHead prev;
        prev.pattern = PatternKind::previous;
        prev.Wq = prev.Wk = prev.Wv = Mat::Zero(D, D);
        prev.rel_bias = {0.0, Lambda};
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) prev.Wv(b, a * n + b) = 1.0;

        AttnHead self;
        self.pattern = PatternKind::self;
        self.Wq = self.Wk = self.Wv = Mat::Zero(D, D);
        self.rel_bias = {Lambda};
        for (int c = 0; c < n; ++c)
            for (int e = 0; e < n; ++e) self.Wv(n + c, c * n + e) = 1.0;

        // Score 2 Lambda on the start marker for the end row, Lambda on every
        // first-segment key otherwise. The first segment holds each token index
        // once per level, so its mean value is exactly zero after the level
        // correction and rows away from the end receive nothing.
        AttnHead wrap;
        wrap.pattern = PatternKind::end_to_start;
        wrap.Wq = wrap.Wk = Mat::Zero(D, D);
        wrap.Wv = self.Wv;
        wrap.Wq(0, lay.end()) = 2.0 * Lambda;
        wrap.Wq(1, lay.seg2()) = Lambda;
        wrap.Wk(0, lay.start()) = 1.0;
        wrap.Wk(1, lay.seg1()) = 1.0;
        for (int c = 0; c < n; ++c)
            for (int l = 0; l < d; ++l) wrap.Wv(n + c, lay.lvl() + l) = -1.0 / n;

        mod.shift_attn.heads = {prev, self, wrap};
        mod.shift_attn.gate = Gate::segment2;

        mod.shift_mlp.W_inner = Mat::Zero(3 * n2, D);
        mod.shift_mlp.W_outer = Mat::Zero(D, 3 * n2);
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c) {
                const int k = b * n + c;
                mod.shift_mlp.W_inner(3 * k, b) = 1.0 / N;
                mod.shift_mlp.W_inner(3 * k, n + c) = 1.0 / N;
                mod.shift_mlp.W_inner(3 * k + 1, b) = 1.0 / N;
                mod.shift_mlp.W_inner(3 * k + 2, n + c) = 1.0 / N;
                mod.shift_mlp.W_outer(k, 3 * k) = out_scale;
                mod.shift_mlp.W_outer(k, 3 * k + 1) = -out_scale;
                mod.shift_mlp.W_outer(k, 3 * k + 2) = -out_scale;
            }
        mod.shift_mlp.product_stage = true;
        mod.shift_mlp.gate = Gate::segment2;

        // Score Lambda(<e_r, V> + <l_level, l_module> + seg2(q) seg1(k)): 3 Lambda
        // on the wanted context token, at most 2 Lambda anywhere else.
        AttnHead match;
        match.pattern = PatternKind::context_match;
        match.Wq = match.Wk = match.Wv = Mat::Zero(D, D);
        for (int r = 0; r < n2; ++r) {
            match.Wq(r, r) = Lambda;
            match.Wk(r, r) = 1.0;
            match.Wv(r, n2 + r) = 1.0;
        }
        for (int l = 0; l < d; ++l) {
            match.Wq(lay.lvl() + l, lay.mod() + l) = Lambda;
            match.Wk(lay.lvl() + l, lay.lvl() + l) = 1.0;
        }
        match.Wq(lay.seg1(), lay.seg2()) = Lambda;
        match.Wk(lay.seg1(), lay.seg1()) = 1.0;

        AttnHead keep;
        keep.pattern = PatternKind::self;
        keep.Wq = keep.Wk = keep.Wv = Mat::Zero(D, D);
        keep.rel_bias = {Lambda};
        for (int r = 0; r < n2; ++r) keep.Wv(n2 + r, r) = 1.0;

        mod.translate_attn.heads = {match, keep};
        mod.translate_attn.gate = Gate::segment2_not_end;

        mod.translate_mlp.W_inner = Mat::Zero(n2, D);
        mod.translate_mlp.W_outer = Mat::Zero(D, n2);
        for (int r = 0; r < n2; ++r) {
            mod.translate_mlp.W_inner(r, r) = 1.0;
            mod.translate_mlp.W_outer(r, r) = 1.0;
        }
        mod.translate_mlp.W_inner.block(0, n2, n2, n2) = W.W[i];
        mod.translate_mlp.l2_normalize = true;
        mod.translate_mlp.gate = Gate::segment2_not_end;

        m.modules.push_back(std::move(mod));
    }
    return m;
}

EmbSeq encode_input(const ContextSet& ctx, const Sequence& s) {
    const int n = ctx.n, d = ctx.d();
    if (d < 1) throw LayoutError("at least one context matrix is required");
    if (s.n != n) throw LayoutError("sequence alphabet does not match the contexts");
    const int L = static_cast<int>(s.chars.size());
    if (L < 2 || L % 2 != 0) throw LayoutError("sequence length must be even and >= 2");
    const int n2 = n * n;
    for (const Mat& C : ctx.C) {
        if (C.rows() != n2 || C.cols() != n2) throw LayoutError("context matrix has the wrong shape");
        for (int j = 0; j < n2; ++j) {
            int ones = 0;
            for (int r = 0; r < n2; ++r) {
                if (C(r, j) == 1.0)
                    ++ones;
                else if (C(r, j) != 0.0)
                    throw LayoutError("context columns must be one-hot or zero");
            }
            if (ones > 1) throw LayoutError("context columns must be one-hot or zero");
        }
    }
    EmbSeq e;
    e.layout = Layout{n, d};
    const Layout& lay = e.layout;
    const int M = L / 2;
    const int P = n2 * d + M + d;
    e.X = Mat::Zero(lay.width(), P);
    for (int l = 0; l < d; ++l)
        for (int j = 0; j < n2; ++j) {
            const int p = l * n2 + j;
            e.X(lay.tok_a() + j, p) = 1.0;
            e.X.col(p).segment(lay.tok_b(), n2) = ctx.C[l].col(j);
            e.X(lay.lvl() + l, p) = 1.0;
            e.X(lay.seg1(), p) = 1.0;
        }
    const SeqEmbedding V = mat(s);
    for (int j = 0; j < M; ++j) {
        const int p = n2 * d + j;
        e.X(lay.tok_a() + V.active[j], p) = 1.0;
        e.X(lay.mod(), p) = 1.0;
        e.X(lay.seg2(), p) = 1.0;
    }
    e.X(lay.start(), n2 * d) = 1.0;
    const int pad = n2 * d + M;
    e.X(lay.end(), pad) = 1.0;
    e.X(lay.seg2(), pad) = 1.0;
    e.X(lay.mod(), pad) = 1.0;
    return e;
}

EmbSeq transformer_forward(const TransformerModel& model, const ContextSet& ctx, const EmbSeq& in,
                           ForwardReport* report) {
    const Layout& lay = in.layout;
    if (lay.n != model.layout.n || lay.d != model.layout.d || in.X.rows() != model.width())
        throw LayoutError("embedding layout does not match the model");
    if (ctx.n != lay.n || ctx.d() != lay.d) throw LayoutError("contexts do not match the model");
    ForwardReport rep;
    const int n2 = lay.n2();
    for (int i = 0; i < lay.d; ++i) {
        const Mat Wi = model.modules[i].translate_mlp.W_inner.block(0, n2, n2, n2);
        for (int j = 0; j < n2; ++j)
            if (ctx.C[i].col(j).any() && Wi.col(j).any()) ++rep.conflicting_columns;
    }
    EmbSeq cur = in;
    for (int i = 0; i < lay.d; ++i) {
        const Module& mod = model.modules[i];
        attention(model, mod.shift_attn, cur, rep);
        mlp(model, mod.shift_mlp, cur, rep);
        shift_bookkeeping(cur, i);
        attention(model, mod.translate_attn, cur, rep);
        mlp(model, mod.translate_mlp, cur, rep);
        if (i + 1 < lay.d) advance_module(cur, i + 1);
    }
    if (report) *report = rep;
    return cur;
}

Decoded decode_output(const EmbSeq& out) {
    const Layout& lay = out.layout;
    Decoded dec;
    SeqEmbedding V;
    V.n = lay.n;
    for (int p = 0; p < out.positions(); ++p) {
        if (out.X(lay.seg2(), p) != 1.0 || out.X(lay.end(), p) == 1.0) continue;
        double best = 0.0;
        const int r = argmax_block(out.X, p, lay.tok_a(), lay.n2(), &best);
        if (best < 0.5) throw NonDecodable("low-confidence column at position " + std::to_string(p));
        for (int k = 0; k < lay.n2(); ++k)
            if (k != r && out.X(lay.tok_a() + k, p) == best)
                throw NonDecodable("tied column at position " + std::to_string(p));
        dec.min_confidence = std::min(dec.min_confidence, best);
        V.active.push_back(r);
    }
    if (V.active.empty()) throw NonDecodable("no second-segment columns to decode");
    dec.s = unmat(V);
    return dec;
}

std::string dump_model(const TransformerModel& model) {
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "MLT-TF v1 n=%d d=%d N=%.17g Lambda=%.17g mode=%s width=%d layers=%d\n",
                  model.layout.n, model.layout.d, model.N, model.Lambda, to_string(model.mode).c_str(),
                  model.width(), model.layer_count());
    out += buf;
    int index = 0;
    auto attn = [&](const AttnLayer& l) {
        std::snprintf(buf, sizeof buf, "layer %d attention heads=%d gate=%s\n", index++,
                      static_cast<int>(l.heads.size()), gate_name(l.gate).c_str());
        out += buf;
        for (const auto& h : l.heads) {
            out += "head pattern=" + pattern_name(h.pattern) + " bias";
            for (double b : h.rel_bias) {
                std::snprintf(buf, sizeof buf, " %.17g", b);
                out += buf;
            }
            out += '\n';
            dump_matrix(out, "Wq", h.Wq);
            dump_matrix(out, "Wk", h.Wk);
            dump_matrix(out, "Wv", h.Wv);
        }
    };
    auto ff = [&](const MlpLayer& l) {
        std::snprintf(buf, sizeof buf, "layer %d mlp activation=gelu product=%d normalize=%d gate=%s\n", index++,
                      l.product_stage ? 1 : 0, l.l2_normalize ? 1 : 0, gate_name(l.gate).c_str());
        out += buf;
        dump_matrix(out, "W_inner", l.W_inner);
        dump_matrix(out, "W_outer", l.W_outer);
    };
    for (const auto& m : model.modules) {
        attn(m.shift_attn);
        ff(m.shift_mlp);
        attn(m.translate_attn);
        ff(m.translate_mlp);
    }
    return out;
}

}  // namespace mlt::tf
