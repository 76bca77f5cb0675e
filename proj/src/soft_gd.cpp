#include "mlt/learn.hpp"

#include <algorithm>
#include <cmath>

#include "mlt/errors.hpp"
#include "mlt/kernels.hpp"
#include "mlt/rng.hpp"

namespace mlt {

namespace {

constexpr double kTiny = 1e-300;

// Softmax surrogate with cached activations. Levels below `dirty` are reused
// from the previous evaluation, which is what makes layerwise training cheap:
// a step on level i leaves levels 1..i-1 untouched.
class SoftModel {
public:
    SoftModel(int n, int d, const Mat& V1, const std::vector<int>& target, double scale)
        : n_(n), d_(d), scale_(scale), target_(target), A_(d), V_(d + 1), S_(d) {
        V_[0] = V1;
    }

    void invalidate(int level) { dirty_ = std::min(dirty_, level); }

    double forward(const Weights& W, const ContextSet& C) {
        for (int i = dirty_; i < d_; ++i) {
            kernels::softmax_cols(C.C[i] + W.W[i], scale_, A_[i]);
            kernels::shift_forward(V_[i], n_, S_[i]);
            V_[i + 1].noalias() = A_[i] * S_[i];
        }
        dirty_ = d_;
        double loss = 0.0;
        const Mat& out = V_[d_];
        for (int m = 0; m < out.cols(); ++m) loss -= std::log(std::max(out(target_[m], m), kTiny));
        return loss;
    }

    // Gradients w.r.t. W_i for i >= lowest (0-based); lower entries are left empty.
    void backward(int lowest, std::vector<Mat>& grads) {
        grads.assign(d_, Mat());
        const Mat& out = V_[d_];
        Mat G = Mat::Zero(out.rows(), out.cols());
        for (int m = 0; m < out.cols(); ++m) G(target_[m], m) = -1.0 / std::max(out(target_[m], m), kTiny);
        Mat GA, GS;
        for (int i = d_ - 1; i >= lowest; --i) {
            GA.noalias() = G * S_[i].transpose();
            kernels::softmax_cols_backward(A_[i], GA, scale_, grads[i]);
            if (i == lowest) break;
            GS.noalias() = A_[i].transpose() * G;
            kernels::shift_backward(V_[i], GS, n_, G);
        }
    }

private:
    int n_, d_;
    double scale_;
    std::vector<int> target_;
    std::vector<Mat> A_, V_, S_;
    int dirty_ = 0;
};

void check_soft(const Weights& W, const ContextSet& C, const Mat& V1, const SeqEmbedding& target) {
    if (W.n != C.n || W.d() != C.d()) throw InvalidParameter("weights and context disagree");
    if (W.n > 64) throw InvalidParameter("alphabet too large for the dense kernels (n <= 64)");
    if (V1.rows() != W.n * W.n || V1.cols() != target.cols()) throw InvalidParameter("input/target shape mismatch");
}

}  // namespace

SoftLoss soft_backward(const Weights& W, const ContextSet& C, const Mat& V1, const SeqEmbedding& target,
                       double scale) {
    check_soft(W, C, V1, target);
    SoftModel model(W.n, W.d(), V1, target.active, scale);
    SoftLoss r;
    r.loss = model.forward(W, C);
    model.backward(0, r.grads);
    return r;
}

double soft_loss(const Weights& W, const ContextSet& C, const Mat& V1, const SeqEmbedding& target, double scale) {
    check_soft(W, C, V1, target);
    SoftModel model(W.n, W.d(), V1, target.active, scale);
    return model.forward(W, C);
}

SoftGdResult gd_soft(const PhrasebookSet& target, const SoftGdConfig& cfg) {
    CoverableSample cs = sample_coverable(target, cfg.delta, cfg.seed);
    return gd_soft(target, cs.s, cfg);
}

SoftGdResult gd_soft(const PhrasebookSet& target, const Sequence& input, const SoftGdConfig& cfg) {
    const int n = target.n, n2 = n * n, d = target.d();
    const long long T = cfg.steps > 0 ? cfg.steps : 3LL * d * n2;
    if (cfg.trace_every < 1) throw InvalidParameter("trace interval must be >= 1");

    SoftGdResult res;
    res.W = Weights::zeros(n, d);
    res.input = input;
    const SeqEmbedding V1 = mat(input);
    const SeqEmbedding Vt = mat(mlt_forward(target, input));
    const ContextSet full = context_from(target);
    SoftModel model(n, d, V1.dense(), Vt.active, cfg.scale);
    Rng rng(derive_seed(cfg.seed, 0x6d6978));  // mixed-schedule stream

    ContextSet ctx = full;
    int prev_level = -1, prev_col = -1;
    std::vector<Mat> grads;
    for (long long t = 1; t <= T; ++t) {
        int level, col;
        if (cfg.schedule == MaskSchedule::rotating) {
            level = static_cast<int>(((t - 1) / n2) % d) + 1;
            col = static_cast<int>((t - 1) % n2);
        } else {
            level = static_cast<int>(rng.below(d)) + 1;
            col = static_cast<int>(rng.below(n2));
        }
        // Restore the previously masked column, then mask the new one.
        if (prev_level > 0) {
            ctx.C[prev_level - 1].col(prev_col) = full.C[prev_level - 1].col(prev_col);
            model.invalidate(prev_level - 1);
        }
        ctx.C[level - 1].col(col).setZero();
        model.invalidate(level - 1);
        prev_level = level;
        prev_col = col;

        const double loss = model.forward(res.W, ctx);
        const int lowest = cfg.mode == GdMode::layerwise ? level - 1 : 0;
        model.backward(lowest, grads);
        for (int i = lowest; i < d; ++i) {
            if (cfg.mode == GdMode::layerwise && i != level - 1) continue;
            Mat& w = res.W.W[i];
            w.noalias() -= cfg.eta * grads[i];
            if (cfg.clip) w = w.cwiseMax(cfg.clip_lo).cwiseMin(cfg.clip_hi);
            model.invalidate(i);
        }
        ++res.steps_run;

        const bool record = (t % cfg.trace_every == 0) || t == T;
        std::vector<double> match = column_match_fraction(res.W, target);
        const bool all = std::all_of(match.begin(), match.end(), [](double f) { return f == 1.0; });
        if (!all)
            res.first_full_match = -1;
        else if (res.first_full_match < 0)
            res.first_full_match = t;
        if (record) res.trace.rows.push_back(GdTraceRow{t, level, col, loss, match});
        if (all && cfg.stop_when_matched) break;
    }
    return res;
}

}  // namespace mlt
