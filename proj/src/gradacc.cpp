#include "mlt/gradacc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "mlt/errors.hpp"
#include "mlt/learn.hpp"
#include "mlt/rng.hpp"

namespace mlt {

Mat batch_grad_level1(const ContextSet& ctx, const PhrasebookSet& target, const std::vector<Sequence>& batch,
                      double scale) {
    const Weights W = Weights::zeros(target.n, target.d());
    const int n2 = target.n * target.n;
    Mat g = Mat::Zero(n2, n2);
    for (const auto& s : batch) {
        SoftLoss r = soft_backward(W, ctx, mat(s).dense(), mat(mlt_forward(target, s)), scale);
        g += r.grads[0];
    }
    return g;
}

Vec batch_grad_level1_fd(const ContextSet& ctx, const PhrasebookSet& target, const std::vector<Sequence>& batch,
                         int column, double scale, double h) {
    Weights W = Weights::zeros(target.n, target.d());
    const int n2 = target.n * target.n;
    auto total = [&]() {
        double l = 0.0;
        for (const auto& s : batch) l += soft_loss(W, ctx, mat(s).dense(), mat(mlt_forward(target, s)), scale);
        return l;
    };
    Vec g(n2);
    for (int r = 0; r < n2; ++r) {
        W.W[0](r, column) = h;
        const double up = total();
        W.W[0](r, column) = -h;
        const double down = total();
        W.W[0](r, column) = 0.0;
        g(r) = (up - down) / (2.0 * h);
    }
    return g;
}

int predicted_rule(const Vec& g, double tol) {
    const Vec neg = -g;
    const double best = neg.maxCoeff();
    const double slack = tol * (1.0 + g.cwiseAbs().maxCoeff());
    for (int r = 0; r < neg.size(); ++r)
        if (neg(r) >= best - slack) return r;
    return 0;
}

GradAccResult gradient_prediction_accuracy(const PhrasebookSet& target, const DropoutSpec& spec,
                                           const GradAccConfig& cfg) {
    const int n = target.n, n2 = n * n;
    const int L = cfg.seq_len > 0 ? cfg.seq_len : 2 * n2;
    if (cfg.batch < 1) throw InvalidParameter("batch size must be >= 1");
    if (L % 2 != 0) throw InvalidParameter("sequence length must be even");
    if (cfg.trials < 1) throw InvalidParameter("need at least one trial");

    struct TrialOut {
        long long scored = 0, hits = 0, resampled = 0;
        bool ok = true;
    };
    std::vector<TrialOut> out(static_cast<std::size_t>(cfg.trials));
#pragma omp parallel for schedule(dynamic, 1)
    for (long long t = 0; t < cfg.trials; ++t) {
        const std::uint64_t ts = derive_seed(cfg.seed, static_cast<std::uint64_t>(t));
        TrialOut& o = out[t];
        DropResult dr;
        bool any = false;
        for (int attempt = 0; attempt <= cfg.max_resample && !any; ++attempt) {
            dr = random_drop(target, spec, derive_seed(ts, attempt));
            any = std::find(dr.retained[0].begin(), dr.retained[0].end(), false) != dr.retained[0].end();
            if (!any) ++o.resampled;
        }
        if (!any) {
            o.ok = false;
            continue;
        }
        std::vector<Sequence> batch;
        for (int b = 0; b < cfg.batch; ++b)
            batch.push_back(uniform_sequence(n, L, derive_seed(ts, 0x5eed0000ULL + b)));
        const Mat g = batch_grad_level1(dr.ctx, target, batch, cfg.scale);
        for (int j = 0; j < n2; ++j) {
            if (dr.retained[0][j]) continue;
            ++o.scored;
            o.hits += predicted_rule(g.col(j)) == target.books[0].perm[j];
        }
    }
    GradAccResult r;
    r.trials = cfg.trials;
    for (const auto& o : out) {
        if (!o.ok) throw SamplingFailure("no first-level column dropped after " + std::to_string(cfg.max_resample) +
                                         " redraws; the drop rate is too small");
        r.scored += o.scored;
        r.hits += o.hits;
        r.resampled += o.resampled;
    }
    r.accuracy = static_cast<double>(r.hits) / static_cast<double>(r.scored);
    r.stderr_ = std::sqrt(r.accuracy * (1.0 - r.accuracy) / static_cast<double>(r.scored));
    return r;
}

GradAccSweep grad_acc_sweep(const PhrasebookSet& target, const std::vector<double>& drop_grid,
                            const std::vector<int>& batch_grid, const std::vector<int>& max_level_grid,
                            int level_batch, const GradAccConfig& base) {
    const int d = target.d();
    GradAccSweep sw;
    std::uint64_t cell = 0;
    for (double p : drop_grid) {
        if (p <= 0.0) {
            sw.notes.push_back("drop rate " + std::to_string(p) + " skipped: no dropped columns to score");
            continue;
        }
        for (int B : batch_grid) {
            GradAccConfig cfg = base;
            cfg.batch = B;
            cfg.seed = derive_seed(base.seed, cell++);
            DropoutSpec spec{std::vector<double>(d, p), {}};
            sw.by_batch.push_back(GradAccRow{spec.p, B, d, gradient_prediction_accuracy(target, spec, cfg)});
        }
        for (int k : max_level_grid) {
            if (k < 1 || k > d) throw InvalidParameter("max level must lie in 1..d");
            GradAccConfig cfg = base;
            cfg.batch = level_batch;
            cfg.seed = derive_seed(base.seed, cell++);
            DropoutSpec spec{std::vector<double>(d, 0.0), {}};
            for (int i = 0; i < k; ++i) spec.p[i] = p;
            sw.by_level.push_back(GradAccRow{spec.p, level_batch, k, gradient_prediction_accuracy(target, spec, cfg)});
        }
    }
    return sw;
}

std::string grad_acc_csv(const std::vector<GradAccRow>& rows, int d) {
    std::string out;
    for (int i = 1; i <= d; ++i) out += "p_" + std::to_string(i) + ",";
    out += "batch,max_level,trials,accuracy,stderr,resampled_trials\n";
    char buf[160];
    for (const auto& r : rows) {
        for (double p : r.p) {
            std::snprintf(buf, sizeof buf, "%.6g,", p);
            out += buf;
        }
        std::snprintf(buf, sizeof buf, "%d,%d,%lld,%.10f,%.10f,%lld\n", r.batch, r.max_level, r.r.trials,
                      r.r.accuracy, r.r.stderr_, r.r.resampled);
        out += buf;
    }
    return out;
}

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
        i = j + 1;
    }
    return r;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw InvalidParameter("spearman needs two equal lists of length >= 2");
    const auto rx = ranks(x), ry = ranks(y);
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / rx.size();
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / ry.size();
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0 || syy == 0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

double spearman_upper95(double rho, std::size_t m) {
    if (m < 4) return 1.0;
    if (rho <= -1.0) return -1.0;
    if (rho >= 1.0) return 1.0;
    // Fisher z with the usual 1.06/(m-3) variance for rank correlations.
    const double z = std::atanh(rho) + 1.6448536269514722 * std::sqrt(1.06 / static_cast<double>(m - 3));
    return std::tanh(z);
}

}  // namespace mlt
