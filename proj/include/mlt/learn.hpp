#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mlt/surrogate.hpp"

namespace mlt {

// ---------------------------------------------------------------- search

struct SearchOptions {
    // Keep sweeping after the first match to prove the match is unique. With
    // false the sweep stops at the first match.
    bool confirm_unique = true;
};

struct SearchReport {
    bool success = false;
    Weights recovered;
    long long forward_passes = 0;
    std::vector<std::vector<int>> search_lengths;  // [level][column] candidates tried
    // Set on failure: the first column that had no match or several matches.
    int failed_level = 0;
    int failed_column = -1;
    int matches_at_failure = 0;
    std::string message;
};

SearchReport heuristic_search(const PhrasebookSet& target, const SeqEmbedding& V1, const SeqEmbedding& Vtarget,
                              const SearchOptions& opt = {});

// ---------------------------------------------------------------- MSE surrogate gradients

struct GradCaseTally {
    int alpha = 0;  // output columns where only the left neighbour uses the column
    int alpha_right = 0;  // ... only the right neighbour (equals alpha whenever both exist)
    int beta = 0;   // output columns whose two neighbours both use it
};

struct SurrogateGrad {
    Vec grad;
    GradCaseTally tally;
    bool closed_form = false;  // false: computed by reverse mode on forward_continuous
};

// MSE loss ||forward_continuous(P, V1) - Vtarget||^2.
double mse_loss(const std::vector<Mat>& P, const Mat& V1, const Mat& Vtarget);

// Reverse-mode gradient of the MSE loss w.r.t. every P_i.
std::vector<Mat> mse_grad_all(const std::vector<Mat>& P, const Mat& V1, const Mat& Vtarget);

// Gradient w.r.t. column k of P_level (1-based) at hardened P. For d == 2 the
// per-case closed forms are used when their premises hold (the other layer is
// a permutation and every error traces back to column k); otherwise reverse mode.
SurrogateGrad surrogate_grad_col(const std::vector<StochasticMatrix>& P, const SeqEmbedding& V1,
                                 const SeqEmbedding& Vtarget, int level, int k);

// Central finite differences of the MSE loss, step h.
Vec oracle_grad(const std::vector<Mat>& P, const Mat& V1, const Mat& Vtarget, int level, int k, double h = 1e-4);

// ---------------------------------------------------------------- traces

struct GdTraceRow {
    long long step = 0;
    int masked_level = 0;
    int masked_col = 0;
    double loss = 0.0;
    std::vector<double> match;  // per level
};

struct GdTrace {
    std::vector<GdTraceRow> rows;
    std::string to_csv() const;  // without the comment header
};

std::vector<double> column_match_fraction(const Weights& W, const PhrasebookSet& target);

// ---------------------------------------------------------------- d = 2 layerwise GD

struct Gd2Result {
    bool success = false;
    Weights W;
    GdTrace trace;
    std::vector<int> updates_per_column;  // per level, constant across columns
    bool used_closed_form = true;
    std::string message;
};

Gd2Result gd_d2(const PhrasebookSet& target, const SeqEmbedding& V1, const SeqEmbedding& Vtarget,
                const Weights& W_init);

// ---------------------------------------------------------------- softmax surrogate

struct SoftLoss {
    double loss = 0.0;
    std::vector<Mat> grads;  // d/dW_i
};

// Sum over output columns of the cross-entropy against one-hot targets.
SoftLoss soft_backward(const Weights& W, const ContextSet& C, const Mat& V1, const SeqEmbedding& target,
                       double scale = 25.0);
double soft_loss(const Weights& W, const ContextSet& C, const Mat& V1, const SeqEmbedding& target,
                 double scale = 25.0);

enum class GdMode { layerwise, fullparam };
enum class MaskSchedule { rotating, mixed };

struct SoftGdConfig {
    GdMode mode = GdMode::layerwise;
    long long steps = 0;  // 0: 3 d n^2
    double eta = 100.0;
    double clip_lo = 0.0, clip_hi = 1.0;
    bool clip = true;
    MaskSchedule schedule = MaskSchedule::rotating;
    double scale = 25.0;
    double delta = 0.01;  // coverable input sampling
    std::uint64_t seed = 1;
    int trace_every = 1;
    bool stop_when_matched = false;
};

struct SoftGdResult {
    Weights W;
    GdTrace trace;
    Sequence input;
    long long steps_run = 0;
    long long first_full_match = -1;  // first step after which every layer matched, -1 if never
};

SoftGdResult gd_soft(const PhrasebookSet& target, const SoftGdConfig& cfg);
// Same, on a caller-supplied training input.
SoftGdResult gd_soft(const PhrasebookSet& target, const Sequence& input, const SoftGdConfig& cfg);

}  // namespace mlt
