#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mlt/surrogate.hpp"

namespace mlt {

// Summed d/dW_1 of the scale-`scale` softmax surrogate (W = 0) over a batch.
Mat batch_grad_level1(const ContextSet& ctx, const PhrasebookSet& target, const std::vector<Sequence>& batch,
                      double scale = 25.0);
// The same gradient column by central finite differences of the batch loss.
Vec batch_grad_level1_fd(const ContextSet& ctx, const PhrasebookSet& target, const std::vector<Sequence>& batch,
                         int column, double scale = 25.0, double h = 1e-6);

// Index of the largest entry of -g; entries within tol*(1+max|g|) of the best
// count as tied and the lowest index wins.
int predicted_rule(const Vec& g, double tol = 1e-7);

struct GradAccResult {
    double accuracy = 0.0;
    double stderr_ = 0.0;
    long long scored = 0;     // dropped first-level columns scored
    long long hits = 0;
    long long trials = 0;
    long long resampled = 0;  // trials redrawn because no first-level column was dropped
};

struct GradAccConfig {
    int batch = 1;
    int seq_len = 0;  // 0: 2 n^2
    long long trials = 100;
    std::uint64_t seed = 1;
    double scale = 25.0;
    int max_resample = 10000;
};

GradAccResult gradient_prediction_accuracy(const PhrasebookSet& target, const DropoutSpec& spec,
                                           const GradAccConfig& cfg);

struct GradAccRow {
    std::vector<double> p;  // per level
    int batch = 0;
    int max_level = 0;
    GradAccResult r;
};

struct GradAccSweep {
    std::vector<GradAccRow> by_batch;  // drop rate x batch, all levels dropped
    std::vector<GradAccRow> by_level;  // drop rate x max level k, levels 1..k dropped
    std::vector<std::string> notes;
};

GradAccSweep grad_acc_sweep(const PhrasebookSet& target, const std::vector<double>& drop_grid,
                            const std::vector<int>& batch_grid, const std::vector<int>& max_level_grid,
                            int level_batch, const GradAccConfig& base);

std::string grad_acc_csv(const std::vector<GradAccRow>& rows, int d);

// Spearman rank correlation (average ranks for ties).
double spearman(const std::vector<double>& x, const std::vector<double>& y);
// One-sided 95% upper confidence bound of a rank correlation via Fisher's z.
double spearman_upper95(double rho, std::size_t m);

}  // namespace mlt
