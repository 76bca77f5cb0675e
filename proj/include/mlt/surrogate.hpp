#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mlt/core.hpp"
#include "mlt/embed.hpp"

namespace mlt {

// In-context matrices C_1..C_d; columns are one-hot or all-zero.
struct ContextSet {
    int n = 0;
    std::vector<Mat> C;
    int d() const { return static_cast<int>(C.size()); }
    static ContextSet zeros(int n, int d);
};

// Trainable matrices W_1..W_d.
struct Weights {
    int n = 0;
    std::vector<Mat> W;
    int d() const { return static_cast<int>(W.size()); }
    static Weights zeros(int n, int d);
};

// Either per-level drop probabilities or an explicit d x n^2 drop mask
// (true = column dropped).
struct DropoutSpec {
    std::vector<double> p;
    std::vector<std::vector<bool>> mask;
};

struct Hardmax {
    StochasticMatrix m;
    bool tie = false;
};

// Column-wise argmax; ties go to the lowest row and set the flag.
Hardmax hardmax_cols(const Mat& M);

// Effective matrices HardMax(C_i + W_i).
std::vector<StochasticMatrix> effective_matrices(const Weights& W, const ContextSet& C, bool* tie = nullptr);

// V_{i+1} = P_i Shift(V_i) with one-hot P columns; a zero column propagates as -1.
std::vector<int> forward_indices(const std::vector<StochasticMatrix>& P, const std::vector<int>& v1, int n);

SeqEmbedding forward_hard(const Weights& W, const ContextSet& C, const SeqEmbedding& V, bool* tie = nullptr);
Mat forward_soft(const Weights& W, const ContextSet& C, const Mat& V, double scale = 25.0);
Mat forward_continuous(const std::vector<Mat>& P, const Mat& V);

// Checks the context-augmented reparameterization: with X_1 = [C_1 ... C_d, V_1]
// the block recurrence X_{i+1} = HardMax(C_i + W_i) Shift-on-last-block(X_i)
// carries the contexts through unchanged and reproduces forward_hard.
bool context_augmented_equivalent(const Weights& W, const ContextSet& C, const SeqEmbedding& V);

ContextSet context_from(const PhrasebookSet& pset);
// level is 1-based.
ContextSet drop_column(const ContextSet& C, int level, int k);

struct DropResult {
    ContextSet ctx;
    std::vector<std::vector<bool>> retained;  // d x n^2
};
DropResult random_drop(const PhrasebookSet& pset, const DropoutSpec& spec, std::uint64_t seed);

bool is_coverable(const PhrasebookSet& pset, const Sequence& s);
// 2 * ceil(n^2 ln(n d / delta)).
int coverable_length(int n, int d, double delta);

struct CoverableSample {
    Sequence s;
    int attempts = 0;
};
CoverableSample sample_coverable(const PhrasebookSet& pset, double delta, std::uint64_t seed, int max_attempts = 100);

// Machine format: "MLT-MATS v1 d=<d> n=<n>" then each matrix row-major, one row per line.
std::string format_matrices(const std::vector<Mat>& mats, int n);
std::vector<Mat> parse_matrices(const std::string& text, int* n_out = nullptr);

}  // namespace mlt
