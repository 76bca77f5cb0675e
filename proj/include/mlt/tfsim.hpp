#pragma once

#include <string>
#include <vector>

#include "mlt/surrogate.hpp"

namespace mlt::tf {

double gelu(double x);
// sqrt(pi/2) (GELU(x+y) - GELU(x) - GELU(y)) ~ xy.
double gelu_product(double x, double y);
// Leading residual of gelu_product: -((x+y)^4 - x^4 - y^4) / 12.
double gelu_product_residual(double x, double y);

// Embedding layout, width 2n^2 + 2d + 4:
//   [0, n^2)            token, first half
//   [n^2, 2n^2)         token, second half
//   [2n^2, +d)          level indicator of a context token
//   [2n^2+d, +d)        module indicator: which translation step the second segment is in
//   start, end          markers of the second segment
//   seg1, seg2          segment indicators (both zero: null / THINK position)
struct Layout {
    int n = 0, d = 0;
    int n2() const { return n * n; }
    int tok_a() const { return 0; }
    int tok_b() const { return n * n; }
    int lvl() const { return 2 * n * n; }
    int mod() const { return 2 * n * n + d; }
    int start() const { return 2 * n * n + 2 * d; }
    int end() const { return start() + 1; }
    int seg1() const { return start() + 2; }
    int seg2() const { return start() + 3; }
    int width() const { return start() + 4; }
};

enum class AttnMode { hard, saturated };
std::string to_string(AttnMode m);

// What a head is supposed to attend to; the hard mode applies this directly.
enum class PatternKind {
    previous,       // position p-1
    self,           // position p
    end_to_start,   // the end marker reads the start marker; other rows: no-op
    context_match,  // the context token of the current level whose index matches the token
};

struct AttnHead {
    PatternKind pattern = PatternKind::self;
    Mat Wq, Wk, Wv;                // width x width
    std::vector<double> rel_bias;  // rel_bias[t] = b_{-t}; missing entries are 0
};

// Sublayer outputs overwrite the token block of gated rows only.
enum class Gate {
    segment2,          // every second-segment row (the shift stage)
    segment2_not_end,  // second-segment rows except the end marker (the translate stage)
};

struct AttnLayer {
    std::vector<AttnHead> heads;
    Gate gate = Gate::segment2;
};

struct MlpLayer {
    Mat W_inner, W_outer;
    bool product_stage = false;  // hidden units come in (x+y, x, y) triples
    bool l2_normalize = false;   // normalize the first token half afterwards
    Gate gate = Gate::segment2;
};

struct Module {
    AttnLayer shift_attn;
    MlpLayer shift_mlp;
    AttnLayer translate_attn;
    MlpLayer translate_mlp;
};

struct TransformerModel {
    Layout layout;
    double N = 100.0;
    double Lambda = 30.0;
    AttnMode mode = AttnMode::hard;
    std::vector<Module> modules;
    // Columns where both C_i and W_i would be non-zero are outside the regime in
    // which the normalized GELU stage equals HardMax; encode_input records them.
    int width() const { return layout.width(); }
    int layer_count() const { return 4 * static_cast<int>(modules.size()); }
};

TransformerModel build_transformer(int n, int d, const Weights& W, AttnMode mode = AttnMode::hard,
                                   double N = 100.0, double Lambda = 30.0);

struct EmbSeq {
    Layout layout;
    Mat X;  // width x positions
    int positions() const { return static_cast<int>(X.cols()); }
    bool is_null(int p) const;
};

EmbSeq encode_input(const ContextSet& ctx, const Sequence& s);

struct ForwardReport {
    double max_product_residual = 0.0;         // |channel - exact product| before the N^2 rescale
    double max_product_residual_scaled = 0.0;  // the same after rescaling
    double max_offpattern_mass = 0.0;          // saturated mode only
    bool hard_patterns_exact = true;           // hard mode: every realized row is 0/1 and sums to 0 or 1
    int zero_columns = 0;                      // translate outputs with nothing to normalize
    int conflicting_columns = 0;               // C_i and W_i columns both non-zero
};

EmbSeq transformer_forward(const TransformerModel& model, const ContextSet& ctx, const EmbSeq& in,
                           ForwardReport* report = nullptr);

struct Decoded {
    Sequence s;
    double min_confidence = 1.0;
};
Decoded decode_output(const EmbSeq& out);

// Text dump: header line then every weight block.
std::string dump_model(const TransformerModel& model);

}  // namespace mlt::tf
