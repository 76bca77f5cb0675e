#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mlt/core.hpp"

namespace mlt::sq {

// Boolean operators that produce one output character of an n=2 map.
enum class BitOp { copy1, copy2, xor_ };
std::string to_string(BitOp op);

struct MapInfo {
    Phrasebook pb;
    int family = 0;      // 1..6: index of the copy/xor representative
    int not_mask = 0;    // bit 0: first output character negated, bit 1: second
    BitOp op1 = BitOp::copy1, op2 = BitOp::copy2;
};

struct MapCensus {
    std::vector<MapInfo> maps;                // all 24 bijections, in lexicographic perm order
    std::array<Phrasebook, 6> delta;          // copy/xor representatives
    std::array<std::array<int, 4>, 6> family; // indices into maps
};

// The six copy/xor maps, built from their operator pairs
// (copy1,copy2) (copy1,xor) (copy2,copy1) (copy2,xor) (xor,copy1) (xor,copy2).
Phrasebook delta_map(int i);
// Output tuples of each representative on (0,0),(0,1),(1,0),(1,1) as printed in
// the reference truth table. Row 2 of that table repeats (0,1) and is not a bijection.
const std::array<std::array<int, 4>, 6>& reference_truth_rows();

MapCensus enumerate_bijections_n2();

// |1 - 2 mean(x xor y)|.
double correlation(const std::vector<int>& xs, const std::vector<int>& ys);

struct PairCensus {
    int pairs = 0;
    int correlated = 0;      // correlation exactly 1 at the requested positions
    int uncorrelated = 0;    // correlation exactly 0
    int other = 0;           // anything else (expected 0)
    int both_positions = 0;  // both output characters correlated (straight or crossed)
};
// Positions i, j are 1-based output characters of the first and second map.
PairCensus map_pair_correlation_census(int i, int j);

struct CorrelationEstimate {
    double value = 0.0;
    bool exact = false;
    long long samples = 0;
    double stderr_ = 0.0;
    long long disagreements = 0;  // exact mode: value = |1 - 2 disagreements / samples|
};

enum class CorrMode { exact, montecarlo };

// Correlation of output character `position` (1-based) of two n=2 tasks over
// uniform inputs of length 2d.
CorrelationEstimate task_correlation(const PhrasebookSet& a, const PhrasebookSet& b, int position, CorrMode mode,
                                     long long samples = 0, std::uint64_t seed = 0);

struct DecayRow {
    int d = 0;
    long long trials = 0;
    long long nonzero = 0;
    double fraction = 0.0;
    double bound = 0.0;
    double sigma = 0.0;  // binomial standard deviation of the fraction at the bound
    bool exact = false;  // d = 1: all 24 x 24 map pairs enumerated, sigma = 0
};

// Counts pairs of random n=2 phrasebook sets with nonzero exact first-character correlation.
long long count_nonzero_pairs_serial(int d, long long trials, std::uint64_t seed);
long long count_nonzero_pairs_omp(int d, long long trials, std::uint64_t seed);

// Exact count over all 576 ordered pairs of single n=2 phrasebooks.
long long count_nonzero_pairs_depth1();

// Depth 1 is enumerated exhaustively; deeper rows are Monte Carlo.
std::vector<DecayRow> decay_experiment(const std::vector<int>& d_range, long long trials, std::uint64_t seed);
std::string decay_csv(const std::vector<DecayRow>& rows);

struct UniformityRow {
    std::string kind;  // "char" or "xor"
    int position = 0;  // 0-based character position (xor: pair position, position+1)
    double chi2 = 0.0;
    int dof = 0;
    double p_value = 0.0;
};

// Histograms every character of the level-th intermediate (1-based; level 1 is
// the input) over uniform inputs of length L and runs a chi-square test against
// the uniform distribution. For n=2 the xor of adjacent characters is tested too.
std::vector<UniformityRow> uniformity_probe(const PhrasebookSet& pset, int level, int L, long long samples,
                                            std::uint64_t seed);
std::string uniformity_csv(const std::vector<UniformityRow>& rows);

}  // namespace mlt::sq
