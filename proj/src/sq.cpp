#include "mlt/sq.hpp"

#include <algorithm>
#include <bit>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "mlt/errors.hpp"
#include "mlt/rng.hpp"

namespace mlt::sq {

namespace {

int apply_op(BitOp op, int a, int b) {
    switch (op) {
        case BitOp::copy1: return a;
        case BitOp::copy2: return b;
        case BitOp::xor_: return a ^ b;
    }
    return 0;
}

const std::array<std::pair<BitOp, BitOp>, 6> kDeltaOps = {{
    {BitOp::copy1, BitOp::copy2},
    {BitOp::copy1, BitOp::xor_},
    {BitOp::copy2, BitOp::copy1},
    {BitOp::copy2, BitOp::xor_},
    {BitOp::xor_, BitOp::copy1},
    {BitOp::xor_, BitOp::copy2},
}};

// Truth tables over all 2^(2d) inputs, one bit per input.
struct BitTable {
    std::vector<std::uint64_t> w;
};

class TaskTables {
public:
    explicit TaskTables(int d) : d_(d), L_(2 * d) {
        const int bits = 2 * d;
        nbits_ = 1ULL << bits;
        words_ = std::max<std::size_t>(1, nbits_ / 64);
        tail_ = nbits_ >= 64 ? ~0ULL : ((1ULL << nbits_) - 1);
        input_.resize(L_);
        for (int j = 0; j < L_; ++j) {
            input_[j].w.assign(words_, 0);
            for (std::uint64_t x = 0; x < nbits_; ++x)
                if ((x >> j) & 1ULL) input_[j].w[x / 64] |= 1ULL << (x % 64);
        }
    }

    std::uint64_t nbits() const { return nbits_; }

    // Output character `pos` (0-based) of the task, as a truth table.
    BitTable output_char(const PhrasebookSet& p, int pos) const {
        std::vector<BitTable> cur = input_, next(L_);
        for (const auto& pb : p.books) {
            for (int j = 0; j < L_; j += 2) {
                const BitTable& x = cur[(j + 1) % L_];
                const BitTable& y = cur[(j + 2) % L_];
                next[j].w.assign(words_, 0);
                next[j + 1].w.assign(words_, 0);
                for (int t = 0; t < 4; ++t) {
                    const int a = t >> 1, b = t & 1;
                    const int out = pb.perm[t];
                    for (std::size_t k = 0; k < words_; ++k) {
                        std::uint64_t term = (a ? x.w[k] : ~x.w[k]) & (b ? y.w[k] : ~y.w[k]);
                        if (out >> 1) next[j].w[k] |= term;
                        if (out & 1) next[j + 1].w[k] |= term;
                    }
                }
            }
            std::swap(cur, next);
        }
        BitTable r = cur[pos];
        r.w.back() &= tail_;
        return r;
    }

    std::uint64_t disagreements(const BitTable& a, const BitTable& b) const {
        std::uint64_t c = 0;
        for (std::size_t k = 0; k < words_; ++k) c += std::popcount(a.w[k] ^ b.w[k]);
        return c;
    }

private:
    int d_, L_;
    std::uint64_t nbits_;
    std::size_t words_;
    std::uint64_t tail_;
    std::vector<BitTable> input_;
};

bool pair_nonzero(const TaskTables& tt, int d, std::uint64_t seed, long long t) {
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(t));
    PhrasebookSet a = random_phrasebook_set(2, d, derive_seed(s, 1));
    PhrasebookSet b = random_phrasebook_set(2, d, derive_seed(s, 2));
    return 2 * tt.disagreements(tt.output_char(a, 0), tt.output_char(b, 0)) != tt.nbits();
}

}  // namespace

std::string to_string(BitOp op) {
    switch (op) {
        case BitOp::copy1: return "copy1";
        case BitOp::copy2: return "copy2";
        case BitOp::xor_: return "xor";
    }
    return "?";
}

Phrasebook delta_map(int i) {
    if (i < 1 || i > 6) throw InvalidParameter("copy/xor maps are numbered 1..6");
    const auto [op1, op2] = kDeltaOps[i - 1];
    Phrasebook pb{2, std::vector<int>(4)};
    for (int t = 0; t < 4; ++t) {
        const int a = t >> 1, b = t & 1;
        pb.perm[t] = idx(apply_op(op1, a, b), apply_op(op2, a, b), 2);
    }
    return pb;
}

const std::array<std::array<int, 4>, 6>& reference_truth_rows() {
    // Tuples (c, d) written as 2c + d.
    static const std::array<std::array<int, 4>, 6> rows = {{
        {0, 1, 2, 3},
        {0, 1, 1, 2},
        {0, 2, 1, 3},
        {0, 3, 1, 2},
        {0, 2, 3, 1},
        {0, 3, 2, 1},
    }};
    return rows;
}

MapCensus enumerate_bijections_n2() {
    MapCensus c;
    for (int i = 0; i < 6; ++i) c.delta[i] = delta_map(i + 1);
    std::vector<int> perm{0, 1, 2, 3};
    std::array<int, 6> filled{};
    do {
        MapInfo m;
        m.pb = Phrasebook{2, perm};
        // Undo the negation that sends (0,0) elsewhere; what is left fixes (0,0)
        // and must be one of the six representatives.
        m.not_mask = ((perm[0] >> 1) & 1) | ((perm[0] & 1) << 1);
        Phrasebook base{2, std::vector<int>(4)};
        for (int t = 0; t < 4; ++t) {
            const int c1 = (perm[t] >> 1) ^ (m.not_mask & 1);
            const int c2 = (perm[t] & 1) ^ ((m.not_mask >> 1) & 1);
            base.perm[t] = idx(c1, c2, 2);
        }
        for (int i = 0; i < 6; ++i)
            if (base == c.delta[i]) {
                m.family = i + 1;
                m.op1 = kDeltaOps[i].first;
                m.op2 = kDeltaOps[i].second;
            }
        if (m.family == 0) throw Error("n=2 bijection outside every copy/xor family");
        c.family[m.family - 1][filled[m.family - 1]++] = static_cast<int>(c.maps.size());
        c.maps.push_back(std::move(m));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return c;
}

double correlation(const std::vector<int>& xs, const std::vector<int>& ys) {
    if (xs.size() != ys.size() || xs.empty()) throw InvalidParameter("correlation needs equal, non-empty lists");
    long long dis = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) dis += (xs[i] ^ ys[i]) & 1;
    return std::fabs(1.0 - 2.0 * static_cast<double>(dis) / static_cast<double>(xs.size()));
}

PairCensus map_pair_correlation_census(int i, int j) {
    if (i < 1 || i > 2 || j < 1 || j > 2) throw InvalidParameter("output positions are 1 or 2");
    const MapCensus c = enumerate_bijections_n2();
    auto column = [](const Phrasebook& pb, int pos) {
        std::vector<int> v(4);
        for (int t = 0; t < 4; ++t) v[t] = pos == 1 ? pb.perm[t] >> 1 : pb.perm[t] & 1;
        return v;
    };
    PairCensus pc;
    for (const auto& ma : c.maps)
        for (const auto& mb : c.maps) {
            ++pc.pairs;
            const double r = correlation(column(ma.pb, i), column(mb.pb, j));
            if (r == 1.0)
                ++pc.correlated;
            else if (r == 0.0)
                ++pc.uncorrelated;
            else
                ++pc.other;
            auto one = [&](int p, int q) { return correlation(column(ma.pb, p), column(mb.pb, q)) == 1.0; };
            if ((one(1, 1) && one(2, 2)) || (one(1, 2) && one(2, 1))) ++pc.both_positions;
        }
    return pc;
}

CorrelationEstimate task_correlation(const PhrasebookSet& a, const PhrasebookSet& b, int position, CorrMode mode,
                                     long long samples, std::uint64_t seed) {
    if (a.n != 2 || b.n != 2) throw InvalidParameter("task correlation is defined for n = 2");
    if (a.d() != b.d()) throw InvalidParameter("tasks must have the same depth");
    const int d = a.d(), L = 2 * d;
    if (position < 1 || position > L) throw InvalidParameter("output position out of range");
    CorrelationEstimate e;
    if (mode == CorrMode::exact) {
        if (2 * d > 24) throw ModeError("exact enumeration limited to 2^24 inputs (d <= 12)");
        TaskTables tt(d);
        e.exact = true;
        e.samples = static_cast<long long>(tt.nbits());
        e.disagreements = static_cast<long long>(tt.disagreements(tt.output_char(a, position - 1),
                                                                  tt.output_char(b, position - 1)));
        e.value = std::fabs(1.0 - 2.0 * static_cast<double>(e.disagreements) / static_cast<double>(e.samples));
        return e;
    }
    if (samples < 1) throw InvalidParameter("Monte Carlo mode needs samples >= 1");
    long long dis = 0;
    for (long long s = 0; s < samples; ++s) {
        Sequence x = uniform_sequence(2, L, derive_seed(seed, static_cast<std::uint64_t>(s)));
        dis += mlt_forward(a, x).chars[position - 1] != mlt_forward(b, x).chars[position - 1];
    }
    const double p = static_cast<double>(dis) / static_cast<double>(samples);
    e.samples = samples;
    e.disagreements = dis;
    e.value = std::fabs(1.0 - 2.0 * p);
    e.stderr_ = 2.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(samples));
    return e;
}

long long count_nonzero_pairs_serial(int d, long long trials, std::uint64_t seed) {
    TaskTables tt(d);
    long long c = 0;
    for (long long t = 0; t < trials; ++t) c += pair_nonzero(tt, d, seed, t);
    return c;
}

long long count_nonzero_pairs_omp(int d, long long trials, std::uint64_t seed) {
    TaskTables tt(d);
    std::vector<char> hit(static_cast<std::size_t>(trials));
#pragma omp parallel for schedule(dynamic, 64)
    for (long long t = 0; t < trials; ++t) hit[t] = pair_nonzero(tt, d, seed, t);
    return std::accumulate(hit.begin(), hit.end(), 0LL);
}

long long count_nonzero_pairs_depth1() {
    TaskTables tt(1);
    const MapCensus c = enumerate_bijections_n2();
    long long hits = 0;
    for (const auto& a : c.maps)
        for (const auto& b : c.maps) {
            const BitTable ta = tt.output_char(PhrasebookSet{2, {a.pb}}, 0);
            const BitTable tb = tt.output_char(PhrasebookSet{2, {b.pb}}, 0);
            hits += 2 * tt.disagreements(ta, tb) != tt.nbits();
        }
    return hits;
}

std::vector<DecayRow> decay_experiment(const std::vector<int>& d_range, long long trials, std::uint64_t seed) {
    std::vector<DecayRow> rows;
    for (int d : d_range) {
        if (d < 1 || 2 * d > 24) throw ModeError("decay experiment needs 1 <= d <= 12");
        DecayRow r;
        r.d = d;
        r.bound = (1.0 / 3.0) * std::pow(7.0 / 9.0, d - 1);
        if (d == 1) {
            r.exact = true;
            r.trials = 24 * 24;
            r.nonzero = count_nonzero_pairs_depth1();
            r.sigma = 0.0;
        } else {
            r.trials = trials;
            r.nonzero = count_nonzero_pairs_omp(d, trials, derive_seed(seed, d));
            r.sigma = std::sqrt(r.bound * (1.0 - r.bound) / static_cast<double>(trials));
        }
        r.fraction = static_cast<double>(r.nonzero) / static_cast<double>(r.trials);
        rows.push_back(r);
    }
    return rows;
}

std::string decay_csv(const std::vector<DecayRow>& rows) {
    std::string out = "d,trials,nonzero_fraction,bound,sigma\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%d,%lld,%.10f,%.10f,%.10f\n", r.d, r.trials, r.fraction, r.bound, r.sigma);
        out += buf;
    }
    return out;
}

std::vector<UniformityRow> uniformity_probe(const PhrasebookSet& pset, int level, int L, long long samples,
                                            std::uint64_t seed) {
    const int n = pset.n;
    if (level < 1 || level > pset.d() + 1) throw InvalidParameter("level must lie in 1..d+1");
    if (samples < 1) throw InvalidParameter("need at least one sample");
    std::vector<std::vector<long long>> hist(L, std::vector<long long>(n, 0));
    std::vector<std::vector<long long>> xhist(L > 0 ? L - 1 : 0, std::vector<long long>(2, 0));
    for (long long s = 0; s < samples; ++s) {
        Sequence x = uniform_sequence(n, L, derive_seed(seed, static_cast<std::uint64_t>(s)));
        Sequence cur = x;
        for (int i = 1; i < level; ++i) cur = apply_step(pset.level(i), cur);
        for (int j = 0; j < L; ++j) ++hist[j][cur.chars[j]];
        if (n == 2)
            for (int j = 0; j + 1 < L; ++j) ++xhist[j][cur.chars[j] ^ cur.chars[j + 1]];
    }
    auto test = [&](const std::vector<long long>& h, const std::string& kind, int pos) {
        const double expect = static_cast<double>(samples) / static_cast<double>(h.size());
        double chi2 = 0.0;
        for (long long o : h) chi2 += (o - expect) * (o - expect) / expect;
        const int dof = static_cast<int>(h.size()) - 1;
        return UniformityRow{kind, pos, chi2, dof, boost::math::gamma_q(dof / 2.0, chi2 / 2.0)};
    };
    std::vector<UniformityRow> rows;
    for (int j = 0; j < L; ++j) rows.push_back(test(hist[j], "char", j));
    if (n == 2)
        for (int j = 0; j + 1 < L; ++j) rows.push_back(test(xhist[j], "xor", j));
    return rows;
}

std::string uniformity_csv(const std::vector<UniformityRow>& rows) {
    std::string out = "kind,position,chi2,dof,p_value\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%d,%.10g,%d,%.10g\n", r.kind.c_str(), r.position, r.chi2, r.dof, r.p_value);
        out += buf;
    }
    return out;
}

}  // namespace mlt::sq
