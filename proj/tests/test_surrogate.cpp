#include <cmath>

#include "doctest.h"
#include "mlt/errors.hpp"
#include "mlt/rng.hpp"
#include "mlt/surrogate.hpp"

using namespace mlt;

namespace {

Weights small_weights(int n, int d, std::uint64_t seed, double bound) {
    Weights W = Weights::zeros(n, d);
    Rng rng(seed);
    for (auto& w : W.W)
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = (2.0 * rng.uniform() - 1.0) * bound;
    return W;
}

Weights planted_weights(const PhrasebookSet& ps) {
    Weights W = Weights::zeros(ps.n, ps.d());
    for (int i = 0; i < ps.d(); ++i) W.W[i] = matrix_of(ps.books[i]).dense();
    return W;
}

}  // namespace

TEST_CASE("hardmax columns") {
    const Hardmax z = hardmax_cols(Mat::Zero(4, 4));
    CHECK(z.tie);
    for (int r : z.m.row_of) CHECK(r == 0);
    const Hardmax id = hardmax_cols(Mat::Identity(9, 9));
    CHECK_FALSE(id.tie);
    CHECK(id.m == StochasticMatrix::identity(3));
    for (int c = 0; c < 1000; ++c) {
        const int n = 2 + c % 3;
        const Phrasebook pb = random_phrasebook(n, derive_seed(1, c));
        const Mat C = matrix_of(pb).dense();
        const Weights W = small_weights(n, 1, derive_seed(2, c), 0.499);
        REQUIRE(hardmax_cols(C + W.W[0]).m == matrix_of(pb));
    }
}

TEST_CASE("strong in-context capability") {
    for (auto [d, n] : std::vector<std::pair<int, int>>{{2, 2}, {3, 4}, {5, 8}}) {
        for (int c = 0; c < 300; ++c) {
            const PhrasebookSet ps = random_phrasebook_set(n, d, derive_seed(3, c));
            const Sequence s = uniform_sequence(n, 2 + 2 * (c % 12), derive_seed(4, c));
            const Weights W = small_weights(n, d, derive_seed(5, c), 0.49);
            REQUIRE(forward_hard(W, context_from(ps), mat(s)) == mat(mlt_forward(ps, s)));
        }
    }
}

TEST_CASE("strong task capability and mixed context") {
    for (int c = 0; c < 300; ++c) {
        const PhrasebookSet ps = random_phrasebook_set(4, 3, derive_seed(6, c));
        const Sequence s = uniform_sequence(4, 20, derive_seed(7, c));
        const Weights W = planted_weights(ps);
        REQUIRE(forward_hard(W, ContextSet::zeros(4, 3), mat(s)) == mat(mlt_forward(ps, s)));

        const int k = c % 16;
        Weights mixed = Weights::zeros(4, 3);
        mixed.W[0].col(k) = W.W[0].col(k);
        REQUIRE(forward_hard(mixed, drop_column(context_from(ps), 1, k), mat(s)) == mat(mlt_forward(ps, s)));
    }
}

TEST_CASE("context-augmented reparameterization") {
    for (int c = 0; c < 100; ++c) {
        const PhrasebookSet ps = random_phrasebook_set(3, 3, derive_seed(8, c));
        const Sequence s = uniform_sequence(3, 12, derive_seed(9, c));
        CHECK(context_augmented_equivalent(small_weights(3, 3, derive_seed(10, c), 0.4), context_from(ps), mat(s)));
    }
}

TEST_CASE("soft forward saturates to the hard forward") {
    for (int c = 0; c < 100; ++c) {
        const PhrasebookSet ps = random_phrasebook_set(3, 2, derive_seed(11, c));
        const Sequence s = uniform_sequence(3, 10, derive_seed(12, c));
        const SeqEmbedding hard = mat(mlt_forward(ps, s));
        const Weights W = Weights::zeros(3, 2);
        const Mat big = forward_soft(W, context_from(ps), mat(s).dense(), 1e4);
        const Mat mid = forward_soft(W, context_from(ps), mat(s).dense(), 25.0);
        for (int j = 0; j < hard.cols(); ++j) {
            REQUIRE(big(hard.active[j], j) > 1.0 - 1e-6);
            Eigen::Index arg;
            mid.col(j).maxCoeff(&arg);
            REQUIRE(arg == hard.active[j]);
        }
        REQUIRE((mid.colwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("continuous forward") {
    const PhrasebookSet ps = random_phrasebook_set(3, 2, 5);
    const Sequence s = uniform_sequence(3, 10, 6);
    std::vector<Mat> P;
    for (const auto& pb : ps.books) P.push_back(matrix_of(pb).dense());
    CHECK(from_dense(forward_continuous(P, mat(s).dense()), 3) == mat(mlt_forward(ps, s)));
    const std::vector<Mat> zero(2, Mat::Zero(9, 9));
    CHECK(forward_continuous(zero, mat(s).dense()).isZero(0.0));

    // Linear in one column of P_2 with everything else fixed.
    Rng rng(7);
    Vec u(9), v(9);
    for (int r = 0; r < 9; ++r) u(r) = rng.uniform(), v(r) = rng.uniform();
    auto at = [&](const Vec& col) {
        std::vector<Mat> Q = P;
        Q[1].col(4) = col;
        return forward_continuous(Q, mat(s).dense());
    };
    const Mat lhs = at(2.0 * u + 3.0 * v) - at(Vec::Zero(9));
    const Mat rhs = 2.0 * (at(u) - at(Vec::Zero(9))) + 3.0 * (at(v) - at(Vec::Zero(9)));
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("contexts and dropout") {
    const ContextSet id = context_from(PhrasebookSet::identity(3, 2));
    for (const auto& C : id.C) CHECK(C == Mat::Identity(9, 9));
    const PhrasebookSet ps = random_phrasebook_set(3, 2, 1);
    const ContextSet C = context_from(ps);
    for (int i = 0; i < 2; ++i) CHECK(hardmax_cols(C.C[i]).m == matrix_of(ps.books[i]));

    const ContextSet once = drop_column(C, 2, 5);
    CHECK(once.C[1].col(5).isZero(0.0));
    CHECK(drop_column(once, 2, 5).C == once.C);
    ContextSet all = C;
    for (int i = 1; i <= 2; ++i)
        for (int k = 0; k < 9; ++k) all = drop_column(all, i, k);
    for (const auto& m : all.C) CHECK(m.isZero(0.0));
    CHECK_THROWS_AS(drop_column(C, 3, 0), InvalidParameter);
    CHECK_THROWS_AS(drop_column(C, 1, 9), InvalidParameter);

    CHECK(random_drop(ps, DropoutSpec{{0.0, 0.0}, {}}, 3).ctx.C == C.C);
    for (const auto& m : random_drop(ps, DropoutSpec{{1.0, 1.0}, {}}, 3).ctx.C) CHECK(m.isZero(0.0));

    const PhrasebookSet big = random_phrasebook_set(10, 10, 2);
    long long kept = 0, total = 0;
    for (int t = 0; t < 100; ++t) {
        const DropResult r = random_drop(big, DropoutSpec{std::vector<double>(10, 0.5), {}}, derive_seed(4, t));
        for (const auto& row : r.retained)
            for (bool b : row) kept += b, ++total;
    }
    REQUIRE(total == 100000);
    const double sigma = std::sqrt(0.25 / total);
    CHECK(std::abs(static_cast<double>(kept) / total - 0.5) <= 3 * sigma);
}

TEST_CASE("coverable inputs") {
    const PhrasebookSet id = PhrasebookSet::identity(3, 2);
    for (int c = 0; c < 200; ++c) CHECK_FALSE(is_coverable(id, uniform_sequence(3, 16, derive_seed(5, c))));
    // Shifted pairs of 0 0 0 1 0 2 1 1 1 2 2 2 ... enumerate all nine tuples after rotation.
    std::vector<int> chars;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) chars.push_back(a), chars.push_back(b);
    std::vector<int> rotated(chars.size());
    for (std::size_t j = 0; j < chars.size(); ++j) rotated[(j + 1) % chars.size()] = chars[j];
    CHECK(is_coverable(PhrasebookSet::identity(3, 1), make_sequence(3, rotated)));

    CHECK(coverable_length(10, 5, 0.01) == 1704);
    CHECK(coverable_length(10, 2, 0.05) == 1200);

    // The length makes each of the n^2 tuples of each of the d levels go missing with
    // probability about delta / (n d), so the union bound gives a failure rate of n * delta.
    for (auto [n, d] : std::vector<std::pair<int, int>>{{2, 2}, {4, 3}, {10, 5}}) {
        const int L = coverable_length(n, d, 0.01);
        int covered = 0, first_try = 0;
        for (int t = 0; t < 1000; ++t) {
            const PhrasebookSet ps = random_phrasebook_set(n, d, derive_seed(8, t));
            covered += is_coverable(ps, uniform_sequence(n, L, derive_seed(6, t)));
            first_try += sample_coverable(ps, 0.01, derive_seed(7, t)).attempts == 1;
        }
        const double fail = 0.01 * n, sigma = std::sqrt(fail * (1 - fail) / 1000);
        MESSAGE("n=" << n << " d=" << d << ": " << covered << "/1000 coverable, " << first_try << "/1000 first try");
        CHECK(covered >= 1000 * (1 - fail - 3 * sigma));
        CHECK(first_try >= 1000 * (1 - fail - 3 * sigma));
    }
    const PhrasebookSet ps = random_phrasebook_set(4, 3, 9);
    CHECK_THROWS_AS(sample_coverable(ps, 0.0, 1), InvalidParameter);
}

TEST_CASE("weight matrix format round-trips") {
    const Weights W = small_weights(3, 2, 11, 10.0);
    int n = 0;
    const auto back = parse_matrices(format_matrices(W.W, 3), &n);
    CHECK(n == 3);
    REQUIRE(back.size() == 2);
    for (int i = 0; i < 2; ++i) CHECK(back[i] == W.W[i]);
    CHECK_THROWS_AS(parse_matrices("MLT-MATS v1 d=1 n=2\n1 2 3\n"), ParseError);
}

TEST_CASE("sampling gives up after the attempt cap") {
    const PhrasebookSet ps = random_phrasebook_set(4, 2, 3);
    CHECK_THROWS_AS(sample_coverable(ps, 0.01, 1, 0), SamplingFailure);
}
