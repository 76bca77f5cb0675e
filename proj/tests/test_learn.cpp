#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "mlt/errors.hpp"
#include "mlt/learn.hpp"
#include "mlt/rng.hpp"

using namespace mlt;

namespace {

std::vector<StochasticMatrix> matrices(const PhrasebookSet& ps) {
    std::vector<StochasticMatrix> P;
    for (const auto& pb : ps.books) P.push_back(matrix_of(pb));
    return P;
}

std::vector<Mat> dense(const std::vector<StochasticMatrix>& P) {
    std::vector<Mat> out;
    for (const auto& p : P) out.push_back(p.dense());
    return out;
}

Weights random_weights(int n, int d, std::uint64_t seed, double bound) {
    Weights W = Weights::zeros(n, d);
    Rng rng(seed);
    for (auto& w : W.W)
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = (2.0 * rng.uniform() - 1.0) * bound;
    return W;
}

bool close(const Vec& a, const Vec& b, double rel) {
    for (Eigen::Index i = 0; i < a.size(); ++i)
        if (std::abs(a(i) - b(i)) > rel * (1.0 + std::abs(b(i)))) return false;
    return true;
}

// Relabels characters by sigma at every level; tuples move accordingly.
Mat relabel(const Mat& M, const std::vector<int>& sigma) {
    const int n = static_cast<int>(sigma.size());
    Mat out(M.rows(), M.cols());
    for (int r = 0; r < M.rows(); ++r)
        for (int c = 0; c < M.cols(); ++c)
            out(idx(sigma[r / n], sigma[r % n], n), idx(sigma[c / n], sigma[c % n], n)) = M(r, c);
    return out;
}

}  // namespace

TEST_CASE("heuristic search on a tiny instance") {
    const PhrasebookSet ps = random_phrasebook_set(2, 1, 4);
    Sequence s;
    for (std::uint64_t t = 0;; ++t) {
        s = uniform_sequence(2, 8, derive_seed(1, t));
        if (is_coverable(ps, s)) break;
    }
    const SearchReport r = heuristic_search(ps, mat(s), mat(mlt_forward(ps, s)));
    CHECK(r.success);
    CHECK(r.forward_passes <= 16);
    CHECK(hardmax_cols(r.recovered.W[0]).m == matrix_of(ps.books[0]));
}

TEST_CASE("heuristic search recovers every column within n^4 d passes") {
    const PhrasebookSet ps = random_phrasebook_set(4, 3, 5);
    const Sequence s = sample_coverable(ps, 0.01, 6).s;
    const SearchReport r = heuristic_search(ps, mat(s), mat(mlt_forward(ps, s)));
    REQUIRE(r.success);
    CHECK(r.forward_passes <= 256 * 3);
    for (int i = 0; i < 3; ++i) CHECK(hardmax_cols(r.recovered.W[i]).m == matrix_of(ps.books[i]));

    SearchOptions first;
    first.confirm_unique = false;
    const SearchReport quick = heuristic_search(ps, mat(s), mat(mlt_forward(ps, s)), first);
    CHECK(quick.success);
    CHECK(quick.forward_passes < r.forward_passes);
}

TEST_CASE("heuristic search reports a perturbed target instead of recovering") {
    const PhrasebookSet ps = random_phrasebook_set(3, 2, 7);
    const Sequence s = sample_coverable(ps, 0.01, 8).s;
    SeqEmbedding target = mat(mlt_forward(ps, s));
    target.active[3] = (target.active[3] + 1) % 9;
    const SearchReport r = heuristic_search(ps, mat(s), target);
    CHECK_FALSE(r.success);
    CHECK(r.failed_column >= 0);
    CHECK(r.failed_level >= 1);
    CHECK(r.matches_at_failure != 1);
    CHECK_FALSE(r.message.empty());
}

TEST_CASE("second-layer closed form: one wrong column used twice") {
    // Search for an instance where column k of P_2 sits at row 3, belongs at row 7
    // and is used by exactly two output columns.
    const int n = 3;
    bool found = false;
    for (std::uint64_t t = 0; t < 5000 && !found; ++t) {
        const PhrasebookSet ps = random_phrasebook_set(n, 2, derive_seed(2, t));
        const auto it = std::find(ps.books[1].perm.begin(), ps.books[1].perm.end(), 7);
        const int k = static_cast<int>(it - ps.books[1].perm.begin());
        const Sequence s = uniform_sequence(n, 6, derive_seed(3, t));
        auto P = matrices(ps);
        P[1].row_of[k] = 3;
        const SeqEmbedding V1 = mat(s), Vt = mat(mlt_forward(ps, s));
        const SurrogateGrad g = surrogate_grad_col(P, V1, Vt, 2, k);
        if (g.tally.alpha != 2) continue;
        found = true;
        CHECK(g.closed_form);
        Vec expect = Vec::Zero(9);
        expect(3) = 4.0;
        expect(7) = -4.0;
        CHECK(g.grad == expect);
        CHECK(close(oracle_grad(dense(P), V1.dense(), Vt.dense(), 2, k), g.grad, 1e-6));

        const auto correct = matrices(ps);
        CHECK(surrogate_grad_col(correct, V1, Vt, 2, k).grad.isZero(0.0));
        CHECK(oracle_grad(dense(correct), V1.dense(), Vt.dense(), 2, k).cwiseAbs().maxCoeff() < 1e-8);
    }
    CHECK(found);
}

TEST_CASE("first-layer closed form: both characters wrong, one boundary use") {
    const int n = 2;
    int checked = 0;
    for (std::uint64_t t = 0; t < 20000 && checked < 20; ++t) {
        const PhrasebookSet ps = random_phrasebook_set(n, 2, derive_seed(4, t));
        const Sequence s = uniform_sequence(n, 8, derive_seed(5, t));
        const int k = static_cast<int>(t % 4);
        const int target_row = ps.books[0].perm[k];
        const int as = target_row / n, bs = target_row % n;
        const int wrong = idx(1 - as, 1 - bs, n);
        auto P = matrices(ps);
        P[0].row_of[k] = wrong;
        const SeqEmbedding V1 = mat(s), Vt = mat(mlt_forward(ps, s));
        const SurrogateGrad g = surrogate_grad_col(P, V1, Vt, 1, k);
        if (!g.closed_form || g.tally.alpha != 1 || g.tally.beta != 0) continue;
        ++checked;
        Vec expect = Vec::Zero(4);
        for (int p = 0; p < n; ++p) {
            expect(idx(1 - as, p, n)) += 2.0;
            expect(idx(p, 1 - bs, n)) += 2.0;
            expect(idx(as, p, n)) -= 2.0;
            expect(idx(p, bs, n)) -= 2.0;
        }
        REQUIRE(g.grad == expect);
        Eigen::Index arg;
        CHECK(g.grad.minCoeff(&arg) == -4.0);
        CHECK(arg == target_row);
        CHECK((g.grad.array() == -4.0).count() == 1);
        CHECK(close(oracle_grad(dense(P), V1.dense(), Vt.dense(), 1, k), g.grad, 1e-6));
    }
    CHECK(checked == 20);
}

TEST_CASE("closed-form gradients agree with finite differences") {
    int closed = 0;
    for (int c = 0; c < 500; ++c) {
        const int n = 2 + c % 3;
        const PhrasebookSet ps = random_phrasebook_set(n, 2, derive_seed(6, c));
        const Sequence s = uniform_sequence(n, 2 + 2 * (c % 10), derive_seed(7, c));
        Rng rng(derive_seed(8, c));
        const int level = 1 + static_cast<int>(rng.below(2));
        const int k = static_cast<int>(rng.below(n * n));
        auto P = matrices(ps);
        P[level - 1].row_of[k] = static_cast<int>(rng.below(n * n));
        const SeqEmbedding V1 = mat(s), Vt = mat(mlt_forward(ps, s));
        const SurrogateGrad g = surrogate_grad_col(P, V1, Vt, level, k);
        closed += g.closed_form;
        REQUIRE(close(oracle_grad(dense(P), V1.dense(), Vt.dense(), level, k), g.grad, 1e-6));
    }
    CHECK(closed >= 400);
}

TEST_CASE("reverse-mode MSE gradients agree with finite differences for deeper models") {
    for (int c = 0; c < 50; ++c) {
        const PhrasebookSet ps = random_phrasebook_set(3, 3, derive_seed(9, c));
        const Sequence s = uniform_sequence(3, 8, derive_seed(10, c));
        auto P = dense(matrices(ps));
        const Weights noise = random_weights(3, 3, derive_seed(11, c), 0.3);
        for (int i = 0; i < 3; ++i) P[i] += noise.W[i];
        const auto grads = mse_grad_all(P, mat(s).dense(), mat(mlt_forward(ps, s)).dense());
        const int level = 1 + c % 3, k = c % 9;
        REQUIRE(close(oracle_grad(P, mat(s).dense(), mat(mlt_forward(ps, s)).dense(), level, k),
                      grads[level - 1].col(k), 1e-6));
    }
}

TEST_CASE("layerwise surrogate descent, d = 2, all n = 2 phrasebook pairs") {
    std::vector<Phrasebook> books;
    for (std::uint64_t s = 0; books.size() < 24; ++s) {
        const Phrasebook pb = random_phrasebook(2, s);
        if (std::find(books.begin(), books.end(), pb) == books.end()) books.push_back(pb);
    }
    std::vector<PhrasebookSet> all;
    for (const auto& a : books)
        for (const auto& b : books) all.push_back(PhrasebookSet{2, {a, b}});

    Sequence input;
    for (std::uint64_t t = 0;; ++t) {
        input = uniform_sequence(2, 16, derive_seed(12, t));
        if (std::all_of(all.begin(), all.end(), [&](const PhrasebookSet& ps) { return is_coverable(ps, input); }))
            break;
    }
    for (const auto& ps : all) {
        const Gd2Result r = gd_d2(ps, mat(input), mat(mlt_forward(ps, input)), Weights::zeros(2, 2));
        REQUIRE(r.success);
        REQUIRE(r.used_closed_form);
        REQUIRE(r.updates_per_column == std::vector<int>{2, 1});
        REQUIRE(r.trace.rows.size() == 12);
    }
}

TEST_CASE("layerwise surrogate descent, d = 2, n = 10") {
    for (int c = 0; c < 3; ++c) {
        const PhrasebookSet ps = random_phrasebook_set(10, 2, derive_seed(13, c));
        const Sequence s = sample_coverable(ps, 0.01, derive_seed(14, c)).s;
        const Weights init = c == 0 ? Weights::zeros(10, 2) : random_weights(10, 2, derive_seed(15, c), 0.49);
        const Gd2Result r = gd_d2(ps, mat(s), mat(mlt_forward(ps, s)), init);
        CHECK(r.success);
        CHECK(r.trace.rows.size() == 300);
    }
    const PhrasebookSet ps = random_phrasebook_set(3, 2, 1);
    const Sequence s = uniform_sequence(3, 4, 2);
    CHECK_THROWS_AS(gd_d2(ps, mat(s), mat(mlt_forward(ps, s)), random_weights(3, 2, 3, 0.6)), InvalidParameter);
    CHECK_THROWS_AS(gd_d2(random_phrasebook_set(3, 3, 1), mat(s), mat(s), Weights::zeros(3, 3)), InvalidParameter);
    CHECK_FALSE(gd_d2(ps, mat(s), mat(mlt_forward(ps, s)), Weights::zeros(3, 2)).success);
}

TEST_CASE("softmax surrogate gradients agree with finite differences") {
    for (int c = 0; c < 60; ++c) {
        const int n = 2 + c % 3, d = 1 + c % 3;
        const PhrasebookSet ps = random_phrasebook_set(n, d, derive_seed(16, c));
        const Sequence s = uniform_sequence(n, 2 * n * n, derive_seed(17, c));
        ContextSet C = context_from(ps);
        Rng rng(derive_seed(18, c));
        for (int i = 1; i <= d; ++i) C = drop_column(C, i, static_cast<int>(rng.below(n * n)));
        const Weights W = random_weights(n, d, derive_seed(19, c), 0.1);
        const Mat V1 = mat(s).dense();
        const SeqEmbedding target = mat(mlt_forward(ps, s));
        const SoftLoss sl = soft_backward(W, C, V1, target);
        CHECK(sl.loss == doctest::Approx(soft_loss(W, C, V1, target)).epsilon(1e-12));
        for (int probe = 0; probe < 8; ++probe) {
            const int i = static_cast<int>(rng.below(d));
            const int r = static_cast<int>(rng.below(n * n)), k = static_cast<int>(rng.below(n * n));
            const double h = 1e-6;
            Weights up = W, down = W;
            up.W[i](r, k) += h;
            down.W[i](r, k) -= h;
            const double fd = (soft_loss(up, C, V1, target) - soft_loss(down, C, V1, target)) / (2 * h);
            REQUIRE(std::abs(fd - sl.grads[i](r, k)) <= 1e-4 * (1.0 + std::abs(fd)));
        }
    }
}

TEST_CASE("softmax surrogate loss properties") {
    const PhrasebookSet ps = random_phrasebook_set(4, 3, 21);
    const Sequence s = uniform_sequence(4, 40, 22);
    const SeqEmbedding target = mat(mlt_forward(ps, s));
    Weights planted = Weights::zeros(4, 3);
    for (int i = 0; i < 3; ++i) planted.W[i] = matrix_of(ps.books[i]).dense();
    const double loss = soft_loss(planted, ContextSet::zeros(4, 3), mat(s).dense(), target);
    CHECK(loss >= 0.0);
    CHECK(loss / target.cols() <= 1e-6);

    const Weights W = random_weights(4, 3, 23, 0.5);
    const ContextSet C = drop_column(context_from(ps), 2, 6);
    const double base = soft_loss(W, C, mat(s).dense(), target);
    const std::vector<int> sigma{2, 0, 3, 1};
    Weights W2 = W;
    ContextSet C2 = C;
    for (int i = 0; i < 3; ++i) {
        W2.W[i] = relabel(W.W[i], sigma);
        C2.C[i] = relabel(C.C[i], sigma);
    }
    std::vector<int> chars;
    for (int ch : s.chars) chars.push_back(sigma[ch]);
    std::vector<int> out;
    for (int ch : unmat(target).chars) out.push_back(sigma[ch]);
    const double moved = soft_loss(W2, C2, mat(make_sequence(4, chars)).dense(), mat(make_sequence(4, out)));
    CHECK(std::abs(moved - base) <= 1e-12 * (1 + base));
}

TEST_CASE("small-step descent decreases the softmax loss monotonically") {
    const PhrasebookSet ps = random_phrasebook_set(3, 2, 31);
    const Sequence s = uniform_sequence(3, 24, 32);
    const SeqEmbedding target = mat(mlt_forward(ps, s));
    const ContextSet C = drop_column(context_from(ps), 1, 4);
    Weights W = Weights::zeros(3, 2);
    double prev = soft_loss(W, C, mat(s).dense(), target);
    for (int t = 0; t < 100; ++t) {
        const SoftLoss sl = soft_backward(W, C, mat(s).dense(), target);
        for (int i = 0; i < 2; ++i) W.W[i] -= 1e-4 * sl.grads[i];
        const double cur = soft_loss(W, C, mat(s).dense(), target);
        REQUIRE(cur <= prev);
        prev = cur;
    }
}

TEST_CASE("column match fraction") {
    const PhrasebookSet ps = random_phrasebook_set(4, 2, 41);
    Weights W = Weights::zeros(4, 2);
    for (int i = 0; i < 2; ++i) W.W[i] = matrix_of(ps.books[i]).dense();
    CHECK(column_match_fraction(W, ps) == std::vector<double>{1.0, 1.0});
    const int k = 5, right = ps.books[0].perm[k];
    W.W[0](right, k) = 0.0;
    W.W[0]((right + 1) % 16, k) = 1.0;
    CHECK(column_match_fraction(W, ps)[0] == 15.0 / 16.0);

    double total = 0.0;
    for (int t = 0; t < 2000; ++t) total += column_match_fraction(Weights::zeros(4, 1), random_phrasebook_set(4, 1, t))[0];
    CHECK(total / 2000 == doctest::Approx(1.0 / 16.0).epsilon(0.1));
}

TEST_CASE("softmax descent is deterministic and records a trace") {
    const PhrasebookSet ps = random_phrasebook_set(3, 2, 51);
    SoftGdConfig cfg;
    cfg.mode = GdMode::fullparam;
    cfg.seed = 3;
    cfg.trace_every = 5;
    const SoftGdResult a = gd_soft(ps, cfg), b = gd_soft(ps, cfg);
    CHECK(a.W.W == b.W.W);
    CHECK(a.trace.to_csv() == b.trace.to_csv());
    CHECK(a.steps_run == 3 * 2 * 9);
    for (const auto& row : a.trace.rows) {
        CHECK(row.masked_level == (row.step - 1) / 9 % 2 + 1);
        CHECK(row.masked_col == (row.step - 1) % 9);
        for (double m : row.match) CHECK((m >= 0.0 && m <= 1.0));
    }
    for (const auto& w : a.W.W) CHECK((w.array() >= 0.0 && w.array() <= 1.0).all());

    SoftGdConfig mixed = cfg;
    mixed.schedule = MaskSchedule::mixed;
    CHECK(gd_soft(ps, mixed).trace.to_csv() == gd_soft(ps, mixed).trace.to_csv());
}
