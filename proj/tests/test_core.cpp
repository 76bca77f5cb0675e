#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "mlt/core.hpp"
#include "mlt/errors.hpp"
#include "mlt/rng.hpp"

using namespace mlt;

namespace {

Phrasebook book(int n, std::vector<int> perm) {
    Phrasebook pb{n, std::move(perm)};
    validate(pb);
    return pb;
}

std::vector<int> rotate(const std::vector<int>& v, int k) {
    std::vector<int> out(v.size());
    const int L = static_cast<int>(v.size());
    for (int j = 0; j < L; ++j) out[j] = v[((j + k) % L + L) % L];
    return out;
}

std::vector<Sequence> all_sequences(int n, int L) {
    std::vector<Sequence> out;
    long long total = 1;
    for (int i = 0; i < L; ++i) total *= n;
    for (long long code = 0; code < total; ++code) {
        std::vector<int> c(L);
        long long x = code;
        for (int i = 0; i < L; ++i, x /= n) c[i] = static_cast<int>(x % n);
        out.push_back(make_sequence(n, c));
    }
    return out;
}

}  // namespace

TEST_CASE("random phrasebooks are deterministic permutations") {
    const Phrasebook a = random_phrasebook(5, 99), b = random_phrasebook(5, 99);
    CHECK(a.perm == b.perm);
    CHECK_NOTHROW(validate(a));
    CHECK(random_phrasebook(5, 100).perm != a.perm);
    CHECK_THROWS_AS(random_phrasebook(1, 1), InvalidParameter);
}

TEST_CASE("n=2 seed census covers all 24 phrasebooks uniformly") {
    std::map<std::vector<int>, long long> counts;
    const long long N = 100000;
    for (long long s = 0; s < N; ++s) ++counts[random_phrasebook(2, static_cast<std::uint64_t>(s)).perm];
    REQUIRE(counts.size() == 24);
    const double p = 1.0 / 24.0, sigma = std::sqrt(p * (1 - p) / N);
    for (const auto& [perm, c] : counts) CHECK(std::abs(static_cast<double>(c) / N - p) <= 3 * sigma);
}

TEST_CASE("apply_step examples") {
    const Phrasebook id = Phrasebook::identity(3);
    CHECK(apply_step(Phrasebook::identity(2), make_sequence(2, {0, 1})).chars == std::vector<int>{1, 0});
    CHECK(apply_step(id, make_sequence(3, {0, 1, 2, 1})).chars == std::vector<int>{1, 2, 1, 0});
    // Shifted pairs (1,1) and (0,0) map through perm[3] = 2 and perm[0] = 0.
    const Phrasebook pb = book(2, {0, 3, 1, 2});
    CHECK(apply_step(pb, make_sequence(2, {0, 1, 1, 0})).chars == std::vector<int>{1, 0, 0, 0});
    CHECK_THROWS_AS(apply_step(pb, make_sequence(3, {0, 1})), InvalidParameter);
}

TEST_CASE("mlt_forward composes translation steps") {
    const PhrasebookSet one = random_phrasebook_set(4, 1, 3);
    const Sequence s = uniform_sequence(4, 10, 5);
    CHECK(mlt_forward(one, s) == apply_step(one.books[0], s));

    const Sequence t = uniform_sequence(6, 12, 8);
    CHECK(mlt_forward(PhrasebookSet::identity(6, 4), t).chars == rotate(t.chars, 4));

    const PhrasebookSet ps = random_phrasebook_set(8, 5, 11);
    const Sequence u = uniform_sequence(8, 20, 12);
    Sequence cur = u;
    for (const auto& pb : ps.books) cur = apply_step(pb, cur);
    CHECK(mlt_forward(ps, u) == cur);
    CHECK_THROWS_AS(mlt_forward(ps, uniform_sequence(7, 4, 1)), InvalidParameter);
}

TEST_CASE("inverse round-trips") {
    for (auto [d, n] : std::vector<std::pair<int, int>>{{2, 2}, {5, 8}, {5, 10}}) {
        for (int c = 0; c < 1000; ++c) {
            const PhrasebookSet ps = random_phrasebook_set(n, d, derive_seed(1, c));
            const Sequence s = uniform_sequence(n, 2 + 2 * (c % 10), derive_seed(2, c));
            REQUIRE(mlt_inverse(ps, mlt_forward(ps, s)) == s);
            REQUIRE(mlt_forward(ps, mlt_inverse(ps, s)) == s);
        }
    }
    const Sequence y = uniform_sequence(5, 8, 4);
    CHECK(mlt_inverse(PhrasebookSet::identity(5, 3), y).chars == rotate(y.chars, -3));
}

TEST_CASE("forward is a bijection on small input spaces") {
    for (int L : {2, 4, 6, 8}) {
        const PhrasebookSet ps = random_phrasebook_set(2, 2, static_cast<std::uint64_t>(L));
        std::set<std::vector<int>> seen;
        const auto all = all_sequences(2, L);
        for (const auto& s : all) seen.insert(mlt_forward(ps, s).chars);
        CHECK(seen.size() == all.size());
    }
}

TEST_CASE("even rotations commute with translation") {
    for (int c = 0; c < 200; ++c) {
        const PhrasebookSet ps = random_phrasebook_set(4, 3, derive_seed(3, c));
        const Sequence s = uniform_sequence(4, 12, derive_seed(4, c));
        for (int k = 0; k < 6; ++k)
            REQUIRE(mlt_forward(ps, rotate_left(s, 2 * k)) == rotate_left(mlt_forward(ps, s), 2 * k));
    }
}

TEST_CASE("intermediates") {
    const PhrasebookSet ps = random_phrasebook_set(5, 4, 21);
    const Sequence s = uniform_sequence(5, 10, 22);
    const Intermediates im = intermediates(ps, s);
    REQUIRE(im.levels.size() == 5);
    REQUIRE(im.shifted.size() == 4);
    CHECK(im.levels.front() == s);
    CHECK(im.levels.back() == mlt_forward(ps, s));
    for (int i = 0; i < 4; ++i) {
        CHECK(im.shifted[i] == rotate_left(im.levels[i], 1));
        CHECK(im.levels[i + 1] == apply_step(ps.books[i], im.levels[i]));
    }
}

TEST_CASE("phrasebook text format") {
    const GlyphTable g = default_glyphs(2, 1);
    CHECK(serialize_phrasebook(Phrasebook::identity(2), 1, g) == "A A -> C C; A B -> C D; B A -> D C; B B -> D D; ");

    const auto [pb, level] = parse_phrasebook("B B -> D D; A B -> C D; B A -> D C; A A -> C C;", g);
    CHECK(pb == Phrasebook::identity(2));
    CHECK(level == 1);

    const GlyphTable g8 = default_glyphs(8, 5);
    for (int c = 0; c < 1000; ++c) {
        const Phrasebook r = random_phrasebook(8, derive_seed(5, c));
        const int lvl = 1 + c % 5;
        const auto [back, back_level] = parse_phrasebook(serialize_phrasebook(r, lvl, g8), g8);
        REQUIRE(back == r);
        REQUIRE(back_level == lvl);
    }

    CHECK_THROWS_AS(parse_phrasebook("A A -> C C; A B -> C D; B A -> D C; B Z -> D D;", g), ParseError);
    CHECK_THROWS_AS(parse_phrasebook("A A -> C C; A A -> C D; B A -> D C; B B -> D D;", g), ParseError);
    CHECK_THROWS_AS(parse_phrasebook("A A -> C C; A B -> C C; B A -> D C; B B -> D D;", g), ParseError);
    CHECK_THROWS_AS(parse_phrasebook("A A -> C C; A B -> C D; B A -> D C;", g), ParseError);
    try {
        parse_phrasebook("A A -> C C; A B -> C D; B A -> D C; B Z -> D D;", g);
    } catch (const ParseError& e) {
        CHECK(e.line() == 1);
        CHECK(e.column() > 30);
    }
    CHECK_THROWS_AS(default_glyphs(16, 3), InvalidParameter);
}

TEST_CASE("uniform sequences") {
    const Sequence a = uniform_sequence(7, 40, 3), b = uniform_sequence(7, 40, 3);
    CHECK(a == b);
    CHECK(a.chars.size() == 40);
    CHECK(std::all_of(a.chars.begin(), a.chars.end(), [](int c) { return c >= 0 && c < 7; }));
    CHECK_THROWS_AS(uniform_sequence(7, 5, 3), InvalidParameter);
}

TEST_CASE("machine task format") {
    const PhrasebookSet ps = random_phrasebook_set(6, 3, 77);
    CHECK(parse_task(format_task(ps)) == ps);
    CHECK_THROWS_AS(parse_task("MLT v2 d=1 n=2\n0 1 2 3\n"), ParseError);
    try {
        parse_task("MLT v1 d=2 n=2\n0 1 2 3\n0 1 x 3\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
        CHECK(e.column() == 5);
    }
    CHECK_THROWS_AS(parse_task("MLT v1 d=1 n=2\n0 1 1 3\n"), ParseError);
    CHECK(parse_sequence(3, "0, 2, 1, 1") == make_sequence(3, {0, 2, 1, 1}));
    CHECK_THROWS_AS(parse_sequence(3, "0 3"), Error);
}
