#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace mlt {

// Characters are 0-based; the pair (a, b) lives at index a*n + b.
inline int idx(int a, int b, int n) { return a * n + b; }

struct Sequence {
    int n = 0;
    std::vector<int> chars;

    int length() const { return static_cast<int>(chars.size()); }
    bool operator==(const Sequence&) const = default;
};

// Validates n >= 2, even length >= 2 and the character range.
Sequence make_sequence(int n, std::vector<int> chars);

struct Phrasebook {
    int n = 0;
    std::vector<int> perm;  // perm[idx(a,b)] = idx(c,d)

    static Phrasebook identity(int n);
    Phrasebook inverse() const;
    bool operator==(const Phrasebook&) const = default;
};

// Throws InvalidParameter unless perm is a permutation of [n^2].
void validate(const Phrasebook& pb);

struct PhrasebookSet {
    int n = 0;
    std::vector<Phrasebook> books;

    int d() const { return static_cast<int>(books.size()); }
    const Phrasebook& level(int i) const { return books.at(i - 1); }  // 1-based
    static PhrasebookSet identity(int n, int d);
    bool operator==(const PhrasebookSet&) const = default;
};

Phrasebook random_phrasebook(int n, std::uint64_t seed);
PhrasebookSet random_phrasebook_set(int n, int d, std::uint64_t seed);
Sequence uniform_sequence(int n, int L, std::uint64_t seed);

Sequence rotate_left(const Sequence& s, int k);
Sequence apply_step(const Phrasebook& pb, const Sequence& s);
Sequence mlt_forward(const PhrasebookSet& pset, const Sequence& s);
Sequence mlt_inverse(const PhrasebookSet& pset, const Sequence& y);

struct Intermediates {
    std::vector<Sequence> levels;   // s_1 ... s_{d+1}
    std::vector<Sequence> shifted;  // rotated s_1 ... s_d, the inputs of each translate
};
Intermediates intermediates(const PhrasebookSet& pset, const Sequence& s);

// Per-level glyph strings; levels[0] is the input alphabet.
struct GlyphTable {
    std::vector<std::string> levels;
};

GlyphTable default_glyphs(int n, int d);

// "a b -> C D; " rules in ascending input-index order. level is 1-based.
std::string serialize_phrasebook(const Phrasebook& pb, int level, const GlyphTable& glyphs);
std::pair<Phrasebook, int> parse_phrasebook(const std::string& text, const GlyphTable& glyphs);

// Machine format: "MLT v1 d=<d> n=<n>" then d lines of n^2 integers.
std::string format_task(const PhrasebookSet& pset);
PhrasebookSet parse_task(const std::string& text);

std::string format_sequence(const Sequence& s);
Sequence parse_sequence(int n, const std::string& text);

}  // namespace mlt
