#include "mlt/core.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "mlt/errors.hpp"
#include "mlt/rng.hpp"

namespace mlt {

namespace {

void check_n(int n) {
    if (n < 2) throw InvalidParameter("alphabet size must be at least 2, got " + std::to_string(n));
}

void check_match(int a, int b) {
    if (a != b)
        throw InvalidParameter("alphabet mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
}

}  // namespace

Sequence make_sequence(int n, std::vector<int> chars) {
    check_n(n);
    if (chars.size() < 2 || chars.size() % 2 != 0)
        throw InvalidParameter("sequence length must be even and >= 2, got " +
                               std::to_string(chars.size()));
    for (int c : chars)
        if (c < 0 || c >= n) throw InvalidParameter("character " + std::to_string(c) + " out of range");
    return Sequence{n, std::move(chars)};
}

Phrasebook Phrasebook::identity(int n) {
    check_n(n);
    Phrasebook pb{n, std::vector<int>(n * n)};
    std::iota(pb.perm.begin(), pb.perm.end(), 0);
    return pb;
}

Phrasebook Phrasebook::inverse() const {
    Phrasebook inv{n, std::vector<int>(perm.size())};
    for (std::size_t i = 0; i < perm.size(); ++i) inv.perm[perm[i]] = static_cast<int>(i);
    return inv;
}

void validate(const Phrasebook& pb) {
    check_n(pb.n);
    if (static_cast<int>(pb.perm.size()) != pb.n * pb.n)
        throw InvalidParameter("phrasebook must have n^2 entries");
    std::vector<int> sorted = pb.perm;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i)
        if (sorted[i] != static_cast<int>(i)) throw InvalidParameter("phrasebook is not a bijection");
}

PhrasebookSet PhrasebookSet::identity(int n, int d) {
    PhrasebookSet p{n, {}};
    for (int i = 0; i < d; ++i) p.books.push_back(Phrasebook::identity(n));
    return p;
}

Phrasebook random_phrasebook(int n, std::uint64_t seed) {
    Phrasebook pb = Phrasebook::identity(n);
    Rng rng(seed);
    rng.shuffle(pb.perm);
    return pb;
}

PhrasebookSet random_phrasebook_set(int n, int d, std::uint64_t seed) {
    if (d < 1) throw InvalidParameter("depth must be at least 1");
    PhrasebookSet p{n, {}};
    for (int i = 0; i < d; ++i) p.books.push_back(random_phrasebook(n, derive_seed(seed, i)));
    return p;
}

Sequence uniform_sequence(int n, int L, std::uint64_t seed) {
    check_n(n);
    if (L < 2 || L % 2 != 0) throw InvalidParameter("sequence length must be even and >= 2");
    Rng rng(seed);
    Sequence s{n, std::vector<int>(L)};
    for (int& c : s.chars) c = static_cast<int>(rng.below(n));
    return s;
}

Sequence rotate_left(const Sequence& s, int k) {
    const int L = s.length();
    Sequence out{s.n, std::vector<int>(L)};
    const int r = ((k % L) + L) % L;
    for (int j = 0; j < L; ++j) out.chars[j] = s.chars[(j + r) % L];
    return out;
}

Sequence apply_step(const Phrasebook& pb, const Sequence& s) {
    check_match(pb.n, s.n);
    if (s.length() % 2 != 0) throw InvalidParameter("sequence length must be even");
    const int n = s.n;
    const int L = s.length();
    Sequence out{n, std::vector<int>(L)};
    for (int j = 0; j < L; j += 2) {
        int a = s.chars[(j + 1) % L];
        int b = s.chars[(j + 2) % L];
        int t = pb.perm[idx(a, b, n)];
        out.chars[j] = t / n;
        out.chars[j + 1] = t % n;
    }
    return out;
}

Sequence mlt_forward(const PhrasebookSet& pset, const Sequence& s) {
    check_match(pset.n, s.n);
    Sequence cur = s;
    for (const auto& pb : pset.books) cur = apply_step(pb, cur);
    return cur;
}

Sequence mlt_inverse(const PhrasebookSet& pset, const Sequence& y) {
    check_match(pset.n, y.n);
    const int n = y.n;
    Sequence cur = y;
    for (int i = pset.d() - 1; i >= 0; --i) {
        Phrasebook inv = pset.books[i].inverse();
        Sequence shifted{n, std::vector<int>(cur.chars.size())};
        for (int j = 0; j + 1 < cur.length(); j += 2) {
            int t = inv.perm[idx(cur.chars[j], cur.chars[j + 1], n)];
            shifted.chars[j] = t / n;
            shifted.chars[j + 1] = t % n;
        }
        cur = rotate_left(shifted, -1);
    }
    return cur;
}

Intermediates intermediates(const PhrasebookSet& pset, const Sequence& s) {
    check_match(pset.n, s.n);
    Intermediates out;
    out.levels.push_back(s);
    for (const auto& pb : pset.books) {
        out.shifted.push_back(rotate_left(out.levels.back(), 1));
        out.levels.push_back(apply_step(pb, out.levels.back()));
    }
    return out;
}

GlyphTable default_glyphs(int n, int d) {
    static const std::string stream =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";
    if ((d + 1) * n > static_cast<int>(stream.size()))
        throw InvalidParameter("default glyph table holds at most 62 glyphs; (d+1)*n = " +
                               std::to_string((d + 1) * n));
    GlyphTable g;
    for (int l = 0; l <= d; ++l) g.levels.push_back(stream.substr(l * n, n));
    return g;
}

std::string serialize_phrasebook(const Phrasebook& pb, int level, const GlyphTable& glyphs) {
    validate(pb);
    if (level < 1 || level >= static_cast<int>(glyphs.levels.size()))
        throw InvalidParameter("level outside glyph table");
    const std::string& in = glyphs.levels[level - 1];
    const std::string& out = glyphs.levels[level];
    const int n = pb.n;
    if (static_cast<int>(in.size()) < n || static_cast<int>(out.size()) < n)
        throw InvalidParameter("glyph table too small for n=" + std::to_string(n));
    std::string text;
    for (int i = 0; i < n * n; ++i) {
        int t = pb.perm[i];
        text += in[i / n];
        text += ' ';
        text += in[i % n];
        text += " -> ";
        text += out[t / n];
        text += ' ';
        text += out[t % n];
        text += "; ";
    }
    return text;
}

namespace {

struct Rule {
    char g[4];
    int column;
};

std::vector<Rule> tokenize_rules(const std::string& text) {
    std::vector<Rule> rules;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find(';', pos);
        if (end == std::string::npos) end = text.size();
        std::string chunk = text.substr(pos, end - pos);
        int column = static_cast<int>(pos) + 1;
        std::size_t arrow = chunk.find("->");
        bool blank = std::all_of(chunk.begin(), chunk.end(), [](unsigned char c) { return std::isspace(c); });
        if (!blank) {
            if (arrow == std::string::npos) throw ParseError("rule without '->'", 1, column);
            std::string lhs = chunk.substr(0, arrow), rhs = chunk.substr(arrow + 2);
            std::string a, b;
            for (char c : lhs)
                if (!std::isspace(static_cast<unsigned char>(c))) a += c;
            for (char c : rhs)
                if (!std::isspace(static_cast<unsigned char>(c))) b += c;
            if (a.size() != 2 || b.size() != 2)
                throw ParseError("each rule needs two glyphs on each side", 1, column);
            rules.push_back(Rule{{a[0], a[1], b[0], b[1]}, column});
        }
        pos = end + 1;
    }
    return rules;
}

}  // namespace

std::pair<Phrasebook, int> parse_phrasebook(const std::string& text, const GlyphTable& glyphs) {
    std::vector<Rule> rules = tokenize_rules(text);
    if (rules.empty()) throw ParseError("no rules");
    const int levels = static_cast<int>(glyphs.levels.size());
    // The level is the first one whose input and output alphabets contain every glyph used.
    int level = 0;
    for (int l = 1; l < levels && level == 0; ++l) {
        const std::string& in = glyphs.levels[l - 1];
        const std::string& out = glyphs.levels[l];
        bool ok = true;
        for (const auto& r : rules) {
            ok = ok && in.find(r.g[0]) != std::string::npos && in.find(r.g[1]) != std::string::npos &&
                 out.find(r.g[2]) != std::string::npos && out.find(r.g[3]) != std::string::npos;
            if (!ok) break;
        }
        if (ok) level = l;
    }
    if (level == 0) {
        // Report the first glyph that is not in any level's alphabet, if any.
        for (const auto& r : rules)
            for (char c : r.g) {
                bool known = false;
                for (const auto& lv : glyphs.levels) known = known || lv.find(c) != std::string::npos;
                if (!known) throw ParseError(std::string("unknown glyph '") + c + "'", 1, r.column);
            }
        throw ParseError("rules do not fit any pair of consecutive levels");
    }
    const std::string& in = glyphs.levels[level - 1];
    const std::string& out = glyphs.levels[level];
    const int n = static_cast<int>(in.size());
    if (static_cast<int>(out.size()) != n) throw ParseError("levels have different alphabet sizes");
    Phrasebook pb{n, std::vector<int>(n * n, -1)};
    std::vector<bool> used(n * n, false);
    for (const auto& r : rules) {
        int i = idx(static_cast<int>(in.find(r.g[0])), static_cast<int>(in.find(r.g[1])), n);
        int t = idx(static_cast<int>(out.find(r.g[2])), static_cast<int>(out.find(r.g[3])), n);
        if (pb.perm[i] != -1) throw ParseError("duplicate rule for input tuple", 1, r.column);
        if (used[t]) throw ParseError("output tuple used twice (not a bijection)", 1, r.column);
        pb.perm[i] = t;
        used[t] = true;
    }
    for (int i = 0; i < n * n; ++i)
        if (pb.perm[i] == -1)
            throw ParseError(std::string("missing rule for input tuple '") + in[i / n] + " " + in[i % n] + "'");
    return {pb, level};
}

std::string format_task(const PhrasebookSet& pset) {
    std::ostringstream os;
    os << "MLT v1 d=" << pset.d() << " n=" << pset.n << "\n";
    for (const auto& pb : pset.books) {
        for (std::size_t i = 0; i < pb.perm.size(); ++i) os << (i ? " " : "") << pb.perm[i];
        os << "\n";
    }
    return os.str();
}

PhrasebookSet parse_task(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    auto next_line = [&]() -> bool {
        while (std::getline(is, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) return true;
        }
        return false;
    };
    if (!next_line()) throw ParseError("empty task file");
    int d = 0, n = 0;
    char tail = 0;
    if (std::sscanf(line.c_str(), "MLT v1 d=%d n=%d%c", &d, &n, &tail) != 2)
        throw ParseError("expected header 'MLT v1 d=<d> n=<n>'", lineno, 1);
    if (d < 1 || n < 2) throw ParseError("invalid d or n in header", lineno, 1);
    PhrasebookSet pset{n, {}};
    for (int i = 0; i < d; ++i) {
        if (!next_line()) throw ParseError("expected " + std::to_string(d) + " phrasebook lines", lineno + 1, 1);
        Phrasebook pb{n, {}};
        std::size_t pos = 0;
        while (pos < line.size()) {
            while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
            if (pos >= line.size()) break;
            std::size_t start = pos;
            while (pos < line.size() && !std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
            std::string tok = line.substr(start, pos - start);
            int col = static_cast<int>(start) + 1;
            if (!std::all_of(tok.begin(), tok.end(), [](unsigned char c) { return std::isdigit(c); }))
                throw ParseError("expected non-negative integer, got '" + tok + "'", lineno, col);
            pb.perm.push_back(std::stoi(tok));
        }
        if (static_cast<int>(pb.perm.size()) != n * n)
            throw ParseError("expected " + std::to_string(n * n) + " entries", lineno, 1);
        try {
            validate(pb);
        } catch (const InvalidParameter& e) {
            throw ParseError(e.what(), lineno, 1);
        }
        pset.books.push_back(std::move(pb));
    }
    if (next_line()) throw ParseError("trailing content after phrasebooks", lineno, 1);
    return pset;
}

std::string format_sequence(const Sequence& s) {
    std::string out;
    for (std::size_t i = 0; i < s.chars.size(); ++i) {
        if (i) out += ' ';
        out += std::to_string(s.chars[i]);
    }
    return out;
}

Sequence parse_sequence(int n, const std::string& text) {
    std::vector<int> chars;
    std::string tok;
    auto flush = [&](std::size_t col) {
        if (tok.empty()) return;
        if (!std::all_of(tok.begin(), tok.end(), [](unsigned char c) { return std::isdigit(c); }))
            throw ParseError("expected character index, got '" + tok + "'", 1, static_cast<int>(col));
        chars.push_back(std::stoi(tok));
        tok.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (std::isspace(static_cast<unsigned char>(c)) || c == ',')
            flush(i + 1 - tok.size());
        else
            tok += c;
    }
    flush(text.size() + 1 - tok.size());
    return make_sequence(n, std::move(chars));
}

}  // namespace mlt
