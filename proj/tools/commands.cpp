#include "commands.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "mlt/core.hpp"
#include "mlt/errors.hpp"
#include "mlt/gradacc.hpp"
#include "mlt/learn.hpp"
#include "mlt/report.hpp"
#include "mlt/rng.hpp"
#include "mlt/sq.hpp"
#include "mlt/tfsim.hpp"

namespace mltlab {

namespace {

using namespace mlt;

int geti(const Invocation& inv, const char* k) { return inv.cfg.at(k).get<int>(); }
long long getll(const Invocation& inv, const char* k) { return inv.cfg.at(k).get<long long>(); }
std::uint64_t getu(const Invocation& inv, const char* k) { return inv.cfg.at(k).get<std::uint64_t>(); }
double getd(const Invocation& inv, const char* k) { return inv.cfg.at(k).get<double>(); }
bool getb(const Invocation& inv, const char* k) { return inv.cfg.at(k).get<bool>(); }
std::string gets(const Invocation& inv, const char* k) { return inv.cfg.at(k).get<std::string>(); }

void require(bool ok, const std::string& what) {
    if (!ok) throw InvalidParameter(what);
}

std::string out_path(const Invocation& inv, const std::string& file) {
    const std::string dir = gets(inv, "out");
    return dir.empty() ? file : dir + "/" + file;
}

void write_csv(const Invocation& inv, const std::string& file, const std::string& body) {
    const std::string path = out_path(inv, file);
    report::write_file(path, report::csv_header(inv.command, inv.cfg.dump()) + body);
    std::cout << "wrote " << path << "\n";
}

void write_svg(const Invocation& inv, const std::string& file, const std::string& body) {
    const std::string path = out_path(inv, file);
    report::write_file(path, body);
    std::cout << "wrote " << path << "\n";
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InvalidParameter("cannot read " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void check_nd(int n, int d) {
    require(n >= 2, "n must be >= 2");
    require(d >= 1, "d must be >= 1");
}

// ------------------------------------------------------------------ tasks

int cmd_gen_task(const Invocation& inv) {
    const int n = geti(inv, "n"), d = geti(inv, "d");
    check_nd(n, d);
    const PhrasebookSet ps = random_phrasebook_set(n, d, getu(inv, "seed"));
    const std::string prefix = gets(inv, "prefix");
    const std::string mlt_path = out_path(inv, prefix + ".mlt");
    report::write_file(mlt_path, format_task(ps));
    std::string text;
    if ((d + 1) * n <= 62) {
        const GlyphTable g = default_glyphs(n, d);
        for (int i = 1; i <= d; ++i) text += serialize_phrasebook(ps.level(i), i, g) + "\n";
        report::write_file(out_path(inv, prefix + ".txt"), text);
        std::cout << "wrote " << mlt_path << " and " << out_path(inv, prefix + ".txt") << "\n";
    } else {
        std::cout << "wrote " << mlt_path << " (too many characters for the glyph table; no text form)\n";
    }
    return kOk;
}

int cmd_translate(const Invocation& inv) {
    const std::string task = gets(inv, "task");
    require(!task.empty(), "--task is required");
    const PhrasebookSet ps = parse_task(read_file(task));
    const int L = geti(inv, "random");
    const std::string seq = gets(inv, "sequence");
    require((L > 0) != !seq.empty(), "give exactly one of --sequence or --random");
    const Sequence s = L > 0 ? uniform_sequence(ps.n, L, getu(inv, "seed")) : parse_sequence(ps.n, seq);
    const Sequence src = getb(inv, "inverse") ? mlt_inverse(ps, s) : s;
    if (getb(inv, "trace")) {
        for (const auto& level : intermediates(ps, src).levels) std::cout << format_sequence(level) << "\n";
    } else {
        std::cout << format_sequence(getb(inv, "inverse") ? src : mlt_forward(ps, src)) << "\n";
    }
    return kOk;
}

// ------------------------------------------------------------------ learners

std::string trace_svg(const GdTrace& trace, int d, const std::string& title) {
    std::vector<report::Series> series(d);
    for (int i = 0; i < d; ++i) series[i].label = "level " + std::to_string(i + 1);
    for (const auto& row : trace.rows)
        for (int i = 0; i < d; ++i) {
            series[i].x.push_back(static_cast<double>(row.step));
            series[i].y.push_back(100.0 * row.match[i]);
        }
    return report::svg_line_chart({title, "step", "matching columns (%)"}, series);
}

int cmd_search(const Invocation& inv) {
    const int n = geti(inv, "n"), d = geti(inv, "d");
    check_nd(n, d);
    const std::uint64_t seed = getu(inv, "seed");
    const PhrasebookSet ps = random_phrasebook_set(n, d, seed);
    const CoverableSample cs = sample_coverable(ps, getd(inv, "delta"), derive_seed(seed, 1));
    const SearchReport rep = heuristic_search(ps, mat(cs.s), mat(mlt_forward(ps, cs.s)));

    // One row per searched column in search order: step counts forward passes
    // so far and loss counts the columns still unrecovered.
    GdTrace trace;
    long long passes = 0;
    Weights partial = Weights::zeros(n, d);
    const int n2 = n * n;
    int remaining = d * n2;
    for (int i = 0; i < static_cast<int>(rep.search_lengths.size()); ++i)
        for (int k = 0; k < static_cast<int>(rep.search_lengths[i].size()); ++k) {
            passes += rep.search_lengths[i][k];
            if (rep.success || i + 1 < rep.failed_level || (i + 1 == rep.failed_level && k < rep.failed_column)) {
                partial.W[i](ps.books[i].perm[k], k) = 1.0;
                --remaining;
            }
            trace.rows.push_back(
                GdTraceRow{passes, i + 1, k, static_cast<double>(remaining), column_match_fraction(partial, ps)});
        }
    write_csv(inv, "search.csv", trace.to_csv());
    const long long bound = static_cast<long long>(n2) * n2 * d;
    std::printf("search MLT(%d,%d): %s, %lld forward passes (bound n^4 d = %lld), input length %zu, %d sampling "
                "attempts\n",
                d, n, rep.success ? "recovered" : "FAILED", rep.forward_passes, bound, cs.s.chars.size(),
                cs.attempts);
    if (!rep.success) std::printf("%s\n", rep.message.c_str());
    return rep.success && rep.forward_passes <= bound ? kOk : kFailed;
}

int cmd_gd2(const Invocation& inv) {
    const int n = geti(inv, "n");
    check_nd(n, 2);
    const std::uint64_t seed = getu(inv, "seed");
    const PhrasebookSet ps = random_phrasebook_set(n, 2, seed);
    const CoverableSample cs = sample_coverable(ps, getd(inv, "delta"), derive_seed(seed, 1));
    const Gd2Result r = gd_d2(ps, mat(cs.s), mat(mlt_forward(ps, cs.s)), Weights::zeros(n, 2));
    write_csv(inv, "gd2.csv", r.trace.to_csv());
    std::printf("gd2 MLT(2,%d): %s, updates per column %d (level 1) and %d (level 2), %s gradients\n", n,
                r.success ? "recovered" : "FAILED", r.updates_per_column.size() > 0 ? r.updates_per_column[0] : 0,
                r.updates_per_column.size() > 1 ? r.updates_per_column[1] : 0,
                r.used_closed_form ? "closed-form" : "reverse-mode");
    if (!r.success) std::printf("%s\n", r.message.c_str());
    return r.success ? kOk : kFailed;
}

int cmd_gd_soft(const Invocation& inv) {
    const int n = geti(inv, "n"), d = geti(inv, "d");
    check_nd(n, d);
    SoftGdConfig cfg;
    cfg.steps = getll(inv, "steps");
    cfg.eta = getd(inv, "eta");
    cfg.clip = getb(inv, "clip");
    cfg.scale = getd(inv, "scale");
    cfg.delta = getd(inv, "delta");
    cfg.seed = derive_seed(getu(inv, "seed"), 1);
    cfg.trace_every = geti(inv, "trace_every");
    const std::string sched = gets(inv, "schedule");
    require(sched == "rotating" || sched == "mixed", "schedule must be rotating or mixed");
    cfg.schedule = sched == "rotating" ? MaskSchedule::rotating : MaskSchedule::mixed;
    const std::string mode = gets(inv, "mode");
    require(mode == "layerwise" || mode == "fullparam" || mode == "both", "mode must be layerwise, fullparam or both");
    require(cfg.steps >= 0, "steps must be >= 0");

    const PhrasebookSet ps = random_phrasebook_set(n, d, getu(inv, "seed"));
    const Sequence input = sample_coverable(ps, cfg.delta, cfg.seed).s;
    bool all_ok = true;
    for (const std::string m : {"layerwise", "fullparam"}) {
        if (mode != "both" && mode != m) continue;
        cfg.mode = m == "layerwise" ? GdMode::layerwise : GdMode::fullparam;
        const SoftGdResult r = gd_soft(ps, input, cfg);
        write_csv(inv, "gd_soft_" + m + ".csv", r.trace.to_csv());
        char title[128];
        std::snprintf(title, sizeof title, "MLT(%d,%d) %s gradient descent", d, n, m.c_str());
        write_svg(inv, "gd_soft_" + m + ".svg", trace_svg(r.trace, d, title));
        const auto match = column_match_fraction(r.W, ps);
        double lo = 1.0;
        for (double f : match) lo = std::min(lo, f);
        std::printf("gd-soft %s MLT(%d,%d): %lld steps, lowest level match %.4f, all levels matched from step %lld\n",
                    m.c_str(), d, n, r.steps_run, lo, r.first_full_match);
        all_ok = all_ok && lo == 1.0;
    }
    return all_ok ? kOk : kFailed;
}

// ------------------------------------------------------------------ sq

int cmd_sq_census(const Invocation& inv) {
    const sq::MapCensus c = sq::enumerate_bijections_n2();
    std::string body = "map,perm,family,not_mask,op1,op2\n";
    for (std::size_t i = 0; i < c.maps.size(); ++i) {
        const auto& m = c.maps[i];
        std::string perm;
        for (int v : m.pb.perm) perm += std::to_string(v);
        body += std::to_string(i) + "," + perm + "," + std::to_string(m.family) + "," + std::to_string(m.not_mask) +
                "," + sq::to_string(m.op1) + "," + sq::to_string(m.op2) + "\n";
    }
    write_csv(inv, "census.csv", body);
    int pairs = 0, corr = 0;
    for (int i = 1; i <= 2; ++i)
        for (int j = 1; j <= 2; ++j) {
            const sq::PairCensus pc = sq::map_pair_correlation_census(i, j);
            pairs += pc.pairs;
            corr += pc.correlated;
        }
    std::printf("%zu maps, %zu families\n", c.maps.size(), c.family.size());
    const sq::PairCensus first = sq::map_pair_correlation_census(1, 1);
    std::printf("first-character correlation 1 for %d of %d ordered map pairs (all position pairs: %d of %d)\n",
                first.correlated, first.pairs, corr, pairs);
    return kOk;
}

int cmd_sq_decay(const Invocation& inv) {
    const int lo = geti(inv, "d_min"), hi = geti(inv, "d_max");
    require(lo >= 1 && hi >= lo && hi <= 12, "need 1 <= d_min <= d_max <= 12");
    std::vector<int> range;
    for (int d = lo; d <= hi; ++d) range.push_back(d);
    const auto rows = sq::decay_experiment(range, getll(inv, "trials"), getu(inv, "seed"));
    write_csv(inv, "decay.csv", sq::decay_csv(rows));
    bool ok = true;
    for (const auto& r : rows) {
        const bool pass = r.fraction <= r.bound + 3.0 * r.sigma;
        ok = ok && pass;
        std::printf("d=%d nonzero fraction %.6f bound %.6f (+3 sigma %.6f) %s\n", r.d, r.fraction, r.bound,
                    r.bound + 3.0 * r.sigma, pass ? "ok" : "ABOVE BOUND");
    }
    return ok ? kOk : kFailed;
}

int cmd_sq_uniformity(const Invocation& inv) {
    const int n = geti(inv, "n"), d = geti(inv, "d");
    check_nd(n, d);
    const PhrasebookSet ps = random_phrasebook_set(n, d, getu(inv, "seed"));
    const auto rows = sq::uniformity_probe(ps, geti(inv, "level"), geti(inv, "length"), getll(inv, "samples"),
                                           derive_seed(getu(inv, "seed"), 1));
    write_csv(inv, "uniformity.csv", sq::uniformity_csv(rows));
    double pmin = 1.0;
    for (const auto& r : rows) pmin = std::min(pmin, r.p_value);
    std::printf("%zu chi-square tests, smallest p-value %.4g\n", rows.size(), pmin);
    return kOk;
}

// ------------------------------------------------------------------ gradient prediction accuracy

int cmd_gradacc(const Invocation& inv) {
    const int n = geti(inv, "n"), d = geti(inv, "d");
    check_nd(n, d);
    const auto drops = inv.cfg.at("drop_grid").get<std::vector<double>>();
    const auto batches = inv.cfg.at("batch_grid").get<std::vector<int>>();
    const auto levels = inv.cfg.at("max_level_grid").get<std::vector<int>>();
    for (double p : drops) require(p >= 0.0 && p <= 1.0, "drop rates must lie in [0,1]");
    const PhrasebookSet ps = random_phrasebook_set(n, d, getu(inv, "seed"));
    GradAccConfig base;
    base.trials = getll(inv, "trials");
    base.seq_len = geti(inv, "length");
    base.seed = derive_seed(getu(inv, "seed"), 1);
    const GradAccSweep sw = grad_acc_sweep(ps, drops, batches, levels, geti(inv, "level_batch"), base);
    write_csv(inv, "gradacc_by_batch.csv", grad_acc_csv(sw.by_batch, d));
    write_csv(inv, "gradacc_by_level.csv", grad_acc_csv(sw.by_level, d));
    for (const auto& note : sw.notes) std::printf("note: %s\n", note.c_str());

    std::map<int, report::Series> by_batch, by_level;
    for (const auto& r : sw.by_batch) {
        auto& s = by_batch[r.batch];
        s.label = "batch " + std::to_string(r.batch);
        s.x.push_back(r.p[0]);
        s.y.push_back(r.r.accuracy);
    }
    for (const auto& r : sw.by_level) {
        auto& s = by_level[r.max_level];
        s.label = "levels 1.." + std::to_string(r.max_level);
        s.x.push_back(r.p[0]);
        s.y.push_back(r.r.accuracy);
    }
    std::vector<report::Series> a, b;
    for (auto& [k, s] : by_batch) {
        const double rho = s.x.size() >= 2 ? spearman(s.x, s.y) : 0.0;
        std::printf("batch %d: spearman(drop rate, accuracy) = %.3f, 95%% upper bound %.3f\n", k, rho,
                    spearman_upper95(rho, s.x.size()));
        a.push_back(s);
    }
    for (auto& [k, s] : by_level) b.push_back(s);
    write_svg(inv, "gradacc_by_batch.svg",
              report::svg_line_chart({"gradient prediction accuracy", "drop rate", "accuracy"}, a));
    write_svg(inv, "gradacc_by_level.svg",
              report::svg_line_chart({"gradient prediction accuracy by deepest dropped level", "drop rate", "accuracy"},
                                     b));
    return kOk;
}

// ------------------------------------------------------------------ transformer

int cmd_tfcheck(const Invocation& inv) {
    const int n = geti(inv, "n"), d = geti(inv, "d");
    check_nd(n, d);
    const int cases = geti(inv, "cases"), max_len = geti(inv, "max_length");
    require(cases >= 1, "cases must be >= 1");
    require(max_len >= 2 && max_len % 2 == 0, "max_length must be even and >= 2");
    const std::string mode = gets(inv, "mode");
    require(mode == "hard" || mode == "saturated" || mode == "both", "mode must be hard, saturated or both");
    const bool planted = getb(inv, "planted");
    const double N = getd(inv, "N"), Lambda = getd(inv, "lambda");
    const std::uint64_t seed = getu(inv, "seed");

    std::vector<tf::AttnMode> modes;
    if (mode != "saturated") modes.push_back(tf::AttnMode::hard);
    if (mode != "hard") modes.push_back(tf::AttnMode::saturated);

    struct Row {
        int L = 0;
        bool match = false;
        tf::ForwardReport rep;
        double conf = 0.0;
        std::string error;
    };
    std::string body = "case,mode,length,match,min_confidence,max_product_residual,max_offpattern_mass,error\n";
    int mismatches = 0;
    double worst_res = 0.0, worst_off = 0.0;
    for (tf::AttnMode am : modes) {
        std::vector<Row> rows(cases);
#pragma omp parallel for schedule(dynamic, 1)
        for (int c = 0; c < cases; ++c) {
            const std::uint64_t cs = derive_seed(seed, static_cast<std::uint64_t>(c));
            const PhrasebookSet ps = random_phrasebook_set(n, d, derive_seed(cs, 1));
            Rng rng(derive_seed(cs, 2));
            const int L = 2 * (1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_len / 2))));
            const Sequence s = uniform_sequence(n, L, derive_seed(cs, 3));
            Weights W = Weights::zeros(n, d);
            ContextSet ctx = context_from(ps);
            if (planted) {
                for (int i = 0; i < d; ++i) W.W[i] = matrix_of(ps.books[i]).dense();
                ctx = ContextSet::zeros(n, d);
            }
            Row& r = rows[c];
            r.L = L;
            try {
                const auto model = tf::build_transformer(n, d, W, am, N, Lambda);
                const auto out = tf::transformer_forward(model, ctx, tf::encode_input(ctx, s), &r.rep);
                const auto dec = tf::decode_output(out);
                r.conf = dec.min_confidence;
                r.match = dec.s.chars == mlt_forward(ps, s).chars;
            } catch (const Error& e) {
                r.error = e.what();
            }
        }
        char buf[256];
        for (int c = 0; c < cases; ++c) {
            const Row& r = rows[c];
            mismatches += !r.match;
            worst_res = std::max(worst_res, r.rep.max_product_residual);
            worst_off = std::max(worst_off, r.rep.max_offpattern_mass);
            std::snprintf(buf, sizeof buf, "%d,%s,%d,%d,%.12f,%.6e,%.6e,", c, tf::to_string(am).c_str(), r.L,
                          r.match ? 1 : 0, r.conf, r.rep.max_product_residual, r.rep.max_offpattern_mass);
            body += buf + r.error + "\n";
        }
    }
    write_csv(inv, "tfcheck.csv", body);
    const std::string dump = gets(inv, "dump");
    if (!dump.empty()) {
        const PhrasebookSet ps = random_phrasebook_set(n, d, seed);
        report::write_file(out_path(inv, dump), tf::dump_model(tf::build_transformer(
                                                    n, d, Weights::zeros(n, d), modes.front(), N, Lambda)));
        (void)ps;
    }
    std::printf("tfcheck n=%d d=%d width=%d: %d mismatches over %d cases x %zu modes; max product residual %.3g "
                "(limit 10/N^4 = %.3g); max off-pattern mass %.3g\n",
                n, d, 2 * n * n + 2 * d + 4, mismatches, cases, modes.size(), worst_res, 10.0 / (N * N * N * N),
                worst_off);
    return mismatches == 0 ? kOk : kFailed;
}

ParamSpec P(std::string name, json def, std::string help) { return ParamSpec{std::move(name), std::move(def), std::move(help)}; }

}  // namespace

const std::vector<CommandSpec>& command_table() {
    static const std::vector<CommandSpec> table = [] {
        const ParamSpec out = P("out", "", "output directory (env MLTLAB_OUT)");
        const ParamSpec seed = P("seed", json(std::uint64_t{1}), "random seed");
        std::vector<CommandSpec> t;
        t.push_back({"gen-task", "sample a random phrasebook set",
                     {P("n", 8, "alphabet size"), P("d", 5, "depth"), seed, out, P("prefix", "task", "file name stem")},
                     cmd_gen_task});
        t.push_back({"translate", "translate a sequence with a task file",
                     {P("task", "", "task file (machine format)"), P("sequence", "", "input characters, e.g. \"0 1 1 0\""),
                      P("random", 0, "translate a random sequence of this length instead"),
                      P("inverse", false, "invert instead of translating"),
                      P("trace", false, "print every level s_1..s_{d+1}"), seed, out},
                     cmd_translate});
        t.push_back({"search", "context-enhanced column search on a random task",
                     {P("n", 8, "alphabet size"), P("d", 5, "depth"), P("delta", 0.01, "coverable-input failure rate"),
                      seed, out},
                     cmd_search});
        t.push_back({"gd2", "depth-2 layerwise surrogate gradient descent",
                     {P("n", 10, "alphabet size"), P("delta", 0.01, "coverable-input failure rate"), seed, out},
                     cmd_gd2});
        t.push_back({"gd-soft", "gradient descent on the softmax surrogate",
                     {P("n", 10, "alphabet size"), P("d", 10, "depth"), P("mode", "both", "layerwise, fullparam or both"),
                      P("steps", 0, "steps (0: 3 d n^2)"), P("eta", 100.0, "learning rate"),
                      P("clip", true, "clip weights to [0,1] after each update"),
                      P("schedule", "rotating", "rotating or mixed masking"), P("scale", 25.0, "softmax scale"),
                      P("delta", 0.01, "coverable-input failure rate"), P("trace_every", 10, "trace interval"), seed,
                      out},
                     cmd_gd_soft});
        t.push_back({"sq census", "enumerate the 24 two-character bijections", {out}, cmd_sq_census});
        t.push_back({"sq decay", "correlation decay with depth",
                     {P("d_min", 1, "smallest depth"), P("d_max", 6, "largest depth"),
                      P("trials", 20000, "phrasebook-set pairs per depth"), seed, out},
                     cmd_sq_decay});
        t.push_back({"sq uniformity", "chi-square uniformity of intermediate characters",
                     {P("n", 2, "alphabet size"), P("d", 4, "depth"), P("level", 3, "intermediate level (1 = input)"),
                      P("length", 8, "sequence length"), P("samples", 20000, "sampled inputs"), seed, out},
                     cmd_sq_uniformity});
        t.push_back({"gradacc", "gradient prediction accuracy sweep",
                     {P("n", 4, "alphabet size"), P("d", 3, "depth"),
                      P("drop_grid", json::array({0.1, 0.3, 0.5, 0.7, 0.9}), "drop rates"),
                      P("batch_grid", json::array({1, 4, 16}), "batch sizes"),
                      P("max_level_grid", json::array({1, 2, 3}), "deepest dropped level"),
                      P("level_batch", 4, "batch size of the level panel"), P("trials", 200, "trials per cell"),
                      P("length", 0, "sequence length (0: 2 n^2)"), seed, out},
                     cmd_gradacc});
        t.push_back({"tfcheck", "forward equivalence of the constructed transformer",
                     {P("n", 3, "alphabet size"), P("d", 2, "depth"), P("cases", 200, "random cases"),
                      P("max_length", 12, "largest sequence length"), P("mode", "both", "hard, saturated or both"),
                      P("planted", false, "store the phrasebooks in the weights and zero the contexts"),
                      P("N", 100.0, "GELU product scale"), P("lambda", 30.0, "attention logit scale"),
                      P("dump", "", "also write the model dump to this file"), seed, out},
                     cmd_tfcheck});
        return t;
    }();
    return table;
}

}  // namespace mltlab
