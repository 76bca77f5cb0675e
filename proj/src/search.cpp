#include "mlt/learn.hpp"

#include "mlt/errors.hpp"

namespace mlt {

SearchReport heuristic_search(const PhrasebookSet& target, const SeqEmbedding& V1, const SeqEmbedding& Vtarget,
                              const SearchOptions& opt) {
    const int n = target.n, n2 = n * n, d = target.d();
    if (V1.n != n || Vtarget.n != n) throw InvalidParameter("alphabet mismatch");
    if (V1.cols() != Vtarget.cols()) throw InvalidParameter("input and target lengths differ");

    SearchReport rep;
    rep.recovered = Weights::zeros(n, d);
    rep.search_lengths.assign(d, std::vector<int>(n2, 0));
    const ContextSet full = context_from(target);

    for (int i = 1; i <= d; ++i) {
        for (int k = 0; k < n2; ++k) {
            ContextSet ctx = drop_column(full, i, k);
            // W_i^(k) is still zero here, so column k of the effective matrix is
            // exactly the candidate placed into it below.
            std::vector<StochasticMatrix> P = effective_matrices(rep.recovered, ctx);
            int found = -1, matches = 0;
            for (int a = 0; a < n2; ++a) {
                P[i - 1].row_of[k] = a;
                ++rep.forward_passes;
                ++rep.search_lengths[i - 1][k];
                if (forward_indices(P, V1.active, n) == Vtarget.active) {
                    if (matches == 0) found = a;
                    ++matches;
                    if (!opt.confirm_unique) break;
                }
            }
            if (matches != 1) {
                rep.failed_level = i;
                rep.failed_column = k;
                rep.matches_at_failure = matches;
                rep.message = "column " + std::to_string(k) + " of level " + std::to_string(i) + ": " +
                              (matches == 0 ? std::string("no candidate reproduces the target")
                                            : std::to_string(matches) + " candidates reproduce the target");
                return rep;
            }
            rep.recovered.W[i - 1](found, k) = 1.0;
        }
    }
    rep.success = true;
    for (int i = 1; i <= d && rep.success; ++i)
        rep.success = hardmax_cols(rep.recovered.W[i - 1]).m == matrix_of(target.level(i));
    if (!rep.success) rep.message = "recovered weights disagree with the target phrasebooks";
    return rep;
}

}  // namespace mlt
