#pragma once

// Edge-case analysis for couplers whose vanishing blocks survive
// randomisation.
//
// A coupler induces a directed graph on modes: i -> j whenever the 2x2 block
// feeding mode i into mode j is nonzero. Contracting every vertex's successor
// set until no vertex has two distinct outgoing arrows partitions the modes
// into color sets; interference sequences can synthesise arbitrary Gaussian
// operations inside a color set and only permute the sets themselves.

#include <algorithm>
#include <numeric>
#include <set>
#include <vector>

#include "guc/rng.hpp"
#include "guc/sequence.hpp"
#include "guc/symplectic.hpp"

namespace guc {

struct GenericityViolation {
    bool row_side = true;  // row pair (S[k, 2m-1], S[k, 2m]) vs column pair
    int quad_index = 0;    // 0-based quadrature index k
    int mode = 0;          // 0-based mode m
};

struct GenericityReport {
    std::vector<GenericityViolation> violations;
    bool is_generic = true;
};

// Scan every (quadrature, mode) pair on both sides; a violation is a pair
// whose two entries both vanish relative to the matrix scale.
inline GenericityReport genericity_check(const SymplecticMatrix& s, double eps = Tolerances{}.block_eps) {
    const int n = s.modes();
    const double cut = eps * std::max(1.0, max_abs(s.mat()));
    GenericityReport report;
    for (int k = 0; k < 2 * n; ++k)
        for (int m = 0; m < n; ++m) {
            if (std::abs(s.mat()(k, 2 * m)) <= cut && std::abs(s.mat()(k, 2 * m + 1)) <= cut)
                report.violations.push_back({true, k, m});
            if (std::abs(s.mat()(2 * m, k)) <= cut && std::abs(s.mat()(2 * m + 1, k)) <= cut)
                report.violations.push_back({false, k, m});
        }
    report.is_generic = report.violations.empty();
    return report;
}

struct ModeGraph {
    int n_vertices = 0;
    std::vector<std::vector<bool>> edges;  // edges[i][j]: arrow i -> j
    Mat block_norms;                       // block_norms(j, i) = Frobenius norm of block (j, i)

    bool has_edge(int i, int j) const { return edges[static_cast<size_t>(i)][static_cast<size_t>(j)]; }
};

// Arrow i -> j iff the block of rows 2j..2j+1, columns 2i..2i+1 is nonzero.
inline ModeGraph build_graph(const SymplecticMatrix& s, double eps_block = Tolerances{}.block_eps) {
    const int n = s.modes();
    const double cut = eps_block * std::max(1.0, max_abs(s.mat()));
    ModeGraph g;
    g.n_vertices = n;
    g.edges.assign(static_cast<size_t>(n), std::vector<bool>(static_cast<size_t>(n), false));
    g.block_norms = Mat::Zero(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const double norm = s.mat().block<2, 2>(2 * j, 2 * i).norm();
            g.block_norms(j, i) = norm;
            g.edges[static_cast<size_t>(i)][static_cast<size_t>(j)] = norm > cut;
        }
    return g;
}

struct ColorPartition {
    std::vector<std::vector<int>> sets;  // sorted mode lists, ordered by smallest member
    std::vector<int> induced;            // color index of the image of each color
    int color_count = 0;

    int color_of(int mode) const {
        for (size_t c = 0; c < sets.size(); ++c)
            if (std::find(sets[c].begin(), sets[c].end(), mode) != sets[c].end()) return static_cast<int>(c);
        throw Error(Errc::invalid_argument, "mode not covered by partition");
    }
};

namespace detail {

struct UnionFind {
    std::vector<int> parent;

    explicit UnionFind(int n) : parent(static_cast<size_t>(n)) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    int find(int x) {
        while (parent[static_cast<size_t>(x)] != x) {
            parent[static_cast<size_t>(x)] = parent[static_cast<size_t>(parent[static_cast<size_t>(x)])];
            x = parent[static_cast<size_t>(x)];
        }
        return x;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (b < a) std::swap(a, b);  // keep the smallest index as representative
        parent[static_cast<size_t>(b)] = a;
    }
};

// Quotient adjacency over current classes.
inline std::vector<std::set<int>> quotient_successors(const ModeGraph& g, UnionFind& uf) {
    std::vector<std::set<int>> succ(static_cast<size_t>(g.n_vertices));
    for (int i = 0; i < g.n_vertices; ++i)
        for (int j = 0; j < g.n_vertices; ++j)
            if (g.has_edge(i, j)) succ[static_cast<size_t>(uf.find(i))].insert(uf.find(j));
    return succ;
}

inline std::vector<std::vector<int>> classes_of(UnionFind& uf, int n) {
    std::vector<std::vector<int>> by_root(static_cast<size_t>(n));
    for (int m = 0; m < n; ++m) by_root[static_cast<size_t>(uf.find(m))].push_back(m);
    std::vector<std::vector<int>> sets;
    for (auto& cls : by_root)
        if (!cls.empty()) sets.push_back(std::move(cls));
    std::sort(sets.begin(), sets.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    return sets;
}

}  // namespace detail

// Color permutation effected by one coupler use: every member of a color must
// feed a single other color, and the color-to-color map must be a bijection.
inline std::vector<int> induced_permutation(const ModeGraph& g, const std::vector<std::vector<int>>& sets) {
    std::vector<int> color_of(static_cast<size_t>(g.n_vertices), -1);
    for (size_t c = 0; c < sets.size(); ++c)
        for (int m : sets[c]) color_of[static_cast<size_t>(m)] = static_cast<int>(c);
    for (int v : color_of)
        if (v < 0) throw Error(Errc::invalid_argument, "partition does not cover all modes");

    std::vector<int> perm(sets.size(), -1);
    for (size_t c = 0; c < sets.size(); ++c) {
        for (int i : sets[c])
            for (int j = 0; j < g.n_vertices; ++j) {
                if (!g.has_edge(i, j)) continue;
                const int target = color_of[static_cast<size_t>(j)];
                if (perm[c] == -1)
                    perm[c] = target;
                else if (perm[c] != target)
                    throw Error(Errc::non_bijective_mapping,
                                "color " + std::to_string(c + 1) + " feeds more than one color");
            }
        if (perm[c] == -1)
            throw Error(Errc::non_bijective_mapping, "color " + std::to_string(c + 1) + " has no outgoing support");
    }
    std::vector<bool> hit(sets.size(), false);
    for (int t : perm) {
        if (hit[static_cast<size_t>(t)])
            throw Error(Errc::non_bijective_mapping, "induced color map is not a bijection");
        hit[static_cast<size_t>(t)] = true;
    }
    return perm;
}

// Vertex contraction with an explicit vertex priority (used by the
// order-independence tests). An eligible class has two distinct successor
// classes (self-loops count); all its successors merge into one class.
inline ColorPartition contract_ordered(const ModeGraph& g, const std::vector<int>& priority) {
    if (static_cast<int>(priority.size()) != g.n_vertices)
        throw Error(Errc::invalid_argument, "priority must rank every vertex");
    detail::UnionFind uf(g.n_vertices);
    for (;;) {
        auto succ = detail::quotient_successors(g, uf);
        int best = -1;
        int best_rank = 0;
        for (int m = 0; m < g.n_vertices; ++m) {
            const int root = uf.find(m);
            if (succ[static_cast<size_t>(root)].size() < 2) continue;
            const int rank = priority[static_cast<size_t>(m)];
            if (best == -1 || rank < best_rank) {
                best = root;
                best_rank = rank;
            }
        }
        if (best == -1) break;
        const auto targets = succ[static_cast<size_t>(best)];
        const int first = *targets.begin();
        for (int t : targets) uf.unite(first, t);
    }

    ColorPartition part;
    part.sets = detail::classes_of(uf, g.n_vertices);
    part.color_count = static_cast<int>(part.sets.size());
    part.induced = induced_permutation(g, part.sets);
    return part;
}

// Canonical order: lowest original vertex index first.
inline ColorPartition contract(const ModeGraph& g) {
    std::vector<int> priority(static_cast<size_t>(g.n_vertices));
    std::iota(priority.begin(), priority.end(), 0);
    return contract_ordered(g, priority);
}

inline bool feasibility(const ColorPartition& part, const std::vector<int>& target_modes) {
    if (target_modes.empty()) return true;
    const int c0 = part.color_of(target_modes.front());
    for (int m : target_modes)
        if (part.color_of(m) != c0) return false;
    return true;
}

struct SaturatedForm {
    CompiledSequence sequence;  // random local layers around k coupler uses
    Mat matrix;                 // evaluated product: dense inside each color set
    ColorPartition partition;
    int copies_used = 0;
};

namespace detail {

inline int permutation_order(const std::vector<int>& perm) {
    std::vector<int> cur(perm.size());
    std::iota(cur.begin(), cur.end(), 0);
    for (int k = 1; k <= static_cast<int>(perm.size()) * static_cast<int>(perm.size()) + 1; ++k) {
        for (size_t i = 0; i < cur.size(); ++i) cur[i] = perm[static_cast<size_t>(cur[i])];
        bool ident = true;
        for (size_t i = 0; i < cur.size(); ++i) ident = ident && cur[i] == static_cast<int>(i);
        if (ident) return k;
    }
    throw Error(Errc::non_bijective_mapping, "permutation order not found");
}

using BoolMat = std::vector<std::vector<bool>>;

// pattern(j, i): can input mode i reach output mode j.
inline BoolMat bool_product(const BoolMat& a, const BoolMat& b) {
    const size_t n = a.size();
    BoolMat out(n, std::vector<bool>(n, false));
    for (size_t i = 0; i < n; ++i)
        for (size_t k = 0; k < n; ++k)
            if (a[i][k])
                for (size_t j = 0; j < n; ++j)
                    if (b[k][j]) out[i][j] = true;
    return out;
}

}  // namespace detail

// Wrap the coupler in random local layers, extending one use at a time (in
// steps of the induced permutation's order), until the evaluated product is
// dense inside every color set and zero across them. For a generic coupler
// with one color set this returns the single sandwich L2 S L1.
inline SaturatedForm randomize_saturate(const SymplecticMatrix& s, const RngSpec& spec, int max_copies = -1,
                                        double eps_block = Tolerances{}.block_eps) {
    const int n = s.modes();
    if (max_copies < 0) max_copies = 2 * n * n;
    const ModeGraph graph = build_graph(s, eps_block);
    ColorPartition part = contract(graph);
    const int order = detail::permutation_order(part.induced);

    // Boolean support: pattern[j][i] true when block (j, i) is nonzero.
    detail::BoolMat pattern(static_cast<size_t>(n), std::vector<bool>(static_cast<size_t>(n), false));
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) pattern[static_cast<size_t>(j)][static_cast<size_t>(i)] = graph.has_edge(i, j);

    std::vector<int> color_of(static_cast<size_t>(n));
    for (size_t c = 0; c < part.sets.size(); ++c)
        for (int m : part.sets[c]) color_of[static_cast<size_t>(m)] = static_cast<int>(c);

    int copies = -1;
    detail::BoolMat power = pattern;
    for (int k = 1; k <= max_copies; ++k) {
        if (k > 1) power = detail::bool_product(power, pattern);
        if (k % order != 0) continue;
        bool dense = true;
        for (int j = 0; j < n && dense; ++j)
            for (int i = 0; i < n && dense; ++i) {
                const bool same = color_of[static_cast<size_t>(j)] == color_of[static_cast<size_t>(i)];
                if (same && !power[static_cast<size_t>(j)][static_cast<size_t>(i)]) dense = false;
                if (!same && power[static_cast<size_t>(j)][static_cast<size_t>(i)]) dense = false;
            }
        if (dense) {
            copies = k;
            break;
        }
    }
    if (copies < 0)
        throw Error(Errc::saturation_not_reached,
                    "no interference sequence of up to " + std::to_string(max_copies) +
                        " coupler uses saturates the color sets");

    SeededRng rng(spec.seed);
    const double scale_ref = std::max(1.0, max_abs(s.mat()));
    for (int attempt = 0; attempt < 4; ++attempt) {
        CompiledSequence seq;
        seq.n_modes = n;
        seq.seed = spec.seed;
        seq.steps.push_back(Step::local(random_local_layer(n, rng, spec.squeeze_cap)));
        for (int k = 0; k < copies; ++k) {
            seq.steps.push_back(Step::coupler_use());
            seq.steps.push_back(Step::local(random_local_layer(n, rng, spec.squeeze_cap)));
        }
        Mat prod = evaluate(seq, s);
        const double scale = std::max(1.0, max_abs(prod));
        bool ok = true;
        for (int j = 0; j < n && ok; ++j)
            for (int i = 0; i < n && ok; ++i) {
                const double norm = prod.block<2, 2>(2 * j, 2 * i).norm();
                if (color_of[static_cast<size_t>(j)] == color_of[static_cast<size_t>(i)]) {
                    if (norm <= std::sqrt(eps_block) * scale) ok = false;
                } else if (norm > eps_block * scale * scale_ref) {
                    ok = false;
                }
            }
        if (ok) return SaturatedForm{std::move(seq), std::move(prod), std::move(part), copies};
    }
    throw Error(Errc::saturation_not_reached,
                "randomised sequences failed the density certificate; tolerances are likely misconfigured");
}

}  // namespace guc
