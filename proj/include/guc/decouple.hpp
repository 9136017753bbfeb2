#pragma once

// Interference-based mode decoupling.
//
// Two sandwich products S_b * L * S_a, each built so one quadrature of the
// selected mode couples only to its conjugate, are joined by a middle local
// layer into R = T2 * L2 * T1 whose selected mode is isolated from the rest
// of the system. Applied recursively to 4^l couplers this isolates l modes
// with 4^l - 1 interleaved local layers.
//
// The closed-form block formula below maps a per-mode pair u to -omega * v;
// the global sign sigma = -1 is fixed once (kLocalMatchSign) and verified by
// a brute-force oracle in the test suite.

#include <algorithm>
#include <array>
#include <optional>
#include <vector>

#include "guc/rng.hpp"
#include "guc/symplectic.hpp"

namespace guc {

inline constexpr int kLocalMatchSign = -1;

// Closed-form 2x2 symplectic block with block * u = kLocalMatchSign * omega * v.
// Both pairs must be nonzero; det = 1 identically.
inline Block2 match_block(const Eigen::Vector2d& u, const Eigen::Vector2d& v) {
    const double a = u.squaredNorm();
    const double b = v.squaredNorm();
    Block2 l;
    l(0, 0) = v(0) * u(1) / b - v(1) * u(0) / a;
    l(0, 1) = -v(0) * u(0) / b - v(1) * u(1) / a;
    l(1, 0) = v(1) * u(1) / b + v(0) * u(0) / a;
    l(1, 1) = v(0) * u(1) / a - v(1) * u(0) / b;
    return l;
}

namespace detail {

inline bool pair_is_zero(const Eigen::Vector2d& p, double scale, double eps) {
    return p.cwiseAbs().maxCoeff() <= eps * std::max(1.0, scale);
}

// Shared layer builder: identity on frozen modes and on modes where both
// pairs vanish; the closed-form block elsewhere. Exactly one vanishing pair
// is the non-generic situation the formulas cannot bridge.
inline LocalLayer match_layer(const QuadVector& u, const QuadVector& v, const std::vector<int>& frozen,
                              double eps_pair, double det_tol, const std::string& who) {
    const int n = static_cast<int>(u.size()) / 2;
    const double su = u.cwiseAbs().maxCoeff();
    const double sv = v.cwiseAbs().maxCoeff();
    LocalLayer layer;
    layer.blocks.reserve(static_cast<size_t>(n));
    for (int m = 0; m < n; ++m) {
        if (std::find(frozen.begin(), frozen.end(), m) != frozen.end()) {
            layer.blocks.push_back(LocalBlock::identity());
            continue;
        }
        const Eigen::Vector2d um = mode_pair(u, m);
        const Eigen::Vector2d vm = mode_pair(v, m);
        const bool uz = pair_is_zero(um, su, eps_pair);
        const bool vz = pair_is_zero(vm, sv, eps_pair);
        if (uz && vz) {
            layer.blocks.push_back(LocalBlock::identity());
        } else if (uz || vz) {
            throw Error(Errc::non_generic_pair,
                        who + ": quadrature pair of mode " + std::to_string(m + 1) + " vanishes on the " +
                            (uz ? "source" : "target") + " side only",
                        m);
        } else {
            const Block2 blk = match_block(um, vm);
            const double tol = det_tol * std::max(1.0, blk.cwiseAbs().maxCoeff() * blk.cwiseAbs().maxCoeff());
            layer.blocks.push_back(LocalBlock(blk, tol));
        }
    }
    return layer;
}

}  // namespace detail

// Local layer with embed_local(L) * u = kLocalMatchSign * Omega * v.
inline LocalLayer local_match(const QuadVector& u, const QuadVector& v, double eps_pair = Tolerances{}.pair_eps) {
    validate_quad_vector(u);
    validate_quad_vector(v);
    if (u.size() != v.size()) throw Error(Errc::dimension_mismatch, "local_match: vector lengths differ");
    return detail::match_layer(u, v, {}, eps_pair, Tolerances{}.det, "local_match");
}

struct DecoupleOptions {
    Tolerances tol{};
    std::vector<int> frozen;  // already-decoupled modes; their blocks stay identity
    int level = 0;            // recursion depth, for error reporting
};

// Sandwich S_b * L * S_a whose selected mode has row (0, sign, 0, ...) and
// column (0, -sign, 0, ...)^T.
struct Sandwich {
    SymplecticMatrix matrix;
    LocalLayer inner_layer;
    std::pair<int, int> parts;  // input indices (S_a, S_b) within the quadruple
    int sign = +1;
    int mode = 0;
    double structure_residual = 0.0;  // absolute max deviation from the pattern
};

namespace detail {

inline bool is_frozen(int m, const std::vector<int>& frozen) {
    return std::find(frozen.begin(), frozen.end(), m) != frozen.end();
}

struct PatternResidual {
    int sign = +1;
    double residual = 0.0;
};

// Deviation of row/column 2m from the (0, s, 0...) / (0, -s, 0...)^T pattern,
// scanning only non-frozen modes.
inline PatternResidual sandwich_pattern_residual(const Mat& t, int mode, const std::vector<int>& frozen) {
    const int n = static_cast<int>(t.rows()) / 2;
    PatternResidual out;
    out.sign = t(2 * mode, 2 * mode + 1) >= 0.0 ? +1 : -1;
    double worst = std::abs(t(2 * mode, 2 * mode + 1) - out.sign);
    worst = std::max(worst, std::abs(t(2 * mode + 1, 2 * mode) + out.sign));
    worst = std::max(worst, std::abs(t(2 * mode, 2 * mode)));
    for (int k = 0; k < n; ++k) {
        if (k == mode || is_frozen(k, frozen)) continue;
        for (int d = 0; d < 2; ++d) {
            worst = std::max(worst, std::abs(t(2 * mode, 2 * k + d)));
            worst = std::max(worst, std::abs(t(2 * k + d, 2 * mode)));
        }
    }
    out.residual = worst;
    return out;
}

}  // namespace detail

// First-layer sandwich: the inner layer maps the selected column of s_a onto
// Omega times the selected row of s_b, which forces the pattern through the
// orthogonality relations of the symplectic bases.
inline Sandwich build_sandwich(const SymplecticMatrix& s_a, const SymplecticMatrix& s_b, int mode,
                               const DecoupleOptions& opt = {}, std::pair<int, int> parts = {0, 1}) {
    if (s_a.modes() != s_b.modes())
        throw Error(Errc::dimension_mismatch, "build_sandwich: mode counts differ");
    check_mode_index(mode, s_a.modes());
    const QuadVector x = s_a.mat().col(2 * mode);
    // Negated row: the formula realises sigma = -1, so matching against -u
    // lands the column exactly on +Omega u.
    const QuadVector u = -s_b.mat().row(2 * mode).transpose();
    LocalLayer layer;
    try {
        layer = detail::match_layer(x, u, opt.frozen, opt.tol.pair_eps, opt.tol.det,
                                    "build_sandwich(parts " + std::to_string(parts.first + 1) + "," +
                                        std::to_string(parts.second + 1) + ")");
    } catch (Error& e) {
        throw Error(e.code(), e.what(), e.mode(), opt.level);
    }
    SymplecticMatrix t = compose(s_b, compose(embed_local(layer), s_a));
    const auto pat = detail::sandwich_pattern_residual(t.mat(), mode, opt.frozen);
    return Sandwich{std::move(t), std::move(layer), parts, pat.sign, mode, pat.residual};
}

// Middle layer joining two sandwiches: omega on the selected mode, the
// closed-form blocks elsewhere, built from the second column of t1 and the
// correlation-corrected second row of t2.
inline LocalLayer build_inner_layer(const Sandwich& t1, const Sandwich& t2, const DecoupleOptions& opt = {}) {
    if (t1.matrix.modes() != t2.matrix.modes())
        throw Error(Errc::dimension_mismatch, "build_inner_layer: mode counts differ");
    if (t1.mode != t2.mode) throw Error(Errc::invalid_argument, "build_inner_layer: sandwiches target different modes");
    const int m = t1.mode;
    const QuadVector u = t1.matrix.mat().col(2 * m + 1);
    const QuadVector chi = t1.matrix.mat().col(2 * m);
    const QuadVector alpha = t2.matrix.mat().row(2 * m).transpose();
    const QuadVector beta = t2.matrix.mat().row(2 * m + 1).transpose();
    const double c = alpha.dot(beta) - u.dot(chi);
    const QuadVector v = beta - c * alpha;

    std::vector<int> frozen = opt.frozen;
    frozen.push_back(m);  // placed explicitly below
    LocalLayer layer;
    try {
        layer = detail::match_layer(u, v, frozen, opt.tol.pair_eps, opt.tol.det, "build_inner_layer");
    } catch (Error& e) {
        throw Error(e.code(), e.what(), e.mode(), opt.level);
    }
    layer.blocks[static_cast<size_t>(m)] = LocalBlock(omega_block(), 1e-12);
    return layer;
}

// One mode isolated from the rest: matrix = block(mode) + remainder up to the
// recorded cross residual.
struct ModeDecoupled {
    SymplecticMatrix matrix;
    int mode = 0;
    std::array<LocalLayer, 3> layers;  // application order between the four inputs
    LocalBlock single_mode_block;
    SymplecticMatrix remainder;  // all modes except `mode`, original order
    int sign = +1;
    double cross_residual = 0.0;  // absolute
};

namespace detail {

// Random layer that leaves `exempt` modes untouched.
inline LocalLayer partial_random_layer(int n_modes, const std::vector<int>& exempt, SeededRng& rng,
                                       double r_max) {
    LocalLayer layer = identity_layer(n_modes);
    for (int m = 0; m < n_modes; ++m)
        if (!is_frozen(m, exempt)) layer.blocks[static_cast<size_t>(m)] = random_block(rng, r_max);
    return layer;
}

inline SymplecticMatrix remainder_of(const SymplecticMatrix& full, const std::vector<int>& removed,
                                     double cross_abs) {
    const std::vector<int> rest = complement_modes(full.modes(), removed);
    Mat sub = extract_modes(full.mat(), rest);
    const double norm = std::max(1.0, max_abs(full.mat()));
    const double tol = std::max(Tolerances{}.symp_tol(static_cast<int>(rest.size())),
                                full.residual() + 8.0 * cross_abs * norm + cross_abs * cross_abs);
    return SymplecticMatrix(std::move(sub), tol);
}

}  // namespace detail

// Decouple `mode` from the product s[3] L3 s[2] L2 s[1] L1 s[0].
//
// When an intermediate quadrature pair degenerates, random local layers on the
// free modes are folded into the middle slot and the attempt is rebuilt;
// retry_rng == nullptr disables retries.
inline ModeDecoupled decouple_one(const std::array<SymplecticMatrix, 4>& s, int mode,
                                  const DecoupleOptions& opt = {}, SeededRng* retry_rng = nullptr) {
    const int n = s[0].modes();
    for (const auto& si : s)
        if (si.modes() != n) throw Error(Errc::dimension_mismatch, "decouple_one: mode counts differ");
    check_mode_index(mode, n);
    if (detail::is_frozen(mode, opt.frozen))
        throw Error(Errc::invalid_argument, "decouple_one: target mode is frozen");

    std::vector<int> exempt = opt.frozen;
    exempt.push_back(mode);

    const int attempts = retry_rng ? opt.tol.retry_budget + 1 : 1;
    std::optional<Error> last;
    for (int attempt = 0; attempt < attempts; ++attempt) {
        SymplecticMatrix s1 = s[1];
        SymplecticMatrix s2 = s[2];
        LocalLayer lam_left = identity_layer(n);
        LocalLayer lam_right = identity_layer(n);
        if (attempt > 0) {
            lam_left = detail::partial_random_layer(n, exempt, *retry_rng, 1.0);
            lam_right = detail::partial_random_layer(n, exempt, *retry_rng, 1.0);
            s1 = compose(embed_local(lam_left), s[1]);   // absorbed into the middle slot
            s2 = compose(s[2], embed_local(lam_right));  // likewise
        }
        try {
            Sandwich t1 = build_sandwich(s[0], s1, mode, opt, {0, 1});
            Sandwich t2 = build_sandwich(s2, s[3], mode, opt, {2, 3});
            const double t_scale = std::max(max_abs(t1.matrix.mat()), max_abs(t2.matrix.mat()));
            const double t_tol = opt.tol.structure * std::max(1.0, t_scale);
            if (t1.structure_residual > t_tol || t2.structure_residual > t_tol)
                throw Error(Errc::non_generic_intermediate,
                            "sandwich structure residual exceeds tolerance", mode, opt.level);

            LocalLayer inner = build_inner_layer(t1, t2, opt);
            SymplecticMatrix r = compose(t2.matrix, compose(embed_local(inner), t1.matrix));

            // Cross blocks against the non-frozen modes, plus the top pattern.
            double cross = 0.0;
            for (int k = 0; k < n; ++k) {
                if (k == mode || detail::is_frozen(k, opt.frozen)) continue;
                cross = std::max(cross, max_abs(r.mat().block(2 * mode, 2 * k, 2, 2)));
                cross = std::max(cross, max_abs(r.mat().block(2 * k, 2 * mode, 2, 2)));
            }
            const int sgn = r.mat()(2 * mode, 2 * mode + 1) >= 0.0 ? +1 : -1;
            double pattern = std::abs(r.mat()(2 * mode, 2 * mode));
            pattern = std::max(pattern, std::abs(r.mat()(2 * mode, 2 * mode + 1) - sgn));
            pattern = std::max(pattern, std::abs(r.mat()(2 * mode + 1, 2 * mode) + sgn));
            const double r_tol = opt.tol.structure * std::max(1.0, max_abs(r.mat()));
            if (std::max(cross, pattern) > r_tol)
                throw Error(Errc::non_generic_intermediate,
                            "decoupled matrix misses the isolation pattern", mode, opt.level);

            const LocalLayer middle = compose_layers(lam_right, compose_layers(inner, lam_left));
            Block2 blk = r.mat().block<2, 2>(2 * mode, 2 * mode);
            const double blk_tol = std::max(opt.tol.det, 16.0 * r_tol);
            ModeDecoupled out{r,
                              mode,
                              {t1.inner_layer, middle, t2.inner_layer},
                              LocalBlock(blk, blk_tol),
                              detail::remainder_of(r, {mode}, cross),
                              sgn,
                              std::max(cross, pattern)};
            return out;
        } catch (const Error& e) {
            if (e.code() != Errc::non_generic_pair && e.code() != Errc::non_generic_intermediate) throw;
            last = e;
        }
    }
    if (last && !retry_rng) throw *last;
    throw Error(Errc::retry_budget_exhausted,
                std::string("decouple_one: retry budget exhausted at level ") + std::to_string(opt.level) +
                    (last ? std::string(": ") + last->what() : std::string()),
                mode, opt.level);
}

// l modes isolated: matrix = (sum of per-mode blocks) + remainder.
struct MultiDecoupled {
    SymplecticMatrix matrix;
    std::vector<int> decoupled_modes;
    std::vector<LocalBlock> per_mode_blocks;
    SymplecticMatrix remainder;  // complement modes, ascending order
    std::vector<LocalLayer> layers;  // 4^l - 1 layers in application order
    double cross_residual = 0.0;
};

inline MultiDecoupled decouple_many(const std::vector<SymplecticMatrix>& s_list, const std::vector<int>& modes,
                                    const DecoupleOptions& opt = {}, SeededRng* retry_rng = nullptr) {
    const int ell = static_cast<int>(modes.size());
    if (ell < 1) throw Error(Errc::invalid_argument, "decouple_many: need at least one target mode");
    if (s_list.empty()) throw Error(Errc::invalid_argument, "decouple_many: empty matrix list");
    const int n = s_list[0].modes();
    if (ell >= n) throw Error(Errc::invalid_argument, "decouple_many: must leave at least one mode untouched");
    {
        std::vector<int> sorted = modes;
        std::sort(sorted.begin(), sorted.end());
        for (int m : sorted) check_mode_index(m, n);
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw Error(Errc::invalid_argument, "decouple_many: duplicate target mode");
    }
    size_t want = 1;
    for (int i = 0; i < ell; ++i) want *= 4;
    if (s_list.size() != want)
        throw Error(Errc::invalid_argument, "decouple_many: expected " + std::to_string(want) + " matrices");

    if (ell == 1) {
        ModeDecoupled one = decouple_one({s_list[0], s_list[1], s_list[2], s_list[3]}, modes[0], opt, retry_rng);
        MultiDecoupled out{one.matrix,
                           {one.mode},
                           {one.single_mode_block},
                           one.remainder,
                           {one.layers[0], one.layers[1], one.layers[2]},
                           one.cross_residual};
        return out;
    }

    // Four consecutive groups isolate the first l-1 modes; one more pass over
    // the group results isolates the last, with identity blocks on everything
    // already decoupled.
    const size_t quarter = want / 4;
    const std::vector<int> head(modes.begin(), modes.end() - 1);
    std::vector<MultiDecoupled> groups;
    groups.reserve(4);
    for (int g = 0; g < 4; ++g) {
        std::vector<SymplecticMatrix> part(s_list.begin() + static_cast<long>(g * quarter),
                                           s_list.begin() + static_cast<long>((g + 1) * quarter));
        groups.push_back(decouple_many(part, head, opt, retry_rng));
    }

    DecoupleOptions top = opt;
    top.level = opt.level + 1;
    top.frozen.insert(top.frozen.end(), head.begin(), head.end());
    ModeDecoupled last = decouple_one({groups[0].matrix, groups[1].matrix, groups[2].matrix, groups[3].matrix},
                                      modes.back(), top, retry_rng);

    double cross = cross_block_residual(last.matrix.mat(), modes);
    // Mutual cross blocks between decoupled modes count too.
    for (size_t a = 0; a < modes.size(); ++a)
        for (size_t b = 0; b < modes.size(); ++b) {
            if (a == b) continue;
            cross = std::max(cross, max_abs(last.matrix.mat().block(2 * modes[a], 2 * modes[b], 2, 2)));
        }

    MultiDecoupled out{last.matrix, modes, {}, detail::remainder_of(last.matrix, modes, cross), {}, cross};
    out.layers.reserve(want - 1);
    for (int g = 0; g < 4; ++g) {
        out.layers.insert(out.layers.end(), groups[static_cast<size_t>(g)].layers.begin(),
                          groups[static_cast<size_t>(g)].layers.end());
        if (g < 3) out.layers.push_back(last.layers[static_cast<size_t>(g)]);
    }
    const double blk_tol = std::max(opt.tol.det, 16.0 * opt.tol.structure * std::max(1.0, max_abs(last.matrix.mat())));
    out.per_mode_blocks.reserve(modes.size());
    for (int m : modes)
        out.per_mode_blocks.push_back(LocalBlock(last.matrix.mat().block<2, 2>(2 * m, 2 * m), blk_tol));
    return out;
}

}  // namespace guc
