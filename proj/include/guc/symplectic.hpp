#pragma once

// Core quadrature conventions and symplectic linear algebra.
//
// Quadratures are ordered (q1, p1, ..., qN, pN). A Gaussian unitary acts on
// quadrature expectation values as x -> S x with S a real 2Nx2N symplectic
// matrix, S * Omega * S^T = Omega, where Omega = diag(omega, ..., omega) and
// omega = [[0, 1], [-1, 0]].

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace guc {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Block2 = Eigen::Matrix2d;

// Real vector in quadrature ordering (q1, p1, ..., qN, pN).
using QuadVector = Eigen::VectorXd;

enum class Errc {
    invalid_dimension,
    invalid_argument,
    squeeze_overflow,
    not_symplectic,
    dimension_mismatch,
    non_generic_pair,
    non_generic_intermediate,
    non_generic_coupler,
    target_crosses_color_sets,
    retry_budget_exhausted,
    saturation_not_reached,
    non_bijective_mapping,
    parse_error,
    io_error,
};

class Error : public std::runtime_error {
public:
    Error(Errc code, std::string message, int mode = -1, int level = -1)
        : std::runtime_error(std::move(message)), code_(code), mode_(mode), level_(level) {}

    Errc code() const { return code_; }
    // Offending mode index (0-based), or -1 when not applicable.
    int mode() const { return mode_; }
    // Recursion level for multi-mode decoupling failures, or -1.
    int level() const { return level_; }

private:
    Errc code_;
    int mode_;
    int level_;
};

struct Tolerances {
    double symp_scale = 1e-9;        // symplectic residual allowance per unit dimension
    double structure = 1e-8;         // structural zero checks, scaled by max-abs entry
    double det = 1e-10;              // |det - 1| for 2x2 local blocks
    double pair_eps = 1e-10;         // quadrature-pair zero classification (relative)
    double block_eps = 1e-10;        // 2x2 zero-block threshold (relative Frobenius)
    double synth = 1e-7;             // end-to-end target-block tolerance (relative)
    double squeeze_cap_hard = 50.0;  // |r| beyond this overflows useful precision
    int retry_budget = 8;

    double symp_tol(int n_modes) const { return symp_scale * 2.0 * n_modes; }
};

inline double max_abs(const Mat& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

inline Block2 omega_block() {
    Block2 w;
    w << 0.0, 1.0, -1.0, 0.0;
    return w;
}

inline Mat symplectic_form_matrix(int n_modes) {
    if (n_modes < 1) throw Error(Errc::invalid_dimension, "n_modes must be >= 1");
    Mat form = Mat::Zero(2 * n_modes, 2 * n_modes);
    for (int m = 0; m < n_modes; ++m) form.block<2, 2>(2 * m, 2 * m) = omega_block();
    return form;
}

// Max-abs norm of S*Omega*S^T - Omega.
inline double symplectic_residual(const Mat& s) {
    if (s.rows() != s.cols() || s.rows() % 2 != 0 || s.rows() == 0)
        throw Error(Errc::invalid_dimension, "matrix must be square with even dimension");
    const Mat form = symplectic_form_matrix(static_cast<int>(s.rows()) / 2);
    return max_abs(s * form * s.transpose() - form);
}

struct SymplecticCheck {
    bool ok = false;
    double residual = 0.0;
};

inline SymplecticCheck is_symplectic(const Mat& s, double tol) {
    const double res = symplectic_residual(s);
    return SymplecticCheck{res <= tol, res};
}

// Validated 2Nx2N real symplectic matrix with cached residual.
class SymplecticMatrix {
public:
    // tol < 0 selects the default policy tolerance for the matrix dimension.
    explicit SymplecticMatrix(Mat m, double tol = -1.0) : m_(std::move(m)) {
        if (m_.rows() != m_.cols() || m_.rows() % 2 != 0 || m_.rows() == 0)
            throw Error(Errc::invalid_dimension, "symplectic matrix must be square with even dimension");
        if (!m_.allFinite())
            throw Error(Errc::invalid_argument, "symplectic matrix entries must be finite");
        n_modes_ = static_cast<int>(m_.rows()) / 2;
        tol_ = tol < 0.0 ? Tolerances{}.symp_tol(n_modes_) : tol;
        residual_ = symplectic_residual(m_);
        if (residual_ > tol_)
            throw Error(Errc::not_symplectic,
                        "symplectic residual " + std::to_string(residual_) + " exceeds tolerance " +
                            std::to_string(tol_));
    }

    int modes() const { return n_modes_; }
    int dim() const { return 2 * n_modes_; }
    const Mat& mat() const { return m_; }
    double residual() const { return residual_; }
    double accepted_tol() const { return tol_; }

private:
    Mat m_;
    int n_modes_ = 0;
    double residual_ = 0.0;
    double tol_ = 0.0;
};

inline SymplecticMatrix symplectic_form(int n_modes) {
    return SymplecticMatrix(symplectic_form_matrix(n_modes), 1e-15);
}

// Entrywise product A*B; the residual bound grows with the factor norms.
inline SymplecticMatrix compose(const SymplecticMatrix& a, const SymplecticMatrix& b) {
    if (a.modes() != b.modes())
        throw Error(Errc::dimension_mismatch, "compose: mode counts differ");
    const double norm_bound = 1e-10 * max_abs(a.mat()) * max_abs(b.mat()) * a.dim();
    const double tol = std::max(Tolerances{}.symp_tol(a.modes()),
                                a.residual() + b.residual() + norm_bound);
    return SymplecticMatrix(a.mat() * b.mat(), tol);
}

// S^{-1} = Omega * S^T * Omega^T; no linear solve needed.
inline SymplecticMatrix symplectic_inverse(const SymplecticMatrix& s) {
    const Mat form = symplectic_form_matrix(s.modes());
    Mat inv = form * s.mat().transpose() * form.transpose();
    return SymplecticMatrix(std::move(inv), std::max(s.accepted_tol(), s.residual() * 2 + 1e-14));
}

// Single-mode (2x2) symplectic block: det = 1 within tolerance.
struct LocalBlock {
    Block2 m;

    explicit LocalBlock(const Block2& block, double tol_det = Tolerances{}.det) : m(block) {
        if (!m.allFinite()) throw Error(Errc::invalid_argument, "local block entries must be finite");
        const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
        if (std::abs(det - 1.0) > tol_det)
            throw Error(Errc::not_symplectic,
                        "local block determinant " + std::to_string(det) + " not 1 within " +
                            std::to_string(tol_det));
    }

    static LocalBlock identity() { return LocalBlock(Block2::Identity(), 0.0); }
};

// Phase-space rotation (phase shift) by theta.
inline LocalBlock rotation(double theta) {
    if (!std::isfinite(theta)) throw Error(Errc::invalid_argument, "rotation angle must be finite");
    Block2 r;
    r << std::cos(theta), std::sin(theta), -std::sin(theta), std::cos(theta);
    return LocalBlock(r, 1e-12);
}

// Single-mode squeezing: diag(e^{-r}, e^{r}).
inline LocalBlock squeeze(double r) {
    if (!std::isfinite(r)) throw Error(Errc::invalid_argument, "squeeze parameter must be finite");
    if (std::abs(r) > Tolerances{}.squeeze_cap_hard)
        throw Error(Errc::squeeze_overflow, "squeeze parameter " + std::to_string(r) + " exceeds hard cap");
    Block2 z;
    z << std::exp(-r), 0.0, 0.0, std::exp(r);
    return LocalBlock(z, 1e-12);
}

// Exact inverse of a 2x2 block, via the adjugate scaled by the determinant.
inline LocalBlock inverse_block(const LocalBlock& b) {
    const double det = b.m(0, 0) * b.m(1, 1) - b.m(0, 1) * b.m(1, 0);
    Block2 inv;
    inv << b.m(1, 1), -b.m(0, 1), -b.m(1, 0), b.m(0, 0);
    return LocalBlock(inv / det, 1e-9);
}

struct EulerAngles {
    double theta = 0.0;
    double r = 0.0;
    double phi = 0.0;
};

inline LocalBlock euler_block(double theta, double r, double phi) {
    return LocalBlock(rotation(-theta).m * squeeze(r).m * rotation(phi).m, 1e-9);
}

// Split L = R(-theta) Z(r) R(phi) with r >= 0 and theta, phi in [0, 2pi).
//
// Entry sums expose the angles directly:
//   L00 + L11 = 2 cosh(r) cos(theta - phi)    L01 - L10 = -2 cosh(r) sin(theta - phi)
//   L00 - L11 = -2 sinh(r) cos(theta + phi)   L01 + L10 = -2 sinh(r) sin(theta + phi)
// so no eigenproblem is needed and the split stays accurate under strong
// squeezing. At r = 0 the sum angle is unconstrained; the gauge theta = 0 is
// chosen there.
inline EulerAngles euler_decompose(const LocalBlock& block) {
    const Block2& l = block.m;
    const double det = l(0, 0) * l(1, 1) - l(0, 1) * l(1, 0);
    if (std::abs(det - 1.0) > 1e-6 * std::max(1.0, max_abs(l) * max_abs(l)))
        throw Error(Errc::not_symplectic, "euler_decompose: block determinant is not 1");
    const auto wrap = [](double a) {
        const double two_pi = 2.0 * M_PI;
        double w = std::fmod(a, two_pi);
        if (w < 0) w += two_pi;
        return w;
    };

    const double p1 = l(0, 0) + l(1, 1);
    const double p2 = l(0, 1) - l(1, 0);
    const double m1 = l(0, 0) - l(1, 1);
    const double m2 = l(0, 1) + l(1, 0);
    const double diff = std::atan2(-p2, p1);  // theta - phi
    const double mag = std::hypot(m1, m2);    // 2 sinh(r)

    EulerAngles out;
    out.r = std::asinh(mag / 2.0);
    if (mag <= 8.0 * std::numeric_limits<double>::epsilon() * std::hypot(p1, p2)) {
        out.theta = 0.0;
        out.phi = wrap(-diff);
        return out;
    }
    const double sum = std::atan2(-m2, -m1);  // theta + phi
    out.theta = wrap((sum + diff) / 2.0);
    out.phi = wrap((sum - diff) / 2.0);
    return out;
}

// Direct sum of N single-mode blocks.
struct LocalLayer {
    std::vector<LocalBlock> blocks;

    int modes() const { return static_cast<int>(blocks.size()); }
};

inline LocalLayer identity_layer(int n_modes) {
    if (n_modes < 1) throw Error(Errc::invalid_dimension, "n_modes must be >= 1");
    LocalLayer layer;
    layer.blocks.assign(static_cast<size_t>(n_modes), LocalBlock::identity());
    return layer;
}

inline Mat embed_local_matrix(const LocalLayer& layer) {
    const int n = layer.modes();
    if (n < 1) throw Error(Errc::invalid_dimension, "empty local layer");
    Mat full = Mat::Zero(2 * n, 2 * n);
    for (int m = 0; m < n; ++m) full.block<2, 2>(2 * m, 2 * m) = layer.blocks[static_cast<size_t>(m)].m;
    return full;
}

inline SymplecticMatrix embed_local(const LocalLayer& layer) {
    return SymplecticMatrix(embed_local_matrix(layer), 1e-9 * layer.modes());
}

// Blockwise product: (after * before) applied as "before first".
inline LocalLayer compose_layers(const LocalLayer& after, const LocalLayer& before) {
    if (after.modes() != before.modes())
        throw Error(Errc::dimension_mismatch, "compose_layers: mode counts differ");
    LocalLayer out;
    out.blocks.reserve(after.blocks.size());
    for (size_t m = 0; m < after.blocks.size(); ++m)
        out.blocks.push_back(LocalBlock(after.blocks[m].m * before.blocks[m].m, 1e-8));
    return out;
}

inline LocalLayer inverse_layer(const LocalLayer& layer) {
    LocalLayer out;
    out.blocks.reserve(layer.blocks.size());
    for (const auto& b : layer.blocks) out.blocks.push_back(inverse_block(b));
    return out;
}

// --- mode indexing helpers -------------------------------------------------

inline void check_mode_index(int mode, int n_modes) {
    if (mode < 0 || mode >= n_modes)
        throw Error(Errc::invalid_argument, "mode index " + std::to_string(mode) + " out of range");
}

inline Eigen::Vector2d mode_pair(const QuadVector& v, int mode) {
    return Eigen::Vector2d(v(2 * mode), v(2 * mode + 1));
}

inline void validate_quad_vector(const QuadVector& v) {
    if (v.size() == 0 || v.size() % 2 != 0)
        throw Error(Errc::invalid_dimension, "quadrature vector length must be a positive even number");
    if (!v.allFinite()) throw Error(Errc::invalid_argument, "quadrature vector entries must be finite");
}

// Rows/columns of the listed modes, in the given order.
inline Mat extract_modes(const Mat& s, const std::vector<int>& modes) {
    const int n = static_cast<int>(s.rows()) / 2;
    Mat out(2 * modes.size(), 2 * modes.size());
    for (size_t a = 0; a < modes.size(); ++a) {
        check_mode_index(modes[a], n);
        for (size_t b = 0; b < modes.size(); ++b)
            out.block<2, 2>(2 * static_cast<int>(a), 2 * static_cast<int>(b)) =
                s.block<2, 2>(2 * modes[a], 2 * modes[b]);
    }
    return out;
}

inline std::vector<int> complement_modes(int n_modes, const std::vector<int>& modes) {
    std::vector<bool> used(static_cast<size_t>(n_modes), false);
    for (int m : modes) {
        check_mode_index(m, n_modes);
        used[static_cast<size_t>(m)] = true;
    }
    std::vector<int> rest;
    for (int m = 0; m < n_modes; ++m)
        if (!used[static_cast<size_t>(m)]) rest.push_back(m);
    return rest;
}

// Largest |entry| in the cross blocks between `modes` and the complement.
inline double cross_block_residual(const Mat& s, const std::vector<int>& modes) {
    const int n = static_cast<int>(s.rows()) / 2;
    const std::vector<int> rest = complement_modes(n, modes);
    double worst = 0.0;
    for (int a : modes)
        for (int b : rest) {
            worst = std::max(worst, max_abs(s.block(2 * a, 2 * b, 2, 2)));
            worst = std::max(worst, max_abs(s.block(2 * b, 2 * a, 2, 2)));
        }
    return worst;
}

// Block permutation matrix: slot k of the output holds input mode order[k].
inline Mat mode_permutation(int n_modes, const std::vector<int>& order) {
    if (static_cast<int>(order.size()) != n_modes)
        throw Error(Errc::invalid_argument, "mode order must list every mode exactly once");
    Mat p = Mat::Zero(2 * n_modes, 2 * n_modes);
    std::vector<bool> seen(static_cast<size_t>(n_modes), false);
    for (int k = 0; k < n_modes; ++k) {
        check_mode_index(order[static_cast<size_t>(k)], n_modes);
        if (seen[static_cast<size_t>(order[static_cast<size_t>(k)])])
            throw Error(Errc::invalid_argument, "mode order contains duplicates");
        seen[static_cast<size_t>(order[static_cast<size_t>(k)])] = true;
        p(2 * k, 2 * order[static_cast<size_t>(k)]) = 1.0;
        p(2 * k + 1, 2 * order[static_cast<size_t>(k)] + 1) = 1.0;
    }
    return p;
}

// Identity everywhere except the target's blocks placed at target_modes.
inline SymplecticMatrix embed_target(const SymplecticMatrix& target, const std::vector<int>& target_modes,
                                     int n_modes) {
    if (static_cast<int>(target_modes.size()) != target.modes())
        throw Error(Errc::dimension_mismatch, "target mode list does not match target size");
    std::vector<bool> seen(static_cast<size_t>(n_modes), false);
    for (int m : target_modes) {
        check_mode_index(m, n_modes);
        if (seen[static_cast<size_t>(m)]) throw Error(Errc::invalid_argument, "duplicate target mode");
        seen[static_cast<size_t>(m)] = true;
    }
    Mat full = Mat::Identity(2 * n_modes, 2 * n_modes);
    for (size_t a = 0; a < target_modes.size(); ++a)
        for (size_t b = 0; b < target_modes.size(); ++b)
            full.block<2, 2>(2 * target_modes[a], 2 * target_modes[b]) =
                target.mat().block<2, 2>(2 * static_cast<int>(a), 2 * static_cast<int>(b));
    return SymplecticMatrix(std::move(full), std::max(Tolerances{}.symp_tol(n_modes), target.residual() * 2));
}

}  // namespace guc
