#pragma once

// Deterministic seeded sampling of local layers and multi-mode couplers.
//
// All draws go through SeededRng, which maps an mt19937_64 stream to doubles
// with fixed arithmetic, so equal seeds reproduce equal samples bit for bit
// (std::uniform_real_distribution is implementation-defined and avoided).

#include <complex>
#include <cstdint>
#include <random>

#include <Eigen/Dense>
#include <Eigen/QR>
#include <unsupported/Eigen/MatrixFunctions>

#include "guc/symplectic.hpp"

namespace guc {

struct RngSpec {
    enum class Scheme { factored, exponential };

    std::uint64_t seed = 0;
    Scheme scheme = Scheme::factored;
    double squeeze_cap = 1.0;  // |r| bound for sampled local blocks
};

class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : eng_(seed) {}

    // Uniform on [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Box-Muller; the second variate of each pair is cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform01();  // (0, 1]
        double u2 = uniform01();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        spare_ = mag * std::sin(2.0 * M_PI * u2);
        have_spare_ = true;
        return mag * std::cos(2.0 * M_PI * u2);
    }

private:
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Random single-mode operation R(-theta) Z(r) R(phi); draw order theta, r, phi.
inline LocalBlock random_block(SeededRng& rng, double r_max) {
    const double theta = rng.uniform(0.0, 2.0 * M_PI);
    const double r = rng.uniform(-r_max, r_max);
    const double phi = rng.uniform(0.0, 2.0 * M_PI);
    return euler_block(theta, r, phi);
}

inline LocalLayer random_local_layer(int n_modes, SeededRng& rng, double r_max) {
    if (n_modes < 1) throw Error(Errc::invalid_dimension, "n_modes must be >= 1");
    LocalLayer layer;
    layer.blocks.reserve(static_cast<size_t>(n_modes));
    for (int m = 0; m < n_modes; ++m) layer.blocks.push_back(random_block(rng, r_max));
    return layer;
}

inline LocalLayer random_local_layer(int n_modes, const RngSpec& spec) {
    SeededRng rng(spec.seed);
    return random_local_layer(n_modes, rng, spec.squeeze_cap);
}

// Haar-ish random unitary from the QR of a complex Ginibre matrix, with the
// R diagonal phases normalised away.
inline Eigen::MatrixXcd random_unitary(int n, SeededRng& rng) {
    Eigen::MatrixXcd z(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) z(i, j) = std::complex<double>(rng.normal(), rng.normal());
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(z);
    Eigen::MatrixXcd q = qr.householderQ();
    Eigen::MatrixXcd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < n; ++j) {
        std::complex<double> d = r(j, j);
        d = (std::abs(d) == 0.0) ? 1.0 : d / std::abs(d);
        q.col(j) *= d;
    }
    return q;
}

// Passive (orthogonal-symplectic) mixer: block (j,k) = [[Re U, -Im U], [Im U, Re U]].
inline Mat orthogonal_symplectic_from_unitary(const Eigen::MatrixXcd& u) {
    const int n = static_cast<int>(u.rows());
    Mat k = Mat::Zero(2 * n, 2 * n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const double re = u(j, i).real();
            const double im = u(j, i).imag();
            k(2 * j, 2 * i) = re;
            k(2 * j, 2 * i + 1) = -im;
            k(2 * j + 1, 2 * i) = im;
            k(2 * j + 1, 2 * i + 1) = re;
        }
    return k;
}

// Seeded random coupler.
//
// factored: S = embed(L_a) * K(U) * embed(L_b) with random local layers around
// a passive mixer from a random unitary; exactly symplectic by construction,
// squeezing bounded by the cap, and all 2x2 sub-blocks nonzero with
// probability 1.
//
// exponential: exp(Omega H) with H symmetric Gaussian, scaled to keep the
// norm moderate; kept as a cross-check scheme.
inline SymplecticMatrix random_symplectic(int n_modes, const RngSpec& spec) {
    if (n_modes < 1) throw Error(Errc::invalid_dimension, "n_modes must be >= 1");
    SeededRng rng(spec.seed);
    if (spec.scheme == RngSpec::Scheme::exponential) {
        const int d = 2 * n_modes;
        Mat g(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) g(i, j) = rng.normal();
        Mat h = (g + g.transpose()) / 2.0;
        h *= 1.0 / std::sqrt(static_cast<double>(d));
        Mat s = (symplectic_form_matrix(n_modes) * h).exp();
        return SymplecticMatrix(std::move(s));
    }
    const LocalLayer la = random_local_layer(n_modes, rng, spec.squeeze_cap);
    const Mat k = orthogonal_symplectic_from_unitary(random_unitary(n_modes, rng));
    const LocalLayer lb = random_local_layer(n_modes, rng, spec.squeeze_cap);
    Mat s = embed_local_matrix(la) * k * embed_local_matrix(lb);
    return SymplecticMatrix(std::move(s));
}

}  // namespace guc
