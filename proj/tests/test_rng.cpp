#include <catch2/catch_amalgamated.hpp>

#include "guc/colorsets.hpp"
#include "guc/rng.hpp"

using namespace guc;

TEST_CASE("random couplers are symplectic and generic", "[rng]") {
    // Validation oracle over 100 seeded samples, N in 1..6.
    for (std::uint64_t i = 0; i < 100; ++i) {
        RngSpec spec;
        spec.seed = 1000 + i;
        const int n = 1 + static_cast<int>(i % 6);
        const SymplecticMatrix s = random_symplectic(n, spec);
        REQUIRE(s.residual() <= 1e-10);
        REQUIRE(genericity_check(s).is_generic);
    }
}

TEST_CASE("random sampling is bit-exact per seed", "[rng]") {
    RngSpec spec;
    spec.seed = 0xdeadbeef;
    const SymplecticMatrix a = random_symplectic(4, spec);
    const SymplecticMatrix b = random_symplectic(4, spec);
    REQUIRE(a.mat() == b.mat());

    spec.seed = 0xdeadbef0;
    const SymplecticMatrix c = random_symplectic(4, spec);
    REQUIRE(a.mat() != c.mat());

    const LocalLayer la = random_local_layer(3, spec);
    const LocalLayer lb = random_local_layer(3, spec);
    for (int m = 0; m < 3; ++m) REQUIRE(la.blocks[m].m == lb.blocks[m].m);
}

TEST_CASE("random local layers", "[rng]") {
    SeededRng rng(7);
    const LocalLayer layer = random_local_layer(5, rng, 1.0);
    for (const auto& b : layer.blocks) {
        REQUIRE(std::abs(b.m.determinant() - 1.0) <= 1e-12);
        REQUIRE(euler_decompose(b).r <= 1.0 + 1e-12);
    }
    REQUIRE(embed_local(layer).residual() <= Tolerances{}.symp_tol(5));
}

TEST_CASE("exponential scheme cross-check", "[rng]") {
    for (std::uint64_t i = 0; i < 20; ++i) {
        RngSpec spec;
        spec.seed = 40 + i;
        spec.scheme = RngSpec::Scheme::exponential;
        const int n = 1 + static_cast<int>(i % 5);
        const SymplecticMatrix s = random_symplectic(n, spec);
        REQUIRE(s.residual() <= 1e-10);
    }
}

TEST_CASE("random unitary is unitary", "[rng]") {
    SeededRng rng(99);
    for (int n : {1, 3, 6}) {
        const Eigen::MatrixXcd u = random_unitary(n, rng);
        REQUIRE((u * u.adjoint() - Eigen::MatrixXcd::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-13);
        const Mat k = orthogonal_symplectic_from_unitary(u);
        REQUIRE(is_symplectic(k, 1e-12).ok);
        REQUIRE(max_abs(k * k.transpose() - Mat::Identity(2 * n, 2 * n)) < 1e-13);
    }
}

TEST_CASE("uniform and normal draws are stable", "[rng]") {
    SeededRng a(123);
    SeededRng b(123);
    for (int i = 0; i < 50; ++i) {
        REQUIRE(a.uniform01() == b.uniform01());
        REQUIRE(a.normal() == b.normal());
    }
    SeededRng c(123);
    for (int i = 0; i < 1000; ++i) {
        const double u = c.uniform01();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
    }
}
