#include <catch2/catch_amalgamated.hpp>

#include "guc/decouple.hpp"
#include "guc/rng.hpp"

using namespace guc;

namespace {

SymplecticMatrix seeded(int n, std::uint64_t seed) {
    RngSpec spec;
    spec.seed = seed;
    return random_symplectic(n, spec);
}

std::array<SymplecticMatrix, 4> quad(int n, std::uint64_t base) {
    return {seeded(n, base), seeded(n, base + 1), seeded(n, base + 2), seeded(n, base + 3)};
}

// Block-diagonal N-mode matrix with a random block on mode 0 and identity
// elsewhere.
SymplecticMatrix one_mode_padded(int n, std::uint64_t seed) {
    SeededRng rng(seed);
    LocalLayer layer = identity_layer(n);
    layer.blocks[0] = random_block(rng, 1.0);
    return embed_local(layer);
}

}  // namespace

TEST_CASE("match_block sign oracle", "[decouple]") {
    // Brute-force determination of the global sign: the formula maps u to
    // sigma * omega * v with one fixed sigma for all inputs.
    const Block2 w = omega_block();
    SeededRng rng(2024);
    int plus = 0, minus = 0;
    for (int i = 0; i < 50; ++i) {
        Eigen::Vector2d u(rng.normal(), rng.normal());
        Eigen::Vector2d v(rng.normal(), rng.normal());
        const Eigen::Vector2d got = match_block(u, v) * u;
        if ((got - w * v).norm() < 1e-9 * v.norm()) ++plus;
        if ((got + w * v).norm() < 1e-9 * v.norm()) ++minus;
    }
    REQUIRE(plus == 0);
    REQUIRE(minus == 50);
    REQUIRE(kLocalMatchSign == -1);

    // Hand-evaluated cases.
    Block2 expect;
    expect << 0, -1, 1, 0;
    REQUIRE(max_abs(match_block({1, 0}, {1, 0}) - expect) == 0.0);
    REQUIRE(max_abs(match_block({1, 0}, {0, 1}) + Block2::Identity()) == 0.0);
}

TEST_CASE("match_block determinant and mapping contract", "[decouple][property]") {
    SeededRng rng(7);
    const Block2 w = omega_block();
    for (int i = 0; i < 200; ++i) {
        Eigen::Vector2d u(rng.normal(), rng.normal());
        Eigen::Vector2d v(rng.normal(), rng.normal());
        const Block2 l = match_block(u, v);
        REQUIRE(std::abs(l.determinant() - 1.0) <= 1e-10 * std::max(1.0, max_abs(l) * max_abs(l)));
        const double scale = std::max(1.0, v.norm());
        REQUIRE((l * u - kLocalMatchSign * w * v).norm() <= 1e-10 * scale);
    }
}

TEST_CASE("local_match", "[decouple]") {
    // Modes whose pairs vanish on both sides get identity blocks.
    QuadVector u = QuadVector::Zero(6);
    QuadVector v = QuadVector::Zero(6);
    u(0) = 1.0;
    v(1) = 2.0;
    u(4) = 0.3;
    v(4) = -0.7;
    const LocalLayer layer = local_match(u, v);
    REQUIRE(max_abs(layer.blocks[1].m - Block2::Identity()) == 0.0);

    // Exactly one vanishing side is the non-generic case.
    QuadVector bad = v;
    bad(4) = 0.0;
    bad(5) = 0.0;
    try {
        local_match(u, bad);
        FAIL("expected non_generic_pair");
    } catch (const Error& e) {
        REQUIRE(e.code() == Errc::non_generic_pair);
        REQUIRE(e.mode() == 2);
        REQUIRE(std::string(e.what()).find("target") != std::string::npos);
    }

    // Multiply-back oracle on dense vectors, N = 4.
    SeededRng rng(55);
    const Mat form = symplectic_form_matrix(4);
    for (int i = 0; i < 25; ++i) {
        QuadVector a(8), b(8);
        for (int k = 0; k < 8; ++k) {
            a(k) = rng.normal();
            b(k) = rng.normal();
        }
        const LocalLayer l = local_match(a, b);
        const QuadVector got = embed_local_matrix(l) * a;
        const QuadVector want = kLocalMatchSign * form * b;
        const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
        REQUIRE((got - want).cwiseAbs().maxCoeff() <= 1e-10 * scale);
        for (const auto& blk : l.blocks)
            REQUIRE(std::abs(blk.m.determinant() - 1.0) <= 1e-10 * std::max(1.0, max_abs(blk.m) * max_abs(blk.m)));
    }

    REQUIRE_THROWS_AS(local_match(QuadVector::Zero(4), QuadVector::Zero(6)), Error);
}

TEST_CASE("build_sandwich on the symplectic form", "[decouple]") {
    // N = 1, S_a = S_b = omega: the inner block solves L * (0,-1) = omega * (0,1)
    // and the sandwich collapses to omega itself.
    const SymplecticMatrix w = symplectic_form(1);
    const Sandwich t = build_sandwich(w, w, 0);
    Block2 inner_expect;
    inner_expect << 0, -1, 1, 0;
    REQUIRE(max_abs(t.inner_layer.blocks[0].m - inner_expect) == 0.0);
    REQUIRE(max_abs(t.matrix.mat() - w.mat()) == 0.0);
    REQUIRE(t.sign == +1);
    REQUIRE(t.structure_residual == 0.0);
}

TEST_CASE("build_sandwich structure on random couplers", "[decouple][property]") {
    for (std::uint64_t i = 0; i < 20; ++i) {
        const int n = 2 + static_cast<int>(i % 5);
        const int mode = static_cast<int>(i) % n;
        const SymplecticMatrix a = seeded(n, 3000 + 2 * i);
        const SymplecticMatrix b = seeded(n, 3001 + 2 * i);
        const Sandwich t = build_sandwich(a, b, mode);
        const double scale = std::max(1.0, max_abs(t.matrix.mat()));
        REQUIRE(t.structure_residual <= 1e-9 * scale);
        // Forced by symplecticity of the sandwich.
        const double prod = t.matrix.mat()(2 * mode, 2 * mode + 1) * t.matrix.mat()(2 * mode + 1, 2 * mode);
        REQUIRE(prod == Catch::Approx(-1.0).epsilon(1e-9));
        REQUIRE(t.parts == std::pair<int, int>{0, 1});
    }
}

TEST_CASE("build_inner_layer correlation sum", "[decouple]") {
    const int n = 3;
    const std::array<SymplecticMatrix, 4> s = quad(n, 4100);
    const Sandwich t1 = build_sandwich(s[0], s[1], 0, {}, {0, 1});
    const Sandwich t2 = build_sandwich(s[2], s[3], 0, {}, {2, 3});

    // The correlation constant two ways: componentwise sum vs dot products.
    const Mat& m1 = t1.matrix.mat();
    const Mat& m2 = t2.matrix.mat();
    double c_component = 0.0;
    for (int j = 0; j < 2 * n; ++j)
        c_component += m2(0, j) * m2(1, j) - m1(j, 0) * m1(j, 1);
    const double c_dots = m2.row(0).dot(m2.row(1)) - m1.col(1).dot(m1.col(0));
    REQUIRE(std::abs(c_component - c_dots) <= 1e-12 * std::max(1.0, std::abs(c_dots)));

    // The layer carries omega on the decoupled mode.
    const LocalLayer inner = build_inner_layer(t1, t2);
    REQUIRE(max_abs(inner.blocks[0].m - omega_block()) == 0.0);

    // And the closed-form block at the decoupled mode agrees with omega.
    const QuadVector u = m1.col(1);
    const QuadVector alpha = m2.row(0).transpose();
    const QuadVector beta = m2.row(1).transpose();
    const QuadVector chi = m1.col(0);
    const QuadVector v = beta - (alpha.dot(beta) - u.dot(chi)) * alpha;
    REQUIRE(max_abs(match_block(mode_pair(u, 0), mode_pair(v, 0)) - omega_block()) < 1e-12);
}

TEST_CASE("build_inner_layer keeps untouched modes at identity", "[decouple]") {
    // Couplers that only act on mode 0 give sandwiches whose remaining modes
    // carry vanishing pairs on both sides.
    const int n = 3;
    const SymplecticMatrix a = one_mode_padded(n, 61);
    const SymplecticMatrix b = one_mode_padded(n, 62);
    const Sandwich t1 = build_sandwich(a, b, 0);
    const Sandwich t2 = build_sandwich(a, b, 0);
    const LocalLayer inner = build_inner_layer(t1, t2);
    REQUIRE(max_abs(inner.blocks[1].m - Block2::Identity()) == 0.0);
    REQUIRE(max_abs(inner.blocks[2].m - Block2::Identity()) == 0.0);
}

TEST_CASE("decouple_one isolates the selected mode", "[decouple]") {
    for (std::uint64_t i = 0; i < 12; ++i) {
        const int n = 2 + static_cast<int>(i % 5);
        const int mode = static_cast<int>(i) % n;
        const std::array<SymplecticMatrix, 4> s = quad(n, 5000 + 10 * i);
        const ModeDecoupled r = decouple_one(s, mode);
        const double scale = std::max(1.0, max_abs(r.matrix.mat()));

        REQUIRE(r.cross_residual <= 1e-8 * scale);
        // Top block pattern (0, s / -s, *).
        const Block2 blk = r.single_mode_block.m;
        REQUIRE(std::abs(blk(0, 0)) <= 1e-8 * scale);
        REQUIRE(std::abs(std::abs(blk(0, 1)) - 1.0) <= 1e-8 * scale);
        REQUIRE(std::abs(blk(1, 0) + blk(0, 1)) <= 1e-8 * scale);

        // Multiply-back oracle: the recorded factors reproduce the matrix.
        const Mat explicit_product =
            s[3].mat() * embed_local_matrix(r.layers[2]) * s[2].mat() * embed_local_matrix(r.layers[1]) *
            s[1].mat() * embed_local_matrix(r.layers[0]) * s[0].mat();
        REQUIRE(max_abs(explicit_product - r.matrix.mat()) <= 1e-10 * scale);

        // Remainder is the complement square block and symplectic on its own.
        REQUIRE(r.remainder.modes() == n - 1);
        REQUIRE(is_symplectic(r.remainder.mat(), 1e-8 * scale).ok);
    }
}

TEST_CASE("decouple_one keeps block-diagonal inputs block-diagonal", "[decouple]") {
    // Mode 0 already decoupled in every input: no coupling to remove.
    const int n = 3;
    std::vector<SymplecticMatrix> ss;
    for (std::uint64_t k = 0; k < 4; ++k) {
        SeededRng rng(700 + k);
        LocalLayer top = identity_layer(1);
        top.blocks[0] = random_block(rng, 1.0);
        Mat m = Mat::Zero(2 * n, 2 * n);
        m.block<2, 2>(0, 0) = top.blocks[0].m;
        m.block(2, 2, 4, 4) = seeded(2, 800 + k).mat();
        ss.push_back(SymplecticMatrix(m));
    }
    const ModeDecoupled r = decouple_one({ss[0], ss[1], ss[2], ss[3]}, 1);
    const double scale = std::max(1.0, max_abs(r.matrix.mat()));
    for (int k = 1; k < n; ++k) {
        REQUIRE(max_abs(r.matrix.mat().block(0, 2 * k, 2, 2)) <= 1e-12 * scale);
        REQUIRE(max_abs(r.matrix.mat().block(2 * k, 0, 2, 2)) <= 1e-12 * scale);
    }
}

TEST_CASE("decouple_one at mode m equals permutation-conjugated decoupling at mode 0", "[decouple][property]") {
    const int n = 4;
    const int mode = 2;
    const std::array<SymplecticMatrix, 4> s = quad(n, 9100);
    const ModeDecoupled direct = decouple_one(s, mode);

    const Mat p = mode_permutation(n, {2, 0, 1, 3});
    std::array<SymplecticMatrix, 4> conj = {
        SymplecticMatrix(p * s[0].mat() * p.transpose()), SymplecticMatrix(p * s[1].mat() * p.transpose()),
        SymplecticMatrix(p * s[2].mat() * p.transpose()), SymplecticMatrix(p * s[3].mat() * p.transpose())};
    const ModeDecoupled swapped = decouple_one(conj, 0);

    const Mat back = p.transpose() * swapped.matrix.mat() * p;
    const double scale = std::max(1.0, max_abs(back));
    REQUIRE(max_abs(back - direct.matrix.mat()) <= 1e-12 * scale);
}

TEST_CASE("decouple_one error reporting", "[decouple]") {
    // The symplectic form is the canonical non-generic input: its first
    // column pairs vanish on every other mode while the rows do not... build
    // a case where exactly one side vanishes.
    const int n = 2;
    const SymplecticMatrix w = symplectic_form(n);
    const SymplecticMatrix dense = seeded(n, 321);
    try {
        build_sandwich(w, dense, 0);
        FAIL("expected non_generic_pair");
    } catch (const Error& e) {
        REQUIRE(e.code() == Errc::non_generic_pair);
        REQUIRE(e.mode() == 1);
    }
    REQUIRE_THROWS_AS(decouple_one({w, w, w, w}, 0, {}, nullptr), Error);

    const std::array<SymplecticMatrix, 4> bad = {seeded(2, 1), seeded(2, 2), seeded(3, 3), seeded(2, 4)};
    REQUIRE_THROWS_AS(decouple_one(bad, 0), Error);
}

TEST_CASE("decouple_many base case matches decouple_one", "[decouple]") {
    const int n = 3;
    const std::array<SymplecticMatrix, 4> s = quad(n, 6200);
    const ModeDecoupled one = decouple_one(s, 1);
    const MultiDecoupled many = decouple_many({s[0], s[1], s[2], s[3]}, {1});
    REQUIRE(many.matrix.mat() == one.matrix.mat());
    REQUIRE(many.layers.size() == 3);
    REQUIRE(many.decoupled_modes == std::vector<int>{1});
    REQUIRE(max_abs(many.per_mode_blocks[0].m - one.single_mode_block.m) == 0.0);
}

TEST_CASE("decouple_many isolates two modes", "[decouple]") {
    const int n = 3;
    std::vector<SymplecticMatrix> s_list;
    for (std::uint64_t k = 0; k < 16; ++k) s_list.push_back(seeded(n, 7000 + k));
    const std::vector<int> modes = {0, 1};
    const MultiDecoupled md = decouple_many(s_list, modes);

    REQUIRE(md.layers.size() == 15);
    const double scale = std::max(1.0, max_abs(md.matrix.mat()));
    REQUIRE(md.cross_residual <= 1e-7 * scale);

    // Oracle: explicit product of all recorded factors.
    Mat acc = Mat::Identity(2 * n, 2 * n);
    for (size_t k = 0; k < s_list.size(); ++k) {
        acc = s_list[k].mat() * acc;
        if (k + 1 < s_list.size()) acc = embed_local_matrix(md.layers[k]) * acc;
    }
    REQUIRE(max_abs(acc - md.matrix.mat()) <= 1e-10 * scale);

    // Per-mode blocks are the diagonal blocks of the result.
    for (size_t i = 0; i < modes.size(); ++i)
        REQUIRE(md.per_mode_blocks[i].m == md.matrix.mat().block<2, 2>(2 * modes[i], 2 * modes[i]));

    REQUIRE(md.remainder.modes() == 1);
    REQUIRE(is_symplectic(md.remainder.mat(), 1e-7 * scale).ok);
}

TEST_CASE("decouple_many input validation", "[decouple]") {
    std::vector<SymplecticMatrix> four = {seeded(3, 1), seeded(3, 2), seeded(3, 3), seeded(3, 4)};
    REQUIRE_THROWS_AS(decouple_many(four, {0, 1}), Error);   // needs 16
    REQUIRE_THROWS_AS(decouple_many(four, {0, 0}), Error);   // duplicate
    REQUIRE_THROWS_AS(decouple_many(four, {}), Error);       // empty
    std::vector<SymplecticMatrix> sixteen;
    for (std::uint64_t k = 0; k < 16; ++k) sixteen.push_back(seeded(2, 30 + k));
    REQUIRE_THROWS_AS(decouple_many(sixteen, {0, 1}), Error);  // l must stay < N
}
