#include <doctest.h>

#include <cmath>

#include "sosdec/synth.hpp"
#include "sosdec/tensor.hpp"

using namespace sosdec;

namespace {

SymTensor random_symmetric(int d, int k, std::uint64_t seed) {
    SymTensor T(d, k);
    Rng rng(seed);
    for (std::size_t i = 0; i < T.size(); ++i) T[i] = rng.next_gaussian();
    T.symmetrize();
    return T;
}

// Brute-force maximum of |<T, x^{(x)k}>| over a dense grid on the sphere,
// d <= 3 only. Independent of the power-iteration path.
double grid_injective_norm(const SymTensor& T, int steps) {
    const int d = T.dim();
    REQUIRE(d <= 3);
    double best = 0.0;
    const double pi = 3.14159265358979323846;
    if (d == 2) {
        for (int i = 0; i < steps; ++i) {
            double th = pi * i / steps;
            Vector x(2);
            x << std::cos(th), std::sin(th);
            best = std::max(best, std::abs(T.eval_power(x)));
        }
    } else {
        for (int i = 0; i <= steps; ++i) {
            double phi = pi * i / steps;
            for (int j = 0; j < 2 * steps; ++j) {
                double th = pi * j / steps;
                Vector x(3);
                x << std::sin(phi) * std::cos(th), std::sin(phi) * std::sin(th), std::cos(phi);
                best = std::max(best, std::abs(T.eval_power(x)));
            }
        }
    }
    return best;
}

} // namespace

TEST_CASE("unfold rank-one basis tensor") {
    SymTensor T(2, 3);
    Vector e1(2);
    e1 << 1, 0;
    T.add_rank_one(e1);
    Unfolding U = unfold(T, {0});
    CHECK(U.matrix.rows() == 2);
    CHECK(U.matrix.cols() == 4);
    CHECK(U.matrix(0, 0) == doctest::Approx(1.0));
    CHECK(U.matrix.cwiseAbs().sum() == doctest::Approx(1.0));
}

TEST_CASE("unfold round-trips through fold") {
    SymTensor T = random_symmetric(3, 3, 11);
    Unfolding U = unfold(T, {0, 1});
    SymTensor back = fold(U);
    for (std::size_t i = 0; i < T.size(); ++i) CHECK(back[i] == T[i]);
}

TEST_CASE("transpose-pair unfoldings share their norm") {
    SymTensor T = random_symmetric(3, 3, 12);
    CHECK(spectral_norm(unfold(T, {0})) ==
          doctest::Approx(spectral_norm(unfold(T, {1, 2}))).epsilon(1e-10));
}

TEST_CASE("unfold rejects bad mode sets") {
    SymTensor T = random_symmetric(2, 3, 13);
    CHECK_THROWS_AS(unfold(T, {}), std::invalid_argument);
    CHECK_THROWS_AS(unfold(T, {0, 1, 2}), std::invalid_argument);
    CHECK_THROWS_AS(unfold(T, {5}), std::invalid_argument);
}

TEST_CASE("spectral norm of an orthonormal rank decomposition is 1") {
    auto comps = gen_components(ComponentKind::orthonormal, 5, 5, 21);
    SymTensor T(5, 3);
    for (const auto& a : comps) T.add_rank_one(a);
    CHECK(spectral_norm(unfold(T, {0})) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("Phi norms: d x d reshape is 1/sqrt(d), outer product is 1") {
    int d = 6;
    Vector phi = SymProjector::phi(d);
    CHECK(phi.norm() == doctest::Approx(1.0).epsilon(1e-14));
    Matrix M(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) M(i, j) = phi(static_cast<Eigen::Index>(i) * d + j);
    CHECK(spectral_norm(M) == doctest::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-12));
    Matrix outer = phi * phi.transpose();
    CHECK(spectral_norm(outer) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("power iteration matches full SVD on a d=8 tensor") {
    SymTensor T = random_symmetric(8, 3, 31);
    Matrix M = unfold(T, {0}).matrix;
    Eigen::BDCSVD<Matrix> svd(M);
    double exact = svd.singularValues()(0);
    // Force the power-iteration path by calling on the transpose blown up is
    // not possible here; instead check the public entry point agrees with the
    // SVD oracle at its default tolerance.
    CHECK(spectral_norm(M, 1e-10) == doctest::Approx(exact).epsilon(1e-8));
}

TEST_CASE("injective norm lower bound on simple tensors") {
    Vector a(4);
    a << 0.5, -0.5, 0.5, 0.5;
    SymTensor T(4, 3);
    T.add_rank_one(a);
    CHECK(injective_norm_lb(T, 4, 40, 1) == doctest::Approx(1.0).epsilon(1e-9));

    SymTensor Z(3, 3);
    CHECK(injective_norm_lb(Z, 2, 10, 1) == doctest::Approx(0.0));
}

TEST_CASE("injective norm lower bound agrees with a grid oracle") {
    SymTensor T(3, 3);
    Vector e1 = Vector::Zero(3), e2 = Vector::Zero(3);
    e1(0) = 1;
    e2(1) = 1;
    T.add_rank_one(e1);
    T.add_rank_one(e2, 0.5);
    double grid = grid_injective_norm(T, 400);
    CHECK(grid == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(injective_norm_lb(T, 8, 60, 5) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("injective norm sandwich against the balanced spectral norm") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        SymTensor T = random_symmetric(3, 3, 100 + seed);
        double inj = grid_injective_norm(T, 250);
        double spec = spectral_norm(unfold(T, {0}));
        double lb = injective_norm_lb(T, 10, 80, seed);
        CHECK(lb <= spec + 1e-9);
        CHECK(spec <= std::sqrt(3.0) * inj * (1.0 + 2e-2) + 1e-9);
        CHECK(lb <= inj * (1.0 + 2e-2) + 1e-9);
    }
}

TEST_CASE("contract of an orthonormal decomposition is linear in the weights") {
    auto comps = gen_components(ComponentKind::orthonormal, 3, 3, 41);
    SymTensor T(3, 3);
    for (const auto& a : comps) T.add_rank_one(a);
    Vector g = 2.0 * comps[0] + comps[1];
    Matrix M = contract(T, g);
    Matrix expected = 2.0 * comps[0] * comps[0].transpose() + comps[1] * comps[1].transpose();
    CHECK((M - expected).cwiseAbs().maxCoeff() == doctest::Approx(0.0).epsilon(1e-12));

    Matrix Z = contract(T, Vector::Zero(3));
    CHECK(Z.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("contract is exactly linear on random inputs") {
    SymTensor T = random_symmetric(4, 3, 51);
    Rng rng(52);
    Vector g(4), h(4);
    for (int i = 0; i < 4; ++i) {
        g(i) = rng.next_gaussian();
        h(i) = rng.next_gaussian();
    }
    double alpha = 1.7, beta = -0.3;
    Matrix lhs = contract(T, alpha * g + beta * h);
    Matrix rhs = alpha * contract(T, g) + beta * contract(T, h);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("contract validates dimensions") {
    SymTensor T = random_symmetric(3, 3, 53);
    CHECK_THROWS_AS(contract(T, Vector::Zero(5)), std::invalid_argument);
}

TEST_CASE("symmetric projector annihilates antisymmetric input") {
    int d = 3;
    SymProjector P(d, SymProjector::Variant::symmetric_subspace);
    Vector v = Vector::Zero(9);
    v(0 * 3 + 1) = 1.0;
    v(1 * 3 + 0) = -1.0;
    CHECK(P.apply(v).norm() == doctest::Approx(0.0));
}

TEST_CASE("minus-phi projector annihilates Phi and is idempotent") {
    int d = 5;
    SymProjector P(d, SymProjector::Variant::symmetric_minus_phi);
    CHECK(P.apply(SymProjector::phi(d)).norm() == doctest::Approx(0.0).epsilon(1e-14));

    Rng rng(61);
    Vector v(25);
    for (int i = 0; i < 25; ++i) v(i) = rng.next_gaussian();
    Vector once = P.apply(v);
    Vector twice = P.apply(once);
    CHECK((twice - once).norm() <= 1e-12 * v.norm());
}

TEST_CASE("projected square of a unit vector has norm 1 - 1/d") {
    int d = 4;
    Rng rng(62);
    Vector a(d);
    for (int i = 0; i < d; ++i) a(i) = rng.next_gaussian();
    a.normalize();
    Vector a2(d * d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) a2(static_cast<Eigen::Index>(i) * d + j) = a(i) * a(j);
    SymProjector P(d, SymProjector::Variant::symmetric_minus_phi);
    CHECK(P.apply(a2).squaredNorm() == doctest::Approx(1.0 - 1.0 / d).epsilon(1e-12));
}

TEST_CASE("three unfolding norms of a symmetric 3-tensor agree") {
    SymTensor T = random_symmetric(4, 3, 71);
    double n1 = spectral_norm(unfold(T, {0}));
    double n2 = spectral_norm(unfold(T, {1}));
    double n3 = spectral_norm(unfold(T, {2}));
    CHECK(n1 == doctest::Approx(n2).epsilon(1e-9));
    CHECK(n1 == doctest::Approx(n3).epsilon(1e-9));
}

TEST_CASE("memory budget is enforced") {
    CHECK_THROWS_AS(SymTensor(100, 4, 1000000), std::invalid_argument);
}

TEST_CASE("symmetry validation flags asymmetric tensors") {
    SymTensor T(2, 2);
    T[1] = 1.0; // (0,1) set without (1,0)
    CHECK(T.symmetry_defect() == doctest::Approx(1.0));
    CHECK_THROWS_AS(T.validate_symmetry(), std::invalid_argument);
    T.symmetrize();
    CHECK_NOTHROW(T.validate_symmetry());
}

TEST_CASE("tensor files round-trip bit-exactly") {
    SymTensor T = random_symmetric(3, 4, 81);
    write_tensor(T, "tensor_roundtrip.json");
    SymTensor back = read_tensor("tensor_roundtrip.json");
    for (std::size_t i = 0; i < T.size(); ++i) CHECK(back[i] == T[i]);

    write_tensor(T, "tensor_roundtrip2.json", /*sidecar=*/true);
    SymTensor back2 = read_tensor("tensor_roundtrip2.json");
    for (std::size_t i = 0; i < T.size(); ++i) CHECK(back2[i] == T[i]);
}
