#include <doctest.h>

#include <cmath>

#include "sosdec/decompose.hpp"

using namespace sosdec;

namespace {

SymTensor rank_decomposition(const std::vector<Vector>& comps, int k) {
    SymTensor T(static_cast<int>(comps[0].size()), k);
    for (const auto& a : comps) T.add_rank_one(a);
    return T;
}

} // namespace

TEST_CASE("decompose_general recovers a noiseless orthonormal basis") {
    int d = 3;
    auto comps = gen_components(ComponentKind::orthonormal, d, d, 1);
    SymTensor T = rank_decomposition(comps, 3);
    DecompositionSpec spec = preset_orthogonal(T, 0.0);
    spec.n = d;
    ComponentSet cs = decompose_general(spec, 7);
    REQUIRE(static_cast<int>(cs.backmapped.size()) == d);
    CHECK(hausdorff(comps, cs.backmapped, false) <= 1e-3);
    CHECK(!cs.truncated);
    // Distinctness of the lifted outputs.
    for (std::size_t i = 0; i < cs.lifted.size(); ++i)
        for (std::size_t j = i + 1; j < cs.lifted.size(); ++j)
            CHECK(std::pow(cs.lifted[i].dot(cs.lifted[j]), 2) <= 0.02);
}

TEST_CASE("decompose_general with n=1 finds the single near-atomic solution") {
    int d = 4;
    Rng rng(3);
    Vector a(d);
    for (int i = 0; i < d; ++i) a(i) = rng.next_gaussian();
    a.normalize();
    Poly ip = Poly::linear_form(a);
    DecompositionSpec spec;
    spec.d = d;
    spec.n = 1;
    spec.D = 6;
    spec.k = 4;
    spec.lift = LiftMap::identity(d);
    spec.constraints.push_back({Poly::norm_sq(d) - Poly::constant(d, 1.0),
                                PolyConstraint::Kind::eq_zero, "unit-sphere"});
    spec.constraints.push_back({ip * ip * ip - Poly::constant(d, 1.0 - 0.01),
                                PolyConstraint::Kind::geq_zero, "align"});
    spec.backmap = [](const Vector& b) { return b; };
    ComponentSet cs = decompose_general(spec, 5);
    REQUIRE(cs.backmapped.size() == 1);
    CHECK(std::abs(cs.backmapped[0].dot(a)) >= 1.0 - 0.02);
}

TEST_CASE("decompose_general is deterministic under a fixed seed") {
    int d = 3;
    auto comps = gen_components(ComponentKind::orthonormal, d, d, 5);
    SymTensor T = rank_decomposition(comps, 3);
    DecompositionSpec spec = preset_orthogonal(T, 0.0);
    spec.n = d;
    ComponentSet a = decompose_general(spec, 11);
    ComponentSet b = decompose_general(spec, 11);
    REQUIRE(a.backmapped.size() == b.backmapped.size());
    for (std::size_t i = 0; i < a.backmapped.size(); ++i)
        CHECK(a.backmapped[i] == b.backmapped[i]); // bitwise
}

TEST_CASE("permutation and sign of the input components do not change the output set") {
    int d = 3;
    auto comps = gen_components(ComponentKind::orthonormal, d, d, 6);
    SymTensor T1 = rank_decomposition(comps, 4);
    std::vector<Vector> shuffled = {Vector(-comps[2]), comps[0], Vector(-comps[1])};
    SymTensor T2 = rank_decomposition(shuffled, 4);
    // Even order: sign flips leave the tensor unchanged entry-wise, so both
    // runs see identical inputs and the recovered sets must agree.
    DecompositionSpec s1 = preset_separated(T1, 1.0, 0.1, 0.05);
    s1.n = d;
    DecompositionSpec s2 = preset_separated(T2, 1.0, 0.1, 0.05);
    s2.n = d;
    ComponentSet c1 = decompose_general(s1, 13);
    ComponentSet c2 = decompose_general(s2, 13);
    REQUIRE(c1.backmapped.size() == c2.backmapped.size());
    CHECK(hausdorff(c1.backmapped, c2.backmapped, true) <= 1e-9);
}

TEST_CASE("cap feasibility witness: uniform mixture over the remaining components") {
    // Mid-loop program: exclusion on a found component plus the cap; the
    // uniform mixture over the remaining true components must satisfy it.
    int d = 4, n = 4;
    auto comps = gen_components(ComponentKind::orthonormal, d, n, 7);
    SymTensor T = rank_decomposition(comps, 3);
    double eps = 0.01;
    std::vector<PolyConstraint> active = {
        {Poly::norm_sq(d) - Poly::constant(d, 1.0), PolyConstraint::Kind::eq_zero, "unit-sphere"},
        {Poly::from_tensor_form(T) - Poly::constant(d, 1.0 - eps),
         PolyConstraint::Kind::geq_zero, "tensor-value"}};
    Poly excl = Poly::linear_form(comps[0]);
    active.push_back({Poly::constant(d, 0.01) - excl * excl, PolyConstraint::Kind::geq_zero,
                      "exclude1"});
    LiftMap id = LiftMap::identity(d);
    MomentProgram prog = compile(active, d, 6, &id, (1.0 + 0.05) / (n - 1), 2);
    std::vector<Vector> rest(comps.begin() + 1, comps.end());
    std::vector<double> w(rest.size(), 1.0 / rest.size());
    Vector y = moments_of_mixture(*prog.table, rest, w);
    WitnessReport rep = check_witness(prog, y);
    CHECK(rep.max_eq_violation <= 1e-10);
    CHECK(rep.min_block_eig >= -1e-10);
}

TEST_CASE("preset_orthogonal validates inputs and resolves signs") {
    auto comps = gen_components(ComponentKind::orthonormal, 3, 3, 8);
    SymTensor T = rank_decomposition(comps, 3);
    CHECK_THROWS_AS(preset_orthogonal(T, 1.0), std::invalid_argument);

    DecompositionSpec spec = preset_orthogonal(T, 0.01);
    Vector flipped = -comps[0];
    Vector fixed = spec.resolve_sign(flipped);
    CHECK((fixed - comps[0]).norm() <= 1e-12);
}

TEST_CASE("orthogonal noiseless recovery at d=6 reaches 1e-3") {
    int d = 6;
    auto comps = gen_components(ComponentKind::orthonormal, d, d, 9);
    SymTensor T = rank_decomposition(comps, 3);
    DecompositionSpec spec = preset_orthogonal(T, 0.0);
    spec.n = d;
    ComponentSet cs = decompose_general(spec, 17);
    REQUIRE(static_cast<int>(cs.backmapped.size()) == d);
    MatchedError me = matched_error(comps, cs.backmapped, false);
    CHECK(me.max_error <= 1e-3);
}

TEST_CASE("separated preset: spectral norm bound of lifted outer products") {
    // || sum (a_i^{(x)2})(a_i^{(x)2})^T || <= 1 + max|<a_i,a_j>| * ||sum a_i a_i^T||.
    int d = 20, n = 30;
    auto comps = gen_components(ComponentKind::sphere, d, n, 10);
    Matrix A2(d * d, n);
    Matrix A1 = Matrix::Zero(d, d);
    double rho = 0.0;
    for (int i = 0; i < n; ++i) {
        const Vector& a = comps[static_cast<std::size_t>(i)];
        for (int p = 0; p < d; ++p)
            for (int q = 0; q < d; ++q) A2(p * d + q, i) = a(p) * a(q);
        A1 += a * a.transpose();
        for (int j = 0; j < i; ++j)
            rho = std::max(rho, std::abs(a.dot(comps[static_cast<std::size_t>(j)])));
    }
    double lhs = spectral_norm(Matrix(A2 * A2.transpose()));
    double rhs = 1.0 + rho * spectral_norm(A1);
    CHECK(lhs <= rhs + 1e-9);
}

TEST_CASE("separated preset: rank-one extraction and order-bound warning") {
    int d = 4;
    Rng rng(11);
    Vector a(d);
    for (int i = 0; i < d; ++i) a(i) = rng.next_gaussian();
    a.normalize();
    SymTensor T8(d, 8);
    T8.add_rank_one(a);
    DecompositionSpec spec = preset_separated(T8, 1.0, 0.5, 0.05);
    // p = 2 lift; backmap of b = a^{(x)2} must return +-a exactly.
    Vector b(d * d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) b(static_cast<Eigen::Index>(i) * d + j) = a(i) * a(j);
    Vector back = spec.backmap(b);
    CHECK(std::min((back - a).norm(), (back + a).norm()) <= 1e-12);

    // rho=0.9 at sigma=4, eta=0.01 needs a far higher order: warning expected.
    DecompositionSpec tight = preset_separated(T8, 4.0, 0.9, 0.01);
    CHECK(!tight.warnings.empty());
    CHECK_THROWS_AS(preset_separated(T8, 1.0, 1.5, 0.05), std::invalid_argument);
}

TEST_CASE("separated recovery on near-orthonormal components at k=4") {
    int d = 5, n = 5;
    auto comps = gen_components(ComponentKind::orthonormal, d, n, 12);
    SymTensor T = rank_decomposition(comps, 4);
    DecompositionSpec spec = preset_separated(T, 1.0, 0.1, 0.05);
    spec.n = n;
    ComponentSet cs = decompose_general(spec, 19);
    REQUIRE(static_cast<int>(cs.backmapped.size()) == n);
    MatchedError me = matched_error(comps, cs.backmapped, true);
    CHECK(me.max_error <= 0.1);
}

TEST_CASE("random3 preset: lifted component norms and spectral bound") {
    // ||Id_sym' a^{(x)2}||^2 = 1 - 1/d for unit a.
    int d = 16, n = 24;
    auto comps = gen_components(ComponentKind::sphere, d, n, 16);
    LiftMap lift = LiftMap::sym_square_minus_phi(d);
    Matrix C(d * d, n);
    for (int i = 0; i < n; ++i) {
        Vector c = lift.apply(comps[static_cast<std::size_t>(i)]);
        CHECK(c.squaredNorm() == doctest::Approx(1.0 - 1.0 / d).epsilon(1e-12));
        C.col(i) = c;
    }
    CHECK(spectral_norm(Matrix(C * C.transpose())) <= 1.8);
}

TEST_CASE("foobi preset: rank estimate, noise feasibility, degenerate flagging") {
    int d = 5, n = 6;
    auto comps = gen_components(ComponentKind::sphere, d, n, 14);
    SymTensor T = rank_decomposition(comps, 4);
    CHECK(foobi_rank_estimate(T) == n);

    // Degenerate: a repeated component collapses the rank estimate.
    std::vector<Vector> dup = comps;
    dup[1] = dup[0];
    SymTensor Tdup = rank_decomposition(dup, 4);
    CHECK(foobi_rank_estimate(Tdup) == n - 1);
    FoobiOptions opts;
    opts.n = n;
    CHECK_THROWS_AS(preset_foobi(Tdup, opts), std::invalid_argument);

    // Component feasibility under calibrated noise: the compiled subspace
    // constraint evaluates nonnegatively at every true component.
    Unfolding U = unfold(T, {0, 1});
    Eigen::SelfAdjointEigenSolver<Matrix> es(Matrix(0.5 * (U.matrix + U.matrix.transpose())));
    Vector abs_ev = es.eigenvalues().cwiseAbs();
    std::vector<double> sv(abs_ev.data(), abs_ev.data() + abs_ev.size());
    std::sort(sv.begin(), sv.end(), std::greater<double>());
    double sigma_n = sv[static_cast<std::size_t>(n - 1)];
    double delta = 0.01;
    PlantedInstance withE = plant(comps, 4, delta * sigma_n, NoiseModel::gaussian_sym, 16);
    FoobiOptions fopts;
    fopts.n = n;
    DecompositionSpec spec = preset_foobi(withE.tensor, fopts);
    for (const Vector& a : comps) {
        double lhs = spec.constraints[0].poly.eval(a);
        CHECK(lhs >= -1e-9);
    }
}

TEST_CASE("foobi noiseless recovery at d=4 n=5") {
    int d = 4, n = 5;
    auto comps = gen_components(ComponentKind::sphere, d, n, 202);
    SymTensor T = rank_decomposition(comps, 4);
    FoobiOptions fo;
    fo.n = n;
    DecompositionSpec spec = preset_foobi(T, fo);
    ComponentSet cs = decompose_general(spec, 7);
    REQUIRE(static_cast<int>(cs.backmapped.size()) == n);
    MatchedError me = matched_error(comps, cs.backmapped, true);
    CHECK(me.max_error <= 5e-3);
}

TEST_CASE("general components loop on an orthonormal 6-tensor") {
    int d = 5, n = 4;
    auto comps = gen_components(ComponentKind::orthonormal, d, n, 203);
    SymTensor T = rank_decomposition(comps, 6);
    Matrix S = Matrix::Zero(d, d);
    for (const auto& a : comps) S += a * a.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
    GeneralComponentsOptions opts;
    ComponentSet cs = decompose_general_components(T, n, es.eigenvalues().maxCoeff(), 0.01, opts, 7);
    REQUIRE(static_cast<int>(cs.backmapped.size()) == n);
    MatchedError me = matched_error(comps, cs.backmapped, true);
    CHECK(me.max_error <= 0.1);
    // Membership gate holds for every output.
    for (const Vector& a : cs.backmapped) CHECK(T.eval_power(a) >= 2.0 / 3.0);
}

TEST_CASE("membership values: exact component accepted, random directions rejected") {
    int d = 5, n = 4;
    auto comps = gen_components(ComponentKind::orthonormal, d, n, 21);
    SymTensor T = rank_decomposition(comps, 6);
    CHECK(T.eval_power(comps[0]) == doctest::Approx(1.0).epsilon(1e-12));
    // Random unit directions clear the gate only with small probability at
    // this dimension (the event needs |<a_i,v>| >= (2/3)^{1/6} ~ 0.93).
    Rng rng(22);
    int above = 0;
    for (int t = 0; t < 500; ++t) {
        Vector v(d);
        for (int i = 0; i < d; ++i) v(i) = rng.next_gaussian();
        v.normalize();
        if (T.eval_power(v) >= 2.0 / 3.0) ++above;
    }
    CHECK(above <= 25); // <= 5% of draws
}

TEST_CASE("exclusion effectiveness across iterations") {
    int d = 4;
    auto comps = gen_components(ComponentKind::orthonormal, d, d, 23);
    SymTensor T = rank_decomposition(comps, 3);
    DecompositionSpec spec = preset_orthogonal(T, 0.0);
    spec.n = d;
    ComponentSet cs = decompose_general(spec, 29);
    REQUIRE(cs.lifted.size() >= 2);
    for (std::size_t i = 0; i < cs.lifted.size(); ++i)
        for (std::size_t j = i + 1; j < cs.lifted.size(); ++j)
            CHECK(std::pow(cs.lifted[i].dot(cs.lifted[j]), 2) <= 0.02);
}

TEST_CASE("estimate_eps_orthogonal tracks planted noise") {
    int d = 8;
    auto comps = gen_components(ComponentKind::orthonormal, d, d, 24);
    PlantedInstance clean = plant(comps, 3, 0.0, NoiseModel::gaussian_sym, 25);
    CHECK(estimate_eps_orthogonal(clean.tensor) <= 1e-6);
    PlantedInstance noisy = plant(comps, 3, 0.1, NoiseModel::gaussian_sym, 26);
    double est = estimate_eps_orthogonal(noisy.tensor);
    CHECK(est >= 0.05);
    CHECK(est <= 0.2);
}
