#include <doctest.h>

#include <cmath>

#include "sosdec/conditioning.hpp"
#include "sosdec/synth.hpp"

using namespace sosdec;

TEST_CASE("build_B on an orthonormal pair has column norm sqrt(2)") {
    auto comps = gen_components(ComponentKind::orthonormal, 4, 2, 1);
    Matrix B = build_B(comps);
    CHECK(B.cols() == 2);
    CHECK(B.rows() == 256);
    CHECK(B.col(0).squaredNorm() == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("build_B column count and degenerate columns") {
    auto comps = gen_components(ComponentKind::sphere, 3, 4, 2);
    Matrix B = build_B(comps);
    CHECK(B.cols() == 12); // n(n-1) for n=4

    std::vector<Vector> dup = {comps[0], comps[0]};
    Matrix Bd = build_B(dup);
    CHECK(Bd.col(0).norm() == doctest::Approx(0.0));
}

TEST_CASE("build_B enforces the memory budget") {
    auto comps = gen_components(ComponentKind::sphere, 10, 4, 3);
    CHECK_THROWS_AS(build_B(comps, 1000), std::runtime_error);
}

TEST_CASE("kappa on orthonormal components has unit Q spectrum") {
    auto comps = gen_components(ComponentKind::orthonormal, 5, 4, 4);
    ConditionReport rep = kappa(comps);
    CHECK(rep.sigma_max_Q == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rep.sigma_n_Q == doctest::Approx(1.0).epsilon(1e-12));
    // First term of kappa is exactly 1.
    double second = std::pow(rep.sigma_max_Q, 2.5) /
                    (rep.sigma_min_B * rep.sigma_min_B * std::sqrt(rep.sigma_n_Q));
    CHECK(rep.kappa == doctest::Approx(1.0 + second).epsilon(1e-12));
}

TEST_CASE("kappa flags repeated components as degenerate") {
    auto comps = gen_components(ComponentKind::sphere, 4, 3, 5);
    comps.push_back(comps[0]);
    CHECK_THROWS_AS(kappa(comps), DegenerateInput);
}

TEST_CASE("Gram-path spectra agree with the dense path") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        int d = 5, n = 6;
        auto comps = gen_components(ComponentKind::sphere, d, n, 10 + seed);
        // Dense Q spectrum via the d^2 x n matrix A.
        Matrix A(d * d, n);
        for (int j = 0; j < n; ++j) {
            const Vector& a = comps[static_cast<std::size_t>(j)];
            for (int p = 0; p < d; ++p)
                for (int q = 0; q < d; ++q) A(p * d + q, j) = a(p) * a(q);
        }
        Eigen::BDCSVD<Matrix> svdA(A);
        Matrix B = build_B(comps);
        Eigen::BDCSVD<Matrix> svdB(B);

        ConditionReport rep = kappa(comps);
        CHECK(rep.sigma_max_Q ==
              doctest::Approx(std::pow(svdA.singularValues()(0), 2)).epsilon(1e-9));
        CHECK(rep.sigma_n_Q ==
              doctest::Approx(std::pow(svdA.singularValues()(n - 1), 2)).epsilon(1e-9));
        CHECK(rep.sigma_min_B ==
              doctest::Approx(svdB.singularValues()(svdB.singularValues().size() - 1)).epsilon(1e-9));
    }
}

TEST_CASE("leave-one-out distance on simple matrices") {
    Matrix I = Matrix::Identity(4, 4);
    CHECK(leave_one_out(I) == doctest::Approx(1.0));

    Matrix dup(3, 2);
    dup.col(0) << 1, 0, 0;
    dup.col(1) << 1, 0, 0;
    CHECK(leave_one_out(dup) == doctest::Approx(0.0));
}

TEST_CASE("leave-one-out lower-bounds the least singular value") {
    Rng rng(6);
    for (int rep = 0; rep < 50; ++rep) {
        Matrix M(20, 5);
        for (int i = 0; i < 20; ++i)
            for (int j = 0; j < 5; ++j) M(i, j) = rng.next_gaussian();
        Eigen::BDCSVD<Matrix> svd(M);
        double smin = svd.singularValues()(4);
        double dM = leave_one_out(M);
        CHECK(smin >= dM / std::sqrt(5.0) - 1e-10);
    }
}

TEST_CASE("sin_theta on coincident, orthogonal, and angled subspaces") {
    Matrix S(3, 1), T(3, 1);
    S << 1, 0, 0;
    T << 0, 1, 0;
    CHECK(sin_theta(S, S) == doctest::Approx(0.0));
    CHECK(sin_theta(S, T) == doctest::Approx(1.0));

    for (double theta : {0.2, 0.7, 1.2}) {
        Matrix P(3, 1);
        P << std::cos(theta), std::sin(theta), 0;
        CHECK(sin_theta(S, P) == doctest::Approx(std::sin(theta)).epsilon(1e-12));
        CHECK(sin_theta(P, S) == doctest::Approx(std::sin(theta)).epsilon(1e-12));
    }
}

TEST_CASE("sin_theta validates orthonormality") {
    Matrix bad(3, 2);
    bad << 1, 1, 0, 0, 0, 0;
    Matrix S(3, 1);
    S << 1, 0, 0;
    CHECK_THROWS_AS(sin_theta(bad, S), std::invalid_argument);
}

TEST_CASE("Davis-Kahan bound holds on randomized PSD perturbations") {
    Rng rng(7);
    int checked = 0;
    for (int rep = 0; rep < 100; ++rep) {
        int D = 8, n = 3;
        Matrix X(D, n);
        for (int i = 0; i < D; ++i)
            for (int j = 0; j < n; ++j) X(i, j) = rng.next_gaussian();
        Matrix Q = X * X.transpose();
        Eigen::SelfAdjointEigenSolver<Matrix> esQ(Q);
        double sn = esQ.eigenvalues()(D - n); // n-th largest

        Matrix E(D, D);
        for (int i = 0; i < D; ++i)
            for (int j = 0; j <= i; ++j) {
                E(i, j) = rng.next_gaussian();
                E(j, i) = E(i, j);
            }
        double target = 0.2 * sn;
        E *= target / spectral_norm(E);
        // Best rank-n PSD approximation of the perturbed matrix.
        Eigen::SelfAdjointEigenSolver<Matrix> esP(Matrix(Q + E));
        Matrix Qt = Matrix::Zero(D, D);
        Matrix Vt(D, n);
        int col = 0;
        for (int i = D - 1; i >= D - n; --i) {
            if (esP.eigenvalues()(i) <= 0) continue;
            Qt += esP.eigenvalues()(i) * esP.eigenvectors().col(i) * esP.eigenvectors().col(i).transpose();
            Vt.col(col++) = esP.eigenvectors().col(i);
        }
        if (col != n) continue;
        double delta = spectral_norm(Matrix(Q - Qt)) / sn;
        if (delta > 0.5) continue;
        ++checked;
        Matrix V = esQ.eigenvectors().rightCols(n);
        CHECK(sin_theta(V, Vt) <= delta / (1.0 - delta) + 1e-10);
    }
    CHECK(checked >= 50);
}

TEST_CASE("smoothed trials: degenerate base is recorded, perturbed base is not") {
    auto base = gen_components(ComponentKind::sphere, 6, 3, 8);
    std::vector<Vector> degenerate = base;
    degenerate[1] = degenerate[0];

    SmoothedTrialRecord rec0 = smoothed_trial(degenerate, 0.0, 0.0, 9);
    CHECK(rec0.report.sigma_min_B == doctest::Approx(0.0));

    double min_sigma = std::numeric_limits<double>::infinity();
    for (int s = 0; s < 25; ++s) {
        SmoothedTrialRecord rec = smoothed_trial(degenerate, 0.1, 0.0, 100 + s);
        min_sigma = std::min(min_sigma, rec.report.sigma_min_B);
    }
    CHECK(min_sigma > 0.0);
}

TEST_CASE("smoothed csv rows carry the record fields") {
    auto base = gen_components(ComponentKind::sphere, 5, 3, 11);
    SmoothedTrialRecord rec = smoothed_trial(base, 0.1, 0.0, 12);
    std::string row = smoothed_csv_row(rec);
    CHECK(row.find("12,") == 0);
    CHECK(smoothed_csv_header().find("sigma_min_B") != std::string::npos);
}
