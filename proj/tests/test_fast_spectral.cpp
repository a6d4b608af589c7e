#include <doctest.h>

#include <chrono>
#include <cmath>

#include "sosdec/fast_spectral.hpp"
#include "sosdec/synth.hpp"

using namespace sosdec;

namespace {

SymTensor orthonormal_tensor(int d, int n, std::uint64_t seed, std::vector<Vector>* out = nullptr) {
    auto comps = gen_components(ComponentKind::orthonormal, d, n, seed);
    SymTensor T(d, 3);
    for (const auto& a : comps) T.add_rank_one(a);
    if (out) *out = comps;
    return T;
}

double min_dist_mod_sign(const Vector& v, const std::vector<Vector>& comps) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vector& a : comps) best = std::min({best, (v - a).norm(), (v + a).norm()});
    return best;
}

} // namespace

TEST_CASE("an exactly aligned contraction gives gate value 1 and the component") {
    std::vector<Vector> comps;
    SymTensor T = orthonormal_tensor(6, 6, 1, &comps);
    Matrix Mg = contract(T, comps[0]);
    Matrix expect = comps[0] * comps[0].transpose();
    CHECK((Mg - expect).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(T.eval_power(comps[0])) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("gate rejects random directions on an orthonormal tensor") {
    SymTensor T = orthonormal_tensor(16, 16, 2);
    Rng rng(3);
    int above = 0;
    for (int t = 0; t < 300; ++t) {
        Vector u(16);
        for (int i = 0; i < 16; ++i) u(i) = rng.next_gaussian();
        u.normalize();
        if (std::abs(T.eval_power(u)) >= 0.9) ++above;
    }
    CHECK(above == 0);
}

TEST_CASE("accepted trials are near components under moderate noise") {
    int d = 32;
    auto comps = gen_components(ComponentKind::orthonormal, d, d, 4);
    PlantedInstance inst = plant(comps, 3, 1.0 / std::log(static_cast<double>(d)),
                                 NoiseModel::gaussian_sym, 5);
    Rng rng(6);
    int accepted = 0;
    for (int t = 0; t < 500; ++t) {
        TrialResult tr = spectral_trial(inst.tensor, rng.next_u64());
        if (!tr.accepted) continue;
        ++accepted;
        CHECK(min_dist_mod_sign(tr.v, comps) <= 0.2);
    }
    CHECK(accepted > 0);
}

TEST_CASE("noisy accepted trials respect the refinement error bound") {
    int d = 64;
    auto comps = gen_components(ComponentKind::orthonormal, d, d, 7);
    PlantedInstance inst = plant(comps, 3, 0.1, NoiseModel::gaussian_sym, 8);
    SymTensor E = inst.tensor;
    for (const auto& a : comps) E.add_rank_one(a, -1.0);
    double inj_lb = injective_norm_lb(E, 6, 60, 9);
    Rng rng(10);
    int accepted = 0;
    for (int t = 0; t < 300 && accepted < 25; ++t) {
        TrialResult tr = spectral_trial(inst.tensor, rng.next_u64());
        if (!tr.accepted) continue;
        ++accepted;
        double err_sq = std::pow(min_dist_mod_sign(tr.v, comps), 2);
        CHECK(err_sq <= std::pow(2.0, -d) + 2.0 * inj_lb);
    }
    CHECK(accepted > 0);
}

TEST_CASE("decompose_fast recovers all components of a noiseless tensor") {
    int d = 32;
    std::vector<Vector> comps;
    SymTensor T = orthonormal_tensor(d, d, 11, &comps);
    int budget = static_cast<int>(std::ceil(64.0 * d * std::log(static_cast<double>(d))));
    FastDecomposition fd = decompose_fast(T, d, budget, 12);
    CHECK(!fd.truncated);
    REQUIRE(static_cast<int>(fd.components.size()) == d);
    MatchedError me = matched_error(comps, fd.components, true);
    CHECK(me.max_error <= 1e-6);
}

TEST_CASE("decompose_fast with n=1 at d=2 lands on a component") {
    std::vector<Vector> comps;
    SymTensor T = orthonormal_tensor(2, 2, 13, &comps);
    FastDecomposition fd = decompose_fast(T, 1, 64, 14);
    REQUIRE(fd.components.size() == 1);
    CHECK(min_dist_mod_sign(fd.components[0], comps) <= 1e-6);
}

TEST_CASE("decompose_fast is deterministic under a fixed seed") {
    SymTensor T = orthonormal_tensor(8, 8, 15);
    FastDecomposition a = decompose_fast(T, 8, 400, 16);
    FastDecomposition b = decompose_fast(T, 8, 400, 16);
    REQUIRE(a.components.size() == b.components.size());
    for (std::size_t i = 0; i < a.components.size(); ++i)
        CHECK(a.components[i] == b.components[i]); // bitwise
}

TEST_CASE("eigengap probe on diagonal and decomposed tensors") {
    // M_g = diag(3,1,1) via T = sum_i c_i e_i^{(x)3}, g chosen accordingly.
    SymTensor T(3, 3);
    for (int i = 0; i < 3; ++i) {
        Vector e = Vector::Zero(3);
        e(i) = 1;
        T.add_rank_one(e);
    }
    Vector g(3);
    g << 3, 1, 1;
    EigengapProbe probe = eigengap_probe(T, g);
    CHECK(probe.lambda1 == doctest::Approx(3.0));
    CHECK(probe.lambda2_abs == doctest::Approx(1.0));
    CHECK(probe.ratio == doctest::Approx(3.0));

    // Orthonormal components: ratio = max|<g,a_i>| / second-max.
    std::vector<Vector> comps;
    SymTensor T2 = orthonormal_tensor(5, 5, 17, &comps);
    Rng rng(18);
    Vector g2(5);
    for (int i = 0; i < 5; ++i) g2(i) = rng.next_gaussian();
    EigengapProbe p2 = eigengap_probe(T2, g2);
    std::vector<double> dots;
    for (const auto& a : comps) dots.push_back(std::abs(g2.dot(a)));
    std::sort(dots.begin(), dots.end(), std::greater<double>());
    CHECK(p2.ratio == doctest::Approx(dots[0] / dots[1]).epsilon(1e-9));
}

TEST_CASE("conditioned eigengap regression fits a small constant") {
    // tau = 0.1 noise; conditioned on a (1+delta/3) gap event the measured
    // ratio obeys ratio >= 1 + delta/3 - 0.5*tau*C with C <= 10.
    int d = 64;
    double tau = 0.1, delta = 0.6;
    auto comps = gen_components(ComponentKind::orthonormal, d, d, 19);
    PlantedInstance inst = plant(comps, 3, tau, NoiseModel::gaussian_sym, 20);
    double t = std::sqrt(2.0 * std::log(static_cast<double>(d)));
    Rng rng(21);
    int events = 0;
    double C = 0.0;
    for (int trial = 0; trial < 40000 && events < 25; ++trial) {
        Vector g(d);
        for (int i = 0; i < d; ++i) g(i) = rng.next_gaussian();
        double g1 = g.dot(comps[0]);
        double rest = 0.0;
        for (int i = 1; i < d; ++i) rest = std::max(rest, std::abs(g.dot(comps[static_cast<std::size_t>(i)])));
        if (g1 < (1.0 + delta / 3.0) * t || rest > t) continue;
        ++events;
        EigengapProbe probe = eigengap_probe(inst.tensor, g);
        double shortfall = (1.0 + delta / 3.0) - probe.ratio;
        C = std::max(C, shortfall / (0.5 * tau));
    }
    CHECK(events >= 10);
    CHECK(C <= 10.0);
}

TEST_CASE("per-trial cost scales modestly as d doubles") {
    // Work model mirrors the trial: one d^3 contraction, power_iters d^2
    // matrix-power steps, one d^3 gate evaluation, and (for accepted trials)
    // the tensor-power refinement at d^3 per step.
    auto work_per_trial = [](int d, int trials) {
        SymTensor T = orthonormal_tensor(d, d, 22 + static_cast<std::uint64_t>(d));
        Rng rng(24);
        double flops = 0.0;
        double wall = 0.0;
        auto t0 = std::chrono::steady_clock::now();
        for (int t = 0; t < trials; ++t) {
            TrialResult tr = spectral_trial(T, rng.next_u64());
            double d3 = static_cast<double>(d) * d * d;
            flops += d3 + tr.power_iters * static_cast<double>(d) * d + d3;
            if (tr.accepted) {
                int refine = static_cast<int>(std::ceil(std::log(std::max(
                                 std::log(static_cast<double>(d)), 1.0)))) + 3;
                flops += refine * d3;
            }
        }
        wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return std::make_pair(flops / trials, wall / trials);
    };
    auto [w32, t32] = work_per_trial(32, 256);
    auto [w64, t64] = work_per_trial(64, 64);
    auto [w128, t128] = work_per_trial(128, 16);
    CHECK(w64 / w32 <= 8.5);
    CHECK(w128 / w64 <= 8.5);
    // Wall-clock smoke bound only: cache-level transitions and machine load
    // make tight wall ratios unreliable, but d^4 behavior would still trip.
    CHECK(t64 / t32 <= 30.0);
    CHECK(t128 / t64 <= 30.0);
}

TEST_CASE("clustering is invariant under trial order") {
    // decompose_fast sorts accepted candidates canonically before clustering,
    // so two budgets covering the same trial set in different orders agree.
    int d = 8;
    std::vector<Vector> comps;
    SymTensor T = orthonormal_tensor(d, d, 24, &comps);
    FastDecomposition a = decompose_fast(T, d, 300, 25);
    // Rebuild the same trials manually in reverse order and re-cluster by the
    // same canonical rule: results must coincide with the library path.
    Rng master(25);
    struct Hit {
        Vector v;
        double gate;
    };
    std::vector<Hit> hits;
    for (int t = 299; t >= 0; --t) {
        TrialResult tr = spectral_trial(T, master.sub("trial", static_cast<std::uint64_t>(t)).next_u64());
        if (tr.accepted) hits.push_back({tr.v, tr.gate_value});
    }
    std::sort(hits.begin(), hits.end(), [](const Hit& x, const Hit& y) {
        if (std::abs(x.gate) != std::abs(y.gate)) return std::abs(x.gate) > std::abs(y.gate);
        for (int i = 0; i < x.v.size(); ++i)
            if (x.v(i) != y.v(i)) return x.v(i) < y.v(i);
        return false;
    });
    std::vector<Vector> kept;
    for (const Hit& h : hits) {
        bool dup = false;
        for (const Vector& k : kept)
            if (std::abs(k.dot(h.v)) >= 0.8) dup = true;
        if (!dup) kept.push_back(h.v);
        if (static_cast<int>(kept.size()) == d) break;
    }
    REQUIRE(kept.size() == a.components.size());
    for (std::size_t i = 0; i < kept.size(); ++i) CHECK(kept[i] == a.components[i]);
}
