#include "sosdec/fast_spectral.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

namespace sosdec {

TrialResult spectral_trial(const SymTensor& T, std::uint64_t seed, const FastSpectralOptions& opts) {
    const int d = T.dim();
    if (T.order() != 3) throw std::invalid_argument("spectral_trial: order-3 tensor required");
    if (d < 2) throw std::invalid_argument("spectral_trial: d >= 2 required");
    Rng rng(seed);

    Vector g(d);
    for (int i = 0; i < d; ++i) g(i) = rng.next_gaussian();
    Matrix Mg = contract(T, g);

    Vector u(d);
    for (int i = 0; i < d; ++i) u(i) = rng.next_gaussian();
    u.normalize();

    TrialResult out;
    double ld = std::log(static_cast<double>(d));
    int matrix_iters = static_cast<int>(std::ceil((ld + 2.0) * (ld + 2.0)));
    for (int it = 0; it < matrix_iters; ++it) {
        Vector w = Mg * u;
        double nw = w.norm();
        if (nw < 1e-300) break;
        u = w / nw;
    }
    out.power_iters = matrix_iters;

    double gate = T.eval_power(u);
    if (std::abs(gate) < opts.gate) {
        out.v = u;
        out.gate_value = gate;
        out.accepted = false;
        return out;
    }

    int refine_iters = static_cast<int>(std::ceil(std::log(std::max(std::log(static_cast<double>(d)), 1.0)))) + 3;
    for (int it = 0; it < refine_iters; ++it) {
        Vector w = T.contract_all_but_first(u);
        double nw = w.norm();
        if (nw < 1e-300) break;
        u = w / nw;
    }
    out.v = u;
    out.gate_value = T.eval_power(u);
    out.accepted = true;
    return out;
}

FastDecomposition decompose_fast(const SymTensor& T, int n, int trial_budget, std::uint64_t seed,
                                 const FastSpectralOptions& opts) {
    if (trial_budget < 1) throw std::invalid_argument("decompose_fast: trial_budget must be >= 1");
    FastDecomposition out;
    Rng master(seed);

    struct Hit {
        Vector v;
        double gate;
    };
    std::vector<Hit> hits;
    for (int t = 0; t < trial_budget; ++t) {
        TrialResult tr = spectral_trial(T, master.sub("trial", static_cast<std::uint64_t>(t)).next_u64(), opts);
        ++out.trials_used;
        if (tr.accepted) {
            ++out.accepted_trials;
            hits.push_back({tr.v, tr.gate_value});
        }
    }

    // Canonical clustering: order by gate value (ties by coordinates), then
    // greedily keep candidates not within the dedup overlap of a kept one.
    // The ordering makes the output invariant to trial order.
    std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
        if (std::abs(a.gate) != std::abs(b.gate)) return std::abs(a.gate) > std::abs(b.gate);
        for (int i = 0; i < a.v.size(); ++i)
            if (a.v(i) != b.v(i)) return a.v(i) < b.v(i);
        return false;
    });
    for (const Hit& h : hits) {
        bool dup = false;
        for (const Vector& kept : out.components)
            if (std::abs(kept.dot(h.v)) >= opts.dedup) {
                dup = true;
                break;
            }
        if (dup) continue;
        out.components.push_back(h.v);
        out.gate_values.push_back(h.gate);
        if (static_cast<int>(out.components.size()) == n) break;
    }
    out.truncated = static_cast<int>(out.components.size()) < n;
    return out;
}

EigengapProbe eigengap_probe(const SymTensor& T, const Vector& g) {
    Matrix Mg = contract(T, g);
    Matrix S = 0.5 * (Mg + Mg.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
    const Vector& ev = es.eigenvalues();
    EigengapProbe probe;
    int best = 0;
    for (int i = 1; i < ev.size(); ++i)
        if (std::abs(ev(i)) > std::abs(ev(best))) best = i;
    probe.lambda1 = ev(best);
    for (int i = 0; i < ev.size(); ++i) {
        if (i == best) continue;
        probe.lambda2_abs = std::max(probe.lambda2_abs, std::abs(ev(i)));
    }
    probe.ratio = std::abs(probe.lambda1) / std::max(probe.lambda2_abs, 1e-300);
    return probe;
}

} // namespace sosdec
