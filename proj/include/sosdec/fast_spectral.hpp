#pragma once

#include <vector>

#include "sosdec/tensor.hpp"

namespace sosdec {

struct TrialResult {
    Vector v;              // unit candidate
    double gate_value = 0.0; // <v^{(x)3}, T>
    int power_iters = 0;
    bool accepted = false;
};

struct FastSpectralOptions {
    double gate = 0.9;
    double dedup = 0.8;
};

// One randomized trial: Gaussian contraction, matrix power method, gate on
// |<u^{(x)3},T>|, tensor-power refinement of accepted candidates.
TrialResult spectral_trial(const SymTensor& T, std::uint64_t seed,
                           const FastSpectralOptions& opts = {});

struct FastDecomposition {
    std::vector<Vector> components;
    std::vector<double> gate_values;
    int trials_used = 0;
    int accepted_trials = 0;
    bool truncated = false; // budget exhausted before n components found
};

// Runs trials, clusters accepted candidates by |<v_i,v_j>| >= dedup keeping
// the best gate value per cluster, returns up to n components.
FastDecomposition decompose_fast(const SymTensor& T, int n, int trial_budget, std::uint64_t seed,
                                 const FastSpectralOptions& opts = {});

struct EigengapProbe {
    double lambda1 = 0.0;     // top eigenvalue by magnitude (signed)
    double lambda2_abs = 0.0; // second largest absolute eigenvalue
    double ratio = 0.0;
};

EigengapProbe eigengap_probe(const SymTensor& T, const Vector& g);

} // namespace sosdec
