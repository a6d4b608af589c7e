#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sosdec/rounding.hpp"
#include "sosdec/synth.hpp"

namespace sosdec {

struct InfeasibleInput : std::runtime_error {
    explicit InfeasibleInput(const std::string& what) : std::runtime_error(what) {}
};
struct SolverIndeterminate : std::runtime_error {
    explicit SolverIndeterminate(const std::string& what) : std::runtime_error(what) {}
};

struct ComponentSet;

// One decomposition problem: constraint system, orthogonalizing lift, and
// the knobs of the iterative solve-round-boost-exclude loop.
struct DecompositionSpec {
    int d = 0;
    int n = 0;
    int D = 0;                 // solver degree, >= (k+2)*deg(P)
    int k = 4;                 // contraction order for rounding (even)
    double eps = 0.05;         // cap slack: cap = (1+eps)/(n-i+1)
    double cap_scale = 0.0;    // if > 0, cap = cap_scale/(n-i+1) instead
    std::vector<PolyConstraint> constraints;
    LiftMap lift = LiftMap::identity(1);
    double exclusion_threshold = 0.01;
    double gate_threshold = 0.99;
    bool add_band = false;     // band 1-band_eps <= ||P(u)||^2 <= 1+band_eps
    double band_eps = 0.05;
    int product_budget = 1;
    int trial_budget = 0;      // 0 -> 50*d*log(d+1), capped at 5000
    int max_gate_attempts = 25;
    double gap_screen = 1.02;
    SolveOptions solver;
    bool sign_symmetric = false; // constraint system invariant under u -> -u
    std::function<Vector(const Vector&)> backmap;      // lifted -> R^d (optional)
    std::function<Vector(const Vector&)> resolve_sign; // sign fix on backmapped (optional)
    // Cheap initial guesses at the components (e.g., tensor power iterates);
    // their mixture moments seed the first solve. Arguments: seed, count.
    std::function<std::vector<Vector>(std::uint64_t, int)> init_points;
    std::function<void(ComponentSet&)> finalize;       // optional post-processing
    std::vector<std::string> warnings;                 // filled by presets
};

struct IterationDiag {
    int iteration = 0;
    double cap = 0.0;
    int cap_retries = 0;
    int trials = 0;
    int gate_attempts = 0;
    double best_gap = 0.0;
    bool found = false;
    int solver_iterations = 0;
};

struct ComponentSet {
    std::vector<Vector> lifted;       // unit vectors b' in R^{d'}
    std::vector<Vector> backmapped;   // recovered vectors in R^d (if backmap given)
    std::vector<IterationDiag> diagnostics;
    bool truncated = false;
    std::vector<PseudoMoments> solver_outputs; // accepted solves, for validation
};

ComponentSet decompose_general(const DecompositionSpec& spec, std::uint64_t seed);

struct GeneralComponentsOptions {
    double c0 = 1.0;       // eta = c0 * sqrt(eps)
    int trial_budget = 0;  // 0 -> default
    double membership_threshold = 2.0 / 3.0;
    SolveOptions solver;
    int cap_retries = 15;
};

// Even-order tensors with general unit components: multi-contraction rounding
// and a direct membership gate <T, a^{(x)2s+2}> >= 2/3.
ComponentSet decompose_general_components(const SymTensor& T, int n, double sigma, double eps,
                                          const GeneralComponentsOptions& opts, std::uint64_t seed);

// Presets -------------------------------------------------------------------

DecompositionSpec preset_orthogonal(const SymTensor& T, double eps);

struct SeparatedOptions {
    bool log_inv_rho = true; // read the order bound with log(1/rho); false uses |log rho|
};
DecompositionSpec preset_separated(const SymTensor& T, double sigma, double rho, double eta,
                                   const SeparatedOptions& opts = {});

DecompositionSpec preset_random3(const SymTensor& T, double eps);

struct FoobiOptions {
    std::optional<int> n;           // supplied component count; checked against the estimate
    double gap_threshold_rel = 0.02; // rank estimate: sigma_i > rel * sigma_1
    std::optional<double> delta;    // noise ratio; default measured
    double ball_radius_sq = 1.0;
    bool strict_rank_check = true;
};
DecompositionSpec preset_foobi(const SymTensor& T, const FoobiOptions& opts = {});

// Rank estimate used by the FOOBI preset (exposed for tests).
int foobi_rank_estimate(const SymTensor& T, double gap_threshold_rel = 0.02);

// Noise estimate for order-3 tensors via greedy spectral deflation.
double estimate_eps_orthogonal(const SymTensor& T, std::uint64_t seed = 7);

} // namespace sosdec
