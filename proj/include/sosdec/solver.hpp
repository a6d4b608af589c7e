#pragma once

#include <optional>
#include <string>

#include "sosdec/moment_program.hpp"

namespace sosdec {

// Degree-D pseudo-moments: one value per monomial of degree <= D, plus the
// solver residuals they were accepted with.
struct PseudoMoments {
    int d = 0;
    int D = 0;
    std::shared_ptr<const MonomialTable> table;
    Vector values;
    double psd_residual = 0.0;    // max(0, -lambda_min) over all program blocks
    double affine_residual = 0.0; // max |equality violation|
    bool has_norm_constraint = false;
    double ball_radius_sq = 0.0;

    double value(const Monomial& m) const { return values(table->index(m)); }

    std::string dump_json() const;
    static PseudoMoments load_json(const std::string& text);
};

enum class SolveStatus { Feasible, Infeasible, Indeterminate };

struct SolveResult {
    SolveStatus status = SolveStatus::Indeterminate;
    std::optional<PseudoMoments> moments;
    int iterations = 0;
    double final_residual = 0.0;
    std::string message;
};

struct SolveOptions {
    double tol = 1e-7;
    int max_iters = 20000;
    std::uint64_t seed = 0;
    double over_relax = 1.6;
    int plateau_window = 400;           // sweeps over which stalling is judged
    double plateau_factor = 10.0;       // plateau declared only above factor*tol
    double plateau_improvement = 1e-3;  // relative improvement below this = stall
    int min_iters_before_infeasible = 400;
    // Linear-system backend: dense normal equations below this many monomials,
    // projected conjugate gradients above.
    int dense_limit = 3000;
    const Vector* warm_start = nullptr;
};

SolveResult solve(const MomentProgram& prog, const SolveOptions& opts = {});

// Linear evaluation of a polynomial against the moment vector.
double pexpect(const PseudoMoments& pm, const Poly& p);

// E[w(u) u^alpha] for all alpha with deg alpha <= D - deg w, as a vector on
// the full table (entries beyond the budget are zero).
Vector weighted_moments(const PseudoMoments& pm, const Poly& w);

// E[P(u) P(u)^T], optionally weighted by a polynomial w of degree
// <= D - 2 deg P.
Matrix lifted_second_moment(const PseudoMoments& pm, const LiftMap& lift);
Matrix weighted_lifted_second_moment(const PseudoMoments& pm, const LiftMap& lift, const Poly& w);

// Dense moment tensor E[u^{(x)order}].
SymTensor moment_tensor(const PseudoMoments& pm, int order,
                        std::size_t memory_budget = 80'000'000);

struct ChainCheck {
    int p = 0, q = 0;
    double lhs = 0.0, rhs = 0.0;
    bool ok = false;
};

struct ValidationReport {
    double normalization_error = 0.0;
    double moment_matrix_min_eig = 0.0;
    bool norm_constraint_present = false;
    std::vector<ChainCheck> chain;
    bool ok(double norm_tol = 1e-7, double eig_tol = 1e-7) const {
        if (normalization_error > norm_tol) return false;
        if (moment_matrix_min_eig < -eig_tol) return false;
        for (const auto& c : chain)
            if (!c.ok) return false;
        return true;
    }
};

// Normalization, moment-matrix PSD margin, and the operator-norm chain
// ||E u^{(x)p} (u^{(x)q})^T|| <= R^{p+q-2} ||E u u^T|| + 1e-6 for all pairs
// with 2*max(p,q)+2 <= D (requires a norm constraint to have been imposed).
ValidationReport validate(const PseudoMoments& pm);

} // namespace sosdec
