#pragma once

#include <optional>

#include "sosdec/rng.hpp"
#include "sosdec/solver.hpp"

namespace sosdec {

// Candidate direction extracted from a contracted moment matrix.
struct Candidate {
    Vector b;          // unit vector in R^{d'}
    double gap_ratio;  // |lambda_1| / max(|lambda_2|, tiny)
    int trial = -1;
    bool accepted = false;
};

// Top eigenvector (by magnitude) of a symmetric matrix, with gap ratio.
// Full eigendecomposition for dim <= 600, else power iteration (3 restarts).
Candidate top_direction(const Matrix& M);

// Top eigenvector of E[<g, P(u)^{(x)k}> P(u)P(u)^T] for Gaussian g over
// lifted coordinates; k even, (k+2)*deg(P) <= D.
Candidate jennrich_round(const PseudoMoments& pm, const LiftMap& lift, int k, const Vector& g);

// Precomputed tables for running many trials against one pseudo-moment
// vector; round(g) is equivalent to jennrich_round but amortizes setup.
class JennrichRounder {
public:
    JennrichRounder(const PseudoMoments& pm, const LiftMap& lift, int k);
    Candidate round(const Vector& g) const;
    int contraction_dim() const { return g_dim_; }

private:
    const PseudoMoments* pm_;
    const LiftMap* lift_ptr_ = nullptr;
    LiftMap lift_;
    int k_;
    int g_dim_;
    int dense_lo_ = 0, dense_n_ = 0;   // monomials of degree exactly k*l
    int pair_lo_ = 0, pair_n_ = 0;     // monomials of degree exactly 2*l
    std::vector<std::vector<std::pair<int, double>>> g_expansions_; // per g index, dense w coords
    std::vector<int> sum_index_;       // [w_mono * pair_n + pair_mono] -> table index
    std::vector<std::vector<std::pair<int, double>>> pair_expansions_; // per (r<=c) pair
    std::vector<std::pair<int, int>> pairs_;
};

// Top eigenvector of E[<g_1,u^{(x)2}> ... <g_s,u^{(x)2}> u u^T]; needs
// 2s+2 <= D.
Candidate multi_round(const PseudoMoments& pm, const std::vector<Vector>& gs);

struct BoostOptions {
    double gate = 0.99;          // threshold for <b*, P(u)>^2 >= gate * ||P(u)||^2
    double band = 0.05;          // 1-band <= ||P(u)||^2 <= 1+band (skipped if norm implied)
    bool add_band = true;
    SolveOptions solver;
    // Optional points in R^d whose uniform-mixture moments seed the solver; a
    // good candidate makes the gate solve nearly instant. Sign-symmetric
    // systems should pass both signs of the candidate.
    std::vector<Vector> warm_points;
};

struct BoostResult {
    enum class Status { Accepted, Rejected, Indeterminate };
    Status status = Status::Indeterminate;
    Vector v;   // boosted direction in lifted coordinates (when accepted)
    std::optional<PseudoMoments> moments;
    std::string message;
};

// Re-solves the constraint system plus the acceptance-gate constraint at
// degree 4*deg(P); on feasibility returns the top eigenvector of E[PP^T].
BoostResult boost(const std::vector<PolyConstraint>& constraints, const LiftMap& lift,
                  const Vector& b_star, int d, const BoostOptions& opts = {});

} // namespace sosdec
