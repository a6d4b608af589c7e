#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sosdec/tensor.hpp"

namespace sosdec {

struct ConditionReport {
    int d = 0, n = 0;
    double sigma_max_Q = 0.0;
    double sigma_n_Q = 0.0;
    double sigma_min_B = 0.0;
    double kappa = 0.0;
    double elapsed_sec = 0.0;
};

struct DegenerateInput : std::runtime_error {
    explicit DegenerateInput(const std::string& what) : std::runtime_error(what) {}
};

// Columns b_{i,j} = a_i^{(x)2} (x) a_j^{(x)2} - (a_i (x) a_j)^{(x)2} for
// i != j in lexicographic (i,j) order; d^4 x n(n-1).
Matrix build_B(const std::vector<Vector>& components,
               std::size_t memory_budget = 100'000'000);

// Condition number from the spectra of Q = AA^T (A columns a_i^{(x)2}) and
// the cross-term matrix B, both computed through Gram matrices.
ConditionReport kappa(const std::vector<Vector>& components);

// Gram matrices used by the kappa computation (exposed for oracle tests).
Matrix gram_Q(const std::vector<Vector>& components);  // n x n, entries <a_i,a_j>^2
Matrix gram_B(const std::vector<Vector>& components);  // n(n-1) x n(n-1)

// Leave-one-out distance d(M) = min_i ||(Id - proj_{-i}) M_i||.
double leave_one_out(const Matrix& M);

// Principal angle gap ||Id_S - Id_T Id_S|| between subspaces given by
// orthonormal basis columns. Symmetric in its arguments.
double sin_theta(const Matrix& S_basis, const Matrix& T_basis);

struct SmoothedTrialRecord {
    std::uint64_t seed = 0;
    double gamma = 0.0;
    ConditionReport report;
    std::optional<double> recovery_error; // filled when the decomposition runs
    std::optional<double> noise_delta;
};

// Perturbs the base components by gamma*N(0, Id/d), reports conditioning,
// and (optionally, via run_pipeline in the caller) records recovery error.
SmoothedTrialRecord smoothed_trial(const std::vector<Vector>& base, double gamma,
                                   double noise_delta, std::uint64_t seed);

std::string smoothed_csv_header();
std::string smoothed_csv_row(const SmoothedTrialRecord& rec);

} // namespace sosdec
