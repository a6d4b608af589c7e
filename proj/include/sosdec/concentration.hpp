#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sosdec/tensor.hpp"

namespace sosdec {

// Empirical verifier for the Gaussian-contraction tail bounds: contracts the
// trailing mode(s) of a random or supplied tensor with Gaussian vectors and
// compares exceedance frequencies against the stated bounds.
//   single mode, Sigma = Id:      P{ ||M_g|| >= t*sigma } <= 2(p+q) e^{-t^2/2}
//   single mode, 0 <= Sigma <= Id: bound 4(p+q) e^{-t^2/2}
//   s modes:                      threshold t^s, bound 4(p+q) rbar^{s-1} e^{-t^2/2}
struct ConcentrationSpec {
    int p = 10, q = 10;
    std::vector<int> r_dims = {10};       // one entry per contracted mode
    double cov_scale = 1.0;               // g ~ N(0, cov_scale * Id), cov_scale <= 1
    bool general_cov_bound = false;       // use the 4(p+q) constant
    std::vector<double> t_grid = {3, 4, 5};
    int samples = 10000;
    std::uint64_t seed = 0;
    std::optional<std::vector<double>> fixed_tensor; // row-major p*q*prod(r); else random
};

struct ConcentrationRow {
    double t = 0.0;
    double threshold = 0.0;   // t^s * sigma
    double empirical = 0.0;
    double bound = 0.0;
    double slack_bound = 0.0; // bound * (1 + 3/sqrt(samples))
    bool pass = false;
};

struct ConcentrationTable {
    std::vector<ConcentrationRow> rows;
    double sigma = 0.0; // max relevant unfolding norm of the base tensor
    bool pass = true;
    std::string to_string() const;
    std::string to_csv() const;
};

ConcentrationTable concentration_harness(const ConcentrationSpec& spec);

} // namespace sosdec
