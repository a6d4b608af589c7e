#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sosdec/tensor.hpp"

namespace sosdec {

enum class ComponentKind { orthonormal, sphere, separated, smoothed };

struct GenOptions {
    double rho = 0.5;                    // separated: max pairwise |<a_i,a_j>|
    double gamma = 0.1;                  // smoothed: perturbation magnitude
    std::vector<Vector> base;            // smoothed: base vectors (defaults to sphere draws)
    int max_rejections = 10000;
};

std::vector<Vector> gen_components(ComponentKind kind, int d, int n, std::uint64_t seed,
                                   const GenOptions& opts = {});

enum class NoiseModel { gaussian_sym, spiked };

struct PlantedInstance {
    std::vector<Vector> components;
    SymTensor tensor;
    double noise_target = 0.0;
    NoiseModel noise_model = NoiseModel::gaussian_sym;
    std::uint64_t noise_seed = 0;
    double noise_achieved = 0.0; // measured balanced unfolding norm of E
};

// T = sum_i a_i^{(x)k} + E with E scaled so its balanced unfolding spectral
// norm matches noise_target.
PlantedInstance plant(const std::vector<Vector>& components, int k, double noise_target,
                      NoiseModel model, std::uint64_t seed,
                      std::size_t memory_budget = SymTensor::kDefaultBudget);

// Instance files: tensor file plus a JSON ground-truth sidecar.
void write_instance(const PlantedInstance& inst, const std::string& prefix);
PlantedInstance read_instance(const std::string& prefix,
                              std::size_t memory_budget = SymTensor::kDefaultBudget);

double hausdorff(const std::vector<Vector>& X, const std::vector<Vector>& Y, bool mod_sign);

struct MatchedError {
    std::vector<int> permutation;   // truth index -> recovered index, -1 = missing
    std::vector<double> errors;     // relative error per matched truth component
    std::vector<int> missing;       // truth indices with no match
    double max_error = 0.0;         // max over matched pairs
};

// Min-max optimal assignment of recovered to truth on the (sign-resolved)
// relative-error matrix; |recovered| <= |truth| required.
MatchedError matched_error(const std::vector<Vector>& truth, const std::vector<Vector>& recovered,
                           bool mod_sign);

} // namespace sosdec
