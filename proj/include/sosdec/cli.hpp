#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sosdec/decompose.hpp"

namespace sosdec {

// Flat experiment configuration; JSON serialization is canonical (sorted
// keys), so parse -> dump round-trips byte-identically.
struct ExperimentConfig {
    std::string method = "fast_spectral";
    // instance
    std::string kind = "sphere";
    int d = 0, n = 0, k = 3;
    double noise = 0.0;
    std::uint64_t seed = 0;
    std::string instance; // read instead of generating when nonempty
    // method parameters
    double eps = 0.01;
    double delta = -1.0;  // < 0: measured
    double sigma = -1.0;  // < 0: measured from ground truth
    double rho = 0.5;
    double eta = 0.1;
    double gamma = 0.1;
    int degree = 0;       // 0: preset default
    int trials = 0;       // 0: default budget
    double tol = 1e-7;
    int max_iters = 20000;
    double cap_slack = 0.05;
    // outputs
    std::string out = "results.json";
    std::string meta_out;
    // sweep
    std::string sweep_param;
    std::vector<double> sweep_values;
    std::string sweep_csv;
    int workers = 1;

    static ExperimentConfig from_json_text(const std::string& text);
    std::string to_json_text() const;
    // Returns the offending field name on failure.
    std::optional<std::string> validate() const;
};

// Exit codes: 0 success, 2 method failure (partial recovery, indeterminate
// solver), 3 configuration error.
int run_experiment(const ExperimentConfig& cfg);

int cmd_generate(const ExperimentConfig& cfg, const std::string& prefix);
int cmd_validate_moments(const std::string& moments_path);
int cmd_bench_concentration(int p, int q, int r, int samples, std::uint64_t seed,
                            const std::string& csv_out);
int cmd_bench_smoothed(int d, int n, double gamma, int seeds, double noise_delta,
                       std::uint64_t seed, const std::string& csv_out);

} // namespace sosdec
