#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "sosdec/cli.hpp"

namespace {

void add_instance_flags(CLI::App* app, sosdec::ExperimentConfig& cfg) {
    app->add_option("--kind", cfg.kind, "orthonormal|sphere|separated|smoothed");
    app->add_option("--d", cfg.d, "ambient dimension");
    app->add_option("--n", cfg.n, "number of components");
    app->add_option("--k", cfg.k, "tensor order");
    app->add_option("--noise", cfg.noise, "target spectral noise norm");
    app->add_option("--seed", cfg.seed, "master seed");
    app->add_option("--rho", cfg.rho, "separation bound");
    app->add_option("--gamma", cfg.gamma, "smoothing magnitude");
}

void add_method_flags(CLI::App* app, sosdec::ExperimentConfig& cfg) {
    app->add_option("--method", cfg.method,
                    "fast_spectral|sos_orthogonal|sos_random3|sos_separated|sos_foobi|"
                    "sos_general_components");
    app->add_option("--instance", cfg.instance, "instance file prefix to load");
    app->add_option("--eps", cfg.eps, "noise bound used in the constraint system");
    app->add_option("--delta", cfg.delta, "4-tensor noise ratio (default: measured)");
    app->add_option("--sigma", cfg.sigma, "bound on ||sum a_i a_i^T|| (default: measured)");
    app->add_option("--eta", cfg.eta, "separated accuracy parameter");
    app->add_option("--degree", cfg.degree, "solver degree override");
    app->add_option("--trials", cfg.trials, "rounding trial budget");
    app->add_option("--tol", cfg.tol, "solver tolerance");
    app->add_option("--max-iters", cfg.max_iters, "solver iteration cap");
    app->add_option("--cap-slack", cfg.cap_slack, "spectral cap slack factor");
    app->add_option("--out", cfg.out, "results file");
    app->add_option("--meta-out", cfg.meta_out, "meta (timing) file");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"tensor decomposition toolkit"};
    app.require_subcommand(1);

    sosdec::ExperimentConfig cfg;
    std::string config_path, prefix = "instance", moments_path, csv_out;
    int p = 10, q = 10, r = 10, samples = 10000, seeds = 50;
    double noise_delta = 0.0;

    auto* gen = app.add_subcommand("generate", "write a planted instance to disk");
    add_instance_flags(gen, cfg);
    gen->add_option("--out-prefix", prefix, "output file prefix");

    auto* dec = app.add_subcommand("decompose", "run one decomposition method");
    add_instance_flags(dec, cfg);
    add_method_flags(dec, cfg);

    auto* runc = app.add_subcommand("run", "run an experiment from a JSON config");
    runc->add_option("--config", config_path, "config JSON path")->required();
    add_instance_flags(runc, cfg);
    add_method_flags(runc, cfg);

    auto* vm = app.add_subcommand("validate-moments", "validate a moments dump");
    vm->add_option("--moments", moments_path, "moments JSON path")->required();

    auto* bc = app.add_subcommand("bench-concentration", "random-contraction tail bounds");
    bc->add_option("--p", p);
    bc->add_option("--q", q);
    bc->add_option("--r", r);
    bc->add_option("--samples", samples);
    bc->add_option("--seed", cfg.seed);
    bc->add_option("--csv", csv_out);

    auto* bs = app.add_subcommand("bench-smoothed", "smoothed conditioning benchmark");
    bs->add_option("--d", cfg.d)->required();
    bs->add_option("--n", cfg.n)->required();
    bs->add_option("--gamma", cfg.gamma);
    bs->add_option("--seeds", seeds);
    bs->add_option("--noise-delta", noise_delta);
    bs->add_option("--seed", cfg.seed);
    bs->add_option("--csv", csv_out);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return sosdec::cmd_generate(cfg, prefix);
        if (dec->parsed()) return sosdec::run_experiment(cfg);
        if (runc->parsed()) {
            std::ifstream f(config_path);
            if (!f) {
                std::cerr << "config error: cannot open '" << config_path << "'\n";
                return 3;
            }
            std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
            sosdec::ExperimentConfig file_cfg = sosdec::ExperimentConfig::from_json_text(text);
            // Command-line flags override file values.
            auto set = [&](const std::string& name) {
                CLI::Option* opt = runc->get_option_no_throw(name);
                return opt != nullptr && opt->count() > 0;
            };
            if (set("--method")) file_cfg.method = cfg.method;
            if (set("--kind")) file_cfg.kind = cfg.kind;
            if (set("--d")) file_cfg.d = cfg.d;
            if (set("--n")) file_cfg.n = cfg.n;
            if (set("--k")) file_cfg.k = cfg.k;
            if (set("--noise")) file_cfg.noise = cfg.noise;
            if (set("--seed")) file_cfg.seed = cfg.seed;
            if (set("--rho")) file_cfg.rho = cfg.rho;
            if (set("--gamma")) file_cfg.gamma = cfg.gamma;
            if (set("--instance")) file_cfg.instance = cfg.instance;
            if (set("--eps")) file_cfg.eps = cfg.eps;
            if (set("--delta")) file_cfg.delta = cfg.delta;
            if (set("--sigma")) file_cfg.sigma = cfg.sigma;
            if (set("--eta")) file_cfg.eta = cfg.eta;
            if (set("--degree")) file_cfg.degree = cfg.degree;
            if (set("--trials")) file_cfg.trials = cfg.trials;
            if (set("--tol")) file_cfg.tol = cfg.tol;
            if (set("--max-iters")) file_cfg.max_iters = cfg.max_iters;
            if (set("--cap-slack")) file_cfg.cap_slack = cfg.cap_slack;
            if (set("--out")) file_cfg.out = cfg.out;
            if (set("--meta-out")) file_cfg.meta_out = cfg.meta_out;
            return sosdec::run_experiment(file_cfg);
        }
        if (vm->parsed()) return sosdec::cmd_validate_moments(moments_path);
        if (bc->parsed()) return sosdec::cmd_bench_concentration(p, q, r, samples, cfg.seed, csv_out);
        if (bs->parsed())
            return sosdec::cmd_bench_smoothed(cfg.d, cfg.n, cfg.gamma, seeds, noise_delta, cfg.seed,
                                              csv_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
