#include "sosdec/cli.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "sosdec/concentration.hpp"
#include "sosdec/conditioning.hpp"
#include "sosdec/fast_spectral.hpp"

namespace sosdec {

namespace {

using nlohmann::json;

json config_to_json(const ExperimentConfig& c) {
    json j;
    j["method"] = c.method;
    j["kind"] = c.kind;
    j["d"] = c.d;
    j["n"] = c.n;
    j["k"] = c.k;
    j["noise"] = c.noise;
    j["seed"] = c.seed;
    j["instance"] = c.instance;
    j["eps"] = c.eps;
    j["delta"] = c.delta;
    j["sigma"] = c.sigma;
    j["rho"] = c.rho;
    j["eta"] = c.eta;
    j["gamma"] = c.gamma;
    j["degree"] = c.degree;
    j["trials"] = c.trials;
    j["tol"] = c.tol;
    j["max_iters"] = c.max_iters;
    j["cap_slack"] = c.cap_slack;
    j["out"] = c.out;
    j["meta_out"] = c.meta_out;
    j["sweep_param"] = c.sweep_param;
    j["sweep_values"] = c.sweep_values;
    j["sweep_csv"] = c.sweep_csv;
    j["workers"] = c.workers;
    return j;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    f << text;
}

struct CellResult {
    double value = 0.0;
    int exit_code = 0;
    double max_error = std::numeric_limits<double>::quiet_NaN();
    double hausdorff_dist = std::numeric_limits<double>::quiet_NaN();
    int trials = 0;
    bool truncated = false;
};

struct RunOutput {
    json results;
    double elapsed = 0.0;
    int exit_code = 0;
    double max_error = std::numeric_limits<double>::quiet_NaN();
    double hausdorff_dist = std::numeric_limits<double>::quiet_NaN();
    bool truncated = false;
};

double measured_sigma(const std::vector<Vector>& comps, int d) {
    Matrix S = Matrix::Zero(d, d);
    for (const Vector& a : comps) S += a * a.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

PlantedInstance make_instance(const ExperimentConfig& cfg) {
    if (!cfg.instance.empty()) return read_instance(cfg.instance);
    ComponentKind kind;
    if (cfg.kind == "orthonormal") kind = ComponentKind::orthonormal;
    else if (cfg.kind == "sphere") kind = ComponentKind::sphere;
    else if (cfg.kind == "separated") kind = ComponentKind::separated;
    else if (cfg.kind == "smoothed") kind = ComponentKind::smoothed;
    else throw std::invalid_argument("kind");
    GenOptions gopts;
    gopts.rho = cfg.rho;
    gopts.gamma = cfg.gamma;
    auto comps = gen_components(kind, cfg.d, cfg.n, cfg.seed, gopts);
    return plant(comps, cfg.k, cfg.noise, NoiseModel::gaussian_sym, cfg.seed + 1);
}

RunOutput run_single(const ExperimentConfig& cfg) {
    RunOutput out;
    auto t0 = std::chrono::steady_clock::now();
    PlantedInstance inst = make_instance(cfg);
    const SymTensor& T = inst.tensor;
    const int d = T.dim();

    std::vector<Vector> recovered;
    bool mod_sign = false;
    bool truncated = false;
    json diagnostics = json::array();

    auto spec_common = [&](DecompositionSpec& spec) {
        spec.n = cfg.n > 0 ? cfg.n : spec.n;
        spec.eps = cfg.cap_slack;
        if (cfg.degree > 0) spec.D = cfg.degree;
        if (cfg.trials > 0) spec.trial_budget = cfg.trials;
        spec.solver.tol = cfg.tol;
        spec.solver.max_iters = cfg.max_iters;
    };
    auto record_diags = [&](const ComponentSet& cs) {
        for (const auto& g : cs.diagnostics) {
            json j;
            j["iteration"] = g.iteration;
            j["cap"] = g.cap;
            j["cap_retries"] = g.cap_retries;
            j["trials"] = g.trials;
            j["gate_attempts"] = g.gate_attempts;
            j["best_gap"] = g.best_gap;
            j["found"] = g.found;
            j["solver_iterations"] = g.solver_iterations;
            diagnostics.push_back(j);
        }
    };

    try {
        if (cfg.method == "fast_spectral") {
            int budget = cfg.trials > 0
                             ? cfg.trials
                             : static_cast<int>(std::ceil(64.0 * d * std::log(static_cast<double>(d))));
            FastDecomposition fd = decompose_fast(T, cfg.n, budget, cfg.seed);
            recovered = fd.components;
            truncated = fd.truncated;
            json j;
            j["trials_used"] = fd.trials_used;
            j["accepted_trials"] = fd.accepted_trials;
            diagnostics.push_back(j);
        } else if (cfg.method == "sos_orthogonal") {
            DecompositionSpec spec = preset_orthogonal(T, cfg.eps);
            spec_common(spec);
            ComponentSet cs = decompose_general(spec, cfg.seed);
            recovered = cs.backmapped;
            truncated = cs.truncated;
            record_diags(cs);
        } else if (cfg.method == "sos_random3") {
            DecompositionSpec spec = preset_random3(T, cfg.eps);
            spec_common(spec);
            ComponentSet cs = decompose_general(spec, cfg.seed);
            recovered = cs.backmapped;
            truncated = cs.truncated;
            record_diags(cs);
        } else if (cfg.method == "sos_separated") {
            double sigma = cfg.sigma > 0 ? cfg.sigma : measured_sigma(inst.components, d);
            double rho = cfg.rho;
            DecompositionSpec spec = preset_separated(T, sigma, rho, cfg.eta);
            spec_common(spec);
            ComponentSet cs = decompose_general(spec, cfg.seed);
            recovered = cs.backmapped;
            truncated = cs.truncated;
            record_diags(cs);
            mod_sign = T.order() % 2 == 0;
        } else if (cfg.method == "sos_foobi") {
            FoobiOptions fopts;
            fopts.n = cfg.n;
            if (cfg.delta >= 0) fopts.delta = cfg.delta;
            DecompositionSpec spec = preset_foobi(T, fopts);
            spec_common(spec);
            ComponentSet cs = decompose_general(spec, cfg.seed);
            recovered = cs.backmapped;
            truncated = cs.truncated;
            record_diags(cs);
            mod_sign = true;
        } else if (cfg.method == "sos_general_components") {
            double sigma = cfg.sigma > 0 ? cfg.sigma : measured_sigma(inst.components, d);
            GeneralComponentsOptions gopts;
            gopts.solver.tol = cfg.tol;
            gopts.solver.max_iters = cfg.max_iters;
            if (cfg.trials > 0) gopts.trial_budget = cfg.trials;
            ComponentSet cs = decompose_general_components(T, cfg.n, sigma, cfg.eps, gopts, cfg.seed);
            recovered = cs.backmapped;
            truncated = cs.truncated;
            record_diags(cs);
            mod_sign = true;
        } else {
            throw std::invalid_argument("method");
        }
    } catch (const SolverIndeterminate& e) {
        out.exit_code = 2;
        out.results["error"] = e.what();
    } catch (const InfeasibleInput& e) {
        out.exit_code = 2;
        out.results["error"] = e.what();
    }

    json res = out.results;
    res["config"] = config_to_json(cfg);
    res["instance"] = {{"d", d},
                       {"k", T.order()},
                       {"n", static_cast<int>(inst.components.size())},
                       {"noise_target", inst.noise_target},
                       {"noise_achieved", inst.noise_achieved}};
    json comps = json::array();
    for (const Vector& v : recovered) {
        json row = json::array();
        for (int i = 0; i < v.size(); ++i) row.push_back(v(i));
        comps.push_back(row);
    }
    res["components"] = comps;
    res["truncated"] = truncated;
    res["diagnostics"] = diagnostics;

    if (!inst.components.empty() && !recovered.empty()) {
        MatchedError me = matched_error(inst.components, recovered, mod_sign);
        json errs = json::array();
        for (double e : me.errors) errs.push_back(e);
        res["matched"] = {{"max_error", me.max_error},
                          {"errors", errs},
                          {"permutation", me.permutation},
                          {"missing", me.missing}};
        double h = hausdorff(inst.components, recovered, mod_sign);
        res["hausdorff"] = h;
        res["hausdorff_sq"] = h * h;
        out.max_error = me.max_error;
        out.hausdorff_dist = h;
        if (!me.missing.empty()) truncated = true;
    }
    out.truncated = truncated;
    if (out.exit_code == 0 && truncated) out.exit_code = 2;
    res["exit_code"] = out.exit_code;
    out.results = res;
    out.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

} // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    json j = json::parse(text);
    ExperimentConfig c;
    c.method = j.value("method", c.method);
    c.kind = j.value("kind", c.kind);
    c.d = j.value("d", c.d);
    c.n = j.value("n", c.n);
    c.k = j.value("k", c.k);
    c.noise = j.value("noise", c.noise);
    c.seed = j.value("seed", c.seed);
    c.instance = j.value("instance", c.instance);
    c.eps = j.value("eps", c.eps);
    c.delta = j.value("delta", c.delta);
    c.sigma = j.value("sigma", c.sigma);
    c.rho = j.value("rho", c.rho);
    c.eta = j.value("eta", c.eta);
    c.gamma = j.value("gamma", c.gamma);
    c.degree = j.value("degree", c.degree);
    c.trials = j.value("trials", c.trials);
    c.tol = j.value("tol", c.tol);
    c.max_iters = j.value("max_iters", c.max_iters);
    c.cap_slack = j.value("cap_slack", c.cap_slack);
    c.out = j.value("out", c.out);
    c.meta_out = j.value("meta_out", c.meta_out);
    c.sweep_param = j.value("sweep_param", c.sweep_param);
    if (j.contains("sweep_values")) c.sweep_values = j["sweep_values"].get<std::vector<double>>();
    c.sweep_csv = j.value("sweep_csv", c.sweep_csv);
    c.workers = j.value("workers", c.workers);
    return c;
}

std::string ExperimentConfig::to_json_text() const { return config_to_json(*this).dump(2); }

std::optional<std::string> ExperimentConfig::validate() const {
    static const std::vector<std::string> methods = {"fast_spectral",  "sos_orthogonal",
                                                     "sos_random3",    "sos_separated",
                                                     "sos_foobi",      "sos_general_components"};
    if (std::find(methods.begin(), methods.end(), method) == methods.end()) return "method";
    if (instance.empty()) {
        if (d < 1) return "d";
        if (n < 1) return "n";
        if (k < 2) return "k";
        if (noise < 0) return "noise";
    }
    if (eps < 0 || eps >= 1) return "eps";
    if (rho <= 0 || rho >= 1) return "rho";
    if (eta <= 0 || eta >= 1) return "eta";
    if (tol <= 0) return "tol";
    if (max_iters < 1) return "max_iters";
    if (cap_slack < 0 || cap_slack >= 1) return "cap_slack";
    if (workers < 1) return "workers";
    if (!sweep_param.empty() && sweep_values.empty()) return "sweep_values";
    return std::nullopt;
}

int run_experiment(const ExperimentConfig& cfg) {
    if (auto bad = cfg.validate()) {
        std::cerr << "config error: invalid field '" << *bad << "'\n";
        return 3;
    }

    if (!cfg.sweep_param.empty()) {
        struct Cell {
            std::size_t index;
            ExperimentConfig cfg;
            CellResult result;
        };
        std::vector<Cell> cells;
        for (std::size_t i = 0; i < cfg.sweep_values.size(); ++i) {
            ExperimentConfig c = cfg;
            double v = cfg.sweep_values[i];
            if (cfg.sweep_param == "noise") c.noise = v;
            else if (cfg.sweep_param == "eps") c.eps = v;
            else if (cfg.sweep_param == "delta") c.delta = v;
            else if (cfg.sweep_param == "d") c.d = static_cast<int>(v);
            else if (cfg.sweep_param == "n") c.n = static_cast<int>(v);
            else if (cfg.sweep_param == "seed") c.seed = static_cast<std::uint64_t>(v);
            else {
                std::cerr << "config error: invalid field 'sweep_param'\n";
                return 3;
            }
            c.sweep_param.clear();
            c.out.clear();
            cells.push_back({i, c, {}});
        }
        std::mutex mu;
        std::size_t next = 0;
        auto worker = [&] {
            for (;;) {
                std::size_t mine;
                {
                    std::lock_guard<std::mutex> lock(mu);
                    if (next >= cells.size()) return;
                    mine = next++;
                }
                RunOutput ro = run_single(cells[mine].cfg);
                CellResult cr;
                cr.value = cfg.sweep_values[cells[mine].index];
                cr.exit_code = ro.exit_code;
                cr.max_error = ro.max_error;
                cr.hausdorff_dist = ro.hausdorff_dist;
                cr.truncated = ro.truncated;
                cells[mine].result = cr;
            }
        };
        std::vector<std::thread> pool;
        int nw = std::max(1, cfg.workers);
        for (int w = 0; w < nw; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();

        std::ostringstream csv;
        csv.precision(17);
        csv << "param,value,exit_code,max_error,hausdorff,truncated\n";
        int rc = 0;
        for (const auto& cell : cells) {
            const CellResult& r = cell.result;
            csv << cfg.sweep_param << "," << r.value << "," << r.exit_code << "," << r.max_error
                << "," << r.hausdorff_dist << "," << (r.truncated ? 1 : 0) << "\n";
            rc = std::max(rc, r.exit_code);
        }
        if (!cfg.sweep_csv.empty()) write_text(cfg.sweep_csv, csv.str());
        else std::cout << csv.str();
        return rc;
    }

    RunOutput ro;
    try {
        ro = run_single(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    std::string text = ro.results.dump(2) + "\n";
    if (!cfg.out.empty()) write_text(cfg.out, text);
    else std::cout << text;
    std::string meta_path = cfg.meta_out.empty() ? (cfg.out.empty() ? "" : cfg.out + ".meta.json")
                                                 : cfg.meta_out;
    if (!meta_path.empty()) {
        json meta;
        meta["elapsed_sec"] = ro.elapsed;
        meta["unix_time"] = static_cast<std::int64_t>(
            std::chrono::duration_cast<std::chrono::seconds>(
                std::chrono::system_clock::now().time_since_epoch())
                .count());
        write_text(meta_path, meta.dump(2) + "\n");
    }
    return ro.exit_code;
}

int cmd_generate(const ExperimentConfig& cfg, const std::string& prefix) {
    if (auto bad = cfg.validate()) {
        std::cerr << "config error: invalid field '" << *bad << "'\n";
        return 3;
    }
    try {
        PlantedInstance inst = make_instance(cfg);
        write_instance(inst, prefix);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}

int cmd_validate_moments(const std::string& moments_path) {
    std::ifstream f(moments_path);
    if (!f) {
        std::cerr << "error: cannot open " << moments_path << "\n";
        return 3;
    }
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    PseudoMoments pm = PseudoMoments::load_json(text);
    ValidationReport rep = validate(pm);
    std::cout << "normalization_error " << rep.normalization_error << "\n";
    std::cout << "moment_matrix_min_eig " << rep.moment_matrix_min_eig << "\n";
    for (const auto& c : rep.chain)
        std::cout << "chain p=" << c.p << " q=" << c.q << " lhs=" << c.lhs << " rhs=" << c.rhs
                  << " " << (c.ok ? "ok" : "VIOLATED") << "\n";
    bool ok = rep.ok();
    std::cout << (ok ? "PASS" : "FAIL") << "\n";
    return ok ? 0 : 2;
}

int cmd_bench_concentration(int p, int q, int r, int samples, std::uint64_t seed,
                            const std::string& csv_out) {
    ConcentrationSpec base;
    base.p = p;
    base.q = q;
    base.r_dims = {r};
    base.samples = samples;
    base.seed = seed;

    std::ostringstream all_csv;
    bool pass = true;

    ConcentrationTable t1 = concentration_harness(base);
    std::cout << "single-mode standard Gaussian (bound 2(p+q)e^{-t^2/2})\n" << t1.to_string();
    pass = pass && t1.pass;

    ConcentrationSpec c2 = base;
    c2.cov_scale = 0.5;
    c2.general_cov_bound = true;
    ConcentrationTable t2 = concentration_harness(c2);
    std::cout << "single-mode covariance 0.5*Id (bound 4(p+q)e^{-t^2/2})\n" << t2.to_string();
    pass = pass && t2.pass;

    ConcentrationSpec c3 = base;
    c3.r_dims = {r, r};
    ConcentrationTable t3 = concentration_harness(c3);
    std::cout << "two-mode contraction (bound 4(p+q)(r+2)e^{-t^2/2}, threshold t^2)\n"
              << t3.to_string();
    pass = pass && t3.pass;

    if (!csv_out.empty()) {
        all_csv << "mode,single\n" << t1.to_csv() << "mode,cov\n" << t2.to_csv()
                << "mode,multi\n" << t3.to_csv();
        write_text(csv_out, all_csv.str());
    }
    std::cout << (pass ? "PASS" : "FAIL") << "\n";
    return pass ? 0 : 2;
}

int cmd_bench_smoothed(int d, int n, double gamma, int seeds, double noise_delta,
                       std::uint64_t seed, const std::string& csv_out) {
    auto base = gen_components(ComponentKind::sphere, d, n, seed);
    std::ostringstream csv;
    csv << smoothed_csv_header() << "\n";
    double min_sigma_b = std::numeric_limits<double>::infinity();
    for (int s = 0; s < seeds; ++s) {
        SmoothedTrialRecord rec = smoothed_trial(base, gamma, noise_delta, seed + 1000 + s);
        min_sigma_b = std::min(min_sigma_b, rec.report.sigma_min_B);
        csv << smoothed_csv_row(rec) << "\n";
    }
    if (!csv_out.empty()) write_text(csv_out, csv.str());
    else std::cout << csv.str();
    std::cout << "min sigma_min(B) over " << seeds << " seeds: " << min_sigma_b << "\n";
    return 0;
}

} // namespace sosdec
