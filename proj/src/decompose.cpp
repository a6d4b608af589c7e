#include "sosdec/decompose.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "sosdec/fast_spectral.hpp"

namespace sosdec {

namespace {

int default_trials(int d) {
    double t = 50.0 * d * std::log(static_cast<double>(d) + 1.0);
    return std::min(5000, std::max(16, static_cast<int>(std::ceil(t))));
}

Vector gaussian(Rng& rng, int n) {
    Vector g(n);
    for (int i = 0; i < n; ++i) g(i) = rng.next_gaussian();
    return g;
}

// Deduplicated symmetric tensor power iterates from random restarts; cheap
// initial guesses at the components of a planted tensor.
std::vector<Vector> tpm_candidates(const SymTensor& T, int count, std::uint64_t seed) {
    const int d = T.dim();
    Rng rng(seed);
    std::vector<Vector> reps;
    int restarts = 12 * count + 20;
    for (int r = 0; r < restarts && static_cast<int>(reps.size()) < count; ++r) {
        Vector u(d);
        for (int i = 0; i < d; ++i) u(i) = rng.next_gaussian();
        u.normalize();
        for (int it = 0; it < 40; ++it) {
            Vector w = T.contract_all_but_first(u);
            double nw = w.norm();
            if (nw < 1e-12) break;
            u = w / nw;
        }
        bool dup = false;
        for (const Vector& v : reps)
            if (std::abs(v.dot(u)) > 0.8) dup = true;
        if (!dup) reps.push_back(u);
    }
    return reps;
}

} // namespace

ComponentSet decompose_general(const DecompositionSpec& spec, std::uint64_t seed) {
    if (spec.D < (spec.k + 2) * spec.lift.degree())
        throw std::invalid_argument("decompose_general: solver degree below (k+2)*deg(P)");
    ComponentSet out;
    Rng master(seed);

    std::vector<PolyConstraint> active = spec.constraints;
    Poly lift_nsq = spec.lift.norm_sq_poly();
    if (spec.add_band) {
        active.push_back({lift_nsq * (-1.0) + Poly::constant(spec.d, 1.0 + spec.band_eps),
                          PolyConstraint::Kind::geq_zero, "lift-norm-ub"});
        active.push_back({lift_nsq - Poly::constant(spec.d, 1.0 - spec.band_eps),
                          PolyConstraint::Kind::geq_zero, "lift-norm-lb"});
    }

    int trial_budget = spec.trial_budget > 0 ? spec.trial_budget : default_trials(spec.d);
    Vector warm; // deflated moments: approximately the mixture over the rest
    std::vector<Vector> init_pts;
    if (spec.init_points) init_pts = spec.init_points(master.sub("init").next_u64(), spec.n);
    double carry_mult = 1.0;

    for (int i = 1; i <= spec.n; ++i) {
        IterationDiag diag;
        diag.iteration = i;
        double base_cap = spec.cap_scale > 0.0 ? spec.cap_scale / (spec.n - i + 1)
                                               : (1.0 + spec.eps) / (spec.n - i + 1);
        double mult = carry_mult;
        SolveResult sr;
        bool solved = false;
        bool saw_indeterminate = false;
        MomentProgram prog;
        const bool trace = std::getenv("SOSDEC_TRACE_DECOMP") != nullptr;
        while (mult <= 4.0 + 1e-12) {
            auto tsolve = std::chrono::steady_clock::now();
            double cap = base_cap * mult;
            prog = compile(active, spec.d, spec.D, &spec.lift, cap, spec.product_budget);
            if (warm.size() != prog.num_vars() && !init_pts.empty()) {
                std::vector<Vector> pts = init_pts;
                if (prog.has_norm_equality && prog.ball_radius_sq > 0)
                    for (Vector& p : pts) p *= std::sqrt(prog.ball_radius_sq) / p.norm();
                if (spec.sign_symmetric) {
                    std::size_t base_count = pts.size();
                    for (std::size_t q = 0; q < base_count; ++q) pts.push_back(-pts[q]);
                }
                std::vector<double> wts(pts.size(), 1.0 / pts.size());
                warm = moments_of_mixture(*prog.table, pts, wts);
            }
            SolveOptions so = spec.solver;
            if (warm.size() == prog.num_vars()) so.warm_start = &warm;
            sr = solve(prog, so);
            diag.cap = cap;
            diag.solver_iterations = sr.iterations;
            if (trace)
                std::fprintf(stderr, "[decompose] it %d cap %.4f status %d iters %d %.1fs\n", i,
                             cap, static_cast<int>(sr.status), sr.iterations,
                             std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                           tsolve)
                                 .count());
            if (sr.status == SolveStatus::Feasible) {
                solved = true;
                break;
            }
            // A cap right at the feasibility edge is both the slowest program
            // and the least useful one; escalate on Indeterminate as well.
            saw_indeterminate = saw_indeterminate || sr.status == SolveStatus::Indeterminate;
            mult *= 1.1;
            ++diag.cap_retries;
        }
        if (!solved) {
            if (saw_indeterminate)
                throw SolverIndeterminate("decompose_general: iteration " + std::to_string(i) +
                                          ": cap search exhausted: " + sr.message);
            if (i == 1) throw InfeasibleInput("decompose_general: infeasible at first iteration");
            out.truncated = true;
            out.diagnostics.push_back(diag);
            break;
        }
        carry_mult = mult;
        const PseudoMoments& pm = *sr.moments;
        warm = pm.values;
        const double atom_radius =
            prog.has_norm_equality && prog.ball_radius_sq > 0 ? std::sqrt(prog.ball_radius_sq) : 0.0;

        JennrichRounder rounder(pm, spec.lift, spec.k);
        Rng iter_rng = master.sub("round", static_cast<std::uint64_t>(i));
        std::vector<Vector> rejected;
        bool found = false;
        Vector accepted;
        std::optional<PseudoMoments> accepted_moments;
        for (int t = 0; t < trial_budget; ++t) {
            Rng trng = iter_rng.sub("trial", static_cast<std::uint64_t>(t));
            Vector g = gaussian(trng, rounder.contraction_dim());
            Candidate cand = rounder.round(g);
            ++diag.trials;
            diag.best_gap = std::max(diag.best_gap, cand.gap_ratio);
            if (cand.gap_ratio < spec.gap_screen) continue;
            bool skip = false;
            for (const Vector& b : out.lifted)
                if (std::pow(b.dot(cand.b), 2) > 0.5) skip = true; // rediscovery
            for (const Vector& r : rejected)
                if (std::abs(r.dot(cand.b)) > 0.95) skip = true;
            if (skip) continue;
            if (diag.gate_attempts >= spec.max_gate_attempts) break;
            ++diag.gate_attempts;

            BoostOptions bo;
            bo.gate = spec.gate_threshold;
            bo.band = spec.band_eps;
            bo.add_band = spec.add_band;
            bo.solver = spec.solver;
            if (spec.backmap) {
                Vector u0 = spec.backmap(cand.b);
                if (spec.resolve_sign) u0 = spec.resolve_sign(u0);
                bo.warm_points.push_back(u0);
                if (spec.sign_symmetric) bo.warm_points.push_back(-u0);
            }
            auto tgate = std::chrono::steady_clock::now();
            BoostResult br = boost(active, spec.lift, cand.b, spec.d, bo);
            if (trace)
                std::fprintf(stderr, "[decompose] it %d gate %d trial %d status %d %.1fs\n", i,
                             diag.gate_attempts, t, static_cast<int>(br.status),
                             std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                           tgate)
                                 .count());
            if (br.status == BoostResult::Status::Accepted) {
                accepted = br.v;
                accepted_moments = std::move(br.moments);
                found = true;
                break;
            }
            if (br.status == BoostResult::Status::Rejected) rejected.push_back(cand.b);
            // Indeterminate gate solves are skipped without recording a
            // rejection direction.
        }
        diag.found = found;
        out.diagnostics.push_back(diag);
        if (!found) {
            out.truncated = true;
            break;
        }
        out.lifted.push_back(accepted);
        out.solver_outputs.push_back(pm);

        // Deflate the accepted component's point mass out of the current
        // moments; the remainder approximates the mixture over the components
        // still to be found and seeds the next solve.
        if (spec.backmap) {
            Vector u0 = spec.backmap(accepted);
            if (spec.resolve_sign) u0 = spec.resolve_sign(u0);
            if (atom_radius > 0 && u0.norm() > 0) u0 *= atom_radius / u0.norm();
            Vector atom;
            if (spec.sign_symmetric)
                atom = moments_of_mixture(*pm.table, {u0, Vector(-u0)}, {0.5, 0.5});
            else
                atom = moments_of_mixture(*pm.table, {u0}, {1.0});
            double remaining = static_cast<double>(spec.n - i + 1);
            if (remaining > 1.0)
                warm = (remaining * pm.values - atom) / (remaining - 1.0);
        }
        if (accepted_moments) out.solver_outputs.push_back(std::move(*accepted_moments));

        Poly ip = spec.lift.inner_poly(accepted);
        active.push_back({Poly::constant(spec.d, spec.exclusion_threshold) - ip * ip,
                          PolyConstraint::Kind::geq_zero,
                          "exclude" + std::to_string(static_cast<int>(out.lifted.size()))});
    }

    if (spec.backmap) {
        for (const Vector& b : out.lifted) {
            Vector a = spec.backmap(b);
            if (spec.resolve_sign) a = spec.resolve_sign(a);
            out.backmapped.push_back(a);
        }
    }
    if (spec.finalize) spec.finalize(out);
    return out;
}

ComponentSet decompose_general_components(const SymTensor& T, int n, double sigma, double eps,
                                          const GeneralComponentsOptions& opts, std::uint64_t seed) {
    const int order = T.order();
    if (order < 6 || order % 2 != 0)
        throw std::invalid_argument("decompose_general_components: order must be even and >= 6");
    const int d = T.dim();
    const int s = order / 2 - 1;
    const int D = 2 * s + 2;
    double eta = opts.c0 * std::sqrt(eps);

    std::vector<PolyConstraint> active;
    active.push_back({Poly::norm_sq(d) - Poly::constant(d, 1.0), PolyConstraint::Kind::eq_zero,
                      "unit-sphere"});
    active.push_back({Poly::from_tensor_form(T) - Poly::constant(d, opts.membership_threshold),
                      PolyConstraint::Kind::geq_zero, "tensor-value"});

    ComponentSet out;
    Rng master(seed);
    int trial_budget = opts.trial_budget > 0 ? opts.trial_budget : default_trials(d);
    Vector warm;
    double carry_mult = 1.0;

    for (int i = 1; i <= n; ++i) {
        IterationDiag diag;
        diag.iteration = i;
        double base_cap = sigma / (n - i + 1);
        double mult = carry_mult;
        SolveResult sr;
        bool solved = false;
        bool saw_indeterminate = false;
        LiftMap ident = LiftMap::identity(d);
        while (mult <= 4.0 + 1e-12) {
            double cap = base_cap * mult;
            MomentProgram prog = compile(active, d, D, &ident, cap, 1);
            SolveOptions so = opts.solver;
            if (warm.size() == prog.num_vars()) so.warm_start = &warm;
            sr = solve(prog, so);
            diag.cap = cap;
            diag.solver_iterations = sr.iterations;
            if (sr.status == SolveStatus::Feasible) {
                solved = true;
                break;
            }
            saw_indeterminate = saw_indeterminate || sr.status == SolveStatus::Indeterminate;
            mult *= 1.1;
            ++diag.cap_retries;
        }
        if (!solved) {
            if (saw_indeterminate)
                throw SolverIndeterminate("decompose_general_components: iteration " +
                                          std::to_string(i) + ": cap search exhausted: " + sr.message);
            if (i == 1)
                throw InfeasibleInput("decompose_general_components: infeasible at first iteration");
            out.truncated = true;
            out.diagnostics.push_back(diag);
            break;
        }
        carry_mult = mult;
        const PseudoMoments& pm = *sr.moments;
        warm = pm.values;

        Rng iter_rng = master.sub("round", static_cast<std::uint64_t>(i));
        bool found = false;
        Vector accepted;
        double best_val = 0.0;
        for (int t = 0; t < trial_budget; ++t) {
            Rng trng = iter_rng.sub("trial", static_cast<std::uint64_t>(t));
            std::vector<Vector> gs;
            for (int j = 0; j < s; ++j) gs.push_back(gaussian(trng, d * d));
            Candidate cand = multi_round(pm, gs);
            ++diag.trials;
            diag.best_gap = std::max(diag.best_gap, cand.gap_ratio);
            // Tensor-power refinement sharpens the eigenvector before the
            // membership test; the gate is evaluated on the refined vector.
            for (int r = 0; r < 8; ++r) {
                Vector w = T.contract_all_but_first(cand.b);
                double nw = w.norm();
                if (nw < 1e-12) break;
                cand.b = w / nw;
            }
            // Direct membership: candidate must satisfy the constraint system.
            double val = T.eval_power(cand.b);
            if (std::abs(cand.b.squaredNorm() - 1.0) > 1e-6) continue;
            if (val < opts.membership_threshold) continue;
            bool dup = false;
            for (const Vector& b : out.backmapped)
                if (std::pow(b.dot(cand.b), 2) > 1.0 - 5.0 * eta) dup = true;
            if (dup) continue;
            if (val > best_val) {
                best_val = val;
                accepted = cand.b;
                found = true;
            }
            if (best_val >= 0.995) break; // essentially on a component already
        }
        diag.found = found;
        out.diagnostics.push_back(diag);
        if (!found) {
            out.truncated = true;
            break;
        }
        out.backmapped.push_back(accepted);
        out.lifted.push_back(accepted);
        out.solver_outputs.push_back(pm);

        Vector atom = moments_of_mixture(*pm.table, {accepted, Vector(-accepted)}, {0.5, 0.5});
        double remaining = static_cast<double>(n - i + 1);
        if (remaining > 1.0) warm = (remaining * pm.values - atom) / (remaining - 1.0);

        Poly ip = Poly::linear_form(accepted);
        active.push_back({Poly::constant(d, 1.0 - 5.0 * eta) - ip * ip,
                          PolyConstraint::Kind::geq_zero,
                          "exclude" + std::to_string(static_cast<int>(out.backmapped.size()))});
    }
    return out;
}

DecompositionSpec preset_orthogonal(const SymTensor& T, double eps) {
    if (T.order() != 3) throw std::invalid_argument("preset_orthogonal: order-3 tensor required");
    if (eps >= 1.0 || eps < 0.0) throw std::invalid_argument("preset_orthogonal: eps must lie in [0,1)");
    const int d = T.dim();
    double eps_c = std::max(eps, 1e-7);

    DecompositionSpec spec;
    spec.d = d;
    spec.n = d; // callers typically override with the true count
    spec.k = 4;
    spec.D = 6;
    spec.lift = LiftMap::identity(d);
    spec.constraints.push_back({Poly::norm_sq(d) - Poly::constant(d, 1.0),
                                PolyConstraint::Kind::eq_zero, "unit-sphere"});
    spec.constraints.push_back({Poly::from_tensor_form(T) - Poly::constant(d, 1.0 - eps_c),
                                PolyConstraint::Kind::geq_zero, "tensor-value"});
    spec.product_budget = 2;
    SymTensor Tc = T;
    spec.backmap = [](const Vector& b) { return b; };
    spec.resolve_sign = [Tc, eps_c](const Vector& a) {
        return Tc.eval_power(a) >= 0 ? a : Vector(-a);
    };
    spec.init_points = [Tc](std::uint64_t seed, int count) {
        return tpm_candidates(Tc, count, seed);
    };
    return spec;
}

DecompositionSpec preset_separated(const SymTensor& T, double sigma, double rho, double eta,
                                   const SeparatedOptions& opts) {
    if (rho >= 1.0 || rho <= 0.0) throw std::invalid_argument("preset_separated: rho must lie in (0,1)");
    if (eta <= 0.0 || eta >= 1.0) throw std::invalid_argument("preset_separated: eta must lie in (0,1)");
    const int d = T.dim();
    const int korder = T.order();
    const int p = (korder + 3) / 4;

    DecompositionSpec spec;
    double log_rho_term = opts.log_inv_rho ? std::log(1.0 / rho) : std::abs(std::log(rho));
    int k_lb = static_cast<int>(std::ceil((1.0 + std::log(sigma)) / log_rho_term)) *
               static_cast<int>(std::ceil(std::log(1.0 / eta)));
    if (korder < k_lb)
        spec.warnings.push_back("tensor order " + std::to_string(korder) +
                                " below the separated-order bound " + std::to_string(k_lb) +
                                "; recovery guarantees degrade");

    spec.d = d;
    spec.n = d;
    spec.lift = LiftMap::power(d, p);
    spec.k = p == 1 ? 4 : 2;
    spec.D = std::max(korder, (spec.k + 2) * p);
    spec.sign_symmetric = korder % 2 == 0;
    spec.constraints.push_back({Poly::norm_sq(d) - Poly::constant(d, 1.0),
                                PolyConstraint::Kind::eq_zero, "unit-sphere"});
    spec.constraints.push_back({Poly::from_tensor_form(T) - Poly::constant(d, 1.0 - eta),
                                PolyConstraint::Kind::geq_zero, "tensor-value"});
    if (p == 1) spec.product_budget = 2;

    SymTensor Tc = T;
    const bool odd = korder % 2 == 1;
    spec.init_points = [Tc](std::uint64_t seed, int count) {
        return tpm_candidates(Tc, count, seed);
    };
    spec.backmap = [d, p](const Vector& b) {
        if (p == 1) return Vector(b / b.norm());
        Eigen::Index cols = 1;
        for (int i = 1; i < p; ++i) cols *= d;
        Matrix B(d, cols);
        for (Eigen::Index r = 0; r < d; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) B(r, c) = b(r * cols + c);
        Eigen::BDCSVD<Matrix> svd(B, Eigen::ComputeThinU);
        return Vector(svd.matrixU().col(0));
    };
    spec.resolve_sign = [Tc, odd](const Vector& a) {
        if (!odd) return a;
        return Tc.eval_power(a) >= 0 ? a : Vector(-a);
    };
    return spec;
}

DecompositionSpec preset_random3(const SymTensor& T, double eps) {
    if (T.order() != 3) throw std::invalid_argument("preset_random3: order-3 tensor required");
    const int d = T.dim();
    // At finite scale the tensor value at a true component is 1 plus an
    // order-(n/d^1.5) cross term; the constraint slack must cover it or the
    // components themselves become infeasible. Estimate the deficit from
    // tensor power iterates.
    double deficit = 0.0;
    for (const Vector& v : tpm_candidates(T, 2 * d, 91)) {
        double val = T.eval_power(v);
        if (val > 0.3) deficit = std::max(deficit, 1.0 - val);
    }
    double eps_c = std::min(0.9, std::max({eps, 1e-7, deficit + 0.05}));

    DecompositionSpec spec;
    spec.d = d;
    spec.n = d;
    spec.k = 2;
    spec.D = 8;
    spec.lift = LiftMap::sym_square_minus_phi(d);
    spec.constraints.push_back({Poly::norm_sq(d) - Poly::constant(d, 1.0),
                                PolyConstraint::Kind::eq_zero, "unit-sphere"});
    spec.constraints.push_back({Poly::from_tensor_form(T) - Poly::constant(d, 1.0 - eps_c),
                                PolyConstraint::Kind::geq_zero, "tensor-value"});
    SymTensor Tc = T;
    spec.init_points = [Tc](std::uint64_t seed, int count) {
        return tpm_candidates(Tc, count, seed);
    };
    spec.backmap = [d](const Vector& b) {
        Matrix B(d, d);
        for (int r = 0; r < d; ++r)
            for (int c = 0; c < d; ++c) B(r, c) = b(static_cast<Eigen::Index>(r) * d + c);
        Matrix S = 0.5 * (B + B.transpose());
        Eigen::SelfAdjointEigenSolver<Matrix> es(S);
        int best = 0;
        for (int i = 1; i < d; ++i)
            if (std::abs(es.eigenvalues()(i)) > std::abs(es.eigenvalues()(best))) best = i;
        return Vector(es.eigenvectors().col(best));
    };
    spec.resolve_sign = [Tc](const Vector& a) {
        return Tc.eval_power(a) >= 0 ? a : Vector(-a);
    };
    return spec;
}

int foobi_rank_estimate(const SymTensor& T, double gap_threshold_rel) {
    Unfolding U = unfold(T, {0, 1});
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (U.matrix + U.matrix.transpose()),
                                             Eigen::EigenvaluesOnly);
    Vector abs_ev = es.eigenvalues().cwiseAbs();
    double top = abs_ev.maxCoeff();
    if (top <= 0) return 0;
    int count = 0;
    for (int i = 0; i < abs_ev.size(); ++i)
        if (abs_ev(i) > gap_threshold_rel * top) ++count;
    return count;
}

DecompositionSpec preset_foobi(const SymTensor& T, const FoobiOptions& opts) {
    if (T.order() != 4) throw std::invalid_argument("preset_foobi: order-4 tensor required");
    const int d = T.dim();
    const Eigen::Index dd = static_cast<Eigen::Index>(d) * d;

    Unfolding U = unfold(T, {0, 1});
    Matrix Qfull = 0.5 * (U.matrix + U.matrix.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(Qfull);

    int n_est = foobi_rank_estimate(T, opts.gap_threshold_rel);
    if (n_est == 0) throw InfeasibleInput("preset_foobi: rank estimate is zero");
    int n = opts.n.value_or(n_est);
    if (opts.n && opts.strict_rank_check && n_est != *opts.n)
        throw std::invalid_argument("preset_foobi: supplied n=" + std::to_string(*opts.n) +
                                    " disagrees with rank estimate " + std::to_string(n_est));

    // Top-n eigenpairs by magnitude.
    std::vector<int> order(static_cast<std::size_t>(dd));
    for (Eigen::Index i = 0; i < dd; ++i) order[static_cast<std::size_t>(i)] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return std::abs(es.eigenvalues()(a)) > std::abs(es.eigenvalues()(b));
    });
    Matrix V(dd, n);
    Vector lam(n);
    for (int i = 0; i < n; ++i) {
        int idx = order[static_cast<std::size_t>(i)];
        if (es.eigenvalues()(idx) <= 0)
            throw InfeasibleInput("preset_foobi: kept eigenvalue is not positive");
        V.col(i) = es.eigenvectors().col(idx);
        lam(i) = es.eigenvalues()(idx);
    }
    Matrix Qtilde = V * lam.asDiagonal() * V.transpose();
    Matrix Whalf_inv = V * lam.cwiseSqrt().asDiagonal() * V.transpose();       // Qtilde^{1/2}
    Matrix W = V * lam.cwiseSqrt().cwiseInverse().asDiagonal() * V.transpose(); // (Qtilde^+)^{1/2}
    Matrix Proj = V * V.transpose();                                            // Id_{S~}

    double sigma_n = lam.minCoeff();
    double delta = opts.delta.value_or(spectral_norm(Matrix(Qfull - Qtilde)) / sigma_n);

    DecompositionSpec spec;
    spec.d = d;
    spec.n = n;
    spec.k = 2;
    spec.D = 8;
    spec.lift = LiftMap::whitened_square(d, W);
    spec.sign_symmetric = true;
    spec.add_band = true;
    spec.band_eps = 0.05 + 10.0 * delta;

    // ||Id_{S~} x^{(x)2}||^2 - (1-3delta) ||x||^4 >= 0.
    Poly subspace(d);
    for (Eigen::Index a = 0; a < dd; ++a)
        for (Eigen::Index b = 0; b < dd; ++b) {
            double c = Proj(a, b); // projector is idempotent: P^T P = P
            if (c == 0.0) continue;
            Monomial m(d);
            m.exps[static_cast<std::size_t>(a / d)]++;
            m.exps[static_cast<std::size_t>(a % d)]++;
            m.exps[static_cast<std::size_t>(b / d)]++;
            m.exps[static_cast<std::size_t>(b % d)]++;
            subspace.add_term(m, c);
        }
    Poly nsq = Poly::norm_sq(d);
    spec.constraints.push_back({subspace - nsq * nsq * (1.0 - 3.0 * delta),
                                PolyConstraint::Kind::geq_zero, "subspace"});
    // Span membership of x^{(x)2} is scale invariant, so the search runs on
    // the unit sphere; component scale is restored from the tensor value in
    // the backmap.
    spec.constraints.push_back({nsq - Poly::constant(d, opts.ball_radius_sq),
                                PolyConstraint::Kind::eq_zero, "unit-sphere"});

    SymTensor Tc = T;
    spec.backmap = [d, Whalf_inv, Tc](const Vector& c) {
        Vector lifted_back = Whalf_inv * c;
        Matrix B(d, d);
        for (int r = 0; r < d; ++r)
            for (int s = 0; s < d; ++s) B(r, s) = lifted_back(static_cast<Eigen::Index>(r) * d + s);
        Matrix S = 0.5 * (B + B.transpose());
        Eigen::SelfAdjointEigenSolver<Matrix> esb(S);
        int best = 0;
        for (int i = 1; i < d; ++i)
            if (std::abs(esb.eigenvalues()(i)) > std::abs(esb.eigenvalues()(best))) best = i;
        Vector dir = esb.eigenvectors().col(best);
        double val = Tc.eval_power(dir);
        double scale = val > 0 ? std::pow(val, 0.25) : std::sqrt(std::abs(esb.eigenvalues()(best)));
        return Vector(scale * dir);
    };
    spec.init_points = [Tc](std::uint64_t seed, int count) {
        return tpm_candidates(Tc, count, seed);
    };
    // Joint weight fit over the recovered directions removes the cross-term
    // bias that single-direction scale estimates pick up when overcomplete.
    spec.finalize = [Tc](ComponentSet& cs) {
        const int m = static_cast<int>(cs.backmapped.size());
        if (m == 0) return;
        std::vector<Vector> dirs;
        for (const Vector& a : cs.backmapped) dirs.push_back(a / a.norm());
        Matrix G(m, m);
        Vector r(m);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < m; ++j) G(i, j) = std::pow(dirs[static_cast<std::size_t>(i)].dot(dirs[static_cast<std::size_t>(j)]), 4);
            r(i) = Tc.eval_power(dirs[static_cast<std::size_t>(i)]);
        }
        G.diagonal().array() += 1e-12;
        Vector w = G.llt().solve(r);
        for (int i = 0; i < m; ++i) {
            double wi = std::max(w(i), 0.0);
            cs.backmapped[static_cast<std::size_t>(i)] = std::pow(wi, 0.25) * dirs[static_cast<std::size_t>(i)];
        }
    };
    return spec;
}

double estimate_eps_orthogonal(const SymTensor& T, std::uint64_t seed) {
    const int d = T.dim();
    int budget = std::max(64, static_cast<int>(64.0 * d * std::log(static_cast<double>(d) + 1.0)));
    FastDecomposition fd = decompose_fast(T, d, budget, seed);
    SymTensor residual = T;
    for (const Vector& v : fd.components) residual.add_rank_one(v, -1.0);
    return balanced_spectral_norm(residual);
}

} // namespace sosdec
