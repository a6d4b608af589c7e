#include "sosdec/solver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <nlohmann/json.hpp>

namespace sosdec {

namespace {

// Scatter-weight for an upper-triangle entry: off-diagonal entries represent
// two positions of the symmetric matrix.
inline double entry_weight(const BlockEntry& e) { return e.r == e.c ? 1.0 : 2.0; }

struct BlockWork {
    const PsdBlock* blk;
    Matrix Z, U, M;
};

// y-step backends ------------------------------------------------------------

class DenseBackend {
public:
    DenseBackend(const MomentProgram& prog) {
        const int m = prog.num_vars();
        Matrix G = Matrix::Zero(m, m);
        for (const auto& blk : prog.blocks) {
            for (const auto& e : blk.entries) {
                double w = entry_weight(e);
                for (std::uint32_t t1 = e.term_begin; t1 < e.term_begin + e.term_count; ++t1)
                    for (std::uint32_t t2 = e.term_begin; t2 < e.term_begin + e.term_count; ++t2)
                        G(blk.terms[t1].mono, blk.terms[t2].mono) +=
                            w * blk.terms[t1].coef * blk.terms[t2].coef;
            }
        }
        const int ne = static_cast<int>(prog.equalities.size());
        A_.resize(ne, m);
        A_.setZero();
        b_.resize(ne);
        for (int i = 0; i < ne; ++i) {
            for (const auto& t : prog.equalities[static_cast<std::size_t>(i)].terms)
                A_(i, t.mono) += t.coef;
            b_(i) = prog.equalities[static_cast<std::size_t>(i)].rhs;
        }
        double sigma = 1e-10 * (1.0 + G.trace() / m);
        G.diagonal().array() += sigma;
        llt_.compute(G);
        if (llt_.info() != Eigen::Success) {
            G.diagonal().array() += 1e-6;
            llt_.compute(G);
        }
        if (ne > 0) {
            W_ = llt_.solve(A_.transpose());
            Matrix S = A_ * W_;
            S.diagonal().array() += 1e-13 * (1.0 + S.trace() / ne);
            slt_.compute(S);
        }
    }

    Vector solve(const Vector& rhs, const Vector&) const {
        Vector t = llt_.solve(rhs);
        if (A_.rows() == 0) return t;
        Vector lam = slt_.solve(A_ * t - b_);
        return t - W_ * lam;
    }

private:
    Matrix A_, W_;
    Vector b_;
    Eigen::LLT<Matrix> llt_;
    Eigen::LLT<Matrix> slt_;
};

class PcgBackend {
public:
    PcgBackend(const MomentProgram& prog) : prog_(&prog) {
        const int m = prog.num_vars();
        const int ne = static_cast<int>(prog.equalities.size());
        diag_ = Vector::Zero(m);
        for (const auto& blk : prog.blocks)
            for (const auto& e : blk.entries) {
                double w = entry_weight(e);
                for (std::uint32_t t = e.term_begin; t < e.term_begin + e.term_count; ++t)
                    diag_(blk.terms[t].mono) += w * blk.terms[t].coef * blk.terms[t].coef;
            }
        diag_ = diag_.cwiseMax(1e-12);

        std::vector<Eigen::Triplet<double>> trips;
        b_.resize(ne);
        for (int i = 0; i < ne; ++i) {
            for (const auto& t : prog.equalities[static_cast<std::size_t>(i)].terms)
                trips.emplace_back(i, t.mono, t.coef);
            b_(i) = prog.equalities[static_cast<std::size_t>(i)].rhs;
        }
        A_.resize(ne, m);
        A_.setFromTriplets(trips.begin(), trips.end());
        At_ = A_.transpose();
        Eigen::SparseMatrix<double> AAt = (A_ * At_).pruned();
        ldlt_.compute(AAt);
        if (ldlt_.info() != Eigen::Success)
            throw std::runtime_error("solver: equality rows are numerically rank-deficient");
        y_part_ = At_ * ldlt_.solve(b_);
        y_prev_ = y_part_;
    }

    Vector project(const Vector& v) const { return v - At_ * ldlt_.solve(A_ * v); }

    void apply_G(const Vector& x, Vector& out) const {
        out.setZero();
        for (const auto& blk : prog_->blocks) {
            for (const auto& e : blk.entries) {
                double v = 0.0;
                for (std::uint32_t t = e.term_begin; t < e.term_begin + e.term_count; ++t)
                    v += blk.terms[t].coef * x(blk.terms[t].mono);
                double w = entry_weight(e) * v;
                for (std::uint32_t t = e.term_begin; t < e.term_begin + e.term_count; ++t)
                    out(blk.terms[t].mono) += w * blk.terms[t].coef;
            }
        }
    }

    Vector solve(const Vector& rhs, const Vector& proxy_hint) {
        const int m = prog_->num_vars();
        Vector gy(m);
        apply_G(y_part_, gy);
        Vector b_red = project(rhs - gy);
        Vector q = project(y_prev_ - y_part_);
        Vector Kq(m), tmp(m);
        apply_G(q, tmp);
        Vector r = b_red - project(tmp);
        double scale = std::max(b_red.norm(), 1e-30);
        double cg_tol = std::min(1e-4, std::max(1e-11, 0.02 * proxy_hint(0))) * scale;
        Vector z = project(r.cwiseQuotient(diag_));
        Vector p = z;
        double rz = r.dot(z);
        for (int it = 0; it < 400; ++it) {
            if (r.norm() <= cg_tol) break;
            apply_G(p, tmp);
            Vector Kp = project(tmp);
            double pKp = p.dot(Kp);
            if (pKp <= 0) break;
            double alpha = rz / pKp;
            q += alpha * p;
            r -= alpha * Kp;
            z = project(r.cwiseQuotient(diag_));
            double rz_new = r.dot(z);
            p = z + (rz_new / rz) * p;
            rz = rz_new;
        }
        y_prev_ = y_part_ + q;
        return y_prev_;
    }

private:
    const MomentProgram* prog_;
    Vector diag_, b_, y_part_, y_prev_;
    Eigen::SparseMatrix<double> A_, At_;
    Eigen::SparseMatrix<double, Eigen::ColMajor> AtS_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
};

double affine_violation(const MomentProgram& prog, const Vector& y) {
    double v = 0.0;
    for (const auto& row : prog.equalities) {
        double s = -row.rhs;
        for (const auto& t : row.terms) s += t.coef * y(t.mono);
        v = std::max(v, std::abs(s));
    }
    return v;
}

// Newton-style feasibility polish: repeatedly collects the near-violated
// eigen-directions of every block, then applies the minimum-norm moment
// correction that lifts them to a small positive margin while keeping the
// equalities exact. Converges quadratically from a good ADMM iterate; returns
// false when the correction step fails to shrink.
class Polisher {
public:
    Polisher(const MomentProgram& prog) : prog_(&prog) {
        const int m = prog.num_vars();
        const int ne = static_cast<int>(prog.equalities.size());
        std::vector<Eigen::Triplet<double>> trips;
        b_.resize(ne);
        for (int i = 0; i < ne; ++i) {
            for (const auto& t : prog.equalities[static_cast<std::size_t>(i)].terms)
                trips.emplace_back(i, t.mono, t.coef);
            b_(i) = prog.equalities[static_cast<std::size_t>(i)].rhs;
        }
        A_.resize(ne, m);
        A_.setFromTriplets(trips.begin(), trips.end());
        At_ = A_.transpose();
        Eigen::SparseMatrix<double> AAt = (A_ * At_).pruned();
        ldlt_.compute(AAt);
        ok_ = ldlt_.info() == Eigen::Success;
    }

    bool usable() const { return ok_; }

    double worst_violation(const Vector& y) const {
        double worst = 0.0;
        for (const auto& blk : prog_->blocks) {
            Eigen::SelfAdjointEigenSolver<Matrix> es(blk.evaluate(y), Eigen::EigenvaluesOnly);
            worst = std::max(worst, -es.eigenvalues().minCoeff());
        }
        return std::max(worst, 0.0);
    }

    bool run(Vector& y, double tol, int max_rounds = 120) const {
        const bool trace = std::getenv("SOSDEC_TRACE") != nullptr;
        const int m = prog_->num_vars();
        const double margin = 0.25 * tol;
        double stall_anchor = std::numeric_limits<double>::infinity();
        for (int round = 0; round < max_rounds; ++round) {
            // Collect the near-null cluster of every block: deficient
            // directions get lifted to the margin, directions just above it
            // are pinned so the correction cannot push them down.
            std::vector<Eigen::SelfAdjointEigenSolver<Matrix>> eigs;
            double worst = 0.0;
            for (const auto& blk : prog_->blocks) {
                eigs.emplace_back(blk.evaluate(y));
                worst = std::max(worst, -eigs.back().eigenvalues().minCoeff());
            }
            if (round % 10 == 0) {
                // Demand a 3x reduction every ten rounds.
                if (worst > stall_anchor / 3.0 && worst > 0.8 * tol) return false;
                stall_anchor = std::max(worst, 1e-300);
            }
            double cluster = std::max(20.0 * margin, 2.0 * worst);
            std::vector<Vector> rows;
            std::vector<double> targets;
            for (std::size_t j = 0; j < prog_->blocks.size(); ++j) {
                const PsdBlock& blk = prog_->blocks[j];
                const auto& es = eigs[j];
                for (int i = 0; i < es.eigenvalues().size(); ++i) {
                    double lam = es.eigenvalues()(i);
                    if (lam >= cluster) continue;
                    Vector v = es.eigenvectors().col(i);
                    Vector row = Vector::Zero(m);
                    for (const auto& e : blk.entries) {
                        double w = entry_weight(e) * v(e.r) * v(e.c);
                        for (std::uint32_t t = e.term_begin; t < e.term_begin + e.term_count; ++t)
                            row(blk.terms[t].mono) += w * blk.terms[t].coef;
                    }
                    rows.push_back(std::move(row));
                    targets.push_back(std::max(margin - lam, 0.0));
                }
            }
            Vector ra = b_ - A_ * y;
            if (trace)
                std::fprintf(stderr, "  polish round %d rows %zu viol %.3e affine %.3e\n", round,
                             rows.size(), worst, ra.cwiseAbs().maxCoeff());
            if (worst <= 0.8 * tol && ra.cwiseAbs().maxCoeff() <= 0.5 * tol) return true;
            if (rows.empty() && ra.cwiseAbs().maxCoeff() <= 0.1 * tol) return true;

            const int k = static_cast<int>(rows.size());
            Matrix Rt(m, k);
            for (int i = 0; i < k; ++i) Rt.col(i) = rows[static_cast<std::size_t>(i)];
            Vector t(k);
            for (int i = 0; i < k; ++i) t(i) = targets[static_cast<std::size_t>(i)];

            // min ||dy|| s.t. A dy = ra, R dy = t via Schur complement on the
            // small R block.
            Matrix ARt = A_ * Rt;                        // ne x k
            Matrix PARt = ldlt_.solve(ARt);              // (AA^T)^{-1} A R^T
            Matrix SR = Rt.transpose() * Rt - ARt.transpose() * PARt;
            SR.diagonal().array() += 1e-12 * (1.0 + SR.trace());
            Vector Pra = ldlt_.solve(ra);
            Vector xr = SR.ldlt().solve(t - ARt.transpose() * Pra);
            Vector xa = ldlt_.solve(ra - ARt * xr);
            Vector dy = At_ * xa + Rt * xr;
            if (!dy.allFinite() || dy.norm() > 0.5) return false;

            // Eigenvector rotation inside the near-null cluster can undo a
            // full step; backtrack on the measured violation instead.
            bool moved = false;
            for (double theta = 1.0; theta >= 1.0 / 64.0; theta *= 0.5) {
                Vector y_try = y + theta * dy;
                double w_try = worst_violation(y_try);
                if (w_try < 0.95 * worst || w_try <= 0.8 * tol) {
                    y = std::move(y_try);
                    moved = true;
                    if (trace)
                        std::fprintf(stderr, "  polish round %d |dy| %.3e theta %.3f viol %.3e\n",
                                     round, dy.norm(), theta, w_try);
                    break;
                }
            }
            if (!moved) return false;
        }
        // Final verdict.
        double av = affine_violation(*prog_, y);
        if (av > tol) return false;
        for (const auto& blk : prog_->blocks) {
            Eigen::SelfAdjointEigenSolver<Matrix> es(blk.evaluate(y), Eigen::EigenvaluesOnly);
            if (es.eigenvalues().minCoeff() < -tol) return false;
        }
        return true;
    }

private:
    const MomentProgram* prog_;
    Eigen::SparseMatrix<double> A_, At_;
    Vector b_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
    bool ok_ = false;
};

} // namespace

SolveResult solve(const MomentProgram& prog, const SolveOptions& opts) {
    if (opts.tol <= 0) throw std::invalid_argument("solve: tol must be positive");
    const int m = prog.num_vars();

    std::vector<BlockWork> work;
    work.reserve(prog.blocks.size());
    for (const auto& blk : prog.blocks) {
        BlockWork w;
        w.blk = &blk;
        w.Z = Matrix::Zero(blk.dim, blk.dim);
        w.U = Matrix::Zero(blk.dim, blk.dim);
        w.M = Matrix::Zero(blk.dim, blk.dim);
        work.push_back(std::move(w));
    }

    std::unique_ptr<DenseBackend> dense;
    std::unique_ptr<PcgBackend> pcg;
    if (m <= opts.dense_limit)
        dense = std::make_unique<DenseBackend>(prog);
    else
        pcg = std::make_unique<PcgBackend>(prog);

    // Douglas-Rachford state: one pre-projection matrix E_j per block,
    // packed into a flat vector for Anderson acceleration.
    std::vector<Eigen::Index> offsets;
    Eigen::Index state_dim = 0;
    for (const auto& w : work) {
        offsets.push_back(state_dim);
        state_dim += static_cast<Eigen::Index>(w.blk->dim) * w.blk->dim;
    }
    Vector state = Vector::Zero(state_dim);

    Vector y = Vector::Zero(m);
    if (opts.warm_start && opts.warm_start->size() == m) {
        // Seed the state so that an exactly feasible warm start is a fixed
        // point of the iteration: E_j = clip+(S_j(y0)).
        y = *opts.warm_start;
        for (std::size_t j = 0; j < work.size(); ++j) {
            Matrix S = work[j].blk->evaluate(y);
            Eigen::SelfAdjointEigenSolver<Matrix> es(S);
            Matrix Z = Matrix::Zero(S.rows(), S.cols());
            for (int i = 0; i < es.eigenvalues().size(); ++i)
                if (es.eigenvalues()(i) > 0)
                    Z.noalias() += es.eigenvalues()(i) * es.eigenvectors().col(i) *
                                   es.eigenvectors().col(i).transpose();
            Eigen::Map<Matrix>(state.data() + offsets[j], Z.rows(), Z.cols()) = Z;
        }
    }
    Vector rhs(m);
    Vector proxy_hint(1);
    proxy_hint(0) = 1.0;

    const double alpha = opts.over_relax;
    double proxy = std::numeric_limits<double>::infinity();
    std::vector<double> exact_history; // sampled every kExactStride sweeps
    constexpr int kExactStride = 16;

    // One sweep of the splitting: unpack E, project, solve the least-squares
    // step, and form the next state. Returns the primal residual proxy.
    auto sweep = [&](const Vector& x, Vector& x_next) {
        for (std::size_t j = 0; j < work.size(); ++j) {
            BlockWork& w = work[j];
            int n = w.blk->dim;
            Eigen::Map<const Matrix> E(x.data() + offsets[j], n, n);
            Eigen::SelfAdjointEigenSolver<Matrix> es(Matrix(0.5 * (E + E.transpose())));
            const Vector& ev = es.eigenvalues();
            w.Z.setZero();
            for (int i = 0; i < ev.size(); ++i)
                if (ev(i) > 0)
                    w.Z.noalias() += ev(i) * es.eigenvectors().col(i) * es.eigenvectors().col(i).transpose();
            w.U = E - w.Z;
        }
        rhs.setZero();
        for (auto& w : work) {
            const PsdBlock& blk = *w.blk;
            for (const auto& e : blk.entries) {
                double target = w.Z(e.r, e.c) - w.U(e.r, e.c);
                double we = entry_weight(e) * target;
                for (std::uint32_t t = e.term_begin; t < e.term_begin + e.term_count; ++t)
                    rhs(blk.terms[t].mono) += we * blk.terms[t].coef;
            }
        }
        proxy_hint(0) = std::isfinite(proxy) ? proxy : 1.0;
        y = dense ? dense->solve(rhs, proxy_hint) : pcg->solve(rhs, proxy_hint);
        double p = 0.0;
        for (std::size_t j = 0; j < work.size(); ++j) {
            BlockWork& w = work[j];
            int n = w.blk->dim;
            w.M = w.blk->evaluate(y);
            p = std::max(p, (w.M - w.Z).norm());
            Eigen::Map<Matrix>(x_next.data() + offsets[j], n, n) =
                alpha * w.M + (1.0 - alpha) * w.Z + w.U;
        }
        return p;
    };

    // Measured violation of the current y: (affine, psd).
    auto exact_violation = [&]() {
        double av = affine_violation(prog, y);
        double min_eig = 0.0;
        for (auto& w : work) {
            Eigen::SelfAdjointEigenSolver<Matrix> es(w.M, Eigen::EigenvaluesOnly);
            min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
        }
        return std::make_pair(av, std::max(0.0, -min_eig));
    };
    auto accept = [&](SolveResult& res, double av, double pv) {
        if (av > opts.tol || pv > opts.tol) return false;
        PseudoMoments pm;
        pm.d = prog.d;
        pm.D = prog.D;
        pm.table = prog.table;
        pm.values = y;
        pm.psd_residual = pv;
        pm.affine_residual = av;
        pm.has_norm_constraint = prog.has_norm_equality || prog.ball_radius_sq > 0.0;
        pm.ball_radius_sq = prog.ball_radius_sq;
        res.status = SolveStatus::Feasible;
        res.moments = std::move(pm);
        res.final_residual = proxy;
        return true;
    };

    // Anderson acceleration over the fixed-point map x -> sweep(x).
    const int aa_mem = 6;
    std::vector<Vector> dx_hist, dg_hist;
    Vector x_prev, g_prev;
    double g_best = std::numeric_limits<double>::infinity();

    const bool trace = std::getenv("SOSDEC_TRACE") != nullptr;
    std::unique_ptr<Polisher> polisher;
    int last_polish_iter = -1;
    int polish_backoff = 128;

    // Atomic rounding: when the iterate is essentially a point mass, the
    // exact moments of that point often satisfy the program outright.
    auto try_atomic = [&](SolveResult& res) {
        const int d = prog.d;
        Matrix M2(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j) {
                Monomial mo(d);
                mo.exps[static_cast<std::size_t>(i)]++;
                mo.exps[static_cast<std::size_t>(j)]++;
                double v = y(prog.table->index(mo));
                M2(i, j) = v;
                M2(j, i) = v;
            }
        Eigen::SelfAdjointEigenSolver<Matrix> es(M2);
        Vector u = es.eigenvectors().col(d - 1);
        double scale = prog.has_norm_equality && prog.ball_radius_sq > 0
                           ? std::sqrt(prog.ball_radius_sq)
                           : std::sqrt(std::max(M2.trace(), 0.0));
        if (!(scale > 0)) return false;
        u *= scale;
        std::vector<std::pair<std::vector<Vector>, std::vector<double>>> candidates = {
            {{u}, {1.0}},
            {{Vector(-u)}, {1.0}},
            {{u, Vector(-u)}, {0.5, 0.5}},
        };
        for (auto& [pts, wts] : candidates) {
            Vector ya = moments_of_mixture(*prog.table, pts, wts);
            WitnessReport rep = check_witness(prog, ya);
            if (rep.feasible(opts.tol)) {
                PseudoMoments pm;
                pm.d = prog.d;
                pm.D = prog.D;
                pm.table = prog.table;
                pm.values = std::move(ya);
                pm.psd_residual = std::max(0.0, -rep.min_block_eig);
                pm.affine_residual = rep.max_eq_violation;
                pm.has_norm_constraint = prog.has_norm_equality || prog.ball_radius_sq > 0.0;
                pm.ball_radius_sq = prog.ball_radius_sq;
                res.status = SolveStatus::Feasible;
                res.moments = std::move(pm);
                res.final_residual = proxy;
                return true;
            }
        }
        return false;
    };

    SolveResult res;
    Vector fx(state_dim), g(state_dim);
    for (int iter = 0; iter < opts.max_iters; ++iter) {
        proxy = sweep(state, fx);
        g = fx - state;
        double gn = g.norm();
        if (trace && iter % 50 == 0)
            std::fprintf(stderr, "it %6d proxy %.3e gnorm %.3e hist %zu\n", iter, proxy, gn,
                         dx_hist.size());

        if (gn > 3.0 * g_best) {
            dx_hist.clear();
            dg_hist.clear();
            g_best = gn;
        } else {
            g_best = std::min(g_best, gn);
        }

        Vector x_next;
        if (!dx_hist.empty()) {
            const int mem = static_cast<int>(dx_hist.size());
            Matrix GtG(mem, mem);
            Vector Gtg(mem);
            for (int a = 0; a < mem; ++a) {
                for (int b = a; b < mem; ++b) {
                    GtG(a, b) = dg_hist[static_cast<std::size_t>(a)].dot(dg_hist[static_cast<std::size_t>(b)]);
                    GtG(b, a) = GtG(a, b);
                }
                Gtg(a) = dg_hist[static_cast<std::size_t>(a)].dot(g);
            }
            GtG.diagonal().array() += 1e-10 * (1.0 + GtG.trace());
            Vector gamma = GtG.ldlt().solve(Gtg);
            if (gamma.cwiseAbs().maxCoeff() < 1e3) {
                x_next = fx;
                for (int a = 0; a < mem; ++a)
                    x_next -= gamma(a) * (dx_hist[static_cast<std::size_t>(a)] +
                                          dg_hist[static_cast<std::size_t>(a)]);
            } else {
                x_next = fx;
            }
            // Stagnation guard: an extrapolation that does not move the state
            // while the residual is still large poisons the history.
            if ((x_next - state).norm() <= 1e-12 * (1.0 + state.norm()) && gn > 0.1 * opts.tol) {
                dx_hist.clear();
                dg_hist.clear();
                x_next = fx;
            }
        } else {
            x_next = fx;
        }

        if (x_prev.size() == state_dim) {
            Vector dx = state - x_prev;
            if (dx.norm() > 1e-14 * (1.0 + state.norm())) {
                dx_hist.push_back(std::move(dx));
                dg_hist.push_back(g - g_prev);
                if (static_cast<int>(dx_hist.size()) > aa_mem) {
                    dx_hist.erase(dx_hist.begin());
                    dg_hist.erase(dg_hist.begin());
                }
            }
        }
        x_prev = state;
        g_prev = g;
        state = std::move(x_next);

        res.iterations = iter + 1;
        // The Frobenius proxy bounds the spectral violation from above;
        // exact checks run on a stride or when the proxy is nearly there.
        if (proxy <= 4.0 * opts.tol || iter % kExactStride == kExactStride - 1) {
            auto [av, pv] = exact_violation();
            if (accept(res, av, pv)) return res;

            // Near-feasible iterates get a Newton feasibility polish; the
            // splitting alone crawls once the active rank stops changing.
            // Polish rounds scale with the eigendecompositions, so large
            // programs wait until the iterate is closer.
            double polish_trigger = m > 3000 ? std::max(5e-5, 50.0 * opts.tol)
                                             : std::max(3e-3, 50.0 * opts.tol);
            if (pv <= polish_trigger && av <= 1e-4 &&
                iter >= last_polish_iter + polish_backoff) {
                if (try_atomic(res)) return res;
                if (!polisher) polisher = std::make_unique<Polisher>(prog);
                if (polisher->usable()) {
                    Vector yp = y;
                    if (polisher->run(yp, opts.tol)) {
                        y = yp;
                        double av2 = affine_violation(prog, y);
                        double pv2 = 0.0;
                        for (auto& w : work) {
                            Eigen::SelfAdjointEigenSolver<Matrix> es(w.blk->evaluate(y),
                                                                     Eigen::EigenvaluesOnly);
                            pv2 = std::max(pv2, -es.eigenvalues().minCoeff());
                        }
                        pv2 = std::max(0.0, pv2);
                        if (accept(res, av2, pv2)) return res;
                    }
                    last_polish_iter = iter;
                    polish_backoff = std::min(polish_backoff * 2, 4096);
                }
            }
            exact_history.push_back(std::max(av, pv));

            // Infeasibility heuristic: across plateau_window consecutive
            // sweeps the measured violation stays above plateau_factor*tol
            // and moves (in either direction) by less than the relative
            // plateau_improvement; a sequence still in transit has visible
            // range, a sequence at its positive limit does not.
            int span = (opts.plateau_window + kExactStride - 1) / kExactStride;
            if (iter >= opts.min_iters_before_infeasible &&
                static_cast<int>(exact_history.size()) > span) {
                double vmax = 0.0, vmin = std::numeric_limits<double>::infinity();
                for (std::size_t s = exact_history.size() - 1 - static_cast<std::size_t>(span);
                     s < exact_history.size(); ++s) {
                    vmax = std::max(vmax, exact_history[s]);
                    vmin = std::min(vmin, exact_history[s]);
                }
                if (vmin > opts.plateau_factor * opts.tol &&
                    vmax - vmin < opts.plateau_improvement * vmax) {
                    // A stalled-but-feasible iterate may still be within the
                    // polisher's reach; only an unpolishable stall counts as
                    // infeasibility evidence.
                    if (try_atomic(res)) return res;
                    if (!polisher) polisher = std::make_unique<Polisher>(prog);
                    if (polisher->usable()) {
                        Vector yp = y;
                        if (polisher->run(yp, opts.tol)) {
                            y = yp;
                            double av2 = affine_violation(prog, y);
                            double pv2 = 0.0;
                            for (auto& w : work) {
                                Eigen::SelfAdjointEigenSolver<Matrix> es(w.blk->evaluate(y),
                                                                         Eigen::EigenvaluesOnly);
                                pv2 = std::max(pv2, -es.eigenvalues().minCoeff());
                            }
                            pv2 = std::max(0.0, pv2);
                            if (accept(res, av2, pv2)) return res;
                        }
                    }
                    res.status = SolveStatus::Infeasible;
                    res.final_residual = proxy;
                    res.message = "residual plateau at " + std::to_string(vmin);
                    return res;
                }
            }
        }
    }
    {
        auto [av, pv] = exact_violation();
        if (accept(res, av, pv)) return res;
        if (try_atomic(res)) return res;
        if (!polisher) polisher = std::make_unique<Polisher>(prog);
        if (polisher->usable()) {
            Vector yp = y;
            if (polisher->run(yp, opts.tol)) {
                y = yp;
                double av2 = affine_violation(prog, y);
                double pv2 = 0.0;
                for (auto& w : work) {
                    Eigen::SelfAdjointEigenSolver<Matrix> es(w.blk->evaluate(y),
                                                             Eigen::EigenvaluesOnly);
                    pv2 = std::max(pv2, -es.eigenvalues().minCoeff());
                }
                pv2 = std::max(0.0, pv2);
                if (accept(res, av2, pv2)) return res;
            }
        }
    }

    res.status = SolveStatus::Indeterminate;
    res.final_residual = proxy;
    res.message = "max_iters exhausted at residual " + std::to_string(proxy);
    return res;
}

double pexpect(const PseudoMoments& pm, const Poly& p) {
    if (p.degree() > pm.D) throw std::invalid_argument("pexpect: polynomial degree exceeds D");
    double v = 0.0;
    for (const auto& [m, c] : p.terms()) v += c * pm.values(pm.table->index(m));
    return v;
}

Vector weighted_moments(const PseudoMoments& pm, const Poly& w) {
    int degw = w.degree();
    if (degw > pm.D) throw std::invalid_argument("weighted_moments: weight degree exceeds D");
    const MonomialTable& table = *pm.table;
    int n = table.count_up_to_degree(pm.D - degw);
    Vector z = Vector::Zero(table.size());
    for (int i = 0; i < n; ++i) {
        double v = 0.0;
        for (const auto& [m, c] : w.terms()) v += c * pm.values(table.index(m * table[i]));
        z(i) = v;
    }
    return z;
}

Matrix lifted_second_moment(const PseudoMoments& pm, const LiftMap& lift) {
    return weighted_lifted_second_moment(pm, lift, Poly::constant(pm.d, 1.0));
}

Matrix weighted_lifted_second_moment(const PseudoMoments& pm, const LiftMap& lift, const Poly& w) {
    if (2 * lift.degree() + w.degree() > pm.D)
        throw std::invalid_argument("lifted_second_moment: degree overflow");
    const MonomialTable& table = *pm.table;
    Vector z = weighted_moments(pm, w);
    int n = lift.output_dim();
    Matrix M(n, n);
    const auto& P = lift.entries();
    for (int r = 0; r < n; ++r)
        for (int c = r; c < n; ++c) {
            Poly prod = P[static_cast<std::size_t>(r)] * P[static_cast<std::size_t>(c)];
            double v = 0.0;
            for (const auto& [mm, cc] : prod.terms()) v += cc * z(table.index(mm));
            M(r, c) = v;
            M(c, r) = v;
        }
    return M;
}

SymTensor moment_tensor(const PseudoMoments& pm, int order, std::size_t memory_budget) {
    if (order > pm.D) throw std::invalid_argument("moment_tensor: order exceeds D");
    const int d = pm.d;
    SymTensor T(d, order, memory_budget);
    const MonomialTable& table = *pm.table;
    std::vector<int> idx(static_cast<std::size_t>(order), 0);
    std::size_t flat = 0;
    bool done = false;
    Monomial m(d);
    while (!done) {
        std::fill(m.exps.begin(), m.exps.end(), 0);
        for (int t = 0; t < order; ++t) m.exps[static_cast<std::size_t>(idx[static_cast<std::size_t>(t)])]++;
        T[flat] = pm.values(table.index(m));
        ++flat;
        done = true;
        for (int i = order - 1; i >= 0; --i) {
            if (++idx[static_cast<std::size_t>(i)] < d) {
                done = false;
                break;
            }
            idx[static_cast<std::size_t>(i)] = 0;
        }
    }
    return T;
}

ValidationReport validate(const PseudoMoments& pm) {
    ValidationReport rep;
    rep.normalization_error = std::abs(pm.values(0) - 1.0);

    // Moment matrix over monomials of degree <= floor(D/2).
    const MonomialTable& table = *pm.table;
    int n = table.count_up_to_degree(pm.D / 2);
    Matrix M(n, n);
    for (int r = 0; r < n; ++r)
        for (int c = r; c < n; ++c) {
            double v = pm.values(table.index(table[r] * table[c]));
            M(r, c) = v;
            M(c, r) = v;
        }
    Eigen::SelfAdjointEigenSolver<Matrix> es(M, Eigen::EigenvaluesOnly);
    rep.moment_matrix_min_eig = es.eigenvalues().minCoeff();

    rep.norm_constraint_present = pm.has_norm_constraint && pm.ball_radius_sq > 0.0;
    if (!rep.norm_constraint_present || pm.D < 2) return rep;

    double R = std::sqrt(pm.ball_radius_sq);
    SymTensor M2 = moment_tensor(pm, 2);
    double base = spectral_norm(unfold(M2, {0}));
    for (int q = 1; 2 * q + 2 <= pm.D; ++q) {
        for (int p = 1; p <= q; ++p) {
            ChainCheck chk;
            chk.p = p;
            chk.q = q;
            SymTensor Mpq = moment_tensor(pm, p + q);
            std::vector<int> rm;
            for (int i = 0; i < p; ++i) rm.push_back(i);
            chk.lhs = spectral_norm(unfold(Mpq, rm));
            chk.rhs = std::pow(R, p + q - 2) * base + 1e-6;
            chk.ok = chk.lhs <= chk.rhs;
            rep.chain.push_back(chk);
        }
    }
    return rep;
}

std::string PseudoMoments::dump_json() const {
    nlohmann::json j;
    j["d"] = d;
    j["D"] = D;
    j["psd_residual"] = psd_residual;
    j["affine_residual"] = affine_residual;
    j["has_norm_constraint"] = has_norm_constraint;
    j["ball_radius_sq"] = ball_radius_sq;
    nlohmann::json vals = nlohmann::json::array();
    for (int i = 0; i < table->size(); ++i)
        vals.push_back({(*table)[i].to_string(), values(i)});
    j["values"] = vals;
    return j.dump(2);
}

PseudoMoments PseudoMoments::load_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    PseudoMoments pm;
    pm.d = j.at("d").get<int>();
    pm.D = j.at("D").get<int>();
    pm.psd_residual = j.value("psd_residual", 0.0);
    pm.affine_residual = j.value("affine_residual", 0.0);
    pm.has_norm_constraint = j.value("has_norm_constraint", false);
    pm.ball_radius_sq = j.value("ball_radius_sq", 0.0);
    auto table = std::make_shared<MonomialTable>(pm.d, pm.D);
    pm.table = table;
    pm.values = Vector::Zero(table->size());
    for (const auto& entry : j.at("values")) {
        std::string key = entry[0].get<std::string>();
        Monomial m(pm.d);
        std::size_t pos = 0;
        for (int v = 0; v < pm.d; ++v) {
            std::size_t comma = key.find(',', pos);
            std::string part = key.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
            m.exps[static_cast<std::size_t>(v)] = static_cast<std::uint8_t>(std::stoi(part));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        pm.values(table->index(m)) = entry[1].get<double>();
    }
    return pm;
}

} // namespace sosdec
