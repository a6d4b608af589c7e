#include "sosdec/rounding.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>

namespace sosdec {

Candidate top_direction(const Matrix& M) {
    Candidate cand;
    const int n = static_cast<int>(M.rows());
    if (n <= 600) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(M);
        const Vector& ev = es.eigenvalues();
        int best = 0, second = -1;
        for (int i = 1; i < n; ++i)
            if (std::abs(ev(i)) > std::abs(ev(best))) best = i;
        for (int i = 0; i < n; ++i) {
            if (i == best) continue;
            if (second < 0 || std::abs(ev(i)) > std::abs(ev(second))) second = i;
        }
        cand.b = es.eigenvectors().col(best);
        double l1 = std::abs(ev(best));
        double l2 = second >= 0 ? std::abs(ev(second)) : 0.0;
        cand.gap_ratio = l1 / std::max(l2, 1e-300);
    } else {
        // Power iteration with 3 restarts on M (top by magnitude).
        Vector best_v;
        double best_l = -1.0;
        for (int r = 0; r < 3; ++r) {
            Rng rng(1000 + static_cast<std::uint64_t>(r));
            Vector v(n);
            for (int i = 0; i < n; ++i) v(i) = rng.next_gaussian();
            v.normalize();
            for (int it = 0; it < 1000; ++it) {
                Vector w = M * v;
                double nw = w.norm();
                if (nw < 1e-300) break;
                w /= nw;
                if ((w - v).norm() < 1e-12 || (w + v).norm() < 1e-12) {
                    v = w;
                    break;
                }
                v = w;
            }
            double l = std::abs(v.dot(M * v));
            if (l > best_l) {
                best_l = l;
                best_v = v;
            }
        }
        cand.b = best_v;
        // Deflate once for the gap estimate.
        Matrix Md = M - (best_v.dot(M * best_v)) * best_v * best_v.transpose();
        double l2 = 0.0;
        {
            Rng rng(99);
            Vector v(n);
            for (int i = 0; i < n; ++i) v(i) = rng.next_gaussian();
            v.normalize();
            for (int it = 0; it < 300; ++it) {
                Vector w = Md * v;
                double nw = w.norm();
                if (nw < 1e-300) break;
                v = w / nw;
            }
            l2 = std::abs(v.dot(Md * v));
        }
        cand.gap_ratio = best_l / std::max(l2, 1e-300);
    }
    double nb = cand.b.norm();
    if (nb > 0) cand.b /= nb;
    return cand;
}

JennrichRounder::JennrichRounder(const PseudoMoments& pm, const LiftMap& lift, int k)
    : pm_(&pm), lift_(lift), k_(k) {
    if (k < 1 || k % 2 != 0) throw std::invalid_argument("jennrich_round: k must be even and positive");
    const int l = lift.degree();
    if ((k + 2) * l > pm.D) throw std::invalid_argument("jennrich_round: (k+2)*deg(P) exceeds D");
    const MonomialTable& table = *pm.table;
    const int dp = lift.output_dim();

    std::size_t gd = 1;
    for (int i = 0; i < k; ++i) {
        gd *= static_cast<std::size_t>(dp);
        if (gd > 20'000'000) throw std::invalid_argument("jennrich_round: contraction dimension too large");
    }
    g_dim_ = static_cast<int>(gd);

    // Dense coordinates for homogeneous monomials of degree k*l (the weight
    // polynomial lives there) and 2*l (entry-pair products live there).
    dense_lo_ = table.count_up_to_degree(k * l - 1);
    dense_n_ = table.count_up_to_degree(k * l) - dense_lo_;
    pair_lo_ = table.count_up_to_degree(2 * l - 1);
    pair_n_ = table.count_up_to_degree(2 * l) - pair_lo_;

    // w_g(u) = <g, P(u)^{(x)k}> = sum over index words (p_1..p_k) of
    // g[word] * P_{p_1}(u) ... P_{p_k}(u).
    const auto& P = lift.entries();
    g_expansions_.resize(gd);
    std::vector<int> word(static_cast<std::size_t>(k), 0);
    for (std::size_t flat = 0; flat < gd; ++flat) {
        std::size_t f = flat;
        for (int t = k - 1; t >= 0; --t) {
            word[static_cast<std::size_t>(t)] = static_cast<int>(f % static_cast<std::size_t>(dp));
            f /= static_cast<std::size_t>(dp);
        }
        Poly prod = P[static_cast<std::size_t>(word[0])];
        for (int t = 1; t < k; ++t) prod = prod * P[static_cast<std::size_t>(word[static_cast<std::size_t>(t)])];
        auto& exp = g_expansions_[flat];
        for (const auto& [m, c] : prod.terms()) exp.emplace_back(table.index(m) - dense_lo_, c);
    }

    sum_index_.resize(static_cast<std::size_t>(dense_n_) * static_cast<std::size_t>(pair_n_));
    for (int wi = 0; wi < dense_n_; ++wi)
        for (int pi = 0; pi < pair_n_; ++pi)
            sum_index_[static_cast<std::size_t>(wi) * pair_n_ + pi] =
                table.index(table[dense_lo_ + wi] * table[pair_lo_ + pi]);

    for (int r = 0; r < dp; ++r)
        for (int c = r; c < dp; ++c) {
            Poly prod = P[static_cast<std::size_t>(r)] * P[static_cast<std::size_t>(c)];
            std::vector<std::pair<int, double>> exp;
            for (const auto& [m, cc] : prod.terms()) exp.emplace_back(table.index(m) - pair_lo_, cc);
            pair_expansions_.push_back(std::move(exp));
            pairs_.emplace_back(r, c);
        }
}

Candidate JennrichRounder::round(const Vector& g) const {
    if (g.size() != g_dim_) throw std::invalid_argument("jennrich_round: contraction vector length mismatch");
    // Dense weight coefficients.
    Vector w = Vector::Zero(dense_n_);
    for (int i = 0; i < g_dim_; ++i) {
        double gi = g(i);
        if (gi == 0.0) continue;
        for (const auto& [idx, c] : g_expansions_[static_cast<std::size_t>(i)]) w(idx) += gi * c;
    }
    // z_pi = E[w(u) * m_pi(u)] for pair monomials.
    Vector z = Vector::Zero(pair_n_);
    const Vector& y = pm_->values;
    for (int pi = 0; pi < pair_n_; ++pi) {
        double s = 0.0;
        const int* row = sum_index_.data();
        for (int wi = 0; wi < dense_n_; ++wi)
            s += w(wi) * y(row[static_cast<std::size_t>(wi) * pair_n_ + pi]);
        z(pi) = s;
    }
    // M[r,c] = E[w * P_r P_c].
    const int dp = lift_.output_dim();
    Matrix M = Matrix::Zero(dp, dp);
    for (std::size_t pidx = 0; pidx < pairs_.size(); ++pidx) {
        double v = 0.0;
        for (const auto& [idx, c] : pair_expansions_[pidx]) v += c * z(idx);
        M(pairs_[pidx].first, pairs_[pidx].second) = v;
        M(pairs_[pidx].second, pairs_[pidx].first) = v;
    }
    return top_direction(M);
}

Candidate jennrich_round(const PseudoMoments& pm, const LiftMap& lift, int k, const Vector& g) {
    JennrichRounder rounder(pm, lift, k);
    return rounder.round(g);
}

Candidate multi_round(const PseudoMoments& pm, const std::vector<Vector>& gs) {
    const int s = static_cast<int>(gs.size());
    if (s < 1) throw std::invalid_argument("multi_round: need at least one contraction");
    if (2 * s + 2 > pm.D) throw std::invalid_argument("multi_round: 2s+2 exceeds D");
    const int d = pm.d;
    Poly w = Poly::constant(d, 1.0);
    for (const Vector& g : gs) {
        if (g.size() != static_cast<Eigen::Index>(d) * d)
            throw std::invalid_argument("multi_round: contraction vectors must have length d^2");
        Poly q(d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                double c = g(static_cast<Eigen::Index>(i) * d + j);
                if (c == 0.0) continue;
                Monomial m(d);
                m.exps[static_cast<std::size_t>(i)]++;
                m.exps[static_cast<std::size_t>(j)]++;
                q.add_term(m, c);
            }
        w = w * q;
    }
    Matrix M = weighted_lifted_second_moment(pm, LiftMap::identity(d), w);
    return top_direction(M);
}

namespace {

// Canonical inversion of a lifted direction back to R^d; used to seed the
// boost solver at the candidate's point mass.
Vector lift_backmap_direction(const LiftMap& lift, const Vector& b) {
    const int d = lift.input_dim();
    switch (lift.variant()) {
    case LiftMap::Variant::identity:
        return b;
    case LiftMap::Variant::power: {
        Eigen::Index cols = 1;
        for (int i = 1; i < lift.degree(); ++i) cols *= d;
        Matrix B(d, cols);
        for (Eigen::Index r = 0; r < d; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) B(r, c) = b(r * cols + c);
        if (cols == 1) return Vector(B.col(0));
        Eigen::BDCSVD<Matrix> svd(B, Eigen::ComputeThinU);
        return Vector(svd.matrixU().col(0));
    }
    case LiftMap::Variant::sym_square_minus_phi:
    case LiftMap::Variant::whitened_square: {
        Vector v = b;
        if (lift.variant() == LiftMap::Variant::whitened_square) {
            // Map back through the whitening: pinv(W) b.
            Eigen::SelfAdjointEigenSolver<Matrix> es(lift.whitening());
            Vector inv = es.eigenvalues();
            for (int i = 0; i < inv.size(); ++i) inv(i) = std::abs(inv(i)) > 1e-10 ? 1.0 / inv(i) : 0.0;
            v = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose() * b;
        }
        Matrix B(d, d);
        for (int r = 0; r < d; ++r)
            for (int c = 0; c < d; ++c) B(r, c) = v(static_cast<Eigen::Index>(r) * d + c);
        Matrix S = 0.5 * (B + B.transpose());
        Eigen::SelfAdjointEigenSolver<Matrix> es(S);
        int best = 0;
        for (int i = 1; i < d; ++i)
            if (std::abs(es.eigenvalues()(i)) > std::abs(es.eigenvalues()(best))) best = i;
        return Vector(es.eigenvectors().col(best));
    }
    }
    return b;
}

} // namespace

BoostResult boost(const std::vector<PolyConstraint>& constraints, const LiftMap& lift,
                  const Vector& b_star, int d, const BoostOptions& opts) {
    BoostResult out;
    if (std::abs(b_star.norm() - 1.0) > 1e-9)
        throw std::invalid_argument("boost: b_star must be unit norm");
    const int D = 4 * lift.degree();

    std::vector<PolyConstraint> cs = constraints;
    Poly nsq = lift.norm_sq_poly();
    if (opts.add_band) {
        cs.push_back({nsq * (-1.0) + Poly::constant(d, 1.0 + opts.band),
                      PolyConstraint::Kind::geq_zero, "lift-norm-ub"});
        cs.push_back({nsq - Poly::constant(d, 1.0 - opts.band),
                      PolyConstraint::Kind::geq_zero, "lift-norm-lb"});
    }
    Poly ip = lift.inner_poly(b_star);
    cs.push_back({ip * ip - nsq * opts.gate, PolyConstraint::Kind::geq_zero, "gate"});

    MomentProgram prog = compile(cs, d, D, &lift);
    SolveOptions so = opts.solver;
    Vector warm;
    {
        std::vector<Vector> pts = opts.warm_points;
        if (pts.empty()) {
            Vector u0 = lift_backmap_direction(lift, b_star);
            pts.push_back(u0);
            pts.push_back(-u0);
        }
        if (prog.has_norm_equality && prog.ball_radius_sq > 0)
            for (Vector& p : pts)
                if (p.norm() > 0) p *= std::sqrt(prog.ball_radius_sq) / p.norm();
        // Candidate seeds: each atom alone plus their uniform mixture; keep
        // the one closest to feasibility.
        std::vector<Vector> seeds;
        for (const Vector& p : pts) seeds.push_back(moments_of_mixture(*prog.table, {p}, {1.0}));
        std::vector<double> w(pts.size(), 1.0 / pts.size());
        seeds.push_back(moments_of_mixture(*prog.table, pts, w));
        double best = std::numeric_limits<double>::infinity();
        for (Vector& s : seeds) {
            WitnessReport rep = check_witness(prog, s);
            double score = std::max(rep.max_eq_violation, -rep.min_block_eig);
            if (score < best) {
                best = score;
                warm = std::move(s);
            }
        }
        so.warm_start = &warm;
    }
    SolveResult sr = solve(prog, so);
    if (sr.status == SolveStatus::Infeasible) {
        out.status = BoostResult::Status::Rejected;
        out.message = sr.message;
        return out;
    }
    if (sr.status == SolveStatus::Indeterminate) {
        out.status = BoostResult::Status::Indeterminate;
        out.message = sr.message;
        return out;
    }
    Matrix M = lifted_second_moment(*sr.moments, lift);
    Candidate c = top_direction(M);
    out.status = BoostResult::Status::Accepted;
    out.v = c.b;
    out.moments = std::move(sr.moments);
    return out;
}

} // namespace sosdec
