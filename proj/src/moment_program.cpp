#include "sosdec/moment_program.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <nlohmann/json.hpp>

namespace sosdec {

Matrix PsdBlock::evaluate(const Vector& y) const {
    Matrix M = Matrix::Zero(dim, dim);
    for (const auto& e : entries) {
        double v = 0.0;
        for (std::uint32_t t = e.term_begin; t < e.term_begin + e.term_count; ++t)
            v += terms[t].coef * y(terms[t].mono);
        M(e.r, e.c) = v;
        M(e.c, e.r) = v;
    }
    return M;
}

namespace {

std::vector<BlockTerm> poly_terms(const Poly& p, const MonomialTable& table, const Monomial& shift) {
    std::vector<BlockTerm> ts;
    ts.reserve(p.term_count());
    for (const auto& [m, c] : p.terms()) ts.push_back({table.index(m * shift), c});
    return ts;
}

// Detects ||u||^2 - r2 (equality) or r2 - ||u||^2 (inequality) patterns.
bool is_norm_pattern(const Poly& p, int d, double& r2, bool& negated) {
    double quad = 0.0, cst = 0.0;
    int quad_count = 0;
    for (const auto& [m, c] : p.terms()) {
        int deg = m.degree();
        if (deg == 0) {
            cst = c;
        } else if (deg == 2) {
            bool pure = false;
            for (std::size_t i = 0; i < m.exps.size(); ++i)
                if (m.exps[i] == 2) pure = true;
            if (!pure) return false;
            if (quad_count == 0) quad = c;
            else if (c != quad) return false;
            ++quad_count;
        } else {
            return false;
        }
    }
    if (quad_count != d || quad == 0.0) return false;
    negated = quad < 0.0;
    r2 = negated ? cst / (-quad) : -cst / quad;
    return r2 > 0.0;
}

} // namespace

MomentProgram compile(const std::vector<PolyConstraint>& constraints, int d, int D,
                      const LiftMap* lift, std::optional<double> cap, int product_budget) {
    if (product_budget < 1) throw std::invalid_argument("compile: product_budget must be >= 1");
    MomentProgram prog;
    prog.d = d;
    prog.D = D;
    prog.table = std::make_shared<MonomialTable>(d, D);
    const MonomialTable& table = *prog.table;

    for (const auto& c : constraints) {
        if (c.poly.degree() > D)
            throw std::invalid_argument("compile: constraint '" + c.label + "' has degree " +
                                        std::to_string(c.poly.degree()) + " > D=" + std::to_string(D));
        double r2;
        bool neg;
        if (is_norm_pattern(c.poly, d, r2, neg)) {
            if (c.kind == PolyConstraint::Kind::eq_zero) {
                prog.has_norm_equality = true;
                prog.ball_radius_sq = r2;
            } else if (neg) { // r2 - ||u||^2 >= 0
                if (prog.ball_radius_sq == 0.0 || r2 < prog.ball_radius_sq) prog.ball_radius_sq = r2;
            }
        }
    }

    // Moment matrix over monomials of degree <= floor(D/2).
    {
        PsdBlock mm;
        mm.label = "moment";
        int n = table.count_up_to_degree(D / 2);
        mm.dim = n;
        for (int r = 0; r < n; ++r)
            for (int c = r; c < n; ++c)
                mm.add_entry(r, c, {{table.index(table[r] * table[c]), 1.0}});
        prog.blocks.push_back(std::move(mm));
    }

    // Normalization E[1] = 1.
    {
        EqRow row;
        row.terms = {{0, 1.0}};
        row.rhs = 1.0;
        row.label = "normalization";
        prog.equalities.push_back(std::move(row));
    }

    std::vector<const PolyConstraint*> geqs;
    for (const auto& c : constraints) {
        if (c.kind == PolyConstraint::Kind::eq_zero) {
            // E[x^alpha * f] = 0 for all |alpha| <= D - deg f.
            int budget = D - c.poly.degree();
            int n = table.count_up_to_degree(budget);
            for (int a = 0; a < n; ++a) {
                EqRow row;
                row.terms = poly_terms(c.poly, table, table[a]);
                row.rhs = 0.0;
                row.label = c.label + "*" + table[a].to_string();
                prog.equalities.push_back(std::move(row));
            }
        } else {
            geqs.push_back(&c);
        }
    }

    // Localizing blocks for products of up to product_budget inequality
    // constraints; a 1x1 block when only the scalar E[f] >= 0 fits the degree.
    auto add_localizing = [&](const Poly& f, const std::string& label) {
        int degf = f.degree();
        if (degf > D) return;
        PsdBlock blk;
        blk.label = "loc:" + label;
        int tdeg = (D - degf) / 2;
        int n = table.count_up_to_degree(tdeg);
        blk.dim = n;
        for (int r = 0; r < n; ++r)
            for (int c = r; c < n; ++c)
                blk.add_entry(r, c, poly_terms(f, table, table[r] * table[c]));
        prog.blocks.push_back(std::move(blk));
    };
    for (std::size_t i = 0; i < geqs.size(); ++i) add_localizing(geqs[i]->poly, geqs[i]->label);
    if (product_budget >= 2) {
        for (std::size_t i = 0; i < geqs.size(); ++i)
            for (std::size_t j = i + 1; j < geqs.size(); ++j) {
                Poly prod = geqs[i]->poly * geqs[j]->poly;
                if (prod.degree() <= D)
                    add_localizing(prod, geqs[i]->label + "*" + geqs[j]->label);
            }
    }
    // Higher-order products are exponential and not needed at this scale.

    if (cap) {
        if (!lift) throw std::invalid_argument("compile: cap requires a lift map");
        if (2 * lift->degree() > D)
            throw std::invalid_argument("compile: cap block needs 2*deg(P) <= D");
        prog.lift = *lift;
        prog.cap = *cap;
        PsdBlock blk;
        blk.label = "cap";
        int n = lift->output_dim();
        blk.dim = n;
        const auto& P = lift->entries();
        for (int r = 0; r < n; ++r)
            for (int c = r; c < n; ++c) {
                Poly prod = P[static_cast<std::size_t>(r)] * P[static_cast<std::size_t>(c)] * (-1.0);
                if (r == c) prod.add_term(Monomial(d), *cap);
                std::vector<BlockTerm> ts;
                for (const auto& [m, cc] : prod.terms()) ts.push_back({table.index(m), cc});
                if (!ts.empty()) blk.add_entry(r, c, ts);
            }
        prog.blocks.push_back(std::move(blk));
    } else if (lift) {
        prog.lift = *lift;
    }

    return prog;
}

WitnessReport check_witness(const MomentProgram& prog, const Vector& y) {
    WitnessReport rep;
    for (const auto& row : prog.equalities) {
        double v = -row.rhs;
        for (const auto& t : row.terms) v += t.coef * y(t.mono);
        rep.max_eq_violation = std::max(rep.max_eq_violation, std::abs(v));
    }
    rep.min_block_eig = 0.0;
    for (const auto& blk : prog.blocks) {
        Matrix M = blk.evaluate(y);
        Eigen::SelfAdjointEigenSolver<Matrix> es(M, Eigen::EigenvaluesOnly);
        rep.min_block_eig = std::min(rep.min_block_eig, es.eigenvalues().minCoeff());
    }
    return rep;
}

Vector moments_of_mixture(const MonomialTable& table, const std::vector<Vector>& points,
                          const std::vector<double>& weights) {
    if (points.size() != weights.size())
        throw std::invalid_argument("moments_of_mixture: size mismatch");
    Vector y = Vector::Zero(table.size());
    for (int i = 0; i < table.size(); ++i) {
        double v = 0.0;
        for (std::size_t p = 0; p < points.size(); ++p)
            v += weights[p] * table[i].eval(points[p]);
        y(i) = v;
    }
    return y;
}

std::string MomentProgram::dump_json() const {
    nlohmann::json j;
    j["d"] = d;
    j["D"] = D;
    if (cap) j["cap"] = *cap;
    nlohmann::json jblocks = nlohmann::json::array();
    for (const auto& blk : blocks) {
        nlohmann::json jb;
        jb["label"] = blk.label;
        jb["dim"] = blk.dim;
        nlohmann::json jentries = nlohmann::json::array();
        for (const auto& e : blk.entries) {
            nlohmann::json je;
            je["r"] = e.r;
            je["c"] = e.c;
            nlohmann::json jt = nlohmann::json::array();
            for (std::uint32_t t = e.term_begin; t < e.term_begin + e.term_count; ++t)
                jt.push_back({(*table)[blk.terms[t].mono].to_string(), blk.terms[t].coef});
            je["terms"] = jt;
            jentries.push_back(je);
        }
        jb["entries"] = jentries;
        jblocks.push_back(jb);
    }
    j["blocks"] = jblocks;
    nlohmann::json jeq = nlohmann::json::array();
    for (const auto& row : equalities) {
        nlohmann::json jr;
        jr["label"] = row.label;
        jr["rhs"] = row.rhs;
        nlohmann::json jt = nlohmann::json::array();
        for (const auto& t : row.terms) jt.push_back({(*table)[t.mono].to_string(), t.coef});
        jr["terms"] = jt;
        jeq.push_back(jr);
    }
    j["equalities"] = jeq;
    return j.dump(2);
}

} // namespace sosdec
