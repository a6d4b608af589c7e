#include "sosdec/lift.hpp"

namespace sosdec {

LiftMap LiftMap::identity(int d) {
    LiftMap L;
    L.variant_ = Variant::identity;
    L.d_ = d;
    L.d_out_ = d;
    L.degree_ = 1;
    for (int i = 0; i < d; ++i) L.entries_.push_back(Poly::variable(d, i));
    return L;
}

LiftMap LiftMap::power(int d, int p) {
    if (p < 1) throw std::invalid_argument("LiftMap::power: p must be >= 1");
    LiftMap L;
    L.variant_ = p == 1 ? Variant::identity : Variant::power;
    L.d_ = d;
    L.degree_ = p;
    int n = 1;
    for (int i = 0; i < p; ++i) n *= d;
    L.d_out_ = n;
    std::vector<int> idx(static_cast<std::size_t>(p), 0);
    for (int flat = 0; flat < n; ++flat) {
        Monomial m(d);
        int f = flat;
        for (int t = p - 1; t >= 0; --t) {
            idx[static_cast<std::size_t>(t)] = f % d;
            f /= d;
        }
        for (int t = 0; t < p; ++t) m.exps[static_cast<std::size_t>(idx[static_cast<std::size_t>(t)])]++;
        L.entries_.push_back(Poly::monomial(d, m, 1.0));
    }
    return L;
}

LiftMap LiftMap::sym_square_minus_phi(int d) {
    LiftMap L;
    L.variant_ = Variant::sym_square_minus_phi;
    L.d_ = d;
    L.d_out_ = d * d;
    L.degree_ = 2;
    // Entry (i,j): u_i u_j - delta_ij (1/d) ||u||^2.
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            Monomial m(d);
            m.exps[static_cast<std::size_t>(i)]++;
            m.exps[static_cast<std::size_t>(j)]++;
            Poly p = Poly::monomial(d, m, 1.0);
            if (i == j) p = p - Poly::norm_sq(d) * (1.0 / d);
            L.entries_.push_back(p);
        }
    return L;
}

LiftMap LiftMap::whitened_square(int d, const Matrix& W) {
    if (W.cols() != static_cast<Eigen::Index>(d) * d)
        throw std::invalid_argument("LiftMap::whitened_square: W must have d^2 columns");
    LiftMap L;
    L.variant_ = Variant::whitened_square;
    L.d_ = d;
    L.d_out_ = static_cast<int>(W.rows());
    L.degree_ = 2;
    L.W_ = W;
    for (int r = 0; r < W.rows(); ++r) {
        Poly p(d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                double c = W(r, static_cast<Eigen::Index>(i) * d + j);
                if (c == 0.0) continue;
                Monomial m(d);
                m.exps[static_cast<std::size_t>(i)]++;
                m.exps[static_cast<std::size_t>(j)]++;
                p.add_term(m, c);
            }
        L.entries_.push_back(p);
    }
    return L;
}

Vector LiftMap::apply(const Vector& x) const {
    Vector out(d_out_);
    for (int i = 0; i < d_out_; ++i) out(i) = entries_[static_cast<std::size_t>(i)].eval(x);
    return out;
}

Poly LiftMap::norm_sq_poly() const {
    Poly p(d_);
    for (const Poly& e : entries_) p = p + e * e;
    return p;
}

Poly LiftMap::inner_poly(const Vector& b) const {
    if (b.size() != d_out_) throw std::invalid_argument("LiftMap::inner_poly: dimension mismatch");
    Poly p(d_);
    for (int i = 0; i < d_out_; ++i) {
        if (b(i) == 0.0) continue;
        p = p + entries_[static_cast<std::size_t>(i)] * b(i);
    }
    return p;
}

} // namespace sosdec
