#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "sosdec/tensor.hpp"

namespace sosdec {

// Monomial over d variables as an exponent vector; canonical representation
// is the exponent vector itself (sorted-variable order is implicit).
struct Monomial {
    std::vector<std::uint8_t> exps;

    explicit Monomial(int d = 0) : exps(static_cast<std::size_t>(d), 0) {}

    int degree() const {
        int s = 0;
        for (auto e : exps) s += e;
        return s;
    }
    bool operator==(const Monomial& o) const { return exps == o.exps; }

    Monomial operator*(const Monomial& o) const {
        Monomial r = *this;
        for (std::size_t i = 0; i < exps.size(); ++i)
            r.exps[i] = static_cast<std::uint8_t>(r.exps[i] + o.exps[i]);
        return r;
    }

    double eval(const Vector& x) const {
        double v = 1.0;
        for (std::size_t i = 0; i < exps.size(); ++i)
            for (int e = 0; e < exps[i]; ++e) v *= x(static_cast<Eigen::Index>(i));
        return v;
    }

    std::string to_string() const;
};

struct MonomialHash {
    std::size_t operator()(const Monomial& m) const {
        std::uint64_t h = 1469598103934665603ull;
        for (auto e : m.exps) {
            h ^= e;
            h *= 1099511628211ull;
        }
        return static_cast<std::size_t>(h);
    }
};

// All monomials of degree <= D over d variables in graded lexicographic
// order, with an index lookup. Shared by programs and moment vectors.
class MonomialTable {
public:
    MonomialTable(int d, int D);

    int dim() const { return d_; }
    int max_degree() const { return D_; }
    int size() const { return static_cast<int>(list_.size()); }
    const Monomial& operator[](int i) const { return list_[static_cast<std::size_t>(i)]; }
    const std::vector<Monomial>& all() const { return list_; }

    int index(const Monomial& m) const {
        auto it = map_.find(m);
        if (it == map_.end()) throw std::out_of_range("MonomialTable: monomial of degree > D");
        return it->second;
    }
    int index_or_neg(const Monomial& m) const {
        auto it = map_.find(m);
        return it == map_.end() ? -1 : it->second;
    }
    // Monomials of degree <= deg form a prefix of the graded-lex order.
    int count_up_to_degree(int deg) const;

private:
    int d_, D_;
    std::vector<Monomial> list_;
    std::unordered_map<Monomial, int, MonomialHash> map_;
};

// Sparse polynomial: canonical term list sorted by exponent vector.
class Poly {
public:
    Poly() = default;
    explicit Poly(int d) : d_(d) {}

    static Poly constant(int d, double c) {
        Poly p(d);
        if (c != 0.0) p.terms_[Monomial(d)] = c;
        return p;
    }
    static Poly variable(int d, int i, double c = 1.0) {
        Poly p(d);
        Monomial m(d);
        m.exps[static_cast<std::size_t>(i)] = 1;
        p.terms_[m] = c;
        return p;
    }
    static Poly monomial(int d, const Monomial& m, double c) {
        Poly p(d);
        if (c != 0.0) p.terms_[m] = c;
        return p;
    }
    // sum_i x_i^2
    static Poly norm_sq(int d) {
        Poly p(d);
        for (int i = 0; i < d; ++i) {
            Monomial m(d);
            m.exps[static_cast<std::size_t>(i)] = 2;
            p.terms_[m] = 1.0;
        }
        return p;
    }
    // <T, x^{(x)k}> as a polynomial of degree k (collects symmetric entries).
    static Poly from_tensor_form(const SymTensor& T);
    // <v, x>, v of length d.
    static Poly linear_form(const Vector& v);

    int dim() const { return d_; }
    int degree() const {
        int deg = 0;
        for (const auto& [m, c] : terms_) deg = std::max(deg, m.degree());
        return deg;
    }
    std::size_t term_count() const { return terms_.size(); }
    const std::map<Monomial, double, std::less<Monomial>>& terms() const { return terms_; }

    void add_term(const Monomial& m, double c) {
        auto [it, inserted] = terms_.emplace(m, c);
        if (!inserted) {
            it->second += c;
            if (it->second == 0.0) terms_.erase(it);
        }
    }

    Poly operator+(const Poly& o) const {
        Poly r = *this;
        for (const auto& [m, c] : o.terms_) r.add_term(m, c);
        return r;
    }
    Poly operator-(const Poly& o) const {
        Poly r = *this;
        for (const auto& [m, c] : o.terms_) r.add_term(m, -c);
        return r;
    }
    Poly operator*(const Poly& o) const {
        Poly r(d_);
        for (const auto& [m1, c1] : terms_)
            for (const auto& [m2, c2] : o.terms_) r.add_term(m1 * m2, c1 * c2);
        return r;
    }
    Poly operator*(double c) const {
        Poly r(d_);
        if (c != 0.0)
            for (const auto& [m, cc] : terms_) r.terms_[m] = cc * c;
        return r;
    }

    double eval(const Vector& x) const {
        double v = 0.0;
        for (const auto& [m, c] : terms_) v += c * m.eval(x);
        return v;
    }

private:
    int d_ = 0;
    std::map<Monomial, double, std::less<Monomial>> terms_;
};

// std::map needs an ordering on Monomial.
inline bool operator<(const Monomial& a, const Monomial& b) {
    int da = a.degree(), db = b.degree();
    if (da != db) return da < db;
    return a.exps < b.exps;
}

struct PolyConstraint {
    enum class Kind { eq_zero, geq_zero };
    Poly poly;
    Kind kind = Kind::geq_zero;
    std::string label;
};

} // namespace sosdec
