#include "sosdec/polynomial.hpp"

#include <algorithm>

namespace sosdec {

std::string Monomial::to_string() const {
    std::string s;
    for (std::size_t i = 0; i < exps.size(); ++i) {
        if (!s.empty()) s += ",";
        s += std::to_string(static_cast<int>(exps[i]));
    }
    return s;
}

MonomialTable::MonomialTable(int d, int D) : d_(d), D_(D) {
    if (d < 1 || D < 0) throw std::invalid_argument("MonomialTable: bad parameters");
    // Graded lexicographic: by total degree, then lexicographic on exponents.
    for (int deg = 0; deg <= D; ++deg) {
        std::vector<Monomial> out;
        std::vector<std::uint8_t> acc(static_cast<std::size_t>(d), 0);
        auto rec = [&](auto&& self, int at, int remaining) -> void {
            if (at == d - 1) {
                acc[static_cast<std::size_t>(at)] = static_cast<std::uint8_t>(remaining);
                Monomial mm(d);
                mm.exps = acc;
                out.push_back(std::move(mm));
                acc[static_cast<std::size_t>(at)] = 0;
                return;
            }
            for (int take = 0; take <= remaining; ++take) {
                acc[static_cast<std::size_t>(at)] = static_cast<std::uint8_t>(take);
                self(self, at + 1, remaining - take);
            }
            acc[static_cast<std::size_t>(at)] = 0;
        };
        rec(rec, 0, deg);
        std::sort(out.begin(), out.end(), [](const Monomial& a, const Monomial& b) {
            return a.exps < b.exps;
        });
        for (auto& mm : out) list_.push_back(std::move(mm));
    }
    map_.reserve(list_.size() * 2);
    for (int i = 0; i < static_cast<int>(list_.size()); ++i) map_.emplace(list_[static_cast<std::size_t>(i)], i);
}

int MonomialTable::count_up_to_degree(int deg) const {
    int n = 0;
    while (n < size() && list_[static_cast<std::size_t>(n)].degree() <= deg) ++n;
    return n;
}

Poly Poly::from_tensor_form(const SymTensor& T) {
    const int d = T.dim(), k = T.order();
    Poly p(d);
    std::vector<int> idx(static_cast<std::size_t>(k), 0);
    std::size_t flat = 0;
    bool done = false;
    while (!done) {
        double v = T[flat];
        if (v != 0.0) {
            Monomial m(d);
            for (int t = 0; t < k; ++t) m.exps[static_cast<std::size_t>(idx[static_cast<std::size_t>(t)])]++;
            p.add_term(m, v);
        }
        ++flat;
        done = true;
        for (int i = k - 1; i >= 0; --i) {
            if (++idx[static_cast<std::size_t>(i)] < d) {
                done = false;
                break;
            }
            idx[static_cast<std::size_t>(i)] = 0;
        }
    }
    return p;
}

Poly Poly::linear_form(const Vector& v) {
    Poly p(static_cast<int>(v.size()));
    for (int i = 0; i < v.size(); ++i)
        if (v(i) != 0.0) p.add_term([&] {
            Monomial m(static_cast<int>(v.size()));
            m.exps[static_cast<std::size_t>(i)] = 1;
            return m;
        }(), v(i));
    return p;
}

} // namespace sosdec
