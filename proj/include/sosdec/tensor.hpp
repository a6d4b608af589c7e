#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sosdec/rng.hpp"

namespace sosdec {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Dense symmetric order-k tensor over R^d, row-major full layout.
// Entries are stored unpacked; symmetry is a semantic invariant that can be
// requested at construction (symmetrize) or checked (validate_symmetry).
class SymTensor {
public:
    SymTensor(int d, int k, std::size_t memory_budget = kDefaultBudget)
        : d_(d), k_(k) {
        if (d < 1 || k < 1) throw std::invalid_argument("SymTensor: d and k must be positive");
        std::size_t n = 1;
        for (int i = 0; i < k; ++i) {
            if (n > memory_budget / static_cast<std::size_t>(d))
                throw std::invalid_argument("SymTensor: d^k exceeds memory budget");
            n *= static_cast<std::size_t>(d);
        }
        entries_.assign(n, 0.0);
    }

    static constexpr std::size_t kDefaultBudget = 10'000'000;

    int dim() const { return d_; }
    int order() const { return k_; }
    std::size_t size() const { return entries_.size(); }
    double* data() { return entries_.data(); }
    const double* data() const { return entries_.data(); }

    double& operator[](std::size_t flat) { return entries_[flat]; }
    double operator[](std::size_t flat) const { return entries_[flat]; }

    double at(const std::vector<int>& idx) const { return entries_[flatten(idx)]; }
    double& at(const std::vector<int>& idx) { return entries_[flatten(idx)]; }

    std::size_t flatten(const std::vector<int>& idx) const {
        std::size_t f = 0;
        for (int i = 0; i < k_; ++i) f = f * d_ + static_cast<std::size_t>(idx[i]);
        return f;
    }

    // Average over all index permutations. Done bucket-wise over sorted
    // multi-indices, O(d^k * k log k).
    void symmetrize();

    // Max deviation |T[perm(i)] - T[i]| sampled over adjacent transpositions
    // (sufficient: transpositions generate S_k).
    double symmetry_defect() const;

    void validate_symmetry(double tol = 1e-12) const {
        double defect = symmetry_defect();
        if (defect > tol)
            throw std::invalid_argument("SymTensor: symmetry defect " + std::to_string(defect) +
                                        " exceeds tolerance");
    }

    SymTensor& operator+=(const SymTensor& o);
    SymTensor& operator-=(const SymTensor& o);
    SymTensor& operator*=(double c);

    // T += c * v^{otimes k}
    void add_rank_one(const Vector& v, double c = 1.0);

    // <T, x1 (x) x2 (x) ... (x) xk> for equal xi = x.
    double eval_power(const Vector& x) const;

    // Contraction of the last (k-1) modes with x: result_a = sum T[a, i2..ik] x_{i2}...x_{ik}.
    Vector contract_all_but_first(const Vector& x) const;

private:
    int d_;
    int k_;
    std::vector<double> entries_;
};

// Matrix unfolding of a tensor: rows indexed by the modes in row_modes (in
// the given sorted order), columns by the complement.
struct Unfolding {
    int d = 0;
    int k = 0;
    std::vector<int> row_modes; // 0-based, sorted
    std::vector<int> col_modes; // complement, sorted
    Matrix matrix;
};

Unfolding unfold(const SymTensor& T, const std::vector<int>& row_modes);
SymTensor fold(const Unfolding& U, std::size_t memory_budget = SymTensor::kDefaultBudget);

// Largest singular value. Full SVD when min(rows,cols) <= 2000, otherwise
// power iteration on M^T M to relative tolerance tol, deterministic seeded
// start plus one restart.
double spectral_norm(const Matrix& M, double tol = 1e-10);
inline double spectral_norm(const Unfolding& U, double tol = 1e-10) { return spectral_norm(U.matrix, tol); }

// Balanced unfolding norm ||T||_{{1..floor(k/2)}, rest}.
double balanced_spectral_norm(const SymTensor& T, double tol = 1e-10);

// Best value of <T, x^{(x)k}> over symmetric tensor power iterations from
// random starts. A lower bound on the injective norm; never an estimate of it.
double injective_norm_lb(const SymTensor& T, int restarts, int iters, std::uint64_t seed);

// M[a,b] = sum_{i in [d]^k} T[a,b,i] g[i] for T of order k+2, g of length d^k.
Matrix contract(const SymTensor& T, const Vector& g);

// Projectors on R^{d^2}: onto the symmetric subspace, optionally minus the
// direction Phi = (1/sqrt d) sum_i e_i (x) e_i.
class SymProjector {
public:
    enum class Variant { symmetric_subspace, symmetric_minus_phi };

    SymProjector(int d, Variant v) : d_(d), variant_(v) {}

    int dim() const { return d_; }
    Variant variant() const { return variant_; }

    Vector apply(const Vector& v) const;

    static Vector phi(int d) {
        Vector p = Vector::Zero(static_cast<Eigen::Index>(d) * d);
        double c = 1.0 / std::sqrt(static_cast<double>(d));
        for (int i = 0; i < d; ++i) p(static_cast<Eigen::Index>(i) * d + i) = c;
        return p;
    }

private:
    int d_;
    Variant variant_;
};

inline Vector sym_project(const Vector& v, const SymProjector& p) { return p.apply(v); }

// Tensor file format: JSON header {d, k, layout:"dense-rowmajor"} with either
// a base64 float64 payload inline or a raw .f64 sidecar file. Round-trips are
// bit-exact.
void write_tensor(const SymTensor& T, const std::string& path, bool sidecar = false);
SymTensor read_tensor(const std::string& path, std::size_t memory_budget = SymTensor::kDefaultBudget);

} // namespace sosdec
