#pragma once

#include <optional>
#include <vector>

#include "sosdec/polynomial.hpp"
#include "sosdec/tensor.hpp"

namespace sosdec {

// Polynomial map P: R^d -> R^{d'} used to place target components in
// near-orthonormal position before rounding. Variants:
//   identity            P(u) = u
//   power(p)            P(u) = u^{(x)p}
//   sym_square_minus_phi P(u) = (Id_sym - Phi Phi^T) u^{(x)2}
//   whitened_square(W)  P(u) = W u^{(x)2} for a d'xd^2 whitening matrix
class LiftMap {
public:
    enum class Variant { identity, power, sym_square_minus_phi, whitened_square };

    static LiftMap identity(int d);
    static LiftMap power(int d, int p);
    static LiftMap sym_square_minus_phi(int d);
    static LiftMap whitened_square(int d, const Matrix& W);

    Variant variant() const { return variant_; }
    int input_dim() const { return d_; }
    int output_dim() const { return d_out_; }
    int degree() const { return degree_; }
    const Matrix& whitening() const { return W_; }

    // Entry polynomials P_0(u), ..., P_{d'-1}(u).
    const std::vector<Poly>& entries() const { return entries_; }

    // Numeric evaluation.
    Vector apply(const Vector& x) const;

    // ||P(u)||^2 as a polynomial (degree 2*degree()).
    Poly norm_sq_poly() const;

    // <b, P(u)> as a polynomial.
    Poly inner_poly(const Vector& b) const;

private:
    LiftMap() = default;
    Variant variant_ = Variant::identity;
    int d_ = 0;
    int d_out_ = 0;
    int degree_ = 1;
    Matrix W_;
    std::vector<Poly> entries_;
};

} // namespace sosdec
