#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sosdec/lift.hpp"
#include "sosdec/polynomial.hpp"

namespace sosdec {

struct BlockTerm {
    int mono;    // index into the program's monomial table
    double coef;
};

// Upper-triangle entry (r <= c) of a PSD block; the (c,r) position is implied.
struct BlockEntry {
    int r, c;
    std::uint32_t term_begin, term_count; // range in PsdBlock::terms
};

struct PsdBlock {
    std::string label;
    int dim = 0;
    std::vector<BlockEntry> entries;
    std::vector<BlockTerm> terms;

    void add_entry(int r, int c, const std::vector<BlockTerm>& ts) {
        entries.push_back({r, c, static_cast<std::uint32_t>(terms.size()),
                           static_cast<std::uint32_t>(ts.size())});
        terms.insert(terms.end(), ts.begin(), ts.end());
    }

    Matrix evaluate(const Vector& y) const;
};

struct EqRow {
    std::vector<BlockTerm> terms;
    double rhs = 0.0;
    std::string label;
};

// Compiled moment-matrix feasibility program: one PSD block per moment /
// localizing matrix, affine equality rows, and an optional spectral cap
// block c*Id - E[P(u)P(u)^T] >= 0 in lifted coordinates.
struct MomentProgram {
    int d = 0;
    int D = 0;
    std::shared_ptr<const MonomialTable> table;
    std::vector<PsdBlock> blocks; // blocks[0] is the moment matrix
    std::vector<EqRow> equalities;
    std::optional<double> cap;
    std::optional<LiftMap> lift;

    // Detected structural facts, used by validation.
    bool has_norm_equality = false;  // ||u||^2 = r^2 among the constraints
    double ball_radius_sq = 0.0;     // r^2 if ||u||^2 <= r^2 or = r^2 imposed, else 0
    int num_vars() const { return table->size(); }

    std::string dump_json() const;
};

MomentProgram compile(const std::vector<PolyConstraint>& constraints, int d, int D,
                      const LiftMap* lift = nullptr, std::optional<double> cap = std::nullopt,
                      int product_budget = 1);

// Feasibility report of an explicit moment vector against a program;
// used to check witness distributions directly.
struct WitnessReport {
    double max_eq_violation = 0.0;
    double min_block_eig = 0.0; // most negative eigenvalue over all blocks
    bool feasible(double tol) const {
        return max_eq_violation <= tol && min_block_eig >= -tol;
    }
};

WitnessReport check_witness(const MomentProgram& prog, const Vector& y);

// Exact moments of a finite mixture sum_i w_i * delta_{x_i} on the program's
// monomial table (independent oracle for tests and witness checks).
Vector moments_of_mixture(const MonomialTable& table, const std::vector<Vector>& points,
                          const std::vector<double>& weights);

} // namespace sosdec
