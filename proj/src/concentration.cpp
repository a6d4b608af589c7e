#include "sosdec/concentration.hpp"

#include <cmath>
#include <sstream>

namespace sosdec {

namespace {

// Dense tensor with arbitrary mode sizes, row-major.
struct GeneralTensor {
    std::vector<int> dims;
    std::vector<double> data;

    std::size_t size() const { return data.size(); }
};

Matrix unfold_general(const GeneralTensor& T, const std::vector<int>& row_modes) {
    const int k = static_cast<int>(T.dims.size());
    std::vector<char> is_row(static_cast<std::size_t>(k), 0);
    for (int m : row_modes) is_row[static_cast<std::size_t>(m)] = 1;
    std::size_t rows = 1, cols = 1;
    for (int m = 0; m < k; ++m)
        (is_row[static_cast<std::size_t>(m)] ? rows : cols) *= static_cast<std::size_t>(T.dims[static_cast<std::size_t>(m)]);
    Matrix M(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    std::vector<int> idx(static_cast<std::size_t>(k), 0);
    std::size_t flat = 0;
    bool done = false;
    while (!done) {
        std::size_t r = 0, c = 0;
        for (int m = 0; m < k; ++m) {
            if (is_row[static_cast<std::size_t>(m)])
                r = r * static_cast<std::size_t>(T.dims[static_cast<std::size_t>(m)]) + static_cast<std::size_t>(idx[static_cast<std::size_t>(m)]);
            else
                c = c * static_cast<std::size_t>(T.dims[static_cast<std::size_t>(m)]) + static_cast<std::size_t>(idx[static_cast<std::size_t>(m)]);
        }
        M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = T.data[flat];
        ++flat;
        done = true;
        for (int i = k - 1; i >= 0; --i) {
            if (++idx[static_cast<std::size_t>(i)] < T.dims[static_cast<std::size_t>(i)]) {
                done = false;
                break;
            }
            idx[static_cast<std::size_t>(i)] = 0;
        }
    }
    return M;
}

} // namespace

ConcentrationTable concentration_harness(const ConcentrationSpec& spec) {
    if (spec.samples < 100) throw std::invalid_argument("concentration_harness: samples must be >= 100");
    if (spec.cov_scale < 0.0 || spec.cov_scale > 1.0)
        throw std::invalid_argument("concentration_harness: cov_scale must lie in [0,1]");
    const int s = static_cast<int>(spec.r_dims.size());
    if (s < 1) throw std::invalid_argument("concentration_harness: need at least one contracted mode");

    GeneralTensor T;
    T.dims = {spec.p, spec.q};
    for (int r : spec.r_dims) T.dims.push_back(r);
    std::size_t total = 1;
    for (int dim : T.dims) total *= static_cast<std::size_t>(dim);
    if (spec.fixed_tensor) {
        if (spec.fixed_tensor->size() != total)
            throw std::invalid_argument("concentration_harness: fixed tensor has wrong size");
        T.data = *spec.fixed_tensor;
    } else {
        Rng rng = Rng(spec.seed).sub("tensor");
        T.data.resize(total);
        for (double& v : T.data) v = rng.next_gaussian();
    }

    // sigma = max over unfoldings that put mode 0 on rows and mode 1 on
    // columns, contracted modes distributed arbitrarily.
    ConcentrationTable table;
    table.sigma = 0.0;
    for (int mask = 0; mask < (1 << s); ++mask) {
        std::vector<int> rm = {0};
        for (int j = 0; j < s; ++j)
            if (mask & (1 << j)) rm.push_back(2 + j);
        table.sigma = std::max(table.sigma, spectral_norm(unfold_general(T, rm)));
    }

    std::vector<std::size_t> exceed(spec.t_grid.size(), 0);
    Rng grng = Rng(spec.seed).sub("contractions");
    std::size_t inner = 1;
    for (int r : spec.r_dims) inner *= static_cast<std::size_t>(r);
    std::vector<double> gprod(inner);
    double gscale = std::sqrt(spec.cov_scale);
    for (int sample = 0; sample < spec.samples; ++sample) {
        // Product of per-mode Gaussian contraction weights over the trailing modes.
        std::vector<Vector> gs;
        for (int j = 0; j < s; ++j) {
            Vector g(spec.r_dims[static_cast<std::size_t>(j)]);
            for (int i = 0; i < g.size(); ++i) g(i) = gscale * grng.next_gaussian();
            gs.push_back(g);
        }
        std::vector<int> idx(static_cast<std::size_t>(s), 0);
        for (std::size_t flat = 0; flat < inner; ++flat) {
            std::size_t f = flat;
            double w = 1.0;
            for (int j = s - 1; j >= 0; --j) {
                int rj = spec.r_dims[static_cast<std::size_t>(j)];
                w *= gs[static_cast<std::size_t>(j)](static_cast<Eigen::Index>(f % static_cast<std::size_t>(rj)));
                f /= static_cast<std::size_t>(rj);
            }
            gprod[flat] = w;
        }
        Matrix M(spec.p, spec.q);
        for (int a = 0; a < spec.p; ++a)
            for (int b = 0; b < spec.q; ++b) {
                const double* slice = T.data.data() + (static_cast<std::size_t>(a) * spec.q + b) * inner;
                double v = 0.0;
                for (std::size_t i = 0; i < inner; ++i) v += slice[i] * gprod[i];
                M(a, b) = v;
            }
        double norm = spectral_norm(M);
        for (std::size_t ti = 0; ti < spec.t_grid.size(); ++ti) {
            double t = spec.t_grid[ti];
            if (norm >= std::pow(t, s) * table.sigma) exceed[ti]++;
        }
    }

    double rbar = 0.0;
    for (int r : spec.r_dims) rbar = std::max(rbar, static_cast<double>(r + 2));
    double slack = 1.0 + 3.0 / std::sqrt(static_cast<double>(spec.samples));
    for (std::size_t ti = 0; ti < spec.t_grid.size(); ++ti) {
        ConcentrationRow row;
        row.t = spec.t_grid[ti];
        row.threshold = std::pow(row.t, s) * table.sigma;
        row.empirical = static_cast<double>(exceed[ti]) / spec.samples;
        double constant = (s >= 2 || spec.general_cov_bound) ? 4.0 : 2.0;
        double multi = s >= 2 ? std::pow(rbar, s - 1) : 1.0;
        row.bound = constant * (spec.p + spec.q) * multi * std::exp(-row.t * row.t / 2.0);
        row.slack_bound = row.bound * slack;
        row.pass = row.empirical <= row.slack_bound;
        if (!row.pass) table.pass = false;
        table.rows.push_back(row);
    }
    return table;
}

std::string ConcentrationTable::to_string() const {
    std::ostringstream os;
    os << "t\tthreshold\tempirical\tbound\tslack_bound\tresult\n";
    for (const auto& r : rows)
        os << r.t << "\t" << r.threshold << "\t" << r.empirical << "\t" << r.bound << "\t"
           << r.slack_bound << "\t" << (r.pass ? "PASS" : "FAIL") << "\n";
    return os.str();
}

std::string ConcentrationTable::to_csv() const {
    std::ostringstream os;
    os << "t,threshold,empirical,bound,slack_bound,pass\n";
    for (const auto& r : rows)
        os << r.t << "," << r.threshold << "," << r.empirical << "," << r.bound << ","
           << r.slack_bound << "," << (r.pass ? 1 : 0) << "\n";
    return os.str();
}

} // namespace sosdec
