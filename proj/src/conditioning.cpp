#include "sosdec/conditioning.hpp"

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <sstream>

#include "sosdec/rng.hpp"

namespace sosdec {

Matrix build_B(const std::vector<Vector>& components, std::size_t memory_budget) {
    const int n = static_cast<int>(components.size());
    if (n < 2) throw std::invalid_argument("build_B: need at least two components");
    const int d = static_cast<int>(components[0].size());
    std::size_t rows = static_cast<std::size_t>(d) * d * d * d;
    std::size_t cols = static_cast<std::size_t>(n) * (n - 1);
    if (rows * cols > memory_budget)
        throw std::runtime_error("build_B: d^4 * n(n-1) exceeds memory budget; use the Gram path (gram_B)");
    Matrix B(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    int col = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            const Vector& ai = components[static_cast<std::size_t>(i)];
            const Vector& aj = components[static_cast<std::size_t>(j)];
            // b_{i,j}[p,q,r,s] = ai_p ai_q aj_r aj_s - ai_p aj_q ai_r aj_s
            std::size_t flat = 0;
            for (int p = 0; p < d; ++p)
                for (int q = 0; q < d; ++q)
                    for (int r = 0; r < d; ++r)
                        for (int s = 0; s < d; ++s) {
                            B(static_cast<Eigen::Index>(flat), col) =
                                ai(p) * ai(q) * aj(r) * aj(s) - ai(p) * aj(q) * ai(r) * aj(s);
                            ++flat;
                        }
            ++col;
        }
    return B;
}

Matrix gram_Q(const std::vector<Vector>& components) {
    const int n = static_cast<int>(components.size());
    Matrix G(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double ip = components[static_cast<std::size_t>(i)].dot(components[static_cast<std::size_t>(j)]);
            G(i, j) = ip * ip;
        }
    return G;
}

Matrix gram_B(const std::vector<Vector>& components) {
    const int n = static_cast<int>(components.size());
    Matrix G(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            G(i, j) = components[static_cast<std::size_t>(i)].dot(components[static_cast<std::size_t>(j)]);

    const int m = n * (n - 1);
    Matrix GB(m, m);
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j) pairs.emplace_back(i, j);
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) {
            auto [i, j] = pairs[static_cast<std::size_t>(a)];
            auto [k, l] = pairs[static_cast<std::size_t>(b)];
            double gik = G(i, k), gjl = G(j, l), gil = G(i, l), gjk = G(j, k);
            GB(a, b) = 2.0 * gik * gik * gjl * gjl - 2.0 * gik * gil * gjk * gjl;
        }
    return GB;
}

ConditionReport kappa(const std::vector<Vector>& components) {
    auto t0 = std::chrono::steady_clock::now();
    const int n = static_cast<int>(components.size());
    const int d = static_cast<int>(components[0].size());
    if (n > d * d) throw std::invalid_argument("kappa: n must be at most d^2");

    ConditionReport rep;
    rep.d = d;
    rep.n = n;

    // Nonzero spectrum of Q = AA^T equals the spectrum of A^T A (n x n).
    Eigen::SelfAdjointEigenSolver<Matrix> esQ(gram_Q(components), Eigen::EigenvaluesOnly);
    rep.sigma_max_Q = esQ.eigenvalues().maxCoeff();
    rep.sigma_n_Q = esQ.eigenvalues().minCoeff();

    Eigen::SelfAdjointEigenSolver<Matrix> esB(gram_B(components), Eigen::EigenvaluesOnly);
    double lam_min_B = std::max(esB.eigenvalues().minCoeff(), 0.0);
    rep.sigma_min_B = std::sqrt(lam_min_B);

    if (rep.sigma_n_Q <= 1e-12)
        throw DegenerateInput("kappa: sigma_n(Q) vanishes (rank-deficient lifted components)");
    if (rep.sigma_min_B <= 1e-12)
        throw DegenerateInput("kappa: sigma_min(B) vanishes (cross-term matrix rank-deficient)");

    rep.kappa = std::pow(rep.sigma_max_Q / rep.sigma_n_Q, 1.5) +
                std::pow(rep.sigma_max_Q, 2.5) /
                    (rep.sigma_min_B * rep.sigma_min_B * std::sqrt(rep.sigma_n_Q));
    rep.elapsed_sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

double leave_one_out(const Matrix& M) {
    const int n = static_cast<int>(M.cols());
    if (n < 2) throw std::invalid_argument("leave_one_out: need at least two columns");
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        Matrix rest(M.rows(), n - 1);
        int c = 0;
        for (int j = 0; j < n; ++j)
            if (j != i) rest.col(c++) = M.col(j);
        Eigen::ColPivHouseholderQR<Matrix> qr(rest);
        Matrix Qthin = qr.householderQ() * Matrix::Identity(M.rows(), qr.rank());
        Vector mi = M.col(i);
        Vector resid = mi - Qthin * (Qthin.transpose() * mi);
        best = std::min(best, resid.norm());
    }
    return best;
}

double sin_theta(const Matrix& S_basis, const Matrix& T_basis) {
    auto check = [](const Matrix& B, const char* name) {
        Matrix G = B.transpose() * B;
        double dev = (G - Matrix::Identity(B.cols(), B.cols())).cwiseAbs().maxCoeff();
        if (dev > 1e-8)
            throw std::invalid_argument(std::string("sin_theta: basis ") + name + " not orthonormal");
    };
    check(S_basis, "S");
    check(T_basis, "T");
    Matrix Ps = S_basis * S_basis.transpose();
    Matrix Pt = T_basis * T_basis.transpose();
    return spectral_norm(Matrix(Ps - Pt * Ps));
}

SmoothedTrialRecord smoothed_trial(const std::vector<Vector>& base, double gamma,
                                   double noise_delta, std::uint64_t seed) {
    const int n = static_cast<int>(base.size());
    const int d = static_cast<int>(base[0].size());
    SmoothedTrialRecord rec;
    rec.seed = seed;
    rec.gamma = gamma;
    if (noise_delta > 0) rec.noise_delta = noise_delta;

    Rng rng = Rng(seed).sub("smoothed");
    std::vector<Vector> perturbed;
    double scale = gamma / std::sqrt(static_cast<double>(d));
    for (int i = 0; i < n; ++i) {
        Vector g(d);
        for (int j = 0; j < d; ++j) g(j) = rng.next_gaussian();
        perturbed.push_back(base[static_cast<std::size_t>(i)] + scale * g);
    }
    try {
        rec.report = kappa(perturbed);
    } catch (const DegenerateInput&) {
        rec.report.d = d;
        rec.report.n = n;
        rec.report.sigma_min_B = 0.0;
        rec.report.kappa = std::numeric_limits<double>::infinity();
    }
    return rec;
}

std::string smoothed_csv_header() { return "seed,gamma,sigma_min_B,sigma_n_Q,kappa,noise_delta,recovery_error"; }

std::string smoothed_csv_row(const SmoothedTrialRecord& rec) {
    std::ostringstream os;
    os.precision(17);
    os << rec.seed << "," << rec.gamma << "," << rec.report.sigma_min_B << ","
       << rec.report.sigma_n_Q << "," << rec.report.kappa << ",";
    if (rec.noise_delta) os << *rec.noise_delta;
    os << ",";
    if (rec.recovery_error) os << *rec.recovery_error;
    return os.str();
}

} // namespace sosdec
