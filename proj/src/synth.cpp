#include "sosdec/synth.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>

namespace sosdec {

namespace {

Vector gaussian_vector(Rng& rng, int d) {
    Vector v(d);
    for (int i = 0; i < d; ++i) v(i) = rng.next_gaussian();
    return v;
}

} // namespace

std::vector<Vector> gen_components(ComponentKind kind, int d, int n, std::uint64_t seed,
                                   const GenOptions& opts) {
    Rng rng = Rng(seed).sub("components");
    std::vector<Vector> out;
    switch (kind) {
    case ComponentKind::orthonormal: {
        if (n > d) throw std::invalid_argument("gen_components: orthonormal requires n <= d");
        Matrix Gauss(d, n);
        for (int j = 0; j < n; ++j) Gauss.col(j) = gaussian_vector(rng, d);
        Eigen::HouseholderQR<Matrix> qr(Gauss);
        Matrix Q = qr.householderQ() * Matrix::Identity(d, n);
        for (int j = 0; j < n; ++j) out.push_back(Q.col(j));
        break;
    }
    case ComponentKind::sphere: {
        for (int j = 0; j < n; ++j) {
            Vector v = gaussian_vector(rng, d);
            out.push_back(v / v.norm());
        }
        break;
    }
    case ComponentKind::separated: {
        int draws = 0;
        double achieved = 0.0;
        while (static_cast<int>(out.size()) < n) {
            if (++draws > opts.max_rejections)
                throw std::runtime_error("gen_components: separated rejection sampling failed; achieved rho " +
                                         std::to_string(achieved));
            Vector v = gaussian_vector(rng, d);
            v /= v.norm();
            double worst = 0.0;
            for (const Vector& a : out) worst = std::max(worst, std::abs(a.dot(v)));
            achieved = std::max(achieved, worst);
            if (worst <= opts.rho) out.push_back(v);
        }
        break;
    }
    case ComponentKind::smoothed: {
        std::vector<Vector> base = opts.base;
        if (base.empty())
            base = gen_components(ComponentKind::sphere, d, n, seed ^ 0x5ba5eull, opts);
        if (static_cast<int>(base.size()) != n)
            throw std::invalid_argument("gen_components: smoothed base size mismatch");
        double scale = opts.gamma / std::sqrt(static_cast<double>(d));
        for (int j = 0; j < n; ++j) out.push_back(base[static_cast<std::size_t>(j)] + scale * gaussian_vector(rng, d));
        break;
    }
    }
    return out;
}

PlantedInstance plant(const std::vector<Vector>& components, int k, double noise_target,
                      NoiseModel model, std::uint64_t seed, std::size_t memory_budget) {
    if (noise_target < 0) throw std::invalid_argument("plant: noise_target must be >= 0");
    if (components.empty()) throw std::invalid_argument("plant: no components");
    const int d = static_cast<int>(components[0].size());

    PlantedInstance inst{std::vector<Vector>{}, SymTensor(d, k, memory_budget), noise_target, model, seed, 0.0};
    inst.components = components;
    for (const Vector& a : components) inst.tensor.add_rank_one(a);

    if (noise_target > 0) {
        Rng rng = Rng(seed).sub("noise");
        SymTensor E(d, k, memory_budget);
        if (model == NoiseModel::gaussian_sym) {
            for (std::size_t i = 0; i < E.size(); ++i) E[i] = rng.next_gaussian();
            E.symmetrize();
        } else {
            Vector v = gaussian_vector(rng, d);
            v /= v.norm();
            E.add_rank_one(v);
        }
        double measured = balanced_spectral_norm(E);
        if (measured <= 0) throw std::runtime_error("plant: degenerate noise draw");
        E *= noise_target / measured;
        inst.tensor += E;
        inst.noise_achieved = noise_target;
    }
    return inst;
}

void write_instance(const PlantedInstance& inst, const std::string& prefix) {
    write_tensor(inst.tensor, prefix + ".tensor.json");
    nlohmann::json j;
    j["d"] = static_cast<int>(inst.components[0].size());
    j["k"] = inst.tensor.order();
    j["n"] = static_cast<int>(inst.components.size());
    nlohmann::json comps = nlohmann::json::array();
    for (const Vector& a : inst.components) {
        nlohmann::json row = nlohmann::json::array();
        for (int i = 0; i < a.size(); ++i) row.push_back(a(i));
        comps.push_back(row);
    }
    j["components"] = comps;
    j["noise_target"] = inst.noise_target;
    j["noise_model"] = inst.noise_model == NoiseModel::gaussian_sym ? "gaussian_sym" : "spiked";
    j["noise_seed"] = inst.noise_seed;
    j["noise_achieved"] = inst.noise_achieved;
    std::ofstream f(prefix + ".truth.json");
    if (!f) throw std::runtime_error("write_instance: cannot open " + prefix + ".truth.json");
    f << j.dump(2) << "\n";
}

PlantedInstance read_instance(const std::string& prefix, std::size_t memory_budget) {
    SymTensor T = read_tensor(prefix + ".tensor.json", memory_budget);
    std::ifstream f(prefix + ".truth.json");
    if (!f) throw std::runtime_error("read_instance: cannot open " + prefix + ".truth.json");
    nlohmann::json j = nlohmann::json::parse(f);
    PlantedInstance inst{std::vector<Vector>{}, std::move(T), 0.0, NoiseModel::gaussian_sym, 0, 0.0};
    for (const auto& row : j.at("components")) {
        Vector a(static_cast<Eigen::Index>(row.size()));
        for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = row[static_cast<std::size_t>(i)].get<double>();
        inst.components.push_back(a);
    }
    inst.noise_target = j.value("noise_target", 0.0);
    inst.noise_model = j.value("noise_model", std::string("gaussian_sym")) == "spiked"
                           ? NoiseModel::spiked
                           : NoiseModel::gaussian_sym;
    inst.noise_seed = j.value("noise_seed", 0ull);
    inst.noise_achieved = j.value("noise_achieved", 0.0);
    return inst;
}

namespace {

double pair_dist(const Vector& x, const Vector& y, bool mod_sign) {
    double dplus = (x - y).norm();
    if (!mod_sign) return dplus;
    return std::min(dplus, (x + y).norm());
}

} // namespace

double hausdorff(const std::vector<Vector>& X, const std::vector<Vector>& Y, bool mod_sign) {
    if (X.empty() || Y.empty()) throw std::invalid_argument("hausdorff: sets must be nonempty");
    double h = 0.0;
    for (const Vector& x : X) {
        double best = std::numeric_limits<double>::infinity();
        for (const Vector& y : Y) best = std::min(best, pair_dist(x, y, mod_sign));
        h = std::max(h, best);
    }
    for (const Vector& y : Y) {
        double best = std::numeric_limits<double>::infinity();
        for (const Vector& x : X) best = std::min(best, pair_dist(x, y, mod_sign));
        h = std::max(h, best);
    }
    return h;
}

namespace {

// Perfect matching of all right nodes (recovered) into left nodes (truth)
// using only edges with cost <= limit. Kuhn's augmenting paths.
bool feasible_matching(const Matrix& cost, double limit, std::vector<int>& match_truth) {
    const int nt = static_cast<int>(cost.rows());
    const int nr = static_cast<int>(cost.cols());
    match_truth.assign(static_cast<std::size_t>(nt), -1);
    std::vector<int> match_rec(static_cast<std::size_t>(nr), -1);
    for (int r = 0; r < nr; ++r) {
        std::vector<char> visited(static_cast<std::size_t>(nt), 0);
        auto try_augment = [&](auto&& self, int rec) -> bool {
            for (int t = 0; t < nt; ++t) {
                if (visited[static_cast<std::size_t>(t)] || cost(t, rec) > limit) continue;
                visited[static_cast<std::size_t>(t)] = 1;
                if (match_truth[static_cast<std::size_t>(t)] < 0 ||
                    self(self, match_truth[static_cast<std::size_t>(t)])) {
                    match_truth[static_cast<std::size_t>(t)] = rec;
                    match_rec[static_cast<std::size_t>(rec)] = t;
                    return true;
                }
            }
            return false;
        };
        if (!try_augment(try_augment, r)) return false;
    }
    return true;
}

} // namespace

MatchedError matched_error(const std::vector<Vector>& truth, const std::vector<Vector>& recovered,
                           bool mod_sign) {
    if (recovered.size() > truth.size())
        throw std::invalid_argument("matched_error: more recovered than truth components");
    MatchedError out;
    const int nt = static_cast<int>(truth.size());
    const int nr = static_cast<int>(recovered.size());
    if (nr == 0) {
        out.permutation.assign(static_cast<std::size_t>(nt), -1);
        for (int t = 0; t < nt; ++t) out.missing.push_back(t);
        return out;
    }
    Matrix cost(nt, nr);
    std::vector<double> all;
    for (int t = 0; t < nt; ++t)
        for (int r = 0; r < nr; ++r) {
            double c = pair_dist(truth[static_cast<std::size_t>(t)], recovered[static_cast<std::size_t>(r)], mod_sign) /
                       truth[static_cast<std::size_t>(t)].norm();
            cost(t, r) = c;
            all.push_back(c);
        }
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());

    // Bottleneck assignment: smallest threshold admitting a full matching of
    // the recovered set.
    std::vector<int> match;
    int lo = 0, hi = static_cast<int>(all.size()) - 1, best = hi;
    while (lo <= hi) {
        int mid = (lo + hi) / 2;
        std::vector<int> m;
        if (feasible_matching(cost, all[static_cast<std::size_t>(mid)], m)) {
            best = mid;
            match = m;
            hi = mid - 1;
        } else {
            lo = mid + 1;
        }
    }
    if (match.empty()) feasible_matching(cost, all.back(), match);

    out.permutation = match;
    for (int t = 0; t < nt; ++t) {
        if (match[static_cast<std::size_t>(t)] < 0) {
            out.missing.push_back(t);
        } else {
            double e = cost(t, match[static_cast<std::size_t>(t)]);
            out.errors.push_back(e);
            out.max_error = std::max(out.max_error, e);
        }
    }
    return out;
}

} // namespace sosdec
