#include "sosdec/tensor.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

namespace sosdec {

namespace {

// Iterate all multi-indices in [0,d)^k in row-major order.
inline bool next_index(std::vector<int>& idx, int d) {
    for (int i = static_cast<int>(idx.size()) - 1; i >= 0; --i) {
        if (++idx[i] < d) return true;
        idx[i] = 0;
    }
    return false;
}

} // namespace

void SymTensor::symmetrize() {
    const int d = d_, k = k_;
    std::vector<double> sums(entries_.size(), 0.0);
    std::vector<std::int64_t> counts(entries_.size(), 0);
    std::vector<int> idx(k, 0), sorted(k);
    std::size_t flat = 0;
    do {
        sorted = idx;
        std::sort(sorted.begin(), sorted.end());
        std::size_t target = flatten(sorted);
        sums[target] += entries_[flat];
        counts[target] += 1;
        ++flat;
    } while (next_index(idx, d));

    std::fill(idx.begin(), idx.end(), 0);
    flat = 0;
    do {
        sorted = idx;
        std::sort(sorted.begin(), sorted.end());
        std::size_t target = flatten(sorted);
        entries_[flat] = sums[target] / static_cast<double>(counts[target]);
        ++flat;
    } while (next_index(idx, d));
}

double SymTensor::symmetry_defect() const {
    const int d = d_, k = k_;
    if (k == 1) return 0.0;
    double defect = 0.0;
    std::vector<int> idx(k, 0), swapped(k);
    std::size_t flat = 0;
    do {
        for (int t = 0; t + 1 < k; ++t) {
            if (idx[t] == idx[t + 1]) continue;
            swapped = idx;
            std::swap(swapped[t], swapped[t + 1]);
            defect = std::max(defect, std::abs(entries_[flat] - entries_[flatten(swapped)]));
        }
        ++flat;
    } while (next_index(idx, d));
    return defect;
}

SymTensor& SymTensor::operator+=(const SymTensor& o) {
    if (o.d_ != d_ || o.k_ != k_) throw std::invalid_argument("SymTensor: shape mismatch");
    for (std::size_t i = 0; i < entries_.size(); ++i) entries_[i] += o.entries_[i];
    return *this;
}

SymTensor& SymTensor::operator-=(const SymTensor& o) {
    if (o.d_ != d_ || o.k_ != k_) throw std::invalid_argument("SymTensor: shape mismatch");
    for (std::size_t i = 0; i < entries_.size(); ++i) entries_[i] -= o.entries_[i];
    return *this;
}

SymTensor& SymTensor::operator*=(double c) {
    for (double& e : entries_) e *= c;
    return *this;
}

void SymTensor::add_rank_one(const Vector& v, double c) {
    if (v.size() != d_) throw std::invalid_argument("SymTensor: rank-one vector dimension mismatch");
    // Build iteratively: outer[j] over first j modes.
    std::vector<double> cur(1, c);
    for (int mode = 0; mode < k_; ++mode) {
        std::vector<double> nxt(cur.size() * d_);
        std::size_t p = 0;
        for (double base : cur)
            for (int i = 0; i < d_; ++i) nxt[p++] = base * v(i);
        cur.swap(nxt);
    }
    for (std::size_t i = 0; i < entries_.size(); ++i) entries_[i] += cur[i];
}

double SymTensor::eval_power(const Vector& x) const {
    return contract_all_but_first(x).dot(x);
}

Vector SymTensor::contract_all_but_first(const Vector& x) const {
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    // Contract the last mode out of the raw data into a scratch buffer, then
    // reduce the scratch in place; avoids copying the full tensor.
    std::size_t len = entries_.size() / static_cast<std::size_t>(d_);
    Vector cur = Eigen::Map<const RowMat>(entries_.data(), static_cast<Eigen::Index>(len), d_) * x;
    for (int mode = k_ - 2; mode >= 1; --mode) {
        len /= d_;
        Vector next = Eigen::Map<const RowMat>(cur.data(), static_cast<Eigen::Index>(len), d_) * x;
        cur.swap(next);
    }
    return cur;
}

Unfolding unfold(const SymTensor& T, const std::vector<int>& row_modes) {
    const int d = T.dim(), k = T.order();
    std::vector<int> rm = row_modes;
    std::sort(rm.begin(), rm.end());
    if (rm.empty() || static_cast<int>(rm.size()) >= k)
        throw std::invalid_argument("unfold: row_modes must be a nonempty proper subset of modes");
    for (std::size_t i = 0; i < rm.size(); ++i) {
        if (rm[i] < 0 || rm[i] >= k) throw std::invalid_argument("unfold: mode out of range");
        if (i > 0 && rm[i] == rm[i - 1]) throw std::invalid_argument("unfold: duplicate mode");
    }
    std::vector<int> cm;
    for (int m = 0; m < k; ++m)
        if (!std::binary_search(rm.begin(), rm.end(), m)) cm.push_back(m);

    std::size_t rows = 1, cols = 1;
    for (std::size_t i = 0; i < rm.size(); ++i) rows *= static_cast<std::size_t>(d);
    for (std::size_t i = 0; i < cm.size(); ++i) cols *= static_cast<std::size_t>(d);

    Unfolding U;
    U.d = d;
    U.k = k;
    U.row_modes = rm;
    U.col_modes = cm;
    U.matrix.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));

    std::vector<int> idx(k, 0);
    std::size_t flat = 0;
    do {
        std::size_t r = 0, c = 0;
        for (int m : rm) r = r * d + static_cast<std::size_t>(idx[m]);
        for (int m : cm) c = c * d + static_cast<std::size_t>(idx[m]);
        U.matrix(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = T[flat];
        ++flat;
    } while (next_index(idx, d));
    return U;
}

SymTensor fold(const Unfolding& U, std::size_t memory_budget) {
    SymTensor T(U.d, U.k, memory_budget);
    const int d = U.d, k = U.k;
    std::vector<int> idx(k, 0);
    std::size_t flat = 0;
    do {
        std::size_t r = 0, c = 0;
        for (int m : U.row_modes) r = r * d + static_cast<std::size_t>(idx[m]);
        for (int m : U.col_modes) c = c * d + static_cast<std::size_t>(idx[m]);
        T[flat] = U.matrix(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        ++flat;
    } while (next_index(idx, d));
    return T;
}

double spectral_norm(const Matrix& M, double tol) {
    if (tol <= 0) throw std::invalid_argument("spectral_norm: tol must be positive");
    const Eigen::Index rows = M.rows(), cols = M.cols();
    if (rows == 0 || cols == 0) return 0.0;
    if (std::min(rows, cols) <= 2000) {
        if (std::min(rows, cols) <= 16) {
            Eigen::JacobiSVD<Matrix> svd(M);
            return svd.singularValues()(0);
        }
        Eigen::BDCSVD<Matrix> svd(M);
        return svd.singularValues()(0);
    }
    // Power iteration on the Gram operator, deterministic start + one restart.
    const Matrix& A = M;
    auto run = [&](std::uint64_t seed) {
        Rng rng(seed);
        Vector v(cols);
        for (Eigen::Index i = 0; i < cols; ++i) v(i) = rng.next_gaussian();
        v.normalize();
        double sigma = 0.0;
        for (int it = 0; it < 10000; ++it) {
            Vector w = A * v;
            double s = w.norm();
            if (s == 0.0) return 0.0;
            v = A.transpose() * w;
            v /= v.norm();
            if (it > 2 && std::abs(s - sigma) <= tol * std::max(1.0, s)) return s;
            sigma = s;
        }
        return sigma;
    };
    return std::max(run(12345), run(67890));
}

double balanced_spectral_norm(const SymTensor& T, double tol) {
    std::vector<int> rm;
    for (int m = 0; m < T.order() / 2; ++m) rm.push_back(m);
    if (rm.empty()) rm.push_back(0);
    return spectral_norm(unfold(T, rm), tol);
}

double injective_norm_lb(const SymTensor& T, int restarts, int iters, std::uint64_t seed) {
    if (restarts < 1) throw std::invalid_argument("injective_norm_lb: restarts must be >= 1");
    const int d = T.dim();
    Rng rng(seed);
    double best = 0.0;
    for (int r = 0; r < restarts; ++r) {
        Vector x(d);
        for (int i = 0; i < d; ++i) x(i) = rng.next_gaussian();
        double nx = x.norm();
        if (nx == 0.0) continue;
        x /= nx;
        for (int it = 0; it < iters; ++it) {
            Vector y = T.contract_all_but_first(x);
            double ny = y.norm();
            if (ny < 1e-300) break;
            x = y / ny;
        }
        best = std::max(best, std::abs(T.eval_power(x)));
    }
    return best;
}

Matrix contract(const SymTensor& T, const Vector& g) {
    const int d = T.dim();
    const int k = T.order() - 2;
    if (k < 1) throw std::invalid_argument("contract: tensor order must be at least 3");
    std::size_t inner = 1;
    for (int i = 0; i < k; ++i) inner *= static_cast<std::size_t>(d);
    if (static_cast<std::size_t>(g.size()) != inner)
        throw std::invalid_argument("contract: contraction vector has wrong length");
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Vector flat = Eigen::Map<const RowMat>(T.data(), static_cast<Eigen::Index>(d) * d,
                                           static_cast<Eigen::Index>(inner)) *
                  g;
    Matrix M(d, d);
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) M(a, b) = flat(static_cast<Eigen::Index>(a) * d + b);
    return M;
}

Vector SymProjector::apply(const Vector& v) const {
    if (v.size() != static_cast<Eigen::Index>(d_) * d_)
        throw std::invalid_argument("SymProjector: vector must have length d^2");
    Vector w(v.size());
    for (int i = 0; i < d_; ++i)
        for (int j = 0; j < d_; ++j) {
            Eigen::Index ij = static_cast<Eigen::Index>(i) * d_ + j;
            Eigen::Index ji = static_cast<Eigen::Index>(j) * d_ + i;
            w(ij) = 0.5 * (v(ij) + v(ji));
        }
    if (variant_ == Variant::symmetric_minus_phi) {
        Vector p = phi(d_);
        w -= p.dot(w) * p;
    }
    return w;
}

namespace {

const char kB64Alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const unsigned char* data, std::size_t n) {
    std::string out;
    out.reserve((n + 2) / 3 * 4);
    for (std::size_t i = 0; i < n; i += 3) {
        unsigned v = data[i] << 16;
        if (i + 1 < n) v |= data[i + 1] << 8;
        if (i + 2 < n) v |= data[i + 2];
        out += kB64Alphabet[(v >> 18) & 63];
        out += kB64Alphabet[(v >> 12) & 63];
        out += (i + 1 < n) ? kB64Alphabet[(v >> 6) & 63] : '=';
        out += (i + 2 < n) ? kB64Alphabet[v & 63] : '=';
    }
    return out;
}

std::vector<unsigned char> base64_decode(const std::string& s) {
    auto val = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    std::vector<unsigned char> out;
    out.reserve(s.size() / 4 * 3);
    int acc = 0, bits = 0;
    for (char c : s) {
        int v = val(c);
        if (v < 0) continue;
        acc = (acc << 6) | v;
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<unsigned char>((acc >> bits) & 0xff));
        }
    }
    return out;
}

} // namespace

void write_tensor(const SymTensor& T, const std::string& path, bool sidecar) {
    nlohmann::json header;
    header["d"] = T.dim();
    header["k"] = T.order();
    header["layout"] = "dense-rowmajor";
    const auto* bytes = reinterpret_cast<const unsigned char*>(T.data());
    std::size_t nbytes = T.size() * sizeof(double);
    if (sidecar) {
        std::string raw_path = path + ".f64";
        std::string raw_name = raw_path;
        auto slash = raw_name.find_last_of('/');
        if (slash != std::string::npos) raw_name = raw_name.substr(slash + 1);
        header["payload"] = raw_name;
        std::ofstream raw(raw_path, std::ios::binary);
        if (!raw) throw std::runtime_error("write_tensor: cannot open " + raw_path);
        raw.write(reinterpret_cast<const char*>(bytes), static_cast<std::streamsize>(nbytes));
    } else {
        header["data_base64"] = base64_encode(bytes, nbytes);
    }
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_tensor: cannot open " + path);
    f << header.dump(2) << "\n";
}

SymTensor read_tensor(const std::string& path, std::size_t memory_budget) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("read_tensor: cannot open " + path);
    nlohmann::json header = nlohmann::json::parse(f);
    int d = header.at("d").get<int>();
    int k = header.at("k").get<int>();
    if (header.at("layout").get<std::string>() != "dense-rowmajor")
        throw std::runtime_error("read_tensor: unsupported layout");
    SymTensor T(d, k, memory_budget);
    std::size_t nbytes = T.size() * sizeof(double);
    if (header.contains("data_base64")) {
        auto bytes = base64_decode(header["data_base64"].get<std::string>());
        if (bytes.size() != nbytes) throw std::runtime_error("read_tensor: payload size mismatch");
        std::copy(bytes.begin(), bytes.end(), reinterpret_cast<unsigned char*>(T.data()));
    } else {
        std::string raw_name = header.at("payload").get<std::string>();
        std::string dir;
        auto slash = path.find_last_of('/');
        if (slash != std::string::npos) dir = path.substr(0, slash + 1);
        std::ifstream raw(dir + raw_name, std::ios::binary);
        if (!raw) throw std::runtime_error("read_tensor: cannot open payload " + dir + raw_name);
        raw.read(reinterpret_cast<char*>(T.data()), static_cast<std::streamsize>(nbytes));
        if (raw.gcount() != static_cast<std::streamsize>(nbytes))
            throw std::runtime_error("read_tensor: payload truncated");
    }
    return T;
}

} // namespace sosdec
