#include "tmm/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <numbers>
#include <queue>

#include "tmm/error.hpp"

namespace tmm {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::size_t kMaxSupport = 20'000'000;

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double family_coefficient(ProfileFamily family, double scale, double w) {
    switch (family) {
        case ProfileFamily::constant: return w == 0.0 ? 1.0 : 0.0;
        case ProfileFamily::matern: {
            const double a = 2.0 * kPi * w * scale;
            return 1.0 / (1.0 + a * a);
        }
        case ProfileFamily::gaussian: {
            const double a = kPi * w * scale;
            return std::exp(-a * a);
        }
        case ProfileFamily::custom: break;
    }
    throw std::logic_error("family_coefficient on custom profile");
}

}  // namespace

// ---------------------------------------------------------------------------
// Lattice

Lattice::Lattice(Eigen::MatrixXd generators) : generators_(std::move(generators)) {
    if (generators_.rows() == 0 || generators_.rows() != generators_.cols())
        throw InvalidArgument("lattice generators must form a nonempty square matrix");
    if (!generators_.allFinite()) throw InvalidArgument("lattice generators must be finite");
    const double det = generators_.determinant();
    if (!(std::abs(det) > 1e-12)) throw InvalidArgument("lattice generators are linearly dependent");
    volume_ = std::abs(det);
    dual_ = generators_.inverse().transpose();
    diagonal_ = true;
    for (Eigen::Index i = 0; i < generators_.rows(); ++i)
        for (Eigen::Index j = 0; j < generators_.cols(); ++j)
            if (i != j && generators_(i, j) != 0.0) diagonal_ = false;
    if (diagonal_) {
        // Keep the exact reciprocal on rectangular lattices.
        dual_.setZero();
        for (Eigen::Index i = 0; i < generators_.rows(); ++i) dual_(i, i) = 1.0 / generators_(i, i);
    }
}

Lattice Lattice::unit(int dim) {
    if (dim < 1) throw InvalidArgument("lattice dimension must be positive");
    return Lattice(Eigen::MatrixXd::Identity(dim, dim));
}

Lattice Lattice::rectangular(const Eigen::VectorXd& periods) {
    return Lattice(Eigen::MatrixXd(periods.asDiagonal()));
}

Eigen::VectorXd Lattice::dual_point(std::span<const int> index) const {
    if (static_cast<int>(index.size()) != dim()) throw InvalidArgument("dual index dimension mismatch");
    Eigen::VectorXd a = Eigen::VectorXd::Zero(dim());
    for (int j = 0; j < dim(); ++j) a += static_cast<double>(index[j]) * dual_.row(j).transpose();
    return a;
}

Eigen::VectorXd Lattice::from_cell_coords(Point h) const {
    if (static_cast<int>(h.size()) != dim()) throw InvalidArgument("cell coordinate dimension mismatch");
    return generators_.transpose() * to_vector(h);
}

void Lattice::wrap(std::span<double> x) const {
    const int n = dim();
    if (diagonal_) {
        for (int d = 0; d < n; ++d) {
            const double period = generators_(d, d);
            double c = x[d] / period;
            c -= std::floor(c);
            if (c >= 1.0) c = 0.0;
            x[d] = c * period;
        }
        return;
    }
    Eigen::VectorXd c = dual_ * Eigen::Map<const Eigen::VectorXd>(x.data(), n);
    for (int d = 0; d < n; ++d) {
        c[d] -= std::floor(c[d]);
        if (c[d] >= 1.0) c[d] = 0.0;
    }
    Eigen::Map<Eigen::VectorXd>(x.data(), n) = generators_.transpose() * c;
}

std::string Lattice::id() const {
    if (diagonal_) {
        bool unit = true;
        for (int d = 0; d < dim(); ++d) unit = unit && generators_(d, d) == 1.0;
        if (unit) return "Z^" + std::to_string(dim());
    }
    std::string s = "L[";
    for (Eigen::Index i = 0; i < generators_.size(); ++i) {
        if (i) s += ",";
        s += fmt_double(generators_(i / generators_.cols(), i % generators_.cols()));
    }
    return s + "]";
}

std::string to_string(ProfileFamily family) {
    switch (family) {
        case ProfileFamily::constant: return "constant";
        case ProfileFamily::matern: return "matern";
        case ProfileFamily::gaussian: return "gaussian";
        case ProfileFamily::custom: return "custom";
    }
    return "unknown";
}

std::string to_string(KernelNormalization n) {
    return n == KernelNormalization::none ? "none" : "unit-diagonal";
}

// ---------------------------------------------------------------------------
// SpectralProfile

struct SpectralProfile::State {
    Lattice lattice;
    ProfileFamily family = ProfileFamily::custom;
    double scale = 1.0;
    double eps = 1e-8;
    std::map<std::vector<int>, double> custom;

    mutable std::once_flag support_once;
    mutable std::vector<SpectralEntry> support;

    explicit State(Lattice l) : lattice(std::move(l)) {}

    double rho(std::span<const int> index) const {
        if (family == ProfileFamily::custom) {
            auto it = custom.find(std::vector<int>(index.begin(), index.end()));
            return it == custom.end() ? 0.0 : it->second;
        }
        const Eigen::VectorXd a = lattice.dual_point(index);
        double r = 1.0;
        for (Eigen::Index d = 0; d < a.size(); ++d) r *= family_coefficient(family, scale, a[d]);
        return r;
    }

    bool separable() const { return family != ProfileFamily::custom && lattice.is_diagonal(); }

    double coefficient_1d(int d, int m) const {
        return family_coefficient(family, scale, m / lattice.generators()(d, d));
    }

    // Sum over m in Z of c(m / L_d).
    double mass_1d(int d) const {
        const double period = lattice.generators()(d, d);
        switch (family) {
            case ProfileFamily::constant: return 1.0;
            case ProfileFamily::matern: {
                // sum_m 1/(1 + a^2 m^2) = (pi/a) coth(pi/a), a = 2 pi scale / L
                const double c = period / (2.0 * scale);
                const double e = std::exp(-2.0 * c);
                return c * (1.0 + e) / (1.0 - e);
            }
            case ProfileFamily::gaussian: {
                double s = 1.0;
                for (int m = 1;; ++m) {
                    const double t = 2.0 * coefficient_1d(d, m);
                    s += t;
                    if (t < 1e-18 * s) break;
                }
                return s;
            }
            case ProfileFamily::custom: break;
        }
        throw std::logic_error("mass_1d on custom profile");
    }

    void build_support() const;
};

namespace {

void sort_support(std::vector<SpectralEntry>& s) {
    std::sort(s.begin(), s.end(), [](const SpectralEntry& a, const SpectralEntry& b) {
        if (a.rho != b.rho) return a.rho > b.rho;
        return a.index < b.index;
    });
}

}  // namespace

void SpectralProfile::State::build_support() const {
    const int n = lattice.dim();
    std::vector<SpectralEntry> out;
    if (family == ProfileFamily::custom) {
        for (const auto& [idx, r] : custom) out.push_back({idx, r});
    } else if (family == ProfileFamily::constant) {
        out.push_back({std::vector<int>(static_cast<std::size_t>(n), 0), 1.0});
    } else if (separable()) {
        // Depth-first over coordinates, pruning once the running product
        // drops below eps (every remaining factor is at most 1).
        std::vector<int> cap(static_cast<std::size_t>(n));
        const double per_coord = n > 6 ? std::pow(eps, 1.0 / n) : eps;
        for (int d = 0; d < n; ++d) {
            int m = 0;
            while (coefficient_1d(d, m + 1) >= per_coord) ++m;
            cap[static_cast<std::size_t>(d)] = m;
        }
        std::vector<int> idx(static_cast<std::size_t>(n), 0);
        auto recurse = [&](auto&& self, int d, double prod) -> void {
            if (d == n) {
                if (out.size() >= kMaxSupport)
                    throw InvalidArgument("spectral support exceeds the enumeration limit; raise truncation_eps");
                out.push_back({idx, prod});
                return;
            }
            for (int m = 0; m <= cap[static_cast<std::size_t>(d)]; ++m) {
                const double p = prod * coefficient_1d(d, m);
                if (p < eps) break;
                for (int sgn : {1, -1}) {
                    if (m == 0 && sgn < 0) continue;
                    idx[static_cast<std::size_t>(d)] = sgn * m;
                    self(self, d + 1, p);
                }
            }
            idx[static_cast<std::size_t>(d)] = 0;
        };
        recurse(recurse, 0, 1.0);
    } else {
        // General lattice: expanding shells ||m||_inf = R until two
        // consecutive shells contribute nothing.
        int empty_shells = 0;
        std::vector<int> idx(static_cast<std::size_t>(n));
        for (int radius = 0; empty_shells < 2; ++radius) {
            const double box = std::pow(2.0 * radius + 1.0, n);
            if (box > 5e7) throw InvalidArgument("spectral support enumeration too large; raise truncation_eps");
            bool any = false;
            const long long side = 2LL * radius + 1;
            const auto total = static_cast<long long>(box);
            for (long long code = 0; code < total; ++code) {
                long long c = code;
                int inf = 0;
                for (int d = 0; d < n; ++d) {
                    idx[static_cast<std::size_t>(d)] = static_cast<int>(c % side) - radius;
                    inf = std::max(inf, std::abs(idx[static_cast<std::size_t>(d)]));
                    c /= side;
                }
                if (inf != radius) continue;
                const double r = rho(idx);
                if (r >= eps) {
                    out.push_back({idx, r});
                    any = true;
                }
            }
            empty_shells = any ? 0 : empty_shells + 1;
            if (out.size() > kMaxSupport)
                throw InvalidArgument("spectral support exceeds the enumeration limit; raise truncation_eps");
        }
    }
    sort_support(out);
    support = std::move(out);
}

SpectralProfile::SpectralProfile(std::shared_ptr<const State> state) : state_(std::move(state)) {}

SpectralProfile SpectralProfile::family(const Lattice& lattice, ProfileFamily family, double scale,
                                        double truncation_eps) {
    if (family == ProfileFamily::custom) throw InvalidArgument("use SpectralProfile::custom for explicit coefficients");
    if (!(scale > 0.0) || !std::isfinite(scale)) throw InvalidArgument("profile scale must be positive");
    if (!(truncation_eps > 0.0 && truncation_eps < 1.0))
        throw InvalidArgument("truncation_eps must lie in (0, 1)");
    auto s = std::make_shared<State>(lattice);
    s->family = family;
    s->scale = scale;
    s->eps = truncation_eps;
    return SpectralProfile(std::move(s));
}

SpectralProfile SpectralProfile::custom(const Lattice& lattice, std::vector<SpectralEntry> entries) {
    if (entries.empty()) throw InvalidArgument("spectral profile has empty support");
    std::map<std::vector<int>, double> raw;
    for (auto& e : entries) {
        if (static_cast<int>(e.index.size()) != lattice.dim())
            throw InvalidArgument("spectral index dimension mismatch");
        if (!(e.rho >= 0.0) || !std::isfinite(e.rho))
            throw InvalidArgument("spectral coefficients must be nonnegative and finite");
        raw[e.index] += e.rho;
    }
    const std::vector<int> zero(static_cast<std::size_t>(lattice.dim()), 0);
    auto z = raw.find(zero);
    if (z == raw.end() || z->second != 1.0) throw InvalidArgument("spectral profile requires rho(0) = 1");
    auto s = std::make_shared<State>(lattice);
    s->family = ProfileFamily::custom;
    for (const auto& [idx, r] : raw) {
        std::vector<int> neg(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) neg[i] = -idx[i];
        auto it = raw.find(neg);
        const double mirror = it == raw.end() ? 0.0 : it->second;
        const double sym = 0.5 * (r + mirror);
        s->custom[idx] = sym;
        s->custom[neg] = sym;
    }
    s->custom[zero] = 1.0;
    return SpectralProfile(std::move(s));
}

ProfileFamily SpectralProfile::family() const { return state_->family; }
double SpectralProfile::scale() const { return state_->scale; }
double SpectralProfile::truncation_eps() const { return state_->eps; }
const Lattice& SpectralProfile::lattice() const { return state_->lattice; }
double SpectralProfile::rho(std::span<const int> index) const { return state_->rho(index); }
bool SpectralProfile::separable() const { return state_->separable(); }

double SpectralProfile::coefficient_1d(int d, int m) const {
    if (!separable()) throw InvalidArgument("coefficient_1d requires a separable profile");
    return state_->coefficient_1d(d, m);
}

const std::vector<SpectralEntry>& SpectralProfile::support() const {
    std::call_once(state_->support_once, [this] { state_->build_support(); });
    return state_->support;
}

double SpectralProfile::total_mass() const {
    if (separable()) {
        double m = 1.0;
        for (int d = 0; d < lattice().dim(); ++d) m *= state_->mass_1d(d);
        return m;
    }
    const auto& s = support();
    double total = 0.0;
    for (auto it = s.rbegin(); it != s.rend(); ++it) total += it->rho;
    return total;
}

double SpectralProfile::top_sum(std::size_t n) const {
    if (n == 0) return 0.0;
    if (!separable()) {
        const auto& s = support();
        double total = 0.0;
        const std::size_t k = std::min(n, s.size());
        for (std::size_t i = k; i-- > 0;) total += s[i].rho;
        return total;
    }
    // Best-first enumeration of the n largest products of per-coordinate
    // sorted coefficient lists. List position p holds c(ceil(p/2) / L_d), so
    // both signs of each index are represented. A tuple is only extended at
    // coordinates >= the last one it was extended at, which visits each tuple
    // exactly once.
    const int dim = lattice().dim();
    auto coeff = [&](int d, int pos) { return state_->coefficient_1d(d, (pos + 1) / 2); };
    struct Node {
        double value;
        std::vector<int> pos;
        int last;
    };
    auto cmp = [](const Node& a, const Node& b) {
        if (a.value != b.value) return a.value < b.value;
        return a.pos > b.pos;
    };
    std::priority_queue<Node, std::vector<Node>, decltype(cmp)> heap(cmp);
    heap.push({1.0, std::vector<int>(static_cast<std::size_t>(dim), 0), 0});
    std::vector<double> taken;
    taken.reserve(n);
    while (!heap.empty() && taken.size() < n) {
        Node node = heap.top();
        heap.pop();
        if (node.value <= 0.0) break;
        taken.push_back(node.value);
        for (int d = node.last; d < dim; ++d) {
            const int p = node.pos[static_cast<std::size_t>(d)];
            const double cur = coeff(d, p);
            const double next = coeff(d, p + 1);
            if (next <= 0.0 || cur <= 0.0) continue;
            Node child{node.value / cur * next, node.pos, d};
            child.pos[static_cast<std::size_t>(d)] = p + 1;
            heap.push(std::move(child));
        }
    }
    double total = 0.0;
    for (std::size_t i = taken.size(); i-- > 0;) total += taken[i];
    return total;
}

long long SpectralProfile::support_size() const {
    if (family() == ProfileFamily::constant) return 1;
    if (separable()) return -1;
    return static_cast<long long>(support().size());
}

std::string SpectralProfile::id() const {
    std::string s = to_string(family());
    if (family() == ProfileFamily::matern || family() == ProfileFamily::gaussian)
        s += "(s=" + fmt_double(scale()) + ")";
    if (family() == ProfileFamily::custom) s += "(" + std::to_string(support().size()) + ")";
    return s + "@" + lattice().id();
}

SpectralProfile matern_spectral_profile(const Lattice& lattice, double scale, double truncation_eps) {
    return SpectralProfile::family(lattice, ProfileFamily::matern, scale, truncation_eps);
}

// ---------------------------------------------------------------------------
// Lattice kernel

namespace {

class LatticeKernel final : public detail::KernelImpl {
public:
    LatticeKernel(SpectralProfile profile, KernelNormalization norm)
        : profile_(std::move(profile)), lattice_(profile_.lattice()), norm_(norm) {
        amplitude_ = norm == KernelNormalization::none ? 1.0 / lattice_.cell_volume()
                                                       : 1.0 / profile_.total_mass();
        if (profile_.separable()) {
            const int n = lattice_.dim();
            periods_.resize(n);
            for (int d = 0; d < n; ++d) periods_[d] = lattice_.generators()(d, d);
        } else {
            const auto& s = profile_.support();
            freqs_.resize(static_cast<Eigen::Index>(s.size()), lattice_.dim());
            rhos_.resize(static_cast<Eigen::Index>(s.size()));
            for (std::size_t i = 0; i < s.size(); ++i) {
                freqs_.row(static_cast<Eigen::Index>(i)) = lattice_.dual_point(s[i].index).transpose();
                rhos_[static_cast<Eigen::Index>(i)] = s[i].rho;
            }
        }
    }

    KernelKind kind() const override { return KernelKind::lattice_periodic; }
    int dim() const override { return lattice_.dim(); }
    std::string id() const override {
        return "lattice-periodic(" + profile_.id() + ",norm=" + to_string(norm_) + ")";
    }

    double eval(const double* x, const double* y) const override {
        if (profile_.separable()) return KernelImpl::eval(x, y);
        const int n = dim();
        double s = 0.0;
        for (Eigen::Index i = freqs_.rows(); i-- > 0;) {
            double phase = 0.0;
            for (int d = 0; d < n; ++d) phase += (x[d] - y[d]) * freqs_(i, d);
            s += rhos_[i] * std::cos(2.0 * kPi * phase);
        }
        return amplitude_ * s;
    }

    void gradient(const double* x, const double* y, double* g) const override {
        if (profile_.separable()) {
            KernelImpl::gradient(x, y, g);
            return;
        }
        const int n = dim();
        for (int d = 0; d < n; ++d) g[d] = 0.0;
        for (Eigen::Index i = freqs_.rows(); i-- > 0;) {
            double phase = 0.0;
            for (int d = 0; d < n; ++d) phase += (x[d] - y[d]) * freqs_(i, d);
            const double w = -2.0 * kPi * rhos_[i] * std::sin(2.0 * kPi * phase);
            for (int d = 0; d < n; ++d) g[d] += w * freqs_(i, d);
        }
        for (int d = 0; d < n; ++d) g[d] *= amplitude_;
    }

    bool separable() const override { return profile_.separable(); }
    double amplitude() const override { return amplitude_; }

    double factor(int d, double x, double y) const override {
        const double period = periods_[d];
        const double v = frac((x - y) / period);
        switch (profile_.family()) {
            case ProfileFamily::constant: return 1.0;
            case ProfileFamily::matern: {
                // Closed form of sum_m cos(2 pi m v) / (1 + a^2 m^2).
                const double c = period / (2.0 * profile_.scale());
                const double e = std::exp(-2.0 * c);
                return c * (std::exp(-2.0 * c * v) + std::exp(-2.0 * c * (1.0 - v))) / (1.0 - e);
            }
            case ProfileFamily::gaussian: {
                double s = 1.0;
                for (int m = 1;; ++m) {
                    const double r = profile_.coefficient_1d(d, m);
                    if (r < 1e-18) break;
                    s += 2.0 * r * std::cos(2.0 * kPi * m * v);
                }
                return s;
            }
            case ProfileFamily::custom: break;
        }
        throw std::logic_error("lattice factor on custom profile");
    }

    double factor_dx(int d, double x, double y) const override {
        const double period = periods_[d];
        const double v = frac((x - y) / period);
        switch (profile_.family()) {
            case ProfileFamily::constant: return 0.0;
            case ProfileFamily::matern: {
                if (v == 0.0) return 0.0;  // kink: symmetric subgradient
                const double c = period / (2.0 * profile_.scale());
                const double e = std::exp(-2.0 * c);
                return (2.0 * c * c / period) *
                       (std::exp(-2.0 * c * (1.0 - v)) - std::exp(-2.0 * c * v)) / (1.0 - e);
            }
            case ProfileFamily::gaussian: {
                double s = 0.0;
                for (int m = 1;; ++m) {
                    const double r = profile_.coefficient_1d(d, m);
                    if (r < 1e-18) break;
                    s -= 2.0 * r * (2.0 * kPi * m / period) * std::sin(2.0 * kPi * m * v);
                }
                return s;
            }
            case ProfileFamily::custom: break;
        }
        throw std::logic_error("lattice factor on custom profile");
    }

    void factor_pair(int d, double x, double y, double& f, double& df) const override {
        if (profile_.family() != ProfileFamily::matern) {
            f = factor(d, x, y);
            df = factor_dx(d, x, y);
            return;
        }
        const double period = periods_[d];
        const double v = frac((x - y) / period);
        const double c = period / (2.0 * profile_.scale());
        const double inv = 1.0 / (1.0 - std::exp(-2.0 * c));
        const double a = std::exp(-2.0 * c * v), b = std::exp(-2.0 * c * (1.0 - v));
        f = c * (a + b) * inv;
        df = v == 0.0 ? 0.0 : (2.0 * c * c / period) * (b - a) * inv;
    }

    const Lattice* lattice() const override { return &lattice_; }
    double cell_mean() const override { return amplitude_ * profile_.rho(std::vector<int>(static_cast<std::size_t>(dim()), 0)); }

private:
    static double frac(double u) {
        double v = u - std::floor(u);
        return v >= 1.0 ? 0.0 : v;
    }

    SpectralProfile profile_;
    Lattice lattice_;
    KernelNormalization norm_;
    double amplitude_ = 1.0;
    Eigen::VectorXd periods_;
    Eigen::MatrixXd freqs_;
    Eigen::VectorXd rhos_;
};

}  // namespace

Kernel lattice_kernel(const Lattice& lattice, const SpectralProfile& profile, KernelNormalization normalization) {
    if (!(profile.lattice() == lattice))
        throw InvalidArgument("spectral profile was built for a different lattice");
    const std::vector<int> zero(static_cast<std::size_t>(lattice.dim()), 0);
    if (profile.rho(zero) != 1.0) throw InvalidArgument("spectral profile requires rho(0) = 1");
    if (!profile.separable() && profile.support().empty())
        throw InvalidArgument("spectral profile has empty truncated support");
    return Kernel(std::make_shared<LatticeKernel>(profile, normalization));
}

SeaBound sea_bound(const SpectralProfile& profile, long long n, KernelNormalization normalization) {
    if (n < 1) throw InvalidArgument("sea_bound requires N >= 1");
    const long long size = profile.support_size();
    if (size >= 0 && n >= size) return {0.0, true};
    const double total = profile.total_mass();
    const double amp = normalization == KernelNormalization::none ? 1.0 / profile.lattice().cell_volume()
                                                                  : 1.0 / total;
    const double tail = std::max(0.0, total - profile.top_sum(static_cast<std::size_t>(n)));
    return {std::sqrt(amp * tail / static_cast<double>(n)), false};
}

}  // namespace tmm
