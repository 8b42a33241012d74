#include "tmm/sde.hpp"

#include <cmath>
#include <cstdio>

#include "tmm/error.hpp"
#include "tmm/parallel.hpp"
#include "tmm/transport.hpp"

namespace tmm {

double standard_normal(Rng& rng) {
    const double u = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
    return normal_quantile(u);
}

namespace {

constexpr std::size_t kBlock = 4096;

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_vec(const Eigen::VectorXd& v) {
    std::string s = "[";
    for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt_double(v[i]);
    return s + "]";
}

Eigen::MatrixXd correlation_2d(double rho) {
    Eigen::MatrixXd c(2, 2);
    c << 1.0, rho, rho, 1.0;
    return c;
}

}  // namespace

SdeModel::SdeModel(Eigen::MatrixXd correlation) : correlation_(std::move(correlation)) {
    const Eigen::Index n = correlation_.rows();
    if (n < 1 || correlation_.cols() != n) throw InvalidArgument("correlation must be a nonempty square matrix");
    if (!correlation_.allFinite()) throw InvalidArgument("correlation must be finite");
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::abs(correlation_(i, i) - 1.0) > 1e-12) throw InvalidArgument("correlation needs a unit diagonal");
        for (Eigen::Index j = 0; j < i; ++j)
            if (std::abs(correlation_(i, j) - correlation_(j, i)) > 1e-12)
                throw InvalidArgument("correlation must be symmetric");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(correlation_);
    if (llt.info() == Eigen::Success) {
        factor_ = llt.matrixL();
        return;
    }
    // Singular but PSD: symmetric square root from the eigen-decomposition.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(correlation_);
    if (es.eigenvalues().minCoeff() < -1e-12) throw InvalidArgument("correlation is not positive semidefinite");
    factor_ = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

bool SdeModel::in_domain(Point x) const {
    if (static_cast<int>(x.size()) != dim()) return false;
    for (double v : x)
        if (!std::isfinite(v)) return false;
    return true;
}

DriftDiffusion SdeModel::drift_diffusion(double t, Point x) const {
    if (static_cast<int>(x.size()) != dim()) throw InvalidArgument("state dimension mismatch");
    if (!in_domain(x)) throw DomainError("state outside the domain of " + id());
    DriftDiffusion out;
    out.drift.resize(dim());
    Eigen::VectorXd vol(dim());
    coefficients(t, x.data(), out.drift.data(), vol.data());
    out.diffusion = vol.asDiagonal() * factor_;
    return out;
}

void SdeModel::step(double t, double dt, const double* x, const double* z, double* out) const {
    const int n = dim();
    double r_small[8], v_small[8];
    std::vector<double> r_big, v_big;
    double* r = r_small;
    double* v = v_small;
    if (n > 8) {
        r_big.resize(static_cast<std::size_t>(n));
        v_big.resize(static_cast<std::size_t>(n));
        r = r_big.data();
        v = v_big.data();
    }
    coefficients(t, x, r, v);
    const double sq = std::sqrt(dt);
    for (int i = 0; i < n; ++i) {
        double w = 0.0;
        for (int k = 0; k < n; ++k) w += factor_(i, k) * z[k];
        out[i] = x[i] + r[i] * dt + v[i] * sq * w;
    }
}

SabrModel::SabrModel(const SabrParams& p) : SdeModel(correlation_2d(p.rho12)), p_(p) {
    if (!(p.beta >= 0.0 && p.beta <= 1.0)) throw InvalidArgument("SABR beta must lie in [0, 1]");
    if (!(p.nu >= 0.0) || !std::isfinite(p.nu)) throw InvalidArgument("SABR nu must be nonnegative");
    if (!(p.shift >= 0.0) || !std::isfinite(p.shift)) throw InvalidArgument("SABR shift must be nonnegative");
    if (!(p.rho12 > -1.0 && p.rho12 < 1.0)) throw InvalidArgument("SABR rho12 must lie in (-1, 1)");
    if (!(p.alpha0 > 0.0) || !std::isfinite(p.alpha0)) throw InvalidArgument("SABR alpha0 must be positive");
    if (!(p.f0 + p.shift > 0.0) || !std::isfinite(p.f0)) throw InvalidArgument("SABR requires F0 + shift > 0");
}

Eigen::VectorXd SabrModel::initial_state() const {
    Eigen::VectorXd x(2);
    x << p_.f0, p_.alpha0;
    return x;
}

std::string SabrModel::id() const {
    return "sabr(F0=" + fmt_double(p_.f0) + ",alpha0=" + fmt_double(p_.alpha0) + ",beta=" + fmt_double(p_.beta) +
           ",nu=" + fmt_double(p_.nu) + ",shift=" + fmt_double(p_.shift) + ",rho12=" + fmt_double(p_.rho12) + ")";
}

bool SabrModel::in_domain(Point x) const {
    return x.size() == 2 && std::isfinite(x[0]) && std::isfinite(x[1]) && x[0] + p_.shift > 0.0 && x[1] >= 0.0;
}

void SabrModel::coefficients(double, const double* x, double* drift, double* vol) const {
    drift[0] = 0.0;
    drift[1] = 0.0;
    vol[0] = x[1] * std::pow(x[0] + p_.shift, p_.beta);
    vol[1] = p_.nu * x[1];
}

void SabrModel::step(double, double dt, const double* x, const double* z, double* out) const {
    const double sq = std::sqrt(dt);
    const double w1 = z[0];
    const double w2 = p_.rho12 * z[0] + std::sqrt(1.0 - p_.rho12 * p_.rho12) * z[1];
    const double base = std::max(x[0] + p_.shift, 0.0);
    double f = x[0] + x[1] * std::pow(base, p_.beta) * sq * w1;
    if (f + p_.shift <= 0.0) f = -p_.shift + 1e-12;
    out[0] = f;
    out[1] = x[1] * std::exp(p_.nu * sq * w2 - 0.5 * p_.nu * p_.nu * dt);
}

std::string to_string(CustomModel::Preset p) {
    switch (p) {
        case CustomModel::Preset::frozen: return "frozen";
        case CustomModel::Preset::drift: return "drift";
        case CustomModel::Preset::brownian: return "brownian";
        case CustomModel::Preset::gbm: return "gbm";
    }
    return "unknown";
}

CustomModel::CustomModel(Preset preset, Eigen::VectorXd a, Eigen::VectorXd sigma, Eigen::MatrixXd correlation)
    : SdeModel(std::move(correlation)), preset_(preset), a_(std::move(a)), sigma_(std::move(sigma)) {
    if (a_.size() != dim() || sigma_.size() != dim())
        throw InvalidArgument("custom model parameters must have the model dimension");
    if (!a_.allFinite() || !sigma_.allFinite()) throw InvalidArgument("custom model parameters must be finite");
}

CustomModel CustomModel::frozen(int dim) {
    if (dim < 1) throw InvalidArgument("model dimension must be positive");
    return CustomModel(Preset::frozen, Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Zero(dim),
                       Eigen::MatrixXd::Identity(dim, dim));
}

std::string CustomModel::id() const {
    return "custom(" + to_string(preset_) + ",a=" + fmt_vec(a_) + ",sigma=" + fmt_vec(sigma_) + ")";
}

void CustomModel::coefficients(double, const double* x, double* drift, double* vol) const {
    for (int d = 0; d < dim(); ++d) {
        switch (preset_) {
            case Preset::frozen:
                drift[d] = 0.0;
                vol[d] = 0.0;
                break;
            case Preset::drift:
                drift[d] = a_[d];
                vol[d] = 0.0;
                break;
            case Preset::brownian:
                drift[d] = a_[d];
                vol[d] = sigma_[d];
                break;
            case Preset::gbm:
                drift[d] = a_[d] * x[d];
                vol[d] = sigma_[d] * x[d];
                break;
        }
    }
}

bool CustomModel::martingale() const {
    return preset_ == Preset::frozen || a_.isZero(0.0);
}

namespace {

void check_grid(const std::vector<double>& t) {
    if (t.empty()) throw InvalidArgument("time grid is empty");
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!std::isfinite(t[i])) throw InvalidArgument("time grid must be finite");
        if (i > 0 && !(t[i] > t[i - 1])) throw InvalidArgument("time grid must be strictly increasing");
    }
}

}  // namespace

PathEnsemble euler_paths(const SdeModel& model, Point x0, const std::vector<double>& t_grid, int n_paths,
                         std::uint64_t seed) {
    check_grid(t_grid);
    if (n_paths < 1) throw InvalidArgument("euler_paths: need at least one path");
    if (static_cast<int>(x0.size()) != model.dim()) throw InvalidArgument("euler_paths: state dimension mismatch");
    if (!model.in_domain(x0)) throw DomainError("euler_paths: initial state outside the model domain");
    const int dim = model.dim();
    PathEnsemble out;
    out.times = t_grid;
    out.states.assign(t_grid.size(), Points(n_paths, dim));
    for (int i = 0; i < n_paths; ++i)
        for (int d = 0; d < dim; ++d) out.states[0](i, d) = x0[d];
    const std::size_t blocks = (static_cast<std::size_t>(n_paths) + kBlock - 1) / kBlock;
    parallel_for(blocks, [&](std::size_t b0, std::size_t b1) {
        std::vector<double> z(static_cast<std::size_t>(dim));
        for (std::size_t b = b0; b < b1; ++b) {
            Rng rng(derive_seed(seed, {stream::paths, b}));
            const std::size_t end = std::min(static_cast<std::size_t>(n_paths), (b + 1) * kBlock);
            for (std::size_t i = b * kBlock; i < end; ++i) {
                const auto r = static_cast<Eigen::Index>(i);
                for (std::size_t j = 1; j < t_grid.size(); ++j) {
                    for (auto& v : z) v = standard_normal(rng);
                    model.step(t_grid[j - 1], t_grid[j] - t_grid[j - 1], &out.states[j - 1](r, 0), z.data(),
                               &out.states[j](r, 0));
                }
            }
        }
    });
    return out;
}

std::vector<McEstimate> mc_expectations(const SdeModel& model, Point x0, double horizon, int n_steps,
                                        long long n_paths, std::uint64_t seed, int n_outputs,
                                        const std::function<void(Point, double*)>& phi, bool antithetic) {
    if (!(horizon > 0.0) || n_steps < 1) throw InvalidArgument("mc_expectation: need a positive horizon and steps");
    if (n_paths < 2) throw InvalidArgument("mc_expectation: need at least two paths");
    if (antithetic && n_paths % 2 != 0) throw InvalidArgument("mc_expectation: antithetic needs an even path count");
    if (static_cast<int>(x0.size()) != model.dim()) throw InvalidArgument("mc_expectation: state dimension mismatch");
    if (!model.in_domain(x0)) throw DomainError("mc_expectation: initial state outside the model domain");
    if (n_outputs < 1) throw InvalidArgument("mc_expectation: need at least one output");
    const int dim = model.dim();
    const double dt = horizon / n_steps;
    const auto total = static_cast<std::size_t>(n_paths);
    const std::size_t blocks = (total + kBlock - 1) / kBlock;
    const auto m = static_cast<std::size_t>(n_outputs);
    std::vector<double> sums(blocks * m, 0.0), squares(blocks * m, 0.0);
    parallel_for(blocks, [&](std::size_t b0, std::size_t b1) {
        std::vector<double> x(static_cast<std::size_t>(dim)), y(x.size()), z(x.size());
        std::vector<double> zs(static_cast<std::size_t>(n_steps) * x.size());
        std::vector<double> val(m), pair(m);
        for (std::size_t b = b0; b < b1; ++b) {
            Rng rng(derive_seed(seed, {stream::paths, b}));
            const std::size_t end = std::min(total, (b + 1) * kBlock);
            for (std::size_t i = b * kBlock; i < end; ++i) {
                const bool mirror = antithetic && (i % 2 == 1);
                for (int d = 0; d < dim; ++d) x[static_cast<std::size_t>(d)] = x0[static_cast<std::size_t>(d)];
                for (int s = 0; s < n_steps; ++s) {
                    double* zz = &zs[static_cast<std::size_t>(s) * x.size()];
                    for (int d = 0; d < dim; ++d) {
                        if (mirror)
                            zz[d] = -zz[d];
                        else
                            zz[d] = standard_normal(rng);
                    }
                    model.step(s * dt, dt, x.data(), zz, y.data());
                    x.swap(y);
                }
                phi(Point(x.data(), x.size()), val.data());
                if (antithetic) {
                    if (!mirror) {
                        pair = val;
                        continue;
                    }
                    for (std::size_t k = 0; k < m; ++k) val[k] = 0.5 * (val[k] + pair[k]);
                }
                for (std::size_t k = 0; k < m; ++k) {
                    sums[b * m + k] += val[k];
                    squares[b * m + k] += val[k] * val[k];
                }
            }
        }
    });
    const double samples = static_cast<double>(antithetic ? n_paths / 2 : n_paths);
    std::vector<McEstimate> out(m);
    for (std::size_t k = 0; k < m; ++k) {
        double s = 0.0, q = 0.0;
        for (std::size_t b = 0; b < blocks; ++b) {
            s += sums[b * m + k];
            q += squares[b * m + k];
        }
        const double mean = s / samples;
        const double var = std::max(0.0, (q - samples * mean * mean) / (samples - 1.0));
        out[k] = {mean, std::sqrt(var / samples), n_paths};
        if (!std::isfinite(mean)) throw NumericalError("mc_expectation: non-finite estimate");
    }
    return out;
}

McEstimate mc_expectation(const SdeModel& model, Point x0, double horizon, int n_steps, long long n_paths,
                          std::uint64_t seed, const std::function<double(Point)>& phi, bool antithetic) {
    return mc_expectations(model, x0, horizon, n_steps, n_paths, seed, 1,
                           [&](Point x, double* out) { out[0] = phi(x); }, antithetic)[0];
}

}  // namespace tmm
