#include "tmm/discrepancy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>
#include <vector>

#include "tmm/error.hpp"
#include "tmm/parallel.hpp"

namespace tmm {

std::string to_string(MeasureKind kind) {
    switch (kind) {
        case MeasureKind::lattice_cell: return "lattice-cell";
        case MeasureKind::uniform_box: return "uniform-box";
        case MeasureKind::empirical: return "empirical";
    }
    return "unknown";
}

std::string to_string(CertificateMethod m) {
    switch (m) {
        case CertificateMethod::closed_form: return "closed-form";
        case CertificateMethod::quadrature: return "quadrature";
        case CertificateMethod::exact_sum: return "exact-sum";
        case CertificateMethod::monte_carlo: return "monte-carlo";
    }
    return "unknown";
}

std::string to_string(BaselineKind kind) {
    switch (kind) {
        case BaselineKind::iid_uniform: return "iid-uniform";
        case BaselineKind::halton: return "halton";
    }
    return "unknown";
}

namespace {

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

void check_box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    if (lo.size() < 1 || lo.size() != hi.size()) throw InvalidArgument("box bounds must be nonempty and of equal length");
    for (Eigen::Index i = 0; i < lo.size(); ++i)
        if (!std::isfinite(lo[i]) || !std::isfinite(hi[i]) || !(lo[i] < hi[i]))
            throw InvalidArgument("box bounds must be finite with lo < hi");
}

}  // namespace

Measure Measure::lattice_cell(const Lattice& lattice) {
    Measure m;
    m.kind_ = MeasureKind::lattice_cell;
    m.dim_ = lattice.dim();
    m.lattice_ = lattice;
    if (lattice.is_diagonal()) {
        const Eigen::VectorXd p = lattice.periods();
        m.lo_ = p.cwiseMin(0.0);
        m.hi_ = p.cwiseMax(0.0);
        m.has_box_ = true;
    }
    return m;
}

Measure Measure::unit_cube(int dim) {
    if (dim < 1) throw InvalidArgument("measure dimension must be positive");
    return uniform_box(Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim));
}

Measure Measure::uniform_box(Eigen::VectorXd lo, Eigen::VectorXd hi) {
    check_box(lo, hi);
    Measure m;
    m.kind_ = MeasureKind::uniform_box;
    m.dim_ = static_cast<int>(lo.size());
    m.lo_ = std::move(lo);
    m.hi_ = std::move(hi);
    m.has_box_ = true;
    return m;
}

Measure Measure::empirical(Points samples, std::string label) {
    if (samples.rows() < 1 || samples.cols() < 1) throw InvalidArgument("empirical measure needs samples");
    Eigen::VectorXd lo = samples.colwise().minCoeff().transpose();
    Eigen::VectorXd hi = samples.colwise().maxCoeff().transpose();
    for (Eigen::Index d = 0; d < lo.size(); ++d) {
        if (!(hi[d] > lo[d])) {
            lo[d] -= 0.5;
            hi[d] += 0.5;
        }
    }
    return empirical(std::move(samples), std::move(lo), std::move(hi), std::move(label));
}

Measure Measure::empirical(Points samples, Eigen::VectorXd lo, Eigen::VectorXd hi, std::string label) {
    if (samples.rows() < 1 || samples.cols() < 1) throw InvalidArgument("empirical measure needs samples");
    check_box(lo, hi);
    if (lo.size() != samples.cols()) throw InvalidArgument("empirical measure: box dimension mismatch");
    if (!samples.allFinite()) throw InvalidArgument("empirical measure: non-finite sample");
    Measure m;
    m.kind_ = MeasureKind::empirical;
    m.dim_ = static_cast<int>(samples.cols());
    m.samples_ = std::move(samples);
    m.lo_ = std::move(lo);
    m.hi_ = std::move(hi);
    m.has_box_ = true;
    m.label_ = std::move(label);
    return m;
}

std::string Measure::id() const {
    switch (kind_) {
        case MeasureKind::lattice_cell: return "lattice-cell(" + lattice_->id() + ")";
        case MeasureKind::uniform_box: return "uniform-box(lo=" + fmt_vec(lo_) + ",hi=" + fmt_vec(hi_) + ")";
        case MeasureKind::empirical:
            return "empirical(" + label_ + ",M=" + std::to_string(samples_.rows()) + ")";
    }
    return "unknown";
}

const Lattice& Measure::lattice() const {
    if (!lattice_) throw InvalidArgument("measure has no lattice");
    return *lattice_;
}

void Measure::sample(Rng& rng, double* out) const {
    switch (kind_) {
        case MeasureKind::lattice_cell: {
            Eigen::VectorXd h(dim_);
            for (int d = 0; d < dim_; ++d) h[d] = uniform01(rng);
            const Eigen::VectorXd x = lattice_->from_cell_coords(as_point(h));
            for (int d = 0; d < dim_; ++d) out[d] = x[d];
            return;
        }
        case MeasureKind::uniform_box:
            for (int d = 0; d < dim_; ++d) out[d] = lo_[d] + (hi_[d] - lo_[d]) * uniform01(rng);
            return;
        case MeasureKind::empirical: {
            const auto m = static_cast<std::uint64_t>(samples_.rows());
            const auto i = static_cast<Eigen::Index>(std::min<std::uint64_t>(
                m - 1, static_cast<std::uint64_t>(uniform01(rng) * static_cast<double>(m))));
            for (int d = 0; d < dim_; ++d) out[d] = samples_(i, d);
            return;
        }
    }
}

void Measure::project(std::span<double> x) const {
    if (kind_ == MeasureKind::lattice_cell) {
        lattice_->wrap(x);
        return;
    }
    for (int d = 0; d < dim_; ++d) x[d] = std::clamp(x[d], lo_[d], hi_[d]);
}

void Measure::from_unit(Point h, std::span<double> out) const {
    if (kind_ == MeasureKind::lattice_cell) {
        const Eigen::VectorXd x = lattice_->from_cell_coords(h);
        for (int d = 0; d < dim_; ++d) out[d] = x[d];
        return;
    }
    for (int d = 0; d < dim_; ++d) out[d] = lo_[d] + (hi_[d] - lo_[d]) * h[d];
}

namespace {

struct GaussLegendre {
    static constexpr int n = 20;
    std::array<double, n> x{};
    std::array<double, n> w{};
};

const GaussLegendre& gauss_legendre() {
    static const GaussLegendre rule = [] {
        GaussLegendre g;
        const int n = GaussLegendre::n;
        for (int i = 0; i < n; ++i) {
            double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
            double pp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p1 = 1.0, p2 = 0.0;
                for (int j = 1; j <= n; ++j) {
                    const double p3 = p2;
                    p2 = p1;
                    p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
                }
                pp = n * (z * p1 - p2) / (z * z - 1.0);
                const double z1 = z;
                z = z1 - p1 / pp;
                if (std::abs(z - z1) < 1e-16) break;
            }
            g.x[i] = z;
            g.w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        }
        return g;
    }();
    return rule;
}

// Composite 20-point Gauss-Legendre on [a, b], doubling the panel count until
// successive estimates agree relative to the integral of |f|.
template <class F>
double integrate(const F& f, double a, double b) {
    if (!(b > a)) return 0.0;
    const auto& g = gauss_legendre();
    auto composite = [&](int panels, double& abs_sum) {
        const double h = (b - a) / panels;
        double s = 0.0;
        abs_sum = 0.0;
        for (int p = 0; p < panels; ++p) {
            const double mid = a + (p + 0.5) * h;
            for (int i = 0; i < GaussLegendre::n; ++i) {
                const double v = g.w[i] * f(mid + 0.5 * h * g.x[i]);
                s += v;
                abs_sum += std::abs(v);
            }
        }
        abs_sum *= 0.5 * h;
        return 0.5 * h * s;
    };
    double abs_q = 0.0;
    double q = composite(1, abs_q);
    for (int panels = 2; panels <= 4096; panels *= 2) {
        double abs_q2 = 0.0;
        const double q2 = composite(panels, abs_q2);
        if (std::abs(q2 - q) <= 1e-14 * abs_q2 + 1e-300) return q2;
        q = q2;
    }
    return q;
}

// Integral over [a, b] split at an interior breakpoint c.
template <class F>
double integrate_split(const F& f, double a, double b, double c) {
    if (c > a && c < b) return integrate(f, a, c) + integrate(f, c, b);
    return integrate(f, a, b);
}

}  // namespace

struct DiscrepancyObjective::Impl {
    Kernel kernel;
    Measure mu;
    int n = 0;
    CertificateMethod method = CertificateMethod::closed_form;
    DiscrepancyOptions opts;
    double cell_mean = 0.0;
    Points xs;   // potential samples (exact sum / Monte Carlo)
    Points xs2;  // Monte-Carlo partners for the self-energy
    mutable std::optional<double> self;

    Impl(Kernel k, Measure m, int n_, const DiscrepancyOptions& o)
        : kernel(std::move(k)), mu(std::move(m)), n(n_), opts(o) {
        if (kernel.dim() != mu.dim()) throw InvalidArgument("discrepancy: kernel and measure dimensions differ");
        if (n < 1) throw InvalidArgument("discrepancy: N must be at least 1");
        const Lattice* kl = kernel.impl().lattice();
        const bool own_cell = kl && mu.kind() == MeasureKind::lattice_cell && *kl == mu.lattice();
        const bool small_empirical =
            mu.kind() == MeasureKind::empirical && mu.samples().rows() <= opts.exact_sum_limit;
        const bool box_quadrature =
            kernel.separable() && mu.kind() != MeasureKind::empirical && mu.has_box();
        if (!opts.force_monte_carlo && own_cell) {
            method = CertificateMethod::closed_form;
            cell_mean = kernel.impl().cell_mean();
            self = cell_mean;
        } else if (!opts.force_monte_carlo && small_empirical) {
            method = CertificateMethod::exact_sum;
            xs = mu.samples();
        } else if (!opts.force_monte_carlo && box_quadrature) {
            method = CertificateMethod::quadrature;
        } else {
            method = CertificateMethod::monte_carlo;
            if (opts.mc_samples < 2) throw InvalidArgument("discrepancy: Monte Carlo needs at least 2 samples");
            const auto m = static_cast<Eigen::Index>(opts.mc_samples);
            xs.resize(m, mu.dim());
            xs2.resize(m, mu.dim());
            Rng r1(derive_seed(opts.seed, {stream::monte_carlo, 0}));
            Rng r2(derive_seed(opts.seed, {stream::monte_carlo, 1}));
            for (Eigen::Index i = 0; i < m; ++i) {
                mu.sample(r1, &xs(i, 0));
                mu.sample(r2, &xs2(i, 0));
            }
        }
    }

    double width(int d) const { return mu.hi()[d] - mu.lo()[d]; }

    // Normalized 1-D integral of factor(d, ., y) over the box side.
    double side_integral(int d, double y) const {
        const auto& impl = kernel.impl();
        const double a = mu.lo()[d], b = mu.hi()[d];
        return integrate_split([&](double x) { return impl.factor(d, x, y); }, a, b, y) / width(d);
    }

    double side_derivative(int d, double y) const {
        const auto& impl = kernel.impl();
        const double a = mu.lo()[d], b = mu.hi()[d];
        return integrate_split([&](double x) { return impl.factor_dx(d, y, x); }, a, b, y) / width(d);
    }

    double potential(const double* y, double* g) const {
        const int dim = mu.dim();
        switch (method) {
            case CertificateMethod::closed_form:
                if (g) std::fill(g, g + dim, 0.0);
                return cell_mean;
            case CertificateMethod::quadrature: {
                const double amp = kernel.impl().amplitude();
                std::vector<double> side(static_cast<std::size_t>(dim));
                for (int d = 0; d < dim; ++d) side[d] = side_integral(d, y[d]);
                if (g) {
                    for (int d = 0; d < dim; ++d) {
                        double p = amp * side_derivative(d, y[d]);
                        for (int e = 0; e < dim; ++e)
                            if (e != d) p *= side[e];
                        g[d] = p;
                    }
                }
                double v = amp;
                for (int d = 0; d < dim; ++d) v *= side[d];
                return v;
            }
            case CertificateMethod::exact_sum:
            case CertificateMethod::monte_carlo: {
                const Eigen::Index m = xs.rows();
                double s = 0.0;
                if (g) {
                    std::fill(g, g + dim, 0.0);
                    std::vector<double> tmp(static_cast<std::size_t>(dim));
                    for (Eigen::Index j = 0; j < m; ++j) {
                        s += kernel.eval_gradient_unchecked(y, &xs(j, 0), tmp.data());
                        for (int d = 0; d < dim; ++d) g[d] += tmp[d];
                    }
                    for (int d = 0; d < dim; ++d) g[d] /= static_cast<double>(m);
                } else {
                    for (Eigen::Index j = 0; j < m; ++j) s += kernel(y, &xs(j, 0));
                }
                return s / static_cast<double>(m);
            }
        }
        return 0.0;
    }

    double self_energy() const {
        if (self) return *self;
        double v = 0.0;
        switch (method) {
            case CertificateMethod::closed_form: v = cell_mean; break;
            case CertificateMethod::quadrature: {
                v = kernel.impl().amplitude();
                for (int d = 0; d < mu.dim(); ++d)
                    v *= integrate([&](double y) { return side_integral(d, y); }, mu.lo()[d], mu.hi()[d]) / width(d);
                break;
            }
            case CertificateMethod::exact_sum: {
                const Eigen::Index m = xs.rows();
                std::vector<double> rows(static_cast<std::size_t>(m));
                parallel_for(static_cast<std::size_t>(m), [&](std::size_t b, std::size_t e) {
                    for (auto i = static_cast<Eigen::Index>(b); i < static_cast<Eigen::Index>(e); ++i) {
                        double s = 0.0;
                        for (Eigen::Index j = 0; j < m; ++j) s += kernel(&xs(i, 0), &xs(j, 0));
                        rows[static_cast<std::size_t>(i)] = s;
                    }
                });
                double s = 0.0;
                for (double r : rows) s += r;
                v = s / (static_cast<double>(m) * static_cast<double>(m));
                break;
            }
            case CertificateMethod::monte_carlo: {
                double s = 0.0;
                for (Eigen::Index j = 0; j < xs.rows(); ++j) s += kernel(&xs(j, 0), &xs2(j, 0));
                v = s / static_cast<double>(xs.rows());
                break;
            }
        }
        self = v;
        return v;
    }

    double value(const Points& y, Points* grad) const {
        const Eigen::Index nn = y.rows();
        const int dim = mu.dim();
        if (y.cols() != dim) throw InvalidArgument("discrepancy: point dimension mismatch");
        if (nn < 1) throw InvalidArgument("discrepancy: empty point set");
        std::vector<double> pair(static_cast<std::size_t>(nn)), pot(static_cast<std::size_t>(nn));
        if (grad) grad->resize(nn, dim);
        parallel_for(static_cast<std::size_t>(nn), [&](std::size_t b, std::size_t e) {
            std::vector<double> tmp(static_cast<std::size_t>(dim)), gp(static_cast<std::size_t>(dim)),
                gi(static_cast<std::size_t>(dim));
            for (auto i = static_cast<Eigen::Index>(b); i < static_cast<Eigen::Index>(e); ++i) {
                const double* yi = &y(i, 0);
                double s = 0.0;
                if (grad) {
                    std::fill(gp.begin(), gp.end(), 0.0);
                    for (Eigen::Index j = 0; j < nn; ++j) {
                        s += kernel.eval_gradient_unchecked(yi, &y(j, 0), tmp.data());
                        for (int d = 0; d < dim; ++d) gp[d] += tmp[d];
                    }
                    pot[static_cast<std::size_t>(i)] = potential(yi, gi.data());
                } else {
                    for (Eigen::Index j = 0; j < nn; ++j) s += kernel(yi, &y(j, 0));
                    pot[static_cast<std::size_t>(i)] = potential(yi, nullptr);
                }
                pair[static_cast<std::size_t>(i)] = s;
                if (grad) {
                    const double n_d = static_cast<double>(nn);
                    for (int d = 0; d < dim; ++d)
                        (*grad)(i, d) = 2.0 / (n_d * n_d) * gp[d] - 2.0 / n_d * gi[d];
                }
            }
        });
        double ps = 0.0, is = 0.0;
        for (Eigen::Index i = 0; i < nn; ++i) {
            ps += pair[static_cast<std::size_t>(i)];
            is += pot[static_cast<std::size_t>(i)];
        }
        const double n_d = static_cast<double>(nn);
        return self_energy() + ps / (n_d * n_d) - 2.0 * is / n_d;
    }
};

DiscrepancyObjective::DiscrepancyObjective(Kernel kernel, Measure mu, int n, const DiscrepancyOptions& opts)
    : impl_(std::make_unique<Impl>(std::move(kernel), std::move(mu), n, opts)) {}
DiscrepancyObjective::~DiscrepancyObjective() = default;
DiscrepancyObjective::DiscrepancyObjective(DiscrepancyObjective&&) noexcept = default;
DiscrepancyObjective& DiscrepancyObjective::operator=(DiscrepancyObjective&&) noexcept = default;

CertificateMethod DiscrepancyObjective::method() const { return impl_->method; }
double DiscrepancyObjective::value(const Points& y, Points* grad) const { return impl_->value(y, grad); }
double DiscrepancyObjective::self_energy() const { return impl_->self_energy(); }
double DiscrepancyObjective::potential(Point y) const {
    if (static_cast<int>(y.size()) != impl_->mu.dim()) throw InvalidArgument("potential: dimension mismatch");
    return impl_->potential(y.data(), nullptr);
}

namespace {

DiscrepancyCertificate certify(const DiscrepancyObjective::Impl& obj, const Points& y) {
    DiscrepancyCertificate c;
    c.kernel_id = obj.kernel.id();
    c.mu_id = obj.mu.id();
    c.method = obj.method;
    const double e2 = obj.value(y, nullptr);
    if (!std::isfinite(e2)) throw NumericalError("discrepancy: non-finite estimate");
    if (obj.method == CertificateMethod::monte_carlo) {
        // Per-sample terms z_j = K(x_j, x'_j) - (2/N) sum_n K(x_j, y_n) share
        // the estimator's randomness, giving the standard error of E^2.
        const Eigen::Index m = obj.xs.rows();
        const double n_d = static_cast<double>(y.rows());
        std::vector<double> z(static_cast<std::size_t>(m));
        parallel_for(static_cast<std::size_t>(m), [&](std::size_t b, std::size_t e) {
            for (auto j = static_cast<Eigen::Index>(b); j < static_cast<Eigen::Index>(e); ++j) {
                double s = 0.0;
                for (Eigen::Index i = 0; i < y.rows(); ++i) s += obj.kernel(&obj.xs(j, 0), &y(i, 0));
                z[static_cast<std::size_t>(j)] = obj.kernel(&obj.xs(j, 0), &obj.xs2(j, 0)) - 2.0 * s / n_d;
            }
        });
        const double mean = std::accumulate(z.begin(), z.end(), 0.0) / static_cast<double>(m);
        double var = 0.0;
        for (double v : z) var += (v - mean) * (v - mean);
        var /= static_cast<double>(m - 1);
        const double se2 = std::sqrt(var / static_cast<double>(m));
        c.value = std::sqrt(std::max(0.0, e2));
        c.std_error = c.value > 0.0 ? se2 / (2.0 * c.value) : std::sqrt(se2);
        c.samples = m;
        c.seed = obj.opts.seed;
        return c;
    }
    if (e2 < -1e-12 * std::max(1.0, std::abs(obj.self_energy())))
        throw NumericalError("discrepancy: negative squared discrepancy " + fmt_double(e2));
    c.value = std::sqrt(std::max(0.0, e2));
    return c;
}

bool box_like(const Measure& mu) { return mu.kind() != MeasureKind::lattice_cell; }

double extent(const Measure& mu) {
    if (mu.kind() == MeasureKind::lattice_cell)
        return std::pow(std::abs(mu.lattice().cell_volume()), 1.0 / mu.dim());
    return (mu.hi() - mu.lo()).mean();
}

// Infinity norm of the projected gradient: components pushing a clamped
// coordinate further out of the box do not count.
double projected_grad_norm(const Measure& mu, const Points& y, const Points& g) {
    double m = 0.0;
    const bool box = box_like(mu);
    for (Eigen::Index i = 0; i < y.rows(); ++i)
        for (Eigen::Index d = 0; d < y.cols(); ++d) {
            const double gd = g(i, d);
            if (box && ((y(i, d) <= mu.lo()[d] && gd > 0.0) || (y(i, d) >= mu.hi()[d] && gd < 0.0))) continue;
            m = std::max(m, std::abs(gd));
        }
    return m;
}

void jitter_coincident(const Measure& mu, Points& y, Rng& rng) {
    if (min_pairwise_distance(y) > kDistinctTol) return;
    const double scale = 1e-9 * extent(mu);
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
        for (Eigen::Index d = 0; d < y.cols(); ++d) y(i, d) += scale * (uniform01(rng) - 0.5);
        mu.project(row(y, i));
    }
}

struct DescentResult {
    Points y;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
    double grad_norm = 0.0;
};

DescentResult descend(const DiscrepancyObjective::Impl& obj, Points y, const OptimizerOptions& opts, double tol,
                      Rng& jitter_rng) {
    const Measure& mu = obj.mu;
    const Eigen::Index n = y.rows();
    const double spacing = extent(mu) / std::pow(static_cast<double>(n), 1.0 / mu.dim());
    jitter_coincident(mu, y, jitter_rng);

    Points g;
    double f = obj.value(y, &g);
    if (!std::isfinite(f)) throw NumericalError("minimize_discrepancy: non-finite objective at start");
    DescentResult r;
    double eta = -1.0;
    int rejects = 0;
    // Once the objective stops moving beyond round-off (relative to the size of
    // the terms it is a difference of) the gradient test can no longer be met.
    const double noise = 1e-14 * (std::abs(obj.self_energy()) + std::abs(f));
    double window_start = f;
    Points trial, gt;
    while (true) {
        const double gn = projected_grad_norm(mu, y, g);
        r.grad_norm = gn;
        if (gn <= tol) {
            r.converged = true;
            break;
        }
        if (r.iterations >= opts.max_iters || rejects > 60) break;
        const double gmax = g.cwiseAbs().maxCoeff();
        if (eta <= 0.0) eta = 0.1 * spacing / gmax;
        const double step = std::min(eta, spacing / gmax);
        trial = y - step * g;
        Points move = trial - y;
        for (Eigen::Index i = 0; i < n; ++i) mu.project(row(trial, i));
        if (box_like(mu)) move = trial - y;
        const double dec = -(g.cwiseProduct(move)).sum();
        if (!(dec > noise)) break;
        const double ft = obj.value(trial, &gt);
        if (!std::isfinite(ft))
            throw NumericalError("minimize_discrepancy: non-finite objective at iteration " +
                                 std::to_string(r.iterations) + " (last value " + fmt_double(f) +
                                 ", step " + fmt_double(step) + ")");
        if (ft <= f - 1e-4 * dec) {
            const double sy = move.cwiseProduct(gt - g).sum();
            const double ss = move.squaredNorm();
            eta = sy > 0.0 ? ss / sy : 2.0 * step;
            y.swap(trial);
            g.swap(gt);
            f = ft;
            ++r.iterations;
            rejects = 0;
            if (r.iterations % 50 == 0) {
                if (window_start - f <= noise) break;
                window_start = f;
            }
            if (min_pairwise_distance(y) <= kDistinctTol) {
                jitter_coincident(mu, y, jitter_rng);
                f = obj.value(y, &g);
            }
        } else {
            eta = 0.5 * step;
            ++rejects;
        }
    }
    r.value = f;
    r.y = std::move(y);
    return r;
}

Points halton_points(int n, int dim, const std::vector<double>& shift) {
    Points h(n, dim);
    for (int i = 0; i < n; ++i)
        for (int d = 0; d < dim; ++d) {
            double v = radical_inverse(static_cast<std::uint64_t>(i) + 1, nth_prime(d));
            if (!shift.empty()) {
                v += shift[static_cast<std::size_t>(d)];
                v -= std::floor(v);
            }
            h(i, d) = v;
        }
    return h;
}

Points initial_design(const Measure& mu, int n, int restart, std::uint64_t seed) {
    const int dim = mu.dim();
    Rng rng(derive_seed(seed, {stream::restart, static_cast<std::uint64_t>(restart)}));
    if (mu.kind() == MeasureKind::empirical && mu.samples().rows() >= n) {
        // Random subsample without replacement (partial Fisher-Yates).
        const Eigen::Index m = mu.samples().rows();
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(m));
        std::iota(idx.begin(), idx.end(), Eigen::Index{0});
        Points y(n, dim);
        for (int i = 0; i < n; ++i) {
            const auto j = static_cast<std::size_t>(i) +
                           static_cast<std::size_t>(uniform01(rng) * static_cast<double>(m - i));
            std::swap(idx[static_cast<std::size_t>(i)], idx[std::min(j, static_cast<std::size_t>(m - 1))]);
            y.row(i) = mu.samples().row(idx[static_cast<std::size_t>(i)]);
        }
        return y;
    }
    std::vector<double> shift;
    if (restart > 0) {
        shift.resize(static_cast<std::size_t>(dim));
        for (auto& s : shift) s = uniform01(rng);
    }
    const Points h = halton_points(n, dim, shift);
    Points y(n, dim);
    for (int i = 0; i < n; ++i) mu.from_unit(row(h, i), row(y, i));
    return y;
}

}  // namespace

DiscrepancyCertificate discrepancy(const Kernel& kernel, const Measure& mu, const Points& y,
                                   const DiscrepancyOptions& opts) {
    if (y.rows() < 1) throw InvalidArgument("discrepancy: empty point set");
    if (y.cols() != mu.dim()) throw InvalidArgument("discrepancy: point dimension mismatch");
    const DiscrepancyObjective::Impl obj(kernel, mu, static_cast<int>(y.rows()), opts);
    return certify(obj, y);
}

PointSequence minimize_discrepancy(const Kernel& kernel, const Measure& mu, int n, const OptimizerOptions& opts) {
    if (n < 1) throw InvalidArgument("minimize_discrepancy: N must be at least 1");
    if (opts.restarts < 0 || opts.max_iters < 0) throw InvalidArgument("minimize_discrepancy: negative option");
    if (opts.restarts == 0 && !opts.initial) throw InvalidArgument("minimize_discrepancy: no starting point");
    const DiscrepancyObjective::Impl obj(kernel, mu, n, opts.eval);
    const double tol = opts.grad_tol < 0.0 ? 1e-7 / n : opts.grad_tol;

    std::vector<Points> starts;
    if (opts.initial) {
        if (opts.initial->rows() != n || opts.initial->cols() != mu.dim())
            throw InvalidArgument("minimize_discrepancy: initial configuration has the wrong shape");
        Points y = *opts.initial;
        for (Eigen::Index i = 0; i < n; ++i) mu.project(row(y, i));
        starts.push_back(std::move(y));
    }
    for (int r = 0; r < opts.restarts; ++r) starts.push_back(initial_design(mu, n, r, opts.seed));

    std::optional<DescentResult> best;
    for (std::size_t s = 0; s < starts.size(); ++s) {
        Rng jitter(derive_seed(opts.seed, {stream::jitter, s}));
        DescentResult r = descend(obj, std::move(starts[s]), opts, tol, jitter);
        if (!best || r.value < best->value) best = std::move(r);
    }

    PointSequence out;
    out.points = std::move(best->y);
    out.domain = mu.id();
    DiscrepancyCertificate c = certify(obj, out.points);
    c.iterations = best->iterations;
    c.converged = best->converged;
    c.grad_norm = best->grad_norm;
    out.certificate = std::move(c);
    return out;
}

double radical_inverse(std::uint64_t i, int base) {
    if (base < 2) throw InvalidArgument("radical_inverse: base must be at least 2");
    const double inv = 1.0 / base;
    double f = inv, r = 0.0;
    while (i > 0) {
        r += static_cast<double>(i % static_cast<std::uint64_t>(base)) * f;
        i /= static_cast<std::uint64_t>(base);
        f *= inv;
    }
    return r;
}

int nth_prime(int k) {
    if (k < 0) throw InvalidArgument("nth_prime: negative index");
    int count = -1;
    for (int c = 2;; ++c) {
        bool prime = true;
        for (int p = 2; p * p <= c; ++p)
            if (c % p == 0) {
                prime = false;
                break;
            }
        if (prime && ++count == k) return c;
    }
}

PointSequence baseline_sequence(BaselineKind kind, int n, int dim, std::uint64_t seed) {
    if (n < 1 || dim < 1) throw InvalidArgument("baseline_sequence: N and D must be positive");
    PointSequence out;
    out.domain = Measure::unit_cube(dim).id();
    if (kind == BaselineKind::halton) {
        out.points = halton_points(n, dim, {});
        return out;
    }
    Rng rng(derive_seed(seed, {stream::baseline}));
    out.points.resize(n, dim);
    for (int i = 0; i < n; ++i)
        for (int d = 0; d < dim; ++d) out.points(i, d) = uniform01(rng);
    return out;
}

}  // namespace tmm
