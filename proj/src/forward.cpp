#include "tmm/forward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tmm/error.hpp"
#include "tmm/parallel.hpp"

namespace tmm {

namespace {

constexpr double kUnitEdge = 1.0 - 0x1.0p-52;

void check_grid(const std::vector<double>& t) {
    if (t.size() < 2) throw InvalidArgument("propagate: time grid needs at least two points");
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!std::isfinite(t[i])) throw InvalidArgument("propagate: time grid must be finite");
        if (i > 0 && !(t[i] > t[i - 1])) throw InvalidArgument("propagate: time grid must be strictly increasing");
    }
}

// Children of every particle integrated over [t, t + dt]. Row c = p * k + i
// is child i of particle p.
Points launch_children(const SdeModel& model, const Points& y, double t, double dt, int k, int j,
                       const ForwardOptions& opts) {
    const int n = static_cast<int>(y.rows());
    const int dim = static_cast<int>(y.cols());
    const int n_sub = opts.max_substep > 0.0 ? std::max(1, static_cast<int>(std::ceil(dt / opts.max_substep - 1e-9))) : 1;
    const double h = dt / n_sub;
    const double sqrt_h = std::sqrt(h);
    Points cloud(static_cast<Eigen::Index>(n) * k, dim);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t b, std::size_t e) {
        const auto ud = static_cast<std::size_t>(dim);
        std::vector<double> x(ud), next(ud), z(ud), remaining(ud);
        std::vector<int> strata(static_cast<std::size_t>(k) * ud);
        for (std::size_t p = b; p < e; ++p) {
            Rng rng(derive_seed(opts.seed, {stream::forward, static_cast<std::uint64_t>(j), p}));
            if (opts.stratify) {
                for (std::size_t d = 0; d < ud; ++d) {
                    int* s = &strata[d * static_cast<std::size_t>(k)];
                    std::iota(s, s + k, 0);
                    for (int i = k - 1; i > 0; --i) {
                        const int r = std::min(i, static_cast<int>(uniform01(rng) * (i + 1)));
                        std::swap(s[i], s[r]);
                    }
                }
            }
            for (int i = 0; i < k; ++i) {
                for (std::size_t d = 0; d < ud; ++d) x[d] = y(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(d));
                if (opts.stratify) {
                    for (std::size_t d = 0; d < ud; ++d) {
                        const double v = (strata[d * static_cast<std::size_t>(k) + static_cast<std::size_t>(i)] +
                                          (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53) /
                                         k;
                        remaining[d] = std::sqrt(dt) * normal_quantile(v);
                    }
                }
                for (int s = 0; s < n_sub; ++s) {
                    const double tau = dt - s * h;
                    for (std::size_t d = 0; d < ud; ++d) {
                        if (!opts.stratify) {
                            z[d] = standard_normal(rng);
                            continue;
                        }
                        // Brownian bridge towards the stratified endpoint.
                        double inc = remaining[d];
                        if (s + 1 < n_sub) inc = remaining[d] * (h / tau) + std::sqrt(h * (tau - h) / tau) * standard_normal(rng);
                        remaining[d] -= inc;
                        z[d] = inc / sqrt_h;
                    }
                    model.step(t + s * h, h, x.data(), z.data(), next.data());
                    x.swap(next);
                }
                const auto row_index = static_cast<Eigen::Index>(p) * k + i;
                for (std::size_t d = 0; d < ud; ++d) {
                    if (!std::isfinite(x[d]))
                        throw NumericalError("propagate: non-finite auxiliary state at step " + std::to_string(j));
                    cloud(row_index, static_cast<Eigen::Index>(d)) = x[d];
                }
            }
        }
    });
    return cloud;
}

TransportMap fit_map(const Points& cloud, double sd_floor) {
    const Eigen::VectorXd mean = cloud.colwise().mean().transpose();
    Eigen::VectorXd scale(cloud.cols());
    for (Eigen::Index d = 0; d < cloud.cols(); ++d) {
        const double var = (cloud.col(d).array() - mean[d]).square().sum() / std::max<Eigen::Index>(1, cloud.rows() - 1);
        const double sd = std::max(std::sqrt(var), sd_floor * std::max(1.0, std::abs(mean[d])));
        scale[d] = std::sqrt(2.0) * sd;
    }
    return TransportMap::erf(mean, scale);
}

Points to_unit(const TransportMap& map, const Points& x) {
    Points u(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index d = 0; d < x.cols(); ++d)
            u(i, d) = std::clamp(map.apply_coord(static_cast<int>(d), x(i, d)), -kUnitEdge, kUnitEdge);
    return u;
}

Points from_unit(const TransportMap& map, const Points& u) {
    Points x(u.rows(), u.cols());
    for (Eigen::Index i = 0; i < u.rows(); ++i)
        for (Eigen::Index d = 0; d < u.cols(); ++d) x(i, d) = map.inverse_coord(static_cast<int>(d), u(i, d));
    return x;
}

Measure cloud_measure(const Points& u, const std::string& label) {
    Eigen::VectorXd lo = u.colwise().minCoeff().transpose();
    Eigen::VectorXd hi = u.colwise().maxCoeff().transpose();
    for (Eigen::Index d = 0; d < lo.size(); ++d) {
        if (hi[d] - lo[d] < 1e-12) {
            lo[d] -= 1e-12;
            hi[d] += 1e-12;
        }
        lo[d] = std::max(lo[d], -kUnitEdge);
        hi[d] = std::min(hi[d], kUnitEdge);
    }
    return Measure::empirical(u, lo, hi, label);
}

Points subsample(const Points& u, int n, std::uint64_t seed) {
    Rng rng(seed);
    const Eigen::Index m = u.rows();
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(m));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    Points y(n, u.cols());
    for (int i = 0; i < n; ++i) {
        const auto r = std::min<Eigen::Index>(m - 1, i + static_cast<Eigen::Index>(uniform01(rng) * static_cast<double>(m - i)));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(r)]);
        y.row(i) = u.row(idx[static_cast<std::size_t>(i)]);
    }
    return y;
}

std::vector<int> nearest(const Points& from, const Points& to) {
    std::vector<int> out(static_cast<std::size_t>(from.rows()));
    parallel_for(out.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            double best = std::numeric_limits<double>::infinity();
            int arg = 0;
            for (Eigen::Index m = 0; m < to.rows(); ++m) {
                const double d2 = (from.row(static_cast<Eigen::Index>(i)) - to.row(m)).squaredNorm();
                if (d2 < best) {
                    best = d2;
                    arg = static_cast<int>(m);
                }
            }
            out[i] = arg;
        }
    });
    return out;
}

}  // namespace

ParticleFlow propagate(const SdeModel& model, const Kernel& base_kernel, Point y0, const std::vector<double>& t_grid,
                       int n, const ForwardOptions& opts) {
    check_grid(t_grid);
    const int dim = model.dim();
    if (n < 2) throw InvalidArgument("propagate: N must be at least 2");
    if (static_cast<int>(y0.size()) != dim) throw InvalidArgument("propagate: initial state dimension mismatch");
    if (base_kernel.dim() != dim) throw InvalidArgument("propagate: kernel dimension mismatch");
    if (opts.children_per_particle < 1) throw InvalidArgument("propagate: children_per_particle must be positive");
    if (!model.in_domain(y0)) throw DomainError("propagate: initial state outside the model domain");

    ParticleFlow flow;
    flow.base_kernel = base_kernel;
    flow.times = t_grid;
    flow.model_id = model.id();
    flow.martingale = model.martingale();
    flow.seed = opts.seed;

    Points y(n, dim);
    {
        Rng rng(derive_seed(opts.seed, {stream::jitter}));
        for (int i = 0; i < n; ++i)
            for (int d = 0; d < dim; ++d) y(i, d) = y0[static_cast<std::size_t>(d)] + 1e-9 * (uniform01(rng) - 0.5);
    }
    Points dirac(1, dim);
    for (int d = 0; d < dim; ++d) dirac(0, d) = y0[static_cast<std::size_t>(d)];
    flow.certificates.push_back(discrepancy(base_kernel, Measure::empirical(dirac, "dirac"), y));
    flow.kernels.push_back(base_kernel);
    flow.states.push_back(y);

    const int k = opts.children_per_particle;
    for (std::size_t j = 0; j + 1 < t_grid.size(); ++j) {
        const int step = static_cast<int>(j);
        ForwardStep rec;
        rec.cloud = launch_children(model, y, t_grid[j], t_grid[j + 1] - t_grid[j], k, step, opts);
        rec.parent.resize(static_cast<std::size_t>(rec.cloud.rows()));
        for (std::size_t c = 0; c < rec.parent.size(); ++c) rec.parent[c] = static_cast<int>(c / static_cast<std::size_t>(k));
        rec.map = fit_map(rec.cloud, opts.sd_floor);
        const Kernel cert_kernel = transported_kernel(base_kernel, rec.map);

        const Points u = to_unit(rec.map, rec.cloud);
        const std::string label = "cloud_t" + std::to_string(j + 1);
        const Measure mu = cloud_measure(u, label);

        // Starting configurations, all in the quantization coordinates.
        Points warm = to_unit(rec.map, y);
        for (Eigen::Index i = 0; i < warm.rows(); ++i) mu.project(row(warm, i));
        Points means(n, dim);
        for (int p = 0; p < n; ++p) means.row(p) = u.middleRows(static_cast<Eigen::Index>(p) * k, k).colwise().mean();
        for (Eigen::Index i = 0; i < means.rows(); ++i) mu.project(row(means, i));
        const Points sub = subsample(u, n, derive_seed(opts.seed, {stream::subsample, j}));

        Points next = y;
        DiscrepancyCertificate cert;
        try {
            const DiscrepancyObjective obj(base_kernel, mu, n, opts.quantizer.eval);
            const double v_warm = obj.value(warm);
            const double v_means = obj.value(means);
            const double v_sub = obj.value(sub);
            rec.subsample_value = std::sqrt(std::max(0.0, v_sub));
            const Points* start = &warm;
            rec.start = "warm";
            double best = v_warm;
            if (v_means < best) {
                start = &means;
                rec.start = "child_means";
                best = v_means;
            }
            if (v_sub < best) {
                start = &sub;
                rec.start = "subsample";
            }
            OptimizerOptions q = opts.quantizer;
            q.restarts = 0;
            q.initial = *start;
            q.seed = derive_seed(opts.seed, {stream::forward, j});
            const PointSequence seq = minimize_discrepancy(base_kernel, mu, n, q);
            next = from_unit(rec.map, seq.points);
            if (!next.allFinite()) throw NumericalError("non-finite particle after quantization");
            cert = *seq.certificate;
            rec.assigned = nearest(u, seq.points);
        } catch (const NumericalError& e) {
            rec.flagged = true;
            rec.warning = e.what();
        } catch (const DegenerateInput& e) {
            rec.flagged = true;
            rec.warning = e.what();
        }
        if (rec.flagged) {
            next = y;
            cert = DiscrepancyCertificate{};
            cert.value = std::numeric_limits<double>::quiet_NaN();
            cert.method = CertificateMethod::exact_sum;
            cert.converged = false;
            rec.assigned = nearest(u, to_unit(rec.map, y));
        }
        cert.kernel_id = cert_kernel.id();
        cert.mu_id = "empirical(" + label + ",M=" + std::to_string(rec.cloud.rows()) + ")";
        flow.certificates.push_back(std::move(cert));
        flow.kernels.push_back(cert_kernel);
        flow.states.push_back(next);
        flow.steps.push_back(std::move(rec));
        y = std::move(next);
    }
    return flow;
}

namespace {

void check_index(const ParticleFlow& flow, int t_index) {
    if (t_index < 0 || t_index >= static_cast<int>(flow.states.size()))
        throw InvalidArgument("moment: time index out of range");
}

}  // namespace

MomentEstimate moment(const ParticleFlow& flow, int t_index, const std::function<double(Point)>& phi) {
    check_index(flow, t_index);
    const Points& y = flow.states[static_cast<std::size_t>(t_index)];
    double s = 0.0;
    for (Eigen::Index i = 0; i < y.rows(); ++i) s += phi(row(y, i));
    MomentEstimate m;
    m.value = s / static_cast<double>(y.rows());
    m.error_bound = flow.certificates[static_cast<std::size_t>(t_index)].value;
    m.per_unit_norm = true;
    return m;
}

MomentEstimate moment(const ParticleFlow& flow, int t_index, const RkhsElement& phi) {
    check_index(flow, t_index);
    if (phi.kernel.id() != flow.kernels[static_cast<std::size_t>(t_index)].id())
        throw InvalidArgument("moment: test function is not expanded in the certificate kernel");
    MomentEstimate m = moment(flow, t_index, [&](Point x) { return phi(x); });
    m.error_bound *= rkhs_norm(phi);
    m.per_unit_norm = false;
    return m;
}

}  // namespace tmm
