#include "tmm/backward.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "tmm/error.hpp"
#include "tmm/parallel.hpp"

namespace tmm {

std::string to_string(StochasticKind kind) {
    return kind == StochasticKind::bi_stochastic ? "bi-stochastic" : "row-stochastic";
}

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

double sum_residual(const Eigen::MatrixXd& a) {
    const double r = (a.rowwise().sum().array() - 1.0).abs().maxCoeff();
    const double c = (a.colwise().sum().array() - 1.0).abs().maxCoeff();
    return std::max(r, c);
}

void check_step(const ParticleFlow& flow, int j) {
    if (j < 0 || j >= static_cast<int>(flow.steps.size())) throw InvalidArgument("step index out of range");
}

int grid_index(const std::vector<double>& times, double s) {
    for (std::size_t j = 0; j < times.size(); ++j)
        if (std::abs(times[j] - s) <= 1e-12 * std::max(1.0, std::abs(s))) return static_cast<int>(j);
    return -1;
}

}  // namespace

int sinkhorn(Eigen::MatrixXd& a, double tol, int max_sweeps) {
    if (a.rows() != a.cols()) throw InvalidArgument("sinkhorn: matrix must be square");
    if ((a.array() < 0.0).any() || !a.allFinite()) throw InvalidArgument("sinkhorn: entries must be nonnegative");
    for (int sweep = 0; sweep <= max_sweeps; ++sweep) {
        if (sum_residual(a) <= tol) return sweep;
        if (sweep == max_sweeps) break;
        const Eigen::VectorXd r = a.rowwise().sum();
        if ((r.array() <= 0.0).any()) return -1;
        a = r.cwiseInverse().asDiagonal() * a;
        const Eigen::RowVectorXd c = a.colwise().sum();
        if ((c.array() <= 0.0).any()) return -1;
        a = a * c.cwiseInverse().asDiagonal();
    }
    return -1;
}

TransitionMatrix transition_matrix(const ParticleFlow& flow, int j, bool martingale, const TransitionOptions& opts) {
    check_step(flow, j);
    const ForwardStep& step = flow.steps[static_cast<std::size_t>(j)];
    const int n = flow.n();
    if (step.assigned.size() != step.parent.size()) throw InvalidArgument("transition_matrix: missing assignment data");
    TransitionMatrix t;
    t.source_time = flow.times[static_cast<std::size_t>(j)];
    t.target_time = flow.times[static_cast<std::size_t>(j) + 1];
    t.pi = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t c = 0; c < step.parent.size(); ++c) t.pi(step.parent[c], step.assigned[c]) += 1.0;
    for (int r = 0; r < n; ++r) {
        const double total = t.pi.row(r).sum();
        if (total > 0.0) {
            t.pi.row(r) /= total;
        } else {
            t.pi.row(r).setConstant(1.0 / n);
            t.empty_rows.push_back(r);
        }
    }
    if (martingale) {
        Eigen::MatrixXd scaled = t.pi;
        const int sweeps = sinkhorn(scaled, opts.sinkhorn_tol, opts.sinkhorn_max_sweeps);
        if (sweeps < 0)
            throw NumericalError("transition_matrix: Sinkhorn did not converge at step " + std::to_string(j) +
                                 " (residual " + fmt_double(sum_residual(scaled)) + ", " +
                                 std::to_string((t.pi.colwise().sum().array() == 0.0).count()) +
                                 " empty columns)");
        t.pi = std::move(scaled);
        t.sinkhorn_sweeps = sweeps;
        t.kind = StochasticKind::bi_stochastic;
    }
    return t;
}

std::vector<TransitionMatrix> transition_matrices(const ParticleFlow& flow, const TransitionOptions& opts) {
    std::vector<TransitionMatrix> out;
    for (std::size_t j = 0; j < flow.steps.size(); ++j)
        out.push_back(transition_matrix(flow, static_cast<int>(j), flow.martingale, opts));
    return out;
}

Eigen::VectorXd FairValueSurface::price() const {
    if (values.empty()) throw InvalidArgument("price: empty surface");
    return values.front().colwise().mean().transpose();
}

namespace {

Eigen::MatrixXd cashflows(const Payoff& payoff, double t, const Points& y) {
    const auto m = static_cast<Eigen::Index>(payoff.ids.size());
    Eigen::MatrixXd v(y.rows(), m);
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
        const Eigen::VectorXd c = payoff.cashflow(t, row(y, i));
        if (c.size() != m) throw InvalidArgument("backward_solve: payoff returned the wrong number of cashflows");
        if (!c.allFinite()) throw NumericalError("backward_solve: non-finite cashflow");
        v.row(i) = c.transpose();
    }
    return v;
}

}  // namespace

FairValueSurface backward_solve(const ParticleFlow& flow, const std::vector<TransitionMatrix>& matrices,
                                const Payoff& payoff, const std::vector<double>& pay_times) {
    const std::size_t steps = flow.steps.size();
    if (matrices.size() != steps) throw InvalidArgument("backward_solve: one transition matrix per step required");
    if (payoff.ids.empty() || !payoff.cashflow) throw InvalidArgument("backward_solve: empty payoff");
    const int n = flow.n();
    for (const auto& m : matrices)
        if (m.pi.rows() != n || m.pi.cols() != n) throw InvalidArgument("backward_solve: matrix size mismatch");
    std::vector<bool> pays(flow.times.size(), false);
    for (double s : pay_times) {
        const int k = grid_index(flow.times, s);
        if (k < 0) throw InvalidArgument("backward_solve: pay time is not on the grid");
        pays[static_cast<std::size_t>(k)] = true;
    }

    FairValueSurface out;
    out.times = flow.times;
    out.payoff_ids = payoff.ids;
    out.values.resize(flow.times.size());
    out.values[steps] = cashflows(payoff, flow.times[steps], flow.states[steps]);
    for (std::size_t j = steps; j-- > 0;) {
        out.values[j] = matrices[j].pi * out.values[j + 1];
        if (pays[j]) out.values[j] += cashflows(payoff, flow.times[j], flow.states[j]);
    }
    return out;
}

Sensitivities differentiate(const Points& y, const Eigen::MatrixXd& values, const SensitivityOptions& opts) {
    const Eigen::Index n = y.rows();
    const Eigen::Index dim = y.cols();
    if (n < 1 || values.rows() != n) throw InvalidArgument("differentiate: values must have one row per particle");
    if (!(opts.lambda_rel >= 0.0)) throw InvalidArgument("differentiate: lambda_rel must be nonnegative");

    Points z = y;
    Eigen::VectorXd inv_scale = Eigen::VectorXd::Ones(dim);
    Kernel kernel = opts.kernel ? *opts.kernel : Kernel::gaussian(static_cast<int>(dim), opts.length_scale);
    if (kernel.dim() != dim) throw InvalidArgument("differentiate: kernel dimension mismatch");
    if (!opts.kernel) {
        for (Eigen::Index d = 0; d < dim; ++d) {
            const double mean = y.col(d).mean();
            const double sd = std::sqrt((y.col(d).array() - mean).square().mean());
            const double s = sd > 0.0 ? sd : 1.0;
            z.col(d) = (y.col(d).array() - mean) / s;
            inv_scale[d] = 1.0 / s;
        }
    }

    // Polynomial part: constants and, for degree 1, every coordinate that
    // actually varies.
    std::vector<Eigen::Index> linear;
    if (opts.polynomial_degree >= 1)
        for (Eigen::Index d = 0; d < dim; ++d)
            if (z.col(d).maxCoeff() > z.col(d).minCoeff()) linear.push_back(d);
    const Eigen::Index q = opts.polynomial_degree >= 0 ? 1 + static_cast<Eigen::Index>(linear.size()) : 0;
    if (n <= q) throw InvalidArgument("differentiate: too few particles for the polynomial part");
    Eigen::MatrixXd poly(n, q);
    if (q > 0) {
        poly.col(0).setOnes();
        for (std::size_t l = 0; l < linear.size(); ++l) poly.col(static_cast<Eigen::Index>(l) + 1) = z.col(linear[l]);
    }

    // With the polynomial part the fit solves
    //   [K + lambda I, P; P^T, 0] [c; b] = [v; 0],
    // i.e. c = Q2 (Q2^T (K + lambda I) Q2)^{-1} Q2^T v for Q2 spanning P^T c = 0.
    const Eigen::MatrixXd k = gram(kernel, z);
    const double base = k.trace() / static_cast<double>(n);
    Eigen::MatrixXd q2 = Eigen::MatrixXd::Identity(n, n);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr;
    if (q > 0) {
        qr.compute(poly);
        const Eigen::MatrixXd full = qr.householderQ();
        q2 = full.rightCols(n - q);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q2.transpose() * k * q2);
    const Eigen::MatrixXd basis = q2 * es.eigenvectors();
    const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    const Eigen::MatrixXd coef = basis.transpose() * values;
    const Eigen::Index r = ev.size();

    Sensitivities out;
    out.lambda.resize(values.cols());
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
        double lambda = opts.lambda_rel * base;
        if (opts.regularization == Regularization::gcv) {
            // Generalized cross-validation over a log grid of lambda_rel;
            // the residual of the fit is lambda c.
            double best = std::numeric_limits<double>::infinity();
            for (int e = -48; e <= 0; ++e) {
                const double lam = std::pow(10.0, 0.25 * e) * base;
                double resid = 0.0, trace = 0.0;
                for (Eigen::Index i = 0; i < r; ++i) {
                    const double shrink = lam / (ev[i] + lam);
                    resid += shrink * shrink * coef(i, c) * coef(i, c);
                    trace += shrink;
                }
                const double score = static_cast<double>(n) * resid / (trace * trace);
                if (score < best) {
                    best = score;
                    lambda = lam;
                }
            }
        }
        out.lambda[c] = lambda;
        const double lo = ev.minCoeff() + lambda;
        out.condition = std::max(out.condition, lo > 0.0 ? (ev.maxCoeff() + lambda) / lo
                                                         : std::numeric_limits<double>::infinity());
    }
    if (!(out.condition <= opts.max_condition)) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "differentiate: kernel matrix condition %.3g exceeds %.3g", out.condition,
                      opts.max_condition);
        throw NumericalError(buf);
    }
    Eigen::MatrixXd scaled = coef;
    for (Eigen::Index c = 0; c < values.cols(); ++c) scaled.col(c).array() /= ev.array() + out.lambda[c];
    const Eigen::MatrixXd w = basis * scaled;
    Eigen::MatrixXd b(q, values.cols());
    if (q > 0) {
        Eigen::MatrixXd rest = values - k * w;
        for (Eigen::Index c = 0; c < values.cols(); ++c) rest.col(c) -= out.lambda[c] * w.col(c);
        const Eigen::MatrixXd proj = qr.householderQ().transpose() * rest;
        b = qr.matrixQR().topLeftCorner(q, q).triangularView<Eigen::Upper>().solve(proj.topRows(q));
    }

    std::vector<Eigen::MatrixXd> dk(static_cast<std::size_t>(dim), Eigen::MatrixXd(n, n));
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t lo, std::size_t hi) {
        Eigen::VectorXd g(dim);
        for (auto i = static_cast<Eigen::Index>(lo); i < static_cast<Eigen::Index>(hi); ++i)
            for (Eigen::Index m = 0; m < n; ++m) {
                kernel.gradient_unchecked(&z(i, 0), &z(m, 0), g.data());
                for (Eigen::Index d = 0; d < dim; ++d) dk[static_cast<std::size_t>(d)](i, m) = g[d] * inv_scale[d];
            }
    });
    for (Eigen::Index d = 0; d < dim; ++d) {
        Eigen::MatrixXd gd = dk[static_cast<std::size_t>(d)] * w;
        for (std::size_t l = 0; l < linear.size(); ++l)
            if (linear[l] == d) gd.rowwise() += b.row(static_cast<Eigen::Index>(l) + 1) * inv_scale[d];
        out.by_dim.push_back(std::move(gd));
    }
    return out;
}

Sensitivities sensitivity(const ParticleFlow& flow, const FairValueSurface& surface, int j,
                          const SensitivityOptions& opts) {
    if (j < 0 || j >= static_cast<int>(flow.states.size()) || j >= static_cast<int>(surface.values.size()))
        throw InvalidArgument("sensitivity: time index out of range");
    return differentiate(flow.states[static_cast<std::size_t>(j)], surface.values[static_cast<std::size_t>(j)], opts);
}

Eigen::VectorXd forward_value(const ParticleFlow& flow, const std::vector<TransitionMatrix>& matrices,
                              const FairValueSurface& surface, double s) {
    if (s < flow.times.front()) throw InvalidArgument("forward_value: time precedes the start of the flow");
    const int k = grid_index(flow.times, s);
    if (k < 0) throw InvalidArgument("forward_value: time is not on the grid");
    if (static_cast<int>(matrices.size()) < k) throw InvalidArgument("forward_value: missing transition matrices");
    Eigen::MatrixXd v = surface.values[static_cast<std::size_t>(k)];
    for (int i = k; i-- > 0;) v = matrices[static_cast<std::size_t>(i)].pi * v;
    return v.colwise().mean().transpose();
}

}  // namespace tmm
