#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tmm/forward.hpp"

namespace tmm {

enum class StochasticKind { row_stochastic, bi_stochastic };

std::string to_string(StochasticKind kind);

struct TransitionMatrix {
    double source_time = 0.0;
    double target_time = 0.0;
    Eigen::MatrixXd pi;
    StochasticKind kind = StochasticKind::row_stochastic;
    // Particles without any child that fell back to a uniform row.
    std::vector<int> empty_rows;
    int sinkhorn_sweeps = 0;
};

struct TransitionOptions {
    double sinkhorn_tol = 1e-8;
    int sinkhorn_max_sweeps = 10000;
};

// pi(n, m) = share of the children of y^n(t_j) assigned to y^m(t_{j+1}).
// With `martingale`, Sinkhorn scaling makes pi doubly stochastic; throws
// NumericalError with the residual when it does not converge.
TransitionMatrix transition_matrix(const ParticleFlow& flow, int j, bool martingale,
                                   const TransitionOptions& opts = {});

// One matrix per step, bi-stochastic when flow.martingale is set.
std::vector<TransitionMatrix> transition_matrices(const ParticleFlow& flow, const TransitionOptions& opts = {});

// Sinkhorn-Knopp scaling of a nonnegative square matrix in place. Returns the
// number of sweeps, or -1 when row and column sums are not within tol of 1
// after max_sweeps.
int sinkhorn(Eigen::MatrixXd& a, double tol, int max_sweeps);

struct Payoff {
    std::vector<std::string> ids;
    // Cashflows of every instrument paid at time t in state x.
    std::function<Eigen::VectorXd(double t, Point x)> cashflow;
};

struct FairValueSurface {
    std::vector<double> times;
    // values[j](n, m): value of instrument m at particle y^n(t_j).
    std::vector<Eigen::MatrixXd> values;
    std::vector<std::string> payoff_ids;

    // Mean over the particles at t_0.
    Eigen::VectorXd price() const;
};

// P(T) = cashflow(T, Y(T)); P(t_j) = pi_j P(t_{j+1}) + cashflow(t_j, Y(t_j)) if
// t_j is a pay time. Pay times must lie on the grid (within 1e-12); T always
// pays.
FairValueSurface backward_solve(const ParticleFlow& flow, const std::vector<TransitionMatrix>& matrices,
                                const Payoff& payoff, const std::vector<double>& pay_times = {});

enum class Regularization {
    fixed,  // lambda = lambda_rel * trace(K) / N
    gcv,    // per instrument, generalized cross-validation over lambda_rel in [1e-12, 1]
};

struct SensitivityOptions {
    // Interpolation kernel. Default: gaussian with unit length on coordinates
    // standardized by the particle mean and standard deviation.
    std::optional<Kernel> kernel;
    double length_scale = 1.0;
    // Tikhonov parameter lambda = lambda_rel * trace(K) / N.
    double lambda_rel = 1e-8;
    // Noisy surfaces (values estimated from finitely many children) call for
    // gcv; fixed keeps the interpolant nearly exact.
    Regularization regularization = Regularization::fixed;
    // Polynomial part of the fit: -1 none, 0 constants, 1 affine. With it,
    // constants and (degree 1) linear functions are differentiated exactly.
    int polynomial_degree = 1;
    double max_condition = 1e12;
};

struct Sensitivities {
    // by_dim[d](n, m) approximates d/dx_d of instrument m at y^n(t_j).
    std::vector<Eigen::MatrixXd> by_dim;
    // Largest condition number of K + lambda I over the instruments.
    double condition = 0.0;
    // Tikhonov parameter used per instrument.
    Eigen::VectorXd lambda;
};

// Differentiation matrices G_d = D_d (K + lambda I)^{-1}, D_d(n, m) the
// derivative of K(., y^m) at y^n, applied to arbitrary N x M values. With a
// polynomial part the coefficients are constrained to be orthogonal to the
// polynomials and the polynomial's gradient is added.
// Throws NumericalError when cond(K + lambda I) exceeds max_condition.
Sensitivities differentiate(const Points& y, const Eigen::MatrixXd& values, const SensitivityOptions& opts = {});

Sensitivities sensitivity(const ParticleFlow& flow, const FairValueSurface& surface, int j,
                          const SensitivityOptions& opts = {});

// E[P(s, X_s) | X_{t_0} = y0]: the chain pi_0 ... pi_{k-1} applied to P(s)
// and averaged over the particles at t_0.
Eigen::VectorXd forward_value(const ParticleFlow& flow, const std::vector<TransitionMatrix>& matrices,
                              const FairValueSurface& surface, double s);

}  // namespace tmm
