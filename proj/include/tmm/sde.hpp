#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "tmm/random.hpp"
#include "tmm/types.hpp"

namespace tmm {

// Standard normal draw by inversion of one 53-bit uniform; reproducible
// across standard libraries.
double standard_normal(Rng& rng);

struct DriftDiffusion {
    Eigen::VectorXd drift;
    // Effective diffusion: dX = drift dt + diffusion dW with W independent.
    Eigen::MatrixXd diffusion;
};

// dX_t = r(t, X) dt + diag(v(t, X)) L dW_t, with L L^T = correlation.
class SdeModel {
public:
    virtual ~SdeModel() = default;

    int dim() const { return static_cast<int>(correlation_.rows()); }
    const Eigen::MatrixXd& correlation() const { return correlation_; }
    const Eigen::MatrixXd& correlation_factor() const { return factor_; }
    virtual std::string id() const = 0;

    virtual bool in_domain(Point x) const;
    // Throws DomainError outside the state region.
    DriftDiffusion drift_diffusion(double t, Point x) const;

    // Componentwise drift and volatility (before correlation).
    virtual void coefficients(double t, const double* x, double* drift, double* vol) const = 0;

    // Advances x over [t, t + dt] given independent standard normals z[0..D).
    // The default is one Euler-Maruyama step.
    virtual void step(double t, double dt, const double* x, const double* z, double* out) const;

    // Every coordinate is a martingale under the dynamics.
    virtual bool martingale() const { return false; }

protected:
    // Throws InvalidArgument unless correlation is symmetric PSD with unit
    // diagonal (within 1e-12).
    explicit SdeModel(Eigen::MatrixXd correlation);

private:
    Eigen::MatrixXd correlation_;
    Eigen::MatrixXd factor_;
};

struct SabrParams {
    double f0 = 0.03;
    double alpha0 = 0.1;
    double beta = 1.0;
    double nu = 0.1;
    double shift = 0.0;
    double rho12 = 0.5;
};

// State (F, alpha):
//   dF     = alpha (F + s)^beta dW1
//   dalpha = nu alpha dW2,  corr(dW1, dW2) = rho12.
// alpha is advanced exactly in log space; F by arithmetic Euler with
// absorption at F = -s + 1e-12.
class SabrModel final : public SdeModel {
public:
    explicit SabrModel(const SabrParams& p);

    const SabrParams& params() const { return p_; }
    Eigen::VectorXd initial_state() const;

    std::string id() const override;
    bool in_domain(Point x) const override;
    void coefficients(double t, const double* x, double* drift, double* vol) const override;
    void step(double t, double dt, const double* x, const double* z, double* out) const override;
    bool martingale() const override { return true; }

private:
    SabrParams p_;
};

// Named analytic dynamics for configuration files.
//   frozen:    r = 0, v = 0
//   drift:     r = a, v = 0
//   brownian:  r = a, v = sigma
//   gbm:       r = a * x, v = sigma * x (componentwise)
class CustomModel final : public SdeModel {
public:
    enum class Preset { frozen, drift, brownian, gbm };

    CustomModel(Preset preset, Eigen::VectorXd a, Eigen::VectorXd sigma, Eigen::MatrixXd correlation);
    static CustomModel frozen(int dim);

    Preset preset() const { return preset_; }
    std::string id() const override;
    void coefficients(double t, const double* x, double* drift, double* vol) const override;
    bool martingale() const override;

private:
    Preset preset_;
    Eigen::VectorXd a_, sigma_;
};

std::string to_string(CustomModel::Preset p);

struct PathEnsemble {
    std::vector<double> times;
    // states[j] holds all paths at times[j], one path per row.
    std::vector<Points> states;
};

// Paths from x0 on the given grid (t_grid[0] is the start time). Path i draws
// from the stream derive_seed(seed, {paths, i / 4096}) so the result does not
// depend on the worker count.
PathEnsemble euler_paths(const SdeModel& model, Point x0, const std::vector<double>& t_grid, int n_paths,
                         std::uint64_t seed);

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    long long paths = 0;
};

// E[phi(X_T)] with n_steps equal steps on [0, T], streaming over blocks of
// 4096 paths. Optional antithetic pairing.
McEstimate mc_expectation(const SdeModel& model, Point x0, double horizon, int n_steps, long long n_paths,
                          std::uint64_t seed, const std::function<double(Point)>& phi, bool antithetic = false);

// Vector-valued variant: one estimate per component of phi.
std::vector<McEstimate> mc_expectations(const SdeModel& model, Point x0, double horizon, int n_steps,
                                        long long n_paths, std::uint64_t seed, int n_outputs,
                                        const std::function<void(Point, double*)>& phi, bool antithetic = false);

}  // namespace tmm
