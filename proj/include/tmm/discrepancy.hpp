#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "tmm/lattice.hpp"
#include "tmm/random.hpp"

namespace tmm {

enum class MeasureKind { lattice_cell, uniform_box, empirical };

std::string to_string(MeasureKind kind);

// Target measure mu for the discrepancy functional.
//   lattice_cell:  uniform on the fundamental cell of a lattice (periodic)
//   uniform_box:   uniform on [lo, hi] (coordinates are clamped)
//   empirical:     equal weights on a fixed sample cloud, supported on the
//                  bounding box [lo, hi] of the cloud unless given
class Measure {
public:
    static Measure lattice_cell(const Lattice& lattice);
    static Measure unit_cube(int dim);
    static Measure uniform_box(Eigen::VectorXd lo, Eigen::VectorXd hi);
    static Measure empirical(Points samples, std::string label = "empirical");
    static Measure empirical(Points samples, Eigen::VectorXd lo, Eigen::VectorXd hi,
                             std::string label = "empirical");

    MeasureKind kind() const { return kind_; }
    int dim() const { return dim_; }
    std::string id() const;

    // Valid for lattice_cell.
    const Lattice& lattice() const;
    // Box bounds (cell bounds for a rectangular lattice cell).
    const Eigen::VectorXd& lo() const { return lo_; }
    const Eigen::VectorXd& hi() const { return hi_; }
    bool has_box() const { return has_box_; }
    const Points& samples() const { return samples_; }

    // Draws one point of mu into out[0..dim).
    void sample(Rng& rng, double* out) const;
    // Maps x back into the support (wrap for cells, clamp for boxes).
    void project(std::span<double> x) const;
    // Point used to spread an initial design: h in [0, 1)^D -> support.
    void from_unit(Point h, std::span<double> out) const;

private:
    MeasureKind kind_ = MeasureKind::uniform_box;
    int dim_ = 0;
    std::optional<Lattice> lattice_;
    Eigen::VectorXd lo_, hi_;
    bool has_box_ = false;
    Points samples_;
    std::string label_;
};

enum class CertificateMethod { closed_form, quadrature, exact_sum, monte_carlo };

std::string to_string(CertificateMethod m);

struct DiscrepancyCertificate {
    double value = 0.0;
    std::string kernel_id;
    std::string mu_id;
    CertificateMethod method = CertificateMethod::closed_form;
    // Monte-Carlo metadata (method == monte_carlo).
    long long samples = 0;
    std::uint64_t seed = 0;
    double std_error = 0.0;  // standard error of value
    // Optimizer metadata.
    int iterations = 0;
    bool converged = true;
    double grad_norm = 0.0;
};

struct PointSequence {
    Points points;
    std::string domain;
    std::optional<DiscrepancyCertificate> certificate;
};

struct DiscrepancyOptions {
    long long mc_samples = 100000;
    std::uint64_t seed = 0;
    bool force_monte_carlo = false;
    // Empirical measures with at most this many samples are summed exactly.
    long long exact_sum_limit = 8192;
};

// E_K(Y, N, D). Integral terms are exact for a lattice kernel on its own cell,
// Gauss-Legendre tensor quadrature for separable kernels on boxes, finite sums
// for small empirical measures and Monte Carlo otherwise.
// Throws NumericalError when the estimate is not finite.
DiscrepancyCertificate discrepancy(const Kernel& kernel, const Measure& mu, const Points& y,
                                   const DiscrepancyOptions& opts = {});

// Squared discrepancy and its gradient for a fixed evaluation plan; exposed so
// that callers can run their own descent loops.
class DiscrepancyObjective {
public:
    DiscrepancyObjective(Kernel kernel, Measure mu, int n, const DiscrepancyOptions& opts = {});
    ~DiscrepancyObjective();
    DiscrepancyObjective(DiscrepancyObjective&&) noexcept;
    DiscrepancyObjective& operator=(DiscrepancyObjective&&) noexcept;

    CertificateMethod method() const;
    // E^2(Y); fills grad (N x D) when non-null.
    double value(const Points& y, Points* grad = nullptr) const;
    // Integral of K(x, y) dmu(x).
    double potential(Point y) const;
    // Double integral of K against mu x mu.
    double self_energy() const;

    struct Impl;

private:
    std::unique_ptr<Impl> impl_;
};

struct OptimizerOptions {
    int restarts = 5;
    // Negative: 1e-7 / N.
    double grad_tol = -1.0;
    int max_iters = 10000;
    std::uint64_t seed = 0;
    DiscrepancyOptions eval;
    // Extra starting configuration tried before the restarts.
    std::optional<Points> initial;
};

// Approximate sharp discrepancy sequence: projected gradient descent on E^2
// with Armijo backtracking from Halton-type initializations.
PointSequence minimize_discrepancy(const Kernel& kernel, const Measure& mu, int n,
                                   const OptimizerOptions& opts = {});

enum class BaselineKind { iid_uniform, halton };

std::string to_string(BaselineKind kind);

// Points in [0, 1)^D. Halton uses the first D primes and starts at index 1.
PointSequence baseline_sequence(BaselineKind kind, int n, int dim, std::uint64_t seed = 0);

// Radical inverse of i in the given base.
double radical_inverse(std::uint64_t i, int base);
int nth_prime(int k);  // nth_prime(0) == 2

}  // namespace tmm
