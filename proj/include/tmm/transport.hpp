#pragma once

#include <functional>
#include <memory>
#include <string>

#include "tmm/kernel.hpp"

namespace tmm {

enum class TransportKind { identity, erf_componentwise, inverse_cdf_componentwise, composed };

std::string to_string(TransportKind kind);

// Standard normal CDF and its inverse. The quantile uses Wichura's AS241
// rational approximation (relative error ~1e-16 over (0, 1)).
double normal_cdf(double x);
double normal_quantile(double p);

// Componentwise monotone map S = grad h carrying a reference domain onto the
// support of a target measure. Immutable; copies share state.
//
//   identity:      S_d(x) = x                                  on R
//   erf:           S_d(x) = erf((x - loc_d) / scale_d)         on R
//   inverse-cdf:   S_d(x) = mean_d + stdev_d * Phi^{-1}(x)     on (0, 1)
//   composed:      S = outer o inner (inner is applied first)
class TransportMap {
public:
    static TransportMap identity(int dim);
    static TransportMap erf(int dim);
    static TransportMap erf(Eigen::VectorXd loc, Eigen::VectorXd scale);
    static TransportMap inverse_cdf(int dim);
    static TransportMap inverse_cdf(Eigen::VectorXd mean, Eigen::VectorXd stdev);
    static TransportMap composed(const TransportMap& outer, const TransportMap& inner);

    TransportKind kind() const;
    int dim() const;
    std::string id() const;

    // Only the input is checked against the domain of the first-applied map;
    // intermediate images of a composition are not re-checked.
    bool in_domain(Point x) const;
    // Throws DomainError outside the domain, InvalidArgument on size mismatch.
    Eigen::VectorXd apply(Point x) const;

    // Unchecked per-coordinate access.
    double apply_coord(int d, double x) const;
    double derivative_coord(int d, double x) const;
    double inverse_coord(int d, double u) const;
    bool coord_in_domain(int d, double x) const;

    const Eigen::VectorXd& loc() const;
    const Eigen::VectorXd& scale() const;

private:
    struct State;
    explicit TransportMap(std::shared_ptr<const State> s);
    std::shared_ptr<const State> state_;
};

// K_trans(x, y) = K(S(x), S(y)).
Kernel transported_kernel(const Kernel& base, const TransportMap& map);

// (1/N) sum_n phi(S(x^n)).
double pushforward_quadrature(const TransportMap& map, const Points& x,
                              const std::function<double(Point)>& phi);

}  // namespace tmm
