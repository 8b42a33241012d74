#pragma once

#include <memory>
#include <string>

#include "tmm/types.hpp"

namespace tmm {

enum class KernelKind { tensor_matern, gaussian, zonal, lattice_periodic, transported };

std::string to_string(KernelKind kind);

class Lattice;
class TransportMap;

namespace detail {

// Implementation interface behind the Kernel value type. Implementations are
// immutable once built and every method is safe to call concurrently.
//
// Separable kernels factor as
//     K(x, y) = amplitude() * prod_d factor(d, x_d, y_d)
// which lets the discrepancy code integrate them coordinate by coordinate.
class KernelImpl {
public:
    virtual ~KernelImpl() = default;

    virtual KernelKind kind() const = 0;
    virtual int dim() const = 0;
    virtual std::string id() const = 0;

    virtual double eval(const double* x, const double* y) const;
    // Gradient with respect to the first argument, written to g[0..dim).
    virtual void gradient(const double* x, const double* y, double* g) const;
    // K(x, y) and its gradient in one pass.
    virtual double eval_gradient(const double* x, const double* y, double* g) const;

    virtual bool separable() const { return false; }
    virtual double amplitude() const { return 1.0; }
    virtual double factor(int d, double x, double y) const;
    // d/dx of factor(d, x, y).
    virtual double factor_dx(int d, double x, double y) const;
    // Both at once; override when they share work.
    virtual void factor_pair(int d, double x, double y, double& f, double& df) const {
        f = factor(d, x, y);
        df = factor_dx(d, x, y);
    }

    // Non-null for lattice-periodic kernels.
    virtual const Lattice* lattice() const { return nullptr; }
    // For lattice-periodic kernels: the constant value of the cell average of
    // K(., y), i.e. amplitude * rho(0).
    virtual double cell_mean() const { return 0.0; }

    // Non-null for transported kernels.
    virtual const TransportMap* transport() const { return nullptr; }
};

}  // namespace detail

// Admissible symmetric positive-definite kernel. Cheap to copy; copies share
// the immutable implementation.
class Kernel {
public:
    explicit Kernel(std::shared_ptr<const detail::KernelImpl> impl);

    // exp(-|x - y|_1 / length_scale)
    static Kernel tensor_matern(int dim, double length_scale = 1.0);
    // exp(-|x - y|^2 / length_scale^2)
    static Kernel gaussian(int dim, double length_scale = 1.0);
    // F(<x, y>) with the exponential activation F(t) = exp(t / scale^2).
    static Kernel zonal(int dim, double scale = 1.0);

    KernelKind kind() const { return impl_->kind(); }
    int dim() const { return impl_->dim(); }
    std::string id() const { return impl_->id(); }
    bool separable() const { return impl_->separable(); }

    // Throws InvalidArgument when x or y does not have dimension dim().
    double eval(Point x, Point y) const;
    Eigen::VectorXd gradient(Point x, Point y) const;
    void gradient(Point x, Point y, std::span<double> out) const;

    // Unchecked hot-path variants.
    double operator()(const double* x, const double* y) const { return impl_->eval(x, y); }
    void gradient_unchecked(const double* x, const double* y, double* g) const {
        impl_->gradient(x, y, g);
    }
    double eval_gradient_unchecked(const double* x, const double* y, double* g) const {
        return impl_->eval_gradient(x, y, g);
    }

    const detail::KernelImpl& impl() const { return *impl_; }

private:
    std::shared_ptr<const detail::KernelImpl> impl_;
};

// Minimum infinity-norm separation below which two points count as equal.
inline constexpr double kDistinctTol = 1e-12;

// Gram matrix K(Y, Y). Throws DegenerateInput on coincident rows.
Eigen::MatrixXd gram(const Kernel& k, const Points& y);
// Rectangular K(X, Y), no distinctness requirement.
Eigen::MatrixXd cross_gram(const Kernel& k, const Points& x, const Points& y);

// Finite kernel expansion f = sum_i weights_i K(., centers_i).
struct RkhsElement {
    Points centers;
    Eigen::VectorXd weights;
    Kernel kernel;

    double operator()(Point x) const;
};

// <f, g> in the native space of the shared kernel.
double rkhs_inner(const RkhsElement& f, const RkhsElement& g);
// sqrt(c^T K(X, X) c).
double rkhs_norm(const RkhsElement& f);

}  // namespace tmm
