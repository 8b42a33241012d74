#include "tmm/kernel.hpp"

#include <cmath>
#include <cstdio>
#include <vector>

#include "tmm/error.hpp"
#include "tmm/parallel.hpp"

namespace tmm {

std::string to_string(KernelKind kind) {
    switch (kind) {
        case KernelKind::tensor_matern: return "tensor-matern";
        case KernelKind::gaussian: return "gaussian";
        case KernelKind::zonal: return "zonal";
        case KernelKind::lattice_periodic: return "lattice-periodic";
        case KernelKind::transported: return "transported";
    }
    return "unknown";
}

namespace detail {

double KernelImpl::eval(const double* x, const double* y) const {
    double v = amplitude();
    const int n = dim();
    for (int d = 0; d < n; ++d) v *= factor(d, x[d], y[d]);
    return v;
}

void KernelImpl::gradient(const double* x, const double* y, double* g) const {
    eval_gradient(x, y, g);
}

double KernelImpl::eval_gradient(const double* x, const double* y, double* g) const {
    if (!separable()) {
        gradient(x, y, g);
        return eval(x, y);
    }
    const int n = dim();
    // Product rule with prefix/suffix products so that zero factors are handled.
    double buf_small[16];
    std::vector<double> buf_big;
    double* f = buf_small;
    if (n > 8) {
        buf_big.resize(2 * static_cast<std::size_t>(n));
        f = buf_big.data();
    }
    double* df = f + n;
    for (int d = 0; d < n; ++d) factor_pair(d, x[d], y[d], f[d], df[d]);
    const double amp = amplitude();
    double prefix = 1.0;
    for (int d = 0; d < n; ++d) {
        g[d] = prefix;
        prefix *= f[d];
    }
    double suffix = 1.0;
    for (int d = n - 1; d >= 0; --d) {
        g[d] *= suffix * amp * df[d];
        suffix *= f[d];
    }
    return amp * prefix;
}

double KernelImpl::factor(int, double, double) const {
    throw std::logic_error("kernel is not separable");
}

double KernelImpl::factor_dx(int, double, double) const {
    throw std::logic_error("kernel is not separable");
}

}  // namespace detail

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void require_dim(int dim) {
    if (dim < 1) throw InvalidArgument("kernel dimension must be positive");
}

void require_positive(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v))
        throw InvalidArgument(std::string(what) + " must be positive and finite");
}

// Sign with sign(0) = 0: at a coincident coordinate the tensor-Matern
// gradient is the symmetric subgradient 0.
inline double sign0(double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); }

class TensorMatern final : public detail::KernelImpl {
public:
    TensorMatern(int dim, double length) : dim_(dim), inv_length_(1.0 / length), length_(length) {}

    KernelKind kind() const override { return KernelKind::tensor_matern; }
    int dim() const override { return dim_; }
    std::string id() const override {
        return "tensor-matern(D=" + std::to_string(dim_) + ",l=" + fmt_double(length_) + ")";
    }

    double eval(const double* x, const double* y) const override {
        double s = 0.0;
        for (int d = 0; d < dim_; ++d) s += std::abs(x[d] - y[d]);
        return std::exp(-s * inv_length_);
    }

    void gradient(const double* x, const double* y, double* g) const override {
        eval_gradient(x, y, g);
    }

    double eval_gradient(const double* x, const double* y, double* g) const override {
        const double k = eval(x, y);
        for (int d = 0; d < dim_; ++d) g[d] = -sign0(x[d] - y[d]) * inv_length_ * k;
        return k;
    }

    bool separable() const override { return true; }
    double factor(int, double x, double y) const override {
        return std::exp(-std::abs(x - y) * inv_length_);
    }
    double factor_dx(int, double x, double y) const override {
        return -sign0(x - y) * inv_length_ * std::exp(-std::abs(x - y) * inv_length_);
    }

private:
    int dim_;
    double inv_length_;
    double length_;
};

class Gaussian final : public detail::KernelImpl {
public:
    Gaussian(int dim, double length) : dim_(dim), inv_l2_(1.0 / (length * length)), length_(length) {}

    KernelKind kind() const override { return KernelKind::gaussian; }
    int dim() const override { return dim_; }
    std::string id() const override {
        return "gaussian(D=" + std::to_string(dim_) + ",l=" + fmt_double(length_) + ")";
    }

    double eval(const double* x, const double* y) const override {
        double s = 0.0;
        for (int d = 0; d < dim_; ++d) {
            const double u = x[d] - y[d];
            s += u * u;
        }
        return std::exp(-s * inv_l2_);
    }

    void gradient(const double* x, const double* y, double* g) const override {
        eval_gradient(x, y, g);
    }

    double eval_gradient(const double* x, const double* y, double* g) const override {
        const double k = eval(x, y);
        for (int d = 0; d < dim_; ++d) g[d] = -2.0 * (x[d] - y[d]) * inv_l2_ * k;
        return k;
    }

    bool separable() const override { return true; }
    double factor(int, double x, double y) const override {
        const double u = x - y;
        return std::exp(-u * u * inv_l2_);
    }
    double factor_dx(int, double x, double y) const override {
        const double u = x - y;
        return -2.0 * u * inv_l2_ * std::exp(-u * u * inv_l2_);
    }

private:
    int dim_;
    double inv_l2_;
    double length_;
};

class Zonal final : public detail::KernelImpl {
public:
    Zonal(int dim, double scale) : dim_(dim), gamma_(1.0 / (scale * scale)), scale_(scale) {}

    KernelKind kind() const override { return KernelKind::zonal; }
    int dim() const override { return dim_; }
    std::string id() const override {
        return "zonal-exp(D=" + std::to_string(dim_) + ",s=" + fmt_double(scale_) + ")";
    }

    double eval(const double* x, const double* y) const override {
        double s = 0.0;
        for (int d = 0; d < dim_; ++d) s += x[d] * y[d];
        return std::exp(gamma_ * s);
    }

    void gradient(const double* x, const double* y, double* g) const override {
        const double k = eval(x, y);
        for (int d = 0; d < dim_; ++d) g[d] = gamma_ * y[d] * k;
    }

    bool separable() const override { return true; }
    double factor(int, double x, double y) const override { return std::exp(gamma_ * x * y); }
    double factor_dx(int, double x, double y) const override {
        return gamma_ * y * std::exp(gamma_ * x * y);
    }

private:
    int dim_;
    double gamma_;
    double scale_;
};

void check_point(const Kernel& k, Point x, const char* name) {
    if (static_cast<int>(x.size()) != k.dim())
        throw InvalidArgument(std::string("point ") + name + " has dimension " +
                              std::to_string(x.size()) + ", kernel expects " +
                              std::to_string(k.dim()));
}

}  // namespace

Kernel::Kernel(std::shared_ptr<const detail::KernelImpl> impl) : impl_(std::move(impl)) {
    if (!impl_) throw InvalidArgument("null kernel implementation");
}

Kernel Kernel::tensor_matern(int dim, double length_scale) {
    require_dim(dim);
    require_positive(length_scale, "length scale");
    return Kernel(std::make_shared<TensorMatern>(dim, length_scale));
}

Kernel Kernel::gaussian(int dim, double length_scale) {
    require_dim(dim);
    require_positive(length_scale, "length scale");
    return Kernel(std::make_shared<Gaussian>(dim, length_scale));
}

Kernel Kernel::zonal(int dim, double scale) {
    require_dim(dim);
    require_positive(scale, "zonal scale");
    return Kernel(std::make_shared<Zonal>(dim, scale));
}

double Kernel::eval(Point x, Point y) const {
    check_point(*this, x, "x");
    check_point(*this, y, "y");
    return impl_->eval(x.data(), y.data());
}

Eigen::VectorXd Kernel::gradient(Point x, Point y) const {
    Eigen::VectorXd g(dim());
    gradient(x, y, {g.data(), static_cast<std::size_t>(g.size())});
    return g;
}

void Kernel::gradient(Point x, Point y, std::span<double> out) const {
    check_point(*this, x, "x");
    check_point(*this, y, "y");
    if (static_cast<int>(out.size()) != dim()) throw InvalidArgument("gradient output size mismatch");
    impl_->gradient(x.data(), y.data(), out.data());
}

Eigen::MatrixXd gram(const Kernel& k, const Points& y) {
    if (y.cols() != k.dim()) throw InvalidArgument("point dimension does not match kernel");
    if (min_pairwise_distance(y) <= kDistinctTol)
        throw DegenerateInput("gram: points are not pairwise distinct");
    const Eigen::Index n = y.rows();
    Eigen::MatrixXd g(n, n);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t b, std::size_t e) {
        for (auto i = static_cast<Eigen::Index>(b); i < static_cast<Eigen::Index>(e); ++i)
            for (Eigen::Index j = 0; j < n; ++j) g(i, j) = k(&y(i, 0), &y(j, 0));
    });
    // Exact symmetry regardless of floating-point evaluation order.
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) g(j, i) = g(i, j);
    return g;
}

Eigen::MatrixXd cross_gram(const Kernel& k, const Points& x, const Points& y) {
    if (x.cols() != k.dim() || y.cols() != k.dim())
        throw InvalidArgument("point dimension does not match kernel");
    Eigen::MatrixXd g(x.rows(), y.rows());
    parallel_for(static_cast<std::size_t>(x.rows()), [&](std::size_t b, std::size_t e) {
        for (auto i = static_cast<Eigen::Index>(b); i < static_cast<Eigen::Index>(e); ++i)
            for (Eigen::Index j = 0; j < y.rows(); ++j) g(i, j) = k(&x(i, 0), &y(j, 0));
    });
    return g;
}

double RkhsElement::operator()(Point x) const {
    if (static_cast<int>(x.size()) != kernel.dim()) throw InvalidArgument("point dimension mismatch");
    double s = 0.0;
    for (Eigen::Index i = 0; i < centers.rows(); ++i) s += weights[i] * kernel(&centers(i, 0), x.data());
    return s;
}

double rkhs_inner(const RkhsElement& f, const RkhsElement& g) {
    if (f.weights.size() != f.centers.rows() || g.weights.size() != g.centers.rows())
        throw InvalidArgument("rkhs element: weights and centers differ in length");
    return f.weights.dot(cross_gram(f.kernel, f.centers, g.centers) * g.weights);
}

double rkhs_norm(const RkhsElement& f) {
    if (f.weights.size() != f.centers.rows())
        throw InvalidArgument("rkhs element: weights and centers differ in length");
    if (f.centers.rows() == 0) return 0.0;
    const Eigen::MatrixXd k = gram(f.kernel, f.centers);
    return std::sqrt(std::max(0.0, f.weights.dot(k * f.weights)));
}

}  // namespace tmm
