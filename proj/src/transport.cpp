#include "tmm/transport.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <vector>

#include "tmm/error.hpp"

namespace tmm {

std::string to_string(TransportKind kind) {
    switch (kind) {
        case TransportKind::identity: return "identity";
        case TransportKind::erf_componentwise: return "erf";
        case TransportKind::inverse_cdf_componentwise: return "inverse-cdf";
        case TransportKind::composed: return "composed";
    }
    return "unknown";
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        if (p == 0.0) return -std::numeric_limits<double>::infinity();
        if (p == 1.0) return std::numeric_limits<double>::infinity();
        throw DomainError("normal_quantile: probability outside [0, 1]");
    }
    // Wichura, Algorithm AS241 (PPND16).
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r +
                    45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
                 133.14166789178437745) * r + 3.387132872796366608) /
               (((((((5226.495278852545925 * r + 28729.085735721942674) * r + 39307.89580009271061) * r +
                    21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
                 42.313330701600911252) * r + 1.0);
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
                   1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
                4.6303378461565452959) * r + 1.42343711074968357734) /
              (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
                   0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
                2.05319162663775882187) * r + 1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
                   0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
                5.4637849111641143699) * r + 6.6579046435011037772) /
              (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
                   7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
                0.59983220655588793769) * r + 1.0);
    }
    return q < 0.0 ? -val : val;
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

// erf^{-1}(u) via the normal quantile, evaluated on the side that keeps
// full relative precision near +-1.
double erf_inverse(double u) {
    if (u < 0.0) return normal_quantile(0.5 * (1.0 + u)) / std::numbers::sqrt2;
    return -normal_quantile(0.5 * (1.0 - u)) / std::numbers::sqrt2;
}

}  // namespace

struct TransportMap::State {
    TransportKind kind = TransportKind::identity;
    int dim = 0;
    Eigen::VectorXd loc;
    Eigen::VectorXd scale;
    std::shared_ptr<const State> outer;
    std::shared_ptr<const State> inner;

    double apply(int d, double x) const {
        switch (kind) {
            case TransportKind::identity: return x;
            case TransportKind::erf_componentwise: return std::erf((x - loc[d]) / scale[d]);
            case TransportKind::inverse_cdf_componentwise: return loc[d] + scale[d] * normal_quantile(x);
            case TransportKind::composed: return outer->apply(d, inner->apply(d, x));
        }
        return x;
    }

    double derivative(int d, double x) const {
        switch (kind) {
            case TransportKind::identity: return 1.0;
            case TransportKind::erf_componentwise: {
                const double z = (x - loc[d]) / scale[d];
                return 2.0 / std::sqrt(std::numbers::pi) * std::exp(-z * z) / scale[d];
            }
            case TransportKind::inverse_cdf_componentwise: {
                const double q = normal_quantile(x);
                return scale[d] * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * q * q);
            }
            case TransportKind::composed: {
                const double xi = inner->apply(d, x);
                return outer->derivative(d, xi) * inner->derivative(d, x);
            }
        }
        return 1.0;
    }

    double inverse(int d, double u) const {
        switch (kind) {
            case TransportKind::identity: return u;
            case TransportKind::erf_componentwise: return loc[d] + scale[d] * erf_inverse(u);
            case TransportKind::inverse_cdf_componentwise: return normal_cdf((u - loc[d]) / scale[d]);
            case TransportKind::composed: return inner->inverse(d, outer->inverse(d, u));
        }
        return u;
    }

    bool in_domain(double x) const {
        switch (kind) {
            case TransportKind::identity:
            case TransportKind::erf_componentwise: return std::isfinite(x);
            case TransportKind::inverse_cdf_componentwise: return x > 0.0 && x < 1.0;
            case TransportKind::composed: return inner->in_domain(x);
        }
        return false;
    }

    std::string id() const {
        switch (kind) {
            case TransportKind::identity: return "identity";
            case TransportKind::erf_componentwise: return "erf(loc=" + fmt_vec(loc) + ",scale=" + fmt_vec(scale) + ")";
            case TransportKind::inverse_cdf_componentwise:
                return "inverse-cdf(mean=" + fmt_vec(loc) + ",stdev=" + fmt_vec(scale) + ")";
            case TransportKind::composed: return outer->id() + "o" + inner->id();
        }
        return "?";
    }
};

TransportMap::TransportMap(std::shared_ptr<const State> s) : state_(std::move(s)) {}

namespace {

void check_params(const Eigen::VectorXd& loc, const Eigen::VectorXd& scale) {
    if (loc.size() < 1 || loc.size() != scale.size())
        throw InvalidArgument("transport parameters must be nonempty and of equal length");
    if (!loc.allFinite()) throw InvalidArgument("transport location must be finite");
    for (Eigen::Index i = 0; i < scale.size(); ++i)
        if (!(scale[i] > 0.0) || !std::isfinite(scale[i]))
            throw InvalidArgument("transport scale must be positive");
}

}  // namespace

TransportMap TransportMap::identity(int dim) {
    if (dim < 1) throw InvalidArgument("transport dimension must be positive");
    auto s = std::make_shared<State>();
    s->kind = TransportKind::identity;
    s->dim = dim;
    s->loc = Eigen::VectorXd::Zero(dim);
    s->scale = Eigen::VectorXd::Ones(dim);
    return TransportMap(std::move(s));
}

TransportMap TransportMap::erf(int dim) {
    if (dim < 1) throw InvalidArgument("transport dimension must be positive");
    return erf(Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim));
}

TransportMap TransportMap::erf(Eigen::VectorXd loc, Eigen::VectorXd scale) {
    check_params(loc, scale);
    auto s = std::make_shared<State>();
    s->kind = TransportKind::erf_componentwise;
    s->dim = static_cast<int>(loc.size());
    s->loc = std::move(loc);
    s->scale = std::move(scale);
    return TransportMap(std::move(s));
}

TransportMap TransportMap::inverse_cdf(int dim) {
    if (dim < 1) throw InvalidArgument("transport dimension must be positive");
    return inverse_cdf(Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim));
}

TransportMap TransportMap::inverse_cdf(Eigen::VectorXd mean, Eigen::VectorXd stdev) {
    check_params(mean, stdev);
    auto s = std::make_shared<State>();
    s->kind = TransportKind::inverse_cdf_componentwise;
    s->dim = static_cast<int>(mean.size());
    s->loc = std::move(mean);
    s->scale = std::move(stdev);
    return TransportMap(std::move(s));
}

TransportMap TransportMap::composed(const TransportMap& outer, const TransportMap& inner) {
    if (outer.dim() != inner.dim()) throw InvalidArgument("composed maps must share a dimension");
    auto s = std::make_shared<State>();
    s->kind = TransportKind::composed;
    s->dim = outer.dim();
    s->loc = Eigen::VectorXd::Zero(s->dim);
    s->scale = Eigen::VectorXd::Ones(s->dim);
    s->outer = outer.state_;
    s->inner = inner.state_;
    return TransportMap(std::move(s));
}

TransportKind TransportMap::kind() const { return state_->kind; }
int TransportMap::dim() const { return state_->dim; }
std::string TransportMap::id() const { return state_->id(); }
const Eigen::VectorXd& TransportMap::loc() const { return state_->loc; }
const Eigen::VectorXd& TransportMap::scale() const { return state_->scale; }

bool TransportMap::in_domain(Point x) const {
    if (static_cast<int>(x.size()) != dim()) return false;
    for (int d = 0; d < dim(); ++d)
        if (!state_->in_domain(x[d])) return false;
    return true;
}

Eigen::VectorXd TransportMap::apply(Point x) const {
    if (static_cast<int>(x.size()) != dim()) throw InvalidArgument("transport: point dimension mismatch");
    Eigen::VectorXd out(dim());
    for (int d = 0; d < dim(); ++d) {
        if (!state_->in_domain(x[d]))
            throw DomainError("transport: coordinate " + std::to_string(d) + " = " + fmt_double(x[d]) +
                              " outside the domain of " + to_string(kind()));
        out[d] = state_->apply(d, x[d]);
    }
    return out;
}

double TransportMap::apply_coord(int d, double x) const { return state_->apply(d, x); }
double TransportMap::derivative_coord(int d, double x) const { return state_->derivative(d, x); }
double TransportMap::inverse_coord(int d, double u) const { return state_->inverse(d, u); }
bool TransportMap::coord_in_domain(int d, double x) const {
    (void)d;
    return state_->in_domain(x);
}

namespace {

class TransportedKernel final : public detail::KernelImpl {
public:
    TransportedKernel(Kernel base, TransportMap map) : base_(std::move(base)), map_(std::move(map)) {}

    KernelKind kind() const override { return KernelKind::transported; }
    int dim() const override { return base_.dim(); }
    std::string id() const override { return "transported(" + base_.id() + "," + map_.id() + ")"; }

    double eval(const double* x, const double* y) const override {
        if (base_.separable()) return KernelImpl::eval(x, y);
        const int n = dim();
        std::vector<double> sx(static_cast<std::size_t>(n)), sy(static_cast<std::size_t>(n));
        for (int d = 0; d < n; ++d) {
            sx[d] = map_.apply_coord(d, x[d]);
            sy[d] = map_.apply_coord(d, y[d]);
        }
        return base_(sx.data(), sy.data());
    }

    void gradient(const double* x, const double* y, double* g) const override {
        if (base_.separable()) {
            KernelImpl::gradient(x, y, g);
            return;
        }
        const int n = dim();
        std::vector<double> sx(static_cast<std::size_t>(n)), sy(static_cast<std::size_t>(n));
        for (int d = 0; d < n; ++d) {
            sx[d] = map_.apply_coord(d, x[d]);
            sy[d] = map_.apply_coord(d, y[d]);
        }
        base_.gradient_unchecked(sx.data(), sy.data(), g);
        for (int d = 0; d < n; ++d) g[d] *= map_.derivative_coord(d, x[d]);
    }

    bool separable() const override { return base_.separable(); }
    double amplitude() const override { return base_.impl().amplitude(); }
    double factor(int d, double x, double y) const override {
        return base_.impl().factor(d, map_.apply_coord(d, x), map_.apply_coord(d, y));
    }
    double factor_dx(int d, double x, double y) const override {
        return base_.impl().factor_dx(d, map_.apply_coord(d, x), map_.apply_coord(d, y)) *
               map_.derivative_coord(d, x);
    }

    void factor_pair(int d, double x, double y, double& f, double& df) const override {
        base_.impl().factor_pair(d, map_.apply_coord(d, x), map_.apply_coord(d, y), f, df);
        df *= map_.derivative_coord(d, x);
    }

    const TransportMap* transport() const override { return &map_; }

private:
    Kernel base_;
    TransportMap map_;
};

}  // namespace

Kernel transported_kernel(const Kernel& base, const TransportMap& map) {
    if (base.dim() != map.dim()) throw InvalidArgument("transported kernel: dimension mismatch");
    return Kernel(std::make_shared<TransportedKernel>(base, map));
}

double pushforward_quadrature(const TransportMap& map, const Points& x,
                              const std::function<double(Point)>& phi) {
    if (x.rows() == 0) throw InvalidArgument("pushforward_quadrature: empty point set");
    if (x.cols() != map.dim()) throw InvalidArgument("pushforward_quadrature: dimension mismatch");
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const Eigen::VectorXd y = map.apply(row(x, i));
        s += phi(as_point(y));
    }
    return s / static_cast<double>(x.rows());
}

}  // namespace tmm
