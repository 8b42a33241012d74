#include <cmath>
#include <random>

#include "doctest.h"
#include "tmm/discrepancy.hpp"
#include "tmm/error.hpp"
#include "tmm/transport.hpp"

using namespace tmm;

TEST_CASE("apply on trivial inputs") {
    const double x[] = {0.3, 0.7};
    const Eigen::VectorXd y = TransportMap::identity(2).apply(x);
    CHECK(y[0] == 0.3);
    CHECK(y[1] == 0.7);
    const double z = 0.0, half = 0.5;
    CHECK(TransportMap::erf(1).apply(Point(&z, 1))[0] == 0.0);
    CHECK(TransportMap::inverse_cdf(1).apply(Point(&half, 1))[0] == 0.0);
}

TEST_CASE("inverse-cdf rejects points outside (0, 1)") {
    const TransportMap m = TransportMap::inverse_cdf(1);
    for (double bad : {0.0, 1.0, -0.2, 1.5}) CHECK_THROWS_AS(m.apply(Point(&bad, 1)), DomainError);
    const double x[] = {0.5, 0.5};
    CHECK_THROWS_AS(m.apply(x), InvalidArgument);
}

TEST_CASE("normal quantile against reference values") {
    // Reference quantiles to 16 digits.
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-15));
    CHECK(normal_quantile(0.001) == doctest::Approx(-3.090232306167814).epsilon(1e-15));
    CHECK(normal_quantile(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-14));
    for (double p : {1e-300, 1e-12, 0.02, 0.3, 0.5, 0.77, 0.999999}) {
        const double q = normal_quantile(p);
        const double back = p < 0.5 ? normal_cdf(q) : 1.0 - normal_cdf(q) ;
        const double target = p < 0.5 ? p : 1.0 - p;
        CHECK(back == doctest::Approx(target).epsilon(1e-12));
    }
}

TEST_CASE("maps are monotone per coordinate and invert") {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(0.001, 0.999), r(-3.0, 3.0), t(0.0, 0.5);
    Eigen::VectorXd loc(2), scale(2);
    loc << 0.1, -0.4;
    scale << 0.5, 2.0;
    const std::vector<TransportMap> maps = {
        TransportMap::identity(2), TransportMap::erf(loc, scale), TransportMap::inverse_cdf(loc, scale),
        TransportMap::composed(TransportMap::erf(2), TransportMap::inverse_cdf(2))};
    for (const auto& m : maps) {
        const bool unit_domain = m.kind() == TransportKind::inverse_cdf_componentwise ||
                                 m.kind() == TransportKind::composed;
        for (int probe = 0; probe < 1000; ++probe) {
            const double x0 = unit_domain ? u(rng) : r(rng);
            const double x1 = unit_domain ? std::min(0.9999, x0 + t(rng) * (1.0 - x0)) : x0 + t(rng);
            const int d = probe % 2;
            REQUIRE(m.apply_coord(d, x1) >= m.apply_coord(d, x0));
            const double y = m.apply_coord(d, x0);
            // Round-off in y is amplified by 1 / S'(x) on the way back.
            const double slack = 1e-9 * (1.0 + std::abs(x0)) + 1e-15 / m.derivative_coord(d, x0);
            if (std::abs(y) < 1.0) REQUIRE(std::abs(m.inverse_coord(d, y) - x0) <= slack);
            const double h = 1e-6;
            const double fd = (m.apply_coord(d, x0 + h) - m.apply_coord(d, x0 - h)) / (2 * h);
            REQUIRE(m.derivative_coord(d, x0) == doctest::Approx(fd).epsilon(1e-5));
        }
    }
}

TEST_CASE("composition applies the inner map first") {
    const TransportMap inner = TransportMap::inverse_cdf(1);
    const TransportMap outer = TransportMap::erf(1);
    const TransportMap c = TransportMap::composed(outer, inner);
    const double x = 0.8;
    CHECK(c.apply(Point(&x, 1))[0] == doctest::Approx(std::erf(normal_quantile(0.8))).epsilon(1e-15));
    const double bad = 1.2;
    CHECK_THROWS_AS(c.apply(Point(&bad, 1)), DomainError);
    CHECK_THROWS_AS(TransportMap::composed(TransportMap::erf(2), TransportMap::erf(1)), InvalidArgument);
}

TEST_CASE("transported kernels") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (const Kernel& base : {Kernel::gaussian(2, 0.7), Kernel::tensor_matern(2)}) {
        const Kernel same = transported_kernel(base, TransportMap::identity(2));
        const Kernel erfk = transported_kernel(base, TransportMap::erf(2));
        for (int t = 0; t < 100; ++t) {
            const double x[] = {u(rng), u(rng)}, y[] = {u(rng), u(rng)};
            CHECK(std::abs(same.eval(x, y) - base.eval(x, y)) <= 1e-14);
            const double sx[] = {std::erf(x[0]), std::erf(x[1])}, sy[] = {std::erf(y[0]), std::erf(y[1])};
            CHECK(erfk.eval(x, y) == doctest::Approx(base.eval(sx, sy)).epsilon(1e-14));
            CHECK(erfk.eval(x, x) == doctest::Approx(1.0));
        }
    }
    CHECK_THROWS_AS(transported_kernel(Kernel::gaussian(2), TransportMap::erf(1)), InvalidArgument);
}

TEST_CASE("pushforward quadrature") {
    const PointSequence h = baseline_sequence(BaselineKind::halton, 100, 2);
    CHECK(pushforward_quadrature(TransportMap::erf(2), h.points, [](Point) { return 1.0; }) == 1.0);

    // Equispaced midpoints on [0, 1] pushed through the normal quantile: the
    // mean of y is 0 by symmetry.
    Points x(512, 1);
    for (int i = 0; i < 512; ++i) x(i, 0) = (i + 0.5) / 512.0;
    CHECK(std::abs(pushforward_quadrature(TransportMap::inverse_cdf(1), x, [](Point y) { return y[0]; })) <= 0.01);

    // Identity map, y^2 on [0, 1]: midpoint rule error is exactly 1/(12 N^2).
    const double q = pushforward_quadrature(TransportMap::identity(1), x, [](Point y) { return y[0] * y[0]; });
    CHECK(q == doctest::Approx(1.0 / 3.0 - 1.0 / (12.0 * 512.0 * 512.0)).epsilon(1e-12));
}

TEST_CASE("change of variables matches direct sampling") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    const int n = 100000;
    Points x(n, 1);
    for (int i = 0; i < n; ++i) {
        double v;
        do v = u(rng);
        while (v == 0.0);
        x(i, 0) = v;
    }
    const TransportMap m = TransportMap::inverse_cdf(1);
    for (int power : {1, 2}) {
        auto phi = [power](Point y) { return std::pow(y[0], power); };
        const double a = pushforward_quadrature(m, x, phi);
        double s = 0.0, s2 = 0.0, sa2 = 0.0;
        for (int i = 0; i < n; ++i) {
            const double z = g(rng);
            const double v = std::pow(z, power);
            s += v;
            s2 += v * v;
            const double w = std::pow(m.apply_coord(0, x(i, 0)), power);
            sa2 += w * w;
        }
        const double b = s / n;
        const double var_b = (s2 / n - b * b) / n;
        const double var_a = (sa2 / n - a * a) / n;
        CHECK(std::abs(a - b) <= 3.0 * std::sqrt(var_a + var_b));
    }
}
