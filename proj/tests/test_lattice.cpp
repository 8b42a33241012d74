#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "doctest.h"
#include "tmm/error.hpp"
#include "tmm/lattice.hpp"

using namespace tmm;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTableScale = 1.0 / (2.0 * kPi);

// Brute-force tail oracle for a 1-D profile: sort rho(m) over |m| <= M.
double sea_oracle_1d(double scale, long long n, long long m_max, bool unit_diagonal) {
    std::vector<double> r;
    for (long long m = -m_max; m <= m_max; ++m) {
        const double a = 2.0 * kPi * m * scale;
        r.push_back(1.0 / (1.0 + a * a));
    }
    std::sort(r.begin(), r.end(), std::greater<>());
    double total = 0.0, tail = 0.0;
    for (std::size_t i = r.size(); i-- > 0;) {
        total += r[i];
        if (static_cast<long long>(i) >= n) tail += r[i];
    }
    // Analytic remainder beyond M: 2 sum_{m > M} 1/(a^2 m^2) ~ 2/(a^2 M).
    const double a = 2.0 * kPi * scale;
    const double rest = 2.0 / (a * a * (m_max + 0.5));
    total += rest;
    tail += rest;
    return std::sqrt((unit_diagonal ? 1.0 / total : 1.0) * tail / n);
}

}  // namespace

TEST_CASE("dual lattice is the inverse transpose") {
    Eigen::MatrixXd g(2, 2);
    g << 1.0, 0.3, -0.2, 0.7;
    const Lattice l(g);
    const Eigen::MatrixXd prod = g * l.dual().transpose();
    CHECK((prod - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(l.cell_volume() == doctest::Approx(std::abs(g.determinant())));
    CHECK_FALSE(l.is_diagonal());

    Eigen::MatrixXd sing(2, 2);
    sing << 1.0, 2.0, 0.5, 1.0;
    CHECK_THROWS_AS(Lattice{sing}, InvalidArgument);
}

TEST_CASE("wrap reduces into the fundamental cell") {
    Eigen::MatrixXd g(2, 2);
    g << 1.0, 0.5, 0.0, 2.0;
    const Lattice l(g);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (int t = 0; t < 200; ++t) {
        double x[2] = {u(rng), u(rng)};
        l.wrap(x);
        // cell coordinates h = x G^{-1} must lie in [0, 1)
        const Eigen::RowVector2d h = Eigen::RowVector2d(x[0], x[1]) * g.inverse();
        CHECK(h.minCoeff() >= -1e-12);
        CHECK(h.maxCoeff() < 1.0 + 1e-12);
    }
}

TEST_CASE("matern profile coefficients") {
    const Lattice unit1 = Lattice::unit(1);
    const SpectralProfile p = matern_spectral_profile(unit1, 1.0);
    const int zero = 0, one = 1;
    CHECK(p.rho(std::span<const int>(&zero, 1)) == 1.0);
    const double r1 = p.rho(std::span<const int>(&one, 1));
    CHECK(r1 == doctest::Approx(1.0 / (1.0 + 4.0 * kPi * kPi)).epsilon(1e-14));
    CHECK(r1 == doctest::Approx(0.024674).epsilon(1e-4));

    // Normalized Fourier transform of exp(-|u|) at frequency 1 by quadrature:
    // int_R exp(-|u|) cos(2 pi u) du / int_R exp(-|u|) du.
    double s = 0.0;
    const int n = 400000;
    const double h = 40.0 / n;
    for (int i = 0; i < n; ++i) {
        const double u0 = (i + 0.5) * h;
        s += std::exp(-u0) * std::cos(2.0 * kPi * u0) * h;
    }
    CHECK(r1 == doctest::Approx(s).epsilon(1e-6));

    const Lattice unit2 = Lattice::unit(2);
    const SpectralProfile p2 = matern_spectral_profile(unit2, 1.0);
    const int a[] = {2, 0}, b[] = {1, 0};
    CHECK(p2.rho(a) < p2.rho(b));
}

TEST_CASE("constant profile gives the constant kernel") {
    const Lattice l = Lattice::unit(2);
    const Kernel k = lattice_kernel(l, SpectralProfile::family(l, ProfileFamily::constant, 1.0));
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int t = 0; t < 20; ++t) {
        const double x[] = {u(rng), u(rng)}, y[] = {u(rng), u(rng)};
        CHECK(k.eval(x, y) == doctest::Approx(1.0).epsilon(1e-15));
    }
    CHECK(sea_bound(SpectralProfile::family(l, ProfileFamily::constant, 1.0), 7).value == 0.0);
    CHECK(sea_bound(SpectralProfile::family(l, ProfileFamily::constant, 1.0), 7).support_exhausted);
}

TEST_CASE("lattice kernel is stationary and periodic") {
    const Lattice l = Lattice::unit(1);
    const Kernel k = lattice_kernel(l, matern_spectral_profile(l, 1.0));
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const double z = 0.0;
    const double diag = k.eval(Point(&z, 1), Point(&z, 1));
    for (int t = 0; t < 100; ++t) {
        const double x = u(rng), x1 = x + 1.0;
        CHECK(k.eval(Point(&x, 1), Point(&x, 1)) == doctest::Approx(diag).epsilon(1e-13));
        CHECK(std::abs(k.eval(Point(&x1, 1), Point(&z, 1)) - k.eval(Point(&x, 1), Point(&z, 1))) <= 1e-10);
    }
}

TEST_CASE("separable closed form matches the explicit Fourier sum") {
    Eigen::VectorXd periods(2);
    periods << 1.0, 1.5;
    const Lattice l = Lattice::rectangular(periods);
    for (ProfileFamily fam : {ProfileFamily::gaussian, ProfileFamily::matern}) {
        const double scale = fam == ProfileFamily::gaussian ? 0.3 : 0.5;
        const double eps = fam == ProfileFamily::gaussian ? 1e-13 : 1e-6;
        const SpectralProfile sep = SpectralProfile::family(l, fam, scale, eps);
        // Same coefficients, forced through the generic O(|support|) path.
        std::vector<SpectralEntry> entries(sep.support().begin(), sep.support().end());
        const SpectralProfile generic = SpectralProfile::custom(l, entries);
        CHECK(sep.separable());
        CHECK_FALSE(generic.separable());
        const Kernel a = lattice_kernel(l, sep), b = lattice_kernel(l, generic);
        // The generic kernel drops the coefficients below eps: bound by that mass.
        double kept = 0.0;
        for (const auto& e : entries) kept += e.rho;
        const double tol = 1e-12 + (sep.total_mass() - kept) / l.cell_volume();
        std::mt19937_64 rng(8);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (int t = 0; t < 50; ++t) {
            const double x[] = {u(rng), u(rng)}, y[] = {u(rng), u(rng)};
            CHECK(std::abs(a.eval(x, y) - b.eval(x, y)) <= tol);
            const Eigen::VectorXd ga = a.gradient(x, y), gb = b.gradient(x, y);
            if (fam == ProfileFamily::gaussian) CHECK((ga - gb).cwiseAbs().maxCoeff() <= 1e-10);
        }
    }
}

TEST_CASE("custom profiles are validated and symmetrized") {
    const Lattice l = Lattice::unit(1);
    CHECK_THROWS_AS(SpectralProfile::custom(l, {}), InvalidArgument);
    CHECK_THROWS_AS(SpectralProfile::custom(l, {{{0}, 0.5}}), InvalidArgument);
    CHECK_THROWS_AS(SpectralProfile::custom(l, {{{0}, 1.0}, {{1}, -0.1}}), InvalidArgument);
    const SpectralProfile p = SpectralProfile::custom(l, {{{0}, 1.0}, {{2}, 0.4}});
    const int plus = 2, minus = -2;
    CHECK(p.rho(std::span<const int>(&plus, 1)) == doctest::Approx(0.2));
    CHECK(p.rho(std::span<const int>(&minus, 1)) == doctest::Approx(0.2));
    // Every stored index has its mirror with the same coefficient.
    for (const auto& e : p.support()) {
        const int neg = -e.index[0];
        CHECK(p.rho(std::span<const int>(&neg, 1)) == e.rho);
    }
    CHECK(sea_bound(p, 3).support_exhausted);
    // Support sorted nonincreasing.
    for (std::size_t i = 1; i < p.support().size(); ++i) CHECK(p.support()[i].rho <= p.support()[i - 1].rho);
}

TEST_CASE("sea bound matches a brute-force tail sum") {
    const Lattice l = Lattice::unit(1);
    for (double scale : {kTableScale, 1.0}) {
        const SpectralProfile p = matern_spectral_profile(l, scale);
        for (long long n : {1LL, 16LL, 128LL, 512LL}) {
            for (bool unit_diag : {false, true}) {
                const auto norm = unit_diag ? KernelNormalization::unit_diagonal : KernelNormalization::none;
                CHECK(sea_bound(p, n, norm).value ==
                      doctest::Approx(sea_oracle_1d(scale, n, 200000, unit_diag)).epsilon(1e-6));
            }
        }
    }
}

TEST_CASE("sea bound for the table profile") {
    const Lattice l = Lattice::unit(1);
    const SpectralProfile p = matern_spectral_profile(l, kTableScale);
    const auto norm = KernelNormalization::unit_diagonal;
    CHECK(sea_bound(p, 16, norm).value == doctest::Approx(0.062).epsilon(0.15));
    CHECK(sea_bound(p, 128, norm).value == doctest::Approx(0.008).epsilon(0.15));
    CHECK(sea_bound(p, 512, norm).value == doctest::Approx(0.002).epsilon(0.15));

    std::vector<double> xs, ys;
    double prev = 1e300;
    for (long long n = 16; n <= 512; n *= 2) {
        const double v = sea_bound(p, n, norm).value;
        CHECK(v <= prev);
        prev = v;
        xs.push_back(std::log(static_cast<double>(n)));
        ys.push_back(std::log(v));
    }
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    const double slope = sxy / sxx;
    CHECK(slope >= -1.35);
    CHECK(slope <= -0.7);
}

TEST_CASE("top sums in higher dimension agree with the materialized support") {
    Eigen::VectorXd periods(3);
    periods << 1.0, 0.8, 1.3;
    const Lattice l = Lattice::rectangular(periods);
    const SpectralProfile p = SpectralProfile::family(l, ProfileFamily::gaussian, 0.6, 1e-30);
    const auto& s = p.support();
    REQUIRE(s.size() > 300);
    for (std::size_t n : {1u, 5u, 40u, 300u}) {
        double direct = 0.0;
        for (std::size_t i = 0; i < n; ++i) direct += s[i].rho;
        CHECK(p.top_sum(n) == doctest::Approx(direct).epsilon(1e-12));
    }
    double all = 0.0;
    for (const auto& e : s) all += e.rho;
    CHECK(p.total_mass() == doctest::Approx(all).epsilon(1e-10));
}

TEST_CASE("lattice gram matrices are positive semidefinite") {
    Eigen::MatrixXd g(2, 2);
    g << 1.0, 0.2, 0.0, 1.0;
    const Lattice l(g);
    const Kernel k = lattice_kernel(l, matern_spectral_profile(l, 0.3, 1e-6));
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 5; ++t) {
        Points y(20, 2);
        for (int i = 0; i < 20; ++i) {
            double h[] = {u(rng), u(rng)};
            const Eigen::VectorXd x = l.from_cell_coords(h);
            y(i, 0) = x[0];
            y(i, 1) = x[1];
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram(k, y));
        CHECK(es.eigenvalues().minCoeff() > -1e-10 * es.eigenvalues().maxCoeff());
    }
}
