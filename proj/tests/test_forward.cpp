#include <cmath>

#include "doctest.h"
#include "tmm/error.hpp"
#include "tmm/forward.hpp"

using namespace tmm;

namespace {

ForwardOptions small_options(std::uint64_t seed = 1) {
    ForwardOptions o;
    o.children_per_particle = 10;
    o.seed = seed;
    o.quantizer.max_iters = 150;
    return o;
}

CustomModel brownian_1d() {
    return CustomModel(CustomModel::Preset::brownian, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1),
                       Eigen::MatrixXd::Identity(1, 1));
}

double brute_mean(const Points& y, const std::function<double(Point)>& f) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < y.rows(); ++i) s += f(row(y, i));
    return s / static_cast<double>(y.rows());
}

}  // namespace

TEST_CASE("frozen dynamics keep the particles in place") {
    const auto model = CustomModel::frozen(2);
    const double y0[2] = {0.3, -0.2};
    const auto flow = propagate(model, Kernel::tensor_matern(2), Point(y0, 2), {0.0, 0.5, 1.0}, 12, small_options());
    REQUIRE(flow.states.size() == 3);
    for (std::size_t j = 1; j < 3; ++j) {
        CHECK((flow.states[j] - flow.states[0]).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(flow.certificates[j].value < 1e-6);
        CHECK_FALSE(flow.steps[j - 1].flagged);
    }
    // Dirac against 1e-9 jitter: the kink of the kernel makes E of order sqrt(1e-9).
    CHECK(flow.certificates[0].value < 1e-4);
    CHECK((flow.states[0].rowwise() - Eigen::RowVector2d(0.3, -0.2)).cwiseAbs().maxCoeff() <= 0.5e-9);
}

TEST_CASE("pure drift translates every particle") {
    const CustomModel model(CustomModel::Preset::drift, Eigen::Vector2d(1.0, 0.0), Eigen::Vector2d::Zero(),
                            Eigen::Matrix2d::Identity());
    const double y0[2] = {0.0, 0.0};
    const auto flow = propagate(model, Kernel::tensor_matern(2), Point(y0, 2), {0.0, 0.5}, 10, small_options());
    const Points shift = flow.states[1] - flow.states[0];
    CHECK((shift.col(0).array() - 0.5).abs().maxCoeff() < 1e-9);
    CHECK(shift.col(1).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("brownian particles follow the heat kernel") {
    const auto flow = propagate(brownian_1d(), Kernel::tensor_matern(1), std::vector<double>{0.0}, {0.0, 0.5, 1.0}, 40,
                                small_options(3));
    for (std::size_t j = 1; j < 3; ++j) {
        const auto& y = flow.states[j];
        const double mean = y.col(0).mean();
        const double var = (y.col(0).array() - mean).square().mean();
        CHECK(std::abs(mean) < 0.05);
        CHECK(var == doctest::Approx(flow.times[j]).epsilon(0.1));
        CHECK(flow.certificates[j].value > 0.0);
    }
}

TEST_CASE("certificates match a direct evaluation against the cloud") {
    SabrParams p;
    const SabrModel model(p);
    const auto x0 = model.initial_state();
    const auto flow = propagate(model, Kernel::tensor_matern(2), as_point(x0), {0.0, 0.5, 1.0}, 30, small_options(5));
    for (std::size_t j = 1; j < flow.times.size(); ++j) {
        const auto& step = flow.steps[j - 1];
        const auto direct = discrepancy(flow.kernels[j], Measure::empirical(step.cloud), flow.states[j]);
        CHECK(direct.method == CertificateMethod::exact_sum);
        CHECK(flow.certificates[j].value == doctest::Approx(direct.value).epsilon(1e-7));
        // The optimizer never does worse than a subsample of the cloud.
        CHECK(flow.certificates[j].value <= step.subsample_value * (1.0 + 1e-12));
        CHECK(step.cloud.rows() == 300);
        CHECK(step.assigned.size() == 300);
    }
}

TEST_CASE("quadrature inequality on kernel sections") {
    const SabrModel model(SabrParams{});
    const auto x0 = model.initial_state();
    const auto flow = propagate(model, Kernel::tensor_matern(2), as_point(x0), {0.0, 1.0}, 25, small_options(9));
    const Kernel& k = flow.kernels[1];
    const auto& cloud = flow.steps[0].cloud;
    const double e = flow.certificates[1].value;
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index pick = static_cast<Eigen::Index>(uniform01(rng) * static_cast<double>(cloud.rows()));
        Points centers = cloud.row(pick);
        const RkhsElement phi{centers, Eigen::VectorXd::Ones(1), k};
        const auto m = moment(flow, 1, phi);
        const double exact = brute_mean(cloud, [&](Point x) { return phi(x); });
        CHECK_FALSE(m.per_unit_norm);
        CHECK(m.error_bound == doctest::Approx(e * std::sqrt(k.eval(row(centers, 0), row(centers, 0)))));
        CHECK(std::abs(m.value - exact) <= m.error_bound * (1.0 + 1e-9) + 1e-15);
    }
    const RkhsElement foreign{cloud.topRows(1), Eigen::VectorXd::Ones(1), flow.base_kernel};
    CHECK_THROWS_AS(moment(flow, 1, foreign), InvalidArgument);
}

TEST_CASE("moments of constants are exact") {
    const auto flow = propagate(brownian_1d(), Kernel::tensor_matern(1), std::vector<double>{0.0}, {0.0, 1.0}, 8,
                                small_options());
    for (int j = 0; j < 2; ++j) {
        const auto m = moment(flow, j, [](Point) { return 1.0; });
        CHECK(m.value == 1.0);
        CHECK(m.per_unit_norm);
    }
    CHECK_THROWS_AS(moment(flow, 2, [](Point) { return 1.0; }), InvalidArgument);
}

TEST_CASE("sabr particle mean stays at the forward") {
    const SabrModel model(SabrParams{});
    const auto x0 = model.initial_state();
    ForwardOptions o = small_options(2);
    o.children_per_particle = 20;
    const auto flow = propagate(model, Kernel::tensor_matern(2), as_point(x0), {0.0, 0.02, 2.0}, 60, o);
    for (std::size_t j = 0; j < flow.times.size(); ++j) {
        const double mean = flow.states[j].col(0).mean();
        CHECK(mean == doctest::Approx(0.03).epsilon(0.02));
        CHECK(flow.states[j].col(1).minCoeff() > 0.0);
    }
    // The cloud spreads with time.
    const auto sd = [&](int j) {
        const auto& y = flow.states[static_cast<std::size_t>(j)];
        return std::sqrt((y.col(0).array() - y.col(0).mean()).square().mean());
    };
    CHECK(sd(1) < sd(2));
    CHECK(sd(2) == doctest::Approx(0.03 * 0.1 * std::sqrt(2.0)).epsilon(0.15));
}

TEST_CASE("propagation is deterministic") {
    const SabrModel model(SabrParams{});
    const auto x0 = model.initial_state();
    const auto a = propagate(model, Kernel::tensor_matern(2), as_point(x0), {0.0, 0.5}, 10, small_options(4));
    const auto b = propagate(model, Kernel::tensor_matern(2), as_point(x0), {0.0, 0.5}, 10, small_options(4));
    const auto c = propagate(model, Kernel::tensor_matern(2), as_point(x0), {0.0, 0.5}, 10, small_options(5));
    CHECK(a.states[1] == b.states[1]);
    CHECK(a.steps[0].assigned == b.steps[0].assigned);
    CHECK(a.certificates[1].value == b.certificates[1].value);
    CHECK_FALSE(a.states[1] == c.states[1]);
}

TEST_CASE("unstratified children") {
    ForwardOptions o = small_options(6);
    o.stratify = false;
    o.max_substep = 0.0;
    const auto flow = propagate(brownian_1d(), Kernel::tensor_matern(1), std::vector<double>{0.0}, {0.0, 1.0}, 20, o);
    const auto& cloud = flow.steps[0].cloud;
    CHECK(std::abs(cloud.col(0).mean()) < 4.0 / std::sqrt(200.0));
}

TEST_CASE("propagate rejects invalid input") {
    const auto model = brownian_1d();
    const auto k = Kernel::tensor_matern(1);
    const std::vector<double> y0{0.0};
    CHECK_THROWS_AS(propagate(model, k, y0, {0.0, 1.0}, 1), InvalidArgument);
    CHECK_THROWS_AS(propagate(model, k, y0, {0.0}, 4), InvalidArgument);
    CHECK_THROWS_AS(propagate(model, k, y0, {0.0, 1.0, 1.0}, 4), InvalidArgument);
    CHECK_THROWS_AS(propagate(model, Kernel::tensor_matern(2), y0, {0.0, 1.0}, 4), InvalidArgument);
    const SabrModel sabr(SabrParams{});
    const double bad[2] = {-0.1, 0.1};
    CHECK_THROWS_AS(propagate(sabr, Kernel::tensor_matern(2), Point(bad, 2), {0.0, 1.0}, 4), DomainError);
}
