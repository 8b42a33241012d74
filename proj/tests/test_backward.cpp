#include <cmath>

#include "doctest.h"
#include "tmm/backward.hpp"
#include "tmm/error.hpp"

using namespace tmm;

namespace {

ForwardOptions small_options(std::uint64_t seed = 1) {
    ForwardOptions o;
    o.children_per_particle = 10;
    o.seed = seed;
    o.quantizer.max_iters = 150;
    return o;
}

Payoff constant_payoff(double c) {
    return {{"const"}, [c](double, Point) { return Eigen::VectorXd::Constant(1, c); }};
}

const ParticleFlow& sabr_flow() {
    static const ParticleFlow flow = [] {
        const SabrModel model(SabrParams{});
        const auto x0 = model.initial_state();
        ForwardOptions o = small_options(8);
        o.children_per_particle = 20;
        return propagate(model, Kernel::tensor_matern(2), as_point(x0), {0.0, 0.02, 1.0, 2.0}, 50, o);
    }();
    return flow;
}

double max_sum_error(const Eigen::MatrixXd& a, bool columns) {
    const Eigen::VectorXd s = columns ? Eigen::VectorXd(a.colwise().sum().transpose()) : Eigen::VectorXd(a.rowwise().sum());
    return (s.array() - 1.0).abs().maxCoeff();
}

}  // namespace

TEST_CASE("sinkhorn scaling") {
    Rng rng(4);
    Eigen::MatrixXd a(6, 6);
    for (Eigen::Index i = 0; i < 6; ++i)
        for (Eigen::Index j = 0; j < 6; ++j) a(i, j) = 0.1 + uniform01(rng);
    const int sweeps = sinkhorn(a, 1e-12, 10000);
    CHECK(sweeps > 0);
    CHECK(max_sum_error(a, false) <= 1e-12);
    CHECK(max_sum_error(a, true) <= 1e-12);

    Eigen::MatrixXd empty_column = Eigen::MatrixXd::Ones(3, 3);
    empty_column.col(1).setZero();
    CHECK(sinkhorn(empty_column, 1e-8, 100) == -1);
    Eigen::MatrixXd negative = -Eigen::MatrixXd::Identity(2, 2);
    CHECK_THROWS_AS(sinkhorn(negative, 1e-8, 10), InvalidArgument);
}

TEST_CASE("frozen dynamics give the identity") {
    const auto flow = propagate(CustomModel::frozen(2), Kernel::tensor_matern(2), std::vector<double>{0.1, 0.2},
                                {0.0, 1.0}, 8, small_options());
    for (bool martingale : {false, true}) {
        const auto t = transition_matrix(flow, 0, martingale);
        CHECK((t.pi - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() == 0.0);
        CHECK(t.empty_rows.empty());
    }
}

TEST_CASE("two particles under symmetric dynamics") {
    const CustomModel bm(CustomModel::Preset::brownian, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1),
                         Eigen::MatrixXd::Identity(1, 1));
    const auto flow = propagate(bm, Kernel::tensor_matern(1), std::vector<double>{0.0}, {0.0, 1.0}, 2, small_options());
    REQUIRE(flow.martingale);
    const auto t = transition_matrix(flow, 0, true);
    CHECK(t.kind == StochasticKind::bi_stochastic);
    CHECK(t.pi(0, 0) == doctest::Approx(t.pi(1, 1)).epsilon(1e-8));
    CHECK(t.pi(0, 1) == doctest::Approx(t.pi(1, 0)).epsilon(1e-8));
    CHECK(t.pi(0, 0) + t.pi(0, 1) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("sabr transition matrices are stochastic") {
    const auto& flow = sabr_flow();
    REQUIRE(flow.martingale);
    for (int j = 0; j < 3; ++j) {
        const auto row_only = transition_matrix(flow, j, false);
        CHECK(row_only.kind == StochasticKind::row_stochastic);
        CHECK(max_sum_error(row_only.pi, false) <= 1e-12);
        CHECK(row_only.pi.minCoeff() >= 0.0);
        const auto bi = transition_matrix(flow, j, true);
        CHECK(max_sum_error(bi.pi, false) <= 1e-8);
        CHECK(max_sum_error(bi.pi, true) <= 1e-8);
        CHECK(bi.pi.minCoeff() >= 0.0);
        // Martingale consistency: pi maps the next forwards back to the
        // current ones up to the spread of one step.
        const Eigen::VectorXd next = flow.states[static_cast<std::size_t>(j) + 1].col(0);
        const Eigen::VectorXd cur = flow.states[static_cast<std::size_t>(j)].col(0);
        const double step_sd = 0.003 * std::sqrt(flow.times[static_cast<std::size_t>(j) + 1] - flow.times[static_cast<std::size_t>(j)]);
        CHECK(((bi.pi * next) - cur).cwiseAbs().mean() < step_sd);
        CHECK(std::abs((bi.pi * next).mean() - cur.mean()) < 1e-3 * 0.03);
    }
    CHECK_THROWS_AS(transition_matrix(flow, 3, false), InvalidArgument);
}

TEST_CASE("constants are preserved") {
    const auto& flow = sabr_flow();
    const auto mats = transition_matrices(flow);
    const auto surface = backward_solve(flow, mats, constant_payoff(1.0));
    // Sinkhorn leaves row sums within 1e-8 of one.
    for (const auto& v : surface.values) CHECK((v.array() - 1.0).abs().maxCoeff() < 3e-8);
    CHECK(surface.price()[0] == doctest::Approx(1.0).epsilon(3e-8));
    for (double s : flow.times) CHECK(forward_value(flow, mats, surface, s)[0] == doctest::Approx(1.0).epsilon(3e-8));

    const auto c = backward_solve(flow, mats, constant_payoff(2.5));
    CHECK(forward_value(flow, mats, c, 1.0)[0] == doctest::Approx(2.5).epsilon(3e-8));
    std::vector<TransitionMatrix> rows;
    for (int j = 0; j < 3; ++j) rows.push_back(transition_matrix(flow, j, false));
    const auto exact = backward_solve(flow, rows, constant_payoff(1.0));
    for (const auto& v : exact.values) CHECK((v.array() - 1.0).abs().maxCoeff() < 1e-14);
}

TEST_CASE("pay times accumulate cashflows") {
    const auto& flow = sabr_flow();
    const auto mats = transition_matrices(flow);
    const auto surface = backward_solve(flow, mats, constant_payoff(1.0), {1.0, 2.0});
    CHECK(surface.price()[0] == doctest::Approx(2.0).epsilon(3e-8));
    CHECK((surface.values[3].array() - 1.0).abs().maxCoeff() < 1e-15);
    CHECK_THROWS_AS(backward_solve(flow, mats, constant_payoff(1.0), {0.5}), InvalidArgument);
    std::vector<TransitionMatrix> short_list(mats.begin(), mats.begin() + 1);
    CHECK_THROWS_AS(backward_solve(flow, short_list, constant_payoff(1.0)), InvalidArgument);
}

TEST_CASE("terminal values equal the payoff and the forward is reproduced") {
    const auto& flow = sabr_flow();
    const auto mats = transition_matrices(flow);
    const Payoff p{{"F", "call0"}, [](double, Point x) {
                       Eigen::VectorXd v(2);
                       v << x[0], std::max(x[0] - 0.0, 0.0);
                       return v;
                   }};
    const auto surface = backward_solve(flow, mats, p);
    const auto& yt = flow.states.back();
    for (Eigen::Index i = 0; i < yt.rows(); ++i) CHECK(surface.values.back()(i, 0) == yt(i, 0));
    const Eigen::VectorXd price = surface.price();
    CHECK(price[0] == doctest::Approx(0.03).epsilon(0.02));
    CHECK(price[1] == doctest::Approx(price[0]).epsilon(1e-12));
    CHECK(forward_value(flow, mats, surface, 0.0)[0] == doctest::Approx(price[0]).epsilon(1e-14));
    for (double s : flow.times) CHECK(forward_value(flow, mats, surface, s)[0] == doctest::Approx(0.03).epsilon(0.02));
    CHECK_THROWS_AS(forward_value(flow, mats, surface, -1.0), InvalidArgument);
    CHECK_THROWS_AS(forward_value(flow, mats, surface, 0.5), InvalidArgument);
}

TEST_CASE("backward error bound for kernel expansions") {
    const auto& flow = sabr_flow();
    const std::size_t last = flow.times.size() - 1;
    const Kernel& k = flow.kernels[last];
    const auto& cloud = flow.steps[last - 1].cloud;
    Points centers(3, 2);
    centers << 0.03, 0.1, 0.028, 0.11, 0.035, 0.09;
    const RkhsElement f{centers, Eigen::Vector3d(1.0, -0.5, 2.0), k};
    const auto m = moment(flow, static_cast<int>(last), f);
    double exact = 0.0;
    for (Eigen::Index i = 0; i < cloud.rows(); ++i) exact += f(row(cloud, i));
    exact /= static_cast<double>(cloud.rows());
    CHECK(std::abs(m.value - exact) <= flow.certificates[last].value * rkhs_norm(f) * (1.0 + 1e-9));
}

TEST_CASE("differentiation of constants and linear functions") {
    const Points y = baseline_sequence(BaselineKind::halton, 200, 2).points;
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(200, 200);
    const auto g = differentiate(y, eye);
    const auto c = differentiate(y, Eigen::MatrixXd::Ones(200, 1));
    for (int d = 0; d < 2; ++d) {
        const double gnorm = g.by_dim[static_cast<std::size_t>(d)].norm();
        CHECK(c.by_dim[static_cast<std::size_t>(d)].cwiseAbs().maxCoeff() <= 1e-6 * gnorm);
    }
    Eigen::MatrixXd lin(200, 1);
    for (Eigen::Index i = 0; i < 200; ++i) lin(i, 0) = 0.7 * y(i, 0) - 1.3 * y(i, 1);
    const auto s = differentiate(y, lin);
    CHECK((s.by_dim[0].array() - 0.7).abs().maxCoeff() <= 0.05 * 0.7);
    CHECK((s.by_dim[1].array() + 1.3).abs().maxCoeff() <= 0.05 * 1.3);
    CHECK(s.condition > 1.0);
    CHECK(s.lambda.size() == 1);
}

TEST_CASE("differentiating a kernel section reproduces its gradient") {
    const Points y = baseline_sequence(BaselineKind::halton, 40, 2).points;
    const Kernel k = Kernel::gaussian(2, 0.3);
    SensitivityOptions o;
    o.kernel = k;
    o.lambda_rel = 1e-15;
    o.polynomial_degree = -1;
    const Eigen::Index i0 = 7;
    Eigen::MatrixXd v(40, 1);
    for (Eigen::Index i = 0; i < 40; ++i) v(i, 0) = k.eval(row(y, i), row(y, i0));
    const auto s = differentiate(y, v, o);
    for (Eigen::Index i = 0; i < 40; ++i) {
        const Eigen::VectorXd g = k.gradient(row(y, i), row(y, i0));
        CHECK(std::abs(s.by_dim[0](i, 0) - g[0]) < 1e-6);
        CHECK(std::abs(s.by_dim[1](i, 0) - g[1]) < 1e-6);
    }
}

TEST_CASE("generalized cross-validation smooths noisy values") {
    const Points y = baseline_sequence(BaselineKind::halton, 200, 2).points;
    Rng rng(12);
    Eigen::MatrixXd v(200, 1);
    for (Eigen::Index i = 0; i < 200; ++i) v(i, 0) = 0.7 * y(i, 0) + 0.05 * standard_normal(rng);
    SensitivityOptions o;
    const double exact_mean = differentiate(y, v, o).by_dim[0].mean();
    o.regularization = Regularization::gcv;
    const auto s = differentiate(y, v, o);
    CHECK(s.lambda[0] > 1e-8 * 1.0);
    CHECK(std::abs(s.by_dim[0].mean() - 0.7) < 0.1 * 0.7);
    CHECK(std::abs(s.by_dim[0].mean() - 0.7) < std::abs(exact_mean - 0.7));
}

TEST_CASE("ill-conditioned differentiation is reported") {
    const Points y = baseline_sequence(BaselineKind::halton, 60, 2).points;
    SensitivityOptions o;
    o.kernel = Kernel::gaussian(2, 50.0);
    o.lambda_rel = 0.0;
    CHECK_THROWS_AS(differentiate(y, Eigen::MatrixXd::Ones(60, 1), o), NumericalError);
    CHECK_THROWS_AS(differentiate(y, Eigen::MatrixXd::Ones(59, 1)), InvalidArgument);
}

TEST_CASE("sabr sensitivities at the first step") {
    const auto& flow = sabr_flow();
    const auto mats = transition_matrices(flow);
    const Payoff p{{"F"}, [](double, Point x) { return Eigen::VectorXd::Constant(1, x[0]); }};
    const auto surface = backward_solve(flow, mats, p);
    SensitivityOptions o;
    o.regularization = Regularization::gcv;
    const auto s = sensitivity(flow, surface, 1, o);
    CHECK(s.by_dim[0].mean() == doctest::Approx(1.0).epsilon(0.15));
    CHECK(std::abs(s.by_dim[1].mean()) < 0.1);
    CHECK_THROWS_AS(sensitivity(flow, surface, 9), InvalidArgument);
}
