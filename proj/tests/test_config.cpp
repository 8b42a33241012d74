#include <cmath>

#include "doctest.h"
#include "tmm/config.hpp"
#include "tmm/error.hpp"
#include "tmm/random.hpp"

using namespace tmm;

TEST_CASE("default configuration round-trips") {
    const ExperimentConfig c;
    CHECK(parse_config_string(emit_config(c)) == c);
    CHECK(parse_config_string("") == c);
}

TEST_CASE("edited configuration round-trips") {
    ExperimentConfig c;
    c.kernel.kind = "lattice";
    c.kernel.dim = 3;
    c.lattice.generators = {1.0, 0.0, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 2.0};
    c.lattice.scale = 1.0 / 3.0;
    c.transport.kind = "erf";
    c.transport.params = {0.1, 0.2, -1e-300, 3.0, 0.7, 1e300};
    c.measure.kind = "box";
    c.measure.lo = {-1.0, -2.0, -3.0};
    c.measure.hi = {1.0, 2.0, 3.0};
    c.sequence.mc_samples = 12345678901LL;
    c.model.kind = "custom";
    c.model.x0 = {0.1, 0.2};
    c.model.correlation = {1.0, 0.3, 0.3, 1.0};
    c.grid.times = {0.0, 1.0 / 7.0, 2.0};
    c.grid.stratify = false;
    c.price.payoffs = {"call(F, strike=0.03)", "sum(const(1), put(alpha, strike=0.1, T=1))"};
    c.price.regularization = "fixed";
    c.table.ns = {1, 2, 3};
    c.table.ds = {};
    c.figure.sabr_times = {0.02};
    c.quadrature.integrands = {"linear(1, 2, 3)"};
    c.run.seed = 18446744073709551615ULL;
    c.run.out = "some/dir name";
    const std::string text = emit_config(c);
    CHECK(parse_config_string(text) == c);
    CHECK(emit_config(parse_config_string(text)) == text);
}

TEST_CASE("random doubles survive the round trip") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        ExperimentConfig c;
        const double mag = std::ldexp(1.0, static_cast<int>(uniform01(rng) * 200.0) - 100);
        c.kernel.length = (uniform01(rng) + 1e-3) * mag;
        c.model.nu = -uniform01(rng) * mag;
        c.grid.times = {0.0, uniform01(rng), 1.0 + uniform01(rng)};
        c.run.seed = rng();
        CHECK(parse_config_string(emit_config(c)) == c);
    }
}

TEST_CASE("comments and whitespace") {
    const auto c = parse_config_string(
        "# leading comment\n"
        "; another\n"
        "[sequence]\n"
        "  n =  32  \n"
        "\n"
        "[price]\n"
        "payoffs = call(F, strike=0.02); put(F, strike=0.04)\n"
        "[grid]\n"
        "times = 0,1 , 2\n"
        "stratify = false\n");
    CHECK(c.sequence.n == 32);
    REQUIRE(c.price.payoffs.size() == 2);
    CHECK(c.price.payoffs[1] == "put(F, strike=0.04)");
    CHECK(c.grid.times == std::vector<double>{0.0, 1.0, 2.0});
    CHECK_FALSE(c.grid.stratify);
}

TEST_CASE("invalid configurations") {
    CHECK_THROWS_AS(parse_config_string("[nope]\nx = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_string("[kernel]\nwidth = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_string("n = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_string("[kernel]\nlength = 1.5x\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_string("[kernel]\nlength = nan\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_string("[kernel]\ndim = 2.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_string("[kernel]\ndim = 99999999999\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_string("[run]\nseed = -1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_string("[grid]\nstratify = maybe\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_string("[grid]\ntimes = 0, , 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_string("[kernel]\ndim = 2\n[kernel]\nlength = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_string("[kernel\n"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/config.ini"), ConfigError);
}

TEST_CASE("factories") {
    ExperimentConfig c;
    const Kernel k = make_kernel(c);
    CHECK(k.kind() == KernelKind::tensor_matern);
    CHECK(make_measure(c, k).kind() == MeasureKind::uniform_box);

    c.kernel.kind = "lattice";
    const Kernel lk = make_kernel(c, 1);
    CHECK(lk.kind() == KernelKind::lattice_periodic);
    CHECK(make_measure(c, lk).kind() == MeasureKind::lattice_cell);
    const double x[1] = {0.3};
    CHECK(lk.eval(x, x) == doctest::Approx(1.0));

    c.kernel.kind = "gaussian";
    c.transport.kind = "erf";
    CHECK(make_kernel(c).kind() == KernelKind::transported);
    c.transport.params = {0.0, 1.0};
    CHECK_THROWS_AS(make_kernel(c), ConfigError);
    c.transport.kind = "warp";
    CHECK_THROWS_AS(make_kernel(c), ConfigError);

    c = ExperimentConfig{};
    c.kernel.kind = "spline";
    CHECK_THROWS_AS(make_kernel(c), ConfigError);
    c.kernel.kind = "tensor-matern";
    c.kernel.length = -1.0;
    CHECK_THROWS_AS(make_kernel(c), ConfigError);

    c = ExperimentConfig{};
    c.measure.kind = "box";
    c.measure.lo = {0.0};
    CHECK_THROWS_AS(make_measure(c, make_kernel(c)), ConfigError);
    c.measure.kind = "lattice-cell";
    CHECK_THROWS_AS(make_measure(c, make_kernel(c)), ConfigError);
}

TEST_CASE("model factory") {
    ExperimentConfig c;
    const auto sabr = make_model(c);
    CHECK(sabr->dim() == 2);
    CHECK(sabr->martingale());
    CHECK(initial_state(c) == Eigen::Vector2d(0.03, 0.1));

    c.model.rho12 = 1.5;
    CHECK_THROWS_AS(make_model(c), ConfigError);

    c = ExperimentConfig{};
    c.model.kind = "custom";
    CHECK_THROWS_AS(make_model(c), ConfigError);
    c.model.x0 = {1.0, 2.0};
    c.model.preset = "gbm";
    c.model.sigma = {0.2, 0.3};
    const auto gbm = make_model(c);
    CHECK(gbm->dim() == 2);
    CHECK(gbm->martingale());
    c.model.a = {0.1, 0.0};
    CHECK_FALSE(make_model(c)->martingale());
    c.model.sigma = {0.2};
    CHECK_THROWS_AS(make_model(c), ConfigError);
    c.model.sigma = {};
    c.model.preset = "levy";
    CHECK_THROWS_AS(make_model(c), ConfigError);
    c.model.kind = "heston";
    CHECK_THROWS_AS(make_model(c), ConfigError);
}
