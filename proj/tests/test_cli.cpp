#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "tmm/cli.hpp"

using namespace tmm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("tmm_cli_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

const char* kSmall =
    "[sequence]\nn = 12\nrestarts = 1\nmax_iters = 100\n"
    "[grid]\ntimes = 0, 0.5\nn = 12\nchildren = 6\nquantizer_iters = 60\n"
    "[quadrature]\nn = 10\n";

int run(std::vector<std::string> args, std::string* err_text = nullptr) {
    std::vector<const char*> argv = {"tmm"};
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    if (err_text) *err_text = err.str();
    return code;
}

}  // namespace

TEST_CASE("subcommands write their files deterministically") {
    const fs::path dir = scratch("determinism");
    std::ofstream(dir / "small.ini") << kSmall;
    const std::string cfg = (dir / "small.ini").string();
    const std::vector<std::pair<std::string, std::vector<std::string>>> cases = {
        {"sequence", {"points.csv", "points.cert.json"}},
        {"simulate", {"t_0.csv", "t_1.csv", "certificates.csv"}},
        {"price", {"price.csv", "surface_t0.csv", "surface_t1.csv", "sensitivities_t1.csv"}},
        {"quadrature", {"quadrature.csv"}},
    };
    for (const auto& [cmd, files] : cases) {
        const fs::path a = dir / (cmd + "_a"), b = dir / (cmd + "_b");
        REQUIRE(run({"--config", cfg, "--seed", "7", "--out", a.string(), cmd}) == 0);
        REQUIRE(run({cmd, "--config", cfg, "--seed", "7", "--out", b.string()}) == 0);
        for (const auto& f : files) {
            INFO(cmd << "/" << f);
            REQUIRE(fs::exists(a / f));
            CHECK(slurp(a / f) == slurp(b / f));
        }
    }
    const fs::path c = dir / "simulate_c";
    REQUIRE(run({"--config", cfg, "--seed", "8", "--out", c.string(), "simulate"}) == 0);
    CHECK(slurp(c / "t_1.csv") != slurp(dir / "simulate_a" / "t_1.csv"));
}

TEST_CASE("sequence options") {
    const fs::path dir = scratch("sequence");
    REQUIRE(run({"sequence", "--out", dir.string(), "--kernel", "lattice:profile=gaussian,scale=0.2", "-N", "9", "-D",
                 "1", "--restarts", "1"}) == 0);
    const std::string points = slurp(dir / "points.csv");
    CHECK(points.rfind("x1\n", 0) == 0);
    CHECK(std::count(points.begin(), points.end(), '\n') == 10);
    const std::string cert = slurp(dir / "points.cert.json");
    CHECK(cert.find("\"method\": \"closed-form\"") != std::string::npos);
    CHECK(cert.find("lattice") != std::string::npos);
}

TEST_CASE("kernel figure grid") {
    const fs::path dir = scratch("figure");
    std::ofstream(dir / "f.ini") << "[figure]\ngrid = 5\n";
    REQUIRE(run({"--config", (dir / "f.ini").string(), "--out", dir.string(), "figure", "kernels"}) == 0);
    for (const char* f : {"kernels_periodic.csv", "kernels_transported.csv"}) {
        const std::string s = slurp(dir / f);
        CHECK(s.rfind("x1,x2,K\n", 0) == 0);
        CHECK(std::count(s.begin(), s.end(), '\n') == 26);
    }
}

TEST_CASE("exit codes") {
    const fs::path dir = scratch("exit");
    std::string err;
    CHECK(run({"--help"}) == 0);
    CHECK(run({}) == 2);
    CHECK(run({"frobnicate"}) == 2);
    CHECK(run({"sequence", "--bogus"}) == 2);
    CHECK(run({"--config", (dir / "missing.ini").string(), "sequence"}, &err) == 2);
    CHECK(err.find("cannot open") != std::string::npos);
    std::ofstream(dir / "bad.ini") << "[sequence]\nn = lots\n";
    CHECK(run({"--config", (dir / "bad.ini").string(), "sequence"}) == 2);
    CHECK(run({"--threads", "0", "--out", dir.string(), "sequence"}) == 2);
    CHECK(run({"--out", dir.string(), "figure", "pie"}) == 2);
    CHECK(run({"--out", dir.string(), "sequence", "--kernel", "tensor-matern:colour=red"}) == 2);
    CHECK(run({"--out", dir.string(), "sequence", "--restarts", "0"}) == 2);
    // A very wide interpolation kernel makes the sensitivity system singular.
    std::ofstream(dir / "wide.ini") << kSmall << "[price]\nregularization = fixed\nlambda_rel = 0\nlength = 1e6\n";
    CHECK(run({"--config", (dir / "wide.ini").string(), "--out", dir.string(), "price"}, &err) == 3);
    CHECK(err.find("numerical failure") != std::string::npos);
}
