#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "tmm/backward.hpp"
#include "tmm/lattice.hpp"

namespace tmm {

// Experiment configuration: flat sections of `key = value` lines, `#` or `;`
// comments, lists comma separated. Every field has a default, so an empty
// file is a valid configuration.
//
//   [kernel]     kind = tensor-matern | gaussian | zonal | lattice
//                dim, length (tensor-matern, gaussian), scale (zonal)
//   [lattice]    generators (row-major D x D, empty = unit lattice),
//                profile = matern | gaussian | constant, scale,
//                truncation_eps, normalize = none | unit-diagonal
//   [transport]  kind = identity | erf | inverse-cdf,
//                params = loc1, scale1, loc2, scale2, ...
//                (mean/stdev for inverse-cdf; empty = standard)
//   [measure]    kind = auto | lattice-cell | unit-cube | box, lo, hi
//   [sequence]   n, restarts, max_iters, grad_tol, mc_samples
//   [model]      kind = sabr | custom; F0, alpha0, beta, nu, shift, rho12;
//                preset = frozen | drift | brownian | gbm, x0, a, sigma,
//                correlation (row-major)
//   [grid]       times, n, children, max_substep, quantizer_iters, stratify
//   [price]      payoffs (one payoff expression per instrument, separated
//                by `;`), regularization = gcv | fixed, length, lambda_rel,
//                polynomial_degree
//   [table]      ns, ds, restarts, family = matern | gaussian
//   [figure]     which = kernels | distributions | sabr | all, grid,
//                n_points, gaussian_length, restarts, max_iters, sabr_n,
//                sabr_times
//   [quadrature] integrands (`;` separated), n
//   [run]        seed, threads, out
struct KernelConfig {
    std::string kind = "tensor-matern";
    int dim = 2;
    double length = 1.0;
    double scale = 1.0;
    bool operator==(const KernelConfig&) const = default;
};

struct LatticeConfig {
    std::vector<double> generators;
    std::string profile = "matern";
    double scale = 0.15915494309189535;  // 1 / (2 pi)
    double truncation_eps = 1e-8;
    std::string normalize = "unit-diagonal";
    bool operator==(const LatticeConfig&) const = default;
};

struct TransportConfig {
    std::string kind = "identity";
    std::vector<double> params;
    bool operator==(const TransportConfig&) const = default;
};

struct MeasureConfig {
    std::string kind = "auto";
    std::vector<double> lo, hi;
    bool operator==(const MeasureConfig&) const = default;
};

struct SequenceConfig {
    int n = 16;
    int restarts = 5;
    int max_iters = 10000;
    double grad_tol = -1.0;
    long long mc_samples = 100000;
    bool operator==(const SequenceConfig&) const = default;
};

struct ModelConfig {
    std::string kind = "sabr";
    double f0 = 0.03, alpha0 = 0.1, beta = 1.0, nu = 0.1, shift = 0.0, rho12 = 0.5;
    std::string preset = "brownian";
    std::vector<double> x0, a, sigma, correlation;
    bool operator==(const ModelConfig&) const = default;
};

struct GridConfig {
    std::vector<double> times = {0.0, 0.02, 1.0, 2.0};
    int n = 200;
    int children = 20;
    double max_substep = 0.0078125;
    int quantizer_iters = 300;
    bool stratify = true;
    bool operator==(const GridConfig&) const = default;
};

struct PriceConfig {
    std::vector<std::string> payoffs = {"call(F, strike=0.03)"};
    std::string regularization = "gcv";
    double length = 1.0;
    double lambda_rel = 1e-8;
    int polynomial_degree = 1;
    bool operator==(const PriceConfig&) const = default;
};

struct TableConfig {
    std::vector<int> ns = {16, 128, 512};
    std::vector<int> ds = {1, 16};
    int restarts = 5;
    std::string family = "matern";
    bool operator==(const TableConfig&) const = default;
};

struct FigureConfig {
    std::string which = "all";
    int grid = 64;
    int n_points = 256;
    double gaussian_length = 1.0;
    int restarts = 1;
    int max_iters = 3000;
    int sabr_n = 200;
    std::vector<double> sabr_times = {0.02, 2.0, 12.0};
    bool operator==(const FigureConfig&) const = default;
};

struct QuadratureConfig {
    std::vector<std::string> integrands = {"linear(1, 1)"};
    int n = 64;
    bool operator==(const QuadratureConfig&) const = default;
};

struct RunConfig {
    std::uint64_t seed = 0;
    int threads = 1;
    std::string out = "out";
    bool operator==(const RunConfig&) const = default;
};

struct ExperimentConfig {
    KernelConfig kernel;
    LatticeConfig lattice;
    TransportConfig transport;
    MeasureConfig measure;
    SequenceConfig sequence;
    ModelConfig model;
    GridConfig grid;
    PriceConfig price;
    TableConfig table;
    FigureConfig figure;
    QuadratureConfig quadrature;
    RunConfig run;
    bool operator==(const ExperimentConfig&) const = default;
};

// Throws ConfigError on syntax errors, unknown sections or keys, and values
// that do not parse.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig parse_config_string(const std::string& text);
ExperimentConfig load_config(const std::string& path);
// Sets one `key = value` of a section with the same parsing and errors as a
// configuration file.
void set_config_value(ExperimentConfig& config, const std::string& section, const std::string& key,
                      const std::string& value);
// Every field, doubles with 17 significant digits.
std::string emit_config(const ExperimentConfig& config);

// Objects described by a configuration. Throw ConfigError on inconsistent or
// invalid settings.
Kernel make_kernel(const ExperimentConfig& config);
Kernel make_kernel(const ExperimentConfig& config, int dim);
TransportMap make_transport(const ExperimentConfig& config, int dim);
Measure make_measure(const ExperimentConfig& config, const Kernel& kernel);
std::unique_ptr<SdeModel> make_model(const ExperimentConfig& config);
Eigen::VectorXd initial_state(const ExperimentConfig& config);

}  // namespace tmm
