#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "tmm/config.hpp"

namespace tmm {

// Experiment drivers behind the command-line subcommands. Each writes CSV
// files into `out` (created if missing); doubles carry 17 significant digits
// so identical configurations give byte-identical files. Progress goes to
// `log`.

struct TableCell {
    int n = 0;
    int dim = 0;
    double e_sea = 0.0;
    // NaN when the optimizer failed for this cell.
    double e_optimized = 0.0;
};

// Lattice kernel on the unit lattice of each dimension (family, scale and
// normalization from config.lattice / config.table), optimized on its cell.
// Cell (N, D) is seeded with derive_seed(config.run.seed, {N, D}).
std::vector<TableCell> run_discrepancy_table(const std::vector<int>& ns, const std::vector<int>& ds,
                                             const ExperimentConfig& config, std::ostream& log);

// table.csv: N,D,E_sea,E_optimized
void write_table(const std::vector<TableCell>& cells, const std::filesystem::path& out);

// points.csv and points.cert.json.
void run_sequence(const ExperimentConfig& config, const std::filesystem::path& out, std::ostream& log);
// t_<j>.csv per grid time and certificates.csv (t,E,method,seed,flagged).
void run_simulate(const ExperimentConfig& config, const std::filesystem::path& out, std::ostream& log);
// surface_t<j>.csv, price.csv (id, price, delta per coordinate at t_1) and
// sensitivities_t<j>.csv for j >= 1.
void run_price(const ExperimentConfig& config, const std::filesystem::path& out, std::ostream& log);
// which: kernels | distributions | sabr | all.
//   kernels_periodic.csv, kernels_transported.csv   x1,x2,K on a grid of [0,1]^2
//   dist_random.csv, dist_matern.csv, dist_gaussian.csv
//   sabr_<j>.csv for each of figure.sabr_times, sabr_times.csv
void run_figure_data(const std::string& which, const ExperimentConfig& config, const std::filesystem::path& out,
                     std::ostream& log);
// quadrature.csv: integrand,N,E,estimate,reference,reference_se
void run_quadrature(const ExperimentConfig& config, const std::filesystem::path& out, std::ostream& log);

// Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure,
// 1 anything else.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tmm
