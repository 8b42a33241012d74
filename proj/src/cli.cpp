#include "tmm/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "tmm/error.hpp"
#include "tmm/parallel.hpp"
#include "tmm/payoff.hpp"

namespace tmm {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + "\"";
}

class CsvWriter {
public:
    CsvWriter(const fs::path& path, const std::vector<std::string>& header) : path_(path), out_(path) {
        if (!out_) throw std::runtime_error("cannot write " + path.string());
        row(header);
    }

    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) out_ << (i ? "," : "") << csv_field(fields[i]);
        out_ << '\n';
    }

    ~CsvWriter() { out_.flush(); }

private:
    fs::path path_;
    std::ofstream out_;
};

void write_points(const fs::path& path, const Points& y, const std::vector<std::string>& names) {
    CsvWriter w(path, names);
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
        std::vector<std::string> r;
        for (Eigen::Index d = 0; d < y.cols(); ++d) r.push_back(fmt(y(i, d)));
        w.row(r);
    }
}

std::vector<std::string> generic_names(int dim) {
    std::vector<std::string> names;
    for (int d = 1; d <= dim; ++d) names.push_back("x" + std::to_string(d));
    return names;
}

std::vector<std::string> coordinate_names(const ExperimentConfig& c, int dim) {
    if (c.model.kind == "sabr") return {"F", "alpha"};
    return generic_names(dim);
}

ProfileFamily table_family(const std::string& s) {
    if (s == "matern") return ProfileFamily::matern;
    if (s == "gaussian") return ProfileFamily::gaussian;
    throw ConfigError("config: table.family must be matern or gaussian, got '" + s + "'");
}

KernelNormalization normalization(const std::string& s) {
    if (s == "none") return KernelNormalization::none;
    if (s == "unit-diagonal") return KernelNormalization::unit_diagonal;
    throw ConfigError("config: unknown lattice.normalize '" + s + "'");
}

OptimizerOptions sequence_options(const ExperimentConfig& c) {
    OptimizerOptions o;
    o.restarts = c.sequence.restarts;
    o.max_iters = c.sequence.max_iters;
    o.grad_tol = c.sequence.grad_tol;
    o.seed = c.run.seed;
    o.eval.mc_samples = c.sequence.mc_samples;
    o.eval.seed = derive_seed(c.run.seed, {stream::monte_carlo});
    return o;
}

ForwardOptions forward_options(const ExperimentConfig& c) {
    if (c.grid.n < 2) throw ConfigError("config: grid.n must be at least 2");
    if (c.grid.children < 1) throw ConfigError("config: grid.children must be positive");
    if (c.grid.quantizer_iters < 1) throw ConfigError("config: grid.quantizer_iters must be positive");
    ForwardOptions o;
    o.children_per_particle = c.grid.children;
    o.max_substep = c.grid.max_substep;
    o.stratify = c.grid.stratify;
    o.seed = c.run.seed;
    o.quantizer.max_iters = c.grid.quantizer_iters;
    return o;
}

ParticleFlow simulate(const ExperimentConfig& c, const std::vector<double>& times, int n, std::ostream& log) {
    const auto model = make_model(c);
    const Eigen::VectorXd x0 = initial_state(c);
    const Kernel base = make_kernel(c, model->dim());
    log << "propagating " << model->id() << " with N=" << n << " over " << times.size() - 1 << " steps\n";
    auto flow = propagate(*model, base, as_point(x0), times, n, forward_options(c));
    for (std::size_t j = 0; j < flow.steps.size(); ++j)
        if (flow.steps[j].flagged) log << "warning: step " << j << ": " << flow.steps[j].warning << '\n';
    return flow;
}

std::uint64_t certificate_seed(const ParticleFlow& flow, std::size_t j) {
    return j == 0 ? flow.seed : derive_seed(flow.seed, {stream::forward, static_cast<std::uint64_t>(j - 1)});
}

SensitivityOptions sensitivity_options(const ExperimentConfig& c) {
    SensitivityOptions o;
    if (c.price.regularization == "gcv")
        o.regularization = Regularization::gcv;
    else if (c.price.regularization == "fixed")
        o.regularization = Regularization::fixed;
    else
        throw ConfigError("config: price.regularization must be gcv or fixed");
    o.length_scale = c.price.length;
    o.lambda_rel = c.price.lambda_rel;
    o.polynomial_degree = c.price.polynomial_degree;
    return o;
}

void write_grid_kernel(const fs::path& path, const Kernel& k, int grid) {
    if (grid < 2) throw ConfigError("config: figure.grid must be at least 2");
    CsvWriter w(path, {"x1", "x2", "K"});
    const double origin[2] = {0.0, 0.0};
    for (int i = 0; i < grid; ++i)
        for (int j = 0; j < grid; ++j) {
            const double x[2] = {static_cast<double>(i) / (grid - 1), static_cast<double>(j) / (grid - 1)};
            w.row({fmt(x[0]), fmt(x[1]), fmt(k(x, origin))});
        }
}

Kernel figure_lattice_kernel(const ExperimentConfig& c) {
    const Lattice l = Lattice::unit(2);
    const auto profile = SpectralProfile::family(l, table_family(c.lattice.profile), c.lattice.scale,
                                                 c.lattice.truncation_eps);
    return lattice_kernel(l, profile, normalization(c.lattice.normalize));
}

// Applies `--kernel kind[:key=value,...]` on top of the configuration.
void apply_kernel_spec(ExperimentConfig& c, const std::string& spec) {
    const auto colon = spec.find(':');
    c.kernel.kind = spec.substr(0, colon);
    if (colon == std::string::npos) return;
    std::stringstream rest(spec.substr(colon + 1));
    std::string item;
    while (std::getline(rest, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ConfigError("--kernel: expected key=value, got '" + item + "'");
        const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
        if (key == "length" || key == "dim" || (key == "scale" && c.kernel.kind != "lattice"))
            set_config_value(c, "kernel", key, value);
        else if (key == "scale" || key == "profile" || key == "normalize" || key == "truncation_eps")
            set_config_value(c, "lattice", key, value);
        else if (key == "transport")
            set_config_value(c, "transport", "kind", value);
        else
            throw ConfigError("--kernel: unknown key '" + key + "'");
    }
}

}  // namespace

std::vector<TableCell> run_discrepancy_table(const std::vector<int>& ns, const std::vector<int>& ds,
                                             const ExperimentConfig& config, std::ostream& log) {
    const ProfileFamily family = table_family(config.table.family);
    const KernelNormalization norm = normalization(config.lattice.normalize);
    for (int n : ns)
        if (n < 1) throw ConfigError("config: table.ns must be positive");
    for (int d : ds)
        if (d < 1) throw ConfigError("config: table.ds must be positive");
    std::vector<TableCell> cells;
    for (int d : ds) {
        const Lattice l = Lattice::unit(d);
        const auto profile = SpectralProfile::family(l, family, config.lattice.scale, config.lattice.truncation_eps);
        const Kernel k = lattice_kernel(l, profile, norm);
        const Measure mu = Measure::lattice_cell(l);
        for (int n : ns) {
            TableCell cell{n, d, sea_bound(profile, n, norm).value, std::numeric_limits<double>::quiet_NaN()};
            OptimizerOptions o = sequence_options(config);
            o.restarts = config.table.restarts;
            o.seed = derive_seed(config.run.seed, {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(d)});
            try {
                const auto s = minimize_discrepancy(k, mu, n, o);
                cell.e_optimized = s.certificate->value;
                log << "N=" << n << " D=" << d << " E_sea=" << fmt(cell.e_sea) << " E_opt=" << fmt(cell.e_optimized)
                    << '\n';
            } catch (const NumericalError& e) {
                log << "N=" << n << " D=" << d << ": optimizer failed: " << e.what() << '\n';
            } catch (const DegenerateInput& e) {
                log << "N=" << n << " D=" << d << ": optimizer failed: " << e.what() << '\n';
            }
            cells.push_back(cell);
        }
    }
    return cells;
}

void write_table(const std::vector<TableCell>& cells, const fs::path& out) {
    fs::create_directories(out);
    CsvWriter w(out / "table.csv", {"N", "D", "E_sea", "E_optimized"});
    for (const auto& c : cells) w.row({std::to_string(c.n), std::to_string(c.dim), fmt(c.e_sea), fmt(c.e_optimized)});
}

void run_sequence(const ExperimentConfig& config, const fs::path& out, std::ostream& log) {
    if (config.sequence.n < 1) throw ConfigError("config: sequence.n must be positive");
    const Kernel k = make_kernel(config);
    const Measure mu = make_measure(config, k);
    log << "minimizing E for " << k.id() << " on " << mu.id() << " with N=" << config.sequence.n << '\n';
    const auto s = minimize_discrepancy(k, mu, config.sequence.n, sequence_options(config));
    fs::create_directories(out);
    write_points(out / "points.csv", s.points, generic_names(k.dim()));
    const auto& c = *s.certificate;
    const double e = c.value;
    nlohmann::ordered_json j;
    j["E"] = e;
    j["kernel"] = c.kernel_id;
    j["measure"] = c.mu_id;
    j["method"] = to_string(c.method);
    j["N"] = s.points.rows();
    j["D"] = s.points.cols();
    j["domain"] = s.domain;
    j["seed"] = config.run.seed;
    j["iterations"] = c.iterations;
    j["converged"] = c.converged;
    j["grad_norm"] = c.grad_norm;
    if (c.method == CertificateMethod::monte_carlo) {
        j["mc_samples"] = c.samples;
        j["mc_seed"] = c.seed;
        j["std_error"] = c.std_error;
    }
    std::ofstream(out / "points.cert.json") << j.dump(2) << '\n';
    log << "E = " << fmt(e) << '\n';
}

void run_simulate(const ExperimentConfig& config, const fs::path& out, std::ostream& log) {
    const auto flow = simulate(config, config.grid.times, config.grid.n, log);
    fs::create_directories(out);
    const auto names = coordinate_names(config, flow.dim());
    CsvWriter w(out / "certificates.csv", {"t", "E", "method", "seed", "flagged"});
    for (std::size_t j = 0; j < flow.times.size(); ++j) {
        write_points(out / ("t_" + std::to_string(j) + ".csv"), flow.states[j], names);
        const bool flagged = j > 0 && flow.steps[j - 1].flagged;
        w.row({fmt(flow.times[j]), fmt(flow.certificates[j].value), to_string(flow.certificates[j].method),
               std::to_string(certificate_seed(flow, j)), flagged ? "1" : "0"});
    }
}

void run_price(const ExperimentConfig& config, const fs::path& out, std::ostream& log) {
    const auto& times = config.grid.times;
    if (times.size() < 2) throw ConfigError("config: grid.times needs at least two times");
    const auto model = make_model(config);
    const auto names = coordinate_names(config, model->dim());
    const auto book = make_payoff(config.price.payoffs, model->dim(), times.back(), names);
    const auto sens_opts = sensitivity_options(config);

    const auto flow = simulate(config, times, config.grid.n, log);
    const auto matrices = transition_matrices(flow);
    const auto surface = backward_solve(flow, matrices, book.payoff, book.pay_times);
    const Eigen::VectorXd price = surface.price();

    fs::create_directories(out);
    const auto n_inst = static_cast<Eigen::Index>(book.payoff.ids.size());
    std::vector<std::string> header = names;
    for (const auto& id : book.payoff.ids) header.push_back(id);
    Eigen::MatrixXd delta = Eigen::MatrixXd::Constant(n_inst, flow.dim(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t j = 0; j < flow.times.size(); ++j) {
        const auto& y = flow.states[j];
        {
            CsvWriter w(out / ("surface_t" + std::to_string(j) + ".csv"), header);
            for (Eigen::Index n = 0; n < y.rows(); ++n) {
                std::vector<std::string> r;
                for (Eigen::Index d = 0; d < y.cols(); ++d) r.push_back(fmt(y(n, d)));
                for (Eigen::Index m = 0; m < n_inst; ++m) r.push_back(fmt(surface.values[j](n, m)));
                w.row(r);
            }
        }
        if (j == 0) continue;
        const auto s = sensitivity(flow, surface, static_cast<int>(j), sens_opts);
        std::vector<std::string> sh = names;
        for (const auto& id : book.payoff.ids)
            for (const auto& name : names) sh.push_back("d" + name + ":" + id);
        CsvWriter w(out / ("sensitivities_t" + std::to_string(j) + ".csv"), sh);
        for (Eigen::Index n = 0; n < y.rows(); ++n) {
            std::vector<std::string> r;
            for (Eigen::Index d = 0; d < y.cols(); ++d) r.push_back(fmt(y(n, d)));
            for (Eigen::Index m = 0; m < n_inst; ++m)
                for (int d = 0; d < flow.dim(); ++d) r.push_back(fmt(s.by_dim[static_cast<std::size_t>(d)](n, m)));
            w.row(r);
        }
        if (j == 1)
            for (int d = 0; d < flow.dim(); ++d)
                delta.col(d) = s.by_dim[static_cast<std::size_t>(d)].colwise().mean().transpose();
    }
    std::vector<std::string> ph = {"id", "price"};
    for (const auto& name : names) ph.push_back("delta_" + name);
    CsvWriter w(out / "price.csv", ph);
    for (Eigen::Index m = 0; m < n_inst; ++m) {
        std::vector<std::string> r = {book.payoff.ids[static_cast<std::size_t>(m)], fmt(price[m])};
        for (int d = 0; d < flow.dim(); ++d) r.push_back(fmt(delta(m, d)));
        w.row(r);
        log << book.payoff.ids[static_cast<std::size_t>(m)] << ": " << fmt(price[m]) << '\n';
    }
}

void run_figure_data(const std::string& which, const ExperimentConfig& config, const fs::path& out,
                     std::ostream& log) {
    const bool all = which == "all";
    if (!all && which != "kernels" && which != "distributions" && which != "sabr")
        throw ConfigError("figure must be kernels, distributions, sabr or all, got '" + which + "'");
    const auto& f = config.figure;
    fs::create_directories(out);
    if (all || which == "kernels") {
        log << "kernel slices on a " << f.grid << "x" << f.grid << " grid\n";
        write_grid_kernel(out / "kernels_periodic.csv", figure_lattice_kernel(config), f.grid);
        write_grid_kernel(out / "kernels_transported.csv",
                          transported_kernel(Kernel::tensor_matern(2), TransportMap::erf(2)), f.grid);
    }
    if (all || which == "distributions") {
        if (f.n_points < 2) throw ConfigError("config: figure.n_points must be at least 2");
        OptimizerOptions o = sequence_options(config);
        o.restarts = f.restarts;
        o.max_iters = f.max_iters;
        const auto names = generic_names(2);
        const auto random = baseline_sequence(BaselineKind::iid_uniform, f.n_points, 2,
                                              derive_seed(config.run.seed, {stream::baseline}));
        write_points(out / "dist_random.csv", random.points, names);
        log << "lattice Matern sequence, N=" << f.n_points << '\n';
        const Kernel lk = figure_lattice_kernel(config);
        const auto matern = minimize_discrepancy(lk, Measure::lattice_cell(Lattice::unit(2)), f.n_points, o);
        write_points(out / "dist_matern.csv", matern.points, names);
        log << "transported Gaussian sequence, N=" << f.n_points << '\n';
        const Kernel gk = transported_kernel(Kernel::gaussian(2, f.gaussian_length), TransportMap::erf(2));
        const auto gaussian = minimize_discrepancy(gk, Measure::unit_cube(2), f.n_points, o);
        write_points(out / "dist_gaussian.csv", gaussian.points, names);
    }
    if (all || which == "sabr") {
        ExperimentConfig c = config;
        c.model.kind = "sabr";
        std::vector<double> times = {0.0};
        times.insert(times.end(), f.sabr_times.begin(), f.sabr_times.end());
        const auto flow = simulate(c, times, f.sabr_n, log);
        CsvWriter w(out / "sabr_times.csv", {"index", "t", "E"});
        for (std::size_t j = 1; j < flow.times.size(); ++j) {
            write_points(out / ("sabr_" + std::to_string(j) + ".csv"), flow.states[j], {"F", "alpha"});
            w.row({std::to_string(j), fmt(flow.times[j]), fmt(flow.certificates[j].value)});
        }
    }
}

void run_quadrature(const ExperimentConfig& config, const fs::path& out, std::ostream& log) {
    const int n = config.quadrature.n;
    if (n < 1) throw ConfigError("config: quadrature.n must be positive");
    if (config.sequence.mc_samples < 2) throw ConfigError("config: sequence.mc_samples must be at least 2");
    const Kernel k = make_kernel(config);
    const int dim = k.dim();
    std::vector<PayoffExpression> integrands;
    for (const auto& text : config.quadrature.integrands) integrands.push_back(PayoffExpression::parse(text, dim));
    const Measure mu = make_measure(config, k);
    log << "sharp sequence for " << k.id() << " on " << mu.id() << " with N=" << n << '\n';
    const auto s = minimize_discrepancy(k, mu, n, sequence_options(config));

    // Reference values by plain Monte Carlo on mu.
    const long long samples = config.sequence.mc_samples;
    Rng rng(derive_seed(config.run.seed, {stream::monte_carlo, 1}));
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(integrands.size()));
    Eigen::VectorXd sq = sum;
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (long long i = 0; i < samples; ++i) {
        mu.sample(rng, x.data());
        for (std::size_t m = 0; m < integrands.size(); ++m) {
            const double v = integrands[m](Point(x.data(), x.size()));
            sum[static_cast<Eigen::Index>(m)] += v;
            sq[static_cast<Eigen::Index>(m)] += v * v;
        }
    }
    fs::create_directories(out);
    CsvWriter w(out / "quadrature.csv", {"integrand", "N", "E", "estimate", "reference", "reference_se"});
    const auto ns = static_cast<double>(samples);
    for (std::size_t m = 0; m < integrands.size(); ++m) {
        double est = 0.0;
        for (Eigen::Index i = 0; i < s.points.rows(); ++i) est += integrands[m](row(s.points, i));
        est /= static_cast<double>(n);
        const double mean = sum[static_cast<Eigen::Index>(m)] / ns;
        const double var = std::max(0.0, sq[static_cast<Eigen::Index>(m)] / ns - mean * mean) * ns / (ns - 1.0);
        w.row({integrands[m].text(), std::to_string(n), fmt(s.certificate->value), fmt(est), fmt(mean),
               fmt(std::sqrt(var / ns))});
    }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Kernel discrepancy sequences, particle transport and pricing"};
    app.require_subcommand(1);
    std::string config_path, out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    app.add_option("--config", config_path, "Experiment configuration file");
    app.add_option("--seed", seed, "Master seed (overrides run.seed)");
    app.add_option("--threads", threads, "Worker threads (overrides run.threads)");
    app.add_option("--out", out_dir, "Output directory (overrides run.out)");

    auto* seq = app.add_subcommand("sequence", "Sharp discrepancy sequence: points.csv, points.cert.json");
    std::string kernel_spec;
    std::optional<int> seq_n, seq_d, seq_restarts;
    seq->add_option("--kernel", kernel_spec, "kind[:key=value,...], e.g. lattice:profile=gaussian,scale=0.2");
    seq->add_option("-N", seq_n, "Number of points");
    seq->add_option("-D", seq_d, "Dimension");
    seq->add_option("--restarts", seq_restarts, "Optimizer restarts");

    auto* table = app.add_subcommand("discrepancy-table", "E_sea against optimized E: table.csv");
    auto* sim = app.add_subcommand("simulate", "Forward particle flow: t_<j>.csv, certificates.csv");
    auto* price = app.add_subcommand("price", "Fair values and sensitivities: price.csv, surface and sensitivities");
    auto* fig = app.add_subcommand("figure", "Plot data for the kernel, distribution and SABR figures");
    std::string which;
    fig->add_option("which", which, "kernels | distributions | sabr | all");
    auto* quad = app.add_subcommand("quadrature", "Quadrature on a sharp sequence: quadrature.csv");
    for (auto* sub : {seq, table, sim, price, fig, quad}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        ExperimentConfig c = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
        if (seed) c.run.seed = *seed;
        if (threads) c.run.threads = *threads;
        if (!out_dir.empty()) c.run.out = out_dir;
        if (c.run.threads < 1) throw ConfigError("threads must be positive");
        set_worker_count(c.run.threads);
        const fs::path dir = c.run.out;

        if (seq->parsed()) {
            if (!kernel_spec.empty()) apply_kernel_spec(c, kernel_spec);
            if (seq_n) c.sequence.n = *seq_n;
            if (seq_d) c.kernel.dim = *seq_d;
            if (seq_restarts) c.sequence.restarts = *seq_restarts;
            run_sequence(c, dir, err);
        } else if (table->parsed()) {
            write_table(run_discrepancy_table(c.table.ns, c.table.ds, c, err), dir);
        } else if (sim->parsed()) {
            run_simulate(c, dir, err);
        } else if (price->parsed()) {
            run_price(c, dir, err);
        } else if (fig->parsed()) {
            run_figure_data(which.empty() ? c.figure.which : which, c, dir, err);
        } else if (quad->parsed()) {
            run_quadrature(c, dir, err);
        }
        return 0;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const DegenerateInput& e) {
        err << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace tmm
