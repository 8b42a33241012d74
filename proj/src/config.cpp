#include "tmm/config.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <climits>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "tmm/error.hpp"

namespace tmm {

namespace {

using boost::property_tree::ptree;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    if (trim(s).empty()) return out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) out.push_back(trim(item));
    return out;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <class T>
std::string join(const std::vector<T>& v, const char* sep) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += sep;
        if constexpr (std::is_same_v<T, double>)
            s += fmt(v[i]);
        else if constexpr (std::is_same_v<T, std::string>)
            s += v[i];
        else
            s += std::to_string(v[i]);
    }
    return s;
}

// Field binding: every key of every section maps to a parser and an emitter.
struct Field {
    std::function<void(const std::string&)> read;
    std::function<std::string()> write;
};

using Section = std::vector<std::pair<std::string, Field>>;

double to_double(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    double d = 0.0;
    try {
        d = std::stod(v, &pos);
    } catch (const std::exception&) {
        throw ConfigError("config: " + key + ": not a number: '" + v + "'");
    }
    if (pos != v.size() || !std::isfinite(d)) throw ConfigError("config: " + key + ": not a number: '" + v + "'");
    return d;
}

long long to_integer(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    long long i = 0;
    try {
        i = std::stoll(v, &pos);
    } catch (const std::exception&) {
        throw ConfigError("config: " + key + ": not an integer: '" + v + "'");
    }
    if (pos != v.size()) throw ConfigError("config: " + key + ": not an integer: '" + v + "'");
    return i;
}

Field field_of(const std::string& key, double& x) {
    return {[&x, key](const std::string& v) { x = to_double(key, v); }, [&x] { return fmt(x); }};
}

Field field_of(const std::string& key, int& x) {
    return {[&x, key](const std::string& v) {
                const long long i = to_integer(key, v);
                if (i < INT32_MIN || i > INT32_MAX) throw ConfigError("config: " + key + ": out of range");
                x = static_cast<int>(i);
            },
            [&x] { return std::to_string(x); }};
}

Field field_of(const std::string& key, long long& x) {
    return {[&x, key](const std::string& v) { x = to_integer(key, v); }, [&x] { return std::to_string(x); }};
}

Field field_of(const std::string& key, std::uint64_t& x) {
    return {[&x, key](const std::string& v) {
                std::size_t pos = 0;
                try {
                    if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
                    x = std::stoull(v, &pos);
                } catch (const std::exception&) {
                    throw ConfigError("config: " + key + ": not an unsigned integer: '" + v + "'");
                }
                if (pos != v.size()) throw ConfigError("config: " + key + ": not an unsigned integer: '" + v + "'");
            },
            [&x] { return std::to_string(x); }};
}

Field field_of(const std::string&, std::string& x) {
    return {[&x](const std::string& v) { x = v; }, [&x] { return x; }};
}

Field field_of(const std::string& key, bool& x) {
    return {[&x, key](const std::string& v) {
                if (v == "true" || v == "1")
                    x = true;
                else if (v == "false" || v == "0")
                    x = false;
                else
                    throw ConfigError("config: " + key + ": expected true or false, got '" + v + "'");
            },
            [&x] { return std::string(x ? "true" : "false"); }};
}

Field field_of(const std::string& key, std::vector<double>& x) {
    return {[&x, key](const std::string& v) {
                x.clear();
                for (const auto& item : split(v, ',')) x.push_back(to_double(key, item));
            },
            [&x] { return join(x, ", "); }};
}

Field field_of(const std::string& key, std::vector<int>& x) {
    return {[&x, key](const std::string& v) {
                x.clear();
                for (const auto& item : split(v, ',')) x.push_back(static_cast<int>(to_integer(key, item)));
            },
            [&x] { return join(x, ", "); }};
}

// `;`-separated expressions (the expressions themselves contain commas).
Field expressions_of(std::vector<std::string>& x) {
    return {[&x](const std::string& v) { x = split(v, ';'); }, [&x] { return join(x, "; "); }};
}

std::vector<std::pair<std::string, Section>> schema(ExperimentConfig& c) {
#define TMM_FIELD(sec, name, member) {name, field_of(sec "." name, c.member)}
    return {
        {"kernel",
         {TMM_FIELD("kernel", "kind", kernel.kind), TMM_FIELD("kernel", "dim", kernel.dim),
          TMM_FIELD("kernel", "length", kernel.length), TMM_FIELD("kernel", "scale", kernel.scale)}},
        {"lattice",
         {TMM_FIELD("lattice", "generators", lattice.generators), TMM_FIELD("lattice", "profile", lattice.profile),
          TMM_FIELD("lattice", "scale", lattice.scale), TMM_FIELD("lattice", "truncation_eps", lattice.truncation_eps),
          TMM_FIELD("lattice", "normalize", lattice.normalize)}},
        {"transport", {TMM_FIELD("transport", "kind", transport.kind), TMM_FIELD("transport", "params", transport.params)}},
        {"measure",
         {TMM_FIELD("measure", "kind", measure.kind), TMM_FIELD("measure", "lo", measure.lo),
          TMM_FIELD("measure", "hi", measure.hi)}},
        {"sequence",
         {TMM_FIELD("sequence", "n", sequence.n), TMM_FIELD("sequence", "restarts", sequence.restarts),
          TMM_FIELD("sequence", "max_iters", sequence.max_iters), TMM_FIELD("sequence", "grad_tol", sequence.grad_tol),
          TMM_FIELD("sequence", "mc_samples", sequence.mc_samples)}},
        {"model",
         {TMM_FIELD("model", "kind", model.kind), TMM_FIELD("model", "F0", model.f0),
          TMM_FIELD("model", "alpha0", model.alpha0), TMM_FIELD("model", "beta", model.beta),
          TMM_FIELD("model", "nu", model.nu), TMM_FIELD("model", "shift", model.shift),
          TMM_FIELD("model", "rho12", model.rho12), TMM_FIELD("model", "preset", model.preset),
          TMM_FIELD("model", "x0", model.x0), TMM_FIELD("model", "a", model.a), TMM_FIELD("model", "sigma", model.sigma),
          TMM_FIELD("model", "correlation", model.correlation)}},
        {"grid",
         {TMM_FIELD("grid", "times", grid.times), TMM_FIELD("grid", "n", grid.n),
          TMM_FIELD("grid", "children", grid.children), TMM_FIELD("grid", "max_substep", grid.max_substep),
          TMM_FIELD("grid", "quantizer_iters", grid.quantizer_iters), TMM_FIELD("grid", "stratify", grid.stratify)}},
        {"price",
         {{"payoffs", expressions_of(c.price.payoffs)}, TMM_FIELD("price", "regularization", price.regularization),
          TMM_FIELD("price", "length", price.length), TMM_FIELD("price", "lambda_rel", price.lambda_rel),
          TMM_FIELD("price", "polynomial_degree", price.polynomial_degree)}},
        {"table",
         {TMM_FIELD("table", "ns", table.ns), TMM_FIELD("table", "ds", table.ds),
          TMM_FIELD("table", "restarts", table.restarts), TMM_FIELD("table", "family", table.family)}},
        {"figure",
         {TMM_FIELD("figure", "which", figure.which), TMM_FIELD("figure", "grid", figure.grid),
          TMM_FIELD("figure", "n_points", figure.n_points), TMM_FIELD("figure", "gaussian_length", figure.gaussian_length),
          TMM_FIELD("figure", "restarts", figure.restarts), TMM_FIELD("figure", "max_iters", figure.max_iters),
          TMM_FIELD("figure", "sabr_n", figure.sabr_n), TMM_FIELD("figure", "sabr_times", figure.sabr_times)}},
        {"quadrature", {{"integrands", expressions_of(c.quadrature.integrands)}, TMM_FIELD("quadrature", "n", quadrature.n)}},
        {"run",
         {TMM_FIELD("run", "seed", run.seed), TMM_FIELD("run", "threads", run.threads), TMM_FIELD("run", "out", run.out)}},
    };
#undef TMM_FIELD
}

}  // namespace

void set_config_value(ExperimentConfig& c, const std::string& section, const std::string& key,
                      const std::string& value) {
    auto sections = schema(c);
    auto sec = std::find_if(sections.begin(), sections.end(), [&](const auto& s) { return s.first == section; });
    if (sec == sections.end()) throw ConfigError("config: unknown section [" + section + "]");
    auto field = std::find_if(sec->second.begin(), sec->second.end(), [&](const auto& f) { return f.first == key; });
    if (field == sec->second.end()) throw ConfigError("config: unknown key '" + key + "' in [" + section + "]");
    field->second.read(trim(value));
}

ExperimentConfig parse_config(std::istream& in) {
    ptree tree;
    try {
        boost::property_tree::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError("config: line " + std::to_string(e.line()) + ": " + e.message());
    }
    ExperimentConfig c;
    for (const auto& [name, body] : tree) {
        if (body.empty()) throw ConfigError("config: key '" + name + "' outside of a section");
        for (const auto& [key, value] : body) set_config_value(c, name, key, value.data());
    }
    return c;
}

ExperimentConfig parse_config_string(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    return parse_config(in);
}

std::string emit_config(const ExperimentConfig& config) {
    ExperimentConfig c = config;
    std::string out;
    for (const auto& [name, fields] : schema(c)) {
        if (!out.empty()) out += "\n";
        out += "[" + name + "]\n";
        for (const auto& [key, field] : fields) out += key + " = " + field.write() + "\n";
    }
    return out;
}

namespace {

Lattice make_lattice(const ExperimentConfig& c, int dim) {
    const auto& g = c.lattice.generators;
    if (g.empty()) return Lattice::unit(dim);
    if (static_cast<int>(g.size()) != dim * dim)
        throw ConfigError("config: lattice.generators needs " + std::to_string(dim * dim) + " entries");
    Eigen::MatrixXd m(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) m(i, j) = g[static_cast<std::size_t>(i * dim + j)];
    return Lattice(m);
}

ProfileFamily parse_family(const std::string& s) {
    if (s == "matern") return ProfileFamily::matern;
    if (s == "gaussian") return ProfileFamily::gaussian;
    if (s == "constant") return ProfileFamily::constant;
    throw ConfigError("config: unknown lattice.profile '" + s + "'");
}

KernelNormalization parse_normalization(const std::string& s) {
    if (s == "none") return KernelNormalization::none;
    if (s == "unit-diagonal") return KernelNormalization::unit_diagonal;
    throw ConfigError("config: unknown lattice.normalize '" + s + "'");
}

template <class F>
auto config_guard(F&& f) {
    try {
        return f();
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

}  // namespace

Kernel make_kernel(const ExperimentConfig& config) { return make_kernel(config, config.kernel.dim); }

Kernel make_kernel(const ExperimentConfig& c, int dim) {
    return config_guard([&] {
        const std::string& kind = c.kernel.kind;
        Kernel base = [&] {
            if (kind == "tensor-matern") return Kernel::tensor_matern(dim, c.kernel.length);
            if (kind == "gaussian") return Kernel::gaussian(dim, c.kernel.length);
            if (kind == "zonal") return Kernel::zonal(dim, c.kernel.scale);
            if (kind == "lattice") {
                const Lattice l = make_lattice(c, dim);
                const auto profile = SpectralProfile::family(l, parse_family(c.lattice.profile), c.lattice.scale,
                                                             c.lattice.truncation_eps);
                return lattice_kernel(l, profile, parse_normalization(c.lattice.normalize));
            }
            throw ConfigError("config: unknown kernel.kind '" + kind + "'");
        }();
        if (c.transport.kind == "identity") return base;
        return transported_kernel(base, make_transport(c, dim));
    });
}

TransportMap make_transport(const ExperimentConfig& c, int dim) {
    return config_guard([&] {
        const auto& p = c.transport.params;
        if (!p.empty() && static_cast<int>(p.size()) != 2 * dim)
            throw ConfigError("config: transport.params needs " + std::to_string(2 * dim) + " entries");
        Eigen::VectorXd loc(dim), scale(dim);
        for (int d = 0; d < dim && !p.empty(); ++d) {
            loc[d] = p[static_cast<std::size_t>(2 * d)];
            scale[d] = p[static_cast<std::size_t>(2 * d + 1)];
        }
        if (c.transport.kind == "identity") return TransportMap::identity(dim);
        if (c.transport.kind == "erf") return p.empty() ? TransportMap::erf(dim) : TransportMap::erf(loc, scale);
        if (c.transport.kind == "inverse-cdf")
            return p.empty() ? TransportMap::inverse_cdf(dim) : TransportMap::inverse_cdf(loc, scale);
        throw ConfigError("config: unknown transport.kind '" + c.transport.kind + "'");
    });
}

Measure make_measure(const ExperimentConfig& c, const Kernel& kernel) {
    return config_guard([&] {
        const int dim = kernel.dim();
        std::string kind = c.measure.kind;
        if (kind == "auto") kind = kernel.impl().lattice() ? "lattice-cell" : "unit-cube";
        if (kind == "lattice-cell") {
            if (!kernel.impl().lattice()) throw ConfigError("config: measure.kind = lattice-cell needs a lattice kernel");
            return Measure::lattice_cell(*kernel.impl().lattice());
        }
        if (kind == "unit-cube") return Measure::unit_cube(dim);
        if (kind == "box") {
            if (static_cast<int>(c.measure.lo.size()) != dim || static_cast<int>(c.measure.hi.size()) != dim)
                throw ConfigError("config: measure.lo and measure.hi need " + std::to_string(dim) + " entries");
            return Measure::uniform_box(Eigen::Map<const Eigen::VectorXd>(c.measure.lo.data(), dim),
                                        Eigen::Map<const Eigen::VectorXd>(c.measure.hi.data(), dim));
        }
        throw ConfigError("config: unknown measure.kind '" + kind + "'");
    });
}

std::unique_ptr<SdeModel> make_model(const ExperimentConfig& c) {
    return config_guard([&]() -> std::unique_ptr<SdeModel> {
        const auto& m = c.model;
        if (m.kind == "sabr") {
            SabrParams p;
            p.f0 = m.f0;
            p.alpha0 = m.alpha0;
            p.beta = m.beta;
            p.nu = m.nu;
            p.shift = m.shift;
            p.rho12 = m.rho12;
            return std::make_unique<SabrModel>(p);
        }
        if (m.kind != "custom") throw ConfigError("config: unknown model.kind '" + m.kind + "'");
        const auto dim = static_cast<Eigen::Index>(m.x0.size());
        if (dim < 1) throw ConfigError("config: model.x0 is required for custom models");
        auto vec = [&](const std::vector<double>& v, const char* name, double fill) {
            if (v.empty()) return Eigen::VectorXd::Constant(dim, fill).eval();
            if (static_cast<Eigen::Index>(v.size()) != dim)
                throw ConfigError(std::string("config: model.") + name + " needs " + std::to_string(dim) + " entries");
            return Eigen::Map<const Eigen::VectorXd>(v.data(), dim).eval();
        };
        Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(dim, dim);
        if (!m.correlation.empty()) {
            if (static_cast<Eigen::Index>(m.correlation.size()) != dim * dim)
                throw ConfigError("config: model.correlation needs " + std::to_string(dim * dim) + " entries");
            corr = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                m.correlation.data(), dim, dim);
        }
        static const std::map<std::string, CustomModel::Preset> presets = {
            {"frozen", CustomModel::Preset::frozen},
            {"drift", CustomModel::Preset::drift},
            {"brownian", CustomModel::Preset::brownian},
            {"gbm", CustomModel::Preset::gbm}};
        const auto it = presets.find(m.preset);
        if (it == presets.end()) throw ConfigError("config: unknown model.preset '" + m.preset + "'");
        return std::make_unique<CustomModel>(it->second, vec(m.a, "a", 0.0), vec(m.sigma, "sigma", 1.0), corr);
    });
}

Eigen::VectorXd initial_state(const ExperimentConfig& c) {
    if (c.model.kind == "sabr") {
        Eigen::VectorXd x(2);
        x << c.model.f0, c.model.alpha0;
        return x;
    }
    return Eigen::Map<const Eigen::VectorXd>(c.model.x0.data(), static_cast<Eigen::Index>(c.model.x0.size()));
}

}  // namespace tmm
