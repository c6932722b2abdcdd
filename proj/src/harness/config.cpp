#include "levylab/harness/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "levylab/core/error.hpp"

namespace levylab::harness {
namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

[[noreturn]] void parse_error(int line, const std::string& msg) {
    fail(ErrorCode::configuration, "line " + std::to_string(line) + ": " + msg, line);
}

double parse_number(const std::string& s, int line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) parse_error(line, "trailing characters in number '" + s + "'");
        return v;
    } catch (const std::invalid_argument&) {
        parse_error(line, "not a number: '" + s + "'");
    } catch (const std::out_of_range&) {
        parse_error(line, "number out of range: '" + s + "'");
    }
}

Config::Value parse_value(const std::string& raw, int line) {
    const std::string v = trim(raw);
    if (v.empty()) parse_error(line, "missing value");
    if (v.front() == '"') {
        if (v.size() < 2 || v.back() != '"') parse_error(line, "unterminated string");
        return v.substr(1, v.size() - 2);
    }
    if (v == "true") return true;
    if (v == "false") return false;
    if (v.front() == '[') {
        if (v.back() != ']') parse_error(line, "unterminated array");
        std::vector<double> out;
        std::stringstream ss(v.substr(1, v.size() - 2));
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (!item.empty()) out.push_back(parse_number(item, line));
        }
        return out;
    }
    return parse_number(v, line);
}

const Config::Value* find(const std::map<std::string, Config::Value>& m, const std::string& key) {
    const auto it = m.find(key);
    return it == m.end() ? nullptr : &it->second;
}

[[noreturn]] void type_error(const std::string& key, const char* want) {
    fail(ErrorCode::configuration, "key '" + key + "' must be a " + want);
}

} // namespace

Config Config::parse(const std::string& text) {
    Config c;
    std::istringstream in(text);
    std::string line, section;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const std::string s = trim(strip_comment(line));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') parse_error(number, "malformed section header");
            section = trim(s.substr(1, s.size() - 2));
            if (section.empty()) parse_error(number, "empty section name");
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) parse_error(number, "expected key = value");
        const std::string key = trim(s.substr(0, eq));
        if (key.empty()) parse_error(number, "empty key");
        const std::string full = section.empty() ? key : section + "." + key;
        if (c.values_.count(full)) parse_error(number, "duplicate key '" + full + "'");
        c.values_[full] = parse_value(s.substr(eq + 1), number);
    }
    return c;
}

Config Config::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::io, "cannot read config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

double Config::number(const std::string& key, double fallback) const {
    const auto* v = find(values_, key);
    if (!v) return fallback;
    if (const auto* d = std::get_if<double>(v)) return *d;
    type_error(key, "number");
}

double Config::number(const std::string& key) const {
    if (!has(key)) fail(ErrorCode::configuration, "missing key '" + key + "'");
    return number(key, 0.0);
}

bool Config::flag(const std::string& key, bool fallback) const {
    const auto* v = find(values_, key);
    if (!v) return fallback;
    if (const auto* b = std::get_if<bool>(v)) return *b;
    type_error(key, "boolean");
}

std::string Config::text(const std::string& key, const std::string& fallback) const {
    const auto* v = find(values_, key);
    if (!v) return fallback;
    if (const auto* s = std::get_if<std::string>(v)) return *s;
    type_error(key, "string");
}

std::vector<double> Config::array(const std::string& key, std::vector<double> fallback) const {
    const auto* v = find(values_, key);
    if (!v) return fallback;
    if (const auto* a = std::get_if<std::vector<double>>(v)) return *a;
    if (const auto* d = std::get_if<double>(v)) return {*d};
    type_error(key, "numeric array");
}

std::string Config::canonical() const {
    std::ostringstream os;
    os << std::setprecision(17);
    for (const auto& [k, v] : values_) {
        os << k << '=';
        if (const auto* d = std::get_if<double>(&v)) {
            os << *d;
        } else if (const auto* b = std::get_if<bool>(&v)) {
            os << (*b ? "true" : "false");
        } else if (const auto* s = std::get_if<std::string>(&v)) {
            os << '"' << *s << '"';
        } else {
            const auto& a = std::get<std::vector<double>>(v);
            os << '[';
            for (std::size_t i = 0; i < a.size(); ++i) os << (i ? "," : "") << a[i];
            os << ']';
        }
        os << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------

namespace {
const std::pair<const char*, Kind> kKinds[] = {
    {"symbol", Kind::symbol},
    {"lp", Kind::lp},
    {"pde", Kind::pde},
    {"simulate", Kind::simulate},
    {"apriori", Kind::verify_apriori},
    {"krylov", Kind::verify_krylov},
    {"feynman-kac", Kind::verify_feynman_kac},
    {"zvonkin", Kind::verify_zvonkin},
    {"maxprinciple", Kind::verify_maxprinciple},
    {"coercivity", Kind::verify_coercivity},
    {"commutator", Kind::verify_commutator},
    {"regime-study", Kind::regime_study},
};
}

Kind parse_kind(const std::string& name) {
    std::string n = name;
    if (n.rfind("verify-", 0) == 0) n = n.substr(7);
    for (const auto& [s, k] : kKinds)
        if (n == s) return k;
    fail(ErrorCode::configuration, "unknown experiment kind '" + name + "'");
}

std::string kind_name(Kind kind) {
    for (const auto& [s, k] : kKinds)
        if (k == kind) {
            const std::string base = s;
            const bool verify = kind >= Kind::verify_apriori && kind <= Kind::verify_commutator;
            return verify ? "verify-" + base : base;
        }
    return "unknown";
}

Thresholds Thresholds::from(const Config& c) {
    Thresholds t;
    t.sigma_multiple = c.number("thresholds.sigma_multiple", t.sigma_multiple);
    t.p_value = c.number("thresholds.p_value", t.p_value);
    t.refinement = c.number("thresholds.refinement", t.refinement);
    t.stability_factor = c.number("thresholds.stability_factor", t.stability_factor);
    t.bernstein_factor = c.number("thresholds.bernstein_factor", t.bernstein_factor);
    return t;
}

levy::LevyModel make_model(const Config& c) {
    const double alpha = c.number("model.alpha", 0.5);
    const int dim = static_cast<int>(c.number("model.dim", 1));
    if (dim != 1 && dim != 2) fail(ErrorCode::configuration, "model.dim must be 1 or 2");
    const std::string measure = c.text("model.measure", "cylindrical");
    levy::SphericalMeasure sigma;
    if (measure == "cylindrical") {
        sigma = levy::SphericalMeasure::cylindrical(dim);
    } else if (measure == "isotropic") {
        sigma = levy::SphericalMeasure::isotropic(dim, static_cast<int>(c.number("model.directions", 64)),
                                                  c.number("model.mass", 1.0));
    } else {
        fail(ErrorCode::configuration, "model.measure must be cylindrical or isotropic");
    }
    levy::RadialProfile profile = levy::RadialProfile::constant_one();
    const std::string prof = c.text("model.profile", "unit");
    if (prof == "wave") {
        const double a = c.number("model.profile_amplitude", 0.5);
        if (!(a >= 0.0 && a < 1.0)) fail(ErrorCode::configuration, "model.profile_amplitude must lie in [0,1)");
        profile.kappa = [a](std::span<const double>, double r) { return 1.0 + a * std::cos(2.0 * M_PI * r); };
        profile.kappa_low = 1.0 - a;
        profile.kappa_high = 1.0 + a;
        profile.unit = false;
    } else if (prof != "unit") {
        fail(ErrorCode::configuration, "model.profile must be unit or wave");
    }
    const std::string tail = c.text("model.tail", "power");
    if (tail == "pure") return levy::LevyModel::pure_stable(alpha, std::move(sigma));
    if (tail == "power") return levy::LevyModel::stable_like(alpha, std::move(sigma), std::move(profile), c.number("model.r_max", 100.0));
    if (tail == "none") return levy::LevyModel::truncated(alpha, std::move(sigma), std::move(profile));
    fail(ErrorCode::configuration, "model.tail must be pure, power or none");
}

nonlocal::JumpKernel make_kernel(const Config& c) {
    const std::string type = c.text("kernel.type", "constant");
    const double value = c.number("kernel.value", 1.0);
    const double amp = c.number("kernel.amplitude", 0.5);
    if (type == "constant") return nonlocal::JumpKernel::constant(value);
    if (!(amp >= 0.0 && amp < value)) fail(ErrorCode::configuration, "kernel.amplitude must lie in [0, kernel.value)");
    if (type == "sine")
        return nonlocal::JumpKernel::of_x([value, amp](std::span<const double> x) { return value + amp * std::sin(x[0]); },
                                          value - amp, value + amp, amp, 1.0);
    if (type == "sine-z") {
        nonlocal::JumpKernel k;
        k.eval = [value, amp](double, std::span<const double> x, std::span<const double> z) {
            double r = 0.0;
            for (double v : z) r += v * v;
            return value + amp * std::sin(x[0]) * std::cos(std::sqrt(r));
        };
        k.kappa0 = value - amp;
        k.kappa1 = value + amp;
        k.kappa2 = amp;
        k.theta = 1.0;
        return k;
    }
    fail(ErrorCode::configuration, "kernel.type must be constant, sine or sine-z");
}

nonlocal::DriftField make_drift(const Config& c) {
    const std::string type = c.text("drift.type", "zero");
    const double amp = c.number("drift.amplitude", 0.5);
    if (type == "zero") return nonlocal::DriftField::zero();
    if (type == "constant") return nonlocal::DriftField::constant(c.array("drift.vector", {amp}));
    if (type == "sine")
        return nonlocal::DriftField::of_x(
            [amp](std::span<const double> x, std::span<double> b) {
                for (std::size_t i = 0; i < b.size(); ++i) b[i] = amp * std::sin(x[i]);
            },
            c.number("drift.beta", 1.0), amp);
    if (type == "linear") {
        auto b = nonlocal::DriftField::of_x(
            [amp](std::span<const double> x, std::span<double> out) {
                for (std::size_t i = 0; i < out.size(); ++i) out[i] = amp * x[i];
            },
            1.0, std::numeric_limits<double>::infinity());
        return b;
    }
    if (type == "holder") {
        const double beta = c.number("drift.beta", 0.5);
        if (!(beta > 0.0 && beta <= 1.0)) fail(ErrorCode::configuration, "drift.beta must lie in (0,1]");
        return nonlocal::DriftField::of_x(
            [amp, beta](std::span<const double> x, std::span<double> b) {
                std::fill(b.begin(), b.end(), 0.0);
                const double s = std::sin(x[0]);
                b[0] = amp * (s < 0 ? -1.0 : 1.0) * std::pow(std::abs(s), beta);
            },
            beta, amp);
    }
    fail(ErrorCode::configuration, "drift.type must be zero, constant, sine, linear or holder");
}

lp::GridSpec make_grid(const Config& c, int dim) {
    lp::GridSpec g;
    g.dim = dim;
    g.n = static_cast<std::size_t>(c.number("grid.n", dim == 1 ? 64 : 32));
    g.length = c.number("grid.length", 2.0 * M_PI);
    lp::validate(g);
    return g;
}

sde::SimConfig make_sim(const Config& c, int dim, std::uint64_t seed) {
    sde::SimConfig s;
    s.x0 = c.array("sim.x0", std::vector<double>(static_cast<std::size_t>(dim), 0.0));
    s.T = c.number("sim.T", 1.0);
    s.dt = c.number("sim.dt", 0.01);
    s.eps = c.number("sim.eps", 0.05);
    s.thinning_bound = c.number("sim.thinning_bound", make_kernel(c).kappa1);
    s.n_paths = static_cast<std::size_t>(c.number("sim.paths", 1000));
    s.seed = seed;
    const std::string comp = c.text("sim.compensator", "symmetric-zero");
    if (comp == "quadrature") {
        s.compensator = sde::CompensatorMode::quadrature;
    } else if (comp != "symmetric-zero") {
        fail(ErrorCode::configuration, "sim.compensator must be symmetric-zero or quadrature");
    }
    return s;
}

} // namespace levylab::harness
