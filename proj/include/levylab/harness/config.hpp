#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "levylab/levy/levy_model.hpp"
#include "levylab/lp/grid_field.hpp"
#include "levylab/nonlocal/generator.hpp"
#include "levylab/sde/simulator.hpp"

namespace levylab::harness {

/// Flat key-value configuration in TOML syntax: `[section]` headers, `key = value` lines,
/// `#` comments. Values are numbers, booleans, quoted strings or flat numeric arrays.
/// Keys are stored as "section.key".
class Config {
public:
    using Value = std::variant<double, bool, std::string, std::vector<double>>;

    static Config parse(const std::string& text);
    static Config load(const std::string& path);

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    double number(const std::string& key, double fallback) const;
    double number(const std::string& key) const;
    bool flag(const std::string& key, bool fallback) const;
    std::string text(const std::string& key, const std::string& fallback) const;
    std::vector<double> array(const std::string& key, std::vector<double> fallback) const;
    void set(const std::string& key, Value v) { values_[key] = std::move(v); }

    /// Canonical text (sorted keys), hashed into the manifest.
    std::string canonical() const;
    const std::map<std::string, Value>& values() const { return values_; }

private:
    std::map<std::string, Value> values_;
};

enum class Kind {
    symbol,
    lp,
    pde,
    simulate,
    verify_apriori,
    verify_krylov,
    verify_feynman_kac,
    verify_zvonkin,
    verify_maxprinciple,
    verify_coercivity,
    verify_commutator,
    regime_study,
};

Kind parse_kind(const std::string& name);
std::string kind_name(Kind kind);

/// Centralized statistical pass thresholds, overridable in the [thresholds] section.
struct Thresholds {
    double sigma_multiple = 3.0;   // Monte Carlo tolerance in standard errors
    double p_value = 0.01;         // chi-square / KS significance
    double refinement = 0.2;       // relative change under one grid refinement
    double stability_factor = 3.0; // spread of fitted constants across j
    double bernstein_factor = 2.0;

    static Thresholds from(const Config& c);
};

struct ExperimentConfig {
    Kind kind = Kind::symbol;
    std::string out_dir;
    std::uint64_t seed = 1;
    int threads = 0;
    Config raw;
    Thresholds thresholds;
};

/// Model, kernel, drift and grid builders from the [model], [kernel], [drift], [grid] sections.
levy::LevyModel make_model(const Config& c);
nonlocal::JumpKernel make_kernel(const Config& c);
nonlocal::DriftField make_drift(const Config& c);
lp::GridSpec make_grid(const Config& c, int dim);
/// [sim] section; seed and path count come from the experiment.
sde::SimConfig make_sim(const Config& c, int dim, std::uint64_t seed);

} // namespace levylab::harness
