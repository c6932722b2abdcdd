#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "levylab/core/error.hpp"
#include "levylab/harness/config.hpp"

namespace levylab::harness {

enum class Regime { subcritical, critical, supercritical };

struct RegimeClass {
    Regime regime;
    bool balance;  // alpha + beta >= 1
};

/// alpha in (0,2), beta in [0,1]; alpha < 1 supercritical, alpha == 1 critical, alpha > 1 subcritical.
RegimeClass classify_regime(double alpha, double beta);
std::string regime_name(Regime r);

enum class Status { pass, warn, skip, info };
std::string status_name(Status s);

struct Check {
    std::string name;
    Status status;
    double measured;
    double bound;
    std::string note;
};

struct HypothesisReport {
    std::vector<Check> checks;
    bool all_pass() const;
};

/// Sampled certification of the structural hypotheses: non-degeneracy and tail of nu, kernel bounds
/// and Hoelder quotient, the modulus inequality
///   int |sigma(t,x,z) - sigma(t,y,z)| (|z| ^ 1) nu(dz) <= |x-y| (rho(x) + rho(y))
/// on sampled pairs (node quadrature of nu), the drift sup bound and Besov decay against the declared
/// metadata, beta > 1 - alpha/2 and the balance condition.
HypothesisReport hypothesis_check(const levy::LevyModel& model, const nonlocal::JumpKernel& kernel,
                                  const nonlocal::DriftField& drift, std::size_t samples, std::uint64_t seed = 1);

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
double ks_statistic(std::vector<double> a, std::vector<double> b);

struct RegimeStudyConfig {
    levy::LevyModel model;
    nonlocal::JumpKernel kernel = nonlocal::JumpKernel::constant(1.0);
    /// b(x) = amplitude sign(sin x_1) |sin x_1|^beta in the first component.
    double beta = 0.5;
    double amplitude = 0.5;
    /// Mollification levels l: the drift is S_l b (low-pass below block l).
    std::vector<int> levels{0, 1, 2, 3, 4, 5};
    lp::GridSpec grid{1, 256, 2.0 * 3.141592653589793};
    sde::SimConfig sim;
};

struct RegimeStudyReport {
    RegimeClass regime;
    std::vector<int> levels;
    /// KS distance of X_T between levels l_i and l_{i+1}, common random numbers across levels.
    std::vector<double> ks;
    double slope;  // least-squares slope of log ks against the level index
    bool decreasing;
    /// alpha + beta < 1: reported only, no pass/fail.
    bool descriptive;
};

RegimeStudyReport regime_study(const RegimeStudyConfig& config);

struct ExperimentResult {
    std::vector<Check> checks;
    std::vector<std::string> files;
    /// 0 pass, 2 at least one verification WARN, 1 error (see error.json).
    int exit_code = 0;
    std::string error;
};

/// Dispatches on the experiment kind and writes summary.csv, hypotheses.csv (where a model is
/// involved), kind-specific CSV and SVG files and manifest.json to the output directory.
/// Module errors are caught and recorded in error.json with exit code 1.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// error.json for failures that happen before an experiment starts (unreadable or invalid config).
void write_error_record(const ExperimentConfig& config, const Error& error);

/// Descriptive title of what an experiment checks; the first column of summary.csv.
std::string experiment_title(Kind kind);

} // namespace levylab::harness
