#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "levylab/nonlocal/generator.hpp"

namespace levylab::pde {

using lp::GridField;
using lp::GridSpec;
using nonlocal::DriftField;
using nonlocal::Generator;
using nonlocal::JumpKernel;

enum class Direction { forward, backward };

/// Source term f(t, .) on the problem grid.
struct Source {
    std::function<GridField(double t)> at;
    bool time_independent = false;

    static Source constant(GridField f);
    static Source zero(const GridSpec& spec);
    /// Linear interpolation between snapshots at increasing `times`.
    static Source snapshots(std::vector<double> times, std::vector<GridField> fields);
};

/// forward:  d_t u = L u - lambda u + f (+ kappa |grad u|),  u(0) = 0
/// backward: d_t u + L u - lambda u + f (+ kappa |grad u|) = 0,  u(T) = 0
/// with L = L^sigma_nu + b . grad.
struct PdeProblem {
    Direction direction = Direction::forward;
    double lambda = 0.0;
    std::shared_ptr<const Generator> generator;
    JumpKernel kernel = JumpKernel::constant(1.0);
    DriftField drift = DriftField::zero();
    Source source;
    double quasilinear_kappa = 0.0;
    double T = 1.0;
    double dt = 0.01;
    double c_cfl = 0.5;
    /// Constant of the implicit reference part kappa0 L_nu; defaults to kernel.kappa0 when NaN.
    double reference_kappa = std::numeric_limits<double>::quiet_NaN();
    /// Snapshot stride in steps.
    int save_every = 1;
    /// Besov diagnostics ||u||_{B^{alpha+gamma}_{q,inf}} / ||f||_{B^gamma_{q,inf}} at saved steps.
    double diag_gamma = 0.0;
    double diag_q = std::numeric_limits<double>::infinity();
    bool diagnostics = true;
    Exec exec = Exec::parallel;
};

struct StepRecord {
    double t;
    double besov_ratio;
    double remainder_bound;
    double dt;
};

/// Snapshots in increasing physical time, whatever the direction of integration.
struct PdeSolution {
    Direction direction = Direction::forward;
    std::vector<double> times;
    std::vector<GridField> snapshots;
    std::vector<StepRecord> diagnostics;
    /// Largest Picard iteration count over all steps (quasi-linear solves).
    int max_picard_iterations = 0;
    int step_halvings = 0;

    /// Linear interpolation in time.
    GridField at(double t) const;
    const GridField& initial() const { return snapshots.front(); }
    const GridField& last() const { return snapshots.back(); }
};

PdeSolution solve(const PdeProblem& problem);
PdeSolution solve_quasilinear(const PdeProblem& problem);

/// Diagnostics CSV with columns t, besov_ratio, remainder_bound, dt.
void write_diagnostics_csv(const PdeSolution& solution, const std::string& path);

// ---- a-priori estimate verification ------------------------------------------------

struct AprioriConfig {
    levy::LevyModel model;
    JumpKernel kernel = JumpKernel::constant(1.0);
    DriftField drift = DriftField::zero();
    std::size_t n_coarse = 64;
    double T = 0.5;
    double dt = 0.01;
    double lambda = 1.0;
    double gamma = 0.0;
    double q = std::numeric_limits<double>::infinity();
    /// eta < alpha + gamma for the lambda sweep; NaN selects gamma + alpha / 2.
    double eta = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> lambdas{1.0, 10.0, 100.0};
    int sources = 10;
    /// Random sources carry integer wave numbers 1 <= |k| <= source_band, amplitude |k|^{-source_decay}.
    double source_band = 6.0;
    double source_decay = 1.0;
    std::uint64_t seed = 1;
    double stability_tol = 0.2;
    /// Smallness threshold for ||b||_inf where a theorem requires it.
    double drift_smallness = 0.1;
};

struct AprioriReport {
    double ratio_coarse = 0.0;
    double ratio_fine = 0.0;
    double relative_change = 0.0;
    bool refinement_stable = false;
    std::vector<double> lambdas;
    std::vector<double> lambda_ratios;
    bool lambda_decreasing = false;
    int skipped_zero_sources = 0;
    std::vector<std::string> warnings;
};

AprioriReport verify_apriori(const AprioriConfig& config);

struct H1qReport {
    double ratio_coarse = 0.0;
    double ratio_fine = 0.0;
    double relative_change = 0.0;
    bool refinement_stable = false;
    std::vector<std::string> warnings;
};

/// (||d_t u||_{L^inf_T L^q} + ||u||_{L^inf_T H^{1,q}}) / ||f||_{L^inf_T L^q} at two resolutions; alpha = 1 only.
H1qReport verify_h1q(const AprioriConfig& config);
/// The same ratio for one solution (d_t u by the difference quotient of consecutive snapshots).
double h1q_ratio(const PdeSolution& solution, const Source& source, double q);

} // namespace levylab::pde
