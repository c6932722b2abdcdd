#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "levylab/core/exec.hpp"
#include "levylab/core/rng.hpp"
#include "levylab/levy/levy_model.hpp"
#include "levylab/nonlocal/generator.hpp"
#include "levylab/pde/solver.hpp"

namespace levylab::sde {

using levy::Vec;
using nonlocal::DriftField;
using lp::GridField;
using nonlocal::JumpKernel;

enum class CompensatorMode { symmetric_zero, quadrature };

struct SimConfig {
    Vec x0;
    double T = 1.0;
    double dt = 0.01;
    /// Jumps with |z| <= eps are dropped.
    double eps = 0.1;
    /// Height of the dominating r-axis; must be >= kernel.kappa1.
    double thinning_bound = 1.0;
    std::size_t n_paths = 1000;
    std::uint64_t seed = 1;
    CompensatorMode compensator = CompensatorMode::symmetric_zero;
    Exec exec = Exec::parallel;
};

struct Event {
    double t;
    Vec z;
    double r;
    bool accepted;
};

/// Times are the Euler grid merged with event times; the state at an event time includes the jump.
struct PathRecord {
    std::vector<double> times;
    std::vector<Vec> states;
    std::vector<Event> events;
};

/// Proposed events (t_i, z_i, r_i) of the dominating Poisson measure on [0,T].
struct EventStream {
    std::vector<double> t;
    std::vector<Vec> z;
    std::vector<double> r;
    std::size_t size() const { return t.size(); }
};

/// Everything a path needs that does not depend on the starting point: the jump sampler
/// and the compensator nodes. Build once per experiment; read-only afterwards.
class Simulator {
public:
    Simulator(levy::LevyModel model, JumpKernel kernel, DriftField drift, SimConfig cfg);

    const SimConfig& config() const { return cfg_; }
    const levy::LevyModel& model() const { return model_; }
    const JumpKernel& kernel() const { return kernel_; }
    const DriftField& drift() const { return drift_; }
    /// lambda_eps = nu(|z| > eps).
    double jump_mass() const { return sampler_.mass(); }
    /// thinning_bound * lambda_eps.
    double proposal_rate() const { return cfg_.thinning_bound * sampler_.mass(); }

    EventStream events(RngStream& rng) const;
    PathRecord run(const EventStream& ev, std::span<const double> x0) const;
    /// Euler integration of the same events with a different step; the events are unchanged.
    PathRecord run(const EventStream& ev, std::span<const double> x0, double dt) const;

    /// Path integral int_0^T f(s, X_s) ds by the trapezoid rule on each continuous piece.
    double path_integral(const EventStream& ev, std::span<const double> x0,
                         const std::function<double(double, std::span<const double>)>& f) const;
    /// X_T only.
    Vec terminal(const EventStream& ev, std::span<const double> x0) const;

    struct AcceptanceTally {
        std::size_t accepted = 0;
        double expected = 0.0;  // sum of sigma / thinning_bound over proposals
        double variance = 0.0;  // sum of p (1 - p)
    };
    AcceptanceTally acceptance(const EventStream& ev, std::span<const double> x0) const;

    /// Compensator drift -int_{eps<|z|<=1} z sigma(t,x,z) nu(dz) (quadrature mode, alpha = 1).
    void compensator(double t, std::span<const double> x, std::span<double> out) const;

    /// Upper bounds for int_{|z|<=eps} |z|^2 nu(dz) and int_{|z|<=eps} |z| nu(dz) (the latter infinite at alpha = 1).
    double cutoff_second_moment() const;
    double cutoff_first_moment() const;

private:
    struct CompNode {
        Vec z;
        double weight;
    };
    template <class Observer>
    void integrate(const EventStream& ev, std::span<const double> x0, double dt, Observer& obs) const;

    levy::LevyModel model_;
    JumpKernel kernel_;
    DriftField drift_;
    SimConfig cfg_;
    levy::JumpSampler sampler_;
    std::vector<CompNode> comp_nodes_;
};

PathRecord simulate(const levy::LevyModel& model, const JumpKernel& kernel, const DriftField& drift,
                    const SimConfig& cfg, RngStream& rng);
std::pair<PathRecord, PathRecord> simulate_coupled(const levy::LevyModel& model, const JumpKernel& kernel,
                                                   const DriftField& drift, const SimConfig& cfg,
                                                   std::span<const double> x0_a, std::span<const double> x0_b,
                                                   RngStream& rng);

/// Path CSV: t, x_1..x_d, event (1 if an event happened at t), accepted.
void write_path_csv(const PathRecord& path, const std::string& file);

// ---- Monte Carlo --------------------------------------------------------------------

struct McEstimate {
    Vec x;
    double estimate;
    double stderr_;
    std::size_t n_paths;
};

/// Columns x, estimate, stderr, n_paths (x components joined by ';' when d > 1).
void write_mc_csv(const std::vector<McEstimate>& rows, const std::string& file);

/// Mean and standard error of per-path values; the sum is order-deterministic.
std::pair<double, double> mean_stderr(std::span<const double> values);

struct CharFnReport {
    std::complex<double> estimate;
    double stderr_;
    /// exp(T (kappa psi(xi) + i xi.b)) for constant kernel kappa and constant drift b.
    std::complex<double> reference;
    /// T kappa1 |xi|^2 int_{|z|<=eps} |z|^2 nu(dz) / 2: effect of the dropped small jumps.
    double cutoff_allowance;
    double discrepancy;
    bool pass;  // discrepancy <= 3 stderr + allowance
};
/// E exp(i xi.(X_T - x0)) over n_paths paths.
CharFnReport characteristic_function(const Simulator& sim, std::span<const double> xi);

struct ThinningLawReport {
    std::size_t runs;
    double mean_events;
    double expected_events;
    double chi_square;
    int dof;
    double p_value;
    std::size_t proposals;
    std::size_t accepted;
    /// Sum over proposals of sigma(t, X_{t-}, z) / thinning_bound.
    double expected_accepted;
    double z_score;  // (accepted - expected) / binomial sd
};
/// Event counts against Poisson(rate T) by chi-square over pooled bins; acceptance against
/// sigma / thinning_bound along the simulated paths.
ThinningLawReport thinning_law_check(const Simulator& sim, std::size_t runs);

struct KrylovReport {
    std::vector<McEstimate> rows;
    double sup_estimate;
    double f_norm;  // sup_t ||f(t)||_{B^0_{q,inf}}
    double ratio;
};
/// E int_0^T f(s, X_s(x)) ds for x in x_grid, f sampled from `source` at the Euler times
/// (time-linear, space-cubic interpolation).
KrylovReport krylov_estimate(const Simulator& sim, const pde::Source& source, const lp::GridSpec& grid,
                             std::span<const Vec> x_grid, double q);

struct FeynmanKacRow {
    Vec x;
    double pde_value;    // u(0, x)
    double mc_estimate;  // E int_0^T f(s, X_s(x)) ds
    double mc_stderr;
    double discrepancy;
    double allowance;
    bool pass;
};
struct FeynmanKacReport {
    std::vector<FeynmanKacRow> rows;
    /// Allowance parts: |MC(dt) - MC(dt/2)|, |u(dt,N) - u(dt/2,2N)| and the cutoff term.
    double time_allowance;
    double pde_allowance;
    double cutoff_allowance;
    bool balance;
    std::vector<std::string> warnings;
    bool pass;
};
using SpaceTimeFn = std::function<double(double t, std::span<const double> x)>;

/// Samples f on `grid` at each requested time.
pde::Source sample_source(const SpaceTimeFn& f, const lp::GridSpec& grid, bool time_independent);

/// Solves d_t u + L u + b.grad u + f = 0, u(T) = 0 with the pde module (lambda = 0) on `grid`
/// and on the refined grid, and compares u(0,x) with the path functional at dt and dt/2.
/// The PDE step is the simulation step. Warns when alpha + drift.beta < 1.
FeynmanKacReport feynman_kac_check(const Simulator& sim, const SpaceTimeFn& f, bool time_independent,
                                   const lp::GridSpec& grid, std::span<const Vec> x_grid);

struct CoupledReport {
    double lipschitz;
    double delta0;
    /// Per replica least-squares slope of log(|X^a - X^b| / delta0) against t.
    std::vector<double> exponents;
    double max_exponent;
    double max_separation;
    bool finite;
};
/// Replicas of simulate_coupled from x0 and x0 + delta0 e_1; exponents fitted on the Euler grid.
CoupledReport coupled_divergence(const Simulator& sim, double delta0, std::size_t replicas, double lipschitz);

} // namespace levylab::sde
