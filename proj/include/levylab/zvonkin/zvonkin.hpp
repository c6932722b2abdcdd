#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "levylab/pde/solver.hpp"
#include "levylab/sde/simulator.hpp"

namespace levylab::zvonkin {

using levy::Vec;
using lp::GridField;
using lp::GridSpec;
using nonlocal::DriftField;
using nonlocal::JumpKernel;

enum class Interpolation { spectral, cubic };

struct ScheduleEntry {
    double lambda;
    double u_sup;
    double grad_sup;
    double certificate;  // u_sup + grad_sup
};

struct BuildOptions {
    std::vector<double> lambda_schedule{1, 2, 4, 8, 16, 32, 64, 128, 256};
    double T = 1.0;
    double dt = 0.01;
    Interpolation interpolation = Interpolation::spectral;
    /// Solve every lambda of the schedule instead of stopping at the first certified one.
    bool evaluate_all = false;
    Exec exec = Exec::parallel;
};

/// Phi_t(x) = x + u(t,x) with u the vector solution of
/// d_t u + L^sigma u + b.grad u - lambda u + b = 0, u(T) = 0. Immutable; evaluation is thread-safe.
class ZvonkinMap {
public:
    /// u[c][k] is component c at times[k]; certificate measured on the grid.
    ZvonkinMap(GridSpec grid, std::vector<double> times, std::vector<std::vector<GridField>> u, double lambda,
               Interpolation interpolation = Interpolation::spectral);
    /// Samples u(t, x) (writing d components) on the grid at the given times.
    static ZvonkinMap from_function(GridSpec grid, std::vector<double> times,
                                    const std::function<void(double, std::span<const double>, std::span<double>)>& u,
                                    double lambda, Interpolation interpolation = Interpolation::spectral);

    const GridSpec& grid() const { return grid_; }
    const std::vector<double>& times() const { return times_; }
    const std::vector<std::vector<GridField>>& fields() const { return u_; }
    double lambda() const { return lambda_; }
    double T() const { return times_.back(); }
    double u_sup() const { return u_sup_; }
    double grad_sup() const { return grad_sup_; }
    double certificate() const { return u_sup_ + grad_sup_; }
    bool certified() const { return certificate() <= 0.5; }
    const std::vector<ScheduleEntry>& schedule() const { return schedule_; }
    void set_schedule(std::vector<ScheduleEntry> s) { schedule_ = std::move(s); }

    void u(double t, std::span<const double> x, std::span<double> out) const;
    /// Time-linear, space-interpolated evaluation of per-component snapshot fields on this map's time grid.
    void interpolate(const std::vector<std::vector<GridField>>& fields, double t, std::span<const double> x,
                     std::span<double> out) const;
    double interpolate(const GridField& f, std::span<const double> x) const;
    Vec forward(double t, std::span<const double> x) const;
    /// Fixed point x = y - u(t,x); tolerance 1e-12, at most 60 iterations.
    Vec inverse(double t, std::span<const double> y) const;

    /// Raw snapshot files u<c>_<k>.bin plus manifest.txt (lambda, certificate norms, grid, times).
    void save(const std::string& dir) const;
    static ZvonkinMap load(const std::string& dir);

private:
    GridSpec grid_;
    std::vector<double> times_;
    std::vector<std::vector<GridField>> u_;
    double lambda_;
    Interpolation interp_;
    double u_sup_ = 0.0;
    double grad_sup_ = 0.0;
    std::vector<ScheduleEntry> schedule_;
};

/// Runs the lambda schedule until the smallness certificate ||u||_inf + ||grad u||_inf <= 1/2 holds.
ZvonkinMap build(const levy::LevyModel& model, const JumpKernel& kernel, const DriftField& drift, const GridSpec& grid,
                 const BuildOptions& options, std::vector<std::string>* warnings = nullptr);

struct TransformedCoefficients {
    Vec b_tilde;
    std::function<Vec(std::span<const double> z)> g;
    std::function<double(std::span<const double> z)> sigma_tilde;
};
/// b_tilde(t,y) = lambda u(t,x') - int_{|z|>1} [u(t,x'+z) - u(t,x')] sigma(t,x',z) nu(dz), x' = Phi_t^{-1}(y),
/// with the large-jump nodes of `generator`; g(z) = Phi_t(x'+z) - y; sigma_tilde(z) = sigma(t,x',z).
TransformedCoefficients transformed_coefficients(const ZvonkinMap& map, const nonlocal::Generator& generator,
                                                 const JumpKernel& kernel, double t, std::span<const double> y);

struct BiLipschitzReport {
    std::size_t pairs;
    double min_ratio, max_ratio;          // |Phi(x) - Phi(y)| / |x - y|
    double min_inv_ratio, max_inv_ratio;  // same for Phi^{-1}
    double max_roundtrip;                 // max |Phi(Phi^{-1}(y)) - y| and |Phi^{-1}(Phi(x)) - x|
    bool pass;
};
BiLipschitzReport bilipschitz_check(const ZvonkinMap& map, std::size_t pairs, RngStream& rng);

struct TransformReport {
    double max_discrepancy;   // max over replicas and times of |Phi_t(X_t) - Y_t|
    double mean_discrepancy;  // mean over replicas of the per-path maximum
    std::size_t replicas;
    double dt;
};
/// Simulates X (module sde) and Y from the transformed equation on the same events. Y's drift is
/// b_tilde minus the full small-jump compensator, i.e. lambda u - L^sigma u at x' = Phi^{-1}(y).
TransformReport verify_transform(const levy::LevyModel& model, const JumpKernel& kernel, const DriftField& drift,
                                 const ZvonkinMap& map, const sde::SimConfig& cfg);

} // namespace levylab::zvonkin
