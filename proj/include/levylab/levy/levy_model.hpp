#pragma once

#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "levylab/core/fft.hpp"
#include "levylab/core/rng.hpp"

namespace levylab::levy {

using Vec = std::vector<double>;

struct DirectionAtom {
    Vec direction;  // unit vector
    double weight;  // > 0
};

/// Finite symmetric measure on the unit sphere, stored as weighted atoms.
/// Continuous spherical measures (e.g. the uniform one for isotropic models)
/// are represented by a symmetric quasi-uniform atom set.
class SphericalMeasure {
public:
    SphericalMeasure() = default;
    explicit SphericalMeasure(std::vector<DirectionAtom> atoms);

    /// Atoms {+-e_i} with unit weight: the cylindrical measure.
    static SphericalMeasure cylindrical(int dim);
    /// d = 1: {+-1}; d = 2: `count` equally spaced directions (count even),
    /// weights summing to `total_mass`.
    static SphericalMeasure isotropic(int dim, int count = 64, double total_mass = 1.0);

    const std::vector<DirectionAtom>& atoms() const { return atoms_; }
    int dim() const { return dim_; }
    double total_mass() const;
    bool empty() const { return atoms_.empty(); }

private:
    std::vector<DirectionAtom> atoms_;
    int dim_ = 0;
};

/// Radial profile kappa(theta, r) on S^{d-1} x (0,1] with kappa_low <= kappa <= kappa_high.
struct RadialProfile {
    std::function<double(std::span<const double> theta, double r)> kappa;
    double kappa_low = 1.0;
    double kappa_high = 1.0;
    /// kappa(theta, r) == kappa(-theta, r); makes the symbol real for symmetric Sigma.
    bool even = true;
    /// kappa == 1 identically; enables closed-form masses and inverse CDFs.
    bool unit = false;

    static RadialProfile constant_one();
    double operator()(std::span<const double> theta, double r) const {
        return unit ? 1.0 : kappa(theta, r);
    }
};

struct NoTail {};
/// Continuation of r^{-1-alpha} Sigma(dtheta) dr on (1, r_max].
struct PowerLawTail {
    double r_max = 100.0;
};
/// Explicit large-jump atoms, each |z| > 1 with finite mass.
struct AtomTail {
    struct Atom {
        Vec z;
        double mass;
    };
    std::vector<Atom> atoms;
};
using Tail = std::variant<NoTail, PowerLawTail, AtomTail>;

/// Stable-like Levy measure nu(dz) = kappa(theta,r) Sigma(dtheta) r^{-1-alpha} dr on B_1
/// plus a finite tail on B_1^c. Immutable after construction.
class LevyModel {
public:
    LevyModel(double alpha, SphericalMeasure spherical, RadialProfile profile, Tail tail);

    /// Pure alpha-stable measure: kappa == 1 on all of (0, infinity), no separate tail.
    static LevyModel pure_stable(double alpha, SphericalMeasure spherical);
    /// Stable-like model with the default tail (power law truncated at r_max = 100).
    static LevyModel stable_like(double alpha, SphericalMeasure spherical,
                                 RadialProfile profile = RadialProfile::constant_one(),
                                 double r_max = 100.0);
    /// Truncated to B_1 with an empty tail.
    static LevyModel truncated(double alpha, SphericalMeasure spherical,
                               RadialProfile profile = RadialProfile::constant_one());

    double alpha() const { return alpha_; }
    int dim() const { return spherical_.dim(); }
    const SphericalMeasure& spherical() const { return spherical_; }
    const RadialProfile& profile() const { return profile_; }
    const Tail& tail() const { return tail_; }
    bool is_pure_stable() const { return pure_stable_; }
    /// Symmetric Sigma with an even profile and a symmetric (or power-law) tail.
    bool is_symmetric() const { return symmetric_; }
    /// alpha >= 1: small jumps are compensated by 1_{|z|<=1} z . grad.
    bool compensated() const { return alpha_ >= 1.0; }
    /// Total mass of nu on B_1^c.
    double tail_mass() const;
    const std::vector<std::string>& warnings() const { return warnings_; }
    /// For pure-stable models: int_0^inf (cos s - 1) s^{-1-alpha} ds, by quadrature at
    /// construction. psi(xi) = this * sum_k w_k |xi.theta_k|^alpha by exact scaling.
    double stable_unit_integral() const { return stable_integral_; }

    /// Throws invalid-model unless alpha in (0,1] (regime-sensitive operations).
    void require_supported_regime() const;

private:
    double alpha_;
    SphericalMeasure spherical_;
    RadialProfile profile_;
    Tail tail_;
    bool pure_stable_ = false;
    bool symmetric_ = true;
    double stable_integral_ = 0.0;
    std::vector<std::string> warnings_;
};

/// Minimum over a quasi-uniform direction grid of sum_k w_k |theta0 . theta_k|^alpha.
/// A strictly positive value certifies non-degeneracy on the grid.
double check_nondegeneracy(const LevyModel& model, int direction_grid_resolution);

struct SymbolValue {
    cplx value;
    double residual;  // achieved absolute quadrature error estimate
};

inline constexpr double symbol_rel_tol = 1e-8;

/// psi(xi) = int (e^{i xi.z} - 1 - 1_{alpha>=1} 1_{|z|<=1} i xi.z) nu(dz).
cplx symbol(const LevyModel& model, std::span<const double> xi);
SymbolValue symbol_with_residual(const LevyModel& model, std::span<const double> xi,
                                 double rel_tol = symbol_rel_tol);

struct SymbolBound {
    double c0;
    double c1;
};

/// Constants with Re psi(xi) <= -C0 |xi|^alpha + C1 on every sample. C0 is taken from the
/// high-frequency half of the samples (|xi|^2 >= max|xi|), C1 is then the smallest
/// non-negative offset making the bound hold everywhere.
SymbolBound symbol_bound_fit(const LevyModel& model, std::span<const Vec> xi_samples);

/// lambda_eps = nu({|z| > eps}), eps in (0,1].
double restricted_mass(const LevyModel& model, double eps);

/// Sampler for nu restricted to {|z| > eps}, normalized. Precomputes the mixture
/// weights and radial inverse-CDF tables once; sampling is then O(log n).
class JumpSampler {
public:
    JumpSampler(const LevyModel& model, double eps);

    double mass() const { return mass_; }
    double eps() const { return eps_; }
    Vec sample(RngStream& rng) const;
    /// Writes the jump into `out` (size dim) without allocating.
    void sample_into(RngStream& rng, std::span<double> out) const;

private:
    enum class Kind { shell, stable_far, power_tail, atom };
    struct Component {
        Kind kind;
        std::size_t index;  // direction atom or tail atom
        double mass;
        double lo, hi;      // radial support
        std::vector<double> knots, cdf;  // tabulated radial CDF (non-unit profiles)
    };

    double sample_radius(const Component& c, double u) const;

    LevyModel model_;
    double eps_;
    double mass_ = 0.0;
    std::vector<Component> components_;
    std::vector<double> cumulative_;
};

/// One-shot convenience wrapper around JumpSampler.
Vec sample_jump(const LevyModel& model, double eps, RngStream& rng);

} // namespace levylab::levy
