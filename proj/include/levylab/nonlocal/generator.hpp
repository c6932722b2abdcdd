#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "levylab/core/exec.hpp"
#include "levylab/core/rng.hpp"
#include "levylab/levy/levy_model.hpp"
#include "levylab/lp/grid_field.hpp"
#include "levylab/lp/littlewood_paley.hpp"

namespace levylab::nonlocal {

using levy::Vec;
using lp::GridField;
using lp::GridSpec;

/// Jump intensity sigma(t, x, z) with declared bounds kappa0 <= sigma <= kappa1 and
/// Hoelder data |sigma(t,x,z) - sigma(t,y,z)| <= kappa2 |x-y|^theta.
struct JumpKernel {
    using Fn = std::function<double(double t, std::span<const double> x, std::span<const double> z)>;
    Fn eval;
    double kappa0 = 1.0;
    double kappa1 = 1.0;
    double kappa2 = 1.0;
    double theta = 1.0;
    bool depends_on_x = true;
    bool depends_on_z = true;
    /// sigma(t,x,z) == sigma(t,x,-z); with a symmetric nu the first-order Taylor term cancels.
    bool even_in_z = true;
    /// Optional modulus rho(x) for the second structural hypothesis.
    std::optional<GridField> modulus;

    double operator()(double t, std::span<const double> x, std::span<const double> z) const { return eval(t, x, z); }

    static JumpKernel constant(double kappa);
    /// sigma(t,x,z) = f(x), z- and t-independent.
    static JumpKernel of_x(std::function<double(std::span<const double>)> f, double kappa0, double kappa1,
                           double kappa2, double theta);
};

/// Drift b(t,x) with regularity metadata (beta, p) and a declared sup bound.
struct DriftField {
    using Fn = std::function<void(double t, std::span<const double> x, std::span<double> out)>;
    Fn eval;
    double beta = 1.0;
    double p = std::numeric_limits<double>::infinity();
    double declared_norm = 0.0;
    bool is_zero = false;

    static DriftField zero();
    static DriftField constant(Vec b);
    /// One component per axis, each a function of the full point.
    static DriftField of_x(std::function<void(std::span<const double> x, std::span<double> out)> f, double beta,
                           double declared_norm);
};

struct KernelReport {
    double min_value;
    double max_value;
    double holder_quotient;  // sup |sigma(x)-sigma(y)| / |x-y|^theta over sampled pairs
    bool bounds_ok;
    bool holder_ok;
};

/// Samples (t, x, z) triples and pairs with |x - y| <= 1 on the torus [0,L)^d.
KernelReport check_kernel(const JumpKernel& kernel, int dim, double length, RngStream& rng, int samples = 10000,
                          double t_max = 1.0);

struct GeneratorOptions {
    /// Sub-cutoff remainder bound allowed relative to max(||result||_inf, ||u||_inf).
    double remainder_rel_tol = 0.25;
    /// Overrides the default cutoff 2^{-(j_max+1)} L / (2 pi) when positive.
    double eps_q = 0.0;
    /// Upper radius of the large-jump nodes for pure-stable models.
    double far_cut = 100.0;
};

struct GeneratorResult {
    GridField value;
    /// Bound on the omitted contributions (jumps below eps_q, pure-stable jumps beyond far_cut).
    double remainder_bound = 0.0;
};

/// One quadrature node of nu: jump z with weight W (Sigma atom weight x radial weight x kappa).
struct Node {
    Vec z;
    double weight;
    bool small;  // |z| <= 1
};

/// Non-local generator L_t u = int [u(x+z) - u(x) - 1_{alpha=1} 1_{|z|<=1} z.grad u(x)] sigma(t,x,z) nu(dz)
/// + b(t,x).grad u(x) on one grid. Holds the symbol table and quadrature nodes; immutable and
/// thread-safe after construction (the symbol table is built lazily once).
class Generator {
public:
    Generator(levy::LevyModel model, GridSpec grid, GeneratorOptions options = {});

    const levy::LevyModel& model() const { return model_; }
    const GridSpec& grid() const { return grid_; }
    const GeneratorOptions& options() const { return options_; }
    double eps_q() const { return eps_q_; }
    /// Quadrature nodes, built on first use.
    const std::vector<Node>& nodes() const;

    /// psi(xi) at every grid frequency (zero at Nyquist indices).
    std::span<const cplx> symbol_table() const;

    /// kappa F^{-1}[psi F u]: the constant-kernel operator.
    GridField apply_reference(const GridField& u, double kappa = 1.0) const;

    /// Jump part only (no drift). z-independent kernels use the symbol exactly; otherwise
    /// the node quadrature with shifts by Fourier phase.
    GeneratorResult apply_jump(const GridField& u, const JumpKernel& kernel, double t, Exec exec = Exec::parallel) const;
    /// Node quadrature regardless of kernel structure.
    GeneratorResult apply_quadrature(const GridField& u, const JumpKernel& kernel, double t,
                                     Exec exec = Exec::parallel) const;

    /// Full generator; throws refinement error when the remainder exceeds the tolerance.
    GeneratorResult apply(const GridField& u, const JumpKernel& kernel, const DriftField& drift, double t,
                          Exec exec = Exec::parallel) const;

private:
    double remainder_bound(const GridField& u, const JumpKernel& kernel) const;
    void build_nodes(std::vector<Node>& nodes) const;

    levy::LevyModel model_;
    GridSpec grid_;
    GeneratorOptions options_;
    double eps_q_;
    double far_mass_ = 0.0;  // nu mass beyond far_cut (pure stable)
    struct SymbolCache;
    struct NodeCache;
    std::shared_ptr<SymbolCache> symbol_;
    std::shared_ptr<NodeCache> nodes_;
};

/// b(t,x).grad u(x) on the grid.
GridField drift_term(const GridField& u, const DriftField& drift, double t);

/// Convenience wrapper building a Generator for one application.
GridField apply_generator(const GridField& u, const levy::LevyModel& model, const JumpKernel& kernel,
                          const DriftField& drift, double t);

/// Per-trial values sign(u(x0)) (kappa L_nu u)(x0) / (2^{alpha j} ||u||_inf) at the max-modulus point
/// of random fields band-limited to 2^{j-1} <= |k| <= 2^{j+1}. Numerically zero fields are skipped.
std::vector<double> maxprinciple_check(const levy::LevyModel& model, double kappa, int j, int trials, RngStream& rng);

struct CoercivityValue {
    double lhs;        // int |g|^{p-2} g (kappa L_nu g), g = Lambda_j f
    double rhs_scale;  // 2^{alpha j} ||g||_p^p
    double mass;       // ||g||_p^p
};
CoercivityValue coercivity_check(const GridField& f, int j, double p, const Generator& generator, double kappa,
                                 const lp::DyadicPartition& partition);

struct CommutatorValue {
    GridField field;
    double norm;
};
/// [Lambda_j, L^sigma] u. Requires thetabar > 0 and thetabar - theta < gamma <= thetabar.
CommutatorValue commutator_op(int j, const GridField& u, const Generator& generator, const JumpKernel& kernel,
                              double thetabar, double gamma, double p, const lp::DyadicPartition& partition,
                              double t = 0.0);

} // namespace levylab::nonlocal
