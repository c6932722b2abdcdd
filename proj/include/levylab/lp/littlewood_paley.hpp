#pragma once

#include <span>
#include <vector>

#include "levylab/core/rng.hpp"
#include "levylab/lp/grid_field.hpp"

namespace levylab::lp {

/// Dyadic partition of unity (chi, rho) tabulated on a grid.
///
/// With s = log2|xi| and S the C-infinity step (0 for t <= 0, 1 for t >= 1):
///   chi(xi) = 1 - S(s + 1)            supported in |xi| < 1
///   rho(xi) = chi(xi / 2) - chi(xi)   supported in 1/2 < |xi| < 2
/// so chi + sum_{j>=0} rho(2^{-j} xi) telescopes to 1. Block j = -1 is chi.
class DyadicPartition {
public:
    explicit DyadicPartition(GridSpec spec);

    static double step(double t);
    static double chi(double xi_norm);
    static double rho(double xi_norm);
    /// rho_j(xi); j = -1 gives chi.
    static double rho_j(int j, double xi_norm);

    const GridSpec& spec() const { return spec_; }
    int j_max() const { return j_max_; }
    /// Tabulated rho_j over flat grid indices, j in [-1, j_max].
    std::span<const double> block(int j) const;
    /// max |chi + sum_j rho_j - 1| over grid frequencies with |xi| <= 2^{j_max}.
    double partition_defect() const;

private:
    GridSpec spec_;
    int j_max_;
    std::vector<std::vector<double>> tables_;
};

/// Lambda_j f. Throws resolution error for j outside [-1, j_max].
GridField project(const GridField& f, int j, const DyadicPartition& partition);
/// All blocks Lambda_{-1} f, ..., Lambda_{j_max} f.
std::vector<GridField> blocks(const GridField& f, const DyadicPartition& partition);
/// S_j f = sum_{i <= j-1} Lambda_i f.
GridField low_pass(const GridField& f, int j, const DyadicPartition& partition);

struct BesovReport {
    double norm;
    /// 2^{beta j_max} ||Lambda_{j_max} f||_p: large values flag truncation at j_max.
    double top_block_term;
    std::vector<double> block_norms;  // ||Lambda_j f||_p for j = -1..j_max
};

/// Besov norm truncated at j_max; q = inf gives the sup over blocks.
double besov_norm(const GridField& f, double beta, double p, double q, const DyadicPartition& partition);
BesovReport besov_report(const GridField& f, double beta, double p, double q, const DyadicPartition& partition);

/// Delta^{beta/2} f = F^{-1}(|xi|^beta F f).
GridField fractional_laplacian(const GridField& f, double beta);
/// ||f||_p + ||Delta^{beta/2} f||_p, beta in (0,2].
double bessel_norm(const GridField& f, double beta, double p);

/// T_f g = sum_i S_{i-1} f Lambda_i g.
GridField paraproduct(const GridField& f, const GridField& g, const DyadicPartition& partition);
/// R(f,g) = sum_i sum_{|k|<=1} Lambda_i f Lambda_{i-k} g.
GridField remainder(const GridField& f, const GridField& g, const DyadicPartition& partition);

/// [Lambda_j, f] g = Lambda_j(fg) - f Lambda_j g.
GridField commutator_lp(int j, const GridField& f, const GridField& g, const DyadicPartition& partition);

struct SlopeFit {
    double slope;
    double intercept;
};
/// Least-squares fit of log2(values) against js.
SlopeFit fit_log2_slope(std::span<const double> js, std::span<const double> values);

/// Slope of log2 ||[Lambda_j, f] g||_p over j in [j_lo, j_hi].
SlopeFit commutator_decay(const GridField& f, const GridField& g, double p, int j_lo, int j_hi,
                          const DyadicPartition& partition);

/// ||grad^k Lambda_j f||_q / (2^{(k + d(1/p - 1/q)) j} ||Lambda_j f||_p).
double bernstein_ratio(const GridField& f, int j, int k, double p, double q, const DyadicPartition& partition);

/// Pointwise Euclidean norm of the k-th derivative tensor.
GridField derivative_tensor_norm(const GridField& f, int k);

/// Random real field with Fourier support in k_lo <= |k| <= k_hi (integer wave numbers)
/// and amplitude |k|^{-decay} times a standard complex Gaussian.
GridField random_field(const GridSpec& spec, RngStream& rng, double k_lo, double k_hi, double decay = 0.0);

} // namespace levylab::lp
