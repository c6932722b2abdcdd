#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "levylab/core/fft.hpp"

namespace levylab::lp {

/// Shape of a periodic uniform grid: N^d points on the torus [0,L)^d.
struct GridSpec {
    int dim = 1;
    std::size_t n = 64;  // points per axis, power of two
    double length = 2.0 * M_PI;

    std::size_t size() const;
    double spacing() const { return length / static_cast<double>(n); }
    double cell_volume() const { return std::pow(spacing(), dim); }
    /// Angular frequency step 2 pi / L.
    double frequency_step() const { return 2.0 * M_PI / length; }
    /// Largest dyadic block fully below Nyquist: floor(log2(pi N / L)) - 1.
    int j_max() const;
    bool operator==(const GridSpec& o) const { return dim == o.dim && n == o.n && length == o.length; }
    bool operator!=(const GridSpec& o) const { return !(*this == o); }

    /// Grid coordinates of flat index `idx` (row-major, last axis fastest).
    void point(std::size_t idx, std::span<double> x) const;
    /// Signed integer wave numbers of flat index `idx`, in [-N/2, N/2).
    void wavenumber(std::size_t idx, std::span<int> k) const;
    /// Angular frequency vector xi = (2 pi / L) k of flat index `idx`.
    void frequency(std::size_t idx, std::span<double> xi) const;
    double frequency_norm(std::size_t idx) const;
    /// True if some component of the wave number equals -N/2.
    bool is_nyquist(std::size_t idx) const;
};

void validate(const GridSpec& spec);

/// Real periodic grid function with a lazily computed, shared Fourier cache.
/// Values are immutable once the field is built; copies share the cache.
class GridField {
public:
    GridField() = default;
    explicit GridField(GridSpec spec, double fill = 0.0);
    GridField(GridSpec spec, std::vector<double> values);

    /// Samples f at every grid point.
    static GridField from_function(GridSpec spec, const std::function<double(std::span<const double>)>& f);
    /// Inverse transform of Fourier coefficients (imaginary residue discarded).
    static GridField from_spectrum(GridSpec spec, std::span<const cplx> coeffs);

    const GridSpec& spec() const { return spec_; }
    std::span<const double> values() const { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    std::size_t size() const { return values_.size(); }

    /// Fourier coefficients c_k = N^{-d} sum_n f_n e^{-i k.x_n}.
    std::span<const cplx> spectrum() const;

    double max_abs() const;
    /// L^p norm on the torus (cell-volume weighted); p = inf gives the max norm.
    double lp_norm(double p) const;

    GridField operator+(const GridField& o) const;
    GridField operator-(const GridField& o) const;
    GridField operator*(const GridField& o) const;  // pointwise product
    GridField operator*(double s) const;

private:
    struct Cache {
        std::once_flag once;
        std::vector<cplx> coeffs;
    };

    GridSpec spec_;
    std::vector<double> values_;
    std::shared_ptr<Cache> cache_;
};

void require_same_grid(const GridField& a, const GridField& b);

/// Applies the Fourier multiplier m(xi) (evaluated per flat index) to f.
GridField apply_multiplier(const GridField& f, const std::function<cplx(std::size_t idx)>& multiplier);
/// Same, with the multiplier tabulated over flat indices.
GridField apply_multiplier(const GridField& f, std::span<const cplx> table);
GridField apply_multiplier(const GridField& f, std::span<const double> table);

/// Spectral partial derivative along `axis`; the Nyquist mode is dropped.
GridField derivative(const GridField& f, int axis);
/// Pointwise Euclidean norm of the spectral gradient.
GridField gradient_norm(const GridField& f);

/// Spectral (trigonometric) interpolation at an arbitrary point; exact for the
/// band-limited interpolant, O(N^d) per evaluation.
double interpolate_spectral(const GridField& f, std::span<const double> x);
/// Periodic tensor-product cubic Lagrange interpolation, O(4^d) per evaluation.
double interpolate_cubic(const GridField& f, std::span<const double> x);

// ---- file formats -----------------------------------------------------------

/// CSV: three header lines "d,<d>", "N,<N>", "L,<L>", then one value per line (row-major).
void write_csv(const GridField& f, const std::string& path);
GridField read_csv(const std::string& path);
/// Raw little-endian float64 values plus a sidecar text header "<path>.hdr" with d, N, L.
void write_raw(const GridField& f, const std::string& path);
GridField read_raw(const std::string& path);

} // namespace levylab::lp
