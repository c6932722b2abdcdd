#include "levylab/lp/littlewood_paley.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "levylab/core/error.hpp"

namespace levylab::lp {

double DyadicPartition::step(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    const double a = std::exp(-1.0 / t);
    const double b = std::exp(-1.0 / (1.0 - t));
    return a / (a + b);
}

double DyadicPartition::chi(double xi_norm) {
    if (xi_norm <= 0.0) return 1.0;
    return 1.0 - step(std::log2(xi_norm) + 1.0);
}

double DyadicPartition::rho(double xi_norm) { return chi(0.5 * xi_norm) - chi(xi_norm); }

double DyadicPartition::rho_j(int j, double xi_norm) {
    if (j < -1) return 0.0;
    if (j == -1) return chi(xi_norm);
    return rho(std::ldexp(xi_norm, -j));
}

DyadicPartition::DyadicPartition(GridSpec spec) : spec_(spec), j_max_(spec.j_max()) {
    validate(spec_);
    if (j_max_ < 0) fail(ErrorCode::resolution, "grid too coarse for any dyadic block");
    const std::size_t size = spec_.size();
    std::vector<double> norms(size);
    for (std::size_t i = 0; i < size; ++i) norms[i] = spec_.frequency_norm(i);
    tables_.resize(static_cast<std::size_t>(j_max_ + 2));
    for (int j = -1; j <= j_max_; ++j) {
        auto& t = tables_[static_cast<std::size_t>(j + 1)];
        t.resize(size);
        for (std::size_t i = 0; i < size; ++i) t[i] = spec_.is_nyquist(i) ? 0.0 : rho_j(j, norms[i]);
    }
}

std::span<const double> DyadicPartition::block(int j) const {
    if (j < -1 || j > j_max_)
        fail(ErrorCode::resolution, "block j=" + std::to_string(j) + " outside [-1, j_max=" + std::to_string(j_max_) + "]");
    return tables_[static_cast<std::size_t>(j + 1)];
}

double DyadicPartition::partition_defect() const {
    double worst = 0.0;
    const double limit = std::ldexp(1.0, j_max_);
    for (std::size_t i = 0; i < spec_.size(); ++i) {
        if (spec_.frequency_norm(i) > limit) continue;
        double s = 0.0;
        for (const auto& t : tables_) s += t[i];
        worst = std::max(worst, std::abs(s - 1.0));
    }
    return worst;
}

GridField project(const GridField& f, int j, const DyadicPartition& partition) {
    if (f.spec() != partition.spec()) fail(ErrorCode::grid_mismatch, "partition built for a different grid");
    return apply_multiplier(f, partition.block(j));
}

std::vector<GridField> blocks(const GridField& f, const DyadicPartition& partition) {
    std::vector<GridField> out;
    out.reserve(static_cast<std::size_t>(partition.j_max() + 2));
    for (int j = -1; j <= partition.j_max(); ++j) out.push_back(project(f, j, partition));
    return out;
}

GridField low_pass(const GridField& f, int j, const DyadicPartition& partition) {
    std::vector<double> table(f.size(), 0.0);
    for (int i = -1; i <= std::min(j - 1, partition.j_max()); ++i) {
        auto b = partition.block(i);
        for (std::size_t k = 0; k < table.size(); ++k) table[k] += b[k];
    }
    return apply_multiplier(f, std::span<const double>(table));
}

BesovReport besov_report(const GridField& f, double beta, double p, double q, const DyadicPartition& partition) {
    if (q < 1.0) fail(ErrorCode::invalid_argument, "q must be >= 1");
    BesovReport rep{0.0, 0.0, {}};
    const int jm = partition.j_max();
    for (int j = -1; j <= jm; ++j) {
        const double bn = project(f, j, partition).lp_norm(p);
        rep.block_norms.push_back(bn);
        const double term = std::pow(2.0, beta * j) * bn;
        if (std::isinf(q)) {
            rep.norm = std::max(rep.norm, term);
        } else {
            rep.norm += std::pow(term, q);
        }
        if (j == jm) rep.top_block_term = term;
    }
    if (!std::isinf(q)) rep.norm = std::pow(rep.norm, 1.0 / q);
    return rep;
}

double besov_norm(const GridField& f, double beta, double p, double q, const DyadicPartition& partition) {
    return besov_report(f, beta, p, q, partition).norm;
}

GridField fractional_laplacian(const GridField& f, double beta) {
    const auto& spec = f.spec();
    std::vector<double> table(f.size());
    for (std::size_t i = 0; i < table.size(); ++i)
        table[i] = spec.is_nyquist(i) ? 0.0 : std::pow(spec.frequency_norm(i), beta);
    return apply_multiplier(f, std::span<const double>(table));
}

double bessel_norm(const GridField& f, double beta, double p) {
    if (!(beta > 0.0 && beta <= 2.0)) fail(ErrorCode::invalid_argument, "Bessel order must lie in (0,2]");
    return f.lp_norm(p) + fractional_laplacian(f, beta).lp_norm(p);
}

GridField paraproduct(const GridField& f, const GridField& g, const DyadicPartition& partition) {
    require_same_grid(f, g);
    const auto bf = blocks(f, partition);
    const auto bg = blocks(g, partition);
    const int jm = partition.j_max();
    std::vector<double> acc(f.size(), 0.0);
    std::vector<double> low(f.size(), 0.0);  // S_{i-1} f = sum_{k <= i-2} Lambda_k f
    for (int i = -1; i <= jm; ++i) {
        const int k = i - 2;
        if (k >= -1) {
            const auto& b = bf[static_cast<std::size_t>(k + 1)];
            for (std::size_t n = 0; n < low.size(); ++n) low[n] += b[n];
        }
        const auto& gi = bg[static_cast<std::size_t>(i + 1)];
        for (std::size_t n = 0; n < acc.size(); ++n) acc[n] += low[n] * gi[n];
    }
    return GridField(f.spec(), std::move(acc));
}

GridField remainder(const GridField& f, const GridField& g, const DyadicPartition& partition) {
    require_same_grid(f, g);
    const auto bf = blocks(f, partition);
    const auto bg = blocks(g, partition);
    const int jm = partition.j_max();
    std::vector<double> acc(f.size(), 0.0);
    for (int i = -1; i <= jm; ++i) {
        for (int k = std::max(-1, i - 1); k <= std::min(jm, i + 1); ++k) {
            const auto& a = bf[static_cast<std::size_t>(i + 1)];
            const auto& b = bg[static_cast<std::size_t>(k + 1)];
            for (std::size_t n = 0; n < acc.size(); ++n) acc[n] += a[n] * b[n];
        }
    }
    return GridField(f.spec(), std::move(acc));
}

GridField commutator_lp(int j, const GridField& f, const GridField& g, const DyadicPartition& partition) {
    require_same_grid(f, g);
    return project(f * g, j, partition) - f * project(g, j, partition);
}

SlopeFit fit_log2_slope(std::span<const double> js, std::span<const double> values) {
    if (js.size() != values.size() || js.size() < 2) fail(ErrorCode::invalid_argument, "slope fit needs >= 2 points");
    const auto n = static_cast<double>(js.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < js.size(); ++i) {
        if (!(values[i] > 0.0)) fail(ErrorCode::undefined_ratio, "slope fit on a non-positive value");
        const double y = std::log2(values[i]);
        sx += js[i];
        sy += y;
        sxx += js[i] * js[i];
        sxy += js[i] * y;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return {slope, (sy - slope * sx) / n};
}

SlopeFit commutator_decay(const GridField& f, const GridField& g, double p, int j_lo, int j_hi,
                          const DyadicPartition& partition) {
    std::vector<double> js, norms;
    for (int j = j_lo; j <= j_hi; ++j) {
        js.push_back(j);
        norms.push_back(commutator_lp(j, f, g, partition).lp_norm(p));
    }
    return fit_log2_slope(js, norms);
}

GridField derivative_tensor_norm(const GridField& f, int k) {
    if (k < 0) fail(ErrorCode::invalid_argument, "derivative order must be >= 0");
    const auto& spec = f.spec();
    if (k == 0) {
        std::vector<double> v(f.values().begin(), f.values().end());
        for (auto& x : v) x = std::abs(x);
        return GridField(spec, std::move(v));
    }
    const int d = spec.dim;
    int count = 1;
    for (int i = 0; i < k; ++i) count *= d;
    std::vector<double> acc(f.size(), 0.0);
    std::vector<double> xi(static_cast<std::size_t>(d));
    for (int seq = 0; seq < count; ++seq) {
        GridField part = apply_multiplier(f, [&](std::size_t idx) {
            if (spec.is_nyquist(idx)) return cplx(0.0, 0.0);
            spec.frequency(idx, xi);
            cplx m(1.0, 0.0);
            int rem = seq;
            for (int i = 0; i < k; ++i) {
                m *= cplx(0.0, xi[static_cast<std::size_t>(rem % d)]);
                rem /= d;
            }
            return m;
        });
        for (std::size_t n = 0; n < acc.size(); ++n) acc[n] += part[n] * part[n];
    }
    for (auto& v : acc) v = std::sqrt(v);
    return GridField(spec, std::move(acc));
}

double bernstein_ratio(const GridField& f, int j, int k, double p, double q, const DyadicPartition& partition) {
    const GridField block = project(f, j, partition);
    const double denom_norm = block.lp_norm(p);
    if (!(denom_norm > 1e-14 * std::max(1.0, f.max_abs())))
        fail(ErrorCode::undefined_ratio, "block Lambda_j f vanishes");
    const int d = f.spec().dim;
    const double inv_p = std::isinf(p) ? 0.0 : 1.0 / p;
    const double inv_q = std::isinf(q) ? 0.0 : 1.0 / q;
    const double scale = std::pow(2.0, (k + d * (inv_p - inv_q)) * j);
    return derivative_tensor_norm(block, k).lp_norm(q) / (scale * denom_norm);
}

GridField random_field(const GridSpec& spec, RngStream& rng, double k_lo, double k_hi, double decay) {
    validate(spec);
    std::vector<cplx> c(spec.size(), cplx(0.0, 0.0));
    std::vector<int> k(static_cast<std::size_t>(spec.dim));
    for (std::size_t i = 0; i < c.size(); ++i) {
        const double g1 = rng.normal();
        const double g2 = rng.normal();
        if (spec.is_nyquist(i)) continue;
        spec.wavenumber(i, k);
        double kn = 0.0;
        for (int v : k) kn += static_cast<double>(v) * v;
        kn = std::sqrt(kn);
        if (kn < k_lo || kn > k_hi) continue;
        const double amp = kn > 0.0 ? std::pow(kn, -decay) : 1.0;
        c[i] = amp * cplx(g1, g2);
    }
    return GridField::from_spectrum(spec, c);
}

} // namespace levylab::lp
