#include "levylab/levy/levy_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "levylab/core/error.hpp"
#include "levylab/core/numerics.hpp"
#include "levylab/core/quadrature.hpp"

namespace levylab::levy {
namespace {

constexpr double kUnitTol = 1e-12;

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

bool same_vector(std::span<const double> a, std::span<const double> b, double tol) {
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::abs(a[i] - b[i]) > tol) return false;
    return true;
}

/// Composite Gauss-Legendre on [a,b], doubling the panel count until two successive
/// estimates agree to `tol`. Returns the finer estimate and adds the last difference
/// to `residual`.
double adaptive_panels(const std::function<double(double)>& f, double a, double b, double omega,
                       double tol, double& residual) {
    int n = quad::panels_for(b - a, omega);
    double coarse = quad::integrate(f, a, b, n);
    for (int level = 0; level < 10; ++level) {
        const double fine = quad::integrate(f, a, b, 2 * n);
        const double diff = std::abs(fine - coarse);
        if (diff <= tol) {
            residual += diff;
            return fine;
        }
        coarse = fine;
        n *= 2;
    }
    const double last = quad::integrate(f, a, b, 2 * n);
    residual += std::abs(last - coarse);
    return last;
}

struct RadialIntegral {
    double re = 0.0;
    double im = 0.0;
    double residual = 0.0;
};

/// int_0^1 (e^{i r a} - 1 - 1_{alpha>=1} i r a) kappa(r) r^{-1-alpha} dr over dyadic shells
/// [2^{-k-1}, 2^{-k}], stopping once the Taylor bound on the unvisited part (0, r0) drops
/// below the tolerance. The bound is added to the residual.
RadialIntegral small_jump_integral(double a, double alpha, const std::function<double(double)>& kappa,
                                   double kappa_high, bool want_imag, double rel_tol) {
    RadialIntegral out;
    if (a == 0.0) return out;
    const bool comp = alpha >= 1.0;
    const double aa = std::abs(a);
    auto re_f = [&](double r) { return cosm1(r * a) * kappa(r) * std::pow(r, -1.0 - alpha); };
    auto im_f = [&](double r) {
        const double s = comp ? sinmx(r * a) : std::sin(r * a);
        return s * kappa(r) * std::pow(r, -1.0 - alpha);
    };
    const double floor_scale = 0.05 * std::min(std::pow(aa, alpha), aa * aa) + 1e-300;
    double hi = 1.0;
    for (int k = 0; k < 4000; ++k) {
        const double lo = 0.5 * hi;
        const double scale = std::max({std::abs(out.re), std::abs(out.im), floor_scale});
        const double shell_tol = 0.05 * rel_tol * scale + 1e-300;
        out.re += adaptive_panels(re_f, lo, hi, a, shell_tol, out.residual);
        if (want_imag) out.im += adaptive_panels(im_f, lo, hi, a, shell_tol, out.residual);

        const double re_bound = kappa_high * 0.5 * aa * aa * std::pow(lo, 2.0 - alpha) / (2.0 - alpha);
        double im_bound = 0.0;
        if (want_imag) {
            im_bound = comp ? kappa_high * aa * aa * aa / 6.0 * std::pow(lo, 3.0 - alpha) / (3.0 - alpha)
                            : kappa_high * aa * std::pow(lo, 1.0 - alpha) / (1.0 - alpha);
        }
        const double tol = rel_tol * std::max(std::abs(out.re), std::abs(out.im));
        if (re_bound <= 0.1 * tol && im_bound <= 0.1 * tol) {
            out.residual += re_bound + im_bound;
            return out;
        }
        hi = lo;
    }
    fail(ErrorCode::tolerance_failure, "small-jump radial quadrature did not converge", out.residual);
}

/// int_x^inf e^{is} s^{-mu} ds for large x by its asymptotic series
/// i e^{ix} x^{-mu} sum_n (-i)^n (mu)_n x^{-n}.
cplx oscillatory_tail_asymptotic(double x, double mu) {
    cplx sum(0.0, 0.0), term(1.0, 0.0);
    for (int n = 0; n < 40; ++n) {
        sum += term;
        term *= cplx(0.0, -1.0) * (mu + n) / x;
        if (std::abs(term) < 1e-18) break;
    }
    return cplx(0.0, 1.0) * std::polar(1.0, x) * std::pow(x, -mu) * sum;
}

/// C(x) = int_x^inf cos(s) s^{-1-alpha} ds: Gauss-Legendre panels up to 64, asymptotic series beyond.
double cosine_tail(double x, double alpha) {
    constexpr double switch_point = 64.0;
    const double mu = 1.0 + alpha;
    if (x >= switch_point) return oscillatory_tail_asymptotic(x, mu).real();
    auto f = [mu](double s) { return std::cos(s) * std::pow(s, -mu); };
    const double body = quad::integrate(f, x, switch_point, 2 * quad::panels_for(switch_point - x, 1.0));
    return body + oscillatory_tail_asymptotic(switch_point, mu).real();
}

double unit_stable_integral(double alpha) {
    RadialIntegral near = small_jump_integral(1.0, alpha, [](double) { return 1.0; }, 1.0, false, 1e-13);
    return near.re + cosine_tail(1.0, alpha) - 1.0 / alpha;
}

} // namespace

// ---------------------------------------------------------------------------
// SphericalMeasure

SphericalMeasure::SphericalMeasure(std::vector<DirectionAtom> atoms) : atoms_(std::move(atoms)) {
    if (atoms_.empty()) fail(ErrorCode::invalid_model, "spherical measure has no atoms");
    dim_ = static_cast<int>(atoms_.front().direction.size());
    if (dim_ < 1) fail(ErrorCode::invalid_model, "spherical measure dimension must be >= 1");
    for (const auto& atom : atoms_) {
        if (static_cast<int>(atom.direction.size()) != dim_)
            fail(ErrorCode::invalid_model, "spherical atoms have inconsistent dimension");
        if (std::abs(norm(atom.direction) - 1.0) > kUnitTol)
            fail(ErrorCode::invalid_model, "spherical atom direction is not a unit vector");
        if (!(atom.weight > 0.0)) fail(ErrorCode::invalid_model, "spherical atom weight must be positive");
    }
    for (const auto& atom : atoms_) {
        Vec neg(atom.direction);
        for (auto& v : neg) v = -v;
        const bool found = std::any_of(atoms_.begin(), atoms_.end(), [&](const DirectionAtom& other) {
            return same_vector(other.direction, neg, 1e-12) && std::abs(other.weight - atom.weight) <= 1e-12 * atom.weight;
        });
        if (!found) fail(ErrorCode::invalid_model, "spherical measure is not symmetric");
    }
}

SphericalMeasure SphericalMeasure::cylindrical(int dim) {
    std::vector<DirectionAtom> atoms;
    for (int i = 0; i < dim; ++i) {
        for (double s : {1.0, -1.0}) {
            Vec e(static_cast<std::size_t>(dim), 0.0);
            e[static_cast<std::size_t>(i)] = s;
            atoms.push_back({e, 1.0});
        }
    }
    return SphericalMeasure(std::move(atoms));
}

SphericalMeasure SphericalMeasure::isotropic(int dim, int count, double total_mass) {
    if (dim == 1) return SphericalMeasure({{{1.0}, 0.5 * total_mass}, {{-1.0}, 0.5 * total_mass}});
    if (dim != 2 || count < 2 || count % 2 != 0)
        fail(ErrorCode::invalid_argument, "isotropic atoms are provided for d = 1, 2 with an even count");
    std::vector<DirectionAtom> atoms;
    const double w = total_mass / count;
    // Generate half the circle and mirror it so that +-theta are bitwise negatives.
    for (int k = 0; k < count / 2; ++k) {
        const double phi = (k + 0.5) * 2.0 * M_PI / count;
        atoms.push_back({{std::cos(phi), std::sin(phi)}, w});
    }
    for (int k = 0; k < count / 2; ++k) {
        const auto& d = atoms[static_cast<std::size_t>(k)].direction;
        atoms.push_back({{-d[0], -d[1]}, w});
    }
    return SphericalMeasure(std::move(atoms));
}

double SphericalMeasure::total_mass() const {
    double s = 0.0;
    for (const auto& a : atoms_) s += a.weight;
    return s;
}

RadialProfile RadialProfile::constant_one() {
    RadialProfile p;
    p.kappa = [](std::span<const double>, double) { return 1.0; };
    p.unit = true;
    return p;
}

// ---------------------------------------------------------------------------
// LevyModel

LevyModel::LevyModel(double alpha, SphericalMeasure spherical, RadialProfile profile, Tail tail)
    : alpha_(alpha), spherical_(std::move(spherical)), profile_(std::move(profile)), tail_(std::move(tail)) {
    if (!(alpha_ > 0.0 && alpha_ < 2.0)) fail(ErrorCode::invalid_model, "alpha must lie in (0,2)");
    if (spherical_.empty()) fail(ErrorCode::invalid_model, "empty spherical measure");
    if (!(profile_.kappa_low > 0.0) || !std::isfinite(profile_.kappa_high) ||
        profile_.kappa_high < profile_.kappa_low)
        fail(ErrorCode::invalid_model, "radial profile bounds must satisfy 0 < kappa_low <= kappa_high < inf");
    if (!profile_.unit && !profile_.kappa) fail(ErrorCode::invalid_model, "radial profile has no callable");
    if (alpha_ > 1.0)
        warnings_.push_back("alpha in (1,2): subcritical regime, library-generality only");

    bool tail_symmetric = true;
    if (const auto* pl = std::get_if<PowerLawTail>(&tail_)) {
        if (!(pl->r_max > 1.0) || !std::isfinite(pl->r_max))
            fail(ErrorCode::invalid_model, "power-law tail needs 1 < r_max < inf");
    } else if (const auto* at = std::get_if<AtomTail>(&tail_)) {
        for (const auto& atom : at->atoms) {
            if (static_cast<int>(atom.z.size()) != dim())
                fail(ErrorCode::invalid_model, "tail atom dimension mismatch");
            if (!(norm(atom.z) > 1.0)) fail(ErrorCode::invalid_model, "tail atoms must satisfy |z| > 1");
            if (!(atom.mass >= 0.0) || !std::isfinite(atom.mass))
                fail(ErrorCode::invalid_model, "tail atom mass must be finite and non-negative");
        }
        for (const auto& atom : at->atoms) {
            Vec neg(atom.z);
            for (auto& v : neg) v = -v;
            tail_symmetric = tail_symmetric && std::any_of(at->atoms.begin(), at->atoms.end(), [&](const auto& o) {
                return same_vector(o.z, neg, 1e-12) && std::abs(o.mass - atom.mass) <= 1e-12 * (1.0 + atom.mass);
            });
        }
    }
    symmetric_ = profile_.even && tail_symmetric;
}

LevyModel LevyModel::pure_stable(double alpha, SphericalMeasure spherical) {
    LevyModel m(alpha, std::move(spherical), RadialProfile::constant_one(), NoTail{});
    m.pure_stable_ = true;
    m.stable_integral_ = unit_stable_integral(alpha);
    return m;
}

LevyModel LevyModel::stable_like(double alpha, SphericalMeasure spherical, RadialProfile profile, double r_max) {
    return LevyModel(alpha, std::move(spherical), std::move(profile), PowerLawTail{r_max});
}

LevyModel LevyModel::truncated(double alpha, SphericalMeasure spherical, RadialProfile profile) {
    return LevyModel(alpha, std::move(spherical), std::move(profile), NoTail{});
}

double LevyModel::tail_mass() const {
    if (pure_stable_) return spherical_.total_mass() / alpha_;
    if (const auto* pl = std::get_if<PowerLawTail>(&tail_))
        return spherical_.total_mass() * (1.0 - std::pow(pl->r_max, -alpha_)) / alpha_;
    if (const auto* at = std::get_if<AtomTail>(&tail_)) {
        double s = 0.0;
        for (const auto& a : at->atoms) s += a.mass;
        return s;
    }
    return 0.0;
}

void LevyModel::require_supported_regime() const {
    if (alpha_ > 1.0) fail(ErrorCode::invalid_model, "operation requires alpha in (0,1]");
}

// ---------------------------------------------------------------------------
// Operations

double check_nondegeneracy(const LevyModel& model, int resolution) {
    const auto& atoms = model.spherical().atoms();
    if (atoms.empty()) fail(ErrorCode::invalid_model, "empty spherical measure");
    if (resolution < 1) fail(ErrorCode::invalid_argument, "direction grid resolution must be positive");
    const int d = model.dim();
    const double alpha = model.alpha();
    auto value_at = [&](std::span<const double> theta0) {
        double s = 0.0;
        for (const auto& a : atoms) s += a.weight * std::pow(std::abs(dot(theta0, a.direction)), alpha);
        return s;
    };

    std::vector<Vec> grid;
    if (d == 1) {
        grid.push_back({1.0});
    } else if (d == 2) {
        // Angles k * 2pi / resolution; resolutions divisible by 4 contain the axes.
        for (int k = 0; k < resolution; ++k) {
            const double phi = 2.0 * M_PI * k / resolution;
            Vec v{std::cos(phi), std::sin(phi)};
            for (auto& c : v)
                if (std::abs(c) < 1e-15) c = 0.0;
            grid.push_back(std::move(v));
        }
    } else {
        for (int i = 0; i < d; ++i) {
            Vec e(static_cast<std::size_t>(d), 0.0);
            e[static_cast<std::size_t>(i)] = 1.0;
            grid.push_back(e);
        }
        if (d == 3) {
            const double golden = M_PI * (3.0 - std::sqrt(5.0));
            for (int k = 0; k < resolution; ++k) {
                const double z = 1.0 - 2.0 * (k + 0.5) / resolution;
                const double rad = std::sqrt(1.0 - z * z);
                grid.push_back({rad * std::cos(golden * k), rad * std::sin(golden * k), z});
            }
        } else {
            RngStream rng(0x5eed);
            for (int k = 0; k < resolution; ++k) {
                Vec v(static_cast<std::size_t>(d));
                for (auto& x : v) x = rng.normal();
                const double n = norm(v);
                for (auto& x : v) x /= n;
                grid.push_back(v);
            }
        }
    }
    double best = std::numeric_limits<double>::infinity();
    for (const auto& theta0 : grid) best = std::min(best, value_at(theta0));
    return best;
}

SymbolValue symbol_with_residual(const LevyModel& model, std::span<const double> xi, double rel_tol) {
    if (static_cast<int>(xi.size()) != model.dim()) fail(ErrorCode::invalid_argument, "xi dimension mismatch");
    SymbolValue out{cplx(0.0, 0.0), 0.0};
    if (std::all_of(xi.begin(), xi.end(), [](double v) { return v == 0.0; })) return out;

    const double alpha = model.alpha();
    const auto& atoms = model.spherical().atoms();

    if (model.is_pure_stable()) {
        double s = 0.0;
        for (const auto& a : atoms) s += a.weight * std::pow(std::abs(dot(xi, a.direction)), alpha);
        out.value = cplx(model.stable_unit_integral() * s, 0.0);
        out.residual = 1e-12 * std::abs(out.value);
        return out;
    }

    const bool want_imag = !model.profile().even;
    double re = 0.0, im = 0.0, residual = 0.0;
    for (const auto& atom : atoms) {
        const double a = dot(xi, atom.direction);
        const auto& theta = atom.direction;
        auto kappa = [&](double r) { return model.profile()(theta, r); };
        RadialIntegral ri = small_jump_integral(a, alpha, kappa, model.profile().kappa_high, want_imag, rel_tol);
        re += atom.weight * ri.re;
        im += atom.weight * ri.im;
        residual += atom.weight * ri.residual;
    }

    if (const auto* pl = std::get_if<PowerLawTail>(&model.tail())) {
        // kappa = 1 on the tail, so the sine parts cancel between +theta and -theta.
        const double big_r = pl->r_max;
        for (const auto& atom : atoms) {
            const double a = std::abs(dot(xi, atom.direction));
            if (a == 0.0) continue;
            double value;
            if (a * big_r < 50.0) {
                auto re_f = [&](double r) { return cosm1(r * a) * std::pow(r, -1.0 - alpha); };
                const double tol = 0.05 * rel_tol * (std::abs(re) + 1e-300);
                value = adaptive_panels(re_f, 1.0, big_r, a, tol, residual);
            } else {
                value = std::pow(a, alpha) * (cosine_tail(a, alpha) - cosine_tail(a * big_r, alpha)) -
                        (1.0 - std::pow(big_r, -alpha)) / alpha;
            }
            re += atom.weight * value;
        }
    } else if (const auto* at = std::get_if<AtomTail>(&model.tail())) {
        for (const auto& atom : at->atoms) {
            const double phase = dot(xi, atom.z);
            re += atom.mass * cosm1(phase);
            im += atom.mass * std::sin(phase);
        }
    }
    if (model.is_symmetric()) im = 0.0;

    out.value = cplx(re, im);
    out.residual = residual;
    if (residual > 10.0 * rel_tol * std::abs(out.value) + 1e-13)
        fail(ErrorCode::tolerance_failure, "symbol quadrature residual above tolerance", residual);
    return out;
}

cplx symbol(const LevyModel& model, std::span<const double> xi) {
    return symbol_with_residual(model, xi).value;
}

SymbolBound symbol_bound_fit(const LevyModel& model, std::span<const Vec> xi_samples) {
    if (xi_samples.empty()) fail(ErrorCode::invalid_argument, "no xi samples");
    const double alpha = model.alpha();
    std::vector<double> mags, re;
    mags.reserve(xi_samples.size());
    re.reserve(xi_samples.size());
    for (const auto& xi : xi_samples) {
        mags.push_back(norm(xi));
        re.push_back(symbol(model, xi).real());
    }
    const double max_mag = *std::max_element(mags.begin(), mags.end());
    const double cut = std::sqrt(max_mag);
    double c0 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < mags.size(); ++i)
        if (mags[i] >= cut && mags[i] > 0.0) c0 = std::min(c0, -re[i] / std::pow(mags[i], alpha));
    if (!std::isfinite(c0) || c0 <= 0.0)
        fail(ErrorCode::degeneracy, "symbol bound fit yields C0 <= 0", std::isfinite(c0) ? c0 : 0.0);
    double c1 = 0.0;
    for (std::size_t i = 0; i < mags.size(); ++i) c1 = std::max(c1, re[i] + c0 * std::pow(mags[i], alpha));
    return {c0, c1};
}

namespace {

double shell_mass(const LevyModel& model, const DirectionAtom& atom, double eps) {
    const double alpha = model.alpha();
    if (eps >= 1.0) return 0.0;
    if (model.profile().unit) return atom.weight * (std::pow(eps, -alpha) - 1.0) / alpha;
    // Substitute r = e^s: the integrand kappa e^{-alpha s} is smooth in s.
    auto f = [&](double s) {
        const double r = std::exp(s);
        return model.profile()(atom.direction, r) * std::pow(r, -alpha);
    };
    const double lo = std::log(eps);
    const int panels = 1 + static_cast<int>(std::ceil(-lo * 4.0));
    return atom.weight * quad::integrate(f, lo, 0.0, panels);
}

} // namespace

double restricted_mass(const LevyModel& model, double eps) {
    if (!(eps > 0.0 && eps <= 1.0)) fail(ErrorCode::invalid_argument, "eps must lie in (0,1]");
    double mass = 0.0;
    for (const auto& atom : model.spherical().atoms()) mass += shell_mass(model, atom, eps);
    return mass + model.tail_mass();
}

// ---------------------------------------------------------------------------
// JumpSampler

namespace {

/// Inverse CDF of the density proportional to r^{-1-alpha} on (lo, hi]; hi may be +inf.
double power_inverse(double lo, double hi, double alpha, double u) {
    const double a = std::pow(lo, -alpha);
    const double b = std::isinf(hi) ? 0.0 : std::pow(hi, -alpha);
    return std::pow(a - u * (a - b), -1.0 / alpha);
}

} // namespace

JumpSampler::JumpSampler(const LevyModel& model, double eps) : model_(model), eps_(eps) {
    if (!(eps > 0.0 && eps <= 1.0)) fail(ErrorCode::invalid_argument, "eps must lie in (0,1]");
    const double alpha = model.alpha();
    const auto& atoms = model.spherical().atoms();
    for (std::size_t k = 0; k < atoms.size(); ++k) {
        if (model.is_pure_stable()) {
            components_.push_back({Kind::stable_far, k, atoms[k].weight * std::pow(eps, -alpha) / alpha, eps,
                                   std::numeric_limits<double>::infinity(), {}, {}});
            continue;
        }
        const double m = shell_mass(model, atoms[k], eps);
        if (m <= 0.0) continue;
        Component c{Kind::shell, k, m, eps, 1.0, {}, {}};
        if (!model.profile().unit) {
            constexpr int knots = 512;
            const double lo = std::log(eps);
            c.knots.resize(knots + 1);
            c.cdf.assign(knots + 1, 0.0);
            for (int i = 0; i <= knots; ++i) c.knots[static_cast<std::size_t>(i)] = std::exp(lo * (1.0 - static_cast<double>(i) / knots));
            auto f = [&](double s) {
                const double r = std::exp(s);
                return model.profile()(atoms[k].direction, r) * std::pow(r, -alpha);
            };
            for (int i = 0; i < knots; ++i) {
                const auto ui = static_cast<std::size_t>(i);
                c.cdf[ui + 1] = c.cdf[ui] + quad::integrate(f, std::log(c.knots[ui]), std::log(c.knots[ui + 1]), 1);
            }
            c.mass = atoms[k].weight * c.cdf.back();
        }
        components_.push_back(std::move(c));
    }
    if (const auto* pl = std::get_if<PowerLawTail>(&model.tail())) {
        for (std::size_t k = 0; k < atoms.size(); ++k)
            components_.push_back({Kind::power_tail, k, atoms[k].weight * (1.0 - std::pow(pl->r_max, -alpha)) / alpha,
                                   1.0, pl->r_max, {}, {}});
    } else if (const auto* at = std::get_if<AtomTail>(&model.tail())) {
        for (std::size_t j = 0; j < at->atoms.size(); ++j)
            if (at->atoms[j].mass > 0.0) components_.push_back({Kind::atom, j, at->atoms[j].mass, 0.0, 0.0, {}, {}});
    }
    for (const auto& c : components_) {
        mass_ += c.mass;
        cumulative_.push_back(mass_);
    }
}

double JumpSampler::sample_radius(const Component& c, double u) const {
    const double alpha = model_.alpha();
    if (c.knots.empty()) return power_inverse(c.lo, c.hi, alpha, u);
    const double target = u * c.cdf.back();
    auto it = std::upper_bound(c.cdf.begin(), c.cdf.end(), target);
    std::size_t i = static_cast<std::size_t>(std::distance(c.cdf.begin(), it));
    i = std::clamp<std::size_t>(i, 1, c.cdf.size() - 1) - 1;
    const double width = c.cdf[i + 1] - c.cdf[i];
    const double frac = width > 0.0 ? (target - c.cdf[i]) / width : 0.0;
    // kappa is taken constant inside a knot interval.
    return power_inverse(c.knots[i], c.knots[i + 1], alpha, std::clamp(frac, 0.0, 1.0));
}

void JumpSampler::sample_into(RngStream& rng, std::span<double> out) const {
    if (!(mass_ > 0.0)) fail(ErrorCode::sampling, "restricted Levy measure has zero mass");
    const double pick = rng.uniform() * mass_;
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), pick);
    const std::size_t idx = std::min<std::size_t>(static_cast<std::size_t>(std::distance(cumulative_.begin(), it)),
                                                  components_.size() - 1);
    const Component& c = components_[idx];
    const double u = rng.uniform();
    if (c.kind == Kind::atom) {
        const auto& z = std::get<AtomTail>(model_.tail()).atoms[c.index].z;
        std::copy(z.begin(), z.end(), out.begin());
        return;
    }
    const double r = sample_radius(c, u);
    const auto& dir = model_.spherical().atoms()[c.index].direction;
    for (std::size_t i = 0; i < dir.size(); ++i) out[i] = r * dir[i];
}

Vec JumpSampler::sample(RngStream& rng) const {
    Vec z(static_cast<std::size_t>(model_.dim()));
    sample_into(rng, z);
    return z;
}

Vec sample_jump(const LevyModel& model, double eps, RngStream& rng) {
    return JumpSampler(model, eps).sample(rng);
}

} // namespace levylab::levy
