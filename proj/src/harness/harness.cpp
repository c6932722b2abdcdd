#include "levylab/harness/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>

#include <fftw3.h>
#include <json.hpp>

#include "levylab/core/error.hpp"
#include "levylab/core/exec.hpp"
#include "levylab/harness/report.hpp"
#include "levylab/lp/littlewood_paley.hpp"
#include "levylab/zvonkin/zvonkin.hpp"

namespace levylab::harness {

using levy::Vec;
using lp::GridField;
using lp::GridSpec;
using nonlocal::DriftField;
using nonlocal::JumpKernel;

namespace {
constexpr const char* kVersion = "0.1.0";
constexpr double kInf = std::numeric_limits<double>::infinity();
}

RegimeClass classify_regime(double alpha, double beta) {
    if (!(alpha > 0.0 && alpha < 2.0)) fail(ErrorCode::invalid_argument, "alpha must lie in (0,2)");
    if (!(beta >= 0.0 && beta <= 1.0)) fail(ErrorCode::invalid_argument, "beta must lie in [0,1]");
    const Regime r = alpha < 1.0 ? Regime::supercritical : alpha == 1.0 ? Regime::critical : Regime::subcritical;
    return {r, alpha + beta >= 1.0};
}

std::string regime_name(Regime r) {
    switch (r) {
    case Regime::subcritical: return "subcritical";
    case Regime::critical: return "critical";
    case Regime::supercritical: return "supercritical";
    }
    return "unknown";
}

std::string status_name(Status s) {
    switch (s) {
    case Status::pass: return "PASS";
    case Status::warn: return "WARN";
    case Status::skip: return "SKIP";
    case Status::info: return "INFO";
    }
    return "?";
}

bool HypothesisReport::all_pass() const {
    return std::none_of(checks.begin(), checks.end(), [](const Check& c) { return c.status == Status::warn; });
}

// ---- hypotheses -------------------------------------------------------------------

namespace {

Status pass_if(bool ok) { return ok ? Status::pass : Status::warn; }

std::vector<GridField> drift_components(const DriftField& drift, const GridSpec& grid) {
    std::vector<GridField> out;
    const auto d = static_cast<std::size_t>(grid.dim);
    for (std::size_t c = 0; c < d; ++c)
        out.push_back(GridField::from_function(grid, [&](std::span<const double> x) {
            Vec b(d, 0.0);
            drift.eval(0.0, x, b);
            return b[c];
        }));
    return out;
}

/// Decay exponent of ||Lambda_j f||_inf over the blocks j >= 0 that stand above roundoff;
/// +inf when fewer than three such blocks exist (band-limited or smooth data).
double measured_block_decay(const GridField& f, const lp::DyadicPartition& part) {
    const auto rep = lp::besov_report(f, 0.0, kInf, kInf, part);
    double top = 0.0;
    for (double v : rep.block_norms) top = std::max(top, v);
    std::vector<double> js, ns;
    for (std::size_t i = 1; i < rep.block_norms.size(); ++i) {
        const double v = rep.block_norms[i];
        if (v > 1e-10 * top) {
            js.push_back(static_cast<double>(i) - 1.0);
            ns.push_back(v);
        }
    }
    if (js.size() < 3) return kInf;
    return -lp::fit_log2_slope(js, ns).slope;
}

} // namespace

HypothesisReport hypothesis_check(const levy::LevyModel& model, const JumpKernel& kernel, const DriftField& drift,
                                  std::size_t samples, std::uint64_t seed) {
    HypothesisReport rep;
    const int dim = model.dim();
    const GridSpec grid{dim, dim == 1 ? std::size_t{256} : std::size_t{32}, 2.0 * M_PI};
    auto rng = RngStream::derive(seed, 0x4879);

    const double nd = levy::check_nondegeneracy(model, 64);
    rep.checks.push_back({"Hnu: non-degenerate spherical part", pass_if(nd > 0.0), nd, 0.0, "min over directions"});
    const double tail = model.tail_mass();
    rep.checks.push_back({"Hnu: finite mass outside the unit ball", pass_if(std::isfinite(tail)), tail, kInf, ""});

    const auto kr = nonlocal::check_kernel(kernel, dim, grid.length, rng, static_cast<int>(samples));
    rep.checks.push_back({"Hsigma1: kappa0 <= sigma <= kappa1", pass_if(kr.bounds_ok), kr.min_value, kernel.kappa0,
                          "max sampled " + fmt(kr.max_value) + " vs kappa1 " + fmt(kernel.kappa1)});
    rep.checks.push_back({"Hsigma1: Hoelder quotient <= kappa2", pass_if(kr.holder_ok), kr.holder_quotient, kernel.kappa2,
                          "theta = " + fmt(kernel.theta)});

    // Modulus inequality on sampled pairs with |x - y| <= 1.
    {
        const nonlocal::Generator gen(model, grid);
        const auto& nodes = gen.nodes();
        const std::size_t pairs = std::min<std::size_t>(samples, 400);
        double worst = 0.0, fitted = 0.0;
        Vec x(dim), y(dim);
        for (std::size_t s = 0; s < pairs && kernel.depends_on_x; ++s) {
            double dist2 = 0.0;
            for (int k = 0; k < dim; ++k) {
                x[k] = grid.length * rng.uniform();
                const double h = (2.0 * rng.uniform() - 1.0) / std::sqrt(static_cast<double>(dim));
                y[k] = x[k] + h;
                dist2 += h * h;
            }
            const double dist = std::sqrt(dist2);
            if (dist == 0.0) continue;
            double lhs = 0.0;
            for (const auto& n : nodes) {
                double r = 0.0;
                for (double v : n.z) r += v * v;
                lhs += n.weight * std::abs(kernel(0.0, x, n.z) - kernel(0.0, y, n.z)) * std::min(std::sqrt(r), 1.0);
            }
            fitted = std::max(fitted, lhs / (2.0 * dist));
            if (kernel.modulus) {
                const double rhs = dist * (lp::interpolate_cubic(*kernel.modulus, x) + lp::interpolate_cubic(*kernel.modulus, y));
                worst = std::max(worst, lhs - rhs);
            }
        }
        if (kernel.modulus)
            rep.checks.push_back({"Hsigma2: modulus inequality with the declared rho", pass_if(worst <= 1e-9), worst, 0.0,
                                  "max of lhs - rhs over sampled pairs"});
        else
            rep.checks.push_back({"Hsigma2: modulus inequality with a constant rho", Status::pass, fitted, kInf,
                                  "fitted constant rho; constants lie in B^0_{q,inf} on the torus"});
    }

    if (!std::isfinite(drift.declared_norm)) {
        rep.checks.push_back({"Hb: declared sup bound", Status::skip, kInf, kInf, "unbounded drift"});
        rep.checks.push_back({"Hb: Besov decay against declared beta", Status::skip, kInf, drift.beta, "unbounded drift"});
    } else {
        const lp::DyadicPartition part(grid);
        double sup = 0.0, decay = kInf;
        for (const auto& f : drift_components(drift, grid)) {
            sup = std::max(sup, f.max_abs());
            decay = std::min(decay, measured_block_decay(f, part));
        }
        const double bound = drift.is_zero ? 0.0 : drift.declared_norm;
        rep.checks.push_back({"Hb: declared sup bound", pass_if(sup <= bound * (1.0 + 1e-9) + 1e-12), sup, bound, ""});
        rep.checks.push_back({"Hb: Besov decay against declared beta", pass_if(drift.beta <= decay + 0.25), decay, drift.beta,
                              "fitted decay of the sup norms of the dyadic blocks"});
    }

    const double alpha = model.alpha(), beta = drift.is_zero ? 1.0 : drift.beta;
    rep.checks.push_back({"Hb3: beta > 1 - alpha/2", pass_if(beta > 1.0 - alpha / 2.0), beta, 1.0 - alpha / 2.0, ""});
    rep.checks.push_back({"balance: alpha + beta >= 1", pass_if(alpha + beta >= 1.0), alpha + beta, 1.0, ""});
    return rep;
}

// ---- regime study -----------------------------------------------------------------

double ks_statistic(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) fail(ErrorCode::invalid_argument, "ks_statistic needs non-empty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == v) ++i;
        while (j < b.size() && b[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

RegimeStudyReport regime_study(const RegimeStudyConfig& config) {
    if (config.model.dim() != 1) fail(ErrorCode::invalid_argument, "regime study runs in d = 1");
    if (config.levels.size() < 2) fail(ErrorCode::invalid_argument, "regime study needs at least two levels");
    RegimeStudyReport rep;
    rep.regime = classify_regime(config.model.alpha(), config.beta);
    rep.descriptive = !rep.regime.balance;
    rep.levels = config.levels;

    const double beta = config.beta, amp = config.amplitude;
    const GridField b = GridField::from_function(config.grid, [&](std::span<const double> x) {
        const double s = std::sin(x[0]);
        return amp * (s < 0 ? -1.0 : 1.0) * std::pow(std::abs(s), beta);
    });
    const lp::DyadicPartition part(config.grid);

    std::vector<std::unique_ptr<sde::Simulator>> sims;
    for (int level : config.levels) {
        auto field = std::make_shared<GridField>(lp::low_pass(b, level, part));
        auto drift = DriftField::of_x(
            [field](std::span<const double> x, std::span<double> out) { out[0] = lp::interpolate_cubic(*field, x); }, beta,
            field->max_abs());
        sims.push_back(std::make_unique<sde::Simulator>(config.model, config.kernel, drift, config.sim));
    }

    const std::size_t n = config.sim.n_paths, L = sims.size();
    std::vector<std::vector<double>> xt(L, std::vector<double>(n));
    const auto body = [&](std::int64_t i) {
        auto rng = RngStream::derive(config.sim.seed, static_cast<std::uint64_t>(i));
        const auto ev = sims[0]->events(rng);
        for (std::size_t l = 0; l < L; ++l) xt[l][static_cast<std::size_t>(i)] = sims[l]->terminal(ev, config.sim.x0)[0];
    };
    if (config.sim.exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 16)
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) body(i);
    } else {
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) body(i);
    }

    std::vector<double> idx, logs;
    for (std::size_t l = 0; l + 1 < L; ++l) {
        rep.ks.push_back(ks_statistic(xt[l], xt[l + 1]));
        idx.push_back(static_cast<double>(l));
        logs.push_back(std::log(std::max(rep.ks.back(), 1e-300)));
    }
    if (idx.size() >= 2) {
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < idx.size(); ++i) mx += idx[i], my += logs[i];
        mx /= static_cast<double>(idx.size());
        my /= static_cast<double>(idx.size());
        double sxy = 0.0, sxx = 0.0;
        for (std::size_t i = 0; i < idx.size(); ++i) {
            sxy += (idx[i] - mx) * (logs[i] - my);
            sxx += (idx[i] - mx) * (idx[i] - mx);
        }
        rep.slope = sxy / sxx;
    } else {
        rep.slope = 0.0;
    }
    rep.decreasing = rep.ks.size() >= 2 && rep.slope < 0.0 && rep.ks.back() < rep.ks.front();
    return rep;
}

// ---- experiments ------------------------------------------------------------------

std::string experiment_title(Kind kind) {
    switch (kind) {
    case Kind::symbol: return "symbol coercivity Re psi(xi) <= -C0 |xi|^alpha + C1";
    case Kind::lp: return "Littlewood-Paley reconstruction, orthogonality, Bony decomposition and Bernstein ratios";
    case Kind::pde: return "pseudo-spectral solve of the non-local drift-diffusion equation";
    case Kind::simulate: return "thinned Poisson simulation: event-count law, acceptance frequency, characteristic function";
    case Kind::verify_apriori: return "a-priori Besov estimate ||u||_{B^{alpha+gamma}_{q,inf}} <= C ||f||_{B^gamma_{q,inf}} and its lambda decay";
    case Kind::verify_krylov: return "Krylov estimate E int_0^T f(s,X_s) ds <= C ||f||_{B^0_{q,inf}}";
    case Kind::verify_feynman_kac: return "Feynman-Kac identity u(0,x) = E int_0^T f(s,X_s) ds for the backward equation";
    case Kind::verify_zvonkin: return "Zvonkin transform Phi = id + u: smallness certificate, bi-Lipschitz bounds, transformed dynamics";
    case Kind::verify_maxprinciple: return "maximum principle sign(u(x0)) L u(x0) <= -c 2^{alpha j} ||u||_inf for band-limited u";
    case Kind::verify_coercivity: return "L^p coercivity int |g|^{p-2} g L g <= -C0 2^{alpha j} ||g||_p^p for g = Lambda_j f";
    case Kind::verify_commutator: return "commutator ||[Lambda_j, L^sigma] f||_p <= C 2^{-(theta - thetabar + gamma) j} ||f||_{B^{alpha - thetabar + gamma}_{p,inf}}";
    case Kind::regime_study: return "regime study: KS distance of X_T between successive drift mollifications";
    }
    return "";
}

namespace {

struct Run {
    const ExperimentConfig& cfg;
    const Config& c;
    std::string dir;
    std::vector<Check> checks;
    std::vector<std::string> files;

    std::string path(const std::string& name) {
        files.push_back(name);
        return dir + "/" + name;
    }
    void check(std::string name, bool ok, double measured, double bound, std::string note = "") {
        checks.push_back({std::move(name), ok ? Status::pass : Status::warn, measured, bound, std::move(note)});
    }
    void info(std::string name, double measured, std::string note = "") {
        checks.push_back({std::move(name), Status::info, measured, std::numeric_limits<double>::quiet_NaN(), std::move(note)});
    }
    Exec exec() const { return Exec::parallel; }
    int dim() const { return static_cast<int>(c.number("model.dim", 1)); }
    sde::SimConfig sim() const {
        auto s = make_sim(c, dim(), cfg.seed);
        s.exec = exec();
        return s;
    }
};

void write_checks(const std::string& file, const std::string& title, const std::vector<Check>& checks) {
    CsvWriter w(file, {"experiment", "check", "status", "measured", "bound", "note"});
    for (const auto& k : checks) w.row({title, k.name, status_name(k.status), fmt(k.measured), fmt(k.bound), k.note});
}

struct SourceFn {
    sde::SpaceTimeFn fn;
    bool time_independent;
    bool constant;
    double value;
};

/// [pde] source = zero | constant | cosine | bump, with source_value, source_wave and source_time_slope.
SourceFn source_fn(const Config& c) {
    const std::string type = c.text("pde.source", "cosine");
    const double v = c.number("pde.source_value", 1.0);
    const double k = c.number("pde.source_wave", 1.0);
    const double slope = c.number("pde.source_time_slope", 0.0);
    if (type == "zero") return {[](double, std::span<const double>) { return 0.0; }, true, true, 0.0};
    if (type == "constant") return {[v](double, std::span<const double>) { return v; }, true, true, v};
    if (type == "cosine")
        return {[v, k, slope](double t, std::span<const double> x) { return v * std::cos(k * x[0]) * (1.0 + slope * t); },
                slope == 0.0, false, v};
    if (type == "bump")
        return {[v, k, slope](double t, std::span<const double> x) { return v * (1.0 + std::cos(k * x[0])) * (1.0 + slope * t); },
                slope == 0.0, false, v};
    fail(ErrorCode::configuration, "pde.source must be zero, constant, cosine or bump");
}

std::vector<Vec> x_grid(const Config& c, int dim) {
    const auto pts = c.array("sim.x_grid", {0.0, 1.0, 2.0, 3.0, 4.0});
    std::vector<Vec> out;
    for (double v : pts) out.push_back(Vec(static_cast<std::size_t>(dim), v));
    return out;
}

void run_symbol(Run& r) {
    const auto model = make_model(r.c);
    const int d = model.dim();
    const double xi_max = r.c.number("symbol.xi_max", 64.0);
    const int points = static_cast<int>(r.c.number("symbol.points", d == 1 ? 129 : 33));
    {
        std::vector<std::string> header;
        for (int k = 0; k < d; ++k) header.push_back("xi_" + std::to_string(k + 1));
        header.push_back("re_psi");
        header.push_back("im_psi");
        CsvWriter w(r.path("symbol.csv"), header);
        std::vector<double> xi(static_cast<std::size_t>(d));
        const std::size_t total = static_cast<std::size_t>(std::pow(points, d));
        for (std::size_t i = 0; i < total; ++i) {
            std::size_t rem = i;
            for (int k = d - 1; k >= 0; --k) {
                xi[k] = -xi_max + 2.0 * xi_max * static_cast<double>(rem % points) / (points - 1);
                rem /= points;
            }
            const cplx psi = levy::symbol(model, xi);
            std::vector<double> row(xi);
            row.push_back(psi.real());
            row.push_back(psi.imag());
            w.row(row);
        }
    }

    const int radii = static_cast<int>(r.c.number("symbol.radii", 41));
    const int dirs = d == 1 ? 1 : static_cast<int>(r.c.number("symbol.directions", 16));
    std::vector<Vec> samples;
    for (int a = 0; a < dirs; ++a) {
        const double th = M_PI * a / dirs;
        for (int i = 0; i < radii; ++i) {
            const double rad = std::pow(xi_max, static_cast<double>(i) / (radii - 1));
            samples.push_back(d == 1 ? Vec{rad} : Vec{rad * std::cos(th), rad * std::sin(th)});
        }
    }
    levy::SymbolBound fit{};
    try {
        fit = levy::symbol_bound_fit(model, samples);
    } catch (const Error& e) {
        r.check("coercive symbol bound: C0 > 0", false, 0.0, 0.0, e.what());
        return;
    }
    r.check("coercive symbol bound: C0 > 0", fit.c0 > 0.0, fit.c0, 0.0, "C1 = " + fmt(fit.c1));
    if (model.is_pure_stable()) {
        // int_0^inf (1 - cos s) s^{-1-alpha} ds
        const double a = model.alpha();
        const double unit = a == 1.0 ? M_PI / 2.0 : std::tgamma(1.0 - a) * std::cos(M_PI * a / 2.0) / a;
        double closed = kInf;
        for (int a = 0; a < dirs; ++a) {
            const double th = M_PI * a / dirs;
            const Vec t0 = d == 1 ? Vec{1.0} : Vec{std::cos(th), std::sin(th)};
            double s = 0.0;
            for (const auto& at : model.spherical().atoms()) {
                double dot = 0.0;
                for (int k = 0; k < d; ++k) dot += t0[k] * at.direction[k];
                s += at.weight * std::pow(std::abs(dot), model.alpha());
            }
            closed = std::min(closed, unit * s);
        }
        const double rel = std::abs(fit.c0 - closed) / closed;
        r.check("pure-stable C0 matches the closed form", rel <= 5e-3, fit.c0, closed, "relative error " + fmt(rel));
    }

    Series psi{"-Re psi", {}, {}}, bound{"C0 |xi|^alpha - C1", {}, {}};
    {
        CsvWriter w(r.path("symbol_bound.csv"), {"abs_xi", "re_psi", "bound"});
        for (int i = 0; i < radii; ++i) {
            const auto& xi = samples[static_cast<std::size_t>(i)];
            const double n = std::abs(xi[0]);
            const double re = levy::symbol(model, xi).real();
            const double b = -fit.c0 * std::pow(n, model.alpha()) + fit.c1;
            w.row(std::vector<double>{n, re, b});
            psi.x.push_back(n), psi.y.push_back(-re);
            bound.x.push_back(n), bound.y.push_back(-b);
        }
    }
    write_svg_plot(r.path("symbol_bound.svg"), {"symbol and fitted lower bound", "|xi|", "-Re psi", true, true}, {psi, bound});
}

void run_lp(Run& r) {
    const int d = static_cast<int>(r.c.number("grid.dim", 1));
    const GridSpec s = make_grid(r.c, d);
    const lp::DyadicPartition p(s);
    const int fields = static_cast<int>(r.c.number("lp.fields", 50));
    const int j_hi = std::min(6, p.j_max());
    double recon = 0.0, ortho = 0.0, bony = 0.0;
    std::vector<double> bern_mean(static_cast<std::size_t>(j_hi + 1), 0.0);
    double bern_min = kInf, bern_max = 0.0;
    std::vector<double> first_blocks;

    CsvWriter w(r.path("lp_fields.csv"), {"field", "reconstruction", "orthogonality", "bony", "bernstein_min", "bernstein_max"});
    for (int fi = 0; fi < fields; ++fi) {
        auto rng = RngStream::derive(r.cfg.seed, static_cast<std::uint64_t>(fi));
        const auto f = lp::random_field(s, rng, 0, std::ldexp(1.0, p.j_max()), 0.5);
        const auto bl = lp::blocks(f, p);
        GridField sum(s, 0.0);
        for (const auto& b : bl) sum = sum + b;
        const double e_rec = (sum - f).max_abs();
        double e_orth = 0.0;
        for (int j = -1; j <= p.j_max(); ++j)
            for (int k = j + 2; k <= p.j_max(); ++k)
                e_orth = std::max(e_orth, lp::project(bl[static_cast<std::size_t>(k + 1)], j, p).max_abs());
        const auto g1 = lp::random_field(s, rng, 0, s.n / 8.0);
        const auto g2 = lp::random_field(s, rng, 0, s.n / 8.0);
        const auto prod = g1 * g2;
        const auto total = lp::paraproduct(g1, g2, p) + lp::paraproduct(g2, g1, p) + lp::remainder(g1, g2, p);
        const double e_bony = (total - prod).max_abs() / std::max(prod.max_abs(), 1e-300);
        double bmin = kInf, bmax = 0.0;
        for (int j = 1; j <= j_hi; ++j) {
            const double br = lp::bernstein_ratio(f, j, 1, kInf, kInf, p);
            bern_mean[static_cast<std::size_t>(j)] += br / fields;
            bmin = std::min(bmin, br);
            bmax = std::max(bmax, br);
        }
        bern_min = std::min(bern_min, bmin);
        bern_max = std::max(bern_max, bmax);
        recon = std::max(recon, e_rec);
        ortho = std::max(ortho, e_orth);
        bony = std::max(bony, e_bony);
        if (fi == 0) first_blocks = lp::besov_report(f, 0.0, 2.0, kInf, p).block_norms;
        w.row(std::vector<double>{static_cast<double>(fi), e_rec, e_orth, e_bony, bmin, bmax});
    }
    double mmin = kInf, mmax = 0.0;
    for (int j = 1; j <= j_hi; ++j) {
        mmin = std::min(mmin, bern_mean[static_cast<std::size_t>(j)]);
        mmax = std::max(mmax, bern_mean[static_cast<std::size_t>(j)]);
    }
    r.check("reconstruction sum_j Lambda_j f = f", recon < 1e-10, recon, 1e-10);
    r.check("orthogonality Lambda_j Lambda_k = 0 for |j-k| >= 2", ortho == 0.0, ortho, 0.0);
    r.check("Bony identity fg = T_f g + T_g f + R(f,g)", bony < 1e-8, bony, 1e-8, "relative to ||fg||_inf");
    r.check("Bernstein ratios uniform in j", mmax / mmin <= r.cfg.thresholds.bernstein_factor, mmax / mmin,
            r.cfg.thresholds.bernstein_factor, "mean ratio per j; pooled range [" + fmt(bern_min) + ", " + fmt(bern_max) + "]");

    Series norms{"||Lambda_j f||_2", {}, {}}, bern{"mean Bernstein ratio", {}, {}};
    {
        CsvWriter b(r.path("block_norms.csv"), {"j", "block_norm"});
        for (std::size_t i = 0; i < first_blocks.size(); ++i) {
            b.row(std::vector<double>{static_cast<double>(i) - 1.0, first_blocks[i]});
            norms.x.push_back(static_cast<double>(i) - 1.0), norms.y.push_back(first_blocks[i]);
        }
    }
    for (int j = 1; j <= j_hi; ++j) bern.x.push_back(j), bern.y.push_back(bern_mean[static_cast<std::size_t>(j)]);
    write_svg_plot(r.path("block_norms.svg"), {"block norms of a random field", "j", "norm", false, true}, {norms});
    write_svg_plot(r.path("bernstein.svg"), {"Bernstein ratio vs j", "j", "ratio", false, false}, {bern});
}

void run_pde(Run& r) {
    const auto model = make_model(r.c);
    const GridSpec grid = make_grid(r.c, model.dim());
    pde::PdeProblem prob;
    prob.direction = r.c.text("pde.direction", "forward") == "backward" ? pde::Direction::backward : pde::Direction::forward;
    prob.lambda = r.c.number("pde.lambda", 0.0);
    prob.generator = std::make_shared<const nonlocal::Generator>(model, grid);
    prob.kernel = make_kernel(r.c);
    prob.drift = make_drift(r.c);
    prob.quasilinear_kappa = r.c.number("pde.quasilinear_kappa", 0.0);
    prob.T = r.c.number("pde.T", 1.0);
    prob.dt = r.c.number("pde.dt", 0.01);
    prob.c_cfl = r.c.number("pde.c_cfl", 0.5);
    prob.diag_gamma = r.c.number("pde.gamma", 0.0);
    prob.diag_q = r.c.number("pde.q", kInf);
    prob.save_every = static_cast<int>(r.c.number("pde.save_every", 1));
    prob.exec = r.exec();
    const std::string type = r.c.text("pde.source", "cosine");
    bool nonneg = false, zero = type == "zero";
    if (type == "random") {
        auto rng = RngStream::derive(r.cfg.seed, 0);
        prob.source = pde::Source::constant(lp::random_field(grid, rng, 1, r.c.number("pde.source_wave", 8.0), 1.0));
    } else {
        const auto sf = source_fn(r.c);
        prob.source = sde::sample_source(sf.fn, grid, sf.time_independent);
        nonneg = (type == "constant" || type == "bump") && sf.value >= 0.0;
    }
    const auto sol = prob.quasilinear_kappa != 0.0 ? pde::solve_quasilinear(prob) : pde::solve(prob);
    const GridField& u = prob.direction == pde::Direction::forward ? sol.last() : sol.initial();
    lp::write_csv(u, r.path("solution.csv"));
    pde::write_diagnostics_csv(sol, r.path("diagnostics.csv"));

    const double sup = u.max_abs();
    if (zero) r.check("zero source gives the zero solution", sup == 0.0, sup, 0.0);
    else r.info("sup |u|", sup);
    if (nonneg) {
        double lo = kInf;
        for (const auto& s : sol.snapshots)
            for (double v : s.values()) lo = std::min(lo, v);
        r.check("non-negative source keeps u >= 0", lo >= -1e-8, lo, -1e-8);
    }
    r.info("Picard iterations (max)", sol.max_picard_iterations, "step halvings " + std::to_string(sol.step_halvings));
    Series ratio{"Besov ratio", {}, {}};
    for (const auto& s : sol.diagnostics) ratio.x.push_back(s.t), ratio.y.push_back(s.besov_ratio);
    write_svg_plot(r.path("besov_ratio.svg"), {"solution-to-source Besov ratio", "t", "ratio", false, false}, {ratio});
}

void run_simulate(Run& r) {
    const auto model = make_model(r.c);
    const auto kernel = make_kernel(r.c);
    const auto drift = make_drift(r.c);
    const auto cfg = r.sim();
    const sde::Simulator sim(model, kernel, drift, cfg);
    const int d = model.dim();

    {
        auto rng = RngStream::derive(cfg.seed, 0);
        sde::write_path_csv(sim.run(sim.events(rng), cfg.x0), r.path("path.csv"));
    }
    {
        std::vector<Vec> xt(cfg.n_paths);
#pragma omp parallel for schedule(dynamic, 64)
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(cfg.n_paths); ++i) {
            auto rng = RngStream::derive(cfg.seed, static_cast<std::uint64_t>(i));
            xt[static_cast<std::size_t>(i)] = sim.terminal(sim.events(rng), cfg.x0);
        }
        std::vector<std::string> header{"path"};
        for (int k = 0; k < d; ++k) header.push_back("x_" + std::to_string(k + 1));
        CsvWriter w(r.path("terminal.csv"), header);
        for (std::size_t i = 0; i < xt.size(); ++i) {
            std::vector<double> row{static_cast<double>(i)};
            row.insert(row.end(), xt[i].begin(), xt[i].end());
            w.row(row);
        }
    }

    const auto runs = static_cast<std::size_t>(r.c.number("sim.thinning_runs", 2000));
    if (runs > 0) {
        const auto th = sde::thinning_law_check(sim, runs);
        r.check("event counts are Poisson(proposal rate x T): chi-square p-value", th.p_value > r.cfg.thresholds.p_value,
                th.p_value, r.cfg.thresholds.p_value, "chi2 " + fmt(th.chi_square) + " dof " + std::to_string(th.dof));
        r.check("acceptance frequency sigma / thinning_bound: |z|", std::abs(th.z_score) <= r.cfg.thresholds.sigma_multiple,
                std::abs(th.z_score), r.cfg.thresholds.sigma_multiple,
                std::to_string(th.accepted) + " of " + std::to_string(th.proposals) + " accepted");
        CsvWriter w(r.path("thinning.csv"), {"runs", "mean_events", "expected_events", "chi_square", "dof", "p_value",
                                             "proposals", "accepted", "expected_accepted", "z_score"});
        w.row(std::vector<double>{static_cast<double>(th.runs), th.mean_events, th.expected_events, th.chi_square,
                                  static_cast<double>(th.dof), th.p_value, static_cast<double>(th.proposals),
                                  static_cast<double>(th.accepted), th.expected_accepted, th.z_score});
    }

    const std::string dtype = r.c.text("drift.type", "zero");
    if (!kernel.depends_on_x && !kernel.depends_on_z && (dtype == "zero" || dtype == "constant")) {
        const auto xs = r.c.array("sim.xi", {1.0});
        CsvWriter w(r.path("charfn.csv"), {"xi", "re_estimate", "im_estimate", "stderr", "re_reference", "im_reference",
                                           "cutoff_allowance", "discrepancy"});
        for (double x : xs) {
            const Vec xi(static_cast<std::size_t>(d), x);
            const auto cf = sde::characteristic_function(sim, xi);
            w.row(std::vector<double>{x, cf.estimate.real(), cf.estimate.imag(), cf.stderr_, cf.reference.real(),
                                      cf.reference.imag(), cf.cutoff_allowance, cf.discrepancy});
            r.check("characteristic function at xi = " + fmt(x) + ": |MC - exp(T psi)| <= 3 SE + cutoff", cf.pass,
                    cf.discrepancy, r.cfg.thresholds.sigma_multiple * cf.stderr_ + cf.cutoff_allowance);
        }
    }

    const auto replicas = static_cast<std::size_t>(r.c.number("sim.coupled_replicas", 0));
    if (replicas > 0) {
        const double lip = r.c.number("sim.lipschitz", std::abs(r.c.number("drift.amplitude", 0.5)));
        const auto cd = sde::coupled_divergence(sim, r.c.number("sim.coupled_delta", 1e-8), replicas, lip);
        r.check("coupled separation stays finite", cd.finite, cd.max_separation, kInf);
        r.check("Gronwall exponent within a factor 2 of Lip(b)", cd.max_exponent >= lip / 2 && cd.max_exponent <= 2 * lip,
                cd.max_exponent, lip);
        CsvWriter w(r.path("coupled.csv"), {"replica", "exponent"});
        for (std::size_t i = 0; i < cd.exponents.size(); ++i) w.row(std::vector<double>{static_cast<double>(i), cd.exponents[i]});
    }
}

pde::AprioriConfig apriori_config(Run& r) {
    pde::AprioriConfig a{make_model(r.c)};
    a.kernel = make_kernel(r.c);
    a.drift = make_drift(r.c);
    a.n_coarse = static_cast<std::size_t>(r.c.number("grid.n", 64));
    a.T = r.c.number("pde.T", 0.5);
    a.dt = r.c.number("pde.dt", 0.01);
    a.lambda = r.c.number("pde.lambda", 1.0);
    a.gamma = r.c.number("pde.gamma", 0.0);
    a.q = r.c.number("pde.q", kInf);
    a.eta = r.c.number("pde.eta", std::numeric_limits<double>::quiet_NaN());
    a.lambdas = r.c.array("pde.lambdas", {1.0, 10.0, 100.0});
    a.sources = static_cast<int>(r.c.number("pde.sources", 10));
    a.source_band = r.c.number("pde.source_band", 6.0);
    a.source_decay = r.c.number("pde.source_decay", 1.0);
    a.seed = r.cfg.seed;
    a.stability_tol = r.cfg.thresholds.refinement;
    a.drift_smallness = r.c.number("pde.drift_smallness", 0.1);
    return a;
}

void run_apriori(Run& r) {
    const auto a = apriori_config(r);
    const auto rep = pde::verify_apriori(a);
    r.check("ratio stable under one grid refinement", rep.refinement_stable, rep.relative_change, a.stability_tol,
            "coarse " + fmt(rep.ratio_coarse) + " fine " + fmt(rep.ratio_fine));
    r.check("lower-order norm strictly decreasing in lambda", rep.lambda_decreasing,
            rep.lambda_ratios.empty() ? 0.0 : rep.lambda_ratios.back(), rep.lambda_ratios.empty() ? 0.0 : rep.lambda_ratios.front());
    for (const auto& w : rep.warnings) r.info("warning", 0.0, w);
    {
        CsvWriter w(r.path("apriori.csv"), {"ratio_coarse", "ratio_fine", "relative_change", "skipped_zero_sources"});
        w.row(std::vector<double>{rep.ratio_coarse, rep.ratio_fine, rep.relative_change, static_cast<double>(rep.skipped_zero_sources)});
    }
    Series s{"ratio", rep.lambdas, rep.lambda_ratios};
    {
        CsvWriter w(r.path("lambda_sweep.csv"), {"lambda", "ratio"});
        for (std::size_t i = 0; i < rep.lambdas.size(); ++i) w.row(std::vector<double>{rep.lambdas[i], rep.lambda_ratios[i]});
    }
    write_svg_plot(r.path("ratio_vs_lambda.svg"), {"lower-order ratio vs lambda", "lambda", "ratio", true, true}, {s});
    if (a.model.alpha() == 1.0) {
        const auto h = pde::verify_h1q(a);
        r.check("H^{1,q} ratio stable under one grid refinement", h.refinement_stable, h.relative_change, a.stability_tol,
                "coarse " + fmt(h.ratio_coarse) + " fine " + fmt(h.ratio_fine));
    }
}

void run_krylov(Run& r) {
    const auto model = make_model(r.c);
    const int d = model.dim();
    const GridSpec grid = make_grid(r.c, d);
    const auto sf = source_fn(r.c);
    const auto src = sde::sample_source(sf.fn, grid, sf.time_independent);
    const double q = r.c.number("verify.q", 2.0);
    const auto xs = x_grid(r.c, d);
    auto cfg = r.sim();
    const auto kernel = make_kernel(r.c);
    const auto drift = make_drift(r.c);
    const sde::Simulator s1(model, kernel, drift, cfg);
    const auto a = sde::krylov_estimate(s1, src, grid, xs, q);
    cfg.n_paths *= 4;
    const sde::Simulator s4(model, kernel, drift, cfg);
    const auto b = sde::krylov_estimate(s4, src, grid, xs, q);
    sde::write_mc_csv(a.rows, r.path("krylov_n.csv"));
    sde::write_mc_csv(b.rows, r.path("krylov_4n.csv"));
    if (sf.constant) {
        double worst = 0.0;
        for (const auto& row : b.rows) worst = std::max(worst, std::abs(row.estimate - sf.value * cfg.T));
        r.check("constant source gives exactly c T", worst <= 1e-12 * std::max(1.0, std::abs(sf.value * cfg.T)), worst, 0.0);
    }
    const double change = std::abs(b.ratio - a.ratio) / std::max(std::abs(a.ratio), 1e-300);
    r.check("sup_x ratio to ||f||_{B^0_{q,inf}} stable as paths quadruple", change <= r.cfg.thresholds.refinement, change,
            r.cfg.thresholds.refinement, "ratio " + fmt(a.ratio) + " -> " + fmt(b.ratio));
    CsvWriter w(r.path("krylov.csv"), {"paths", "sup_estimate", "f_norm", "ratio"});
    w.row(std::vector<double>{static_cast<double>(s1.config().n_paths), a.sup_estimate, a.f_norm, a.ratio});
    w.row(std::vector<double>{static_cast<double>(s4.config().n_paths), b.sup_estimate, b.f_norm, b.ratio});
}

void run_feynman_kac(Run& r) {
    const auto model = make_model(r.c);
    const int d = model.dim();
    const GridSpec grid = make_grid(r.c, d);
    const auto sf = source_fn(r.c);
    const sde::Simulator sim(model, make_kernel(r.c), make_drift(r.c), r.sim());
    const auto xs = x_grid(r.c, d);
    const auto rep = sde::feynman_kac_check(sim, sf.fn, sf.time_independent, grid, xs);
    Series disc{"|u - MC|", {}, {}}, allow{"3 SE + allowance", {}, {}};
    CsvWriter w(r.path("feynman_kac.csv"), {"x", "pde_value", "mc_estimate", "mc_stderr", "discrepancy", "allowance", "pass"});
    double worst = 0.0;
    for (const auto& row : rep.rows) {
        w.row({fmt(row.x[0]), fmt(row.pde_value), fmt(row.mc_estimate), fmt(row.mc_stderr), fmt(row.discrepancy),
               fmt(row.allowance), row.pass ? "1" : "0"});
        const double tol = r.cfg.thresholds.sigma_multiple * row.mc_stderr + row.allowance;
        worst = std::max(worst, row.discrepancy / std::max(tol, 1e-300));
        disc.x.push_back(row.x[0]), disc.y.push_back(row.discrepancy);
        allow.x.push_back(row.x[0]), allow.y.push_back(tol);
    }
    r.check("|u(0,x) - MC| <= 3 SE + allowance on the x-grid", rep.pass, worst, 1.0, "largest discrepancy / tolerance");
    r.info("allowance parts", rep.time_allowance,
           "time " + fmt(rep.time_allowance) + " pde " + fmt(rep.pde_allowance) + " cutoff " + fmt(rep.cutoff_allowance));
    for (const auto& m : rep.warnings) r.info("warning", 0.0, m);
    write_svg_plot(r.path("feynman_kac.svg"), {"Feynman-Kac discrepancy", "x", "value", false, false}, {disc, allow});
}

void run_zvonkin(Run& r) {
    const auto model = make_model(r.c);
    const int d = model.dim();
    const GridSpec grid = make_grid(r.c, d);
    const auto kernel = make_kernel(r.c);
    const auto drift = make_drift(r.c);
    auto cfg = r.sim();
    cfg.n_paths = static_cast<std::size_t>(r.c.number("zvonkin.replicas", 8));
    zvonkin::BuildOptions opt;
    opt.lambda_schedule = r.c.array("zvonkin.lambdas", opt.lambda_schedule);
    opt.T = cfg.T;
    opt.dt = cfg.dt;
    opt.evaluate_all = r.c.flag("zvonkin.evaluate_all", false);
    opt.interpolation = r.c.text("zvonkin.interpolation", "spectral") == "cubic" ? zvonkin::Interpolation::cubic
                                                                               : zvonkin::Interpolation::spectral;
    opt.exec = r.exec();
    std::vector<std::string> warnings;
    const auto map = zvonkin::build(model, kernel, drift, grid, opt, &warnings);
    for (const auto& w : warnings) r.info("warning", 0.0, w);
    r.check("smallness certificate ||u||_inf + ||grad u||_inf <= 1/2", map.certified(), map.certificate(), 0.5,
            "lambda = " + fmt(map.lambda()));
    {
        Series cert{"certificate", {}, {}};
        CsvWriter w(r.path("schedule.csv"), {"lambda", "u_sup", "grad_sup", "certificate"});
        for (const auto& e : map.schedule()) {
            w.row(std::vector<double>{e.lambda, e.u_sup, e.grad_sup, e.certificate});
            cert.x.push_back(e.lambda), cert.y.push_back(e.certificate);
        }
        write_svg_plot(r.path("certificate_vs_lambda.svg"), {"certificate vs lambda", "lambda", "||u|| + ||grad u||", true, true},
                       {cert});
    }
    auto rng = RngStream::derive(r.cfg.seed, 0x5a);
    const auto bl = zvonkin::bilipschitz_check(map, static_cast<std::size_t>(r.c.number("verify.pairs", 10000)), rng);
    r.check("bi-Lipschitz: 1/2 <= |Phi(x)-Phi(y)|/|x-y| <= 3/2 and inverse within [1/2, 2]", bl.pass, bl.max_ratio, 1.5,
            "ratio [" + fmt(bl.min_ratio) + ", " + fmt(bl.max_ratio) + "] inverse [" + fmt(bl.min_inv_ratio) + ", " +
                fmt(bl.max_inv_ratio) + "] round trip " + fmt(bl.max_roundtrip));

    const auto t1 = zvonkin::verify_transform(model, kernel, drift, map, cfg);
    auto opt2 = opt;
    opt2.dt = cfg.dt / 2;
    opt2.lambda_schedule = {map.lambda()};
    const auto map2 = zvonkin::build(model, kernel, drift, grid, opt2);
    auto cfg2 = cfg;
    cfg2.dt = cfg.dt / 2;
    const auto t2 = zvonkin::verify_transform(model, kernel, drift, map2, cfg2);
    const double ratio = t2.max_discrepancy / std::max(t1.max_discrepancy, 1e-300);
    r.check("max_t |Phi(X_t) - Y_t| halves under dt-halving (+-30%)", std::abs(ratio - 0.5) <= 0.15, ratio, 0.5,
            "discrepancy " + fmt(t1.max_discrepancy) + " -> " + fmt(t2.max_discrepancy));
    Series disc{"max discrepancy", {t1.dt, t2.dt}, {t1.max_discrepancy, t2.max_discrepancy}};
    {
        CsvWriter w(r.path("discrepancy.csv"), {"dt", "max_discrepancy", "mean_discrepancy", "replicas"});
        for (const auto* t : {&t1, &t2})
            w.row(std::vector<double>{t->dt, t->max_discrepancy, t->mean_discrepancy, static_cast<double>(t->replicas)});
    }
    write_svg_plot(r.path("discrepancy_vs_dt.svg"), {"transformed dynamics discrepancy", "dt", "max |Phi(X) - Y|", true, true},
                   {disc});
    map.save(r.dir + "/map");
    r.files.push_back("map/manifest.txt");
}

std::pair<int, int> j_range(const Config& c, int lo, int hi) {
    return {static_cast<int>(c.number("verify.j_min", lo)), static_cast<int>(c.number("verify.j_max", hi))};
}

void fitted_constants(Run& r, const std::string& stem, const std::string& label, const std::vector<double>& js,
                      const std::vector<double>& cs, bool all_negative, double worst) {
    r.check("all values strictly negative", all_negative, worst, 0.0, "largest value");
    const double mx = *std::max_element(cs.begin(), cs.end()), mn = *std::min_element(cs.begin(), cs.end());
    r.check("fitted " + label + " stable across j", mn > 0.0 && mx / mn <= r.cfg.thresholds.stability_factor, mx / mn,
            r.cfg.thresholds.stability_factor, "range [" + fmt(mn) + ", " + fmt(mx) + "]");
    CsvWriter w(r.path(stem + "_fit.csv"), {"j", label});
    for (std::size_t i = 0; i < js.size(); ++i) w.row(std::vector<double>{js[i], cs[i]});
    write_svg_plot(r.path(stem + ".svg"), {"fitted " + label + " vs j", "j", label, false, false}, {{label, js, cs}});
}

void run_maxprinciple(Run& r) {
    const auto model = make_model(r.c);
    const double kappa = r.c.number("verify.kappa", 1.0);
    const int trials = static_cast<int>(r.c.number("verify.trials", 100));
    const auto [jlo, jhi] = j_range(r.c, 2, 5);
    std::vector<double> js, cs;
    double worst = -kInf;
    CsvWriter w(r.path("maxprinciple.csv"), {"j", "trial", "value"});
    for (int j = jlo; j <= jhi; ++j) {
        auto rng = RngStream::derive(r.cfg.seed, static_cast<std::uint64_t>(j));
        const auto v = nonlocal::maxprinciple_check(model, kappa, j, trials, rng);
        for (std::size_t i = 0; i < v.size(); ++i) w.row(std::vector<double>{static_cast<double>(j), static_cast<double>(i), v[i]});
        const double top = *std::max_element(v.begin(), v.end());
        worst = std::max(worst, top);
        js.push_back(j);
        cs.push_back(-top);
    }
    fitted_constants(r, "maxprinciple", "c", js, cs, worst < 0.0, worst);
}

void run_coercivity(Run& r) {
    const auto model = make_model(r.c);
    const GridSpec grid = make_grid(r.c, model.dim());
    const lp::DyadicPartition part(grid);
    const nonlocal::Generator gen(model, grid);
    const double kappa = r.c.number("verify.kappa", 1.0);
    const double p = r.c.number("verify.p", 2.0);
    const int trials = static_cast<int>(r.c.number("verify.trials", 100));
    const auto [jlo, jhi] = j_range(r.c, 2, 5);
    std::vector<double> js, cs;
    double worst = -kInf;
    CsvWriter w(r.path("coercivity.csv"), {"j", "trial", "lhs", "rhs_scale", "ratio"});
    for (int j = jlo; j <= jhi; ++j) {
        auto rng = RngStream::derive(r.cfg.seed, static_cast<std::uint64_t>(j));
        double c0 = kInf;
        for (int t = 0; t < trials; ++t) {
            const auto f = lp::random_field(grid, rng, std::ldexp(1.0, j - 1), std::ldexp(1.0, j + 1));
            try {
                const auto v = nonlocal::coercivity_check(f, j, p, gen, kappa, part);
                w.row(std::vector<double>{static_cast<double>(j), static_cast<double>(t), v.lhs, v.rhs_scale, v.lhs / v.rhs_scale});
                worst = std::max(worst, v.lhs);
                c0 = std::min(c0, -v.lhs / v.rhs_scale);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::undefined_ratio) throw;
            }
        }
        js.push_back(j);
        cs.push_back(c0);
    }
    fitted_constants(r, "coercivity", "C0", js, cs, worst < 0.0, worst);
}

void run_commutator(Run& r) {
    const auto model = make_model(r.c);
    const GridSpec grid = make_grid(r.c, model.dim());
    const lp::DyadicPartition part(grid);
    const nonlocal::Generator gen(model, grid);
    const auto kernel = make_kernel(r.c);
    const double thetabar = r.c.number("verify.thetabar", 1.0);
    const double gamma = r.c.number("verify.gamma", 0.5);
    const double p = r.c.number("verify.p", kInf);
    const int trials = static_cast<int>(r.c.number("verify.trials", 10));
    const auto [jlo, jhi] = j_range(r.c, 2, std::min(6, part.j_max()));
    const double rate = kernel.theta - thetabar + gamma;
    const double s = model.alpha() - thetabar + gamma;
    std::vector<double> js, cs;
    CsvWriter w(r.path("commutator.csv"), {"j", "trial", "norm", "scaled"});
    std::vector<GridField> us;
    std::vector<double> un;
    for (int t = 0; t < trials; ++t) {
        auto rng = RngStream::derive(r.cfg.seed, static_cast<std::uint64_t>(t));
        us.push_back(lp::random_field(grid, rng, 1, grid.n / 2.0 - 1.0, 1.0));
        un.push_back(lp::besov_norm(us.back(), s, p, kInf, part));
    }
    const double k2 = std::max(kernel.kappa2, 1e-300);
    for (int j = jlo; j <= jhi; ++j) {
        double c = 0.0;
        for (int t = 0; t < trials; ++t) {
            const double n = nonlocal::commutator_op(j, us[static_cast<std::size_t>(t)], gen, kernel, thetabar, gamma, p, part).norm;
            const double scaled = std::pow(2.0, rate * j) * n / (k2 * un[static_cast<std::size_t>(t)]);
            w.row(std::vector<double>{static_cast<double>(j), static_cast<double>(t), n, scaled});
            c = std::max(c, scaled);
        }
        js.push_back(j);
        cs.push_back(c);
    }
    const double slope = lp::fit_log2_slope(js, cs).slope;
    r.check("scaled commutator constant bounded in j (log2 slope <= 0.25)", slope <= 0.25, slope, 0.25,
            "rate " + fmt(rate) + ", max constant " + fmt(*std::max_element(cs.begin(), cs.end())));
    CsvWriter f(r.path("commutator_fit.csv"), {"j", "C"});
    for (std::size_t i = 0; i < js.size(); ++i) f.row(std::vector<double>{js[i], cs[i]});
    write_svg_plot(r.path("commutator.svg"), {"scaled commutator constant vs j", "j", "C", false, true}, {{"C_j", js, cs}});
}

void run_regime_study(Run& r) {
    RegimeStudyConfig rc{make_model(r.c), make_kernel(r.c), 0.5, 0.5, {}, make_grid(r.c, 1), r.sim()};
    rc.beta = r.c.number("drift.beta", 0.5);
    rc.amplitude = r.c.number("drift.amplitude", 0.5);
    rc.levels.clear();
    for (double l : r.c.array("regime.levels", {0, 1, 2, 3, 4, 5})) rc.levels.push_back(static_cast<int>(l));
    const auto rep = regime_study(rc);
    const double n = static_cast<double>(rc.sim.n_paths);
    const double crit = std::sqrt(-0.5 * std::log(r.cfg.thresholds.p_value / 2.0)) * std::sqrt(2.0 / n);
    Series ks{"KS distance", {}, {}}, cv{"KS critical value", {}, {}};
    CsvWriter w(r.path("regime_study.csv"), {"level", "next_level", "ks", "critical_value"});
    for (std::size_t i = 0; i < rep.ks.size(); ++i) {
        w.row(std::vector<double>{static_cast<double>(rep.levels[i]), static_cast<double>(rep.levels[i + 1]), rep.ks[i], crit});
        ks.x.push_back(rep.levels[i]), ks.y.push_back(rep.ks[i]);
        cv.x.push_back(rep.levels[i]), cv.y.push_back(crit);
    }
    write_svg_plot(r.path("regime_study.svg"), {"KS distance between successive mollifications", "level", "KS", false, true},
                   {ks, cv});
    const std::string regime = regime_name(rep.regime.regime) + (rep.regime.balance ? ", balance" : ", no balance");
    if (rep.descriptive)
        r.info("KS distance trend (descriptive: alpha + beta < 1)", rep.slope, regime);
    else
        r.check("KS distance decreases under mollification refinement", rep.decreasing, rep.slope, 0.0,
                regime + "; first " + fmt(rep.ks.front()) + " last " + fmt(rep.ks.back()));
}

bool uses_model(Kind k) { return k != Kind::lp; }

void write_manifest(const ExperimentConfig& cfg, const std::string& dir, const std::vector<std::string>& files,
                    const std::vector<Check>& checks, const std::string& status) {
    nlohmann::ordered_json m;
    m["tool"] = "levylab";
    m["version"] = kVersion;
    m["experiment"] = kind_name(cfg.kind);
    m["title"] = experiment_title(cfg.kind);
    m["config_hash"] = "fnv1a64:" + hex64(fnv1a64(cfg.raw.canonical()));
    m["seed"] = cfg.seed;
    m["status"] = status;
    m["compiler"] = __VERSION__;
    m["fftw"] = std::string(fftw_version);
    m["files"] = files;
    auto arr = nlohmann::ordered_json::array();
    for (const auto& c : checks) arr.push_back({{"check", c.name}, {"status", status_name(c.status)}});
    m["checks"] = arr;
    std::ofstream out(dir + "/manifest.json", std::ios::binary);
    if (!out) fail(ErrorCode::io, "cannot write manifest in " + dir);
    out << m.dump(2) << "\n";
}

void write_error(const ExperimentConfig& cfg, const std::string& dir, const std::string& code, const std::string& message,
                 double detail) {
    nlohmann::ordered_json e;
    e["experiment"] = kind_name(cfg.kind);
    e["code"] = code;
    e["message"] = message;
    e["detail"] = std::isfinite(detail) ? nlohmann::ordered_json(detail) : nlohmann::ordered_json(nullptr);
    e["config_hash"] = "fnv1a64:" + hex64(fnv1a64(cfg.raw.canonical()));
    e["seed"] = cfg.seed;
    std::ofstream out(dir + "/error.json", std::ios::binary);
    out << e.dump(2) << "\n";
}

} // namespace

void write_error_record(const ExperimentConfig& config, const Error& error) {
    ensure_directory(config.out_dir);
    write_error(config, config.out_dir, std::string(to_string(error.code())), error.what(), error.detail());
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    ExperimentResult result;
    try {
        ensure_directory(config.out_dir);
    } catch (const Error& e) {
        result.exit_code = 1;
        result.error = e.what();
        return result;
    }
    if (config.threads > 0) set_thread_count(config.threads);
    Run run{config, config.raw, config.out_dir, {}, {}};
    try {
        std::vector<Check> hypotheses;
        if (uses_model(config.kind)) {
            const auto h = hypothesis_check(make_model(run.c), make_kernel(run.c), make_drift(run.c),
                                            static_cast<std::size_t>(run.c.number("verify.hypothesis_samples", 2000)),
                                            config.seed);
            hypotheses = h.checks;
        }
        switch (config.kind) {
        case Kind::symbol: run_symbol(run); break;
        case Kind::lp: run_lp(run); break;
        case Kind::pde: run_pde(run); break;
        case Kind::simulate: run_simulate(run); break;
        case Kind::verify_apriori: run_apriori(run); break;
        case Kind::verify_krylov: run_krylov(run); break;
        case Kind::verify_feynman_kac: run_feynman_kac(run); break;
        case Kind::verify_zvonkin: run_zvonkin(run); break;
        case Kind::verify_maxprinciple: run_maxprinciple(run); break;
        case Kind::verify_coercivity: run_coercivity(run); break;
        case Kind::verify_commutator: run_commutator(run); break;
        case Kind::regime_study: run_regime_study(run); break;
        }
        if (!hypotheses.empty()) write_checks(run.path("hypotheses.csv"), "structural hypotheses", hypotheses);
        write_checks(run.path("summary.csv"), experiment_title(config.kind), run.checks);
        const bool warn = std::any_of(run.checks.begin(), run.checks.end(), [](const Check& c) { return c.status == Status::warn; });
        result.exit_code = warn ? 2 : 0;
        write_manifest(config, config.out_dir, run.files, run.checks, warn ? "WARN" : "PASS");
    } catch (const Error& e) {
        result.exit_code = 1;
        result.error = e.what();
        write_error(config, config.out_dir, std::string(to_string(e.code())), e.what(), e.detail());
    } catch (const std::exception& e) {
        result.exit_code = 1;
        result.error = e.what();
        write_error(config, config.out_dir, "internal", e.what(), std::numeric_limits<double>::quiet_NaN());
    }
    result.checks = std::move(run.checks);
    result.files = std::move(run.files);
    return result;
}

} // namespace levylab::harness
