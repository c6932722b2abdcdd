#include "levylab/pde/solver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "levylab/core/error.hpp"

namespace levylab::pde {
namespace {

constexpr double kPicardTol = 1e-10;
constexpr int kMaxPicard = 60;
constexpr int kMaxHalvings = 8;

cplx phi1(cplx z) {
    if (std::abs(z) < 1e-5) return 1.0 + z * (0.5 + z / 6.0);
    return (std::exp(z) - 1.0) / z;
}

bool all_finite(const GridField& u) {
    return std::all_of(u.values().begin(), u.values().end(), [](double v) { return std::isfinite(v); });
}

double max_drift(const DriftField& drift, const GridSpec& spec, double t) {
    if (drift.is_zero) return 0.0;
    std::vector<double> x(static_cast<std::size_t>(spec.dim)), b(x.size());
    double m = 0.0;
    for (std::size_t i = 0; i < spec.size(); ++i) {
        spec.point(i, x);
        drift.eval(t, x, b);
        double s = 0.0;
        for (double c : b) s += c * c;
        m = std::max(m, std::sqrt(s));
    }
    return m;
}

/// Exponential-Euler stepper for one problem.
class Stepper {
public:
    explicit Stepper(const PdeProblem& p)
        : p_(p),
          gen_(*p.generator),
          spec_(gen_.grid()),
          kappa0_(std::isnan(p.reference_kappa) ? p.kernel.kappa0 : p.reference_kappa),
          partition_(spec_) {
        psi_.assign(gen_.symbol_table().begin(), gen_.symbol_table().end());
        kernel_is_reference_ = !p.kernel.depends_on_x && !p.kernel.depends_on_z;
    }

    const GridSpec& spec() const { return spec_; }

    /// Physical time of integration time s.
    double physical(double s) const { return p_.direction == Direction::forward ? s : p_.T - s; }

    struct Tables {
        std::vector<cplx> e, p;
    };
    const Tables& tables(double dt) {
        for (auto& [h, t] : cache_)
            if (h == dt) return t;
        Tables t;
        t.e.resize(psi_.size());
        t.p.resize(psi_.size());
        for (std::size_t i = 0; i < psi_.size(); ++i) {
            const cplx z = (kappa0_ * psi_[i] - p_.lambda) * dt;
            t.e[i] = std::exp(z);
            t.p[i] = dt * phi1(z);
        }
        cache_.emplace_back(dt, std::move(t));
        return cache_.back().second;
    }

    /// Explicit part (L^sigma - kappa0 L_nu) u + b.grad u + f at physical time t.
    GridField explicit_part(const GridField& u, double t, double& remainder) {
        GridField n = p_.source.at(t);
        if (!kernel_is_reference_ || p_.kernel(t, zero_point(), zero_point()) != kappa0_) {
            auto r = gen_.apply_jump(u, p_.kernel, t, p_.exec);
            remainder = std::max(remainder, r.remainder_bound);
            n = n + r.value - gen_.apply_reference(u, kappa0_);
        }
        if (!p_.drift.is_zero) n = n + nonlocal::drift_term(u, p_.drift, t);
        return n;
    }

    GridField combine(const GridField& u, const GridField& n, const Tables& tab) const {
        const auto cu = u.spectrum();
        const auto cn = n.spectrum();
        std::vector<cplx> out(cu.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = tab.e[i] * cu[i] + tab.p[i] * cn[i];
        return GridField::from_spectrum(spec_, out);
    }

    GridField linear_step(const GridField& u, double s, double dt, double& remainder) {
        return combine(u, explicit_part(u, physical(s), remainder), tables(dt));
    }

    /// Picard iteration on the implicit kappa |grad u| term; returns false on non-contraction.
    bool picard_step(const GridField& u, double s, double dt, double& remainder, GridField& out, int& iterations) {
        const GridField lin = explicit_part(u, physical(s), remainder);
        const Tables& tab = tables(dt);
        GridField cur = combine(u, lin + lp::gradient_norm(u) * p_.quasilinear_kappa, tab);
        double prev_diff = std::numeric_limits<double>::infinity();
        for (int k = 1; k <= kMaxPicard; ++k) {
            GridField next = combine(u, lin + lp::gradient_norm(cur) * p_.quasilinear_kappa, tab);
            const double diff = (next - cur).max_abs();
            cur = std::move(next);
            iterations = std::max(iterations, k);
            if (!std::isfinite(diff)) return false;
            if (diff <= kPicardTol * std::max(1.0, cur.max_abs())) {
                out = std::move(cur);
                return true;
            }
            if (k > 2 && diff > 0.9 * prev_diff) return false;
            prev_diff = diff;
        }
        return false;
    }

    GridField quasilinear_step(const GridField& u, double s, double dt, double& remainder, int level, PdeSolution& sol) {
        GridField out;
        int iterations = 0;
        if (picard_step(u, s, dt, remainder, out, iterations)) {
            sol.max_picard_iterations = std::max(sol.max_picard_iterations, iterations);
            return out;
        }
        if (level >= kMaxHalvings)
            fail(ErrorCode::instability, "Picard iteration does not contract after 8 step halvings", s);
        ++sol.step_halvings;
        const GridField half = quasilinear_step(u, s, 0.5 * dt, remainder, level + 1, sol);
        return quasilinear_step(half, s + 0.5 * dt, 0.5 * dt, remainder, level + 1, sol);
    }

    double besov_ratio(const GridField& u, double t) {
        const double alpha = gen_.model().alpha();
        const GridField f = p_.source.at(t);
        const double denom = lp::besov_norm(f, p_.diag_gamma, p_.diag_q, INFINITY, partition_);
        if (!(denom > 0.0)) return 0.0;
        return lp::besov_norm(u, alpha + p_.diag_gamma, p_.diag_q, INFINITY, partition_) / denom;
    }

private:
    std::span<const double> zero_point() {
        zero_.assign(static_cast<std::size_t>(spec_.dim), 0.0);
        return zero_;
    }

    const PdeProblem& p_;
    const Generator& gen_;
    GridSpec spec_;
    double kappa0_;
    lp::DyadicPartition partition_;
    std::vector<cplx> psi_;
    bool kernel_is_reference_ = false;
    std::vector<std::pair<double, Tables>> cache_;
    std::vector<double> zero_;
};

void validate_problem(const PdeProblem& p) {
    if (!p.generator) fail(ErrorCode::configuration, "problem has no generator");
    if (!p.source.at) fail(ErrorCode::configuration, "problem has no source");
    if (!(p.T > 0.0)) fail(ErrorCode::configuration, "T must be positive");
    if (!(p.dt > 0.0)) fail(ErrorCode::configuration, "dt must be positive");
    if (p.lambda < 0.0) fail(ErrorCode::configuration, "lambda must be >= 0");
    if (p.quasilinear_kappa < 0.0) fail(ErrorCode::configuration, "quasi-linear kappa must be >= 0");
    if (p.save_every < 1) fail(ErrorCode::configuration, "save_every must be >= 1");
    p.generator->model().require_supported_regime();
    const auto& spec = p.generator->grid();
    double bmax = 0.0;
    for (double t : {0.0, 0.5 * p.T, p.T}) bmax = std::max(bmax, max_drift(p.drift, spec, t));
    if (bmax > 0.0 && p.dt > p.c_cfl * spec.spacing() / bmax)
        fail(ErrorCode::configuration, "time step violates the CFL bound dt <= c h / max|b|", p.c_cfl * spec.spacing() / bmax);
}

PdeSolution run(const PdeProblem& p, bool quasilinear) {
    validate_problem(p);
    Stepper st(p);
    const int steps = std::max(1, static_cast<int>(std::ceil(p.T / p.dt - 1e-9)));
    const double dt = p.T / steps;
    PdeSolution sol;
    sol.direction = p.direction;
    GridField u(st.spec(), 0.0);
    auto record = [&](double s, double remainder) {
        const double t = st.physical(s);
        sol.times.push_back(t);
        sol.snapshots.push_back(u);
        if (p.diagnostics) sol.diagnostics.push_back({t, st.besov_ratio(u, t), remainder, dt});
    };
    record(0.0, 0.0);
    for (int n = 0; n < steps; ++n) {
        const double s = n * dt;
        double remainder = 0.0;
        u = quasilinear ? st.quasilinear_step(u, s, dt, remainder, 0, sol) : st.linear_step(u, s, dt, remainder);
        if (!all_finite(u)) fail(ErrorCode::instability, "non-finite value at step " + std::to_string(n + 1), n + 1);
        if ((n + 1) % p.save_every == 0 || n + 1 == steps) record((n + 1) * dt, remainder);
    }
    if (p.direction == Direction::backward) {
        std::reverse(sol.times.begin(), sol.times.end());
        std::reverse(sol.snapshots.begin(), sol.snapshots.end());
        std::reverse(sol.diagnostics.begin(), sol.diagnostics.end());
    }
    return sol;
}

} // namespace

Source Source::constant(GridField f) {
    Source s;
    s.at = [f = std::move(f)](double) { return f; };
    s.time_independent = true;
    return s;
}

Source Source::zero(const GridSpec& spec) { return constant(GridField(spec, 0.0)); }

Source Source::snapshots(std::vector<double> times, std::vector<GridField> fields) {
    if (times.empty() || times.size() != fields.size()) fail(ErrorCode::invalid_argument, "source snapshot mismatch");
    Source s;
    s.at = [times = std::move(times), fields = std::move(fields)](double t) {
        if (t <= times.front()) return fields.front();
        if (t >= times.back()) return fields.back();
        const auto it = std::upper_bound(times.begin(), times.end(), t);
        const auto i = static_cast<std::size_t>(std::distance(times.begin(), it)) - 1;
        const double w = (t - times[i]) / (times[i + 1] - times[i]);
        return fields[i] * (1.0 - w) + fields[i + 1] * w;
    };
    return s;
}

GridField PdeSolution::at(double t) const {
    if (snapshots.empty()) fail(ErrorCode::invalid_argument, "empty solution");
    if (t <= times.front()) return snapshots.front();
    if (t >= times.back()) return snapshots.back();
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const auto i = static_cast<std::size_t>(std::distance(times.begin(), it)) - 1;
    const double w = (t - times[i]) / (times[i + 1] - times[i]);
    return snapshots[i] * (1.0 - w) + snapshots[i + 1] * w;
}

PdeSolution solve(const PdeProblem& problem) {
    if (problem.quasilinear_kappa > 0.0) return run(problem, true);
    return run(problem, false);
}

PdeSolution solve_quasilinear(const PdeProblem& problem) {
    return run(problem, problem.quasilinear_kappa > 0.0);
}

void write_diagnostics_csv(const PdeSolution& solution, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::io, "cannot write " + path);
    out << "t,besov_ratio,remainder_bound,dt\r\n" << std::setprecision(17);
    for (const auto& r : solution.diagnostics)
        out << r.t << ',' << r.besov_ratio << ',' << r.remainder_bound << ',' << r.dt << "\r\n";
}

// ---------------------------------------------------------------------------

namespace {

/// Same physical random source on any grid fine enough to hold its band.
GridField band_source(const GridSpec& spec, std::uint64_t seed, std::uint64_t index, double band, double decay) {
    auto rng = RngStream::derive(seed, index);
    const int b = static_cast<int>(std::floor(band));
    const auto d = static_cast<std::size_t>(spec.dim);
    std::vector<cplx> c(spec.size(), cplx(0.0, 0.0));
    std::vector<int> k(d, -b);
    const auto n = static_cast<long>(spec.n);
    if (2 * b >= n) fail(ErrorCode::resolution, "source band exceeds the grid");
    while (true) {
        double kn = 0.0;
        for (int v : k) kn += static_cast<double>(v) * v;
        kn = std::sqrt(kn);
        const double g1 = rng.normal(), g2 = rng.normal();
        if (kn >= 1.0 && kn <= band) {
            std::size_t idx = 0;
            for (std::size_t a = 0; a < d; ++a) idx = idx * spec.n + static_cast<std::size_t>((k[a] + n) % n);
            c[idx] = std::pow(kn, -decay) * cplx(g1, g2);
        }
        std::size_t a = d;
        while (a > 0) {
            --a;
            if (++k[a] <= b) break;
            k[a] = -b;
            if (a == 0) return GridField::from_spectrum(spec, c);
        }
    }
}

void regime_warnings(const AprioriConfig& c, std::vector<std::string>& warnings) {
    const double alpha = c.model.alpha();
    const double beta = c.drift.beta;
    const int d = c.model.dim();
    if (!c.drift.is_zero) {
        if (!(beta > 1.0 - alpha)) warnings.push_back("drift regularity beta <= 1 - alpha");
        if (alpha + beta - 1.0 > 0.0 && !(c.drift.p > d / (alpha + beta - 1.0)))
            warnings.push_back("drift integrability p <= d / (alpha + beta - 1)");
    }
    if (!(c.lambda > 0.0)) warnings.push_back("lambda-decay reports need lambda > 0");
}

PdeProblem base_problem(const AprioriConfig& c, std::shared_ptr<const Generator> gen, double lambda, Source src) {
    PdeProblem p;
    p.direction = Direction::forward;
    p.lambda = lambda;
    p.generator = std::move(gen);
    p.kernel = c.kernel;
    p.drift = c.drift;
    p.source = std::move(src);
    p.T = c.T;
    p.dt = c.dt;
    p.diagnostics = false;
    return p;
}

double besov_sup(const std::vector<GridField>& fields, double beta, double q, const lp::DyadicPartition& part) {
    double m = 0.0;
    for (const auto& f : fields) m = std::max(m, lp::besov_norm(f, beta, q, INFINITY, part));
    return m;
}

} // namespace

AprioriReport verify_apriori(const AprioriConfig& c) {
    AprioriReport rep;
    regime_warnings(c, rep.warnings);
    const double alpha = c.model.alpha();
    const double eta = std::isnan(c.eta) ? c.gamma + 0.5 * alpha : c.eta;
    if (!(eta < alpha + c.gamma)) rep.warnings.push_back("eta >= alpha + gamma in the lambda sweep");
    const int d = c.model.dim();
    const GridSpec coarse{d, c.n_coarse, 2.0 * M_PI};
    const GridSpec fine{d, 2 * c.n_coarse, 2.0 * M_PI};
    auto gen_c = std::make_shared<const Generator>(c.model, coarse);
    auto gen_f = std::make_shared<const Generator>(c.model, fine);
    const lp::DyadicPartition part_c(coarse), part_f(fine);

    for (int i = 0; i < c.sources; ++i) {
        const auto idx = static_cast<std::uint64_t>(i);
        const GridField fc = band_source(coarse, c.seed, idx, c.source_band, c.source_decay);
        const GridField ff = band_source(fine, c.seed, idx, c.source_band, c.source_decay);
        const double nc = lp::besov_norm(fc, c.gamma, c.q, INFINITY, part_c);
        const double nf = lp::besov_norm(ff, c.gamma, c.q, INFINITY, part_f);
        if (!(nc > 0.0) || !(nf > 0.0)) {
            ++rep.skipped_zero_sources;
            continue;
        }
        const auto sc = solve(base_problem(c, gen_c, c.lambda, Source::constant(fc)));
        const auto sf = solve(base_problem(c, gen_f, c.lambda, Source::constant(ff)));
        rep.ratio_coarse = std::max(rep.ratio_coarse, besov_sup(sc.snapshots, alpha + c.gamma, c.q, part_c) / nc);
        rep.ratio_fine = std::max(rep.ratio_fine, besov_sup(sf.snapshots, alpha + c.gamma, c.q, part_f) / nf);
    }
    rep.relative_change =
        rep.ratio_coarse > 0.0 ? std::abs(rep.ratio_fine - rep.ratio_coarse) / rep.ratio_coarse : 0.0;
    rep.refinement_stable = std::isfinite(rep.ratio_coarse) && std::isfinite(rep.ratio_fine) &&
                            rep.relative_change <= c.stability_tol;

    for (double lambda : c.lambdas) {
        double worst = 0.0;
        for (int i = 0; i < c.sources; ++i) {
            const GridField fc = band_source(coarse, c.seed, static_cast<std::uint64_t>(i), c.source_band, c.source_decay);
            const double nc = lp::besov_norm(fc, c.gamma, c.q, INFINITY, part_c);
            if (!(nc > 0.0)) continue;
            const auto sc = solve(base_problem(c, gen_c, lambda, Source::constant(fc)));
            worst = std::max(worst, besov_sup(sc.snapshots, eta, c.q, part_c) / nc);
        }
        rep.lambdas.push_back(lambda);
        rep.lambda_ratios.push_back(worst);
    }
    rep.lambda_decreasing = true;
    for (std::size_t i = 1; i < rep.lambda_ratios.size(); ++i)
        if (!(rep.lambda_ratios[i] < rep.lambda_ratios[i - 1])) rep.lambda_decreasing = false;
    return rep;
}

double h1q_ratio(const PdeSolution& sol, const Source& source, double q) {
    double dtu = 0.0, h1 = 0.0, f = 0.0;
    for (std::size_t k = 0; k < sol.snapshots.size(); ++k) {
        h1 = std::max(h1, lp::bessel_norm(sol.snapshots[k], 1.0, q));
        f = std::max(f, source.at(sol.times[k]).lp_norm(q));
        if (k + 1 < sol.snapshots.size()) {
            const double h = sol.times[k + 1] - sol.times[k];
            dtu = std::max(dtu, ((sol.snapshots[k + 1] - sol.snapshots[k]) * (1.0 / h)).lp_norm(q));
        }
    }
    if (!(f > 0.0)) return 0.0;
    return (dtu + h1) / f;
}

H1qReport verify_h1q(const AprioriConfig& c) {
    if (c.model.alpha() != 1.0) fail(ErrorCode::precondition, "the H^{1,q} estimate needs alpha = 1");
    if (c.q < 2.0) fail(ErrorCode::precondition, "q must be >= 2");
    H1qReport rep;
    if (c.drift.declared_norm > c.drift_smallness)
        rep.warnings.push_back("||b||_inf above the smallness threshold");
    const int d = c.model.dim();
    const GridSpec coarse{d, c.n_coarse, 2.0 * M_PI};
    const GridSpec fine{d, 2 * c.n_coarse, 2.0 * M_PI};
    auto gen_c = std::make_shared<const Generator>(c.model, coarse);
    auto gen_f = std::make_shared<const Generator>(c.model, fine);
    for (int i = 0; i < c.sources; ++i) {
        const auto idx = static_cast<std::uint64_t>(i);
        const Source sc = Source::constant(band_source(coarse, c.seed, idx, c.source_band, c.source_decay));
        const Source sf = Source::constant(band_source(fine, c.seed, idx, c.source_band, c.source_decay));
        rep.ratio_coarse = std::max(rep.ratio_coarse, h1q_ratio(solve(base_problem(c, gen_c, c.lambda, sc)), sc, c.q));
        rep.ratio_fine = std::max(rep.ratio_fine, h1q_ratio(solve(base_problem(c, gen_f, c.lambda, sf)), sf, c.q));
    }
    rep.relative_change =
        rep.ratio_coarse > 0.0 ? std::abs(rep.ratio_fine - rep.ratio_coarse) / rep.ratio_coarse : 0.0;
    rep.refinement_stable = std::isfinite(rep.ratio_fine) && rep.relative_change <= c.stability_tol;
    return rep;
}

} // namespace levylab::pde
