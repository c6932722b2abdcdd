#include "levylab/sde/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/poisson.hpp>

#include "levylab/core/error.hpp"
#include "levylab/core/quadrature.hpp"

namespace levylab::sde {
namespace {

constexpr double kSigmaSlack = 1e-12;

void validate(const levy::LevyModel& model, const JumpKernel& kernel, const SimConfig& cfg) {
    model.require_supported_regime();
    if (cfg.x0.size() != static_cast<std::size_t>(model.dim()))
        fail(ErrorCode::configuration, "x0 dimension differs from the model dimension");
    if (!(cfg.T > 0.0)) fail(ErrorCode::configuration, "T must be positive");
    if (!(cfg.dt > 0.0)) fail(ErrorCode::configuration, "dt must be positive");
    if (!(cfg.eps > 0.0 && cfg.eps <= 1.0)) fail(ErrorCode::configuration, "jump cutoff must lie in (0,1]");
    if (cfg.thinning_bound < kernel.kappa1)
        fail(ErrorCode::configuration, "thinning bound below the kernel upper bound kappa1", cfg.thinning_bound);
    if (cfg.n_paths == 0) fail(ErrorCode::configuration, "n_paths must be positive");
}

int step_count(double T, double dt) { return std::max(1, static_cast<int>(std::ceil(T / dt - 1e-9))); }

struct NullObserver {
    void start(double, std::span<const double>) {}
    void segment(double, std::span<const double>, double, std::span<const double>) {}
    void event(double, std::size_t, double, bool, std::span<const double>) {}
    void grid(double, std::span<const double>) {}
};

struct RecordObserver : NullObserver {
    const EventStream* ev;
    PathRecord rec;
    void push(double t, std::span<const double> x) {
        rec.times.push_back(t);
        rec.states.emplace_back(x.begin(), x.end());
    }
    void start(double t, std::span<const double> x) { push(t, x); }
    void event(double t, std::size_t e, double, bool accepted, std::span<const double> x) {
        rec.events.push_back({t, ev->z[e], ev->r[e], accepted});
        push(t, x);
    }
    void grid(double t, std::span<const double> x) {
        if (rec.times.back() == t) {
            rec.states.back().assign(x.begin(), x.end());
            return;
        }
        push(t, x);
    }
};

struct IntegralObserver : NullObserver {
    const std::function<double(double, std::span<const double>)>* f;
    std::vector<double> pieces;
    void segment(double t0, std::span<const double> a, double t1, std::span<const double> b) {
        pieces.push_back(0.5 * (t1 - t0) * ((*f)(t0, a) + (*f)(t1, b)));
    }
};

struct TerminalObserver : NullObserver {
    Vec x;
    void grid(double, std::span<const double> s) { x.assign(s.begin(), s.end()); }
};

struct AcceptanceObserver : NullObserver {
    double bound;
    std::size_t accepted = 0;
    double expected = 0.0;
    double variance = 0.0;
    void event(double, std::size_t, double sigma, bool acc, std::span<const double>) {
        const double p = sigma / bound;
        expected += p;
        variance += p * (1.0 - p);
        accepted += acc ? 1 : 0;
    }
};

/// Runs `body(i)` for i in [0, n) and stores the results; parallel order never affects values.
template <class Body>
std::vector<double> per_path(std::size_t n, Exec exec, Body&& body) {
    std::vector<double> out(n);
    const auto count = static_cast<std::ptrdiff_t>(n);
    if (exec == Exec::serial) {
        for (std::ptrdiff_t i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = body(static_cast<std::size_t>(i));
    } else {
#pragma omp parallel for schedule(dynamic, 64)
        for (std::ptrdiff_t i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = body(static_cast<std::size_t>(i));
    }
    return out;
}

std::string join_point(std::span<const double> x) {
    std::ostringstream os;
    os << std::setprecision(17);
    for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ";" : "") << x[i];
    return os.str();
}

} // namespace

// ---------------------------------------------------------------------------

Simulator::Simulator(levy::LevyModel model, JumpKernel kernel, DriftField drift, SimConfig cfg)
    : model_(std::move(model)), kernel_(std::move(kernel)), drift_(std::move(drift)), cfg_(std::move(cfg)),
      sampler_((validate(model_, kernel_, cfg_), model_), cfg_.eps) {
    if (model_.alpha() == 1.0 && cfg_.compensator == CompensatorMode::quadrature && cfg_.eps < 1.0) {
        const double alpha = model_.alpha();
        const auto& rule = quad::gauss16();
        for (const auto& atom : model_.spherical().atoms()) {
            for (double hi = 1.0; hi > cfg_.eps * (1.0 + 1e-12);) {
                const double lo = std::max(0.5 * hi, cfg_.eps);
                const double h = hi - lo;
                for (std::size_t i = 0; i < quad::gauss_points; ++i) {
                    const double r = lo + 0.5 * h * (rule.nodes[i] + 1.0);
                    const double kappa = model_.is_pure_stable() ? 1.0 : model_.profile()(atom.direction, r);
                    CompNode n;
                    n.z.resize(atom.direction.size());
                    for (std::size_t k = 0; k < n.z.size(); ++k) n.z[k] = r * atom.direction[k];
                    n.weight = atom.weight * 0.5 * h * rule.weights[i] * kappa * std::pow(r, -1.0 - alpha);
                    comp_nodes_.push_back(std::move(n));
                }
                hi = lo;
            }
        }
    }
}

EventStream Simulator::events(RngStream& rng) const {
    EventStream ev;
    const double rate = proposal_rate();
    if (!(rate > 0.0)) return ev;
    const auto d = static_cast<std::size_t>(model_.dim());
    double t = rng.exponential(rate);
    while (t <= cfg_.T) {
        ev.t.push_back(t);
        Vec z(d);
        sampler_.sample_into(rng, z);
        ev.z.push_back(std::move(z));
        ev.r.push_back(rng.uniform() * cfg_.thinning_bound);
        t += rng.exponential(rate);
    }
    return ev;
}

void Simulator::compensator(double t, std::span<const double> x, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    for (const auto& n : comp_nodes_) {
        const double w = n.weight * kernel_(t, x, n.z);
        for (std::size_t k = 0; k < out.size(); ++k) out[k] -= w * n.z[k];
    }
}

double Simulator::cutoff_second_moment() const {
    const double a = model_.alpha();
    const double k_high = model_.is_pure_stable() ? 1.0 : model_.profile().kappa_high;
    return model_.spherical().total_mass() * k_high * std::pow(cfg_.eps, 2.0 - a) / (2.0 - a);
}

double Simulator::cutoff_first_moment() const {
    const double a = model_.alpha();
    if (a >= 1.0) return std::numeric_limits<double>::infinity();
    const double k_high = model_.is_pure_stable() ? 1.0 : model_.profile().kappa_high;
    return model_.spherical().total_mass() * k_high * std::pow(cfg_.eps, 1.0 - a) / (1.0 - a);
}

template <class Observer>
void Simulator::integrate(const EventStream& ev, std::span<const double> x0, double dt, Observer& obs) const {
    const std::size_t d = x0.size();
    Vec x(x0.begin(), x0.end()), prev(d), b(d), c(d);
    const bool with_comp = !comp_nodes_.empty();
    const bool with_drift = !drift_.is_zero;
    const int steps = step_count(cfg_.T, dt);
    const double h = cfg_.T / steps;
    obs.start(0.0, x);
    std::size_t e = 0;
    double t = 0.0;
    for (int k = 1; k <= steps; ++k) {
        const double tk = k == steps ? cfg_.T : k * h;
        for (;;) {
            const bool has_event = e < ev.size() && ev.t[e] <= tk;
            const double stop = has_event ? ev.t[e] : tk;
            if (stop > t) {
                prev = x;
                if (with_drift || with_comp) {
                    if (with_drift) drift_.eval(t, x, b);
                    else std::fill(b.begin(), b.end(), 0.0);
                    if (with_comp) {
                        compensator(t, x, c);
                        for (std::size_t a = 0; a < d; ++a) b[a] += c[a];
                    }
                    for (std::size_t a = 0; a < d; ++a) x[a] += (stop - t) * b[a];
                }
                obs.segment(t, prev, stop, x);
                t = stop;
            }
            if (!has_event) break;
            const Vec& z = ev.z[e];
            const double sigma = kernel_(t, x, z);
            if (sigma > cfg_.thinning_bound * (1.0 + kSigmaSlack))
                fail(ErrorCode::contract_violation, "kernel value exceeds the thinning bound", sigma);
            const bool accepted = ev.r[e] <= sigma;
            if (accepted)
                for (std::size_t a = 0; a < d; ++a) x[a] += z[a];
            obs.event(t, e, sigma, accepted, x);
            ++e;
        }
        obs.grid(t, x);
    }
}

PathRecord Simulator::run(const EventStream& ev, std::span<const double> x0) const { return run(ev, x0, cfg_.dt); }

PathRecord Simulator::run(const EventStream& ev, std::span<const double> x0, double dt) const {
    RecordObserver obs;
    obs.ev = &ev;
    integrate(ev, x0, dt, obs);
    return std::move(obs.rec);
}

double Simulator::path_integral(const EventStream& ev, std::span<const double> x0,
                                const std::function<double(double, std::span<const double>)>& f) const {
    IntegralObserver obs;
    obs.f = &f;
    integrate(ev, x0, cfg_.dt, obs);
    return pairwise_sum(obs.pieces);
}

Simulator::AcceptanceTally Simulator::acceptance(const EventStream& ev, std::span<const double> x0) const {
    AcceptanceObserver obs;
    obs.bound = cfg_.thinning_bound;
    integrate(ev, x0, cfg_.dt, obs);
    return {obs.accepted, obs.expected, obs.variance};
}

Vec Simulator::terminal(const EventStream& ev, std::span<const double> x0) const {
    TerminalObserver obs;
    integrate(ev, x0, cfg_.dt, obs);
    return obs.x;
}

PathRecord simulate(const levy::LevyModel& model, const JumpKernel& kernel, const DriftField& drift,
                    const SimConfig& cfg, RngStream& rng) {
    Simulator sim(model, kernel, drift, cfg);
    const EventStream ev = sim.events(rng);
    return sim.run(ev, cfg.x0);
}

std::pair<PathRecord, PathRecord> simulate_coupled(const levy::LevyModel& model, const JumpKernel& kernel,
                                                   const DriftField& drift, const SimConfig& cfg,
                                                   std::span<const double> x0_a, std::span<const double> x0_b,
                                                   RngStream& rng) {
    Simulator sim(model, kernel, drift, cfg);
    if (x0_a.size() != x0_b.size() || x0_a.size() != cfg.x0.size())
        fail(ErrorCode::configuration, "starting points have the wrong dimension");
    const EventStream ev = sim.events(rng);
    return {sim.run(ev, x0_a), sim.run(ev, x0_b)};
}

void write_path_csv(const PathRecord& path, const std::string& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) fail(ErrorCode::io, "cannot open " + file);
    const std::size_t d = path.states.empty() ? 0 : path.states.front().size();
    out << "t";
    for (std::size_t a = 0; a < d; ++a) out << ",x_" << a + 1;
    out << ",event,accepted\r\n";
    out << std::setprecision(17);
    std::size_t e = 0;
    for (std::size_t i = 0; i < path.times.size(); ++i) {
        out << path.times[i];
        for (double v : path.states[i]) out << ',' << v;
        const bool is_event = e < path.events.size() && path.events[e].t == path.times[i] && i > 0;
        out << ',' << (is_event ? 1 : 0) << ',' << (is_event && path.events[e].accepted ? 1 : 0) << "\r\n";
        if (is_event) ++e;
    }
}

// ---------------------------------------------------------------------------

std::pair<double, double> mean_stderr(std::span<const double> values) {
    const auto n = static_cast<double>(values.size());
    if (values.empty()) fail(ErrorCode::invalid_argument, "no samples");
    const double mean = pairwise_sum(values) / n;
    std::vector<double> sq(values.size());
    for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = (values[i] - mean) * (values[i] - mean);
    const double var = values.size() > 1 ? pairwise_sum(sq) / (n - 1.0) : 0.0;
    return {mean, std::sqrt(var / n)};
}

void write_mc_csv(const std::vector<McEstimate>& rows, const std::string& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) fail(ErrorCode::io, "cannot open " + file);
    out << "x,estimate,stderr,n_paths\r\n" << std::setprecision(17);
    for (const auto& r : rows) out << join_point(r.x) << ',' << r.estimate << ',' << r.stderr_ << ',' << r.n_paths << "\r\n";
}

CharFnReport characteristic_function(const Simulator& sim, std::span<const double> xi) {
    const auto& cfg = sim.config();
    const std::size_t d = cfg.x0.size();
    if (xi.size() != d) fail(ErrorCode::invalid_argument, "frequency dimension differs from the model dimension");
    std::vector<double> re(cfg.n_paths), im(cfg.n_paths);
    const auto count = static_cast<std::ptrdiff_t>(cfg.n_paths);
    auto body = [&](std::ptrdiff_t i) {
        RngStream rng = RngStream::derive(cfg.seed, static_cast<std::uint64_t>(i));
        const Vec x = sim.terminal(sim.events(rng), cfg.x0);
        double ph = 0.0;
        for (std::size_t a = 0; a < d; ++a) ph += xi[a] * (x[a] - cfg.x0[a]);
        re[static_cast<std::size_t>(i)] = std::cos(ph);
        im[static_cast<std::size_t>(i)] = std::sin(ph);
    };
    if (cfg.exec == Exec::serial) {
        for (std::ptrdiff_t i = 0; i < count; ++i) body(i);
    } else {
#pragma omp parallel for schedule(dynamic, 64)
        for (std::ptrdiff_t i = 0; i < count; ++i) body(i);
    }
    const auto [mr, sr] = mean_stderr(re);
    const auto [mi, si] = mean_stderr(im);
    CharFnReport rep;
    rep.estimate = {mr, mi};
    rep.stderr_ = std::hypot(sr, si);

    const Vec zero(d, 0.0);
    const double kappa = sim.kernel()(0.0, cfg.x0, zero);
    Vec b(d, 0.0);
    if (!sim.drift().is_zero) sim.drift().eval(0.0, cfg.x0, b);
    double xb = 0.0, xi2 = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
        xb += xi[a] * b[a];
        xi2 += xi[a] * xi[a];
    }
    rep.reference = std::exp(cfg.T * (kappa * levy::symbol(sim.model(), xi) + std::complex<double>(0.0, xb)));
    rep.cutoff_allowance = cfg.T * sim.kernel().kappa1 * xi2 * sim.cutoff_second_moment() / 2.0;
    rep.discrepancy = std::abs(rep.estimate - rep.reference);
    rep.pass = rep.discrepancy <= 3.0 * rep.stderr_ + rep.cutoff_allowance;
    return rep;
}

ThinningLawReport thinning_law_check(const Simulator& sim, std::size_t runs) {
    const auto& cfg = sim.config();
    if (runs == 0) fail(ErrorCode::invalid_argument, "runs must be positive");
    std::vector<std::size_t> counts(runs);
    std::vector<Simulator::AcceptanceTally> tallies(runs);
    const auto count = static_cast<std::ptrdiff_t>(runs);
    auto body = [&](std::ptrdiff_t i) {
        const auto u = static_cast<std::size_t>(i);
        RngStream rng = RngStream::derive(cfg.seed, u);
        const EventStream ev = sim.events(rng);
        counts[u] = ev.size();
        tallies[u] = sim.acceptance(ev, cfg.x0);
    };
    if (cfg.exec == Exec::serial) {
        for (std::ptrdiff_t i = 0; i < count; ++i) body(i);
    } else {
#pragma omp parallel for schedule(dynamic, 64)
        for (std::ptrdiff_t i = 0; i < count; ++i) body(i);
    }

    ThinningLawReport rep{};
    rep.runs = runs;
    const double mu = sim.proposal_rate() * cfg.T;
    rep.expected_events = mu;
    std::size_t total = 0, kmax = 0;
    for (auto c : counts) {
        total += c;
        kmax = std::max(kmax, c);
    }
    rep.mean_events = static_cast<double>(total) / static_cast<double>(runs);

    // Bins [lo, hi) with expected count >= 5, pooling both tails.
    if (mu > 0.0) {
        const boost::math::poisson_distribution<double> pois(mu);
        std::vector<std::size_t> observed(kmax + 1, 0);
        for (auto c : counts) ++observed[c];
        const auto n = static_cast<double>(runs);
        std::vector<double> bin_expected;
        std::vector<double> bin_observed;
        double e_acc = 0.0, o_acc = 0.0;
        const auto k_end = static_cast<std::size_t>(std::max<double>(static_cast<double>(kmax), mu + 10.0 * std::sqrt(mu) + 10.0));
        for (std::size_t k = 0; k <= k_end; ++k) {
            e_acc += n * boost::math::pdf(pois, static_cast<double>(k));
            o_acc += k < observed.size() ? static_cast<double>(observed[k]) : 0.0;
            if (e_acc >= 5.0) {
                bin_expected.push_back(e_acc);
                bin_observed.push_back(o_acc);
                e_acc = o_acc = 0.0;
            }
        }
        // Upper tail beyond k_end and any unfinished bin go into the last bin.
        e_acc += n * boost::math::cdf(boost::math::complement(pois, static_cast<double>(k_end)));
        if (!bin_expected.empty()) {
            bin_expected.back() += e_acc;
            bin_observed.back() += o_acc;
        }
        double chi = 0.0;
        for (std::size_t b = 0; b < bin_expected.size(); ++b) {
            const double diff = bin_observed[b] - bin_expected[b];
            chi += diff * diff / bin_expected[b];
        }
        rep.chi_square = chi;
        rep.dof = static_cast<int>(bin_expected.size()) - 1;
        rep.p_value = rep.dof > 0
                          ? boost::math::cdf(boost::math::complement(boost::math::chi_squared_distribution<double>(rep.dof), chi))
                          : 1.0;
    } else {
        rep.p_value = total == 0 ? 1.0 : 0.0;
    }

    double var = 0.0;
    for (const auto& t : tallies) {
        rep.accepted += t.accepted;
        rep.expected_accepted += t.expected;
        var += t.variance;
    }
    rep.proposals = total;
    rep.z_score = var > 0.0 ? (static_cast<double>(rep.accepted) - rep.expected_accepted) / std::sqrt(var) : 0.0;
    return rep;
}

namespace {

/// f sampled at the Euler times; evaluation is linear in time and cubic in space.
class SampledFunction {
public:
    SampledFunction(const pde::Source& source, const lp::GridSpec& grid, double T, double dt) {
        if (source.time_independent) {
            fields_.push_back(source.at(0.0));
            times_.push_back(0.0);
        } else {
            const int steps = step_count(T, dt);
            for (int k = 0; k <= steps; ++k) {
                times_.push_back(k == steps ? T : k * (T / steps));
                fields_.push_back(source.at(times_.back()));
            }
        }
        for (const auto& f : fields_)
            if (f.spec() != grid) fail(ErrorCode::grid_mismatch, "source grid differs from the requested grid");
    }

    double operator()(double t, std::span<const double> x) const {
        if (fields_.size() == 1) return lp::interpolate_cubic(fields_[0], x);
        const auto it = std::upper_bound(times_.begin(), times_.end(), t);
        std::size_t hi = static_cast<std::size_t>(it - times_.begin());
        if (hi == 0) hi = 1;
        if (hi >= times_.size()) hi = times_.size() - 1;
        const std::size_t lo = hi - 1;
        const double w = std::clamp((t - times_[lo]) / (times_[hi] - times_[lo]), 0.0, 1.0);
        return (1.0 - w) * lp::interpolate_cubic(fields_[lo], x) + w * lp::interpolate_cubic(fields_[hi], x);
    }

    const std::vector<GridField>& fields() const { return fields_; }

private:
    std::vector<double> times_;
    std::vector<GridField> fields_;
};

std::vector<double> path_integrals(const Simulator& sim, std::span<const double> x0,
                                   const std::function<double(double, std::span<const double>)>& f) {
    const auto& cfg = sim.config();
    return per_path(cfg.n_paths, cfg.exec, [&](std::size_t i) {
        RngStream rng = RngStream::derive(cfg.seed, i);
        return sim.path_integral(sim.events(rng), x0, f);
    });
}

} // namespace

KrylovReport krylov_estimate(const Simulator& sim, const pde::Source& source, const lp::GridSpec& grid,
                             std::span<const Vec> x_grid, double q) {
    const auto& cfg = sim.config();
    if (x_grid.empty()) fail(ErrorCode::invalid_argument, "empty starting-point grid");
    const SampledFunction f(source, grid, cfg.T, cfg.dt);
    const std::function<double(double, std::span<const double>)> fn = [&f](double t, std::span<const double> x) { return f(t, x); };
    KrylovReport rep{};
    rep.sup_estimate = -std::numeric_limits<double>::infinity();
    for (const auto& x : x_grid) {
        const auto vals = path_integrals(sim, x, fn);
        const auto [m, se] = mean_stderr(vals);
        rep.rows.push_back({x, m, se, cfg.n_paths});
        rep.sup_estimate = std::max(rep.sup_estimate, m);
    }
    const lp::DyadicPartition part(grid);
    for (const auto& field : f.fields())
        rep.f_norm = std::max(rep.f_norm, lp::besov_norm(field, 0.0, q, std::numeric_limits<double>::infinity(), part));
    rep.ratio = rep.f_norm > 0.0 ? rep.sup_estimate / rep.f_norm : std::numeric_limits<double>::quiet_NaN();
    return rep;
}

pde::Source sample_source(const SpaceTimeFn& f, const lp::GridSpec& grid, bool time_independent) {
    if (time_independent)
        return pde::Source::constant(GridField::from_function(grid, [&f](std::span<const double> x) { return f(0.0, x); }));
    pde::Source s;
    s.at = [f, grid](double t) { return GridField::from_function(grid, [&](std::span<const double> x) { return f(t, x); }); };
    return s;
}

FeynmanKacReport feynman_kac_check(const Simulator& sim, const SpaceTimeFn& f, bool time_independent,
                                   const lp::GridSpec& grid, std::span<const Vec> x_grid) {
    const auto& cfg = sim.config();
    if (x_grid.empty()) fail(ErrorCode::invalid_argument, "empty starting-point grid");
    FeynmanKacReport rep{};
    const double alpha = sim.model().alpha();
    rep.balance = alpha + sim.drift().beta >= 1.0;
    if (!rep.balance) rep.warnings.push_back("alpha + beta < 1: outside the balance regime");

    auto solve_on = [&](const lp::GridSpec& g, double dt) {
        pde::PdeProblem p;
        p.direction = pde::Direction::backward;
        p.generator = std::make_shared<const nonlocal::Generator>(sim.model(), g);
        p.kernel = sim.kernel();
        p.drift = sim.drift();
        p.source = sample_source(f, g, time_independent);
        p.lambda = 0.0;
        p.T = cfg.T;
        p.dt = dt;
        p.diagnostics = false;
        p.save_every = step_count(cfg.T, dt);
        p.exec = cfg.exec;
        return pde::solve(p).initial();
    };
    lp::GridSpec fine = grid;
    fine.n *= 2;
    const GridField u_coarse = solve_on(grid, cfg.dt);
    const GridField u_fine = solve_on(fine, 0.5 * cfg.dt);
    const double h2 = lp::derivative_tensor_norm(u_fine, 2).max_abs();
    rep.cutoff_allowance = cfg.T * 0.5 * h2 * sim.kernel().kappa1 * sim.cutoff_second_moment();

    SimConfig half_cfg = cfg;
    half_cfg.dt = 0.5 * cfg.dt;
    const Simulator half(sim.model(), sim.kernel(), sim.drift(), half_cfg);
    const std::function<double(double, std::span<const double>)> fn = f;

    rep.pass = true;
    for (const auto& x : x_grid) {
        const auto coarse = path_integrals(sim, x, fn);
        const auto finer = path_integrals(half, x, fn);
        const auto [mc, se] = mean_stderr(finer);
        const double mc_coarse = mean_stderr(coarse).first;
        FeynmanKacRow row;
        row.x = x;
        row.pde_value = lp::interpolate_spectral(u_fine, x);
        row.mc_estimate = mc;
        row.mc_stderr = se;
        row.discrepancy = std::abs(row.pde_value - mc);
        const double ta = std::abs(mc - mc_coarse);
        const double pa = std::abs(row.pde_value - lp::interpolate_spectral(u_coarse, x));
        rep.time_allowance = std::max(rep.time_allowance, ta);
        rep.pde_allowance = std::max(rep.pde_allowance, pa);
        row.allowance = ta + pa + rep.cutoff_allowance + 1e-12 * std::max(1.0, std::abs(row.pde_value));
        row.pass = row.discrepancy <= 3.0 * se + row.allowance;
        rep.pass = rep.pass && row.pass;
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

CoupledReport coupled_divergence(const Simulator& sim, double delta0, std::size_t replicas, double lipschitz) {
    const auto& cfg = sim.config();
    if (!(delta0 > 0.0)) fail(ErrorCode::invalid_argument, "initial separation must be positive");
    CoupledReport rep{};
    rep.lipschitz = lipschitz;
    rep.delta0 = delta0;
    rep.finite = true;
    Vec xb = cfg.x0;
    xb[0] += delta0;
    std::vector<double> sup_sep(replicas);
    rep.exponents = per_path(replicas, cfg.exec, [&](std::size_t i) {
        RngStream rng = RngStream::derive(cfg.seed, i);
        const EventStream ev = sim.events(rng);
        const PathRecord a = sim.run(ev, cfg.x0);
        const PathRecord b = sim.run(ev, xb);
        double stt = 0.0, sty = 0.0, sup = 0.0;
        for (std::size_t k = 1; k < a.times.size(); ++k) {
            double s = 0.0;
            for (std::size_t c = 0; c < a.states[k].size(); ++c) s += std::pow(a.states[k][c] - b.states[k][c], 2);
            const double sep = std::sqrt(s);
            sup = std::max(sup, sep);
            if (!(sep > 0.0) || !std::isfinite(sep)) continue;
            const double t = a.times[k];
            stt += t * t;
            sty += t * std::log(sep / delta0);
        }
        sup_sep[i] = std::isfinite(sup) ? sup : std::numeric_limits<double>::infinity();
        return stt > 0.0 ? sty / stt : 0.0;
    });
    rep.max_exponent = *std::max_element(rep.exponents.begin(), rep.exponents.end());
    for (double s : sup_sep) {
        rep.max_separation = std::max(rep.max_separation, s);
        rep.finite = rep.finite && std::isfinite(s);
    }
    return rep;
}

} // namespace levylab::sde
