#include "levylab/zvonkin/zvonkin.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "levylab/core/error.hpp"

namespace levylab::zvonkin {
namespace {

constexpr double kInverseTol = 1e-12;
constexpr int kInverseIterations = 60;

/// Trigonometric interpolant via per-axis phase recurrences: O(N^d) products, no trig per mode.
double spectral_eval(const GridField& f, std::span<const double> x) {
    const auto& spec = f.spec();
    const auto c = f.spectrum();
    const std::size_t n = spec.n;
    const auto d = static_cast<std::size_t>(spec.dim);
    thread_local std::vector<cplx> phase;
    phase.resize(d * n);
    for (std::size_t a = 0; a < d; ++a) {
        cplx* ph = phase.data() + a * n;
        const cplx step = std::polar(1.0, spec.frequency_step() * x[a]);
        ph[0] = 1.0;
        cplx p = 1.0;
        for (std::size_t k = 1; k <= n / 2; ++k) {
            p *= step;
            if (k < n / 2) {
                ph[k] = p;
                ph[n - k] = std::conj(p);
            } else {
                ph[n / 2] = std::conj(p);  // wave number -N/2
            }
        }
    }
    double s = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        std::size_t rest = i;
        cplx ph = 1.0;
        for (std::size_t a = d; a-- > 0;) {
            ph *= phase[a * n + rest % n];
            rest /= n;
        }
        if (spec.is_nyquist(i)) {
            s += c[i].real() * ph.real();
        } else {
            s += c[i].real() * ph.real() - c[i].imag() * ph.imag();
        }
    }
    return s;
}

double norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

} // namespace

ZvonkinMap::ZvonkinMap(GridSpec grid, std::vector<double> times, std::vector<std::vector<GridField>> u, double lambda,
                       Interpolation interpolation)
    : grid_(grid), times_(std::move(times)), u_(std::move(u)), lambda_(lambda), interp_(interpolation) {
    lp::validate(grid_);
    const auto d = static_cast<std::size_t>(grid_.dim);
    if (u_.size() != d) fail(ErrorCode::invalid_argument, "map needs one field family per dimension");
    if (times_.empty()) fail(ErrorCode::invalid_argument, "map needs at least one time");
    for (std::size_t k = 1; k < times_.size(); ++k)
        if (!(times_[k] > times_[k - 1])) fail(ErrorCode::invalid_argument, "map times must increase");
    for (const auto& comp : u_) {
        if (comp.size() != times_.size()) fail(ErrorCode::invalid_argument, "snapshot count differs from time count");
        for (const auto& f : comp)
            if (f.spec() != grid_) fail(ErrorCode::grid_mismatch, "snapshot grid differs from the map grid");
    }
    for (std::size_t k = 0; k < times_.size(); ++k) {
        std::vector<double> mag(grid_.size(), 0.0), jac(grid_.size(), 0.0);
        for (std::size_t c = 0; c < d; ++c) {
            const GridField& f = u_[c][k];
            for (std::size_t i = 0; i < f.size(); ++i) mag[i] += f[i] * f[i];
            for (int a = 0; a < grid_.dim; ++a) {
                const GridField g = lp::derivative(f, a);
                for (std::size_t i = 0; i < g.size(); ++i) jac[i] += g[i] * g[i];
            }
        }
        u_sup_ = std::max(u_sup_, std::sqrt(*std::max_element(mag.begin(), mag.end())));
        grad_sup_ = std::max(grad_sup_, std::sqrt(*std::max_element(jac.begin(), jac.end())));
    }
}

ZvonkinMap ZvonkinMap::from_function(GridSpec grid, std::vector<double> times,
                                     const std::function<void(double, std::span<const double>, std::span<double>)>& u,
                                     double lambda, Interpolation interpolation) {
    const auto d = static_cast<std::size_t>(grid.dim);
    std::vector<std::vector<GridField>> fields(d);
    std::vector<double> out(d);
    for (double t : times)
        for (std::size_t c = 0; c < d; ++c)
            fields[c].push_back(GridField::from_function(grid, [&](std::span<const double> x) {
                u(t, x, out);
                return out[c];
            }));
    return ZvonkinMap(grid, std::move(times), std::move(fields), lambda, interpolation);
}

double ZvonkinMap::interpolate(const GridField& f, std::span<const double> x) const {
    return interp_ == Interpolation::spectral ? spectral_eval(f, x) : lp::interpolate_cubic(f, x);
}

void ZvonkinMap::interpolate(const std::vector<std::vector<GridField>>& fields, double t, std::span<const double> x,
                             std::span<double> out) const {
    std::size_t lo = 0, hi = 0;
    double w = 0.0;
    if (times_.size() > 1) {
        const auto it = std::upper_bound(times_.begin(), times_.end(), t);
        hi = std::clamp<std::size_t>(static_cast<std::size_t>(it - times_.begin()), 1, times_.size() - 1);
        lo = hi - 1;
        w = std::clamp((t - times_[lo]) / (times_[hi] - times_[lo]), 0.0, 1.0);
    }
    for (std::size_t c = 0; c < out.size(); ++c) {
        const double a = interpolate(fields[c][lo], x);
        out[c] = w == 0.0 ? a : (1.0 - w) * a + w * interpolate(fields[c][hi], x);
    }
}

void ZvonkinMap::u(double t, std::span<const double> x, std::span<double> out) const { interpolate(u_, t, x, out); }

Vec ZvonkinMap::forward(double t, std::span<const double> x) const {
    Vec out(x.size());
    u(t, x, out);
    for (std::size_t a = 0; a < out.size(); ++a) out[a] += x[a];
    return out;
}

Vec ZvonkinMap::inverse(double t, std::span<const double> y) const {
    Vec x(y.begin(), y.end()), ux(y.size());
    for (int it = 0; it < kInverseIterations; ++it) {
        u(t, x, ux);
        double change = 0.0, scale = 1.0;
        for (std::size_t a = 0; a < x.size(); ++a) {
            const double next = y[a] - ux[a];
            change = std::max(change, std::abs(next - x[a]));
            scale = std::max(scale, std::abs(next));
            x[a] = next;
        }
        if (change <= kInverseTol * scale) return x;
    }
    fail(ErrorCode::certificate, "inverse fixed-point iteration did not converge", certificate());
}

void ZvonkinMap::save(const std::string& dir) const {
    std::filesystem::create_directories(dir);
    for (std::size_t c = 0; c < u_.size(); ++c)
        for (std::size_t k = 0; k < times_.size(); ++k)
            lp::write_raw(u_[c][k], dir + "/u" + std::to_string(c) + "_" + std::to_string(k) + ".bin");
    std::ofstream m(dir + "/manifest.txt");
    if (!m) fail(ErrorCode::io, "cannot write " + dir + "/manifest.txt");
    m << std::setprecision(17);
    m << "lambda " << lambda_ << "\n";
    m << "u_sup " << u_sup_ << "\n";
    m << "grad_sup " << grad_sup_ << "\n";
    m << "certificate " << certificate() << "\n";
    m << "interpolation " << (interp_ == Interpolation::spectral ? "spectral" : "cubic") << "\n";
    m << "grid " << grid_.dim << " " << grid_.n << " " << grid_.length << "\n";
    m << "times";
    for (double t : times_) m << " " << t;
    m << "\n";
    for (const auto& e : schedule_)
        m << "schedule " << e.lambda << " " << e.u_sup << " " << e.grad_sup << " " << e.certificate << "\n";
}

ZvonkinMap ZvonkinMap::load(const std::string& dir) {
    std::ifstream m(dir + "/manifest.txt");
    if (!m) fail(ErrorCode::io, "cannot read " + dir + "/manifest.txt");
    double lambda = 0.0;
    GridSpec grid;
    std::vector<double> times;
    std::vector<ScheduleEntry> schedule;
    Interpolation interp = Interpolation::spectral;
    std::string line;
    while (std::getline(m, line)) {
        std::istringstream is(line);
        std::string key;
        is >> key;
        if (key == "lambda") {
            is >> lambda;
        } else if (key == "grid") {
            is >> grid.dim >> grid.n >> grid.length;
        } else if (key == "interpolation") {
            std::string v;
            is >> v;
            interp = v == "cubic" ? Interpolation::cubic : Interpolation::spectral;
        } else if (key == "times") {
            double t;
            while (is >> t) times.push_back(t);
        } else if (key == "schedule") {
            ScheduleEntry e{};
            is >> e.lambda >> e.u_sup >> e.grad_sup >> e.certificate;
            schedule.push_back(e);
        }
    }
    std::vector<std::vector<GridField>> fields(static_cast<std::size_t>(grid.dim));
    for (std::size_t c = 0; c < fields.size(); ++c)
        for (std::size_t k = 0; k < times.size(); ++k)
            fields[c].push_back(lp::read_raw(dir + "/u" + std::to_string(c) + "_" + std::to_string(k) + ".bin"));
    ZvonkinMap map(grid, std::move(times), std::move(fields), lambda, interp);
    map.set_schedule(std::move(schedule));
    return map;
}

// ---------------------------------------------------------------------------

ZvonkinMap build(const levy::LevyModel& model, const JumpKernel& kernel, const DriftField& drift, const GridSpec& grid,
                 const BuildOptions& options, std::vector<std::string>* warnings) {
    if (options.lambda_schedule.empty()) fail(ErrorCode::configuration, "empty lambda schedule");
    const double alpha = model.alpha();
    if (!(drift.beta > 1.0 - alpha / 2.0) && warnings)
        warnings->push_back("drift regularity beta <= 1 - alpha/2: transform hypotheses not met");
    const auto d = static_cast<std::size_t>(grid.dim);
    auto gen = std::make_shared<const nonlocal::Generator>(model, grid);

    std::vector<pde::Source> sources;
    for (std::size_t c = 0; c < d; ++c) {
        pde::Source s;
        s.at = [drift, grid, c](double t) {
            std::vector<double> b(static_cast<std::size_t>(grid.dim));
            return GridField::from_function(grid, [&](std::span<const double> x) {
                drift.eval(t, x, b);
                return b[c];
            });
        };
        sources.push_back(std::move(s));
    }

    std::vector<ScheduleEntry> schedule;
    std::optional<ZvonkinMap> chosen;
    for (double lambda : options.lambda_schedule) {
        if (!(lambda > 0.0)) fail(ErrorCode::configuration, "lambda must be positive");
        std::vector<std::vector<GridField>> fields;
        std::vector<double> times;
        for (std::size_t c = 0; c < d; ++c) {
            pde::PdeProblem p;
            p.direction = pde::Direction::backward;
            p.generator = gen;
            p.kernel = kernel;
            p.drift = drift;
            p.source = sources[c];
            p.lambda = lambda;
            p.T = options.T;
            p.dt = options.dt;
            p.diagnostics = false;
            p.exec = options.exec;
            auto sol = pde::solve(p);
            times = sol.times;
            fields.push_back(std::move(sol.snapshots));
        }
        ZvonkinMap map(grid, std::move(times), std::move(fields), lambda, options.interpolation);
        schedule.push_back({lambda, map.u_sup(), map.grad_sup(), map.certificate()});
        if (map.certified() && !chosen) {
            chosen.emplace(std::move(map));
            if (!options.evaluate_all) break;
        }
    }
    if (!chosen)
        fail(ErrorCode::smallness_unattainable,
             "certificate ||u|| + ||grad u|| <= 1/2 not reached; last value " + std::to_string(schedule.back().certificate),
             schedule.back().certificate);
    chosen->set_schedule(std::move(schedule));
    return std::move(*chosen);
}

TransformedCoefficients transformed_coefficients(const ZvonkinMap& map, const nonlocal::Generator& generator,
                                                 const JumpKernel& kernel, double t, std::span<const double> y) {
    if (!map.certified()) fail(ErrorCode::certificate, "map is not certified", map.certificate());
    const auto d = y.size();
    const Vec xp = map.inverse(t, y);
    Vec ux(d), uz(d), shifted(d);
    map.u(t, xp, ux);
    TransformedCoefficients out;
    out.b_tilde.assign(d, 0.0);
    for (std::size_t a = 0; a < d; ++a) out.b_tilde[a] = map.lambda() * ux[a];
    for (const auto& node : generator.nodes()) {
        if (node.small) continue;
        for (std::size_t a = 0; a < d; ++a) shifted[a] = xp[a] + node.z[a];
        map.u(t, shifted, uz);
        const double w = node.weight * kernel(t, xp, node.z);
        for (std::size_t a = 0; a < d; ++a) out.b_tilde[a] -= w * (uz[a] - ux[a]);
    }
    const Vec yv(y.begin(), y.end());
    out.g = [&map, t, xp, yv](std::span<const double> z) {
        Vec s(xp);
        for (std::size_t a = 0; a < s.size(); ++a) s[a] += z[a];
        Vec r = map.forward(t, s);
        for (std::size_t a = 0; a < r.size(); ++a) r[a] -= yv[a];
        return r;
    };
    out.sigma_tilde = [kernel, t, xp](std::span<const double> z) { return kernel(t, xp, z); };
    return out;
}

BiLipschitzReport bilipschitz_check(const ZvonkinMap& map, std::size_t pairs, RngStream& rng) {
    const auto& grid = map.grid();
    const auto d = static_cast<std::size_t>(grid.dim);
    BiLipschitzReport rep{pairs, std::numeric_limits<double>::infinity(), 0.0, std::numeric_limits<double>::infinity(),
                          0.0, 0.0, false};
    Vec x(d), y(d), dx(d), dy(d);
    for (std::size_t p = 0; p < pairs; ++p) {
        const double t = rng.uniform() * map.T();
        // Half the pairs are close (difference quotients of the gradient), half are far apart.
        const double spread = p % 2 == 0 ? 1e-4 : grid.length;
        for (std::size_t a = 0; a < d; ++a) {
            x[a] = rng.uniform() * grid.length;
            y[a] = x[a] + (2.0 * rng.uniform() - 1.0) * spread;
        }
        for (std::size_t a = 0; a < d; ++a) dx[a] = x[a] - y[a];
        const double base = norm(dx);
        if (!(base > 0.0)) continue;
        const Vec fx = map.forward(t, x), fy = map.forward(t, y);
        for (std::size_t a = 0; a < d; ++a) dy[a] = fx[a] - fy[a];
        const double r = norm(dy) / base;
        rep.min_ratio = std::min(rep.min_ratio, r);
        rep.max_ratio = std::max(rep.max_ratio, r);
        const Vec ix = map.inverse(t, x), iy = map.inverse(t, y);
        for (std::size_t a = 0; a < d; ++a) dy[a] = ix[a] - iy[a];
        const double ri = norm(dy) / base;
        rep.min_inv_ratio = std::min(rep.min_inv_ratio, ri);
        rep.max_inv_ratio = std::max(rep.max_inv_ratio, ri);
        const Vec back = map.forward(t, ix);
        const Vec there = map.inverse(t, fx);
        for (std::size_t a = 0; a < d; ++a)
            rep.max_roundtrip = std::max({rep.max_roundtrip, std::abs(back[a] - x[a]), std::abs(there[a] - x[a])});
    }
    rep.pass = rep.min_ratio >= 0.5 && rep.max_ratio <= 1.5 && rep.min_inv_ratio >= 0.5 && rep.max_inv_ratio <= 2.0 &&
               rep.max_roundtrip <= 1e-10;
    return rep;
}

TransformReport verify_transform(const levy::LevyModel& model, const JumpKernel& kernel, const DriftField& drift,
                                 const ZvonkinMap& map, const sde::SimConfig& cfg) {
    if (!map.certified()) fail(ErrorCode::certificate, "map is not certified", map.certificate());
    if (std::abs(cfg.T - map.T()) > 1e-12 * std::max(1.0, map.T()))
        fail(ErrorCode::configuration, "simulation horizon differs from the map horizon");
    const sde::Simulator sim(model, kernel, drift, cfg);
    const nonlocal::Generator gen(model, map.grid());
    const auto d = static_cast<std::size_t>(map.grid().dim);
    std::vector<std::vector<GridField>> lu(d);
    for (std::size_t c = 0; c < d; ++c)
        for (std::size_t k = 0; k < map.times().size(); ++k)
            lu[c].push_back(gen.apply_jump(map.fields()[c][k], kernel, map.times()[k], Exec::serial).value);

    const std::size_t replicas = cfg.n_paths;
    std::vector<double> per(replicas);
    const auto count = static_cast<std::ptrdiff_t>(replicas);
    auto body = [&](std::ptrdiff_t i) {
        RngStream rng = RngStream::derive(cfg.seed, static_cast<std::uint64_t>(i));
        const sde::EventStream ev = sim.events(rng);
        const sde::PathRecord xpath = sim.run(ev, cfg.x0);

        // Y on the same step structure: Euler pieces between grid and event times.
        Vec y = map.forward(0.0, cfg.x0), uu(d), lv(d);
        double worst = 0.0;
        std::size_t rec = 1, e = 0;
        double t = 0.0;
        auto compare = [&](double time) {
            while (rec < xpath.times.size() && xpath.times[rec] < time) ++rec;
            if (rec >= xpath.times.size() || xpath.times[rec] != time) return;
            const Vec phi = map.forward(time, xpath.states[rec]);
            double s = 0.0;
            for (std::size_t a = 0; a < d; ++a) s += (phi[a] - y[a]) * (phi[a] - y[a]);
            worst = std::max(worst, std::sqrt(s));
        };
        const int steps = std::max(1, static_cast<int>(std::ceil(cfg.T / cfg.dt - 1e-9)));
        const double h = cfg.T / steps;
        for (int k = 1; k <= steps; ++k) {
            const double tk = k == steps ? cfg.T : k * h;
            for (;;) {
                const bool has_event = e < ev.size() && ev.t[e] <= tk;
                const double stop = has_event ? ev.t[e] : tk;
                if (stop > t) {
                    const Vec xp = map.inverse(t, y);
                    map.u(t, xp, uu);
                    map.interpolate(lu, t, xp, lv);
                    for (std::size_t a = 0; a < d; ++a) y[a] += (stop - t) * (map.lambda() * uu[a] - lv[a]);
                    t = stop;
                }
                if (!has_event) break;
                const Vec xp = map.inverse(t, y);
                if (ev.r[e] <= kernel(t, xp, ev.z[e])) {
                    Vec s(xp);
                    for (std::size_t a = 0; a < d; ++a) s[a] += ev.z[e][a];
                    y = map.forward(t, s);
                }
                compare(t);
                ++e;
            }
            compare(t);
        }
        per[static_cast<std::size_t>(i)] = worst;
    };
    if (cfg.exec == Exec::serial) {
        for (std::ptrdiff_t i = 0; i < count; ++i) body(i);
    } else {
#pragma omp parallel for schedule(dynamic, 1)
        for (std::ptrdiff_t i = 0; i < count; ++i) body(i);
    }
    TransformReport rep{};
    rep.replicas = replicas;
    rep.dt = cfg.dt;
    rep.max_discrepancy = *std::max_element(per.begin(), per.end());
    rep.mean_discrepancy = pairwise_sum(per) / static_cast<double>(replicas);
    return rep;
}

} // namespace levylab::zvonkin
