#include "doctest.h"

#include <cmath>
#include <fstream>

#include "levylab/core/error.hpp"
#include "levylab/pde/solver.hpp"

using namespace levylab;
using namespace levylab::pde;

namespace {

GridSpec grid1(std::size_t n) { return GridSpec{1, n, 2.0 * M_PI}; }

GridField wave(const GridSpec& s, double a1, double a3) {
    return GridField::from_function(s, [=](std::span<const double> x) { return a1 * std::cos(x[0]) + a3 * std::cos(3 * x[0]); });
}

std::shared_ptr<const Generator> pure_gen(const GridSpec& s, double alpha = 0.5) {
    return std::make_shared<const Generator>(levy::LevyModel::pure_stable(alpha, levy::SphericalMeasure::cylindrical(1)), s);
}

JumpKernel sine_kernel() {
    return JumpKernel::of_x([](std::span<const double> x) { return 2.0 + std::sin(x[0]); }, 1.0, 3.0, 1.0, 1.0);
}

DriftField sine_drift(double a) {
    return DriftField::of_x([a](std::span<const double> x, std::span<double> b) { b[0] = a * std::sin(x[0]); }, 1.0, a);
}

/// Exact constant-coefficient solution: u_k(T) = f_k (e^{m T} - 1) / m with m = kappa psi(k) - lambda + i b k.
GridField exact_constant(const GridField& f, const Generator& g, double kappa, double lambda, double b, double T) {
    const auto& spec = f.spec();
    const auto c = f.spectrum();
    const auto psi = g.symbol_table();
    std::vector<cplx> out(c.size());
    std::vector<int> k(1);
    for (std::size_t i = 0; i < c.size(); ++i) {
        spec.wavenumber(i, k);
        const cplx m = kappa * psi[i] - lambda + cplx(0.0, b * k[0]);
        out[i] = std::abs(m) < 1e-300 ? c[i] * T : c[i] * (std::exp(m * T) - 1.0) / m;
    }
    return GridField::from_spectrum(spec, out);
}

} // namespace

TEST_CASE("zero source gives the zero solution") {
    PdeProblem p;
    const auto s = grid1(32);
    p.generator = pure_gen(s);
    p.source = Source::zero(s);
    p.kernel = sine_kernel();
    p.drift = sine_drift(0.3);
    p.reference_kappa = 1.0;
    const auto sol = solve(p);
    CHECK(sol.snapshots.size() == 101);
    for (const auto& u : sol.snapshots) CHECK(u.max_abs() == 0.0);
}

TEST_CASE("constant source closed form") {
    const auto s = grid1(32);
    for (auto dir : {Direction::forward, Direction::backward}) {
        PdeProblem p;
        p.direction = dir;
        p.generator = pure_gen(s);
        p.source = Source::constant(GridField(s, 0.7));
        p.kernel = sine_kernel();
        p.drift = sine_drift(0.3);
        p.lambda = 2.0;
        p.dt = 0.05;
        const auto sol = solve(p);
        for (std::size_t k = 0; k < sol.times.size(); ++k) {
            const double tau = dir == Direction::forward ? sol.times[k] : p.T - sol.times[k];
            const double exact = 0.7 * (1.0 - std::exp(-2.0 * tau)) / 2.0;
            for (double v : sol.snapshots[k].values()) CHECK(std::abs(v - exact) < 1e-8);
        }
    }
}

TEST_CASE("pure-stable oracle") {
    const auto s = grid1(32);
    PdeProblem p;
    p.generator = pure_gen(s);
    p.source = Source::constant(wave(s, 1.0, 0.0));
    p.lambda = 1.0;
    p.T = 3.0;
    p.dt = 0.1;
    const auto sol = solve(p);
    const double psi = -2.0 * std::sqrt(2.0 * M_PI);
    for (std::size_t k = 0; k < sol.times.size(); k += 5) {
        const double amp = (1.0 - std::exp((psi - 1.0) * sol.times[k])) / (1.0 - psi);
        CHECK((sol.snapshots[k] - wave(s, amp, 0.0)).max_abs() < 1e-10);
    }
    CHECK((sol.last() - wave(s, 0.1663, 0.0)).max_abs() < 1e-4);
}

TEST_CASE("time-reversed backward problem") {
    const auto s = grid1(32);
    PdeProblem p;
    p.direction = Direction::backward;
    p.generator = pure_gen(s);
    p.source = Source::constant(wave(s, 1.0, 0.0));
    p.lambda = 0.5;
    p.T = 1.0;
    const auto sol = solve(p);
    CHECK(sol.times.front() == doctest::Approx(0.0));
    CHECK(sol.times.back() == doctest::Approx(1.0));
    CHECK(sol.last().max_abs() == 0.0);
    const double psi = -2.0 * std::sqrt(2.0 * M_PI);
    const double amp = (1.0 - std::exp((psi - 0.5) * 1.0)) / (0.5 - psi);
    CHECK((sol.initial() - wave(s, amp, 0.0)).max_abs() < 1e-10);
}

TEST_CASE("first-order convergence against the exact multiplier") {
    const auto s = grid1(32);
    const auto gen = pure_gen(s);
    const auto f = wave(s, 1.0, 0.5);
    const double T = 1.0, b = 0.5, kappa = 1.5, lambda = 1.0;
    const auto exact = exact_constant(f, *gen, kappa, lambda, b, T);
    std::vector<double> errs;
    for (double dt : {0.05, 0.025, 0.0125, 0.00625}) {
        PdeProblem p;
        p.generator = gen;
        p.source = Source::constant(f);
        p.kernel = JumpKernel::constant(kappa);
        p.reference_kappa = 1.0;
        p.drift = DriftField::constant({b});
        p.lambda = lambda;
        p.T = T;
        p.dt = dt;
        errs.push_back((solve(p).last() - exact).max_abs());
    }
    for (std::size_t i = 1; i < errs.size(); ++i) CHECK(std::log2(errs[i - 1] / errs[i]) >= 0.9);
}

TEST_CASE("positivity preservation") {
    const auto s = grid1(64);
    PdeProblem p;
    p.generator = std::make_shared<const Generator>(
        levy::LevyModel::stable_like(0.5, levy::SphericalMeasure::cylindrical(1)), s);
    const auto f = GridField::from_function(s, [](std::span<const double> x) { return 1.0 + 0.9 * std::cos(x[0]) + 0.05 * std::sin(2 * x[0]); });
    p.source = Source::constant(f);
    p.kernel = sine_kernel();
    p.drift = sine_drift(0.4);
    p.dt = 0.02;
    const auto sol = solve(p);
    double worst = 0.0;
    for (const auto& u : sol.snapshots)
        for (double v : u.values()) worst = std::min(worst, v);
    CHECK(worst >= -1e-8 * f.max_abs());
}

TEST_CASE("CFL violation is a configuration error") {
    const auto s = grid1(64);
    PdeProblem p;
    p.generator = pure_gen(s);
    p.source = Source::zero(s);
    p.drift = DriftField::constant({50.0});
    p.dt = 0.01;
    CHECK_THROWS_AS(solve(p), Error);
}

TEST_CASE("quasi-linear solves") {
    const auto s = grid1(32);
    PdeProblem p;
    p.direction = Direction::backward;
    p.generator = pure_gen(s);
    p.source = Source::constant(wave(s, 1.0, 0.3));
    p.kernel = sine_kernel();
    p.reference_kappa = 1.0;
    p.lambda = 1.0;
    p.T = 0.5;
    p.dt = 0.01;
    const auto lin = solve(p);
    const auto q0 = solve_quasilinear(p);
    for (std::size_t k = 0; k < lin.snapshots.size(); ++k)
        for (std::size_t i = 0; i < s.size(); ++i) CHECK(lin.snapshots[k][i] == q0.snapshots[k][i]);

    auto with_kappa = [&](double kappa) {
        PdeProblem q = p;
        q.quasilinear_kappa = kappa;
        return solve_quasilinear(q).initial();
    };
    const auto u0 = lin.initial();
    auto second_difference = [&](double kappa) {
        return (with_kappa(2 * kappa) - with_kappa(kappa) * 2.0 + u0).max_abs();
    };
    const double d1 = second_difference(0.2), d2 = second_difference(0.1);
    CHECK(d1 / d2 > 3.0);
    CHECK(d1 / d2 < 5.0);

    PdeProblem c = p;
    c.source = Source::constant(GridField(s, 0.4));
    c.quasilinear_kappa = 0.5;
    const auto qc = solve_quasilinear(c);
    for (std::size_t k = 0; k < qc.times.size(); ++k) {
        const double exact = 0.4 * (1.0 - std::exp(-(p.T - qc.times[k])));
        for (double v : qc.snapshots[k].values()) CHECK(std::abs(v - exact) < 1e-8);
    }
}

TEST_CASE("diagnostics csv") {
    const auto s = grid1(32);
    PdeProblem p;
    p.generator = pure_gen(s);
    p.source = Source::constant(wave(s, 1.0, 0.0));
    p.save_every = 10;
    const auto sol = solve(p);
    CHECK(sol.diagnostics.size() == 11);
    CHECK(sol.diagnostics.back().besov_ratio > 0.0);
    const std::string path = "/tmp/levylab_diag.csv";
    write_diagnostics_csv(sol, path);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "t,besov_ratio,remainder_bound,dt\r");
}

TEST_CASE("a-priori estimate shape") {
    AprioriConfig c{levy::LevyModel::stable_like(0.5, levy::SphericalMeasure::cylindrical(1))};
    c.kernel = sine_kernel();
    c.drift = sine_drift(0.2);
    c.sources = 3;
    c.n_coarse = 32;
    const auto rep = verify_apriori(c);
    CHECK(rep.ratio_coarse > 0.0);
    CHECK(std::isfinite(rep.ratio_fine));
    CHECK(rep.refinement_stable);
    CHECK(rep.lambda_decreasing);
    CHECK(rep.lambda_ratios.size() == 3);
}

TEST_CASE("H^{1,q} ratio") {
    const auto s = grid1(32);
    PdeProblem p;
    p.generator = pure_gen(s, 1.0);
    const double c = 0.8, lambda = 2.0;
    p.source = Source::constant(GridField(s, c));
    p.lambda = lambda;
    p.dt = 0.01;
    const auto sol = solve(p);
    // u = c (1 - e^{-lambda t}) / lambda; the steepest difference quotient is on the first step.
    const double dq = c * (1.0 - std::exp(-lambda * p.dt)) / (lambda * p.dt);
    const double sup_u = c * (1.0 - std::exp(-lambda * p.T)) / lambda;
    CHECK(h1q_ratio(sol, p.source, 2.0) == doctest::Approx((dq + sup_u) / c).epsilon(1e-10));

    AprioriConfig cfg{levy::LevyModel::stable_like(1.0, levy::SphericalMeasure::cylindrical(1))};
    cfg.sources = 3;
    cfg.n_coarse = 32;
    cfg.q = 2.0;
    cfg.drift = sine_drift(0.05);
    const auto rep = verify_h1q(cfg);
    CHECK(rep.refinement_stable);
    CHECK(rep.warnings.empty());
    cfg.drift = sine_drift(0.5);
    CHECK_FALSE(verify_h1q(cfg).warnings.empty());
    AprioriConfig bad{levy::LevyModel::stable_like(0.5, levy::SphericalMeasure::cylindrical(1))};
    CHECK_THROWS_AS(verify_h1q(bad), Error);
}
