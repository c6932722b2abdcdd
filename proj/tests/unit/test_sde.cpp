#include "doctest.h"

#include <cmath>
#include <fstream>

#include "levylab/core/error.hpp"
#include "levylab/sde/simulator.hpp"

using namespace levylab;
using namespace levylab::sde;

namespace {

levy::LevyModel stable1(double alpha) { return levy::LevyModel::pure_stable(alpha, levy::SphericalMeasure::cylindrical(1)); }
levy::LevyModel trunc1(double alpha) { return levy::LevyModel::truncated(alpha, levy::SphericalMeasure::cylindrical(1)); }

SimConfig config(double T, double dt, double eps, double bound, std::size_t paths) {
    SimConfig c;
    c.x0 = {0.0};
    c.T = T;
    c.dt = dt;
    c.eps = eps;
    c.thinning_bound = bound;
    c.n_paths = paths;
    c.seed = 7;
    return c;
}

DriftField linear_drift(double c) {
    return DriftField::of_x([c](std::span<const double> x, std::span<double> b) { b[0] = c * x[0]; }, 1.0, c);
}

} // namespace

TEST_CASE("pure ODE when the jump mass vanishes") {
    const Simulator sim(trunc1(0.5), JumpKernel::constant(1.0), DriftField::constant({1.0}), config(1.0, 0.01, 1.0, 1.0, 1));
    CHECK(sim.jump_mass() == 0.0);
    RngStream rng(3);
    const auto ev = sim.events(rng);
    CHECK(ev.size() == 0);
    const auto path = sim.run(ev, sim.config().x0);
    CHECK(path.times.size() == 101);
    CHECK(path.states.back()[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("path records follow the event stream") {
    const auto kernel = JumpKernel::of_x([](std::span<const double> x) { return 1.0 + 0.5 * std::sin(x[0]); }, 0.5, 1.5, 0.5, 1.0);
    const Simulator sim(trunc1(0.5), kernel, DriftField::constant({0.3}), config(1.0, 0.05, 0.1, 2.0, 1));
    RngStream rng(11);
    const auto ev = sim.events(rng);
    REQUIRE(ev.size() > 5);
    const auto path = sim.run(ev, sim.config().x0);
    CHECK(path.states.size() == path.times.size());
    CHECK(path.events.size() == ev.size());
    for (std::size_t i = 1; i < path.times.size(); ++i) CHECK(path.times[i] > path.times[i - 1]);
    // At each event: accepted iff r <= sigma(t, X_{t-}, z), and the state jumps by z exactly when accepted.
    for (const auto& e : path.events) {
        const auto it = std::find(path.times.begin(), path.times.end(), e.t);
        REQUIRE(it != path.times.end());
        const auto k = static_cast<std::size_t>(it - path.times.begin());
        const double before = path.states[k - 1][0] + (e.t - path.times[k - 1]) * 0.3;
        const double sigma = 1.0 + 0.5 * std::sin(before);
        CHECK(e.accepted == (e.r <= sigma));
        CHECK(path.states[k][0] - before == doctest::Approx(e.accepted ? e.z[0] : 0.0).epsilon(1e-9));
    }
    const std::string file = "/tmp/levylab_path.csv";
    write_path_csv(path, file);
    std::ifstream in(file);
    std::string header;
    std::getline(in, header);
    CHECK(header == "t,x_1,event,accepted\r");
}

TEST_CASE("thinning laws") {
    SUBCASE("constant kernel") {
        const Simulator sim(trunc1(0.5), JumpKernel::constant(0.5), DriftField::zero(), config(1.0, 0.1, 0.1, 1.0, 1));
        const auto rep = thinning_law_check(sim, 10000);
        CHECK(rep.expected_events == doctest::Approx(2.0 * (std::sqrt(10.0) - 1.0) / 0.5));
        CHECK(rep.p_value > 0.01);
        CHECK(rep.dof > 5);
        CHECK(std::abs(rep.z_score) < 3.0);
        CHECK(rep.expected_accepted == doctest::Approx(0.5 * static_cast<double>(rep.proposals)));
    }
    SUBCASE("state-dependent kernel") {
        const auto kernel = JumpKernel::of_x([](std::span<const double> x) { return 1.0 + 0.5 * std::sin(x[0]); }, 0.5, 1.5, 0.5, 1.0);
        const Simulator sim(trunc1(0.5), kernel, DriftField::constant({0.5}), config(1.0, 0.1, 0.1, 2.0, 1));
        const auto rep = thinning_law_check(sim, 4000);
        CHECK(rep.p_value > 0.01);
        CHECK(std::abs(rep.z_score) < 3.0);
    }
}

TEST_CASE("thinning bound below the kernel is a contract violation") {
    const auto liar = JumpKernel::of_x([](std::span<const double>) { return 2.0; }, 1.0, 1.0, 1.0, 1.0);
    const Simulator sim(trunc1(0.5), liar, DriftField::zero(), config(1.0, 0.1, 0.1, 1.0, 1));
    RngStream rng(5);
    const auto ev = sim.events(rng);
    REQUIRE(ev.size() > 0);
    try {
        (void)sim.run(ev, sim.config().x0);
        FAIL("expected a contract violation");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::contract_violation);
    }
    CHECK_THROWS_AS(Simulator(trunc1(0.5), JumpKernel::constant(2.0), DriftField::zero(), config(1.0, 0.1, 0.1, 1.0, 1)), Error);
}

TEST_CASE("characteristic function of the pure-stable process") {
    auto cfg = config(0.1, 0.1, 1e-4, 1.0, 20000);
    const Simulator sim(stable1(0.5), JumpKernel::constant(1.0), DriftField::zero(), cfg);
    const std::vector<double> xi{1.0};
    const auto rep = characteristic_function(sim, xi);
    CHECK(rep.reference.real() == doctest::Approx(std::exp(-0.1 * 2.0 * std::sqrt(2.0 * M_PI))).epsilon(1e-8));
    CHECK(rep.reference.real() == doctest::Approx(0.6058).epsilon(1e-3));
    CHECK(rep.pass);
    CHECK(rep.discrepancy <= 3.0 * rep.stderr_ + rep.cutoff_allowance);

    cfg.exec = Exec::serial;
    cfg.n_paths = 2000;
    const Simulator ser(stable1(0.5), JumpKernel::constant(1.0), DriftField::zero(), cfg);
    cfg.exec = Exec::parallel;
    const Simulator par(stable1(0.5), JumpKernel::constant(1.0), DriftField::zero(), cfg);
    const auto a = characteristic_function(ser, xi), b = characteristic_function(par, xi);
    CHECK(a.estimate == b.estimate);
    CHECK(a.stderr_ == b.stderr_);
}

TEST_CASE("alpha = 1 compensator") {
    auto cfg = config(1.0, 0.1, 0.01, 1.5, 1);
    cfg.compensator = CompensatorMode::quadrature;
    const Simulator sym(trunc1(1.0), JumpKernel::constant(1.0), DriftField::zero(), cfg);
    std::vector<double> out(1);
    const std::vector<double> x{0.3};
    sym.compensator(0.0, x, out);
    CHECK(std::abs(out[0]) < 1e-13);

    JumpKernel skew;
    skew.eval = [](double, std::span<const double>, std::span<const double> z) { return z[0] > 0 ? 1.5 : 0.5; };
    skew.kappa0 = 0.5;
    skew.kappa1 = 1.5;
    skew.depends_on_x = false;
    skew.even_in_z = false;
    const Simulator asym(trunc1(1.0), skew, DriftField::zero(), cfg);
    asym.compensator(0.0, x, out);
    // -(1.5 - 0.5) int_eps^1 r r^{-2} dr
    CHECK(out[0] == doctest::Approx(-std::log(100.0)).epsilon(1e-12));
}

TEST_CASE("coupled paths") {
    const auto kernel = JumpKernel::of_x([](std::span<const double> x) { return 1.0 + 0.5 * std::sin(x[0]); }, 0.5, 1.5, 0.5, 1.0);
    const auto cfg = config(1.0, 0.01, 0.1, 2.0, 1);
    const std::vector<double> x0{0.2}, x1{0.7};
    RngStream r1(9), r2(9);
    const auto [a, b] = simulate_coupled(trunc1(0.5), kernel, DriftField::constant({0.4}), cfg, x0, x0, r1);
    CHECK(a.states == b.states);
    CHECK(a.times == b.times);
    const auto path = simulate(trunc1(0.5), kernel, DriftField::constant({0.4}), cfg, r2);
    CHECK(path.events.size() == a.events.size());

    RngStream r3(4);
    const auto [c, d] = simulate_coupled(trunc1(0.5), JumpKernel::constant(1.0), linear_drift(0.5), cfg, x0, x1, r3);
    REQUIRE(c.events.size() == d.events.size());
    for (std::size_t i = 0; i < c.events.size(); ++i) CHECK(c.events[i].accepted == d.events[i].accepted);
    // Only the drift separates the paths: each Euler piece multiplies the gap by 1 + 0.5 h.
    REQUIRE(c.times == d.times);
    double gap = 0.5;
    for (std::size_t i = 1; i < c.times.size(); ++i) gap *= 1.0 + 0.5 * (c.times[i] - c.times[i - 1]);
    const double sep = std::abs(c.states.back()[0] - d.states.back()[0]);
    CHECK(sep == doctest::Approx(gap).epsilon(1e-10));

    auto lin_cfg = config(1.0, 0.01, 0.1, 2.0, 1);
    lin_cfg.x0 = {0.3};
    const Simulator sim(trunc1(0.5), kernel, linear_drift(1.0), lin_cfg);
    const auto rep = coupled_divergence(sim, 1e-8, 100, 1.0);
    CHECK(rep.finite);
    CHECK(rep.max_exponent > 0.5);
    CHECK(rep.max_exponent < 2.0);
    // Euler growth per unit time lies between the full-step rate log(1 + dt) / dt and the exact rate 1.
    for (double e : rep.exponents) {
        CHECK(e >= 100.0 * std::log(1.01) - 1e-9);
        CHECK(e <= 1.0);
    }
}

TEST_CASE("Krylov functional") {
    const lp::GridSpec grid{1, 32, 2.0 * M_PI};
    const Simulator sim(stable1(0.5), JumpKernel::constant(1.0), DriftField::constant({0.5}), config(0.5, 0.05, 0.05, 1.0, 500));
    const std::vector<Vec> xs{{0.0}, {1.0}, {2.0}};
    const auto one = krylov_estimate(sim, pde::Source::constant(GridField(grid, 1.0)), grid, xs, 2.0);
    for (const auto& r : one.rows) {
        CHECK(r.estimate == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(r.stderr_ < 1e-12);
    }
    const auto bump = GridField::from_function(grid, [](std::span<const double> x) { return 1.0 + std::cos(x[0]); });
    const auto rep = krylov_estimate(sim, pde::Source::constant(bump), grid, xs, 2.0);
    for (const auto& r : rep.rows) CHECK(r.estimate >= 0.0);
    CHECK(rep.ratio > 0.0);
    CHECK(std::isfinite(rep.ratio));
    const std::string file = "/tmp/levylab_mc.csv";
    write_mc_csv(rep.rows, file);
    std::ifstream in(file);
    std::string header;
    std::getline(in, header);
    CHECK(header == "x,estimate,stderr,n_paths\r");
}

TEST_CASE("Feynman-Kac identity") {
    const lp::GridSpec grid{1, 32, 2.0 * M_PI};
    const std::vector<Vec> xs{{0.0}, {1.5}, {3.0}};
    const auto drift = DriftField::of_x([](std::span<const double> x, std::span<double> b) { b[0] = 0.5 * std::sin(x[0]); }, 1.0, 0.5);
    const Simulator sim(levy::LevyModel::stable_like(0.5, levy::SphericalMeasure::cylindrical(1)), JumpKernel::constant(1.0),
                        drift, config(0.5, 0.02, 0.01, 1.0, 1000));
    SUBCASE("constant source") {
        const auto rep = feynman_kac_check(sim, [](double, std::span<const double>) { return 0.8; }, true, grid, xs);
        for (const auto& r : rep.rows) {
            CHECK(r.pde_value == doctest::Approx(0.4).epsilon(1e-10));
            CHECK(r.mc_estimate == doctest::Approx(0.4).epsilon(1e-12));
        }
        CHECK(rep.pass);
        CHECK(rep.balance);
    }
    SUBCASE("zero source") {
        const auto rep = feynman_kac_check(sim, [](double, std::span<const double>) { return 0.0; }, true, grid, xs);
        for (const auto& r : rep.rows) {
            CHECK(r.pde_value == 0.0);
            CHECK(r.mc_estimate == 0.0);
        }
    }
    SUBCASE("smooth source") {
        const auto rep = feynman_kac_check(
            sim, [](double t, std::span<const double> x) { return std::cos(x[0]) * (1.0 + t); }, false, grid, xs);
        CHECK(rep.pass);
        for (const auto& r : rep.rows) CHECK(r.discrepancy <= 3.0 * r.mc_stderr + r.allowance);
    }
}
