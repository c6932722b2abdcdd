#include "doctest.h"

#include <cmath>
#include <filesystem>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "levylab/core/error.hpp"
#include "levylab/zvonkin/zvonkin.hpp"

using namespace levylab;
using namespace levylab::zvonkin;

namespace {

const GridSpec kGrid{1, 32, 2.0 * M_PI};

levy::LevyModel model05() { return levy::LevyModel::stable_like(0.5, levy::SphericalMeasure::cylindrical(1)); }

DriftField sine_drift(double a) {
    return DriftField::of_x([a](std::span<const double> x, std::span<double> b) { b[0] = a * std::sin(x[0]); }, 1.0, a);
}

ZvonkinMap sine_map(double lambda = 1.0) {
    return ZvonkinMap::from_function(kGrid, {0.0, 1.0},
                                     [](double, std::span<const double> x, std::span<double> u) { u[0] = 0.1 * std::sin(x[0]); },
                                     lambda);
}

double newton_root(double y) {
    double x = y;
    for (int i = 0; i < 100; ++i) x -= (x + 0.1 * std::sin(x) - y) / (1.0 + 0.1 * std::cos(x));
    return x;
}

sde::SimConfig sim_config(double dt, std::size_t paths) {
    sde::SimConfig c;
    c.x0 = {0.4};
    c.T = 0.5;
    c.dt = dt;
    c.eps = 0.05;
    c.thinning_bound = 1.0;
    c.n_paths = paths;
    c.seed = 21;
    return c;
}

} // namespace

TEST_CASE("zero drift gives the identity map") {
    BuildOptions opt;
    opt.T = 0.5;
    const auto map = build(model05(), JumpKernel::constant(1.0), DriftField::zero(), kGrid, opt);
    CHECK(map.lambda() == 1.0);
    CHECK(map.certificate() == 0.0);
    for (double y : {-2.0, 0.3, 5.0}) {
        const std::vector<double> v{y};
        CHECK(map.forward(0.2, v)[0] == y);
        CHECK(map.inverse(0.2, v)[0] == y);
    }
    const nonlocal::Generator gen(model05(), kGrid);
    const std::vector<double> y{1.3}, z{0.7};
    const auto tc = transformed_coefficients(map, gen, JumpKernel::constant(1.0), 0.1, y);
    CHECK(tc.b_tilde[0] == 0.0);
    CHECK(tc.g(z)[0] == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(tc.sigma_tilde(z) == 1.0);

    auto cfg = sim_config(0.01, 4);
    const auto rep = verify_transform(model05(), JumpKernel::constant(1.0), DriftField::zero(), map, cfg);
    CHECK(rep.max_discrepancy < 1e-12);
}

TEST_CASE("sine map inverse and round trips") {
    const auto map = sine_map();
    CHECK(map.u_sup() == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(map.grad_sup() == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(map.certified());
    const std::vector<double> one{1.0};
    CHECK(map.inverse(0.5, one)[0] == doctest::Approx(newton_root(1.0)).epsilon(1e-12));
    CHECK(newton_root(1.0) == doctest::Approx(0.9204).epsilon(1e-4));
    for (double y = -4.0; y <= 10.0; y += 0.37) {
        const std::vector<double> v{y};
        CHECK(std::abs(map.forward(0.3, map.inverse(0.3, v))[0] - y) < 1e-10);
        CHECK(std::abs(map.inverse(0.3, map.forward(0.3, v))[0] - y) < 1e-10);
    }
    RngStream rng(3);
    const auto rep = bilipschitz_check(map, 10000, rng);
    CHECK(rep.pass);
    CHECK(rep.min_ratio >= 0.9 - 1e-9);
    CHECK(rep.max_ratio <= 1.1 + 1e-9);

    const auto cubic = ZvonkinMap::from_function(
        kGrid, {0.0, 1.0}, [](double, std::span<const double> x, std::span<double> u) { u[0] = 0.1 * std::sin(x[0]); }, 1.0,
        Interpolation::cubic);
    CHECK(cubic.inverse(0.5, one)[0] == doctest::Approx(newton_root(1.0)).epsilon(1e-5));
}

TEST_CASE("transformed coefficients of the sine map") {
    const double lambda = 3.0;
    const auto map = sine_map(lambda);
    const nonlocal::Generator gen(model05(), kGrid);
    // int_1^100 (cos r - 1) r^{-3/2} dr, unit panels.
    double tail = 0.0;
    for (int k = 1; k < 100; ++k)
        tail += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
            [](double r) { return (std::cos(r) - 1.0) * std::pow(r, -1.5); }, k, k + 1, 0, 1e-14);
    const JumpKernel kernel = JumpKernel::constant(1.0);
    for (double y : {0.2, 1.0, 2.5, 4.0}) {
        const std::vector<double> yv{y};
        const auto tc = transformed_coefficients(map, gen, kernel, 0.5, yv);
        const double xp = newton_root(y);
        const double oracle = lambda * 0.1 * std::sin(xp) - 2.0 * 0.1 * std::sin(xp) * tail;
        CHECK(tc.b_tilde[0] == doctest::Approx(oracle).epsilon(1e-6));
        for (double z : {-3.0, -0.4, 0.01, 0.9, 7.0}) {
            const std::vector<double> zv{z};
            CHECK(std::abs(tc.g(zv)[0]) <= 1.5 * std::abs(z));
        }
    }
}

TEST_CASE("build with a smooth small drift") {
    BuildOptions opt;
    opt.T = 0.5;
    opt.dt = 0.01;
    opt.evaluate_all = true;
    std::vector<std::string> warnings;
    const auto map = build(model05(), JumpKernel::constant(1.0), sine_drift(0.8), kGrid, opt, &warnings);
    CHECK(warnings.empty());
    CHECK(map.certified());
    const auto& s = map.schedule();
    CHECK(s.size() == opt.lambda_schedule.size());
    for (std::size_t i = 1; i < s.size(); ++i) {
        CHECK(s[i].u_sup <= s[i - 1].u_sup);
        CHECK(s[i].grad_sup <= s[i - 1].grad_sup);
    }
    for (const auto& e : s)
        if (e.certificate <= 0.5) {
            CHECK(map.lambda() == e.lambda);
            break;
        }
    RngStream rng(8);
    CHECK(bilipschitz_check(map, 2000, rng).pass);

    const std::string dir = "/tmp/levylab_zvonkin_map";
    std::filesystem::remove_all(dir);
    map.save(dir);
    const auto loaded = ZvonkinMap::load(dir);
    CHECK(loaded.lambda() == map.lambda());
    CHECK(loaded.certificate() == doctest::Approx(map.certificate()).epsilon(1e-12));
    CHECK(loaded.schedule().size() == s.size());
    const std::vector<double> y{1.1};
    CHECK(loaded.inverse(0.25, y)[0] == doctest::Approx(map.inverse(0.25, y)[0]).epsilon(1e-12));
}

TEST_CASE("smallness unattainable") {
    BuildOptions opt;
    opt.T = 0.5;
    opt.lambda_schedule = {1.0};
    try {
        (void)build(model05(), JumpKernel::constant(1.0), sine_drift(3.0), kGrid, opt);
        FAIL("expected failure");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::smallness_unattainable);
        CHECK(e.detail() > 0.5);
    }
}

TEST_CASE("transformed dynamics converge under step halving") {
    const auto drift = sine_drift(0.8);
    std::vector<double> disc;
    for (double dt : {0.02, 0.01}) {
        BuildOptions opt;
        opt.T = 0.5;
        opt.dt = dt;
        const auto map = build(model05(), JumpKernel::constant(1.0), drift, kGrid, opt);
        disc.push_back(verify_transform(model05(), JumpKernel::constant(1.0), drift, map, sim_config(dt, 8)).max_discrepancy);
    }
    CHECK(disc[1] / disc[0] == doctest::Approx(0.5).epsilon(0.3));
}
