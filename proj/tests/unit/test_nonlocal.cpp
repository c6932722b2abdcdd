#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "levylab/core/error.hpp"
#include "levylab/core/quadrature.hpp"
#include "levylab/nonlocal/generator.hpp"

using namespace levylab;
using namespace levylab::nonlocal;

namespace {

GridSpec grid1(std::size_t n) { return GridSpec{1, n, 2.0 * M_PI}; }

GridField cosine(const GridSpec& s, double k) {
    return GridField::from_function(s, [k](std::span<const double> x) { return std::cos(k * x[0]); });
}

levy::SphericalMeasure two_atoms() { return levy::SphericalMeasure::cylindrical(1); }

JumpKernel sine_kernel(bool through_quadrature) {
    auto k = JumpKernel::of_x([](std::span<const double> x) { return 2.0 + std::sin(x[0]); }, 1.0, 3.0, 1.0, 1.0);
    k.depends_on_z = through_quadrature;
    return k;
}

} // namespace

TEST_CASE("generator kills constants") {
    const auto s = grid1(128);
    const GridField one(s, 1.0);
    Generator g(levy::LevyModel::stable_like(0.5, two_atoms()), s);
    CHECK(g.apply(one, JumpKernel::constant(1.0), DriftField::constant({0.7}), 0.0).value.max_abs() < 1e-10);
    Generator gt(levy::LevyModel::truncated(1.0, two_atoms()), s);
    CHECK(gt.apply_quadrature(one, sine_kernel(true), 0.0).value.max_abs() < 1e-10);
}

TEST_CASE("plane wave equals symbol multiplication") {
    const auto s = grid1(64);
    const auto model = levy::LevyModel::pure_stable(0.5, two_atoms());
    Generator g(model, s);
    const auto u = cosine(s, 1.0);
    const double b = 0.3;
    const auto r = g.apply(u, JumpKernel::constant(1.0), DriftField::constant({b}), 0.0);
    const double psi = -2.0 * std::sqrt(2.0 * M_PI);
    const auto expected =
        GridField::from_function(s, [&](std::span<const double> x) { return psi * std::cos(x[0]) - b * std::sin(x[0]); });
    CHECK((r.value - expected).max_abs() < 1e-6);
    CHECK(r.remainder_bound == 0.0);
    CHECK((apply_generator(u, model, JumpKernel::constant(1.0), DriftField::zero(), 0.0) - u * psi).max_abs() < 1e-6);
}

TEST_CASE("quadrature path agrees with the symbol within its remainder bound") {
    const auto s = grid1(64);
    for (double alpha : {0.5, 1.0}) {
        const auto model = levy::LevyModel::truncated(alpha, two_atoms());
        GeneratorOptions opt;
        opt.eps_q = 1e-6;
        Generator g(model, s, opt);
        for (double k : {1.0, 3.0}) {
            const auto u = cosine(s, k);
            auto kernel = JumpKernel::constant(1.0);
            const auto q = g.apply_quadrature(u, kernel, 0.0);
            const std::vector<double> xi{k};
            const double psi = levy::symbol(model, xi).real();
            const double err = (q.value - u * psi).max_abs();
            CHECK(err <= q.remainder_bound + 1e-8);
            CHECK(err < 1e-4);
        }
    }
}

TEST_CASE("quadrature path with a kernel that is odd in z") {
    // sigma(z) = 1 + z/2 on the two-atom truncated model with alpha = 1/2:
    // psi_sigma(1) = int_0^1 [2 (cos r - 1) + i r sin r] r^{-3/2} dr.
    const auto s = grid1(64);
    const auto model = levy::LevyModel::truncated(0.5, two_atoms());
    JumpKernel kernel;
    kernel.eval = [](double, std::span<const double>, std::span<const double> z) { return 1.0 + 0.5 * z[0]; };
    kernel.kappa0 = 0.5;
    kernel.kappa1 = 1.5;
    kernel.depends_on_x = false;
    kernel.even_in_z = false;
    GeneratorOptions opt;
    opt.eps_q = 1e-4;
    Generator g(model, s, opt);
    const auto u = cosine(s, 1.0);
    const auto q = g.apply_quadrature(u, kernel, 0.0);
    // Oracle: substitute r = v^2 to remove the endpoint singularity.
    auto re_f = [](double v) { const double r = v * v; return 2.0 * (std::cos(r) - 1.0) * std::pow(r, -1.5) * 2.0 * v; };
    auto im_f = [](double v) { const double r = v * v; return r * std::sin(r) * std::pow(r, -1.5) * 2.0 * v; };
    const double re = quad::integrate(re_f, 1e-12, 1.0, 64);
    const double im = quad::integrate(im_f, 1e-12, 1.0, 64);
    const auto expected =
        GridField::from_function(s, [&](std::span<const double> x) { return re * std::cos(x[0]) - im * std::sin(x[0]); });
    const double err = (q.value - expected).max_abs();
    CHECK(err <= q.remainder_bound);
    CHECK(err < 1e-5);
}

TEST_CASE("linearity and serial reference") {
    const GridSpec s{2, 16, 2.0 * M_PI};
    const auto model = levy::LevyModel::truncated(1.0, levy::SphericalMeasure::cylindrical(2));
    Generator g(model, s);
    auto rng = RngStream::derive(9, 0);
    const auto u = lp::random_field(s, rng, 0, 6);
    const auto v = lp::random_field(s, rng, 0, 6);
    JumpKernel kernel;
    kernel.eval = [](double t, std::span<const double> x, std::span<const double> z) {
        return 1.5 + 0.3 * std::sin(x[0] + t) * std::cos(z[0] + z[1]);
    };
    kernel.kappa0 = 1.2;
    kernel.kappa1 = 1.8;
    const auto lhs = g.apply_quadrature(u * 2.0 + v * -0.5, kernel, 0.3).value;
    const auto rhs = g.apply_quadrature(u, kernel, 0.3).value * 2.0 + g.apply_quadrature(v, kernel, 0.3).value * -0.5;
    CHECK((lhs - rhs).max_abs() < 1e-10);
    const auto par = g.apply_quadrature(u, kernel, 0.3, Exec::parallel).value;
    const auto ser = g.apply_quadrature(u, kernel, 0.3, Exec::serial).value;
    CHECK((par - ser).max_abs() < 1e-11 * std::max(1.0, par.max_abs()));
}

TEST_CASE("x-dependent kernel: symbol path matches quadrature path") {
    const auto s = grid1(64);
    const auto model = levy::LevyModel::truncated(0.5, two_atoms());
    GeneratorOptions opt;
    opt.eps_q = 1e-4;
    Generator g(model, s, opt);
    auto rng = RngStream::derive(10, 0);
    const auto u = lp::random_field(s, rng, 0, 5);
    const auto fast = g.apply_jump(u, sine_kernel(false), 0.0).value;
    const auto slow = g.apply_jump(u, sine_kernel(true), 0.0);
    CHECK((fast - slow.value).max_abs() <= slow.remainder_bound + 1e-8);
}

TEST_CASE("refinement error when the cutoff is too coarse") {
    const auto s = grid1(16);
    GeneratorOptions opt;
    opt.eps_q = 0.5;
    opt.remainder_rel_tol = 1e-3;
    Generator g(levy::LevyModel::truncated(0.5, two_atoms()), s, opt);
    CHECK_THROWS_AS(g.apply(cosine(s, 3.0), sine_kernel(true), DriftField::zero(), 0.0), Error);
}

TEST_CASE("kernel hypothesis sampling") {
    auto rng = RngStream::derive(12, 0);
    const auto rep = check_kernel(sine_kernel(false), 1, 2.0 * M_PI, rng);
    CHECK(rep.bounds_ok);
    CHECK(rep.holder_ok);
    CHECK(rep.min_value >= 1.0);
    CHECK(rep.max_value <= 3.0);
    auto bad = sine_kernel(false);
    bad.kappa1 = 2.5;
    CHECK_FALSE(check_kernel(bad, 1, 2.0 * M_PI, rng).bounds_ok);
}

TEST_CASE("maximum principle sign") {
    const auto model = levy::LevyModel::stable_like(0.5, two_atoms());
    for (int j = 2; j <= 5; ++j) {
        auto rng = RngStream::derive(13, static_cast<std::uint64_t>(j));
        const auto v = maxprinciple_check(model, 1.0, j, 100, rng);
        CHECK(v.size() == 100);
        CHECK(*std::max_element(v.begin(), v.end()) < 0.0);
        auto rng2 = RngStream::derive(13, static_cast<std::uint64_t>(j));
        const auto v2 = maxprinciple_check(model, 2.0, j, 100, rng2);
        for (std::size_t i = 0; i < v.size(); ++i) CHECK(v2[i] == doctest::Approx(2.0 * v[i]).epsilon(1e-13));
    }
}

TEST_CASE("coercivity") {
    const auto s = grid1(256);
    lp::DyadicPartition part(s);
    const auto model = levy::LevyModel::pure_stable(0.5, two_atoms());
    Generator g(model, s);
    for (int j = 2; j <= 5; ++j) {
        const auto f = cosine(s, std::ldexp(1.0, j));
        const auto c = coercivity_check(f, j, 2.0, g, 1.0, part);
        const std::vector<double> xi{std::ldexp(1.0, j)};
        CHECK(c.lhs == doctest::Approx(levy::symbol(model, xi).real() * c.mass).epsilon(1e-10));
        CHECK(c.lhs < 0.0);
    }
    auto rng = RngStream::derive(14, 0);
    const auto f = lp::random_field(s, rng, 0, 60);
    for (int j = 2; j <= 5; ++j) CHECK(coercivity_check(f, j, 4.0, g, 1.0, part).lhs < 0.0);
    CHECK_THROWS_AS(coercivity_check(cosine(s, 1.0), 4, 2.0, g, 1.0, part), Error);
}

TEST_CASE("operator commutator") {
    const auto s = grid1(256);
    lp::DyadicPartition part(s);
    const auto model = levy::LevyModel::stable_like(0.5, two_atoms());
    Generator g(model, s);
    auto rng = RngStream::derive(15, 0);
    const auto u = lp::random_field(s, rng, 1, 127, 1.0);
    CHECK(commutator_op(3, u, g, JumpKernel::constant(2.0), 1.0, 0.5, INFINITY, part).norm < 1e-10);
    CHECK(commutator_op(3, GridField(s, 1.0), g, sine_kernel(false), 1.0, 0.5, INFINITY, part).norm < 1e-10);
    CHECK_THROWS_AS(commutator_op(3, u, g, sine_kernel(false), 1.0, 1.5, INFINITY, part), Error);
    CHECK_THROWS_AS(commutator_op(3, u, g, sine_kernel(false), 1.0, 0.0, INFINITY, part), Error);
    std::vector<double> js, norms;
    for (int j = 2; j <= 6; ++j) {
        js.push_back(j);
        norms.push_back(commutator_op(j, u, g, sine_kernel(false), 1.0, 0.5, INFINITY, part).norm);
    }
    CHECK(lp::fit_log2_slope(js, norms).slope <= -(1.0 - 1.0 + 0.5) + 0.2);
}
