#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "levylab/core/error.hpp"
#include "levylab/core/quadrature.hpp"
#include "levylab/levy/levy_model.hpp"

using namespace levylab;
using namespace levylab::levy;

namespace {

// int_0^inf (cos s - 1) s^{-1-a} ds = Gamma(-a) cos(pi a / 2), with -pi/2 at a = 1.
double stable_constant(double a) {
    if (a == 1.0) return -M_PI / 2.0;
    return std::tgamma(-a) * std::cos(M_PI * a / 2.0);
}

SphericalMeasure two_atoms() { return SphericalMeasure::cylindrical(1); }

// Brute-force oracle: min over n equally spaced directions in the plane.
double brute_nondegeneracy(const SphericalMeasure& s, double alpha, int n) {
    double best = 1e300;
    for (int i = 0; i < n; ++i) {
        const double t = M_PI * i / n;
        double v = 0.0;
        for (const auto& a : s.atoms())
            v += a.weight * std::pow(std::abs(std::cos(t) * a.direction[0] + std::sin(t) * a.direction[1]), alpha);
        best = std::min(best, v);
    }
    return best;
}

} // namespace

TEST_CASE("spherical measure validation") {
    CHECK_THROWS_AS(SphericalMeasure(std::vector<DirectionAtom>{}), Error);
    CHECK_THROWS_AS(SphericalMeasure({{{1.0}, 1.0}}), Error);
    CHECK_THROWS_AS(SphericalMeasure({{{1.1}, 1.0}, {{-1.1}, 1.0}}), Error);
    CHECK_THROWS_AS(SphericalMeasure({{{1.0}, 1.0}, {{-1.0}, 2.0}}), Error);
    CHECK(two_atoms().total_mass() == 2.0);
    CHECK(SphericalMeasure::isotropic(2, 64, 3.0).total_mass() == doctest::Approx(3.0));
}

TEST_CASE("nondegeneracy") {
    CHECK(check_nondegeneracy(LevyModel::truncated(0.5, two_atoms()), 100) == doctest::Approx(2.0));
    const auto cyl = LevyModel::truncated(1.0, SphericalMeasure::cylindrical(2));
    const double v = check_nondegeneracy(cyl, 10000);
    CHECK(v == doctest::Approx(brute_nondegeneracy(cyl.spherical(), 1.0, 10000)).epsilon(1e-6));
    CHECK(v == doctest::Approx(2.0).epsilon(1e-6));
    const SphericalMeasure e1({{{1.0, 0.0}, 1.0}, {{-1.0, 0.0}, 1.0}});
    CHECK(check_nondegeneracy(LevyModel::truncated(0.5, e1), 1000) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("symbol at zero and symmetry") {
    const auto m = LevyModel::stable_like(0.5, SphericalMeasure::cylindrical(2));
    const Vec zero{0.0, 0.0};
    CHECK(symbol(m, zero) == cplx(0.0, 0.0));
    const Vec xi{1.3, -0.4}, mxi{-1.3, 0.4};
    const cplx a = symbol(m, xi), b = symbol(m, mxi);
    CHECK(std::abs(a.imag()) < 1e-12);
    CHECK(a.real() < 0.0);
    CHECK(a.real() == doctest::Approx(b.real()).epsilon(1e-12));
}

TEST_CASE("pure stable symbol matches the gamma-function constant") {
    for (double alpha : {0.3, 0.5, 0.8, 1.0}) {
        const auto m = LevyModel::pure_stable(alpha, two_atoms());
        INFO("alpha = " << alpha << " diff = " << m.stable_unit_integral() - stable_constant(alpha));
        CHECK(m.stable_unit_integral() == doctest::Approx(stable_constant(alpha)).epsilon(1e-9));
    }
    const auto m = LevyModel::pure_stable(0.5, two_atoms());
    const Vec one{1.0};
    CHECK(symbol(m, one).real() == doctest::Approx(-2.0 * std::sqrt(2.0 * M_PI)).epsilon(1e-9));
    CHECK(symbol(m, one).real() == doctest::Approx(-5.0133).epsilon(1e-4));
}

TEST_CASE("truncated symbol matches direct quadrature oracle") {
    // psi(xi) = 2 int_0^1 (cos(r xi) - 1) r^{-1-a} dr; oracle integrates the series
    // sum_{n>=1} (-1)^n xi^{2n} / ((2n)! (2n - a)).
    for (double alpha : {0.5, 1.0}) {
        const auto m = LevyModel::truncated(alpha, two_atoms());
        for (double x : {0.5, 3.0, 17.0}) {
            double series = 0.0, term = 1.0;
            for (int n = 1; n < 200; ++n) {
                term *= -x * x / ((2.0 * n - 1.0) * (2.0 * n));
                series += term / (2.0 * n - alpha);
                if (std::abs(term) < 1e-300) break;
            }
            const Vec xi{x};
            const auto sv = symbol_with_residual(m, xi);
            CHECK(sv.value.real() == doctest::Approx(2.0 * series).epsilon(1e-7));
            CHECK(sv.residual <= 1e-6 * std::abs(sv.value.real()));
        }
    }
}

TEST_CASE("pure stable scaling") {
    const auto m = LevyModel::pure_stable(0.7, SphericalMeasure::isotropic(2, 16));
    const Vec xi{0.6, 0.8};
    const cplx base = symbol(m, xi);
    for (double t : {0.5, 2.0, 10.0}) {
        const Vec txi{0.6 * t, 0.8 * t};
        CHECK(symbol(m, txi).real() == doctest::Approx(std::pow(t, 0.7) * base.real()).epsilon(5e-3));
    }
}

TEST_CASE("symbol bound fit") {
    std::vector<Vec> xs;
    for (int i = 0; i <= 60; ++i) xs.push_back({std::pow(64.0, i / 60.0)});
    const auto pure = LevyModel::pure_stable(0.5, two_atoms());
    const auto fit = symbol_bound_fit(pure, xs);
    CHECK(fit.c0 == doctest::Approx(2.0 * std::sqrt(2.0 * M_PI)).epsilon(5e-3));
    CHECK(fit.c1 <= 1e-6);
    const auto trunc = LevyModel::truncated(0.5, two_atoms());
    const auto tfit = symbol_bound_fit(trunc, xs);
    CHECK(tfit.c0 > 0.0);
    CHECK(tfit.c1 > 0.0);
    for (const auto& x : xs) CHECK(symbol(trunc, x).real() <= -tfit.c0 * std::pow(std::abs(x[0]), 0.5) + tfit.c1 + 1e-12);
    const SphericalMeasure e1({{{1.0, 0.0}, 1.0}, {{-1.0, 0.0}, 1.0}});
    std::vector<Vec> xs2;
    for (const auto& x : xs) xs2.push_back({0.0, x[0]});
    CHECK_THROWS_AS(symbol_bound_fit(LevyModel::truncated(0.5, e1), xs2), Error);
}

TEST_CASE("restricted mass") {
    const auto m = LevyModel::truncated(0.5, two_atoms());
    CHECK(restricted_mass(m, 0.25) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(restricted_mass(m, 1.0) == 0.0);
    double prev = 1e300;
    for (double e = 0.01; e <= 1.0; e += 0.01) {
        const double v = restricted_mass(m, e);
        CHECK(v <= prev);
        prev = v;
    }
    CHECK_THROWS_AS(restricted_mass(m, 0.0), Error);
    const auto tail = LevyModel::stable_like(0.5, two_atoms());
    CHECK(tail.tail_mass() == doctest::Approx(2.0 * 2.0 * (1.0 - 0.1)).epsilon(1e-12));
}

TEST_CASE("sampler radial law and direction frequencies") {
    const auto m = LevyModel::truncated(0.5, two_atoms());
    const double eps = 0.25;
    JumpSampler s(m, eps);
    CHECK(s.mass() == doctest::Approx(4.0));
    auto rng = RngStream::derive(11, 0);
    const int n = 100000;
    std::vector<double> r(n);
    int positive = 0;
    for (int i = 0; i < n; ++i) {
        const Vec z = s.sample(rng);
        r[i] = std::abs(z[0]);
        positive += z[0] > 0.0;
    }
    std::sort(r.begin(), r.end());
    auto cdf = [&](double x) { return (1.0 / std::sqrt(eps) - 1.0 / std::sqrt(x)) / (1.0 / std::sqrt(eps) - 1.0); };
    double ks = 0.0;
    for (int i = 0; i < n; ++i) {
        const double f = cdf(r[i]);
        ks = std::max({ks, std::abs(f - static_cast<double>(i) / n), std::abs(f - static_cast<double>(i + 1) / n)});
    }
    CHECK(ks < 0.01);
    CHECK(std::abs(positive - n / 2.0) <= 3.0 * std::sqrt(n * 0.25));
    JumpSampler empty(m, 1.0);
    CHECK(empty.mass() == 0.0);
    CHECK_THROWS_AS(empty.sample(rng), Error);
    CHECK_THROWS_AS(sample_jump(m, 1.0, rng), Error);
}

TEST_CASE("sampler with non-unit profile and atom tail") {
    RadialProfile prof;
    prof.kappa = [](std::span<const double>, double r) { return 1.0 + r; };
    prof.kappa_low = 1.0;
    prof.kappa_high = 2.0;
    AtomTail tail{{{{3.0}, 0.5}, {{-3.0}, 0.5}}};
    const LevyModel m(0.5, two_atoms(), prof, tail);
    const double eps = 0.25;
    // mass = 2 int_eps^1 (1 + r) r^{-3/2} dr + 1
    const double expected = 2.0 * ((2.0 / std::sqrt(eps) - 2.0) + (2.0 - 2.0 * std::sqrt(eps))) + 1.0;
    CHECK(restricted_mass(m, eps) == doctest::Approx(expected).epsilon(1e-8));
    JumpSampler s(m, eps);
    auto rng = RngStream::derive(5, 1);
    const int n = 100000;
    int atoms = 0;
    std::vector<double> r;
    for (int i = 0; i < n; ++i) {
        const Vec z = s.sample(rng);
        if (std::abs(std::abs(z[0]) - 3.0) < 1e-15) ++atoms;
        else r.push_back(std::abs(z[0]));
    }
    const double p_atom = 1.0 / expected;
    CHECK(std::abs(atoms - n * p_atom) <= 3.0 * std::sqrt(n * p_atom * (1 - p_atom)));
    std::sort(r.begin(), r.end());
    auto F = [&](double x) {
        auto G = [](double y) { return -2.0 / std::sqrt(y) + 2.0 * std::sqrt(y); };
        return (G(x) - G(eps)) / (G(1.0) - G(eps));
    };
    double ks = 0.0;
    const double m_r = static_cast<double>(r.size());
    for (std::size_t i = 0; i < r.size(); ++i)
        ks = std::max({ks, std::abs(F(r[i]) - i / m_r), std::abs(F(r[i]) - (i + 1) / m_r)});
    CHECK(ks < 0.01);
}

TEST_CASE("power-law tail symbol matches brute-force quadrature") {
    const double alpha = 0.5, r_max = 100.0;
    const auto m = LevyModel::stable_like(alpha, two_atoms(), RadialProfile::constant_one(), r_max);
    const auto trunc = LevyModel::truncated(alpha, two_atoms());
    for (double x : {0.1, 3.0, 40.0, 200.0}) {
        auto f = [x](double r) { return (std::cos(x * r) - 1.0) * std::pow(r, -1.5); };
        const int panels = 4 * static_cast<int>(x * r_max) + 200;
        const double tail = 2.0 * quad::integrate(f, 1.0, r_max, panels);
        const Vec xi{x};
        const double expected = symbol(trunc, xi).real() + tail;
        CHECK(symbol(m, xi).real() == doctest::Approx(expected).epsilon(1e-9));
    }
}
