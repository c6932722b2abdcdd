#include "doctest.h"

#include <vector>

#include "levylab/core/error.hpp"
#include "levylab/core/exec.hpp"
#include "levylab/core/fft.hpp"
#include "levylab/core/quadrature.hpp"
#include "levylab/core/rng.hpp"

using namespace levylab;

TEST_CASE("pairwise sum matches exact sums") {
    std::vector<double> v(1000);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i + 1);
    CHECK(pairwise_sum(v) == doctest::Approx(500500.0));
    CHECK(pairwise_sum(std::span<const double>()) == 0.0);
}

TEST_CASE("derived streams are reproducible and distinct") {
    auto a = RngStream::derive(7, 3);
    auto b = RngStream::derive(7, 3);
    auto c = RngStream::derive(7, 4);
    const auto x = a.next();
    CHECK(x == b.next());
    CHECK(x != c.next());
    for (int i = 0; i < 1000; ++i) {
        const double u = a.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("gauss rule integrates polynomials and oscillations") {
    CHECK(quad::integrate([](double x) { return x * x * x * x; }, 0.0, 2.0, 1) == doctest::Approx(32.0 / 5.0));
    CHECK(quad::integrate([](double x) { return std::cos(x); }, 0.0, 20.0, quad::panels_for(20.0, 1.0)) ==
          doctest::Approx(std::sin(20.0)).epsilon(1e-12));
}

TEST_CASE("fft roundtrip and single mode") {
    const std::size_t n = 16;
    std::vector<cplx> f(n), c(n), g(n);
    for (std::size_t i = 0; i < n; ++i) f[i] = std::cos(2.0 * M_PI * 3.0 * static_cast<double>(i) / n);
    fft::forward(1, n, f, c);
    CHECK(std::abs(c[3] - cplx(0.5, 0.0)) < 1e-14);
    CHECK(std::abs(c[n - 3] - cplx(0.5, 0.0)) < 1e-14);
    fft::inverse(1, n, c, g);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(g[i] - f[i]) < 1e-14);
}

TEST_CASE("errors carry codes") {
    try {
        fail(ErrorCode::degeneracy, "x", 2.5);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::degeneracy);
        CHECK(e.detail() == 2.5);
    }
}
