#pragma once

#include <array>
#include <cstddef>
#include <functional>

namespace levylab::quad {

inline constexpr std::size_t gauss_points = 16;

/// 16-point Gauss-Legendre rule on [-1,1].
struct GaussRule {
    std::array<double, gauss_points> nodes;
    std::array<double, gauss_points> weights;
};

const GaussRule& gauss16();

/// Composite Gauss-Legendre over [a,b] split into `panels` equal pieces.
double integrate(const std::function<double(double)>& f, double a, double b, int panels);

/// Panel count needed to resolve an integrand oscillating at angular rate `omega`
/// on an interval of length `len`.
int panels_for(double len, double omega);

} // namespace levylab::quad
