#pragma once

#include <cmath>

namespace levylab {

/// cos(x) - 1 without cancellation near 0.
inline double cosm1(double x) {
    const double s = std::sin(0.5 * x);
    return -2.0 * s * s;
}

/// sin(x) - x without cancellation near 0.
inline double sinmx(double x) {
    if (std::abs(x) < 0.1) {
        const double x2 = x * x;
        return x * x2 * (-1.0 / 6.0 + x2 * (1.0 / 120.0 + x2 * (-1.0 / 5040.0 + x2 * (1.0 / 362880.0 - x2 / 39916800.0))));
    }
    return std::sin(x) - x;
}

} // namespace levylab
