#include "levylab/core/quadrature.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <cmath>

namespace levylab::quad {

const GaussRule& gauss16() {
    static const GaussRule rule = [] {
        using boost::math::quadrature::gauss;
        const auto& x = gauss<double, gauss_points>::abscissa();
        const auto& w = gauss<double, gauss_points>::weights();
        GaussRule r{};
        const std::size_t half = gauss_points / 2;
        for (std::size_t i = 0; i < half; ++i) {
            r.nodes[half - 1 - i] = -x[i];
            r.weights[half - 1 - i] = w[i];
            r.nodes[half + i] = x[i];
            r.weights[half + i] = w[i];
        }
        return r;
    }();
    return rule;
}

double integrate(const std::function<double(double)>& f, double a, double b, int panels) {
    const auto& rule = gauss16();
    const double h = (b - a) / panels;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double mid = a + (p + 0.5) * h;
        double s = 0.0;
        for (std::size_t i = 0; i < gauss_points; ++i)
            s += rule.weights[i] * f(mid + 0.5 * h * rule.nodes[i]);
        total += 0.5 * h * s;
    }
    return total;
}

int panels_for(double len, double omega) {
    // 16 Gauss points resolve roughly two periods per panel to 1e-12.
    return 1 + static_cast<int>(std::ceil(len * std::abs(omega) / (4.0 * M_PI)));
}

} // namespace levylab::quad
