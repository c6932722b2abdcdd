#include "levylab/nonlocal/generator.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include <omp.h>

#include "levylab/core/error.hpp"
#include "levylab/core/quadrature.hpp"

namespace levylab::nonlocal {
namespace {

constexpr std::size_t kBlock = 8;  // nodes per partial sum; fixed so results do not depend on threads

double torus_distance(std::span<const double> x, std::span<const double> y, double length) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double d = std::fmod(std::abs(x[i] - y[i]), length);
        d = std::min(d, length - d);
        s += d * d;
    }
    return std::sqrt(s);
}

void add_radial_nodes(std::vector<Node>& out, const levy::DirectionAtom& atom, double lo, double hi, double omega,
                      double alpha, const std::function<double(double)>& kappa) {
    const auto& rule = quad::gauss16();
    const int panels = quad::panels_for(hi - lo, omega);
    const double h = (hi - lo) / panels;
    for (int p = 0; p < panels; ++p) {
        const double a = lo + p * h;
        for (std::size_t i = 0; i < quad::gauss_points; ++i) {
            const double r = a + 0.5 * h * (rule.nodes[i] + 1.0);
            Node n;
            n.z.resize(atom.direction.size());
            for (std::size_t k = 0; k < n.z.size(); ++k) n.z[k] = r * atom.direction[k];
            n.weight = atom.weight * 0.5 * h * rule.weights[i] * kappa(r) * std::pow(r, -1.0 - alpha);
            n.small = r <= 1.0;
            out.push_back(std::move(n));
        }
    }
}

std::vector<std::vector<double>> grid_points(const GridSpec& spec) {
    std::vector<std::vector<double>> pts(spec.size(), std::vector<double>(static_cast<std::size_t>(spec.dim)));
    for (std::size_t i = 0; i < pts.size(); ++i) spec.point(i, pts[i]);
    return pts;
}

} // namespace

// ---------------------------------------------------------------------------

JumpKernel JumpKernel::constant(double kappa) {
    if (!(kappa > 0.0)) fail(ErrorCode::invalid_argument, "kernel constant must be positive");
    JumpKernel k;
    k.eval = [kappa](double, std::span<const double>, std::span<const double>) { return kappa; };
    k.kappa0 = k.kappa1 = kappa;
    k.kappa2 = 1.0;
    k.theta = 1.0;
    k.depends_on_x = false;
    k.depends_on_z = false;
    return k;
}

JumpKernel JumpKernel::of_x(std::function<double(std::span<const double>)> f, double kappa0, double kappa1,
                            double kappa2, double theta) {
    JumpKernel k;
    k.eval = [f = std::move(f)](double, std::span<const double> x, std::span<const double>) { return f(x); };
    k.kappa0 = kappa0;
    k.kappa1 = kappa1;
    k.kappa2 = kappa2;
    k.theta = theta;
    k.depends_on_z = false;
    return k;
}

DriftField DriftField::zero() {
    DriftField b;
    b.eval = [](double, std::span<const double>, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); };
    b.is_zero = true;
    b.beta = 1.0;
    return b;
}

DriftField DriftField::constant(Vec v) {
    DriftField b;
    double n = 0.0;
    for (double c : v) n = std::max(n, std::abs(c));
    b.declared_norm = n;
    b.is_zero = n == 0.0;
    b.eval = [v = std::move(v)](double, std::span<const double>, std::span<double> out) {
        std::copy(v.begin(), v.end(), out.begin());
    };
    return b;
}

DriftField DriftField::of_x(std::function<void(std::span<const double>, std::span<double>)> f, double beta,
                            double declared_norm) {
    DriftField b;
    b.eval = [f = std::move(f)](double, std::span<const double> x, std::span<double> out) { f(x, out); };
    b.beta = beta;
    b.declared_norm = declared_norm;
    return b;
}

KernelReport check_kernel(const JumpKernel& kernel, int dim, double length, RngStream& rng, int samples,
                          double t_max) {
    KernelReport rep{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(), 0.0, true,
                     true};
    const auto d = static_cast<std::size_t>(dim);
    Vec x(d), y(d), z(d);
    for (int s = 0; s < samples; ++s) {
        const double t = rng.uniform() * t_max;
        for (std::size_t i = 0; i < d; ++i) {
            x[i] = rng.uniform() * length;
            z[i] = 2.0 * rng.uniform() - 1.0;
            y[i] = x[i] + (2.0 * rng.uniform() - 1.0) / std::sqrt(static_cast<double>(dim));
        }
        const double sx = kernel(t, x, z);
        rep.min_value = std::min(rep.min_value, sx);
        rep.max_value = std::max(rep.max_value, sx);
        const double dist = torus_distance(x, y, length);
        if (dist > 0.0 && dist <= 1.0) {
            const double q = std::abs(kernel(t, y, z) - sx) / std::pow(dist, kernel.theta);
            rep.holder_quotient = std::max(rep.holder_quotient, q);
        }
    }
    const double slack = 1e-12 * std::max(1.0, kernel.kappa1);
    rep.bounds_ok = rep.min_value >= kernel.kappa0 - slack && rep.max_value <= kernel.kappa1 + slack;
    rep.holder_ok = rep.holder_quotient <= kernel.kappa2 * (1.0 + 1e-12);
    return rep;
}

// ---------------------------------------------------------------------------

struct Generator::NodeCache {
    std::once_flag once;
    std::vector<Node> nodes;
};

struct Generator::SymbolCache {
    std::once_flag once;
    std::vector<cplx> table;
};

Generator::Generator(levy::LevyModel model, GridSpec grid, GeneratorOptions options)
    : model_(std::move(model)), grid_(grid), options_(options), symbol_(std::make_shared<SymbolCache>()),
      nodes_(std::make_shared<NodeCache>()) {
    lp::validate(grid_);
    if (model_.dim() != grid_.dim) fail(ErrorCode::grid_mismatch, "model and grid dimensions differ");
    eps_q_ = options_.eps_q > 0.0 ? options_.eps_q : std::ldexp(1.0, -(grid_.j_max() + 1)) * grid_.length / (2.0 * M_PI);
    if (!(eps_q_ > 0.0 && eps_q_ < 1.0)) fail(ErrorCode::invalid_argument, "quadrature cutoff must lie in (0,1)");

    const double alpha = model_.alpha();
    if (model_.is_pure_stable())
        for (const auto& atom : model_.spherical().atoms())
            far_mass_ += atom.weight * std::pow(options_.far_cut, -alpha) / alpha;
}

const std::vector<Node>& Generator::nodes() const {
    std::call_once(nodes_->once, [this] { build_nodes(nodes_->nodes); });
    return nodes_->nodes;
}

void Generator::build_nodes(std::vector<Node>& nodes) const {
    const double alpha = model_.alpha();
    const double omega = grid_.frequency_step() * 0.5 * static_cast<double>(grid_.n) * std::sqrt(grid_.dim);
    for (const auto& atom : model_.spherical().atoms()) {
        std::function<double(double)> kappa;
        if (model_.is_pure_stable() || model_.profile().unit) {
            kappa = [](double) { return 1.0; };
        } else {
            const auto& prof = model_.profile();
            const auto& dir = atom.direction;
            kappa = [&prof, &dir](double r) { return prof(dir, r); };
        }
        for (double hi = 1.0; hi > eps_q_ * (1.0 + 1e-12);) {
            const double lo = std::max(0.5 * hi, eps_q_);
            add_radial_nodes(nodes, atom, lo, hi, omega, alpha, kappa);
            hi = lo;
        }
        auto one = [](double) { return 1.0; };
        if (model_.is_pure_stable()) {
            add_radial_nodes(nodes, atom, 1.0, options_.far_cut, omega, alpha, one);
        } else if (const auto* pl = std::get_if<levy::PowerLawTail>(&model_.tail())) {
            add_radial_nodes(nodes, atom, 1.0, pl->r_max, omega, alpha, one);
        }
    }
    if (const auto* at = std::get_if<levy::AtomTail>(&model_.tail()))
        for (const auto& a : at->atoms) nodes.push_back({a.z, a.mass, false});
}

std::span<const cplx> Generator::symbol_table() const {
    std::call_once(symbol_->once, [this] {
        const std::size_t size = grid_.size();
        auto& table = symbol_->table;
        table.assign(size, cplx(0.0, 0.0));
        const bool sym = model_.is_symmetric();
        const auto n = grid_.n;
        const int dim = grid_.dim;
        std::vector<std::size_t> mirror(size);
        for (std::size_t i = 0; i < size; ++i) {
            std::size_t rest = i, m = 0, stride = 1;
            for (int a = 0; a < dim; ++a) {
                const std::size_t ia = rest % n;
                rest /= n;
                m += ((n - ia) % n) * stride;
                stride *= n;
            }
            mirror[i] = m;
        }
        const auto count = static_cast<std::ptrdiff_t>(size);
#pragma omp parallel for schedule(dynamic, 16)
        for (std::ptrdiff_t s = 0; s < count; ++s) {
            const auto i = static_cast<std::size_t>(s);
            if (grid_.is_nyquist(i)) continue;
            if (sym && mirror[i] < i) continue;
            std::vector<double> xi(static_cast<std::size_t>(dim));
            grid_.frequency(i, xi);
            table[i] = levy::symbol(model_, xi);
        }
        if (sym)
            for (std::size_t i = 0; i < size; ++i)
                if (mirror[i] < i && !grid_.is_nyquist(i)) table[i] = table[mirror[i]];
    });
    return symbol_->table;
}

GridField Generator::apply_reference(const GridField& u, double kappa) const {
    if (u.spec() != grid_) fail(ErrorCode::grid_mismatch, "field grid differs from generator grid");
    const auto table = symbol_table();
    std::vector<cplx> scaled(table.begin(), table.end());
    for (auto& v : scaled) v *= kappa;
    return lp::apply_multiplier(u, std::span<const cplx>(scaled));
}

double Generator::remainder_bound(const GridField& u, const JumpKernel& kernel) const {
    const double alpha = model_.alpha();
    const double k_high = model_.is_pure_stable() ? 1.0 : model_.profile().kappa_high;
    const double mass = model_.spherical().total_mass() * k_high * kernel.kappa1;
    double bound = 0.0;
    const bool second = model_.compensated() || (kernel.even_in_z && model_.is_symmetric());
    if (second) {
        const double h2 = lp::derivative_tensor_norm(u, 2).max_abs();
        bound += mass * 0.5 * h2 * std::pow(eps_q_, 2.0 - alpha) / (2.0 - alpha);
    } else {
        const double h1 = lp::gradient_norm(u).max_abs();
        bound += mass * h1 * std::pow(eps_q_, 1.0 - alpha) / (1.0 - alpha);
    }
    bound += 2.0 * u.max_abs() * kernel.kappa1 * far_mass_;
    return bound;
}

GeneratorResult Generator::apply_quadrature(const GridField& u, const JumpKernel& kernel, double t, Exec exec) const {
    if (u.spec() != grid_) fail(ErrorCode::grid_mismatch, "field grid differs from generator grid");
    const std::size_t size = grid_.size();
    const int dim = grid_.dim;
    const auto n = grid_.n;
    const auto c = u.spectrum();
    const auto pts = grid_points(grid_);
    const bool comp = model_.compensated();
    std::vector<GridField> grad;
    if (comp)
        for (int a = 0; a < dim; ++a) grad.push_back(lp::derivative(u, a));
    const auto uv = u.values();
    const auto& nodes = this->nodes();
    const double fstep = grid_.frequency_step();

    auto accumulate = [&](std::size_t first, std::size_t last, std::vector<double>& acc) {
        std::vector<cplx> shifted(size), spec_buf(size);
        std::vector<std::vector<cplx>> axis_phase(static_cast<std::size_t>(dim), std::vector<cplx>(n));
        for (std::size_t q = first; q < last; ++q) {
            const Node& node = nodes[q];
            for (int a = 0; a < dim; ++a) {
                auto& ph = axis_phase[static_cast<std::size_t>(a)];
                for (std::size_t k = 0; k < n; ++k) {
                    const auto kk = static_cast<double>(k < n / 2 ? static_cast<long>(k) : static_cast<long>(k) - static_cast<long>(n));
                    ph[k] = std::polar(1.0, fstep * kk * node.z[static_cast<std::size_t>(a)]);
                }
            }
            for (std::size_t i = 0; i < size; ++i) {
                std::size_t rest = i;
                cplx ph(1.0, 0.0);
                for (int a = dim - 1; a >= 0; --a) {
                    ph *= axis_phase[static_cast<std::size_t>(a)][rest % n];
                    rest /= n;
                }
                spec_buf[i] = c[i] * ph;
            }
            fft::inverse(dim, n, spec_buf, shifted);
            const bool compensate = comp && node.small;
            for (std::size_t i = 0; i < size; ++i) {
                double v = shifted[i].real() - uv[i];
                if (compensate)
                    for (int a = 0; a < dim; ++a) v -= node.z[static_cast<std::size_t>(a)] * grad[static_cast<std::size_t>(a)][i];
                acc[i] += node.weight * kernel(t, pts[i], node.z) * v;
            }
        }
    };

    std::vector<double> total(size, 0.0);
    if (exec == Exec::serial) {
        accumulate(0, nodes.size(), total);
    } else {
        const std::size_t blocks = (nodes.size() + kBlock - 1) / kBlock;
        std::vector<std::vector<double>> partial(blocks);
        const auto nb = static_cast<std::ptrdiff_t>(blocks);
#pragma omp parallel for schedule(dynamic, 1)
        for (std::ptrdiff_t b = 0; b < nb; ++b) {
            const auto ub = static_cast<std::size_t>(b);
            partial[ub].assign(size, 0.0);
            accumulate(ub * kBlock, std::min(nodes.size(), (ub + 1) * kBlock), partial[ub]);
        }
        for (const auto& p : partial)
            for (std::size_t i = 0; i < size; ++i) total[i] += p[i];
    }
    return {GridField(grid_, std::move(total)), remainder_bound(u, kernel)};
}

GeneratorResult Generator::apply_jump(const GridField& u, const JumpKernel& kernel, double t, Exec exec) const {
    if (kernel.depends_on_z) return apply_quadrature(u, kernel, t, exec);
    GridField base = apply_reference(u, 1.0);
    std::vector<double> out(base.values().begin(), base.values().end());
    const Vec zero(static_cast<std::size_t>(grid_.dim), 0.0);
    if (kernel.depends_on_x) {
        std::vector<double> x(static_cast<std::size_t>(grid_.dim));
        for (std::size_t i = 0; i < out.size(); ++i) {
            grid_.point(i, x);
            out[i] *= kernel(t, x, zero);
        }
    } else {
        const double s = kernel(t, zero, zero);
        for (auto& v : out) v *= s;
    }
    return {GridField(grid_, std::move(out)), 0.0};
}

GeneratorResult Generator::apply(const GridField& u, const JumpKernel& kernel, const DriftField& drift, double t,
                                 Exec exec) const {
    GeneratorResult r = apply_jump(u, kernel, t, exec);
    if (!drift.is_zero) r.value = r.value + drift_term(u, drift, t);
    const double scale = std::max(r.value.max_abs(), u.max_abs());
    if (r.remainder_bound > options_.remainder_rel_tol * scale && scale > 0.0)
        fail(ErrorCode::refinement, "sub-cutoff remainder bound exceeds tolerance; refine the grid", r.remainder_bound);
    return r;
}

GridField drift_term(const GridField& u, const DriftField& drift, double t) {
    const auto& spec = u.spec();
    if (drift.is_zero) return GridField(spec, 0.0);
    const auto d = static_cast<std::size_t>(spec.dim);
    std::vector<GridField> grad;
    for (int a = 0; a < spec.dim; ++a) grad.push_back(lp::derivative(u, a));
    std::vector<double> out(u.size());
    std::vector<double> x(d), b(d);
    for (std::size_t i = 0; i < out.size(); ++i) {
        spec.point(i, x);
        drift.eval(t, x, b);
        double s = 0.0;
        for (std::size_t a = 0; a < d; ++a) s += b[a] * grad[a][i];
        out[i] = s;
    }
    return GridField(spec, std::move(out));
}

GridField apply_generator(const GridField& u, const levy::LevyModel& model, const JumpKernel& kernel,
                          const DriftField& drift, double t) {
    Generator g(model, u.spec());
    return g.apply(u, kernel, drift, t).value;
}

// ---------------------------------------------------------------------------

std::vector<double> maxprinciple_check(const levy::LevyModel& model, double kappa, int j, int trials, RngStream& rng) {
    if (j < 0) fail(ErrorCode::invalid_argument, "block index must be >= 0");
    const int d = model.dim();
    const int extra = d == 1 ? 5 : 3;
    const GridSpec spec{d, std::size_t{1} << (j + extra), 2.0 * M_PI};
    Generator gen(model, spec);
    const double lo = std::ldexp(1.0, j - 1), hi = std::ldexp(1.0, j + 1);
    const double scale = std::pow(2.0, model.alpha() * j);
    std::vector<double> out;
    for (int trial = 0; trial < trials; ++trial) {
        const GridField u = lp::random_field(spec, rng, lo, hi);
        const double norm = u.max_abs();
        if (!(norm > 1e-12)) continue;
        std::size_t x0 = 0;
        for (std::size_t i = 0; i < u.size(); ++i)
            if (std::abs(u[i]) > std::abs(u[x0])) x0 = i;
        const GridField lu = gen.apply_reference(u, kappa);
        out.push_back((u[x0] > 0 ? 1.0 : -1.0) * lu[x0] / (scale * norm));
    }
    return out;
}

CoercivityValue coercivity_check(const GridField& f, int j, double p, const Generator& generator, double kappa,
                                 const lp::DyadicPartition& partition) {
    if (j < 0) fail(ErrorCode::invalid_argument, "block index must be >= 0");
    if (p < 2.0) fail(ErrorCode::invalid_argument, "coercivity requires p >= 2");
    const GridField g = lp::project(f, j, partition);
    const double gp = g.lp_norm(p);
    if (!(gp > 1e-12 * std::max(1.0, f.max_abs()))) fail(ErrorCode::undefined_ratio, "block Lambda_j f vanishes");
    const GridField lg = generator.apply_reference(g, kappa);
    double lhs = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) lhs += std::pow(std::abs(g[i]), p - 2.0) * g[i] * lg[i];
    lhs *= g.spec().cell_volume();
    const double mass = std::pow(gp, p);
    return {lhs, std::pow(2.0, generator.model().alpha() * j) * mass, mass};
}

CommutatorValue commutator_op(int j, const GridField& u, const Generator& generator, const JumpKernel& kernel,
                              double thetabar, double gamma, double p, const lp::DyadicPartition& partition,
                              double t) {
    if (!(thetabar > 0.0)) fail(ErrorCode::precondition, "thetabar must be positive");
    if (!(thetabar - kernel.theta < gamma && gamma <= thetabar))
        fail(ErrorCode::precondition, "require thetabar - theta < gamma <= thetabar");
    const GridField lu = generator.apply_jump(u, kernel, t).value;
    const GridField lju = generator.apply_jump(lp::project(u, j, partition), kernel, t).value;
    GridField field = lp::project(lu, j, partition) - lju;
    const double norm = field.lp_norm(p);
    return {std::move(field), norm};
}

} // namespace levylab::nonlocal
