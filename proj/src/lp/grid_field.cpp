#include "levylab/lp/grid_field.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "levylab/core/error.hpp"

namespace levylab::lp {

std::size_t GridSpec::size() const {
    std::size_t s = 1;
    for (int i = 0; i < dim; ++i) s *= n;
    return s;
}

int GridSpec::j_max() const {
    const double nyquist = M_PI * static_cast<double>(n) / length;
    return static_cast<int>(std::floor(std::log2(nyquist) + 1e-12)) - 1;
}

void GridSpec::point(std::size_t idx, std::span<double> x) const {
    const double h = spacing();
    for (int a = dim - 1; a >= 0; --a) {
        x[static_cast<std::size_t>(a)] = h * static_cast<double>(idx % n);
        idx /= n;
    }
}

void GridSpec::wavenumber(std::size_t idx, std::span<int> k) const {
    const auto half = static_cast<long>(n / 2);
    for (int a = dim - 1; a >= 0; --a) {
        long m = static_cast<long>(idx % n);
        if (m >= half) m -= static_cast<long>(n);
        k[static_cast<std::size_t>(a)] = static_cast<int>(m);
        idx /= n;
    }
}

void GridSpec::frequency(std::size_t idx, std::span<double> xi) const {
    int k[8];
    wavenumber(idx, std::span<int>(k, static_cast<std::size_t>(dim)));
    const double step = frequency_step();
    for (int a = 0; a < dim; ++a) xi[static_cast<std::size_t>(a)] = step * k[a];
}

double GridSpec::frequency_norm(std::size_t idx) const {
    double xi[8];
    frequency(idx, std::span<double>(xi, static_cast<std::size_t>(dim)));
    double s = 0.0;
    for (int a = 0; a < dim; ++a) s += xi[a] * xi[a];
    return std::sqrt(s);
}

bool GridSpec::is_nyquist(std::size_t idx) const {
    int k[8];
    wavenumber(idx, std::span<int>(k, static_cast<std::size_t>(dim)));
    const int half = static_cast<int>(n / 2);
    for (int a = 0; a < dim; ++a)
        if (k[a] == -half) return true;
    return false;
}

void validate(const GridSpec& spec) {
    if (spec.dim < 1 || spec.dim > 8) fail(ErrorCode::invalid_argument, "grid dimension must be in [1,8]");
    if (spec.n < 4 || !std::has_single_bit(spec.n)) fail(ErrorCode::invalid_argument, "N must be a power of two >= 4");
    if (!(spec.length > 0.0)) fail(ErrorCode::invalid_argument, "domain length must be positive");
}

GridField::GridField(GridSpec spec, double fill)
    : spec_(spec), values_(spec.size(), fill), cache_(std::make_shared<Cache>()) {
    validate(spec_);
}

GridField::GridField(GridSpec spec, std::vector<double> values)
    : spec_(spec), values_(std::move(values)), cache_(std::make_shared<Cache>()) {
    validate(spec_);
    if (values_.size() != spec_.size()) fail(ErrorCode::grid_mismatch, "value count does not match N^d");
}

GridField GridField::from_function(GridSpec spec, const std::function<double(std::span<const double>)>& f) {
    validate(spec);
    std::vector<double> v(spec.size());
    std::vector<double> x(static_cast<std::size_t>(spec.dim));
    for (std::size_t i = 0; i < v.size(); ++i) {
        spec.point(i, x);
        v[i] = f(x);
    }
    return GridField(spec, std::move(v));
}

GridField GridField::from_spectrum(GridSpec spec, std::span<const cplx> coeffs) {
    validate(spec);
    if (coeffs.size() != spec.size()) fail(ErrorCode::grid_mismatch, "spectrum size does not match the grid");
    // Hermitian part (c_k + conj c_{-k}) / 2: the spectrum of the real field kept below.
    const std::size_t n = spec.n;
    std::vector<cplx> sym(coeffs.size());
    for (std::size_t i = 0; i < sym.size(); ++i) {
        std::size_t rest = i, mirror = 0, stride = 1;
        for (int a = 0; a < spec.dim; ++a) {
            const std::size_t ia = rest % n;
            rest /= n;
            mirror += ((n - ia) % n) * stride;
            stride *= n;
        }
        sym[i] = 0.5 * (coeffs[i] + std::conj(coeffs[mirror]));
    }
    std::vector<cplx> tmp(sym.size());
    fft::inverse(spec.dim, spec.n, sym, tmp);
    std::vector<double> v(tmp.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = tmp[i].real();
    GridField out(spec, std::move(v));
    out.cache_->coeffs = std::move(sym);
    std::call_once(out.cache_->once, [] {});
    return out;
}

std::span<const cplx> GridField::spectrum() const {
    if (!cache_) fail(ErrorCode::invalid_argument, "spectrum requested on an empty field");
    std::call_once(cache_->once, [this] {
        std::vector<cplx> in(values_.begin(), values_.end());
        cache_->coeffs.resize(in.size());
        fft::forward(spec_.dim, spec_.n, in, cache_->coeffs);
    });
    return cache_->coeffs;
}

double GridField::max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

double GridField::lp_norm(double p) const {
    if (std::isinf(p)) return max_abs();
    if (p < 1.0) fail(ErrorCode::invalid_argument, "p must be >= 1");
    double s = 0.0;
    for (double v : values_) s += std::pow(std::abs(v), p);
    return std::pow(s * spec_.cell_volume(), 1.0 / p);
}

namespace {
template <class Op>
GridField combine(const GridField& a, const GridField& b, Op op) {
    require_same_grid(a, b);
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = op(a[i], b[i]);
    return GridField(a.spec(), std::move(v));
}
} // namespace

GridField GridField::operator+(const GridField& o) const { return combine(*this, o, std::plus<>{}); }
GridField GridField::operator-(const GridField& o) const { return combine(*this, o, std::minus<>{}); }
GridField GridField::operator*(const GridField& o) const { return combine(*this, o, std::multiplies<>{}); }

GridField GridField::operator*(double s) const {
    std::vector<double> v(values_);
    for (auto& x : v) x *= s;
    return GridField(spec_, std::move(v));
}

void require_same_grid(const GridField& a, const GridField& b) {
    if (a.spec() != b.spec()) fail(ErrorCode::grid_mismatch, "fields live on different grids");
}

GridField apply_multiplier(const GridField& f, const std::function<cplx(std::size_t)>& multiplier) {
    auto c = f.spectrum();
    std::vector<cplx> out(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) out[i] = c[i] * multiplier(i);
    return GridField::from_spectrum(f.spec(), out);
}

GridField apply_multiplier(const GridField& f, std::span<const cplx> table) {
    auto c = f.spectrum();
    if (table.size() != c.size()) fail(ErrorCode::grid_mismatch, "multiplier table size mismatch");
    std::vector<cplx> out(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) out[i] = c[i] * table[i];
    return GridField::from_spectrum(f.spec(), out);
}

GridField apply_multiplier(const GridField& f, std::span<const double> table) {
    auto c = f.spectrum();
    if (table.size() != c.size()) fail(ErrorCode::grid_mismatch, "multiplier table size mismatch");
    std::vector<cplx> out(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) out[i] = c[i] * table[i];
    return GridField::from_spectrum(f.spec(), out);
}

GridField derivative(const GridField& f, int axis) {
    const auto& spec = f.spec();
    return apply_multiplier(f, [&](std::size_t idx) {
        if (spec.is_nyquist(idx)) return cplx(0.0, 0.0);
        double xi[8];
        spec.frequency(idx, std::span<double>(xi, static_cast<std::size_t>(spec.dim)));
        return cplx(0.0, xi[axis]);
    });
}

GridField gradient_norm(const GridField& f) {
    std::vector<double> acc(f.size(), 0.0);
    for (int a = 0; a < f.spec().dim; ++a) {
        GridField g = derivative(f, a);
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i] * g[i];
    }
    for (auto& v : acc) v = std::sqrt(v);
    return GridField(f.spec(), std::move(acc));
}

double interpolate_spectral(const GridField& f, std::span<const double> x) {
    const auto& spec = f.spec();
    auto c = f.spectrum();
    double xi[8];
    double s = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        spec.frequency(i, std::span<double>(xi, static_cast<std::size_t>(spec.dim)));
        double phase = 0.0;
        for (int a = 0; a < spec.dim; ++a) phase += xi[a] * x[static_cast<std::size_t>(a)];
        if (spec.is_nyquist(i)) {
            // Real interpolant of the Nyquist mode: cos, not exp.
            s += c[i].real() * std::cos(phase);
        } else {
            s += c[i].real() * std::cos(phase) - c[i].imag() * std::sin(phase);
        }
    }
    return s;
}

double interpolate_cubic(const GridField& f, std::span<const double> x) {
    const auto& spec = f.spec();
    const auto n = static_cast<long>(spec.n);
    const double h = spec.spacing();
    const int d = spec.dim;
    long base[8];
    double w[8][4];
    for (int a = 0; a < d; ++a) {
        const double s = x[static_cast<std::size_t>(a)] / h;
        const double fl = std::floor(s);
        const double t = s - fl;
        base[a] = static_cast<long>(fl) - 1;
        // Lagrange weights on nodes -1, 0, 1, 2.
        w[a][0] = -t * (t - 1.0) * (t - 2.0) / 6.0;
        w[a][1] = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
        w[a][2] = -(t + 1.0) * t * (t - 2.0) / 2.0;
        w[a][3] = (t + 1.0) * t * (t - 1.0) / 6.0;
    }
    const auto vals = f.values();
    int corners = 1;
    for (int a = 0; a < d; ++a) corners *= 4;
    double s = 0.0;
    for (int c = 0; c < corners; ++c) {
        int rem = c;
        double weight = 1.0;
        std::size_t idx = 0;
        for (int a = 0; a < d; ++a) {
            const int o = rem % 4;
            rem /= 4;
            weight *= w[a][o];
            long m = (base[a] + o) % n;
            if (m < 0) m += n;
            idx = idx * spec.n + static_cast<std::size_t>(m);
        }
        s += weight * vals[idx];
    }
    return s;
}

// ---- file formats -----------------------------------------------------------

namespace {

void write_header(std::ostream& os, const GridSpec& spec) {
    os << "d," << spec.dim << '\n' << "N," << spec.n << '\n' << std::setprecision(17) << "L," << spec.length << '\n';
}

GridSpec read_header(std::istream& is, const std::string& path) {
    GridSpec spec;
    std::string line;
    auto field = [&](const char* key) {
        if (!std::getline(is, line)) fail(ErrorCode::io, "truncated header in " + path);
        const auto comma = line.find(',');
        if (comma == std::string::npos || line.substr(0, comma) != key)
            fail(ErrorCode::io, std::string("expected header key ") + key + " in " + path);
        return line.substr(comma + 1);
    };
    spec.dim = std::stoi(field("d"));
    spec.n = static_cast<std::size_t>(std::stoul(field("N")));
    spec.length = std::stod(field("L"));
    validate(spec);
    return spec;
}

} // namespace

void write_csv(const GridField& f, const std::string& path) {
    std::ofstream os(path);
    if (!os) fail(ErrorCode::io, "cannot open " + path);
    write_header(os, f.spec());
    os << std::setprecision(17);
    for (double v : f.values()) os << v << '\n';
}

GridField read_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail(ErrorCode::io, "cannot open " + path);
    GridSpec spec = read_header(is, path);
    std::vector<double> v;
    v.reserve(spec.size());
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        v.push_back(std::stod(line));
    }
    return GridField(spec, std::move(v));
}

void write_raw(const GridField& f, const std::string& path) {
    {
        std::ofstream hdr(path + ".hdr");
        if (!hdr) fail(ErrorCode::io, "cannot open " + path + ".hdr");
        write_header(hdr, f.spec());
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(ErrorCode::io, "cannot open " + path);
    for (double v : f.values()) {
        auto bits = std::bit_cast<std::uint64_t>(v);
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
        os.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
    }
}

GridField read_raw(const std::string& path) {
    std::ifstream hdr(path + ".hdr");
    if (!hdr) fail(ErrorCode::io, "cannot open " + path + ".hdr");
    GridSpec spec = read_header(hdr, path + ".hdr");
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(ErrorCode::io, "cannot open " + path);
    std::vector<double> v(spec.size());
    for (auto& x : v) {
        std::uint64_t bits = 0;
        if (!is.read(reinterpret_cast<char*>(&bits), sizeof(bits))) fail(ErrorCode::io, "truncated raw file " + path);
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
        x = std::bit_cast<double>(bits);
    }
    return GridField(spec, std::move(v));
}

} // namespace levylab::lp
