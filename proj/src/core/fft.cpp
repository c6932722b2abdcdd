#include "levylab/core/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>
#include <vector>

#include "levylab/core/error.hpp"

namespace levylab::fft {
namespace {

class PlanCache {
public:
    static PlanCache& instance() {
        static PlanCache cache;
        return cache;
    }

    fftw_plan get(int dim, std::size_t n, int sign) {
        std::lock_guard lock(mutex_);
        auto key = std::make_tuple(dim, n, sign);
        if (auto it = plans_.find(key); it != plans_.end()) return it->second;

        std::size_t total = 1;
        std::vector<int> shape(static_cast<std::size_t>(dim), static_cast<int>(n));
        for (int i = 0; i < dim; ++i) total *= n;
        auto* in = fftw_alloc_complex(total);
        auto* out = fftw_alloc_complex(total);
        fftw_plan plan = fftw_plan_dft(dim, shape.data(), in, out, sign,
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
        fftw_free(in);
        fftw_free(out);
        if (plan == nullptr) fail(ErrorCode::invalid_argument, "FFTW plan creation failed");
        plans_.emplace(key, plan);
        return plan;
    }

    ~PlanCache() {
        for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
    }

private:
    std::mutex mutex_;
    std::map<std::tuple<int, std::size_t, int>, fftw_plan> plans_;
};

void execute(int dim, std::size_t n, std::span<const cplx> in, std::span<cplx> out, int sign) {
    std::size_t total = 1;
    for (int i = 0; i < dim; ++i) total *= n;
    if (in.size() != total || out.size() != total)
        fail(ErrorCode::grid_mismatch, "FFT buffer size does not match N^d");
    fftw_plan plan = PlanCache::instance().get(dim, n, sign);
    // FFTW's new-array execute does not write to `in` for out-of-place plans.
    auto* src = reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in.data()));
    auto* dst = reinterpret_cast<fftw_complex*>(out.data());
    if (in.data() == out.data()) {
        std::vector<cplx> tmp(in.begin(), in.end());
        fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(tmp.data()), dst);
    } else {
        fftw_execute_dft(plan, src, dst);
    }
}

} // namespace

void forward(int dim, std::size_t n, std::span<const cplx> in, std::span<cplx> out) {
    execute(dim, n, in, out, FFTW_FORWARD);
    const double scale = 1.0 / static_cast<double>(out.size());
    for (auto& c : out) c *= scale;
}

void inverse(int dim, std::size_t n, std::span<const cplx> in, std::span<cplx> out) {
    execute(dim, n, in, out, FFTW_BACKWARD);
}

} // namespace levylab::fft
