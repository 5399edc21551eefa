// SPDX-License-Identifier: Apache-2.0

#include "sc3/fft.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <utility>

#include <fftw3.h>

namespace sc3::fft {
namespace {

class PlanCache {
public:
    ~PlanCache() {
        for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
    }

    fftw_plan get(std::size_t n, Direction dir) {
        std::lock_guard lock(mutex_);
        auto key = std::make_pair(n, dir);
        if (auto it = plans_.find(key); it != plans_.end()) return it->second;
        // Planning scratch; FFTW_ESTIMATE never touches the contents.
        auto* scratch = fftw_alloc_complex(n);
        const int sign = dir == Direction::forward ? FFTW_FORWARD : FFTW_BACKWARD;
        fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(n), scratch, scratch, sign,
                                          FFTW_ESTIMATE | FFTW_UNALIGNED);
        fftw_free(scratch);
        if (plan == nullptr) throw Error("fftw failed to create a plan");
        plans_.emplace(key, plan);
        return plan;
    }

private:
    std::mutex mutex_;
    std::map<std::pair<std::size_t, Direction>, fftw_plan> plans_;
};

PlanCache& cache() {
    static PlanCache instance;
    return instance;
}

}  // namespace

void transform(std::span<cdouble> data, Direction dir) {
    if (data.empty()) return;
    fftw_plan plan = cache().get(data.size(), dir);
    auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(plan, ptr, ptr);
}

CVec dft_unitary(std::span<const cdouble> x) {
    CVec out(x.begin(), x.end());
    transform(out, Direction::forward);
    const double scale = 1.0 / std::sqrt(static_cast<double>(out.size()));
    for (auto& v : out) v *= scale;
    return out;
}

CVec idft_unitary(std::span<const cdouble> x) {
    CVec out(x.begin(), x.end());
    transform(out, Direction::inverse);
    const double scale = 1.0 / std::sqrt(static_cast<double>(out.size()));
    for (auto& v : out) v *= scale;
    return out;
}

}  // namespace sc3::fft
