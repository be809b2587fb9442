#include "propcal/correlation.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <set>

#include "propcal/lag_series.hpp"
#include "propcal/parallel.hpp"

namespace propcal {

namespace {

constexpr std::size_t kBlocksPerChunk = 32;

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

std::size_t full_fft_size(std::size_t max_lag) { return std::max<std::size_t>(1024, next_pow2(4 * (max_lag + 1))); }

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};
template <class T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <class T>
FftwBuffer<T> fftw_buffer(std::size_t n) {
    auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
    if (!p) throw std::bad_alloc();
    return FftwBuffer<T>(p);
}

struct Plans {
    fftw_plan forward = nullptr;
    fftw_plan inverse = nullptr;
};

// FFTW planning is not thread safe; execution with the new-array interface is.
// Plans are made once per size and live for the process.
const Plans& plans_for(std::size_t n) {
    static std::mutex mutex;
    static std::map<std::size_t, Plans> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    auto in = fftw_buffer<double>(n);
    auto out = fftw_buffer<fftw_complex>(n / 2 + 1);
    Plans p;
    const int size = static_cast<int>(n);
    p.forward = fftw_plan_dft_r2c_1d(size, in.get(), out.get(), FFTW_ESTIMATE);
    p.inverse = fftw_plan_dft_c2r_1d(size, out.get(), in.get(), FFTW_ESTIMATE);
    if (!p.forward || !p.inverse) throw NumericalError("FFTW failed to create a plan of size " + std::to_string(n));
    return cache.emplace(n, p).first->second;
}

struct Unit {
    std::size_t session_end;
    std::size_t begin;
    std::size_t end;
    std::size_t fft_size;
};

using Partial = std::vector<std::vector<double>>;

void run_fft_unit(const Unit& u, const SignalFill& left, const SignalFill& right, const CrossSumRequest& req,
                  const std::vector<std::size_t>& lefts, const std::vector<std::size_t>& rights, Partial& acc) {
    const std::size_t F = u.fft_size;
    const std::size_t L = req.max_lag;
    const std::size_t B = F - L;
    const std::size_t bins = F / 2 + 1;
    const Plans& plans = plans_for(F);
    const double inv = 1.0 / static_cast<double>(F);

    auto in = fftw_buffer<double>(F);
    auto prod = fftw_buffer<fftw_complex>(bins);
    std::vector<FftwBuffer<fftw_complex>> fl(lefts.size()), fr(rights.size());
    for (auto& b : fl) b = fftw_buffer<fftw_complex>(bins);
    for (auto& b : fr) b = fftw_buffer<fftw_complex>(bins);
    std::vector<std::size_t> left_slot(*std::max_element(lefts.begin(), lefts.end()) + 1);
    std::vector<std::size_t> right_slot(*std::max_element(rights.begin(), rights.end()) + 1);
    for (std::size_t k = 0; k < lefts.size(); ++k) left_slot[lefts[k]] = k;
    for (std::size_t k = 0; k < rights.size(); ++k) right_slot[rights[k]] = k;

    for (std::size_t s = u.begin; s < u.end; s += B) {
        const std::size_t len = std::min(B, u.end - s);
        const std::size_t seg_end = std::min(s + len + L, u.session_end);
        const std::size_t seg_len = seg_end - s;
        for (std::size_t k = 0; k < lefts.size(); ++k) {
            left(lefts[k], s, s + len, in.get());
            std::fill(in.get() + len, in.get() + F, 0.0);
            fftw_execute_dft_r2c(plans.forward, in.get(), fl[k].get());
        }
        for (std::size_t k = 0; k < rights.size(); ++k) {
            right(rights[k], s, seg_end, in.get());
            std::fill(in.get() + seg_len, in.get() + F, 0.0);
            fftw_execute_dft_r2c(plans.forward, in.get(), fr[k].get());
        }
        const std::size_t lag_end = std::min(L + 1, seg_len);
        for (std::size_t p = 0; p < req.pairs.size(); ++p) {
            const auto* a = fl[left_slot[req.pairs[p].first]].get();
            const auto* b = fr[right_slot[req.pairs[p].second]].get();
            for (std::size_t k = 0; k < bins; ++k) {
                // conj(a) * b
                prod[k][0] = a[k][0] * b[k][0] + a[k][1] * b[k][1];
                prod[k][1] = a[k][0] * b[k][1] - a[k][1] * b[k][0];
            }
            fftw_execute_dft_c2r(plans.inverse, prod.get(), in.get());
            auto& out = acc[p];
            if (req.integer_valued) {
                for (std::size_t tau = 0; tau < lag_end; ++tau) out[tau] += std::nearbyint(in[tau] * inv);
            } else {
                for (std::size_t tau = 0; tau < lag_end; ++tau) out[tau] += in[tau] * inv;
            }
        }
    }
}

void run_direct_unit(const Unit& u, const SignalFill& left, const SignalFill& right, const CrossSumRequest& req,
                     Partial& acc) {
    const std::size_t L = req.max_lag;
    const std::size_t seg_end = std::min(u.end + L, u.session_end);
    std::vector<double> a(u.end - u.begin), b(seg_end - u.begin);
    for (std::size_t p = 0; p < req.pairs.size(); ++p) {
        left(req.pairs[p].first, u.begin, u.end, a.data());
        right(req.pairs[p].second, u.begin, seg_end, b.data());
        auto& out = acc[p];
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i] == 0.0) continue;
            const std::size_t lag_end = std::min(L + 1, b.size() - i);
            for (std::size_t tau = 0; tau < lag_end; ++tau) out[tau] += a[i] * b[i + tau];
        }
    }
}

}  // namespace

std::size_t fft_block_length(std::size_t max_lag) { return full_fft_size(max_lag) - max_lag; }

std::vector<std::vector<double>> lagged_cross_sums(const SignalFill& left, const SignalFill& right,
                                                   std::span<const std::size_t> session_offsets,
                                                   const CrossSumRequest& req) {
    const std::size_t L = req.max_lag;
    std::vector<std::vector<double>> total(req.pairs.size(), std::vector<double>(L + 1, 0.0));
    if (req.pairs.empty() || session_offsets.size() < 2) return total;

    std::set<std::size_t> left_set, right_set;
    for (const auto& [i, j] : req.pairs) {
        left_set.insert(i);
        right_set.insert(j);
    }
    const std::vector<std::size_t> lefts(left_set.begin(), left_set.end()), rights(right_set.begin(), right_set.end());

    const std::size_t full_F = full_fft_size(L);
    const std::size_t B = full_F - L;
    const std::size_t chunk = B * kBlocksPerChunk;
    std::vector<Unit> units;
    for (std::size_t s = 0; s + 1 < session_offsets.size(); ++s) {
        const std::size_t b = session_offsets[s], e = session_offsets[s + 1];
        if (e <= b) continue;
        const std::size_t n = e - b;
        const std::size_t F = n <= B ? std::max<std::size_t>(16, next_pow2(n + L)) : full_F;
        for (std::size_t c = b; c < e; c += chunk) units.push_back({e, c, std::min(e, c + chunk), F});
    }

    std::vector<Partial> partial(units.size());
    parallel_for(units.size(), req.workers, [&](std::size_t k) {
        partial[k].assign(req.pairs.size(), std::vector<double>(L + 1, 0.0));
        if (req.method == CorrelationMethod::fft)
            run_fft_unit(units[k], left, right, req, lefts, rights, partial[k]);
        else
            run_direct_unit(units[k], left, right, req, partial[k]);
    });
    for (const auto& part : partial)
        for (std::size_t p = 0; p < total.size(); ++p)
            for (std::size_t tau = 0; tau <= L; ++tau) total[p][tau] += part[p][tau];
    return total;
}

}  // namespace propcal
