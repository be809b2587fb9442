#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace propcal {

enum class CorrelationMethod { fft, direct };

/// Fills dst[0 .. end-begin) with samples [begin, end) of one signal.
using SignalFill = std::function<void(std::size_t signal, std::size_t begin, std::size_t end, double* dst)>;

struct CrossSumRequest {
    /// (left signal, right signal) pairs to correlate.
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::size_t max_lag = 0;
    CorrelationMethod method = CorrelationMethod::fft;
    /// Inputs are integer valued: per-block FFT results are rounded, which
    /// makes the fft path exact.
    bool integer_valued = false;
    unsigned workers = 1;
};

/// Session-bounded lagged cross sums
///
///     S_p(tau) = sum_sessions sum_{t, t+tau in session} left_i(t) * right_j(t+tau),   tau = 0..max_lag
///
/// for every requested pair p = (i, j). Signals are pulled through the fill
/// callbacks in blocks, so the whole tape never needs to be materialised as
/// doubles. The fft path uses overlap-save blocks of fixed size; work is split
/// into fixed chunks whose partial sums are merged in tape order, so results
/// are identical for any worker count. The fill callbacks must be thread safe.
std::vector<std::vector<double>> lagged_cross_sums(const SignalFill& left, const SignalFill& right,
                                                   std::span<const std::size_t> session_offsets,
                                                   const CrossSumRequest& request);

/// Block length (in samples of the left signal) used by the fft path for a given lag.
std::size_t fft_block_length(std::size_t max_lag);

}  // namespace propcal
