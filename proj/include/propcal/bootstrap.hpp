#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace propcal {

struct BootstrapOptions {
    std::size_t replicas = 200;
    std::pair<double, double> quantiles{0.16, 0.84};
    std::uint64_t seed = 0;
    unsigned workers = 1;
};

/// Per-lag resampling bands. `point` is the statistic on the original symbol
/// list. The stored guarantee is lower <= upper; point may fall outside the
/// band at isolated lags.
struct BootstrapBands {
    std::vector<double> point;
    std::vector<double> lower;
    std::vector<double> upper;
    std::size_t replicas = 0;
    std::pair<double, double> quantiles{0.16, 0.84};
    std::uint64_t seed = 0;
};

/// Maps a multiset of symbol indices (with repetitions) onto a fixed-length
/// statistic, typically pool -> assemble -> solve. Must be deterministic and
/// safe to call concurrently.
using BootstrapPipeline = std::function<std::vector<double>(std::span<const std::size_t> symbols)>;

/// Resamples the symbol list with replacement `replicas` times; replica r
/// draws its indices from a generator seeded with seed + r, so the bands do
/// not depend on the worker count. Quantiles use linear interpolation between
/// order statistics.
BootstrapBands bootstrap_bands(std::size_t symbol_count, const BootstrapPipeline& pipeline,
                               const BootstrapOptions& options = {});

/// Symbol indices of replica r.
std::vector<std::size_t> bootstrap_resample(std::size_t symbol_count, std::uint64_t seed, std::size_t replica);

/// Linear-interpolation quantile of an ascending sample.
double sorted_quantile(std::span<const double> sorted, double level);

}  // namespace propcal
