#include "propcal/bootstrap.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "propcal/lag_series.hpp"
#include "propcal/parallel.hpp"

namespace propcal {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
    return true;
}

}  // namespace

std::vector<std::size_t> bootstrap_resample(std::size_t symbol_count, std::uint64_t seed, std::size_t replica) {
    std::mt19937_64 rng(splitmix64(seed + replica));
    std::uniform_int_distribution<std::size_t> pick(0, symbol_count - 1);
    std::vector<std::size_t> idx(symbol_count);
    for (auto& i : idx) i = pick(rng);
    std::sort(idx.begin(), idx.end());
    return idx;
}

double sorted_quantile(std::span<const double> sorted, double level) {
    if (sorted.empty()) throw ValidationError("quantile of an empty sample");
    const double h = level * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double w = h - static_cast<double>(lo);
    return w == 0.0 ? sorted[lo] : sorted[lo] + w * (sorted[hi] - sorted[lo]);
}

BootstrapBands bootstrap_bands(std::size_t symbol_count, const BootstrapPipeline& pipeline,
                               const BootstrapOptions& options) {
    if (symbol_count < 2) throw ValidationError("bootstrap needs at least 2 symbols (resampling one is degenerate)");
    if (options.replicas < 1) throw ValidationError("bootstrap replicas must be positive");
    const auto [qlo, qhi] = options.quantiles;
    if (!(qlo > 0.0 && qlo < 1.0 && qhi > 0.0 && qhi < 1.0))
        throw ValidationError("bootstrap quantiles must lie in (0, 1)");
    if (qlo > qhi) throw ValidationError("bootstrap quantiles must be ordered (lower <= upper)");

    std::vector<std::size_t> identity(symbol_count);
    std::iota(identity.begin(), identity.end(), std::size_t{0});
    const std::vector<double> point = pipeline(identity);
    if (!bitwise_equal(point, pipeline(identity)))
        throw ValidationError("bootstrap pipeline is not deterministic: two runs on the same input differ");
    const std::size_t n = point.size();

    std::vector<std::vector<double>> samples(options.replicas);
    parallel_for(options.replicas, options.workers, [&](std::size_t r) {
        auto out = pipeline(bootstrap_resample(symbol_count, options.seed, r));
        if (out.size() != n)
            throw ValidationError("bootstrap replica " + std::to_string(r) + " returned " + std::to_string(out.size()) +
                                  " values, expected " + std::to_string(n));
        samples[r] = std::move(out);
    });

    BootstrapBands bands;
    bands.point = point;
    bands.lower.resize(n);
    bands.upper.resize(n);
    bands.replicas = options.replicas;
    bands.quantiles = options.quantiles;
    bands.seed = options.seed;
    std::vector<double> column(options.replicas);
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t r = 0; r < options.replicas; ++r) column[r] = samples[r][k];
        std::sort(column.begin(), column.end());
        bands.lower[k] = sorted_quantile(column, qlo);
        bands.upper[k] = sorted_quantile(column, qhi);
    }
    return bands;
}

}  // namespace propcal
