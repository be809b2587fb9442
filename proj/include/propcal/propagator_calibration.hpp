#pragma once

#include <Eigen/Dense>

#include <span>
#include <string_view>
#include <vector>

#include "propcal/flow_statistics.hpp"
#include "propcal/lag_series.hpp"

namespace propcal {

/// Linear system relating response increments to propagator values.
///
/// Unknowns are G_tag(lag) for lag = 1..L, concatenated per tag
/// (G(0) = 0: the mid just before a trade carries none of its impact, so
/// G(1) is the immediate impact). G is held constant beyond L. The equation
/// for (tag a, lag tau), 1 <= tau <= L, reads
///
///     R_a(tau) - R_a(tau-1) = sum_b P(b) sum_{k=0}^{L-1} [G_b(k+1) - G_b(k)] C_{a,b}(tau-1-k)
///
/// with C_{a,b}(-n) = C_{b,a}(n).
struct CalibrationSystem {
    TagSet tags;
    std::size_t max_lag = 0;
    Eigen::MatrixXd matrix;
    Eigen::VectorXd rhs;
    /// Response sample counts per tag, carried into the solved series.
    std::vector<std::vector<std::int64_t>> response_counts;

    std::size_t index(std::size_t tag, std::size_t lag) const { return tag * max_lag + (lag - 1); }
};

struct PropagatorSet {
    TagSet tags;
    std::vector<LagSeries> propagators;       // G_tag(0..L), G(0) = 0
    std::vector<std::vector<double>> residuals;  // per tag, per lag (index 0 unused)
    double residual_norm = 0.0;               // |A g - b| / |b|
    double condition_estimate = 0.0;          // 1-norm condition estimate of A
    double ridge = 0.0;
    std::size_t max_lag = 0;
    /// First lag treated as boundary-affected (constant extension beyond L).
    std::size_t tail_start = 0;

    const LagSeries& of(std::string_view tag) const { return propagators.at(tags.index(tag)); }
};

CalibrationSystem assemble_system(std::span<const LagSeries> responses, const CorrelationSet& correlations,
                                  const TagProbabilities& probabilities, std::size_t max_lag);
CalibrationSystem assemble_system(const FlowStatistics& stats, std::size_t max_lag);

/// Exact LU solve for ridge == 0 (throws NumericalError when singular);
/// otherwise minimises |A g - b|^2 + ridge |g|^2.
PropagatorSet solve_propagators(const CalibrationSystem& system, double ridge = 0.0);

/// Copy of `set` with the propagator of `target` replaced by that of `source`.
PropagatorSet with_shared_propagator(const PropagatorSet& set, std::string_view source, std::string_view target);

/// Forward accumulation of the response implied by G and C from R(0) = 0,
/// plus slope * tau.
LagSeries reconstruct_response(const PropagatorSet& propagators, const CorrelationSet& correlations,
                               const TagProbabilities& probabilities, std::string_view tag, double slope);

/// Least-squares s minimising sum_window (observed - base - s tau)^2.
double fit_information_slope(const LagSeries& observed, const LagSeries& base, LagWindow window);

/// Default fit window 50..L/2, clipped into 1..L.
LagWindow default_slope_window(std::size_t max_lag);

}  // namespace propcal
