#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "propcal/lag_series.hpp"
#include "propcal/propagator_calibration.hpp"

namespace propcal {

/// Flow-reaction kernels K_{from,to}(l), l = 1..L_K: the expected signed flow
/// I(tag_t = to) eps_t at lag l after a buy by `from`, from the causal regression
///
///     I(tag_t = a) eps_t = sum_b sum_{l >= 1} K_{b,a}(l) I(tag_{t-l} = b) eps_{t-l} + noise.
///
/// Lag 0 is not part of the regression; its slot holds 0 with count 0.
struct FlowKernelSet {
    TagSet tags;
    std::size_t max_lag = 0;
    std::vector<LagSeries> kernels;               // pair index from * T + to
    std::vector<std::vector<double>> std_errors;  // same layout, per lag
    std::vector<double> noise_variance;           // per target tag
    double residual_norm = 0.0;
    double condition_estimate = 0.0;
    double ridge = 0.0;
    std::int64_t sample_count = 0;

    const LagSeries& at(std::size_t from, std::size_t to) const { return kernels.at(tags.pair_index(from, to)); }
    const LagSeries& at(std::string_view from, std::string_view to) const {
        return at(tags.index(from), tags.index(to));
    }
    const std::vector<double>& std_error(std::size_t from, std::size_t to) const {
        return std_errors.at(tags.pair_index(from, to));
    }
};

/// Solves the normal equations of the regression for every target tag a:
///
///     P(a) C_{c,a}(tau) = sum_b sum_{l=1}^{L_K} K_{b,a}(l) P(b) C_{c,b}(tau - l),   c in tags, 1 <= tau <= L_K.
///
/// Standard errors assume martingale-difference noise and use the pooled
/// sample count (C at lag 0).
FlowKernelSet solve_flow_kernels(const CorrelationSet& correlations, const TagProbabilities& probabilities,
                                 std::size_t kernel_lag, double ridge = 0.0);

/// |K_{from,to}(l)| < z * se(l) at every lag 1..min(lags, L_K).
bool kernel_negligible(const FlowKernelSet& kernels, std::size_t from, std::size_t to, std::size_t lags = 20,
                       double z = 2.0);

enum class DressingPath { full, simplified };
std::string to_string(DressingPath p);

struct DressedPropagator {
    std::string tag;
    LagSeries values;  // G*(0..L)
    DressingPath provenance = DressingPath::simplified;
    double herding_scale = 1.0;
    /// Full path only: the focal actor's reaction to others was treated as zero.
    bool focal_reaction_neglected = false;
};

/// G*(tau) = G(tau) + sum_{0 < u < tau} scale K_cross(u) G*(tau - u), forward in tau.
DressedPropagator dressed_propagator_simplified(const LagSeries& bare, const LagSeries& cross_kernel, double scale);

/// Kernels entering the coupled dressing of a focal actor f and the rest of
/// the market m.
struct DressingKernels {
    LagSeries focal_to_other;  // K_{f,m}: market reaction to a focal trade
    LagSeries other_to_focal;  // K_{m,f}: focal reaction to a market trade
    LagSeries other_to_other;  // K_{m,m'}: reaction of the rest of the market to one of its members
};

/// Coupled forward recursions
///     G*_f(tau) = G_f(tau) + sum_u K_{f,m}(u) G*_m(tau-u)
///     G*_m(tau) = G_m(tau) + sum_u K_{m,f}(u) G*_f(tau-u) + sum_u K_{m,m'}(u) G*_m(tau-u)
/// Returns {G*_f, G*_m}.
std::pair<LagSeries, LagSeries> dress_coupled(const LagSeries& focal_bare, const LagSeries& other_bare,
                                              const DressingKernels& kernels);

/// Full dressing of a two-tag calibration, with the substitution
/// K_{m,m'} = scale * K_{f,m}. When K_{m,f} is negligible it is set to zero and
/// a notice is emitted. Result is indexed like the tag set.
std::vector<DressedPropagator> dressed_propagator_full(const PropagatorSet& propagators, const FlowKernelSet& kernels,
                                                       std::string_view focal_tag, double scale = 1.0);

}  // namespace propcal
