#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "propcal/correlation.hpp"
#include "propcal/lag_series.hpp"
#include "propcal/trade_tape.hpp"

namespace propcal {

/// Price units used for response functions.
///   raw            -- price differences as given
///   session_scaled -- each session's differences divided by that session's mean
///                     absolute one-trade mid change (1 for flat sessions)
enum class Normalization { raw, session_scaled };
enum class PoolMode { equal, count };

Normalization parse_normalization(std::string_view name);
std::string to_string(Normalization n);
PoolMode parse_pool_mode(std::string_view name);
std::string to_string(PoolMode m);

struct StatisticsOptions {
    Normalization normalization = Normalization::session_scaled;
    CorrelationMethod method = CorrelationMethod::fft;
    unsigned workers = 1;
};

/// P(tag) = count(tag) / total trades for every declared tag.
TagProbabilities actor_probabilities(const TaggedFlow& flow, const TagSet& tags);
TagProbabilities actor_probabilities(const SymbolTape& tape, const TagSet& tags);

/// R_tag(tau) = < (m_{t+tau} - m_t) eps_t | tag_t = tag >, pairs never crossing a session.
LagSeries response_function(const SymbolTape& tape, std::string_view tag, std::size_t max_lag,
                            Normalization normalization, CorrelationMethod method = CorrelationMethod::fft,
                            unsigned workers = 1);

/// C_{first,second}(tau) = < I(first_t) eps_t I(second_{t+tau}) eps_{t+tau} > / (P(first) P(second)),
/// tau = 0..max_lag, session-bounded. Only non-negative lags are produced.
LagSeries sign_correlation(const TaggedFlow& flow, std::string_view first, std::string_view second,
                           std::size_t max_lag, CorrelationMethod method = CorrelationMethod::fft,
                           unsigned workers = 1);
LagSeries sign_correlation(const SymbolTape& tape, std::string_view first, std::string_view second,
                           std::size_t max_lag, CorrelationMethod method = CorrelationMethod::fft,
                           unsigned workers = 1);

/// Everything the calibrations consume, for one symbol or a pool of them.
struct FlowStatistics {
    std::vector<std::string> symbols;
    TagProbabilities probabilities;
    std::vector<LagSeries> responses;  // indexed like probabilities.tags
    CorrelationSet correlations;
    std::size_t max_lag = 0;
    Normalization normalization = Normalization::raw;

    const TagSet& tags() const { return probabilities.tags; }
    const LagSeries& response(std::string_view tag) const { return responses.at(tags().index(tag)); }
};

/// P, every R_tag and every C_{a,b} of one tape in a single pass. Tags without
/// trades get an all-zero response with zero counts.
FlowStatistics compute_flow_statistics(const SymbolTape& tape, const TagSet& tags, std::size_t max_lag,
                                       const StatisticsOptions& options = {});

/// Cross-symbol average at every lag. equal: plain mean over the series that
/// have samples at that lag; count: sample-count weighted mean. Counts are summed.
LagSeries pool_average(std::span<const LagSeries> series, PoolMode mode);
TagProbabilities pool_probabilities(std::span<const TagProbabilities> probabilities, PoolMode mode);
FlowStatistics pool_statistics(std::span<const FlowStatistics* const> stats, PoolMode mode);
FlowStatistics pool_statistics(std::span<const FlowStatistics> stats, PoolMode mode);

/// Mean absolute one-trade mid change of every session.
std::vector<double> session_scales(const SymbolTape& tape);

/// Per-lag standard error of the mean over independent replicas (e.g. one
/// estimate per session). counts[tau] is the number of replicas used.
LagSeries standard_error_across(std::span<const LagSeries> replicas);

}  // namespace propcal
