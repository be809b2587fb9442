#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "propcal/lag_series.hpp"
#include "propcal/trade_tape.hpp"

namespace propcal {

/// Linear drift attached to one tag's trades: every trade of `tag` moves all
/// later mids of its session by slope * eps * min(t - t', horizon). A zero
/// horizon makes the drift permanent.
struct InformationDrift {
    std::string tag;
    double slope = 0.0;
    std::size_t horizon = 0;
};

/// Ground truth of a synthetic market.
///
/// Kernels and propagators are indexed by lag with element 0 unused (kept at 0).
/// kernels[from * T + to] holds K_{from,to}(1..); an empty vector is a zero
/// kernel. propagators[tag] holds G_tag(1..), G(0) = 0, extended as a constant
/// beyond its last lag.
///
/// Flow noise is the Bernoulli sign draw itself: eps_t = +1 with probability
/// (1 + b_t) / 2, so mu_t = eps_t - b_t has zero mean given the past.
struct SynthConfig {
    std::string symbol = "SYN";
    std::vector<std::string> tags;
    std::vector<double> probabilities;
    std::vector<std::vector<double>> kernels;
    std::vector<std::vector<double>> propagators;
    double price_noise = 0.0;      // sigma_zeta
    double p_min = 0.01;           // sign probabilities are clipped into [p_min, 1 - p_min]
    double max_saturation = 0.05;  // fraction of clipped steps above which generation fails
    std::size_t length = 0;
    std::size_t sessions = 1;
    double initial_price = 1.0e4;
    std::uint64_t seed = 0;
    std::optional<InformationDrift> drift;

    TagSet tag_set() const { return TagSet(tags); }
    std::size_t kernel_lag() const;
    std::size_t propagator_lag() const;
    /// K_{from,to}(0..kernel_lag()), zero padded.
    std::vector<double> kernel(std::size_t from, std::size_t to) const;
    /// G_tag(0..lag), constant beyond the configured values.
    std::vector<double> propagator(std::size_t tag, std::size_t lag) const;
    /// Session boundaries of the generated tape (lengths differ by at most one).
    std::vector<std::size_t> session_offsets() const;

    /// Throws ValidationError on any inconsistency.
    void validate() const;
};

/// JSON document with fields symbol, tags [{name, probability}], kernels
/// [{from, to, values | power_law}], propagators [{tag, values | power_law}],
/// price_noise, p_min, max_saturation, length, sessions, initial_price, seed and
/// optional drift {tag, slope, horizon}. `values` start at lag 1. Kernel power laws are
/// {amplitude, exponent, lags}: a * l^-exponent. Propagator power laws are
/// {amplitude, exponent, scale, lags}: a * (1 + (l - 1) / scale)^-exponent.
SynthConfig parse_synth_config(std::string_view json);
/// Serialises with explicit `values` arrays; parse_synth_config reads it back exactly.
std::string synth_config_json(const SynthConfig& config);

struct SyntheticFlow {
    TaggedFlow flow;
    std::size_t clipped_steps = 0;
    double clipped_fraction = 0.0;
    double p_min = 0.0;
};

/// Tags drawn i.i.d. from P; signs from the causal law
///     b_t = sum_b sum_l K_{b, tag_t}(l) I(tag_{t-l} = b) eps_{t-l} / P(tag_t),
/// clipped to [-1 + 2 p_min, 1 - 2 p_min], eps_t = +1 with probability (1 + b_t) / 2.
/// Dividing by P(tag_t) makes K the coefficient of the regression of
/// I(tag_t = a) eps_t on lagged signed flows. History restarts with every session.
SyntheticFlow generate_flow(const SynthConfig& config);

/// Mid path m_t = m0 + sum_{t' < t} G_{tag_t'}(t - t') eps_t' + drift + sum_{t' < t} zeta_t'
/// within each session; trade price = mid, size 100, timestamps 1 ms apart,
/// session ids S0000, S0001, ...
SymbolTape generate_prices(const TaggedFlow& flow, const SynthConfig& config);

/// generate_flow followed by generate_prices.
SymbolTape generate_tape(const SynthConfig& config);

struct GroundTruthOptions {
    std::size_t max_lag = 20;
    std::size_t paths = 20000;
    /// Steps simulated before the probe trade; 0 picks 4 * kernel_lag() + 1.
    std::size_t burn_in = 0;
    unsigned workers = 1;
};

/// Monte-Carlo expectations in raw price units, each with its standard error
/// (stored in a parallel series).
struct GroundTruthReport {
    TagSet tags;
    std::size_t max_lag = 0;
    std::size_t paths = 0;
    std::vector<LagSeries> response;            // per tag
    std::vector<LagSeries> response_se;
    std::vector<LagSeries> correlation;         // pair first * T + second
    std::vector<LagSeries> correlation_se;
};

/// Independent ensemble oracle: every path starts a fresh session, runs the
/// burn-in, then forces the probe tag at step t0 and evaluates both signs of
/// the probe on common random numbers, weighting them by their conditional
/// probabilities. The estimate is exact for deterministic configurations.
GroundTruthReport ground_truth_report(const SynthConfig& config, const GroundTruthOptions& options = {});

}  // namespace propcal
