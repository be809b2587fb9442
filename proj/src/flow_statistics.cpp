#include "propcal/flow_statistics.hpp"

#include <algorithm>
#include <cmath>

#include "propcal/log.hpp"

namespace propcal {

namespace {

void check_max_lag(std::size_t max_lag) {
    if (max_lag < 1) throw ValidationError("max lag must be at least 1");
}

void warn_if_lag_exceeds_sessions(const TaggedFlow& flow, std::size_t max_lag) {
    const auto longest = flow.longest_session();
    if (max_lag >= longest)
        notice("max lag " + std::to_string(max_lag) + " exceeds the longest session (" + std::to_string(longest) +
               " trades); trailing lags have no samples");
}

SignalFill signed_indicator(const TaggedFlow& flow, const std::vector<std::size_t>& map) {
    return [&flow, &map](std::size_t tag, std::size_t b, std::size_t e, double* dst) {
        for (std::size_t t = b; t < e; ++t)
            dst[t - b] = map[flow.tags[t]] == tag ? static_cast<double>(flow.signs[t]) : 0.0;
    };
}

std::vector<std::int64_t> pair_counts(const TaggedFlow& flow, std::size_t max_lag) {
    std::vector<std::int64_t> counts(max_lag + 1, 0);
    for (std::size_t s = 0; s < flow.session_count(); ++s) {
        const auto [b, e] = flow.session(s);
        const std::size_t n = e - b;
        for (std::size_t tau = 0; tau <= max_lag && tau < n; ++tau) counts[tau] += static_cast<std::int64_t>(n - tau);
    }
    return counts;
}

LagSeries correlation_from_sums(const std::vector<double>& sums, const std::vector<std::int64_t>& counts, double p1,
                                double p2) {
    LagSeries out(sums.size() - 1);
    for (std::size_t tau = 0; tau < sums.size(); ++tau) {
        out.counts[tau] = counts[tau];
        if (counts[tau] > 0) out.values[tau] = sums[tau] / static_cast<double>(counts[tau]) / (p1 * p2);
    }
    return out;
}

// Session-bounded response sums for the requested tags, fft or direct.
std::vector<LagSeries> response_series(const SymbolTape& tape, const std::vector<std::size_t>& map,
                                       const std::vector<std::size_t>& wanted, std::size_t max_lag,
                                       Normalization normalization, CorrelationMethod method, unsigned workers) {
    const auto& flow = tape.flow();
    const auto mids = tape.mids();
    const std::size_t L = max_lag;
    std::vector<double> scales(flow.session_count(), 1.0);
    if (normalization == Normalization::session_scaled) scales = session_scales(tape);

    std::vector<std::vector<double>> sums(wanted.size(), std::vector<double>(L + 1, 0.0));
    std::vector<std::vector<std::int64_t>> counts(wanted.size(), std::vector<std::int64_t>(L + 1, 0));
    // map from declared tag index to position in `wanted`
    std::vector<std::size_t> want_pos;
    for (std::size_t k = 0; k < wanted.size(); ++k) {
        if (want_pos.size() <= wanted[k]) want_pos.resize(wanted[k] + 1, wanted.size());
        want_pos[wanted[k]] = k;
    }
    auto position_of = [&](std::size_t code) {
        const auto d = map[code];
        return d < want_pos.size() ? want_pos[d] : wanted.size();
    };

    if (method == CorrelationMethod::direct) {
        for (std::size_t s = 0; s < flow.session_count(); ++s) {
            const auto [b, e] = flow.session(s);
            const double inv = 1.0 / scales[s];
            for (std::size_t t = b; t < e; ++t) {
                const auto k = position_of(flow.tags[t]);
                if (k == wanted.size()) continue;
                const double eps = flow.signs[t];
                const std::size_t lag_end = std::min(L, e - 1 - t);
                for (std::size_t tau = 0; tau <= lag_end; ++tau) {
                    sums[k][tau] += eps * (mids[t + tau] - mids[t]) * inv;
                    ++counts[k][tau];
                }
            }
        }
    } else {
        const auto& offsets = flow.session_offsets;
        auto session_of = [&offsets](std::size_t t) {
            return static_cast<std::size_t>(std::upper_bound(offsets.begin(), offsets.end(), t) - offsets.begin()) - 1;
        };
        SignalFill left = [&](std::size_t k, std::size_t b, std::size_t e, double* dst) {
            for (std::size_t t = b; t < e; ++t)
                dst[t - b] = position_of(flow.tags[t]) == k ? static_cast<double>(flow.signs[t]) : 0.0;
        };
        SignalFill right = [&](std::size_t, std::size_t b, std::size_t e, double* dst) {
            const auto s = session_of(b);
            const double ref = mids[offsets[s]];
            const double inv = 1.0 / scales[s];
            for (std::size_t t = b; t < e; ++t) dst[t - b] = (mids[t] - ref) * inv;
        };
        CrossSumRequest req;
        for (std::size_t k = 0; k < wanted.size(); ++k) req.pairs.emplace_back(k, 0);
        req.max_lag = L;
        req.method = CorrelationMethod::fft;
        req.workers = workers;
        const auto forward = lagged_cross_sums(left, right, offsets, req);

        // Subtract sum_{t <= end-1-tau} eps_t m'_t and count the contributing trades.
        std::vector<double> prefix;
        std::vector<std::int64_t> prefix_n;
        for (std::size_t s = 0; s < flow.session_count(); ++s) {
            const auto [b, e] = flow.session(s);
            const std::size_t n = e - b;
            const double ref = mids[b];
            const double inv = 1.0 / scales[s];
            for (std::size_t k = 0; k < wanted.size(); ++k) {
                prefix.assign(n + 1, 0.0);
                prefix_n.assign(n + 1, 0);
                for (std::size_t i = 0; i < n; ++i) {
                    const bool hit = position_of(flow.tags[b + i]) == k;
                    prefix[i + 1] = prefix[i] + (hit ? flow.signs[b + i] * ((mids[b + i] - ref) * inv) : 0.0);
                    prefix_n[i + 1] = prefix_n[i] + (hit ? 1 : 0);
                }
                for (std::size_t tau = 0; tau <= L && tau < n; ++tau) {
                    sums[k][tau] -= prefix[n - tau];
                    counts[k][tau] += prefix_n[n - tau];
                }
            }
        }
        for (std::size_t k = 0; k < wanted.size(); ++k)
            for (std::size_t tau = 0; tau <= L; ++tau) sums[k][tau] += forward[k][tau];
    }

    std::vector<LagSeries> out(wanted.size(), LagSeries(L));
    for (std::size_t k = 0; k < wanted.size(); ++k) {
        for (std::size_t tau = 1; tau <= L; ++tau) {
            out[k].counts[tau] = counts[k][tau];
            if (counts[k][tau] > 0) out[k].values[tau] = sums[k][tau] / static_cast<double>(counts[k][tau]);
        }
        out[k].counts[0] = counts[k][0];
        out[k].values[0] = 0.0;
    }
    return out;
}

TagSet tape_tags(const TaggedFlow& flow) { return TagSet(flow.tag_names); }

}  // namespace

Normalization parse_normalization(std::string_view name) {
    if (name == "raw") return Normalization::raw;
    if (name == "session-scaled" || name == "session_scaled") return Normalization::session_scaled;
    throw ValidationError("unknown normalization '" + std::string(name) + "' (expected raw or session-scaled)");
}

std::string to_string(Normalization n) { return n == Normalization::raw ? "raw" : "session-scaled"; }

PoolMode parse_pool_mode(std::string_view name) {
    if (name == "equal") return PoolMode::equal;
    if (name == "count") return PoolMode::count;
    throw ValidationError("unknown pooling mode '" + std::string(name) + "' (expected equal or count)");
}

std::string to_string(PoolMode m) { return m == PoolMode::equal ? "equal" : "count"; }

TagProbabilities actor_probabilities(const TaggedFlow& flow, const TagSet& tags) {
    if (flow.size() == 0) throw ValidationError("cannot compute tag probabilities of an empty tape");
    if (tags.empty()) throw ValidationError("empty tag set");
    const auto map = flow.code_map(tags);
    TagProbabilities out{tags, std::vector<double>(tags.size(), 0.0), std::vector<std::int64_t>(tags.size(), 0)};
    for (auto code : flow.tags) ++out.counts[map[code]];
    for (std::size_t i = 0; i < tags.size(); ++i)
        out.p[i] = static_cast<double>(out.counts[i]) / static_cast<double>(flow.size());
    return out;
}

TagProbabilities actor_probabilities(const SymbolTape& tape, const TagSet& tags) {
    return actor_probabilities(tape.flow(), tags);
}

LagSeries response_function(const SymbolTape& tape, std::string_view tag, std::size_t max_lag,
                            Normalization normalization, CorrelationMethod method, unsigned workers) {
    check_max_lag(max_lag);
    if (tape.tag_count(tag) == 0) throw ValidationError("no trades with tag '" + std::string(tag) + "'");
    warn_if_lag_exceeds_sessions(tape.flow(), max_lag);
    const TagSet tags = tape_tags(tape.flow());
    const auto map = tape.flow().code_map(tags);
    return response_series(tape, map, {tags.index(tag)}, max_lag, normalization, method, workers).front();
}

LagSeries sign_correlation(const TaggedFlow& flow, std::string_view first, std::string_view second,
                           std::size_t max_lag, CorrelationMethod method, unsigned workers) {
    check_max_lag(max_lag);
    const TagSet tags = tape_tags(flow);
    const auto P = actor_probabilities(flow, tags);
    const auto i = tags.find(first), j = tags.find(second);
    if (!i || P.p[*i] == 0.0) throw ValidationError("no trades with tag '" + std::string(first) + "'");
    if (!j || P.p[*j] == 0.0) throw ValidationError("no trades with tag '" + std::string(second) + "'");
    warn_if_lag_exceeds_sessions(flow, max_lag);
    const auto map = flow.code_map(tags);
    CrossSumRequest req{{{*i, *j}}, max_lag, method, true, workers};
    const auto x = signed_indicator(flow, map);
    const auto sums = lagged_cross_sums(x, x, flow.session_offsets, req);
    return correlation_from_sums(sums.front(), pair_counts(flow, max_lag), P.p[*i], P.p[*j]);
}

LagSeries sign_correlation(const SymbolTape& tape, std::string_view first, std::string_view second,
                           std::size_t max_lag, CorrelationMethod method, unsigned workers) {
    return sign_correlation(tape.flow(), first, second, max_lag, method, workers);
}

FlowStatistics compute_flow_statistics(const SymbolTape& tape, const TagSet& tags, std::size_t max_lag,
                                       const StatisticsOptions& options) {
    check_max_lag(max_lag);
    const auto& flow = tape.flow();
    FlowStatistics out;
    out.symbols = {tape.symbol()};
    out.probabilities = actor_probabilities(flow, tags);
    out.max_lag = max_lag;
    out.normalization = options.normalization;
    warn_if_lag_exceeds_sessions(flow, max_lag);
    const auto map = flow.code_map(tags);
    const std::size_t T = tags.size();

    std::vector<std::size_t> present;
    for (std::size_t i = 0; i < T; ++i)
        if (out.probabilities.counts[i] > 0) present.push_back(i);

    out.responses.assign(T, LagSeries(max_lag));
    const auto R = response_series(tape, map, present, max_lag, options.normalization, options.method, options.workers);
    for (std::size_t k = 0; k < present.size(); ++k) out.responses[present[k]] = R[k];

    out.correlations = CorrelationSet(tags, max_lag);
    CrossSumRequest req;
    for (auto i : present)
        for (auto j : present) req.pairs.emplace_back(i, j);
    req.max_lag = max_lag;
    req.method = options.method;
    req.integer_valued = true;
    req.workers = options.workers;
    const auto x = signed_indicator(flow, map);
    const auto sums = lagged_cross_sums(x, x, flow.session_offsets, req);
    const auto counts = pair_counts(flow, max_lag);
    for (std::size_t p = 0; p < req.pairs.size(); ++p) {
        const auto [i, j] = req.pairs[p];
        out.correlations.at(i, j) =
            correlation_from_sums(sums[p], counts, out.probabilities.p[i], out.probabilities.p[j]);
    }
    return out;
}

LagSeries pool_average(std::span<const LagSeries> series, PoolMode mode) {
    if (series.empty()) throw ValidationError("pool_average: no series");
    const std::size_t L = series.front().max_lag();
    for (const auto& s : series)
        if (s.max_lag() != L) throw ValidationError("pool_average: series have different max lags");
    LagSeries out(L);
    for (std::size_t tau = 0; tau <= L; ++tau) {
        double num = 0.0, den = 0.0;
        std::int64_t total = 0;
        for (const auto& s : series) {
            if (s.counts[tau] <= 0) continue;
            const double w = mode == PoolMode::equal ? 1.0 : static_cast<double>(s.counts[tau]);
            num += w * s.values[tau];
            den += w;
            total += s.counts[tau];
        }
        out.counts[tau] = total;
        out.values[tau] = den > 0.0 ? num / den : 0.0;
    }
    return out;
}

TagProbabilities pool_probabilities(std::span<const TagProbabilities> probabilities, PoolMode mode) {
    if (probabilities.empty()) throw ValidationError("pool_probabilities: no inputs");
    const auto& tags = probabilities.front().tags;
    TagProbabilities out{tags, std::vector<double>(tags.size(), 0.0), std::vector<std::int64_t>(tags.size(), 0)};
    std::int64_t total = 0;
    for (const auto& p : probabilities) {
        if (!(p.tags == tags)) throw ValidationError("pool_probabilities: tag sets differ");
        for (std::size_t i = 0; i < tags.size(); ++i) {
            out.counts[i] += p.counts[i];
            total += p.counts[i];
            if (mode == PoolMode::equal) out.p[i] += p.p[i];
        }
    }
    for (std::size_t i = 0; i < tags.size(); ++i) {
        if (mode == PoolMode::equal)
            out.p[i] /= static_cast<double>(probabilities.size());
        else
            out.p[i] = total > 0 ? static_cast<double>(out.counts[i]) / static_cast<double>(total) : 0.0;
    }
    return out;
}

FlowStatistics pool_statistics(std::span<const FlowStatistics* const> stats, PoolMode mode) {
    if (stats.empty()) throw ValidationError("pool_statistics: no inputs");
    const auto& first = *stats.front();
    const TagSet tags = first.tags();
    for (const auto* s : stats) {
        if (!(s->tags() == tags)) throw ValidationError("pool_statistics: tag sets differ");
        if (s->max_lag != first.max_lag) throw ValidationError("pool_statistics: max lags differ");
        if (s->normalization != first.normalization) throw ValidationError("pool_statistics: normalizations differ");
    }
    FlowStatistics out;
    out.max_lag = first.max_lag;
    out.normalization = first.normalization;
    std::vector<TagProbabilities> probs;
    for (const auto* s : stats) {
        out.symbols.insert(out.symbols.end(), s->symbols.begin(), s->symbols.end());
        probs.push_back(s->probabilities);
    }
    out.probabilities = pool_probabilities(probs, mode);
    std::vector<LagSeries> buf(stats.size());
    for (std::size_t i = 0; i < tags.size(); ++i) {
        for (std::size_t k = 0; k < stats.size(); ++k) buf[k] = stats[k]->responses[i];
        out.responses.push_back(pool_average(buf, mode));
    }
    out.correlations = CorrelationSet(tags, first.max_lag);
    for (std::size_t i = 0; i < tags.size(); ++i)
        for (std::size_t j = 0; j < tags.size(); ++j) {
            for (std::size_t k = 0; k < stats.size(); ++k) buf[k] = stats[k]->correlations.at(i, j);
            out.correlations.at(i, j) = pool_average(buf, mode);
        }
    return out;
}

FlowStatistics pool_statistics(std::span<const FlowStatistics> stats, PoolMode mode) {
    std::vector<const FlowStatistics*> ptrs;
    for (const auto& s : stats) ptrs.push_back(&s);
    return pool_statistics(std::span<const FlowStatistics* const>(ptrs), mode);
}

std::vector<double> session_scales(const SymbolTape& tape) {
    const auto& flow = tape.flow();
    const auto mids = tape.mids();
    std::vector<double> out(flow.session_count(), 1.0);
    for (std::size_t s = 0; s < flow.session_count(); ++s) {
        const auto [b, e] = flow.session(s);
        if (e - b < 2) continue;
        double acc = 0.0;
        for (std::size_t t = b; t + 1 < e; ++t) acc += std::fabs(mids[t + 1] - mids[t]);
        const double scale = acc / static_cast<double>(e - b - 1);
        if (scale > 0.0) out[s] = scale;
    }
    return out;
}

LagSeries standard_error_across(std::span<const LagSeries> replicas) {
    if (replicas.size() < 2) throw ValidationError("standard_error_across: need at least two replicas");
    const std::size_t L = replicas.front().max_lag();
    LagSeries out(L);
    for (std::size_t tau = 0; tau <= L; ++tau) {
        double sum = 0.0, sum2 = 0.0;
        std::int64_t n = 0;
        for (const auto& r : replicas) {
            if (r.max_lag() != L) throw ValidationError("standard_error_across: series have different max lags");
            if (r.counts[tau] <= 0) continue;
            sum += r.values[tau];
            ++n;
        }
        if (n < 2) continue;
        const double mean = sum / static_cast<double>(n);
        for (const auto& r : replicas)
            if (r.counts[tau] > 0) sum2 += (r.values[tau] - mean) * (r.values[tau] - mean);
        out.values[tau] = std::sqrt(sum2 / static_cast<double>(n - 1) / static_cast<double>(n));
        out.counts[tau] = n;
    }
    return out;
}

}  // namespace propcal
