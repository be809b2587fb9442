#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "propcal/synthetic_market.hpp"
#include "propcal/trade_tape.hpp"

namespace fixtures {

/// Tape from explicit columns; consecutive sessions of the given lengths.
inline propcal::SymbolTape make_tape(const std::vector<std::string>& tags, const std::vector<int>& signs,
                                     const std::vector<double>& mids, const std::vector<std::size_t>& session_lengths,
                                     const std::string& symbol = "T") {
    propcal::TapeColumns c;
    c.symbol = symbol;
    std::vector<std::string> names;
    for (const auto& t : tags) {
        std::size_t code = 0;
        while (code < names.size() && names[code] != t) ++code;
        if (code == names.size()) names.push_back(t);
        c.flow.tags.push_back(static_cast<std::uint16_t>(code));
    }
    c.flow.tag_names = names;
    for (int s : signs) c.flow.signs.push_back(static_cast<std::int8_t>(s));
    std::size_t off = 0;
    for (std::size_t s = 0; s < session_lengths.size(); ++s) {
        off += session_lengths[s];
        c.flow.session_offsets.push_back(off);
        c.session_ids.push_back("S" + std::to_string(s));
    }
    const std::size_t n = tags.size();
    for (std::size_t t = 0; t < n; ++t) c.timestamps.push_back(static_cast<std::int64_t>(t));
    c.mids = mids;
    c.prices = mids;
    c.sizes.assign(n, 1.0);
    c.aggregated_counts.assign(n, 1);
    return propcal::SymbolTape(std::move(c));
}

/// Random two-tag tape with i.i.d. tags and signs and a random-walk mid.
inline propcal::SymbolTape random_tape(std::size_t n, std::vector<std::size_t> sessions, double p_first,
                                       std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::string> tags;
    std::vector<int> signs;
    std::vector<double> mids;
    double m = 100.0;
    for (std::size_t t = 0; t < n; ++t) {
        tags.push_back(u(rng) < p_first ? "F" : "M");
        signs.push_back(u(rng) < 0.5 ? 1 : -1);
        m += 0.01 * signs.back() + 0.02 * (u(rng) - 0.5);
        mids.push_back(m);
    }
    return make_tape(tags, signs, mids, sessions);
}

inline std::vector<double> power_law(double a, double e, double scale, std::size_t lags) {
    std::vector<double> v{0.0};
    for (std::size_t l = 1; l <= lags; ++l) v.push_back(a * std::pow(1.0 + static_cast<double>(l - 1) / scale, -e));
    return v;
}

/// Two-tag market with herding self-kernels, a short positive then negative
/// cross reaction and a common slowly decaying propagator.
inline propcal::SynthConfig two_tag_market(std::size_t length, std::size_t sessions, std::uint64_t seed,
                                           double p_focal = 0.2) {
    propcal::SynthConfig c;
    c.tags = {"F", "M"};
    c.probabilities = {p_focal, 1.0 - p_focal};
    c.kernels.assign(4, {});
    c.kernels[0] = {0.0, 0.03, 0.02, 0.01};                          // F -> F
    c.kernels[1] = {0.0, 0.1, 0.05, -0.02, -0.02, -0.015, -0.01};      // F -> M
    c.kernels[3] = {0.0, 0.12, 0.06, 0.04, 0.03, 0.02, 0.015, 0.01};  // M -> M
    c.propagators = {power_law(1.0, 0.4, 10.0, 30), power_law(1.0, 0.4, 10.0, 30)};
    c.price_noise = 0.3;
    c.length = length;
    c.sessions = sessions;
    c.seed = seed;
    return c;
}

}  // namespace fixtures
