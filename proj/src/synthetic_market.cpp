#include "propcal/synthetic_market.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include <json.hpp>

#include "propcal/parallel.hpp"

namespace propcal {

namespace {

using nlohmann::json;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t kPriceStream = 0x5052494345ULL;
constexpr std::uint64_t kOracleStream = 0x4f5241434c45ULL;

bool valid_name(const std::string& s) {
    return !s.empty() && s.find_first_of(",\r\n\"") == std::string::npos;
}

/// Tag, sign and kernel tables shared by the tape generator and the oracle.
struct FlowModel {
    std::size_t T = 0;
    std::size_t LK = 0;
    std::vector<double> cumulative;  // cumulative tag probabilities
    std::vector<double> kernel;      // [to][from][lag] = K_{from,to}(lag) / P(to)
    double bmax = 1.0;

    explicit FlowModel(const SynthConfig& c) : T(c.tags.size()), LK(c.kernel_lag()) {
        double acc = 0.0;
        for (double p : c.probabilities) cumulative.push_back(acc += p);
        cumulative.back() = 1.0;
        kernel.assign(T * T * (LK + 1), 0.0);
        for (std::size_t to = 0; to < T; ++to)
            for (std::size_t from = 0; from < T; ++from) {
                const auto k = c.kernel(from, to);
                for (std::size_t l = 1; l <= LK; ++l) kernel[(to * T + from) * (LK + 1) + l] = k[l] / c.probabilities[to];
            }
        bmax = 1.0 - 2.0 * c.p_min;
    }

    std::uint16_t draw_tag(double u) const {
        std::size_t i = 0;
        while (i + 1 < T && u >= cumulative[i]) ++i;
        return static_cast<std::uint16_t>(i);
    }

    /// Unclipped imbalance for a trade of tag `to` at position t; history
    /// starts at `begin`.
    double imbalance(std::uint16_t to, const std::uint16_t* tags, const std::int8_t* signs, std::size_t begin,
                     std::size_t t) const {
        if (LK == 0) return 0.0;
        const std::size_t depth = std::min(LK, t - begin);
        double b = 0.0;
        for (std::size_t l = 1; l <= depth; ++l)
            b += kernel[(to * T + tags[t - l]) * (LK + 1) + l] * signs[t - l];
        return b;
    }

    /// Returns the clipped imbalance; `clipped` is set when clipping applied.
    double clip(double b, bool& clipped) const {
        clipped = std::fabs(b) > bmax;
        return std::clamp(b, -bmax, bmax);
    }

    static std::int8_t draw_sign(double b, double u) { return u < 0.5 * (1.0 + b) ? 1 : -1; }
};

/// G tables padded to a common lag.
struct PriceModel {
    std::size_t L = 0;
    std::vector<std::vector<double>> G;
    std::size_t drift_tag = static_cast<std::size_t>(-1);
    double drift_slope = 0.0;
    std::size_t drift_horizon = 0;

    explicit PriceModel(const SynthConfig& c) : L(c.propagator_lag()) {
        for (std::size_t a = 0; a < c.tags.size(); ++a) G.push_back(c.propagator(a, L));
        if (c.drift) {
            drift_tag = c.tag_set().index(c.drift->tag);
            drift_slope = c.drift->slope;
            drift_horizon = c.drift->horizon;
        }
    }
    double g(std::size_t tag, std::size_t lag) const { return G[tag][std::min(lag, L)]; }
    double ramp(std::size_t lag) const {
        return drift_slope * static_cast<double>(drift_horizon ? std::min(lag, drift_horizon) : lag);
    }
};

std::vector<double> read_profile(const json& j, bool propagator, const std::string& what) {
    std::vector<double> out{0.0};
    if (j.contains("values")) {
        for (const auto& v : j.at("values")) out.push_back(v.get<double>());
        return out;
    }
    if (!j.contains("power_law")) throw ValidationError(what + ": needs 'values' or 'power_law'");
    const auto& p = j.at("power_law");
    const double a = p.at("amplitude").get<double>();
    const double e = p.at("exponent").get<double>();
    const auto n = p.at("lags").get<std::size_t>();
    const double scale = propagator ? p.value("scale", 1.0) : 1.0;
    if (propagator && !(scale > 0.0)) throw ValidationError(what + ": power_law scale must be positive");
    for (std::size_t l = 1; l <= n; ++l) {
        const double x = propagator ? 1.0 + static_cast<double>(l - 1) / scale : static_cast<double>(l);
        out.push_back(a * std::pow(x, -e));
    }
    return out;
}

}  // namespace

std::size_t SynthConfig::kernel_lag() const {
    std::size_t L = 0;
    for (const auto& k : kernels)
        if (!k.empty()) L = std::max(L, k.size() - 1);
    return L;
}

std::size_t SynthConfig::propagator_lag() const {
    std::size_t L = 1;
    for (const auto& g : propagators)
        if (!g.empty()) L = std::max(L, g.size() - 1);
    return L;
}

std::vector<double> SynthConfig::kernel(std::size_t from, std::size_t to) const {
    std::vector<double> out(kernel_lag() + 1, 0.0);
    if (kernels.empty()) return out;
    const auto& k = kernels.at(from * tags.size() + to);
    for (std::size_t l = 1; l < k.size(); ++l) out[l] = k[l];
    return out;
}

std::vector<double> SynthConfig::propagator(std::size_t tag, std::size_t lag) const {
    std::vector<double> out(lag + 1, 0.0);
    const auto& g = propagators.at(tag);
    if (g.size() < 2) return out;
    for (std::size_t l = 1; l <= lag; ++l) out[l] = g[std::min(l, g.size() - 1)];
    return out;
}

std::vector<std::size_t> SynthConfig::session_offsets() const {
    std::vector<std::size_t> off{0};
    const std::size_t base = length / sessions, extra = length % sessions;
    for (std::size_t s = 0; s < sessions; ++s) off.push_back(off.back() + base + (s < extra ? 1 : 0));
    return off;
}

void SynthConfig::validate() const {
    if (!valid_name(symbol)) throw ValidationError("synthetic config: invalid symbol name");
    if (tags.empty()) throw ValidationError("synthetic config: no tags");
    if (std::set<std::string>(tags.begin(), tags.end()).size() != tags.size())
        throw ValidationError("synthetic config: duplicate tag");
    for (const auto& t : tags)
        if (!valid_name(t) || t.size() > 15) throw ValidationError("synthetic config: invalid tag name '" + t + "'");
    if (probabilities.size() != tags.size()) throw ValidationError("synthetic config: one probability per tag");
    double total = 0.0;
    for (double p : probabilities) {
        if (!(p > 0.0 && p <= 1.0)) throw ValidationError("synthetic config: tag probabilities must lie in (0, 1]");
        total += p;
    }
    if (std::fabs(total - 1.0) > 1e-9) throw ValidationError("synthetic config: tag probabilities must sum to 1");
    if (!kernels.empty() && kernels.size() != tags.size() * tags.size())
        throw ValidationError("synthetic config: kernels must cover every ordered tag pair");
    for (const auto& k : kernels)
        for (std::size_t l = 0; l < k.size(); ++l)
            if (!std::isfinite(k[l]) || (l == 0 && k[l] != 0.0))
                throw ValidationError("synthetic config: kernel values must be finite with lag 0 unused");
    if (propagators.size() != tags.size()) throw ValidationError("synthetic config: one propagator per tag");
    for (const auto& g : propagators)
        for (std::size_t l = 0; l < g.size(); ++l)
            if (!std::isfinite(g[l]) || (l == 0 && g[l] != 0.0))
                throw ValidationError("synthetic config: propagator values must be finite with G(0) = 0");
    if (!(price_noise >= 0.0) || !std::isfinite(price_noise))
        throw ValidationError("synthetic config: price_noise must be finite and >= 0");
    if (!(p_min > 0.0 && p_min < 0.5)) throw ValidationError("synthetic config: p_min must lie in (0, 0.5)");
    if (!(max_saturation >= 0.0 && max_saturation <= 1.0))
        throw ValidationError("synthetic config: max_saturation must lie in [0, 1]");
    if (length < 1) throw ValidationError("synthetic config: length must be at least 1");
    if (sessions < 1 || sessions > length) throw ValidationError("synthetic config: sessions must lie in 1..length");
    if (!(initial_price > 0.0) || !std::isfinite(initial_price))
        throw ValidationError("synthetic config: initial_price must be positive");
    if (drift) {
        if (!tag_set().find(drift->tag)) throw ValidationError("synthetic config: drift tag is not declared");
        if (!std::isfinite(drift->slope)) throw ValidationError("synthetic config: drift slope must be finite");
    }
}

SynthConfig parse_synth_config(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("synthetic config: invalid JSON: ") + e.what());
    }
    SynthConfig c;
    try {
        c.symbol = j.value("symbol", c.symbol);
        for (const auto& t : j.at("tags")) {
            c.tags.push_back(t.at("name").get<std::string>());
            c.probabilities.push_back(t.at("probability").get<double>());
        }
        const TagSet tags(c.tags);
        const std::size_t T = c.tags.size();
        if (j.contains("kernels")) {
            c.kernels.assign(T * T, {});
            for (const auto& k : j.at("kernels")) {
                const auto from = tags.index(k.at("from").get<std::string>());
                const auto to = tags.index(k.at("to").get<std::string>());
                c.kernels[from * T + to] = read_profile(k, false, "kernel " + c.tags[from] + "," + c.tags[to]);
            }
        }
        c.propagators.assign(T, {});
        if (j.contains("propagators"))
            for (const auto& g : j.at("propagators")) {
                const auto a = tags.index(g.at("tag").get<std::string>());
                c.propagators[a] = read_profile(g, true, "propagator " + c.tags[a]);
            }
        c.price_noise = j.value("price_noise", c.price_noise);
        c.p_min = j.value("p_min", c.p_min);
        c.max_saturation = j.value("max_saturation", c.max_saturation);
        c.length = j.at("length").get<std::size_t>();
        c.sessions = j.value("sessions", c.sessions);
        c.initial_price = j.value("initial_price", c.initial_price);
        c.seed = j.value("seed", c.seed);
        if (j.contains("drift") && !j.at("drift").is_null())
            c.drift = InformationDrift{j.at("drift").at("tag").get<std::string>(), j.at("drift").at("slope").get<double>(),
                                       j.at("drift").value("horizon", std::size_t{0})};
    } catch (const json::exception& e) {
        throw ValidationError(std::string("synthetic config: ") + e.what());
    }
    c.validate();
    return c;
}

std::string synth_config_json(const SynthConfig& c) {
    json j;
    j["symbol"] = c.symbol;
    j["tags"] = json::array();
    for (std::size_t a = 0; a < c.tags.size(); ++a)
        j["tags"].push_back({{"name", c.tags[a]}, {"probability", c.probabilities[a]}});
    j["kernels"] = json::array();
    for (std::size_t i = 0; i < c.kernels.size(); ++i) {
        if (c.kernels[i].size() < 2) continue;
        j["kernels"].push_back({{"from", c.tags[i / c.tags.size()]},
                                {"to", c.tags[i % c.tags.size()]},
                                {"values", std::vector<double>(c.kernels[i].begin() + 1, c.kernels[i].end())}});
    }
    j["propagators"] = json::array();
    for (std::size_t a = 0; a < c.propagators.size(); ++a) {
        const auto& g = c.propagators[a];
        j["propagators"].push_back(
            {{"tag", c.tags[a]}, {"values", g.size() < 2 ? std::vector<double>{} : std::vector<double>(g.begin() + 1, g.end())}});
    }
    j["price_noise"] = c.price_noise;
    j["p_min"] = c.p_min;
    j["max_saturation"] = c.max_saturation;
    j["length"] = c.length;
    j["sessions"] = c.sessions;
    j["initial_price"] = c.initial_price;
    j["seed"] = c.seed;
    if (c.drift) j["drift"] = {{"tag", c.drift->tag}, {"slope", c.drift->slope}, {"horizon", c.drift->horizon}};
    return j.dump(2);
}

SyntheticFlow generate_flow(const SynthConfig& config) {
    config.validate();
    const FlowModel model(config);
    SyntheticFlow out;
    out.p_min = config.p_min;
    auto& f = out.flow;
    f.tag_names = config.tags;
    f.session_offsets = config.session_offsets();
    f.tags.resize(config.length);
    f.signs.resize(config.length);

    std::mt19937_64 rng(splitmix64(config.seed));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t s = 0; s < f.session_count(); ++s) {
        const auto [begin, end] = f.session(s);
        for (std::size_t t = begin; t < end; ++t) {
            const std::uint16_t tag = model.draw_tag(unit(rng));
            bool clipped = false;
            const double b = model.clip(model.imbalance(tag, f.tags.data(), f.signs.data(), begin, t), clipped);
            out.clipped_steps += clipped;
            f.tags[t] = tag;
            f.signs[t] = FlowModel::draw_sign(b, unit(rng));
        }
    }
    out.clipped_fraction = static_cast<double>(out.clipped_steps) / static_cast<double>(config.length);
    if (out.clipped_fraction > config.max_saturation) {
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "flow kernels saturate: sign probability clipped at %.2f%% of steps (threshold %.2f%%)",
                      100.0 * out.clipped_fraction, 100.0 * config.max_saturation);
        throw ValidationError(buf);
    }
    return out;
}

SymbolTape generate_prices(const TaggedFlow& flow, const SynthConfig& config) {
    config.validate();
    flow.validate();
    const auto map = flow.code_map(config.tag_set());
    const PriceModel model(config);
    const std::size_t L = model.L;
    const std::size_t n = flow.size();

    TapeColumns c;
    c.symbol = config.symbol;
    c.flow = flow;
    c.timestamps.resize(n);
    c.prices.resize(n);
    c.mids.resize(n);
    c.sizes.assign(n, 100.0);
    c.aggregated_counts.assign(n, 1);

    std::mt19937_64 rng(splitmix64(config.seed ^ kPriceStream));
    std::normal_distribution<double> zeta(0.0, 1.0);
    std::vector<double> impact, tail;
    for (std::size_t s = 0; s < flow.session_count(); ++s) {
        char id[32];
        std::snprintf(id, sizeof id, "S%04zu", s);
        c.session_ids.emplace_back(id);
        const auto [begin, end] = flow.session(s);
        const std::size_t len = end - begin;
        impact.assign(len, 0.0);
        tail.assign(len + 1, 0.0);
        for (std::size_t i = 0; i < len; ++i) {
            const std::size_t tag = map[flow.tags[begin + i]];
            const double e = flow.signs[begin + i];
            const double* g = model.G[tag].data();
            const std::size_t reach = std::min(L, len - 1 - i);
            double* dst = impact.data() + i;
            for (std::size_t d = 1; d <= reach; ++d) dst[d] += e * g[d];
            if (i + L + 1 < len) tail[i + L + 1] += e * g[L];
        }
        double tail_sum = 0.0, drift = 0.0, flow_sum = 0.0, noise = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
            const std::size_t t = begin + i;
            tail_sum += tail[i];
            const double m = config.initial_price + (impact[i] + tail_sum) + drift + noise;
            if (!(m > 0.0))
                throw ValidationError("synthetic mid path reached a non-positive value at record " + std::to_string(t) +
                                      "; raise initial_price");
            c.mids[t] = m;
            c.prices[t] = m;
            c.timestamps[t] = static_cast<std::int64_t>(t);
            if (map[flow.tags[t]] == model.drift_tag) flow_sum += flow.signs[t];
            if (model.drift_horizon && i >= model.drift_horizon && map[flow.tags[t - model.drift_horizon]] == model.drift_tag)
                flow_sum -= flow.signs[t - model.drift_horizon];
            drift += model.drift_slope * flow_sum;
            if (config.price_noise > 0.0) noise += config.price_noise * zeta(rng);
        }
    }
    return SymbolTape(std::move(c));
}

SymbolTape generate_tape(const SynthConfig& config) { return generate_prices(generate_flow(config).flow, config); }

namespace {

struct OracleSums {
    std::vector<double> r, r2, c, c2;  // [tag][lag], [pair][lag]
};

}  // namespace

GroundTruthReport ground_truth_report(const SynthConfig& config, const GroundTruthOptions& options) {
    config.validate();
    if (options.paths < 2) throw ValidationError("ground truth: need at least 2 paths");
    const FlowModel fm(config);
    const PriceModel pm(config);
    const std::size_t T = fm.T, H = options.max_lag;
    const std::size_t B = options.burn_in ? options.burn_in : 4 * fm.LK + 1;
    const std::size_t n = B + H + 1;
    const std::size_t t0 = B;

    constexpr std::size_t kChunk = 256;
    const std::size_t chunks = (options.paths + kChunk - 1) / kChunk;
    std::vector<OracleSums> partial(chunks);

    parallel_for(chunks, options.workers, [&](std::size_t chunk) {
        OracleSums acc;
        acc.r.assign(T * (H + 1), 0.0);
        acc.r2 = acc.r;
        acc.c.assign(T * T * (H + 1), 0.0);
        acc.c2 = acc.c;
        std::vector<std::uint16_t> tags(n);
        std::vector<std::int8_t> base_signs(n), sp(n), sm(n);
        std::vector<double> u_sign(n), zeta(n), hist(H + 1), dm_p(H + 1), dm_m(H + 1);
        const std::size_t last = std::min(options.paths, (chunk + 1) * kChunk);
        for (std::size_t path = chunk * kChunk; path < last; ++path) {
            std::mt19937_64 rng(splitmix64(splitmix64(config.seed ^ kOracleStream) + path));
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            std::normal_distribution<double> normal(0.0, 1.0);
            for (std::size_t t = 0; t < n; ++t) {
                tags[t] = fm.draw_tag(unit(rng));
                u_sign[t] = unit(rng);
                zeta[t] = config.price_noise > 0.0 ? config.price_noise * normal(rng) : 0.0;
            }
            bool clipped = false;
            for (std::size_t t = 0; t < t0; ++t)
                base_signs[t] = FlowModel::draw_sign(
                    fm.clip(fm.imbalance(tags[t], tags.data(), base_signs.data(), 0, t), clipped), u_sign[t]);

            // Mid change from trades before the probe, common to every branch and probe tag.
            for (std::size_t tau = 0; tau <= H; ++tau) hist[tau] = 0.0;
            for (std::size_t tp = 0; tp < t0; ++tp) {
                const double e = base_signs[tp];
                const bool drifts = tags[tp] == pm.drift_tag;
                for (std::size_t tau = 1; tau <= H; ++tau) {
                    hist[tau] += e * (pm.g(tags[tp], t0 + tau - tp) - pm.g(tags[tp], t0 - tp));
                    if (drifts) hist[tau] += e * (pm.ramp(t0 + tau - tp) - pm.ramp(t0 - tp));
                }
            }

            for (std::size_t a = 0; a < T; ++a) {
                tags[t0] = static_cast<std::uint16_t>(a);
                const double b = fm.clip(fm.imbalance(tags[t0], tags.data(), base_signs.data(), 0, t0), clipped);
                for (int branch = 0; branch < 2; ++branch) {
                    auto& s = branch == 0 ? sp : sm;
                    auto& dm = branch == 0 ? dm_p : dm_m;
                    std::copy(base_signs.begin(), base_signs.begin() + static_cast<std::ptrdiff_t>(t0), s.begin());
                    s[t0] = branch == 0 ? 1 : -1;
                    for (std::size_t t = t0 + 1; t < n; ++t)
                        s[t] = FlowModel::draw_sign(fm.clip(fm.imbalance(tags[t], tags.data(), s.data(), 0, t), clipped),
                                                    u_sign[t]);
                    double noise = 0.0;
                    for (std::size_t tau = 1; tau <= H; ++tau) {
                        const std::size_t t = t0 + tau;
                        double v = hist[tau];
                        for (std::size_t tp = t0; tp < t; ++tp) {
                            v += s[tp] * pm.g(tags[tp], t - tp);
                            if (tags[tp] == pm.drift_tag) v += s[tp] * pm.ramp(t - tp);
                        }
                        noise += zeta[t - 1];
                        dm[tau] = v + noise;
                    }
                }
                const double pp = 0.5 * (1.0 + b), pmn = 0.5 * (1.0 - b);
                for (std::size_t tau = 1; tau <= H; ++tau) {
                    const double r = pp * dm_p[tau] - pmn * dm_m[tau];
                    acc.r[a * (H + 1) + tau] += r;
                    acc.r2[a * (H + 1) + tau] += r * r;
                    const std::size_t cb = tags[t0 + tau];
                    const double c = (pp * sp[t0 + tau] - pmn * sm[t0 + tau]) / config.probabilities[cb];
                    for (std::size_t other = 0; other < T; ++other) {
                        const double v = other == cb ? c : 0.0;
                        acc.c[(a * T + other) * (H + 1) + tau] += v;
                        acc.c2[(a * T + other) * (H + 1) + tau] += v * v;
                    }
                }
            }
        }
        partial[chunk] = std::move(acc);
    });

    OracleSums total = partial[0];
    for (std::size_t k = 1; k < chunks; ++k)
        for (std::size_t i = 0; i < total.r.size(); ++i) {
            total.r[i] += partial[k].r[i];
            total.r2[i] += partial[k].r2[i];
        }
    for (std::size_t k = 1; k < chunks; ++k)
        for (std::size_t i = 0; i < total.c.size(); ++i) {
            total.c[i] += partial[k].c[i];
            total.c2[i] += partial[k].c2[i];
        }

    const double N = static_cast<double>(options.paths);
    auto fill = [&](const double* sum, const double* sq, LagSeries& mean, LagSeries& se) {
        mean = LagSeries(H);
        se = LagSeries(H);
        for (std::size_t tau = 1; tau <= H; ++tau) {
            const double m = sum[tau] / N;
            const double var = std::max(0.0, (sq[tau] - N * m * m) / (N - 1.0));
            mean.values[tau] = m;
            se.values[tau] = std::sqrt(var / N);
            mean.counts[tau] = se.counts[tau] = static_cast<std::int64_t>(options.paths);
        }
    };
    GroundTruthReport rep;
    rep.tags = config.tag_set();
    rep.max_lag = H;
    rep.paths = options.paths;
    rep.response.resize(T);
    rep.response_se.resize(T);
    rep.correlation.resize(T * T);
    rep.correlation_se.resize(T * T);
    for (std::size_t a = 0; a < T; ++a) {
        fill(&total.r[a * (H + 1)], &total.r2[a * (H + 1)], rep.response[a], rep.response_se[a]);
        for (std::size_t b = 0; b < T; ++b) {
            const std::size_t p = a * T + b;
            fill(&total.c[p * (H + 1)], &total.c2[p * (H + 1)], rep.correlation[p], rep.correlation_se[p]);
            rep.correlation[p].values[0] = a == b ? 1.0 / config.probabilities[a] : 0.0;
            rep.correlation[p].counts[0] = static_cast<std::int64_t>(options.paths);
        }
    }
    return rep;
}

}  // namespace propcal
