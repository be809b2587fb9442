// Acceptance run: one PASS/FAIL line per criterion, tolerances pinned below.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "oracles.hpp"
#include "propcal/bootstrap.hpp"
#include "propcal/cli.hpp"
#include "propcal/flow_statistics.hpp"
#include "propcal/kernel_calibration.hpp"
#include "propcal/log.hpp"
#include "propcal/propagator_calibration.hpp"
#include "propcal/synthetic_market.hpp"

using namespace propcal;
namespace fs = std::filesystem;

namespace {

constexpr double kAc1RelRms = 0.05;
constexpr double kAc1Seconds = 300.0;
constexpr double kAc2RelRms = 0.10;
constexpr double kAc2Seconds = 300.0;
constexpr double kAc3Relative = 1e-10;
constexpr double kAc4RelRms = 1e-4;
constexpr double kAc5TailFraction = 0.20;
constexpr double kAc7Sigmas = 3.0;
constexpr double kAc8Nominal = 0.68;
constexpr double kAc8Band = 0.15;
constexpr double kAc9Seconds = 600.0;
constexpr double kAc9Relative = 1e-10;

unsigned hardware_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

/// G_true(tau) = (1 + (tau - 1) / 10)^-0.4, tau = 1..200.
std::vector<double> true_propagator() {
    std::vector<double> g{0.0};
    for (std::size_t l = 1; l <= 200; ++l) g.push_back(std::pow(1.0 + static_cast<double>(l - 1) / 10.0, -0.4));
    return g;
}

/// Focal actor F and the rest of the market M sharing G_true. The market's
/// reaction to a focal trade is positive at lags 1..2 and negative afterwards;
/// the focal actor ignores market trades.
SynthConfig market(double p_focal, std::size_t length, std::size_t sessions, std::uint64_t seed, bool focal_herding) {
    SynthConfig c;
    c.symbol = "ACC";
    c.tags = {"F", "M"};
    c.probabilities = {p_focal, 1.0 - p_focal};
    c.kernels.assign(4, {});
    auto& ff = c.kernels[0];
    auto& fm = c.kernels[1];
    auto& mm = c.kernels[3];
    ff = {0.0};
    fm = {0.0, 0.1, 0.05};
    mm = {0.0};
    for (std::size_t l = 1; l <= 50; ++l) {
        const double x = static_cast<double>(l);
        ff.push_back(focal_herding ? 0.02 * std::pow(x, -0.5) : 0.0);
        mm.push_back(0.1 * std::pow(x, -0.8));
        if (l >= 3) fm.push_back(-0.006 * std::pow(x / 3.0, -0.5));
    }
    c.propagators = {true_propagator(), true_propagator()};
    c.price_noise = 0.2;
    c.length = length;
    c.sessions = sessions;
    c.seed = seed;
    return c;
}

StatisticsOptions raw_options() {
    StatisticsOptions o;
    o.normalization = Normalization::raw;
    o.workers = hardware_workers();
    return o;
}

// ---------------------------------------------------------------------------
// AC1, AC2, AC5: one large synthetic market
// ---------------------------------------------------------------------------

struct LargeRun {
    SynthConfig config;
    double clipped = 0.0;
    double generate_s = 0.0, stats_s = 0.0, solve_g_s = 0.0, solve_k_s = 0.0;
    PropagatorSet G;
    FlowKernelSet K;
};

LargeRun large_run() {
    LargeRun r;
    r.config = market(0.05, 10'000'000, 10, 20260101, true);
    auto t = std::chrono::steady_clock::now();
    const auto flow = generate_flow(r.config);
    r.clipped = flow.clipped_fraction;
    const auto tape = generate_prices(flow.flow, r.config);
    r.generate_s = seconds_since(t);
    t = std::chrono::steady_clock::now();
    const auto stats = compute_flow_statistics(tape, r.config.tag_set(), 200, raw_options());
    r.stats_s = seconds_since(t);
    t = std::chrono::steady_clock::now();
    r.G = solve_propagators(assemble_system(stats, 200));
    r.solve_g_s = seconds_since(t);
    t = std::chrono::steady_clock::now();
    r.K = solve_flow_kernels(stats.correlations, stats.probabilities, 50);
    r.solve_k_s = seconds_since(t);
    return r;
}

Outcome ac1(const LargeRun& r) {
    const auto truth = true_propagator();
    const double eF = relative_rms(r.G.of("F").values, truth, {1, 100});
    const double eM = relative_rms(r.G.of("M").values, truth, {1, 100});
    const double secs = r.generate_s + r.stats_s + r.solve_g_s;
    return {eF <= kAc1RelRms && eM <= kAc1RelRms && secs <= kAc1Seconds,
            fmt("rel RMS lags 1..100: F %.4f, M %.4f (tol %.2f); clipped %.4f%% of steps; %.1f s (limit %.0f s)", eF,
                eM, kAc1RelRms, 100.0 * r.clipped, secs, kAc1Seconds)};
}

Outcome ac2(const LargeRun& r) {
    bool pass = true;
    std::string detail;
    const TagSet& tags = r.K.tags;
    for (std::size_t a = 0; a < 2; ++a)
        for (std::size_t b = 0; b < 2; ++b) {
            const auto truth = r.config.kernel(a, b);
            const auto& k = r.K.at(a, b).values;
            const auto& se = r.K.std_error(a, b);
            double num = 0.0, den = 0.0;
            std::size_t used = 0;
            for (std::size_t l = 1; l <= 50; ++l) {
                if (!(std::fabs(truth[l]) > 2.0 * se[l])) continue;
                num += (k[l] - truth[l]) * (k[l] - truth[l]);
                den += truth[l] * truth[l];
                ++used;
            }
            const std::string name = tags.name(a) + "->" + tags.name(b);
            if (used == 0) {
                detail += fmt("%s: no lags above 2 s.e.; ", name.c_str());
                continue;
            }
            const double e = std::sqrt(num / den);
            pass = pass && e <= kAc2RelRms;
            detail += fmt("%s %.4f over %zu lags; ", name.c_str(), e, used);
        }
    const double secs = r.generate_s + r.stats_s + r.solve_k_s;
    pass = pass && secs <= kAc2Seconds;
    return {pass, detail + fmt("(tol %.2f); %.1f s (limit %.0f s)", kAc2RelRms, secs, kAc2Seconds)};
}

/// Lags are counted from the first mid after the trade (G(1) is the immediate
/// impact), so "lags <= 2" of the immediate-impact-at-zero convention are 1..3
/// here. At lag 1 no induced trade can have happened and G* = G exactly.
Outcome ac5(const LargeRun& r) {
    set_notice_sink([](const std::string&) {});
    const auto d = dressed_propagator_full(r.G, r.K, "F", 1.0);
    set_notice_sink(nullptr);
    bool pass = true;
    std::string detail;
    for (std::size_t a = 0; a < 2; ++a) {
        const auto& g = r.G.propagators[a].values;
        const auto& gs = d[a].values.values;
        const bool first_equal = gs[1] == g[1];
        const bool enhanced = gs[2] > g[2] && gs[3] > g[3];
        double peak = 0.0;
        for (std::size_t t = 1; t <= 200; ++t) peak = std::max(peak, std::fabs(gs[t] - g[t]));
        const double tail = std::fabs(gs[200] - g[200]) / peak;
        pass = pass && first_equal && enhanced && tail <= kAc5TailFraction;
        detail += fmt("%s: G*-G at lags 1..3 = %.2e, %.4f, %.4f; |G*-G|(200)/peak = %.3f; ", d[a].tag.c_str(),
                      gs[1] - g[1], gs[2] - g[2], gs[3] - g[3], tail);
    }
    return {pass, detail + fmt("(tail tol %.2f)", kAc5TailFraction)};
}

// ---------------------------------------------------------------------------
// AC3, AC4, AC6
// ---------------------------------------------------------------------------

Outcome ac3() {
    // Measured response of a real tape, exactly white correlations.
    SynthConfig c;
    c.tags = {"A"};
    c.probabilities = {1.0};
    c.propagators = {true_propagator()};
    c.price_noise = 0.3;
    c.length = 1'000'000;
    c.seed = 3;
    const auto tape = generate_tape(c);
    const std::size_t L = 300;
    auto stats = compute_flow_statistics(tape, c.tag_set(), L, raw_options());
    auto& C = stats.correlations.at(0, 0);
    C.values.assign(L + 1, 0.0);
    C.values[0] = 1.0;
    const auto G = solve_propagators(assemble_system(stats, L));
    double worst = 0.0;
    for (std::size_t t = 1; t <= L; ++t) {
        const double R = stats.responses[0].values[t];
        worst = std::max(worst, std::fabs(G.propagators[0].values[t] - R) / std::fabs(R));
    }
    const bool zero = G.propagators[0].values[0] == 0.0 && stats.responses[0].values[0] == 0.0;
    return {zero && worst <= kAc3Relative,
            fmt("max relative |G-R| over lags 1..%zu: %.2e (tol %.0e); lag 0 both zero: %s", L, worst, kAc3Relative,
                zero ? "yes" : "no")};
}

Outcome ac4() {
    const std::size_t L = 8;
    auto c = market(0.2, 100'000, 1, 44, true);
    const auto tape = generate_tape(c);
    const auto stats = compute_flow_statistics(tape, c.tag_set(), L, raw_options());
    const auto G = solve_propagators(assemble_system(stats, L));
    const auto K = solve_flow_kernels(stats.correlations, stats.probabilities, L);
    const auto flow = oracle::from_tape(tape, c.tags);
    const auto G_ols = oracle::ols_propagators(flow, 2, L);
    const auto K_ols = oracle::ols_kernels(flow, 2, L);
    double worst_g = 0.0, worst_k = 0.0;
    for (std::size_t a = 0; a < 2; ++a) worst_g = std::max(worst_g, oracle::rel_rms(G.propagators[a].values, G_ols[a], 1, L));
    // Stacked over the four pairs: K_{M,F} is zero in truth, so its own
    // relative error has no scale.
    double num = 0.0, den = 0.0;
    for (std::size_t p = 0; p < 4; ++p)
        for (std::size_t l = 1; l <= L; ++l) {
            num += std::pow(K.kernels[p].values[l] - K_ols[p][l], 2);
            den += std::pow(K_ols[p][l], 2);
        }
    worst_k = std::sqrt(num / den);
    return {worst_g <= kAc4RelRms && worst_k <= kAc4RelRms,
            fmt("L = L_K = %zu, N = 1e5: rel RMS worst tag G %.2e, stacked K %.2e (tol %.0e)", L, worst_g, worst_k, kAc4RelRms)};
}

Outcome ac6(const LargeRun& r) {
    // Identical bare propagators, ground-truth kernels (K_{M,F} = 0) with the
    // calibrated standard errors.
    PropagatorSet G = r.G;
    G.propagators[0] = G.propagators[1] = LagSeries(200);
    const auto truth = true_propagator();
    for (std::size_t t = 0; t <= 200; ++t) G.propagators[0].values[t] = G.propagators[1].values[t] = truth[t];
    FlowKernelSet K = r.K;
    for (std::size_t a = 0; a < 2; ++a)
        for (std::size_t b = 0; b < 2; ++b) K.kernels[K.tags.pair_index(a, b)].values = r.config.kernel(a, b);
    bool neglected_notice = false;
    set_notice_sink([&](const std::string& m) { neglected_notice = neglected_notice || m.find("treating it as zero") != std::string::npos; });
    const auto d = dressed_propagator_full(G, K, "F", 1.0);
    set_notice_sink(nullptr);
    double worst = 0.0;
    for (std::size_t t = 0; t <= 200; ++t)
        worst = std::max(worst, std::fabs(d[0].values.values[t] - d[1].values.values[t]));
    // Calibrated inputs (statistical noise) for reference.
    set_notice_sink([](const std::string&) {});
    const auto dc = dressed_propagator_full(with_shared_propagator(r.G, "M", "F"), r.K, "F", 1.0);
    set_notice_sink(nullptr);
    double cal = 0.0;
    for (std::size_t t = 1; t <= 200; ++t) cal = std::max(cal, std::fabs(dc[0].values.values[t] - dc[1].values.values[t]));
    return {neglected_notice && worst == 0.0,
            fmt("max |G*_F - G*_M| = %.1e with identical G (must be 0); K_{M,F} negligible notice: %s; "
                "calibrated kernels, shared G: %.2e (%s)",
                worst, neglected_notice ? "yes" : "no", cal,
                dc[0].focal_reaction_neglected ? "K_{M,F} neglected" : "K_{M,F} kept")};
}

// ---------------------------------------------------------------------------
// AC7: information drift and the reconstructed response
// ---------------------------------------------------------------------------

Outcome ac7() {
    constexpr double s_true = 1e-3;
    const std::size_t L = 1000, tapes = 20;
    const LagWindow window = default_slope_window(L);
    std::vector<FlowStatistics> per_tape;
    std::vector<double> slopes;
    std::vector<LagSeries> gaps;
    auto analyse = [&](const FlowStatistics& s, double& slope, LagSeries& gap) {
        const auto G = with_shared_propagator(solve_propagators(assemble_system(s, L)), "M", "F");
        const auto base = reconstruct_response(G, s.correlations, s.probabilities, "F", 0.0);
        slope = fit_information_slope(s.response("F"), base, window);
        const auto fitted = reconstruct_response(G, s.correlations, s.probabilities, "F", slope);
        gap = LagSeries(L);
        for (std::size_t t = 1; t <= L; ++t) {
            gap.values[t] = s.response("F").values[t] - fitted.values[t];
            gap.counts[t] = 1;
        }
    };
    for (std::size_t k = 0; k < tapes; ++k) {
        // Sessions of 50000 trades keep edge effects at L = 1000 small. The
        // drift stops after L lags, so G_F = G + s * tau is representable and
        // the drift velocity does not random-walk over the whole session.
        auto c = market(0.2, 1'000'000, 20, 7000 + k, false);
        c.initial_price = 1e5;
        c.drift = InformationDrift{"F", s_true, L};
        per_tape.push_back(compute_flow_statistics(generate_tape(c), c.tag_set(), L, raw_options()));
        double s;
        LagSeries g;
        analyse(per_tape.back(), s, g);
        slopes.push_back(s);
        gaps.push_back(g);
    }
    const auto pooled = pool_statistics(per_tape, PoolMode::equal);
    double s_hat;
    LagSeries gap;
    analyse(pooled, s_hat, gap);

    double mean = 0.0, var = 0.0;
    for (double s : slopes) mean += s / tapes;
    for (double s : slopes) var += (s - mean) * (s - mean) / (tapes - 1);
    const double se_s = std::sqrt(var / tapes);
    const auto se_gap = standard_error_across(gaps);
    std::size_t outside = 0;
    double worst = 0.0;
    for (std::size_t t = 1; t <= 500; ++t) {
        const double z = std::fabs(gap.values[t]) / se_gap.values[t];
        worst = std::max(worst, z);
        outside += z > kAc7Sigmas;
    }
    const double z_s = std::fabs(s_hat - s_true) / se_s;
    return {z_s <= kAc7Sigmas && outside == 0,
            fmt("s_hat = %.6f (true %.0e, s.e. %.2e, %.2f s.e.; window %zu..%zu); R - R_hat: worst %.2f s.e. over "
                "lags 1..500, %zu lags beyond %.0f s.e.",
                s_hat, s_true, se_s, z_s, window.first, window.last, worst, outside, kAc7Sigmas)};
}

// ---------------------------------------------------------------------------
// AC8: bootstrap coverage
// ---------------------------------------------------------------------------

Outcome ac8() {
    // L = 200 covers the support of G_true; a shorter solve is biased at its
    // tail because G is held constant beyond L. Coverage is scored on 1..100.
    const std::size_t symbols = 20, L = 200, scored = 100, seeds = 10;
    const auto truth = true_propagator();
    double total = 0.0;
    std::string per_seed;
    for (std::size_t m = 0; m < seeds; ++m) {
        std::vector<FlowStatistics> stats;
        for (std::size_t k = 0; k < symbols; ++k) {
            auto c = market(0.05, 500'000, 1, 100000 * (m + 1) + k, true);
            stats.push_back(compute_flow_statistics(generate_tape(c), c.tag_set(), L, raw_options()));
        }
        const BootstrapPipeline pipeline = [&](std::span<const std::size_t> idx) {
            std::vector<const FlowStatistics*> chosen;
            for (auto i : idx) chosen.push_back(&stats[i]);
            const auto pooled = pool_statistics(std::span<const FlowStatistics* const>(chosen), PoolMode::equal);
            const auto G = solve_propagators(assemble_system(pooled, L));
            std::vector<double> out;
            for (const auto& g : G.propagators) out.insert(out.end(), g.values.begin() + 1, g.values.end());
            return out;
        };
        BootstrapOptions opt;
        opt.replicas = 200;
        opt.seed = 1000 * m;  // replica streams seed + r never overlap between master seeds
        opt.workers = hardware_workers();
        const auto bands = bootstrap_bands(symbols, pipeline, opt);
        std::size_t inside = 0;
        for (std::size_t a = 0; a < 2; ++a)
            for (std::size_t t = 1; t <= scored; ++t) {
                const std::size_t i = a * L + (t - 1);
                inside += bands.lower[i] <= truth[t] && truth[t] <= bands.upper[i];
            }
        const double frac = static_cast<double>(inside) / (2.0 * scored);
        total += frac / seeds;
        per_seed += fmt("%.2f ", frac);
    }
    return {std::fabs(total - kAc8Nominal) <= kAc8Band,
            fmt("mean coverage of G_true (both tags, lags 1..100) = %.3f, nominal %.2f +- %.2f; per seed: %s", total,
                kAc8Nominal, kAc8Band, per_seed.c_str())};
}

// ---------------------------------------------------------------------------
// AC9: correlation throughput and fft/direct agreement
// ---------------------------------------------------------------------------

TaggedFlow random_flow(std::size_t n, std::size_t sessions, std::uint64_t seed) {
    TaggedFlow f;
    f.tag_names = {"F", "M"};
    f.tags.resize(n);
    f.signs.resize(n);
    std::mt19937_64 rng(seed);
    std::uint64_t bits = 0;
    for (std::size_t t = 0; t < n; ++t) {
        if (t % 21 == 0) bits = rng();  // 3 bits per trade
        f.tags[t] = (bits & 3u) == 0 ? 0 : 1;  // P(F) = 1/4
        f.signs[t] = (bits & 4u) ? 1 : -1;
        bits >>= 3;
    }
    f.session_offsets.clear();
    for (std::size_t s = 0; s <= sessions; ++s) f.session_offsets.push_back(n * s / sessions);
    return f;
}

Outcome ac9() {
    const unsigned workers = hardware_workers();
    const auto big = random_flow(100'000'000, 100, 9);
    auto t = std::chrono::steady_clock::now();
    const auto C = sign_correlation(big, "F", "M", 1000, CorrelationMethod::fft, workers);
    const double secs = seconds_since(t);
    const bool finite = std::all_of(C.values.begin(), C.values.end(), [](double v) { return std::isfinite(v); });

    auto c = market(0.2, 1'000'000, 4, 99, true);
    const auto flow = generate_flow(c).flow;
    double worst = 0.0;
    for (const auto& [a, b] : std::vector<std::pair<const char*, const char*>>{{"F", "F"}, {"F", "M"}, {"M", "F"}, {"M", "M"}}) {
        const auto fast = sign_correlation(flow, a, b, 1000, CorrelationMethod::fft, workers);
        const auto slow = sign_correlation(flow, a, b, 1000, CorrelationMethod::direct, workers);
        double num = 0.0, den = 0.0;
        for (std::size_t k = 0; k <= 1000; ++k) {
            num += std::pow(fast.values[k] - slow.values[k], 2);
            den += slow.values[k] * slow.values[k];
        }
        worst = std::max(worst, std::sqrt(num / den));
    }
    return {finite && secs <= kAc9Seconds && worst <= kAc9Relative,
            fmt("1e8 trades, 100 sessions, L = 1000: %.1f s on %u worker(s) (limit %.0f s); fft vs direct on 1e6 "
                "trades: rel RMS %.1e (tol %.0e)",
                secs, workers, kAc9Seconds, worst, kAc9Relative)};
}

// ---------------------------------------------------------------------------
// AC10: CLI determinism
// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome ac10() {
    const fs::path root = fs::temp_directory_path() / "propcal_acceptance_ac10";
    fs::remove_all(root);
    fs::create_directories(root);
    auto c = market(0.1, 300'000, 6, 5, true);
    std::ofstream(root / "market.json") << synth_config_json(c);
    std::ostringstream sink;
    auto run = [&](std::vector<std::string> args) { return cli::run(args, sink, sink); };
    if (run({"simulate", "--config", (root / "market.json").string(), "--symbols", "4", "--out", (root / "sim").string()}) != 0)
        return {false, "simulate failed: " + sink.str()};
    std::vector<std::string> inputs;
    for (int k = 0; k < 4; ++k) inputs.push_back((root / "sim" / fmt("tape_ACC%03d.csv", k)).string());

    std::vector<std::string> runs;
    for (const auto& [name, workers] : std::vector<std::pair<std::string, std::string>>{{"a", "1"}, {"b", "1"}, {"c", "4"}}) {
        std::vector<std::string> args{"pipeline", "--input"};
        args.insert(args.end(), inputs.begin(), inputs.end());
        for (std::string s : {"--focal-tag", "F", "--max-lag", "200", "--kernel-lag", "50", "--seed", "17", "--workers"})
            args.push_back(s);
        args.push_back(workers);
        args.push_back("--out");
        args.push_back((root / name).string());
        if (run(args) != 0) return {false, "pipeline failed: " + sink.str()};
        runs.push_back(name);
    }
    std::size_t files = 0, mismatches = 0;
    for (const auto& e : fs::directory_iterator(root / "a")) {
        const auto name = e.path().filename();
        const auto a = slurp(e.path());
        if (name == "manifest.json") {
            auto strip = [](const std::string& text) {
                auto m = nlohmann::json::parse(text);
                for (const char* k : {"started_at", "timings", "argv"}) m.erase(k);
                m["config"].erase("out");
                m["config"].erase("workers");
                return m;
            };
            for (const char* other : {"b", "c"}) mismatches += strip(a) != strip(slurp(root / other / name));
            continue;
        }
        ++files;
        for (const char* other : {"b", "c"}) mismatches += a != slurp(root / other / name);
    }
    std::size_t count_b = 0, count_c = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(root / "b")) ++count_b;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(root / "c")) ++count_c;
    fs::remove_all(root);
    const bool same_sets = count_b == files + 1 && count_c == files + 1;
    return {mismatches == 0 && same_sets && files > 0,
            fmt("%zu artifacts compared across 2 reruns and workers 1 vs 4: %zu mismatches (manifest compared without "
                "timestamps, timings, argv, out and workers)",
                files, mismatches)};
}

}  // namespace

int main() {
    std::vector<std::pair<std::string, std::function<Outcome()>>> checks;
    LargeRun large;
    bool have_large = false;
    auto with_large = [&](Outcome (*fn)(const LargeRun&)) {
        return [&, fn] {
            if (!have_large) {
                large = large_run();
                have_large = true;
            }
            return fn(large);
        };
    };
    checks.emplace_back("AC1  round-trip propagator recovery", with_large(ac1));
    checks.emplace_back("AC2  round-trip kernel recovery", with_large(ac2));
    checks.emplace_back("AC3  degenerate identity", ac3);
    checks.emplace_back("AC4  brute-force oracle equivalence", ac4);
    checks.emplace_back("AC5  dressed-impact shape", with_large(ac5));
    checks.emplace_back("AC6  symmetry of dressed impact", with_large(ac6));
    checks.emplace_back("AC7  reconstructed response with drift", ac7);
    checks.emplace_back("AC8  bootstrap coverage", ac8);
    checks.emplace_back("AC9  correlation performance", ac9);
    checks.emplace_back("AC10 determinism", ac10);

    int failed = 0;
    for (const auto& [name, fn] : checks) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failed, checks.size());
    return failed == 0 ? 0 : 1;
}
