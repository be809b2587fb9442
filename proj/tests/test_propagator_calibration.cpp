#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "propcal/flow_statistics.hpp"
#include "propcal/propagator_calibration.hpp"

using namespace propcal;

namespace {

/// White single-tag statistics with an arbitrary response.
FlowStatistics white_single_tag(std::size_t L) {
    FlowStatistics s;
    s.probabilities = {TagSet({"A"}), {1.0}, {1000}};
    s.correlations = CorrelationSet(TagSet({"A"}), L);
    auto& c = s.correlations.at(0, 0);
    c.values[0] = 1.0;
    for (auto& n : c.counts) n = 1000;
    LagSeries R(L);
    for (std::size_t tau = 1; tau <= L; ++tau) {
        R.values[tau] = 0.3 * std::log1p(static_cast<double>(tau)) + 0.01 * std::sin(static_cast<double>(tau));
        R.counts[tau] = 1000;
    }
    s.responses = {R};
    s.max_lag = L;
    return s;
}

/// Two tags, arbitrary but non-degenerate correlations.
FlowStatistics two_tag_stats(std::size_t L, bool cross) {
    FlowStatistics s;
    const TagSet tags({"F", "M"});
    s.probabilities = {tags, {0.3, 0.7}, {300, 700}};
    s.correlations = CorrelationSet(tags, L);
    for (std::size_t a = 0; a < 2; ++a)
        for (std::size_t b = 0; b < 2; ++b) {
            auto& c = s.correlations.at(a, b);
            for (std::size_t k = 0; k <= L; ++k) {
                c.counts[k] = 1000;
                if (k == 0)
                    c.values[0] = a == b ? 1.0 / s.probabilities.p[a] : 0.0;
                else if (a == b)
                    c.values[k] = 0.6 * std::pow(static_cast<double>(k), -0.7) / s.probabilities.p[a];
                else if (cross)
                    c.values[k] = (a == 0 ? 0.2 : -0.1) * std::pow(static_cast<double>(k), -0.5);
            }
        }
    for (std::size_t a = 0; a < 2; ++a) {
        LagSeries R(L);
        for (std::size_t tau = 1; tau <= L; ++tau) {
            R.values[tau] = (a + 1.0) * (1.0 - std::exp(-0.3 * static_cast<double>(tau)));
            R.counts[tau] = 1000;
        }
        s.responses.push_back(R);
    }
    s.max_lag = L;
    return s;
}

/// Right side of the calibration relation evaluated literally for given G (lags 0..L).
double relation_rhs(const FlowStatistics& s, const std::vector<std::vector<double>>& G, std::size_t a, std::size_t tau) {
    const std::size_t L = G[0].size() - 1;
    auto g = [&](std::size_t b, std::size_t k) { return G[b][std::min(k, L)]; };
    double total = 0.0;
    for (std::size_t b = 0; b < G.size(); ++b)
        for (std::size_t k = 0; k < 3 * L; ++k) {  // increments vanish beyond L
            const auto lag = static_cast<std::ptrdiff_t>(tau) - 1 - static_cast<std::ptrdiff_t>(k);
            if (std::abs(lag) > static_cast<std::ptrdiff_t>(s.correlations.max_lag())) continue;
            total += s.probabilities.p[b] * (g(b, k + 1) - g(b, k)) * s.correlations.value(a, b, lag);
        }
    return total;
}

}  // namespace

TEST_CASE("single tag, white flow: G equals R to machine precision") {
    const auto s = white_single_tag(50);
    const auto sys = assemble_system(s, 50);
    const auto G = solve_propagators(sys);
    for (std::size_t tau = 0; tau <= 50; ++tau)
        CHECK(std::fabs(G.propagators[0].values[tau] - s.responses[0].values[tau]) <=
              1e-12 * std::fabs(s.responses[0].values[tau]) + 1e-15);
    CHECK(G.residual_norm < 1e-14);
    const auto back = reconstruct_response(G, s.correlations, s.probabilities, "A", 0.0);
    for (std::size_t tau = 0; tau <= 50; ++tau)
        CHECK(back.values[tau] == doctest::Approx(s.responses[0].values[tau]).epsilon(1e-12));
}

TEST_CASE("two tags without cross correlation give a block-diagonal system") {
    const auto s = two_tag_stats(10, false);
    const auto sys = assemble_system(s, 10);
    for (Eigen::Index i = 0; i < 10; ++i)
        for (Eigen::Index j = 10; j < 20; ++j) {
            CHECK(sys.matrix(i, j) == 0.0);
            CHECK(sys.matrix(j, i) == 0.0);
        }
}

TEST_CASE("L = 4 system entries match the expanded double sum") {
    const std::size_t L = 4;
    const auto s = two_tag_stats(L, true);
    const auto sys = assemble_system(s, L);
    for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t j = 1; j <= L; ++j) {
            std::vector<std::vector<double>> unit(2, std::vector<double>(L + 1, 0.0));
            unit[b][j] = 1.0;
            for (std::size_t a = 0; a < 2; ++a)
                for (std::size_t tau = 1; tau <= L; ++tau)
                    CHECK(sys.matrix(static_cast<Eigen::Index>(sys.index(a, tau)), static_cast<Eigen::Index>(sys.index(b, j))) ==
                          doctest::Approx(relation_rhs(s, unit, a, tau)).epsilon(1e-14));
        }
    // Three entries written out by hand.
    const auto& C = s.correlations;
    const double PF = 0.3, PM = 0.7;
    CHECK(sys.matrix(0, 0) == doctest::Approx(PF * (C.at(0, 0).values[0] - C.at(0, 0).values[1])));
    // (F, tau=1) against G_M(2): k=1 contributes +C_FM(-1), k=2 contributes -C_FM(-2).
    CHECK(sys.matrix(0, 5) == doctest::Approx(PM * (C.at(1, 0).values[1] - C.at(1, 0).values[2])));
    // (M, tau=4) against G_F(4): boundary column, only k=3 contributes C_MF(0) = 0.
    CHECK(sys.matrix(7, 3) == 0.0);
    CHECK(sys.rhs(1) == doctest::Approx(s.responses[0].values[2] - s.responses[0].values[1]));
}

TEST_CASE("solve: linearity, residual and reconstruction") {
    const auto s = two_tag_stats(30, true);
    const auto G = solve_propagators(assemble_system(s, 30));
    REQUIRE(G.condition_estimate < 1e6);
    CHECK(G.residual_norm <= 1e-8);
    CHECK(G.tail_start == 16);

    auto scaled = s;
    for (auto& r : scaled.responses)
        for (auto& v : r.values) v *= 3.5;
    const auto G2 = solve_propagators(assemble_system(scaled, 30));
    for (std::size_t a = 0; a < 2; ++a)
        for (std::size_t tau = 1; tau <= 30; ++tau)
            CHECK(G2.propagators[a].values[tau] == doctest::Approx(3.5 * G.propagators[a].values[tau]).epsilon(1e-10));

    for (std::size_t a = 0; a < 2; ++a) {
        const auto back = reconstruct_response(G, s.correlations, s.probabilities, s.tags().name(a), 0.0);
        for (std::size_t tau = 1; tau <= 30; ++tau)
            CHECK(back.values[tau] == doctest::Approx(s.responses[a].values[tau]).epsilon(1e-10));
    }
}

TEST_CASE("ridge weights and singular systems") {
    auto s = white_single_tag(5);
    auto& c = s.correlations.at(0, 0);
    for (auto& v : c.values) v = 1.0;  // perfectly persistent flow: every increment column vanishes
    CHECK_THROWS_AS(solve_propagators(assemble_system(s, 5)), NumericalError);
    const auto G = solve_propagators(assemble_system(s, 5), 1e-3);
    for (double v : G.propagators[0].values) CHECK(std::isfinite(v));
    CHECK(G.ridge == 1e-3);
    CHECK_THROWS_AS(solve_propagators(assemble_system(s, 5), -1.0), ValidationError);
}

TEST_CASE("assemble_system input validation") {
    auto s = two_tag_stats(5, true);
    CHECK_THROWS_AS(assemble_system(s, 6), ValidationError);
    auto bad = s;
    bad.responses[1].values[3] = NAN;
    CHECK_THROWS_AS(assemble_system(bad, 5), ValidationError);
    auto missing = s;
    missing.responses.pop_back();
    CHECK_THROWS_AS(assemble_system(missing, 5), ValidationError);
    auto empty = s;
    empty.correlations.at(0, 1).counts[4] = 0;
    CHECK_THROWS_AS(assemble_system(empty, 5), ValidationError);
}

TEST_CASE("correlation-based solve matches direct least squares on the tape") {
    const auto config = fixtures::two_tag_market(100000, 1, 31);
    const auto tape = generate_tape(config);
    const TagSet tags({"F", "M"});
    const std::size_t L = 8;
    StatisticsOptions opt;
    opt.normalization = Normalization::raw;
    const auto stats = compute_flow_statistics(tape, tags, L, opt);
    const auto G = solve_propagators(assemble_system(stats, L));
    const auto ref = oracle::ols_propagators(oracle::from_tape(tape, {"F", "M"}), 2, L);
    for (std::size_t a = 0; a < 2; ++a) {
        const double err = oracle::rel_rms(G.propagators[a].values, ref[a], 1, L);
        MESSAGE("tag " << a << " relative RMS vs OLS: " << err);
        CHECK(err <= 1e-4);
    }
}

TEST_CASE("reconstruct_response with a pure drift") {
    auto s = two_tag_stats(20, true);
    PropagatorSet G;
    G.tags = s.tags();
    G.max_lag = 20;
    G.propagators = {LagSeries(20), LagSeries(20)};
    const auto R = reconstruct_response(G, s.correlations, s.probabilities, "F", 0.004);
    for (std::size_t tau = 0; tau <= 20; ++tau) CHECK(R.values[tau] == doctest::Approx(0.004 * tau));
    const auto shared = with_shared_propagator(solve_propagators(assemble_system(s, 20)), "M", "F");
    CHECK(shared.propagators[0] == shared.propagators[1]);
}

TEST_CASE("fit_information_slope") {
    LagSeries base(100), obs(100);
    for (std::size_t tau = 0; tau <= 100; ++tau) base.values[tau] = std::sqrt(static_cast<double>(tau));
    obs = base;
    CHECK(fit_information_slope(obs, base, {1, 100}) == 0.0);
    for (std::size_t tau = 0; tau <= 100; ++tau) obs.values[tau] += 0.002 * static_cast<double>(tau);
    CHECK(fit_information_slope(obs, base, {1, 100}) == doctest::Approx(0.002).epsilon(1e-12));
    CHECK_THROWS_AS(fit_information_slope(obs, base, {10, 5}), ValidationError);
    CHECK_THROWS_AS(fit_information_slope(obs, base, {1, 101}), ValidationError);

    // Noisy residual: s_hat - s has standard error sigma / sqrt(sum tau^2).
    std::mt19937_64 rng(4);
    std::normal_distribution<double> noise(0.0, 0.05);
    LagSeries big_base(500), big_obs(500);
    double den = 0.0;
    for (std::size_t tau = 1; tau <= 500; ++tau) {
        big_obs.values[tau] = 0.001 * static_cast<double>(tau) + noise(rng);
        den += static_cast<double>(tau * tau);
    }
    const double s_hat = fit_information_slope(big_obs, big_base, {1, 500});
    CHECK(std::fabs(s_hat - 0.001) < 3.0 * 0.05 / std::sqrt(den));
}

TEST_CASE("default slope window") {
    CHECK(default_slope_window(1000).first == 50);
    CHECK(default_slope_window(1000).last == 500);
    CHECK(default_slope_window(8).first == 2);
    CHECK(default_slope_window(8).last == 4);
    CHECK(default_slope_window(1).first == 1);
    CHECK(default_slope_window(1).last == 1);
}
