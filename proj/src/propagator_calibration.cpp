#include "propcal/propagator_calibration.hpp"

#include <cmath>

namespace propcal {

namespace {

void require_finite(const LagSeries& s, std::size_t max_lag, const std::string& what) {
    for (std::size_t k = 0; k <= max_lag; ++k)
        if (!std::isfinite(s.values[k])) throw ValidationError(what + " is not finite at lag " + std::to_string(k));
}

void require_samples(const LagSeries& s, std::size_t max_lag, const std::string& what) {
    for (std::size_t k = 1; k <= max_lag; ++k)
        if (s.counts[k] <= 0)
            throw ValidationError(what + " has no samples at lag " + std::to_string(k) +
                                  "; reduce the max lag or supply longer sessions");
}

}  // namespace

CalibrationSystem assemble_system(std::span<const LagSeries> responses, const CorrelationSet& correlations,
                                  const TagProbabilities& probabilities, std::size_t max_lag) {
    const TagSet& tags = probabilities.tags;
    const std::size_t T = tags.size();
    const std::size_t L = max_lag;
    if (L < 1) throw ValidationError("max lag must be at least 1");
    if (!(correlations.tags() == tags)) throw ValidationError("correlation and probability tag sets differ");
    if (responses.size() != T) throw ValidationError("need one response series per tag");
    if (correlations.max_lag() < L) throw ValidationError("correlations are shorter than the calibration lag");
    for (std::size_t a = 0; a < T; ++a) {
        if (!(probabilities.p[a] > 0.0)) throw ValidationError("tag '" + tags.name(a) + "' has no trades");
        if (responses[a].max_lag() < L) throw ValidationError("response of '" + tags.name(a) + "' is too short");
        require_finite(responses[a], L, "response of '" + tags.name(a) + "'");
        require_samples(responses[a], L, "response of '" + tags.name(a) + "'");
        for (std::size_t b = 0; b < T; ++b) {
            const std::string name = "correlation " + tags.name(a) + "," + tags.name(b);
            require_finite(correlations.at(a, b), L, name);
            require_samples(correlations.at(a, b), L, name);
        }
    }

    CalibrationSystem sys;
    sys.tags = tags;
    sys.max_lag = L;
    sys.matrix = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(T * L), static_cast<Eigen::Index>(T * L));
    sys.rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(T * L));
    for (std::size_t a = 0; a < T; ++a) {
        sys.response_counts.push_back(responses[a].counts);
        for (std::size_t tau = 1; tau <= L; ++tau) {
            const auto row = static_cast<Eigen::Index>(sys.index(a, tau));
            sys.rhs(row) = responses[a].values[tau] - responses[a].values[tau - 1];
            for (std::size_t b = 0; b < T; ++b) {
                const double pb = probabilities.p[b];
                for (std::size_t j = 1; j <= L; ++j) {
                    // G_b(j) enters through the increment k = j-1 (+) and, below the boundary, k = j (-).
                    const auto d = static_cast<std::ptrdiff_t>(tau) - static_cast<std::ptrdiff_t>(j);
                    double coef = correlations.value(a, b, d);
                    if (j < L) coef -= correlations.value(a, b, d - 1);
                    sys.matrix(row, static_cast<Eigen::Index>(sys.index(b, j))) = pb * coef;
                }
            }
        }
    }
    return sys;
}

CalibrationSystem assemble_system(const FlowStatistics& stats, std::size_t max_lag) {
    return assemble_system(stats.responses, stats.correlations, stats.probabilities, max_lag);
}

PropagatorSet solve_propagators(const CalibrationSystem& system, double ridge) {
    if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw ValidationError("ridge weight must be finite and >= 0");
    const auto& A = system.matrix;
    const auto& b = system.rhs;
    if (A.rows() == 0) throw ValidationError("empty calibration system");

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    const double rcond = lu.rcond();
    Eigen::VectorXd g;
    if (ridge == 0.0) {
        if (!(rcond > 1e-14))
            throw NumericalError("calibration system is numerically singular (reciprocal condition " +
                                 std::to_string(rcond) + "); retry with a ridge weight > 0");
        g = lu.solve(b);
    } else {
        Eigen::MatrixXd normal = A.transpose() * A;
        normal.diagonal().array() += ridge;
        g = normal.ldlt().solve(A.transpose() * b);
    }

    const Eigen::VectorXd r = A * g - b;
    const std::size_t T = system.tags.size();
    const std::size_t L = system.max_lag;
    PropagatorSet out;
    out.tags = system.tags;
    out.max_lag = L;
    out.ridge = ridge;
    out.condition_estimate = rcond > 0.0 ? 1.0 / rcond : INFINITY;
    const double bn = b.norm();
    out.residual_norm = bn > 0.0 ? r.norm() / bn : r.norm();
    out.tail_start = L / 2 + 1;
    for (std::size_t a = 0; a < T; ++a) {
        LagSeries G(L);
        std::vector<double> res(L + 1, 0.0);
        for (std::size_t tau = 1; tau <= L; ++tau) {
            const auto i = static_cast<Eigen::Index>(system.index(a, tau));
            G.values[tau] = g(i);
            res[tau] = r(i);
        }
        if (a < system.response_counts.size()) {
            const auto& c = system.response_counts[a];
            for (std::size_t tau = 0; tau <= L && tau < c.size(); ++tau) G.counts[tau] = c[tau];
        }
        for (std::size_t tau = 0; tau <= L; ++tau)
            if (!std::isfinite(G.values[tau])) throw NumericalError("solved propagator is not finite");
        out.propagators.push_back(std::move(G));
        out.residuals.push_back(std::move(res));
    }
    return out;
}

PropagatorSet with_shared_propagator(const PropagatorSet& set, std::string_view source, std::string_view target) {
    PropagatorSet out = set;
    out.propagators[set.tags.index(target)] = set.propagators[set.tags.index(source)];
    return out;
}

LagSeries reconstruct_response(const PropagatorSet& propagators, const CorrelationSet& correlations,
                               const TagProbabilities& probabilities, std::string_view tag, double slope) {
    const std::size_t L = propagators.max_lag;
    const TagSet& tags = propagators.tags;
    if (!(correlations.tags() == tags) || !(probabilities.tags == tags))
        throw ValidationError("reconstruct_response: tag sets differ");
    if (correlations.max_lag() < L) throw ValidationError("reconstruct_response: correlations shorter than G");
    for (const auto& G : propagators.propagators)
        if (G.max_lag() != L) throw ValidationError("reconstruct_response: propagator lag mismatch");
    const std::size_t a = tags.index(tag);

    LagSeries out(L);
    out.counts = correlations.at(a, a).counts;
    out.counts.resize(L + 1);
    double acc = 0.0;
    for (std::size_t tau = 1; tau <= L; ++tau) {
        double inc = 0.0;
        for (std::size_t b = 0; b < tags.size(); ++b) {
            const auto& G = propagators.propagators[b].values;
            double s = 0.0;
            for (std::size_t k = 0; k < L; ++k)
                s += (G[k + 1] - G[k]) *
                     correlations.value(a, b, static_cast<std::ptrdiff_t>(tau) - 1 - static_cast<std::ptrdiff_t>(k));
            inc += probabilities.p[b] * s;
        }
        acc += inc;
        out.values[tau] = acc;
    }
    for (std::size_t tau = 1; tau <= L; ++tau) out.values[tau] += slope * static_cast<double>(tau);
    return out;
}

double fit_information_slope(const LagSeries& observed, const LagSeries& base, LagWindow window) {
    if (window.empty() || (window.first == 0 && window.last == 0)) throw ValidationError("empty slope fit window");
    if (window.last > observed.max_lag() || window.last > base.max_lag())
        throw ValidationError("slope fit window exceeds the series");
    double num = 0.0, den = 0.0;
    for (std::size_t tau = window.first; tau <= window.last; ++tau) {
        const double x = static_cast<double>(tau);
        num += x * (observed.values[tau] - base.values[tau]);
        den += x * x;
    }
    if (den == 0.0) throw ValidationError("slope fit window contains only lag 0");
    return num / den;
}

LagWindow default_slope_window(std::size_t max_lag) {
    const std::size_t first = std::min<std::size_t>(50, std::max<std::size_t>(1, max_lag / 4));
    return {first, std::max(first, max_lag / 2)};
}

}  // namespace propcal
