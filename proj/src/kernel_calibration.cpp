#include "propcal/kernel_calibration.hpp"

#include <Eigen/Dense>

#include <cmath>

#include "propcal/log.hpp"

namespace propcal {

FlowKernelSet solve_flow_kernels(const CorrelationSet& correlations, const TagProbabilities& probabilities,
                                 std::size_t kernel_lag, double ridge) {
    const TagSet& tags = probabilities.tags;
    const std::size_t T = tags.size();
    const std::size_t L = kernel_lag;
    if (L < 1) throw ValidationError("kernel lag must be at least 1");
    if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw ValidationError("ridge weight must be finite and >= 0");
    if (!(correlations.tags() == tags)) throw ValidationError("correlation and probability tag sets differ");
    if (correlations.max_lag() < L)
        throw ValidationError("correlations (max lag " + std::to_string(correlations.max_lag()) +
                              ") are shorter than the kernel lag " + std::to_string(L));
    for (std::size_t a = 0; a < T; ++a) {
        if (!(probabilities.p[a] > 0.0)) throw ValidationError("tag '" + tags.name(a) + "' has no trades");
        for (std::size_t b = 0; b < T; ++b) {
            const auto& c = correlations.at(a, b);
            for (std::size_t k = 0; k <= L; ++k) {
                if (!std::isfinite(c.values[k]))
                    throw ValidationError("correlation " + tags.name(a) + "," + tags.name(b) + " is not finite");
                if (c.counts[k] <= 0)
                    throw ValidationError("correlation " + tags.name(a) + "," + tags.name(b) +
                                          " has no samples at lag " + std::to_string(k));
            }
        }
    }

    const auto n = static_cast<Eigen::Index>(T * L);
    auto idx = [L](std::size_t tag, std::size_t lag) { return static_cast<Eigen::Index>(tag * L + (lag - 1)); };
    Eigen::MatrixXd M(n, n);
    Eigen::MatrixXd rhs(n, static_cast<Eigen::Index>(T));
    for (std::size_t c = 0; c < T; ++c)
        for (std::size_t tau = 1; tau <= L; ++tau) {
            for (std::size_t b = 0; b < T; ++b)
                for (std::size_t l = 1; l <= L; ++l)
                    M(idx(c, tau), idx(b, l)) =
                        probabilities.p[b] *
                        correlations.value(c, b, static_cast<std::ptrdiff_t>(tau) - static_cast<std::ptrdiff_t>(l));
            for (std::size_t a = 0; a < T; ++a)
                rhs(idx(c, tau), static_cast<Eigen::Index>(a)) =
                    probabilities.p[a] * correlations.at(c, a).values[tau];
        }

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
    const double rcond = lu.rcond();
    const bool invertible = rcond > 1e-14;
    Eigen::MatrixXd K;
    if (ridge == 0.0) {
        if (!invertible)
            throw NumericalError("flow-kernel system is numerically singular (reciprocal condition " +
                                 std::to_string(rcond) + "); retry with a ridge weight > 0");
        K = lu.solve(rhs);
    } else {
        Eigen::MatrixXd normal = M.transpose() * M;
        normal.diagonal().array() += ridge;
        K = normal.ldlt().solve(M.transpose() * rhs);
    }

    FlowKernelSet out;
    out.tags = tags;
    out.max_lag = L;
    out.ridge = ridge;
    out.condition_estimate = rcond > 0.0 ? 1.0 / rcond : INFINITY;
    out.sample_count = correlations.at(0, 0).counts[0];
    const Eigen::MatrixXd resid = M * K - rhs;
    const double rn = rhs.norm();
    out.residual_norm = rn > 0.0 ? resid.norm() / rn : resid.norm();

    Eigen::VectorXd inv_diag = Eigen::VectorXd::Constant(n, NAN);
    if (invertible) inv_diag = lu.inverse().diagonal();

    out.kernels.assign(T * T, LagSeries(L));
    out.std_errors.assign(T * T, std::vector<double>(L + 1, 0.0));
    out.noise_variance.assign(T, 0.0);
    for (std::size_t a = 0; a < T; ++a) {
        double explained = 0.0;
        for (std::size_t b = 0; b < T; ++b)
            for (std::size_t l = 1; l <= L; ++l)
                explained += K(idx(b, l), static_cast<Eigen::Index>(a)) * probabilities.p[b] *
                             correlations.at(b, a).values[l];
        const double pa = probabilities.p[a];
        const double var = std::max(0.0, pa * (1.0 - explained));
        out.noise_variance[a] = var;
        for (std::size_t b = 0; b < T; ++b) {
            auto& series = out.kernels[tags.pair_index(b, a)];
            auto& se = out.std_errors[tags.pair_index(b, a)];
            const auto& cnt = correlations.at(b, a).counts;
            for (std::size_t l = 1; l <= L; ++l) {
                const double k = K(idx(b, l), static_cast<Eigen::Index>(a));
                if (!std::isfinite(k)) throw NumericalError("solved flow kernel is not finite");
                series.values[l] = k;
                series.counts[l] = cnt[l];
                se[l] = std::sqrt(var * std::max(0.0, inv_diag(idx(b, l))) / probabilities.p[b] /
                                  static_cast<double>(out.sample_count));
            }
        }
    }
    return out;
}

bool kernel_negligible(const FlowKernelSet& kernels, std::size_t from, std::size_t to, std::size_t lags, double z) {
    const auto& K = kernels.at(from, to);
    const auto& se = kernels.std_error(from, to);
    const std::size_t last = std::min(lags, kernels.max_lag);
    for (std::size_t l = 1; l <= last; ++l)
        if (!(std::fabs(K.values[l]) < z * se[l])) return false;
    return true;
}

std::string to_string(DressingPath p) { return p == DressingPath::full ? "full" : "simplified"; }

namespace {

double kernel_at(const LagSeries& k, std::size_t lag) { return lag <= k.max_lag() ? k.values[lag] : 0.0; }

void check_dressing_inputs(const LagSeries& bare, const LagSeries& kernel) {
    if (bare.values.empty()) throw ValidationError("dressing: empty propagator");
    if (kernel.values.empty()) throw ValidationError("dressing: empty kernel");
    for (double v : bare.values)
        if (!std::isfinite(v)) throw ValidationError("dressing: propagator is not finite");
    for (double v : kernel.values)
        if (!std::isfinite(v)) throw ValidationError("dressing: kernel is not finite");
}

}  // namespace

DressedPropagator dressed_propagator_simplified(const LagSeries& bare, const LagSeries& cross_kernel, double scale) {
    if (!(scale >= 0.0) || !std::isfinite(scale)) throw ValidationError("herding scale must be finite and >= 0");
    check_dressing_inputs(bare, cross_kernel);
    const std::size_t L = bare.max_lag();
    std::vector<double> k(L + 1, 0.0);
    for (std::size_t u = 1; u <= L; ++u) k[u] = scale * kernel_at(cross_kernel, u);

    DressedPropagator out;
    out.values = LagSeries(L);
    out.values.counts = bare.counts;
    out.provenance = DressingPath::simplified;
    out.herding_scale = scale;
    auto& g = out.values.values;
    for (std::size_t tau = 0; tau <= L; ++tau) {
        double acc = 0.0;
        for (std::size_t u = 1; u < tau; ++u) acc += k[u] * g[tau - u];
        g[tau] = bare.values[tau] + acc;
    }
    return out;
}

std::pair<LagSeries, LagSeries> dress_coupled(const LagSeries& focal_bare, const LagSeries& other_bare,
                                              const DressingKernels& kernels) {
    if (focal_bare.max_lag() != other_bare.max_lag()) throw ValidationError("dressing: propagator lag mismatch");
    check_dressing_inputs(focal_bare, kernels.focal_to_other);
    check_dressing_inputs(other_bare, kernels.other_to_focal);
    check_dressing_inputs(other_bare, kernels.other_to_other);
    const std::size_t L = focal_bare.max_lag();
    LagSeries f(L), m(L);
    f.counts = focal_bare.counts;
    m.counts = other_bare.counts;
    for (std::size_t tau = 0; tau <= L; ++tau) {
        double fm = 0.0, mf = 0.0, mm = 0.0;
        for (std::size_t u = 1; u < tau; ++u) {
            fm += kernel_at(kernels.focal_to_other, u) * m.values[tau - u];
            mf += kernel_at(kernels.other_to_focal, u) * f.values[tau - u];
            mm += kernel_at(kernels.other_to_other, u) * m.values[tau - u];
        }
        f.values[tau] = focal_bare.values[tau] + fm;
        m.values[tau] = other_bare.values[tau] + (mf + mm);
    }
    return {std::move(f), std::move(m)};
}

std::vector<DressedPropagator> dressed_propagator_full(const PropagatorSet& propagators, const FlowKernelSet& kernels,
                                                       std::string_view focal_tag, double scale) {
    if (!(scale >= 0.0) || !std::isfinite(scale)) throw ValidationError("herding scale must be finite and >= 0");
    if (propagators.tags.size() != 2)
        throw ValidationError("full dressing needs exactly two tags (focal actor and the rest of the market)");
    if (!(propagators.tags == kernels.tags)) throw ValidationError("propagator and kernel tag sets differ");
    const std::size_t f = propagators.tags.index(focal_tag);
    const std::size_t m = 1 - f;
    const std::size_t L = propagators.max_lag;

    DressingKernels dk;
    dk.focal_to_other = kernels.at(f, m);
    dk.other_to_focal = kernels.at(m, f);
    dk.other_to_other = LagSeries(kernels.max_lag);
    for (std::size_t u = 1; u <= kernels.max_lag; ++u) dk.other_to_other.values[u] = scale * dk.focal_to_other.values[u];
    const bool neglected = kernel_negligible(kernels, m, f);
    if (neglected) {
        notice("reaction kernel K_{" + propagators.tags.name(m) + "," + propagators.tags.name(f) +
               "} is within 2 standard errors of zero over lags 1..20; treating it as zero");
        dk.other_to_focal = LagSeries(kernels.max_lag);
    }
    auto [gf, gm] = dress_coupled(propagators.propagators[f].truncated(L), propagators.propagators[m].truncated(L), dk);

    std::vector<DressedPropagator> out(2);
    out[f] = {propagators.tags.name(f), std::move(gf), DressingPath::full, scale, neglected};
    out[m] = {propagators.tags.name(m), std::move(gm), DressingPath::full, scale, neglected};
    return out;
}

}  // namespace propcal
