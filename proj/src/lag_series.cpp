#include "propcal/lag_series.hpp"

#include <cmath>
#include <set>

namespace propcal {

ParseError::ParseError(std::size_t row, std::string field, const std::string& what)
    : ValidationError("row " + std::to_string(row) + ", field '" + field + "': " + what),
      row_(row),
      field_(std::move(field)) {}

OrderingError::OrderingError(std::size_t index, const std::string& what)
    : ValidationError("record " + std::to_string(index) + ": " + what), index_(index) {}

TagSet::TagSet(std::vector<std::string> names) : names_(std::move(names)) {
    std::set<std::string> seen;
    for (const auto& n : names_) {
        if (n.empty()) throw ValidationError("empty tag name");
        if (!seen.insert(n).second) throw ValidationError("duplicate tag '" + n + "'");
    }
}

std::optional<std::size_t> TagSet::find(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return i;
    return std::nullopt;
}

std::size_t TagSet::index(std::string_view name) const {
    if (auto i = find(name)) return *i;
    throw ValidationError("tag '" + std::string(name) + "' is not in the declared tag set");
}

LagSeries LagSeries::truncated(std::size_t max_lag) const {
    if (max_lag > this->max_lag()) throw ValidationError("cannot extend a lag series by truncation");
    LagSeries out(max_lag);
    std::copy(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(max_lag + 1), out.values.begin());
    std::copy(counts.begin(), counts.begin() + static_cast<std::ptrdiff_t>(max_lag + 1), out.counts.begin());
    return out;
}

CorrelationSet::CorrelationSet(TagSet tags, std::size_t max_lag)
    : tags_(std::move(tags)), max_lag_(max_lag), series_(tags_.size() * tags_.size(), LagSeries(max_lag)) {}

double relative_rms(const std::vector<double>& estimate, const std::vector<double>& truth, LagWindow window) {
    if (window.empty() || window.last >= estimate.size() || window.last >= truth.size())
        throw ValidationError("relative_rms: window outside the series");
    double num = 0.0, den = 0.0;
    for (std::size_t k = window.first; k <= window.last; ++k) {
        const double d = estimate[k] - truth[k];
        num += d * d;
        den += truth[k] * truth[k];
    }
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

}  // namespace propcal
