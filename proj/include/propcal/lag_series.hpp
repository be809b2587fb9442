#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace propcal {

// ---------------------------------------------------------------------------
// Error types
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Precondition or invariant violation on caller-supplied data.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Malformed input row. `row` is 1-based and counts the header line.
class ParseError : public ValidationError {
public:
    ParseError(std::size_t row, std::string field, const std::string& what);
    std::size_t row() const { return row_; }
    const std::string& field() const { return field_; }

private:
    std::size_t row_;
    std::string field_;
};

/// Input that violates the (session, timestamp, arrival) ordering.
class OrderingError : public ValidationError {
public:
    OrderingError(std::size_t index, const std::string& what);
    std::size_t index() const { return index_; }

private:
    std::size_t index_;
};

/// Singular or otherwise unsolvable linear system.
class NumericalError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Tags
// ---------------------------------------------------------------------------

/// Ordered set of actor labels. Order is significant: it fixes the layout of
/// every per-tag and per-pair container downstream.
class TagSet {
public:
    TagSet() = default;
    explicit TagSet(std::vector<std::string> names);

    std::size_t size() const { return names_.size(); }
    bool empty() const { return names_.empty(); }
    const std::string& name(std::size_t i) const { return names_.at(i); }
    const std::vector<std::string>& names() const { return names_; }

    std::optional<std::size_t> find(std::string_view name) const;
    /// Throws ValidationError when the tag is not declared.
    std::size_t index(std::string_view name) const;

    std::size_t pair_index(std::size_t first, std::size_t second) const { return first * size() + second; }

    bool operator==(const TagSet&) const = default;

private:
    std::vector<std::string> names_;
};

struct TagProbabilities {
    TagSet tags;
    std::vector<double> p;
    std::vector<std::int64_t> counts;

    double operator[](std::size_t i) const { return p.at(i); }
    double of(std::string_view tag) const { return p.at(tags.index(tag)); }
};

// ---------------------------------------------------------------------------
// Lag series
// ---------------------------------------------------------------------------

/// A real function of the integer lag 0..max_lag with per-lag sample counts.
/// A lag with count 0 carries no information; its value is 0.
struct LagSeries {
    std::vector<double> values;
    std::vector<std::int64_t> counts;

    LagSeries() = default;
    explicit LagSeries(std::size_t max_lag) : values(max_lag + 1, 0.0), counts(max_lag + 1, 0) {}

    std::size_t max_lag() const { return values.empty() ? 0 : values.size() - 1; }
    double operator[](std::size_t lag) const { return values[lag]; }
    double& operator[](std::size_t lag) { return values[lag]; }

    /// Copy restricted to lags 0..max_lag (which must not exceed this one's).
    LagSeries truncated(std::size_t max_lag) const;

    bool operator==(const LagSeries&) const = default;
};

/// Sign cross-correlations C_{a,b}(tau), tau = 0..max_lag, for every ordered
/// tag pair. `a` trades first. Negative lags follow from C_{a,b}(-tau) = C_{b,a}(tau).
class CorrelationSet {
public:
    CorrelationSet() = default;
    CorrelationSet(TagSet tags, std::size_t max_lag);

    const TagSet& tags() const { return tags_; }
    std::size_t max_lag() const { return max_lag_; }

    LagSeries& at(std::size_t first, std::size_t second) { return series_.at(tags_.pair_index(first, second)); }
    const LagSeries& at(std::size_t first, std::size_t second) const {
        return series_.at(tags_.pair_index(first, second));
    }

    /// C_{first,second}(lag) for signed lag, |lag| <= max_lag.
    double value(std::size_t first, std::size_t second, std::ptrdiff_t lag) const {
        return lag >= 0 ? at(first, second).values[static_cast<std::size_t>(lag)]
                        : at(second, first).values[static_cast<std::size_t>(-lag)];
    }

    bool operator==(const CorrelationSet&) const = default;

private:
    TagSet tags_;
    std::size_t max_lag_ = 0;
    std::vector<LagSeries> series_;
};

/// Inclusive lag range.
struct LagWindow {
    std::size_t first = 1;
    std::size_t last = 1;
    bool empty() const { return last < first; }
};

/// Relative RMS distance sqrt(sum (a-b)^2 / sum b^2) over the given lags.
double relative_rms(const std::vector<double>& estimate, const std::vector<double>& truth, LagWindow window);

}  // namespace propcal
