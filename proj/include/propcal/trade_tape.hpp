#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "propcal/lag_series.hpp"

namespace propcal {

/// One trade print as read from a tape file.
struct RawPrint {
    std::int64_t timestamp_ms = 0;
    std::string symbol;
    std::string session;
    double price = 0.0;
    double mid_before = 0.0;
    int side = 0;  // +1 buyer-initiated, -1 seller-initiated
    std::string tag;
    double size = 0.0;
    std::size_t row = 0;  // source row (1-based, header is row 1) or record index for binary
};

/// A transaction after merging child fills of one market order.
struct TradeRecord {
    std::int64_t timestamp_ms = 0;
    std::string symbol;
    std::string session;
    double price = 0.0;
    double mid_before = 0.0;
    int side = 0;
    std::string tag;
    double size = 0.0;
    std::uint32_t aggregated_count = 1;
};

enum class TapeFormat { csv, binary };

TapeFormat parse_tape_format(std::string_view name);

/// Tag codes and signs in trade time, partitioned into sessions.
/// Code i refers to tag_names[i]; codes are assigned in order of first appearance.
struct TaggedFlow {
    std::vector<std::string> tag_names;
    std::vector<std::uint16_t> tags;
    std::vector<std::int8_t> signs;
    std::vector<std::size_t> session_offsets{0};  // session s spans [offsets[s], offsets[s+1])

    std::size_t size() const { return tags.size(); }
    std::size_t session_count() const { return session_offsets.size() - 1; }
    std::pair<std::size_t, std::size_t> session(std::size_t s) const {
        return {session_offsets[s], session_offsets[s + 1]};
    }
    std::size_t longest_session() const;

    /// Maps tape codes onto indices of `declared`; throws when a used tag is undeclared.
    std::vector<std::size_t> code_map(const TagSet& declared) const;

    /// Throws ValidationError on inconsistent sizes, offsets, signs or codes.
    void validate() const;
};

/// Columnar storage for one symbol's tape.
struct TapeColumns {
    std::string symbol;
    std::vector<std::string> session_ids;
    TaggedFlow flow;
    std::vector<std::int64_t> timestamps;
    std::vector<double> prices;
    std::vector<double> mids;
    std::vector<double> sizes;
    std::vector<std::uint32_t> aggregated_counts;
};

/// Validated, immutable trade-time tape of one instrument. The trade-time
/// index t is the position in the sequence.
class SymbolTape {
public:
    SymbolTape() = default;
    /// Validates ordering, signs, positivity and column sizes.
    explicit SymbolTape(TapeColumns columns);

    const std::string& symbol() const { return c_.symbol; }
    std::size_t size() const { return c_.flow.size(); }
    bool empty() const { return size() == 0; }

    const TaggedFlow& flow() const { return c_.flow; }
    const std::vector<std::string>& session_ids() const { return c_.session_ids; }
    std::size_t session_count() const { return c_.flow.session_count(); }

    std::span<const std::int64_t> timestamps() const { return c_.timestamps; }
    std::span<const double> prices() const { return c_.prices; }
    std::span<const double> mids() const { return c_.mids; }
    std::span<const double> sizes() const { return c_.sizes; }
    std::span<const std::uint32_t> aggregated_counts() const { return c_.aggregated_counts; }

    /// Number of trades per tag, indexed like flow().tag_names.
    const std::vector<std::int64_t>& tag_counts() const { return tag_counts_; }
    std::int64_t tag_count(std::string_view tag) const;

    TradeRecord record(std::size_t t) const;
    /// Sub-tape holding only session s.
    SymbolTape session_slice(std::size_t s) const;

private:
    TapeColumns c_;
    std::vector<std::int64_t> tag_counts_;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Reads every print of a CSV or binary tape, in input order.
std::vector<RawPrint> parse_tape(std::istream& in, TapeFormat format);

/// Merges maximal runs of consecutive prints sharing (session, timestamp,
/// price, side, tag). Input must be one symbol, ordered by session then timestamp.
std::vector<TradeRecord> aggregate_prints(std::span<const RawPrint> prints);
/// Same rule applied to records already aggregated (idempotence).
std::vector<TradeRecord> aggregate_records(std::span<const TradeRecord> records);

SymbolTape build_symbol_tape(std::span<const TradeRecord> trades, const std::string& symbol);

/// Stable split of a multi-symbol print stream; symbols in order of first appearance.
std::vector<std::pair<std::string, std::vector<RawPrint>>> split_by_symbol(std::vector<RawPrint> prints);

/// parse -> split -> aggregate -> build, for every symbol in the stream.
std::vector<SymbolTape> load_tapes(std::istream& in, TapeFormat format);

void write_tape(std::ostream& out, const SymbolTape& tape, TapeFormat format);

inline constexpr const char* kCsvHeader = "timestamp_ms,symbol,session,price,mid_before,side,tag,size";

}  // namespace propcal
