#include "propcal/trade_tape.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstring>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <type_traits>
#include <unordered_map>

namespace propcal {

namespace {

constexpr std::array<char, 8> kBinaryMagic{'P', 'C', 'T', 'A', 'P', 'E', '0', '1'};
constexpr std::size_t kBinaryRecordSize = 80;
constexpr std::size_t kSymbolWidth = 16;
constexpr std::size_t kSessionWidth = 16;
constexpr std::size_t kTagWidth = 15;

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

template <class T>
T parse_number(std::string_view text, std::size_t row, const char* field) {
    T value{};
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (first != last && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (text.empty() || ec != std::errc() || ptr != last)
        throw ParseError(row, field, "cannot parse '" + std::string(text) + "' as a number");
    return value;
}

void check_print(const RawPrint& p) {
    if (p.symbol.empty()) throw ParseError(p.row, "symbol", "empty symbol");
    if (p.session.empty()) throw ParseError(p.row, "session", "empty session");
    if (p.tag.empty()) throw ParseError(p.row, "tag", "empty tag");
    if (p.side != 1 && p.side != -1) throw ParseError(p.row, "side", "side must be 1 or -1");
    if (!std::isfinite(p.price) || p.price <= 0.0) throw ParseError(p.row, "price", "price must be positive");
    if (!std::isfinite(p.mid_before) || p.mid_before <= 0.0)
        throw ParseError(p.row, "mid_before", "mid_before must be positive");
    if (!std::isfinite(p.size) || p.size < 0.0) throw ParseError(p.row, "size", "size must be non-negative");
}

std::vector<RawPrint> parse_csv(std::istream& in) {
    std::vector<RawPrint> out;
    std::string line;
    std::size_t row = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!header_seen) {
            if (line != kCsvHeader)
                throw ParseError(row, "header", std::string("expected header '") + kCsvHeader + "'");
            header_seen = true;
            continue;
        }
        if (line.empty()) continue;
        const auto f = split_fields(line);
        if (f.size() != 8)
            throw ParseError(row, "row", "expected 8 fields, found " + std::to_string(f.size()));
        RawPrint p;
        p.row = row;
        p.timestamp_ms = parse_number<std::int64_t>(f[0], row, "timestamp_ms");
        p.symbol = std::string(f[1]);
        p.session = std::string(f[2]);
        p.price = parse_number<double>(f[3], row, "price");
        p.mid_before = parse_number<double>(f[4], row, "mid_before");
        if (f[5] == "1")
            p.side = 1;
        else if (f[5] == "-1")
            p.side = -1;
        else
            throw ParseError(row, "side", "side must be the literal 1 or -1, found '" + std::string(f[5]) + "'");
        p.tag = std::string(f[6]);
        p.size = parse_number<double>(f[7], row, "size");
        check_print(p);
        out.push_back(std::move(p));
    }
    return out;
}

std::uint64_t load_le64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

void store_le64(unsigned char* p, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        p[i] = static_cast<unsigned char>(v & 0xff);
        v >>= 8;
    }
}

double load_f64(const unsigned char* p) {
    const std::uint64_t bits = load_le64(p);
    double d;
    std::memcpy(&d, &bits, sizeof d);
    return d;
}

void store_f64(unsigned char* p, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof d);
    store_le64(p, bits);
}

std::string load_text(const unsigned char* p, std::size_t width) {
    std::size_t n = 0;
    while (n < width && p[n] != 0) ++n;
    return std::string(reinterpret_cast<const char*>(p), n);
}

void store_text(unsigned char* p, std::size_t width, const std::string& s, const char* field) {
    if (s.size() > width)
        throw ValidationError(std::string("binary tape: ") + field + " '" + s + "' exceeds " +
                              std::to_string(width) + " bytes");
    std::memset(p, 0, width);
    std::memcpy(p, s.data(), s.size());
}

std::vector<RawPrint> parse_binary(std::istream& in) {
    std::vector<RawPrint> out;
    std::array<unsigned char, 16> header{};
    in.read(reinterpret_cast<char*>(header.data()), header.size());
    if (in.gcount() == 0) return out;
    if (in.gcount() != static_cast<std::streamsize>(header.size()) ||
        std::memcmp(header.data(), kBinaryMagic.data(), kBinaryMagic.size()) != 0)
        throw ParseError(0, "header", "not a binary tape (bad magic)");
    const std::uint64_t n = load_le64(header.data() + 8);
    std::array<unsigned char, kBinaryRecordSize> rec{};
    for (std::uint64_t i = 0; i < n; ++i) {
        in.read(reinterpret_cast<char*>(rec.data()), rec.size());
        if (in.gcount() != static_cast<std::streamsize>(rec.size()))
            throw ParseError(i + 1, "record", "truncated binary tape");
        const unsigned char* p = rec.data();
        RawPrint r;
        r.row = i + 1;
        r.timestamp_ms = static_cast<std::int64_t>(load_le64(p));
        r.symbol = load_text(p + 8, kSymbolWidth);
        r.session = load_text(p + 24, kSessionWidth);
        r.price = load_f64(p + 40);
        r.mid_before = load_f64(p + 48);
        r.size = load_f64(p + 56);
        r.side = static_cast<std::int8_t>(p[64]);
        r.tag = load_text(p + 65, kTagWidth);
        check_print(r);
        out.push_back(std::move(r));
    }
    return out;
}

struct RunKey {
    const std::string* session;
    std::int64_t ts;
    double price;
    int side;
    const std::string* tag;
    bool operator==(const RunKey& o) const {
        return *session == *o.session && ts == o.ts && price == o.price && side == o.side && *tag == *o.tag;
    }
};

// Shared ordering check: sessions contiguous, timestamps non-decreasing within a session.
template <class Rec>
void check_order(std::span<const Rec> recs) {
    std::set<std::string> closed;
    for (std::size_t i = 0; i < recs.size(); ++i) {
        if (recs[i].symbol != recs.front().symbol)
            throw ValidationError("record " + std::to_string(i) + ": symbol '" + recs[i].symbol +
                                  "' differs from '" + recs.front().symbol + "'");
        if (i == 0) continue;
        if (recs[i].session != recs[i - 1].session) {
            closed.insert(recs[i - 1].session);
            if (closed.count(recs[i].session))
                throw OrderingError(i, "session '" + recs[i].session + "' resumes after having ended");
        } else if (recs[i].timestamp_ms < recs[i - 1].timestamp_ms) {
            throw OrderingError(i, "timestamp decreases within session '" + recs[i].session + "'");
        }
    }
}

template <class Rec>
std::vector<TradeRecord> aggregate_impl(std::span<const Rec> recs) {
    check_order(recs);
    std::vector<TradeRecord> out;
    std::optional<RunKey> current;
    for (const auto& r : recs) {
        const RunKey key{&r.session, r.timestamp_ms, r.price, r.side, &r.tag};
        std::uint32_t count = 1;
        if constexpr (std::is_same_v<Rec, TradeRecord>) count = r.aggregated_count;
        if (current && *current == key) {
            out.back().size += r.size;
            out.back().aggregated_count += count;
            continue;
        }
        TradeRecord t;
        t.timestamp_ms = r.timestamp_ms;
        t.symbol = r.symbol;
        t.session = r.session;
        t.price = r.price;
        t.mid_before = r.mid_before;
        t.side = r.side;
        t.tag = r.tag;
        t.size = r.size;
        t.aggregated_count = count;
        out.push_back(std::move(t));
        current = RunKey{&out.back().session, t.timestamp_ms, t.price, t.side, &out.back().tag};
    }
    return out;
}

void write_double(std::ostream& out, double v) {
    std::array<char, 32> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    out.write(buf.data(), ptr - buf.data());
}

}  // namespace

TapeFormat parse_tape_format(std::string_view name) {
    if (name == "csv") return TapeFormat::csv;
    if (name == "bin" || name == "binary") return TapeFormat::binary;
    throw ValidationError("unknown tape format '" + std::string(name) + "' (expected csv or bin)");
}

std::size_t TaggedFlow::longest_session() const {
    std::size_t best = 0;
    for (std::size_t s = 0; s < session_count(); ++s) best = std::max(best, session_offsets[s + 1] - session_offsets[s]);
    return best;
}

std::vector<std::size_t> TaggedFlow::code_map(const TagSet& declared) const {
    std::vector<bool> used(tag_names.size(), false);
    for (auto c : tags) used[c] = true;
    std::vector<std::size_t> map(tag_names.size(), declared.size());
    for (std::size_t c = 0; c < tag_names.size(); ++c) {
        if (auto i = declared.find(tag_names[c]))
            map[c] = *i;
        else if (used[c])
            throw ValidationError("tape contains tag '" + tag_names[c] + "' outside the declared tag set");
    }
    return map;
}

void TaggedFlow::validate() const {
    if (signs.size() != tags.size()) throw ValidationError("flow: tags and signs differ in length");
    if (session_offsets.empty() || session_offsets.front() != 0 || session_offsets.back() != tags.size())
        throw ValidationError("flow: session offsets do not cover the tape");
    for (std::size_t s = 1; s < session_offsets.size(); ++s)
        if (session_offsets[s] < session_offsets[s - 1]) throw ValidationError("flow: session offsets decrease");
    for (std::size_t t = 0; t < tags.size(); ++t) {
        if (signs[t] != 1 && signs[t] != -1)
            throw ValidationError("flow: record " + std::to_string(t) + " has sign other than +1/-1");
        if (tags[t] >= tag_names.size())
            throw ValidationError("flow: record " + std::to_string(t) + " has an unknown tag code");
    }
}

SymbolTape::SymbolTape(TapeColumns columns) : c_(std::move(columns)) {
    const std::size_t n = c_.flow.size();
    c_.flow.validate();
    if (c_.timestamps.size() != n || c_.prices.size() != n || c_.mids.size() != n || c_.sizes.size() != n ||
        c_.aggregated_counts.size() != n)
        throw ValidationError("tape '" + c_.symbol + "': column lengths differ");
    if (c_.session_ids.size() != c_.flow.session_count())
        throw ValidationError("tape '" + c_.symbol + "': session id count does not match session offsets");
    std::set<std::string> ids(c_.session_ids.begin(), c_.session_ids.end());
    if (ids.size() != c_.session_ids.size()) throw ValidationError("tape '" + c_.symbol + "': duplicate session id");
    for (std::size_t s = 0; s < c_.flow.session_count(); ++s) {
        const auto [b, e] = c_.flow.session(s);
        for (std::size_t t = b + 1; t < e; ++t)
            if (c_.timestamps[t] < c_.timestamps[t - 1])
                throw OrderingError(t, "timestamp decreases within session '" + c_.session_ids[s] + "'");
    }
    for (std::size_t t = 0; t < n; ++t) {
        if (!(c_.prices[t] > 0.0) || !std::isfinite(c_.prices[t]))
            throw ValidationError("tape '" + c_.symbol + "': record " + std::to_string(t) + " has non-positive price");
        if (!(c_.mids[t] > 0.0) || !std::isfinite(c_.mids[t]))
            throw ValidationError("tape '" + c_.symbol + "': record " + std::to_string(t) +
                                  " has non-positive mid_before");
        if (!(c_.sizes[t] >= 0.0) || !std::isfinite(c_.sizes[t]))
            throw ValidationError("tape '" + c_.symbol + "': record " + std::to_string(t) + " has negative size");
        if (c_.aggregated_counts[t] < 1)
            throw ValidationError("tape '" + c_.symbol + "': record " + std::to_string(t) + " has zero aggregated_count");
    }
    tag_counts_.assign(c_.flow.tag_names.size(), 0);
    for (auto code : c_.flow.tags) ++tag_counts_[code];
}

std::int64_t SymbolTape::tag_count(std::string_view tag) const {
    for (std::size_t c = 0; c < c_.flow.tag_names.size(); ++c)
        if (c_.flow.tag_names[c] == tag) return tag_counts_[c];
    return 0;
}

TradeRecord SymbolTape::record(std::size_t t) const {
    TradeRecord r;
    r.timestamp_ms = c_.timestamps.at(t);
    r.symbol = c_.symbol;
    const auto& off = c_.flow.session_offsets;
    const auto s = static_cast<std::size_t>(std::upper_bound(off.begin(), off.end(), t) - off.begin()) - 1;
    r.session = c_.session_ids[s];
    r.price = c_.prices[t];
    r.mid_before = c_.mids[t];
    r.side = c_.flow.signs[t];
    r.tag = c_.flow.tag_names[c_.flow.tags[t]];
    r.size = c_.sizes[t];
    r.aggregated_count = c_.aggregated_counts[t];
    return r;
}

SymbolTape SymbolTape::session_slice(std::size_t s) const {
    const auto [b, e] = c_.flow.session(s);
    const auto bi = static_cast<std::ptrdiff_t>(b), ei = static_cast<std::ptrdiff_t>(e);
    TapeColumns c;
    c.symbol = c_.symbol;
    c.session_ids = {c_.session_ids.at(s)};
    c.flow.tag_names = c_.flow.tag_names;
    c.flow.tags.assign(c_.flow.tags.begin() + bi, c_.flow.tags.begin() + ei);
    c.flow.signs.assign(c_.flow.signs.begin() + bi, c_.flow.signs.begin() + ei);
    c.flow.session_offsets = {0, e - b};
    c.timestamps.assign(c_.timestamps.begin() + bi, c_.timestamps.begin() + ei);
    c.prices.assign(c_.prices.begin() + bi, c_.prices.begin() + ei);
    c.mids.assign(c_.mids.begin() + bi, c_.mids.begin() + ei);
    c.sizes.assign(c_.sizes.begin() + bi, c_.sizes.begin() + ei);
    c.aggregated_counts.assign(c_.aggregated_counts.begin() + bi, c_.aggregated_counts.begin() + ei);
    return SymbolTape(std::move(c));
}

std::vector<RawPrint> parse_tape(std::istream& in, TapeFormat format) {
    return format == TapeFormat::csv ? parse_csv(in) : parse_binary(in);
}

std::vector<TradeRecord> aggregate_prints(std::span<const RawPrint> prints) { return aggregate_impl(prints); }

std::vector<TradeRecord> aggregate_records(std::span<const TradeRecord> records) { return aggregate_impl(records); }

SymbolTape build_symbol_tape(std::span<const TradeRecord> trades, const std::string& symbol) {
    TapeColumns c;
    c.symbol = symbol;
    std::unordered_map<std::string, std::uint16_t> codes;
    for (std::size_t i = 0; i < trades.size(); ++i) {
        const auto& r = trades[i];
        if (r.symbol != symbol)
            throw ValidationError("record " + std::to_string(i) + " has symbol '" + r.symbol + "', expected '" +
                                  symbol + "'");
        if (c.session_ids.empty() || c.session_ids.back() != r.session) {
            if (!c.session_ids.empty()) c.flow.session_offsets.push_back(i);
            c.session_ids.push_back(r.session);
        }
        auto [it, inserted] = codes.try_emplace(r.tag, static_cast<std::uint16_t>(c.flow.tag_names.size()));
        if (inserted) {
            if (c.flow.tag_names.size() >= 0xffff) throw ValidationError("too many distinct tags");
            c.flow.tag_names.push_back(r.tag);
        }
        c.flow.tags.push_back(it->second);
        c.flow.signs.push_back(static_cast<std::int8_t>(r.side));
        c.timestamps.push_back(r.timestamp_ms);
        c.prices.push_back(r.price);
        c.mids.push_back(r.mid_before);
        c.sizes.push_back(r.size);
        c.aggregated_counts.push_back(r.aggregated_count);
    }
    if (!trades.empty()) c.flow.session_offsets.push_back(trades.size());
    return SymbolTape(std::move(c));
}

std::vector<std::pair<std::string, std::vector<RawPrint>>> split_by_symbol(std::vector<RawPrint> prints) {
    std::vector<std::pair<std::string, std::vector<RawPrint>>> out;
    std::unordered_map<std::string, std::size_t> slot;
    for (auto& p : prints) {
        auto [it, inserted] = slot.try_emplace(p.symbol, out.size());
        if (inserted) out.emplace_back(p.symbol, std::vector<RawPrint>{});
        out[it->second].second.push_back(std::move(p));
    }
    return out;
}

std::vector<SymbolTape> load_tapes(std::istream& in, TapeFormat format) {
    std::vector<SymbolTape> tapes;
    for (auto& [symbol, prints] : split_by_symbol(parse_tape(in, format))) {
        const auto trades = aggregate_prints(prints);
        tapes.push_back(build_symbol_tape(trades, symbol));
    }
    return tapes;
}

void write_tape(std::ostream& out, const SymbolTape& tape, TapeFormat format) {
    const auto& flow = tape.flow();
    if (format == TapeFormat::csv) {
        out << kCsvHeader << '\n';
        for (std::size_t s = 0; s < tape.session_count(); ++s) {
            const auto [b, e] = flow.session(s);
            for (std::size_t t = b; t < e; ++t) {
                out << tape.timestamps()[t] << ',' << tape.symbol() << ',' << tape.session_ids()[s] << ',';
                write_double(out, tape.prices()[t]);
                out << ',';
                write_double(out, tape.mids()[t]);
                out << ',' << (flow.signs[t] > 0 ? "1" : "-1") << ',' << flow.tag_names[flow.tags[t]] << ',';
                write_double(out, tape.sizes()[t]);
                out << '\n';
            }
        }
        return;
    }
    std::array<unsigned char, 16> header{};
    std::memcpy(header.data(), kBinaryMagic.data(), kBinaryMagic.size());
    store_le64(header.data() + 8, tape.size());
    out.write(reinterpret_cast<const char*>(header.data()), header.size());
    std::array<unsigned char, kBinaryRecordSize> rec{};
    for (std::size_t s = 0; s < tape.session_count(); ++s) {
        const auto [b, e] = flow.session(s);
        for (std::size_t t = b; t < e; ++t) {
            unsigned char* p = rec.data();
            std::memset(p, 0, rec.size());
            store_le64(p, static_cast<std::uint64_t>(tape.timestamps()[t]));
            store_text(p + 8, kSymbolWidth, tape.symbol(), "symbol");
            store_text(p + 24, kSessionWidth, tape.session_ids()[s], "session");
            store_f64(p + 40, tape.prices()[t]);
            store_f64(p + 48, tape.mids()[t]);
            store_f64(p + 56, tape.sizes()[t]);
            p[64] = static_cast<unsigned char>(static_cast<std::int8_t>(flow.signs[t]));
            store_text(p + 65, kTagWidth, flow.tag_names[flow.tags[t]], "tag");
            out.write(reinterpret_cast<const char*>(p), rec.size());
        }
    }
}

}  // namespace propcal
