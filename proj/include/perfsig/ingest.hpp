#pragma once

#include "perfsig/error.hpp"
#include "perfsig/time.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace perfsig {

/// One serviced request as seen at the front of the service.
struct TransactionRecord {
    Timestamp timestamp;
    std::string tx_type;
    double response_ms = 0.0;

    friend bool operator==(const TransactionRecord&, const TransactionRecord&) = default;
};

enum class RecordFormat { csv, ndjson };

/// A line that failed to parse. Line numbers are 1-based and count the header.
struct Reject {
    std::size_t line_no = 0;
    std::string reason;
};

struct ParseResult {
    std::vector<TransactionRecord> records;
    std::vector<Reject> rejects;
};

inline constexpr std::string_view csv_header = "timestamp,transaction_type,response_ms";

namespace detail {

inline bool valid_utf8(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
        const auto c = static_cast<unsigned char>(s[i]);
        std::size_t len = 0;
        std::uint32_t cp = 0;
        if (c < 0x80) {
            ++i;
            continue;
        } else if ((c & 0xE0) == 0xC0) {
            len = 2;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            len = 4;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (i + len > s.size()) {
            return false;
        }
        for (std::size_t k = 1; k < len; ++k) {
            const auto cc = static_cast<unsigned char>(s[i + k]);
            if ((cc & 0xC0) != 0x80) {
                return false;
            }
            cp = (cp << 6) | (cc & 0x3F);
        }
        // Overlong encodings, surrogates and out-of-range code points.
        if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
            cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
            return false;
        }
        i += len;
    }
    return true;
}

enum class TimestampStyle { unknown, rfc3339, epoch_ms };

/// Tracks the timestamp style of a file and rejects files that mix styles.
class TimestampReader {
public:
    std::optional<Timestamp> read(std::string_view text, std::size_t line_no) {
        if (auto epoch = parse_epoch_ms(text)) {
            settle(TimestampStyle::epoch_ms, line_no);
            return epoch;
        }
        if (auto rfc = parse_rfc3339(text)) {
            settle(TimestampStyle::rfc3339, line_no);
            return rfc;
        }
        return std::nullopt;
    }

    std::optional<Timestamp> read_epoch(std::int64_t value, std::size_t line_no) {
        settle(TimestampStyle::epoch_ms, line_no);
        return Timestamp{Duration{value}};
    }

private:
    void settle(TimestampStyle style, std::size_t line_no) {
        if (style_ == TimestampStyle::unknown) {
            style_ = style;
        } else if (style_ != style) {
            throw schema_error("line " + std::to_string(line_no) +
                               ": mixed RFC 3339 and epoch-millisecond timestamps");
        }
    }

    TimestampStyle style_ = TimestampStyle::unknown;
};

inline std::optional<double> parse_response(std::string_view s) {
    double value = 0.0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (s.empty() || ec != std::errc{} || ptr != end) {
        return std::nullopt;
    }
    return value;
}

inline std::optional<std::string> check_record(const TransactionRecord& r) {
    if (r.tx_type.empty()) {
        return "empty transaction_type";
    }
    if (!std::isfinite(r.response_ms)) {
        return "non-finite response_ms";
    }
    if (r.response_ms < 0.0) {
        return "negative response_ms";
    }
    return std::nullopt;
}

inline void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
}

inline bool blank(std::string_view line) {
    return line.find_first_not_of(" \t") == std::string_view::npos;
}

inline ParseResult parse_csv(std::istream& in) {
    ParseResult out;
    std::string line;
    if (!std::getline(in, line)) {
        throw schema_error("missing CSV header");
    }
    strip_cr(line);
    if (line.rfind("\xEF\xBB\xBF", 0) == 0) {
        line.erase(0, 3);
    }
    if (line != csv_header) {
        throw schema_error("CSV header mismatch: expected '" + std::string(csv_header) + "'");
    }

    TimestampReader stamps;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (blank(line)) {
            continue;
        }
        auto reject = [&](std::string reason) { out.rejects.push_back({line_no, std::move(reason)}); };
        if (!valid_utf8(line)) {
            reject("invalid UTF-8");
            continue;
        }
        if (line.find('"') != std::string::npos) {
            reject("quoted fields are not supported");
            continue;
        }
        const auto c1 = line.find(',');
        const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
        if (c2 == std::string::npos || line.find(',', c2 + 1) != std::string::npos) {
            reject("expected 3 comma-separated fields");
            continue;
        }
        const std::string_view view{line};
        const auto ts = stamps.read(view.substr(0, c1), line_no);
        if (!ts) {
            reject("unparseable timestamp");
            continue;
        }
        const auto response = parse_response(view.substr(c2 + 1));
        if (!response) {
            reject("unparseable response_ms");
            continue;
        }
        TransactionRecord rec{*ts, std::string(view.substr(c1 + 1, c2 - c1 - 1)), *response};
        if (auto why = check_record(rec)) {
            reject(*why);
            continue;
        }
        out.records.push_back(std::move(rec));
    }
    if (in.bad()) {
        throw io_error("read failure");
    }
    return out;
}

inline ParseResult parse_ndjson(std::istream& in) {
    ParseResult out;
    TimestampReader stamps;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (blank(line)) {
            continue;
        }
        auto reject = [&](std::string reason) { out.rejects.push_back({line_no, std::move(reason)}); };
        if (!valid_utf8(line)) {
            reject("invalid UTF-8");
            continue;
        }
        const auto obj = nlohmann::json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) {
            reject("not a JSON object");
            continue;
        }
        const auto ts_it = obj.find("timestamp");
        const auto type_it = obj.find("transaction_type");
        const auto resp_it = obj.find("response_ms");
        if (ts_it == obj.end() || type_it == obj.end() || resp_it == obj.end()) {
            reject("missing required key");
            continue;
        }
        std::optional<Timestamp> ts;
        if (ts_it->is_string()) {
            ts = stamps.read(ts_it->get_ref<const std::string&>(), line_no);
        } else if (ts_it->is_number_integer()) {
            ts = stamps.read_epoch(ts_it->get<std::int64_t>(), line_no);
        }
        if (!ts) {
            reject("unparseable timestamp");
            continue;
        }
        if (!type_it->is_string()) {
            reject("transaction_type is not a string");
            continue;
        }
        if (!resp_it->is_number()) {
            reject("response_ms is not a number");
            continue;
        }
        TransactionRecord rec{*ts, type_it->get<std::string>(), resp_it->get<double>()};
        if (auto why = check_record(rec)) {
            reject(*why);
            continue;
        }
        out.records.push_back(std::move(rec));
    }
    if (in.bad()) {
        throw io_error("read failure");
    }
    return out;
}

} // namespace detail

/// Parses a transaction log. Malformed lines land in `rejects`; schema problems throw.
inline ParseResult parse_records(std::istream& in, RecordFormat format) {
    if (!in) {
        throw io_error("unreadable input stream");
    }
    return format == RecordFormat::csv ? detail::parse_csv(in) : detail::parse_ndjson(in);
}

inline ParseResult parse_records_file(const std::filesystem::path& path, RecordFormat format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw io_error("cannot open " + path.string());
    }
    return parse_records(in, format);
}

/// Guesses the format from the file extension: `.ndjson`/`.jsonl`/`.json` are NDJSON, anything else CSV.
inline RecordFormat format_from_path(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    return (ext == ".ndjson" || ext == ".jsonl" || ext == ".json") ? RecordFormat::ndjson : RecordFormat::csv;
}

inline std::string format_response(double ms) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", ms);
    return buf;
}

/// Writes records in the same format `parse_records` consumes.
inline void write_records(std::ostream& out, const std::vector<TransactionRecord>& records, RecordFormat format) {
    if (format == RecordFormat::csv) {
        out << csv_header << '\n';
        for (const auto& r : records) {
            out << format_rfc3339(r.timestamp) << ',' << r.tx_type << ',' << format_response(r.response_ms) << '\n';
        }
        return;
    }
    for (const auto& r : records) {
        // response_ms is emitted with fixed precision so output is byte-stable.
        out << R"({"timestamp":")" << format_rfc3339(r.timestamp) << R"(","transaction_type":)"
            << nlohmann::json(r.tx_type).dump() << R"(,"response_ms":)" << format_response(r.response_ms) << "}\n";
    }
}

inline void write_rejects(std::ostream& out, const std::vector<Reject>& rejects) {
    for (const auto& r : rejects) {
        nlohmann::ordered_json j;
        j["line_no"] = r.line_no;
        j["reason"] = r.reason;
        out << j.dump() << '\n';
    }
}

/// All records whose timestamps fall in the half-open interval [window_start, window_start + window_length).
struct SampleWindow {
    std::size_t index = 0;
    Timestamp window_start;
    Duration window_length{300'000};
    std::vector<TransactionRecord> records;
    std::size_t arrival_count = 0;
    bool fittable = false;
};

/// Partitions records into contiguous windows aligned to the first timestamp truncated to
/// `window_length`. Windows below `min_samples` (including empty gaps) are kept but marked unfittable.
inline std::vector<SampleWindow> window_records(std::vector<TransactionRecord> records, Duration window_length,
                                                std::size_t min_samples) {
    if (window_length <= Duration::zero()) {
        throw precondition_error("window_length must be positive");
    }
    std::vector<SampleWindow> windows;
    if (records.empty()) {
        return windows;
    }
    const auto by_time = [](const TransactionRecord& a, const TransactionRecord& b) {
        return a.timestamp < b.timestamp;
    };
    if (!std::is_sorted(records.begin(), records.end(), by_time)) {
        std::stable_sort(records.begin(), records.end(), by_time);
    }

    const auto origin = std::chrono::floor<Duration>(records.front().timestamp);
    const auto len = window_length.count();
    auto floor_div = [](std::int64_t a, std::int64_t b) {
        return a / b - ((a % b != 0) && ((a < 0) != (b < 0)));
    };
    const std::int64_t first_slot = floor_div(epoch_ms(origin), len);
    const std::int64_t last_slot = floor_div(epoch_ms(records.back().timestamp), len);

    windows.resize(static_cast<std::size_t>(last_slot - first_slot + 1));
    for (std::size_t i = 0; i < windows.size(); ++i) {
        windows[i].index = i;
        windows[i].window_length = window_length;
        windows[i].window_start = Timestamp{Duration{(first_slot + static_cast<std::int64_t>(i)) * len}};
    }
    for (auto& r : records) {
        const auto slot = floor_div(epoch_ms(r.timestamp), len) - first_slot;
        windows[static_cast<std::size_t>(slot)].records.push_back(std::move(r));
    }
    for (auto& w : windows) {
        w.arrival_count = w.records.size();
        w.fittable = w.arrival_count >= min_samples && w.arrival_count > 0;
    }
    return windows;
}

} // namespace perfsig
