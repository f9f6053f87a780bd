#pragma once

#include <cstdint>
#include <istream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "psm/error.hpp"

namespace psm {

/// One (user, message, timestamp) tuple. Timestamps are epoch milliseconds.
struct ActionRecord {
    std::string user_id;
    std::string message_id;
    std::int64_t timestamp = 0;

    friend bool operator==(const ActionRecord&, const ActionRecord&) = default;
};

/// The raw action log plus inverted indexes over users and messages.
/// Records keep input order; index vectors hold record positions.
class ActionLog {
  public:
    void add(ActionRecord rec) {
        const std::uint32_t pos = static_cast<std::uint32_t>(records_.size());
        user_index_[rec.user_id].push_back(pos);
        message_index_[rec.message_id].push_back(pos);
        records_.push_back(std::move(rec));
    }

    const std::vector<ActionRecord>& records() const { return records_; }
    const std::unordered_map<std::string, std::vector<std::uint32_t>>& user_index() const {
        return user_index_;
    }
    const std::unordered_map<std::string, std::vector<std::uint32_t>>& message_index() const {
        return message_index_;
    }

    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }
    std::size_t user_count() const { return user_index_.size(); }
    std::size_t message_count() const { return message_index_.size(); }

  private:
    std::vector<ActionRecord> records_;
    std::unordered_map<std::string, std::vector<std::uint32_t>> user_index_;
    std::unordered_map<std::string, std::vector<std::uint32_t>> message_index_;
};

enum class LogFormat { csv, jsonl };

inline LogFormat log_format_from_string(std::string_view s) {
    if (s == "csv") return LogFormat::csv;
    if (s == "jsonl") return LogFormat::jsonl;
    throw ParamError("unknown log format: " + std::string(s) + " (expected csv or jsonl)");
}

struct ParseOptions {
    LogFormat format = LogFormat::csv;
    bool strict = false;  // malformed line: strict -> throw, lenient -> skip and count
};

struct ParseResult {
    ActionLog log;
    std::uint64_t skipped = 0;
    std::vector<std::string> sample_errors;  // first few skipped lines, for diagnostics
};

namespace detail {

// Days since 1970-01-01 for a civil date (Howard Hinnant's algorithm).
inline std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline bool parse_fixed_uint(std::string_view s, std::size_t pos, std::size_t len, unsigned& out) {
    if (pos + len > s.size()) return false;
    unsigned v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
        if (s[i] < '0' || s[i] > '9') return false;
        v = v * 10 + static_cast<unsigned>(s[i] - '0');
    }
    out = v;
    return true;
}

// RFC 3339 timestamp ("2016-02-05T14:30:00Z", optional .fff fraction and
// numeric offset) to epoch milliseconds. Returns false if it does not parse.
inline bool parse_rfc3339_ms(std::string_view s, std::int64_t& out) {
    unsigned yy, mo, dd, hh, mi, ss;
    if (s.size() < 20) return false;
    if (!parse_fixed_uint(s, 0, 4, yy) || s[4] != '-' || !parse_fixed_uint(s, 5, 2, mo) ||
        s[7] != '-' || !parse_fixed_uint(s, 8, 2, dd))
        return false;
    if (s[10] != 'T' && s[10] != 't' && s[10] != ' ') return false;
    if (!parse_fixed_uint(s, 11, 2, hh) || s[13] != ':' || !parse_fixed_uint(s, 14, 2, mi) ||
        s[16] != ':' || !parse_fixed_uint(s, 17, 2, ss))
        return false;
    if (mo < 1 || mo > 12 || dd < 1 || dd > 31 || hh > 23 || mi > 59 || ss > 60) return false;
    std::size_t pos = 19;
    std::int64_t frac_ms = 0;
    if (pos < s.size() && s[pos] == '.') {
        ++pos;
        std::size_t digits = 0;
        std::int64_t frac = 0;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
            if (digits < 3) frac = frac * 10 + (s[pos] - '0');
            ++digits;
            ++pos;
        }
        if (digits == 0) return false;
        while (digits < 3) {
            frac *= 10;
            ++digits;
        }
        frac_ms = frac;
    }
    std::int64_t offset_min = 0;
    if (pos >= s.size()) return false;
    if (s[pos] == 'Z' || s[pos] == 'z') {
        ++pos;
    } else if (s[pos] == '+' || s[pos] == '-') {
        const bool neg = s[pos] == '-';
        unsigned oh, om;
        if (!parse_fixed_uint(s, pos + 1, 2, oh) || pos + 3 >= s.size() || s[pos + 3] != ':' ||
            !parse_fixed_uint(s, pos + 4, 2, om))
            return false;
        if (oh > 23 || om > 59) return false;
        offset_min = static_cast<std::int64_t>(oh) * 60 + om;
        if (neg) offset_min = -offset_min;
        pos += 6;
    } else {
        return false;
    }
    if (pos != s.size()) return false;
    const std::int64_t days = days_from_civil(yy, mo, dd);
    out = (((days * 24 + hh) * 60 + mi - offset_min) * 60 + ss) * 1000 + frac_ms;
    return true;
}

// Plain integer milliseconds or an RFC 3339 string. Negative values are
// rejected (timestamp >= 0 invariant).
inline bool parse_timestamp(std::string_view s, std::int64_t& out) {
    if (s.empty()) return false;
    bool all_digits = true;
    for (char c : s) {
        if (c < '0' || c > '9') {
            all_digits = false;
            break;
        }
    }
    if (all_digits) {
        if (s.size() > 18) return false;
        std::int64_t v = 0;
        for (char c : s) v = v * 10 + (c - '0');
        out = v;
        return true;
    }
    std::int64_t ms;
    if (parse_rfc3339_ms(s, ms) && ms >= 0) {
        out = ms;
        return true;
    }
    return false;
}

inline std::string_view trim_cr(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
}

}  // namespace detail

inline constexpr const char* kActionsCsvHeader = "user_id,message_id,timestamp";

/// Reads a line-delimited action log. Malformed lines are skipped and counted
/// in lenient mode, fatal in strict mode. The CSV header line is consumed if
/// present.
inline ParseResult parse_action_log(std::istream& in, const ParseOptions& opts = {}) {
    if (!in) throw IoError("action log stream is not readable");
    ParseResult result;
    std::string line;
    std::uint64_t line_no = 0;
    bool first = true;
    const auto reject = [&](const std::string& why) {
        if (opts.strict)
            throw ParamError("malformed action log line " + std::to_string(line_no) + ": " + why);
        ++result.skipped;
        if (result.sample_errors.size() < 5)
            result.sample_errors.push_back("line " + std::to_string(line_no) + ": " + why);
    };
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view v = detail::trim_cr(line);
        if (v.empty()) continue;
        if (first && opts.format == LogFormat::csv && v == kActionsCsvHeader) {
            first = false;
            continue;
        }
        first = false;
        ActionRecord rec;
        if (opts.format == LogFormat::csv) {
            const auto c1 = v.find(',');
            const auto c2 = c1 == std::string_view::npos ? c1 : v.find(',', c1 + 1);
            if (c1 == std::string_view::npos || c2 == std::string_view::npos) {
                reject("expected user_id,message_id,timestamp");
                continue;
            }
            if (v.find(',', c2 + 1) != std::string_view::npos) {
                reject("too many fields");
                continue;
            }
            rec.user_id = std::string(v.substr(0, c1));
            rec.message_id = std::string(v.substr(c1 + 1, c2 - c1 - 1));
            const std::string_view ts = v.substr(c2 + 1);
            if (rec.user_id.empty() || rec.message_id.empty()) {
                reject("empty user_id or message_id");
                continue;
            }
            if (!detail::parse_timestamp(ts, rec.timestamp)) {
                reject("bad timestamp '" + std::string(ts) + "'");
                continue;
            }
        } else {
            nlohmann::json obj = nlohmann::json::parse(v, nullptr, false);
            if (obj.is_discarded() || !obj.is_object()) {
                reject("not a JSON object");
                continue;
            }
            if (!obj.contains("user_id") || !obj.contains("message_id") || !obj.contains("timestamp")) {
                reject("missing user_id/message_id/timestamp key");
                continue;
            }
            if (!obj["user_id"].is_string() || !obj["message_id"].is_string()) {
                reject("user_id/message_id must be strings");
                continue;
            }
            rec.user_id = obj["user_id"].get<std::string>();
            rec.message_id = obj["message_id"].get<std::string>();
            if (rec.user_id.empty() || rec.message_id.empty()) {
                reject("empty user_id or message_id");
                continue;
            }
            const auto& ts = obj["timestamp"];
            if (ts.is_number_integer()) {
                rec.timestamp = ts.get<std::int64_t>();
                if (rec.timestamp < 0) {
                    reject("negative timestamp");
                    continue;
                }
            } else if (ts.is_string()) {
                if (!detail::parse_timestamp(ts.get<std::string>(), rec.timestamp)) {
                    reject("bad timestamp '" + ts.get<std::string>() + "'");
                    continue;
                }
            } else {
                reject("timestamp must be integer or RFC 3339 string");
                continue;
            }
        }
        result.log.add(std::move(rec));
    }
    if (in.bad()) throw IoError("I/O failure while reading action log");
    return result;
}

}  // namespace psm
