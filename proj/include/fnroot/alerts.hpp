#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "fnroot/net.hpp"
#include "fnroot/text.hpp"

namespace fnroot {

/// Rule identity printed as [gid:sid:rev].
struct Signature {
    std::uint32_t gid = 1;
    std::uint32_t sid = 0;
    std::uint32_t rev = 0;

    std::string to_string() const {
        return std::to_string(gid) + ":" + std::to_string(sid) + ":" + std::to_string(rev);
    }

    static std::optional<Signature> parse(std::string_view text) {
        auto a = text.find(':');
        if (a == std::string_view::npos) return std::nullopt;
        auto b = text.find(':', a + 1);
        if (b == std::string_view::npos) return std::nullopt;
        auto gid = detail::parse_int<std::uint32_t>(text.substr(0, a));
        auto sid = detail::parse_int<std::uint32_t>(text.substr(a + 1, b - a - 1));
        auto rev = detail::parse_int<std::uint32_t>(text.substr(b + 1));
        if (!gid || !sid || !rev) return std::nullopt;
        return Signature{*gid, *sid, *rev};
    }

    friend auto operator<=>(const Signature&, const Signature&) = default;
    friend bool operator==(const Signature&, const Signature&) = default;
};

using AlertId = std::uint64_t;

struct AlertRecord {
    AlertId alert_id = 0;
    EpochMicros timestamp = 0;
    Signature signature;
    std::string message;
    std::optional<FiveTuple> tuple;  // absent for engine-internal alerts
    std::string ruleset;
    std::optional<std::int64_t> priority;
    std::optional<std::string> classification;

    friend bool operator==(const AlertRecord&, const AlertRecord&) = default;
};

struct AlertReject {
    std::size_t line = 0;  // 1-based
    std::string reason;

    friend bool operator==(const AlertReject&, const AlertReject&) = default;
};

/// Parser output. Every input line is accounted for exactly once:
/// alerts.size() + rejects.size() + skipped == total_lines.
struct AlertParse {
    std::vector<AlertRecord> alerts;
    std::vector<AlertReject> rejects;
    std::size_t skipped = 0;
    std::size_t total_lines = 0;

    /// Nothing parsed but something rejected; likely the wrong format.
    bool suspicious() const { return alerts.empty() && !rejects.empty(); }
};

/// Resolves years for timestamps that omit them.
struct AlertTimeContext {
    int base_year = 1970;
    /// When known, the candidate year (base-1, base, base+1) closest to this
    /// range wins.
    std::optional<std::pair<EpochMicros, EpochMicros>> capture_range;
};

namespace detail {

inline void add_alert(AlertParse& out, AlertRecord rec, const std::string& ruleset) {
    rec.alert_id = out.alerts.size() + 1;
    rec.ruleset = ruleset;
    out.alerts.push_back(std::move(rec));
}

inline std::optional<EpochMicros> resolve_yearless(const AlertTimeContext& ctx, unsigned month, unsigned day, int hour,
                                                  int minute, int second, std::int64_t micros) {
    std::optional<EpochMicros> best;
    EpochMicros best_distance = 0;
    for (int y : {ctx.base_year, ctx.base_year - 1, ctx.base_year + 1}) {
        if (!valid_civil(y, month, day, hour, minute, second)) continue;
        auto t = civil_to_micros(y, month, day, hour, minute, second, micros);
        if (!ctx.capture_range) return t;
        auto [lo, hi] = *ctx.capture_range;
        EpochMicros distance = t < lo ? lo - t : (t > hi ? t - hi : 0);
        if (!best || distance < best_distance) {
            best = t;
            best_distance = distance;
        }
    }
    return best;
}

/// "MM/DD[/YY]-HH:MM:SS[.ffffff]"
inline std::optional<EpochMicros> parse_fast_timestamp(std::string_view s, const AlertTimeContext& ctx) {
    auto dash = s.find('-');
    if (dash == std::string_view::npos) return std::nullopt;
    auto date = s.substr(0, dash);
    auto clock = s.substr(dash + 1);

    std::vector<std::string_view> parts;
    std::size_t begin = 0;
    for (std::size_t i = 0; i <= date.size(); ++i) {
        if (i == date.size() || date[i] == '/') {
            parts.push_back(date.substr(begin, i - begin));
            begin = i + 1;
        }
    }
    if (parts.size() != 2 && parts.size() != 3) return std::nullopt;
    auto month = parse_int<unsigned>(parts[0]);
    auto day = parse_int<unsigned>(parts[1]);
    if (!month || !day) return std::nullopt;

    if (clock.size() < 8 || clock[2] != ':' || clock[5] != ':') return std::nullopt;
    auto hour = parse_int<int>(clock.substr(0, 2));
    auto minute = parse_int<int>(clock.substr(3, 2));
    auto second = parse_int<int>(clock.substr(6, 2));
    if (!hour || !minute || !second) return std::nullopt;
    std::int64_t micros = 0;
    if (clock.size() > 8) {
        if (clock[8] != '.') return std::nullopt;
        auto f = parse_fraction(clock.substr(9));
        if (!f) return std::nullopt;
        micros = *f;
    }

    if (parts.size() == 3) {
        auto yy = parse_int<int>(parts[2]);
        if (!yy || parts[2].size() != 2) return std::nullopt;
        int year = *yy < 70 ? 2000 + *yy : 1900 + *yy;
        if (!valid_civil(year, *month, *day, *hour, *minute, *second)) return std::nullopt;
        return civil_to_micros(year, *month, *day, *hour, *minute, *second, micros);
    }
    return resolve_yearless(ctx, *month, *day, *hour, *minute, *second, micros);
}

/// "a.b.c.d[:port]" or "[v6][:port]" or a bare IPv6 address.
inline std::optional<std::pair<IpAddress, std::optional<std::uint16_t>>> parse_endpoint(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '[') {
        auto close = s.find(']');
        if (close == std::string_view::npos) return std::nullopt;
        auto addr = IpAddress::parse(s.substr(1, close - 1));
        if (!addr) return std::nullopt;
        auto rest = s.substr(close + 1);
        if (rest.empty()) return std::pair{*addr, std::optional<std::uint16_t>{}};
        if (rest.front() != ':') return std::nullopt;
        auto port = parse_int<std::uint16_t>(rest.substr(1));
        if (!port) return std::nullopt;
        return std::pair{*addr, std::optional<std::uint16_t>{*port}};
    }
    if (auto whole = IpAddress::parse(s)) return std::pair{*whole, std::optional<std::uint16_t>{}};
    auto colon = s.rfind(':');
    if (colon == std::string_view::npos) return std::nullopt;
    auto addr = IpAddress::parse(s.substr(0, colon));
    auto port = parse_int<std::uint16_t>(s.substr(colon + 1));
    if (!addr || !port) return std::nullopt;
    return std::pair{*addr, std::optional<std::uint16_t>{*port}};
}

/// Parses "{PROTO} src -> dst" into a tuple, or returns a reason.
inline std::variant<FiveTuple, std::string> parse_fast_endpoints(std::string_view s) {
    s = trim(s);
    if (s.empty() || s.front() != '{') return std::string("expected {PROTO}");
    auto close = s.find('}');
    if (close == std::string_view::npos) return std::string("unterminated {PROTO}");
    auto protocol = parse_protocol(s.substr(1, close - 1));
    if (!protocol) return "unknown protocol '" + std::string(s.substr(1, close - 1)) + "'";
    auto rest = s.substr(close + 1);
    auto arrow = rest.find("->");
    if (arrow == std::string_view::npos) return std::string("missing '->'");
    auto src = parse_endpoint(rest.substr(0, arrow));
    auto dst = parse_endpoint(rest.substr(arrow + 2));
    if (!src || !dst) return std::string("bad endpoint");
    FiveTuple t;
    t.addr_a = src->first;
    t.addr_b = dst->first;
    t.protocol = *protocol;
    if (has_ports(*protocol)) {
        if (!src->second || !dst->second) return std::string("missing port");
        t.port_a = *src->second;
        t.port_b = *dst->second;
    }
    return t;
}

inline std::variant<AlertRecord, std::string> parse_fast_line(std::string_view line, const AlertTimeContext& ctx) {
    auto s = trim(line);
    if (s.empty()) return std::string("empty line");

    auto ws = s.find_first_of(" \t");
    if (ws == std::string_view::npos) return std::string("missing alert body");
    AlertRecord rec;
    auto ts = parse_fast_timestamp(s.substr(0, ws), ctx);
    if (!ts) return "bad timestamp '" + std::string(s.substr(0, ws)) + "'";
    rec.timestamp = *ts;
    s = trim(s.substr(ws));

    if (s.rfind("[**]", 0) != 0) return std::string("missing [**] marker");
    s = trim(s.substr(4));
    if (s.empty() || s.front() != '[') return std::string("missing [gid:sid:rev]");
    auto close = s.find(']');
    if (close == std::string_view::npos) return std::string("missing [gid:sid:rev]");
    auto sig = Signature::parse(s.substr(1, close - 1));
    if (!sig) return "bad signature '" + std::string(s.substr(1, close - 1)) + "'";
    if (sig->sid < 1) return std::string("signature id must be positive");
    rec.signature = *sig;
    s = s.substr(close + 1);

    auto end_marker = s.find("[**]");
    if (end_marker == std::string_view::npos) return std::string("missing closing [**] marker");
    auto message = trim(s.substr(0, end_marker));
    if (message.size() >= 2 && message.front() == '"' && message.back() == '"')
        message = message.substr(1, message.size() - 2);
    rec.message = std::string(message);
    s = trim(s.substr(end_marker + 4));

    while (!s.empty() && s.front() == '[') {
        auto end = s.find(']');
        if (end == std::string_view::npos) return std::string("unterminated bracket");
        auto field = s.substr(1, end - 1);
        if (field.rfind("Classification:", 0) == 0) {
            rec.classification = std::string(trim(field.substr(15)));
        } else if (field.rfind("Priority:", 0) == 0) {
            auto p = parse_int<std::int64_t>(field.substr(9));
            if (!p) return std::string("bad priority");
            rec.priority = *p;
        }
        s = trim(s.substr(end + 1));
    }
    if (!s.empty()) {
        auto endpoints = parse_fast_endpoints(s);
        if (auto* reason = std::get_if<std::string>(&endpoints)) return *reason;
        rec.tuple = std::get<FiveTuple>(endpoints);
    }
    return rec;
}

}  // namespace detail

/// Parses fast-format alert lines:
///   MM/DD[/YY]-HH:MM:SS.ffffff [**] [gid:sid:rev] msg [**] [Classification: c] [Priority: n] {PROTO} a:p -> b:p
/// The classification, priority and endpoint parts are optional.
inline AlertParse parse_snort_fast(std::istream& in, const std::string& ruleset, const AlertTimeContext& ctx = {}) {
    AlertParse out;
    auto lines = read_lines(in);
    out.total_lines = lines.size();
    for (std::size_t i = 0; i < lines.size(); ++i) {
        auto result = detail::parse_fast_line(lines[i], ctx);
        if (auto* reason = std::get_if<std::string>(&result)) {
            out.rejects.push_back({i + 1, std::move(*reason)});
        } else {
            detail::add_alert(out, std::move(std::get<AlertRecord>(result)), ruleset);
        }
    }
    return out;
}

namespace detail {

enum class EveOutcome { alert, skipped };

inline std::variant<AlertRecord, EveOutcome, std::string> parse_eve_line(const std::string& line) {
    if (trim(line).empty()) return std::string("empty line");
    auto doc = nlohmann::json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) return std::string("malformed record");
    auto type = doc.find("event_type");
    if (type == doc.end() || !type->is_string()) return std::string("missing event_type");
    if (type->get<std::string>() != "alert") return EveOutcome::skipped;

    auto string_field = [&](const char* key) -> std::optional<std::string> {
        auto it = doc.find(key);
        if (it == doc.end() || !it->is_string()) return std::nullopt;
        return it->get<std::string>();
    };
    auto uint_field = [](const nlohmann::json& obj, const char* key) -> std::optional<std::uint64_t> {
        auto it = obj.find(key);
        if (it == obj.end() || !it->is_number_unsigned()) return std::nullopt;
        return it->get<std::uint64_t>();
    };

    AlertRecord rec;
    auto ts_text = string_field("timestamp");
    if (!ts_text) return std::string("missing timestamp");
    auto ts = parse_iso_time(*ts_text);
    if (!ts) return "bad timestamp '" + *ts_text + "'";
    rec.timestamp = *ts;

    auto alert = doc.find("alert");
    if (alert == doc.end() || !alert->is_object()) return std::string("missing alert object");
    auto sid = uint_field(*alert, "signature_id");
    if (!sid || *sid < 1 || *sid > 0xFFFFFFFFu) return std::string("missing or bad alert.signature_id");
    rec.signature.sid = static_cast<std::uint32_t>(*sid);
    if (alert->contains("gid")) {
        auto gid = uint_field(*alert, "gid");
        if (!gid || *gid > 0xFFFFFFFFu) return std::string("bad alert.gid");
        rec.signature.gid = static_cast<std::uint32_t>(*gid);
    }
    if (alert->contains("rev")) {
        auto rev = uint_field(*alert, "rev");
        if (!rev || *rev > 0xFFFFFFFFu) return std::string("bad alert.rev");
        rec.signature.rev = static_cast<std::uint32_t>(*rev);
    }
    if (auto msg = alert->find("signature"); msg != alert->end() && msg->is_string())
        rec.message = msg->get<std::string>();
    if (auto cat = alert->find("category"); cat != alert->end() && cat->is_string())
        rec.classification = cat->get<std::string>();
    if (auto sev = alert->find("severity"); sev != alert->end() && sev->is_number_integer())
        rec.priority = sev->get<std::int64_t>();

    auto src = string_field("src_ip");
    auto dst = string_field("dest_ip");
    auto proto_it = doc.find("proto");
    if (!src) return std::string("missing src_ip");
    if (!dst) return std::string("missing dest_ip");
    if (proto_it == doc.end()) return std::string("missing proto");
    std::optional<std::uint8_t> protocol;
    if (proto_it->is_string()) protocol = parse_protocol(proto_it->get<std::string>());
    else if (proto_it->is_number_unsigned() && proto_it->get<std::uint64_t>() <= 255)
        protocol = static_cast<std::uint8_t>(proto_it->get<std::uint64_t>());
    if (!protocol) return std::string("bad proto");

    FiveTuple t;
    auto a = IpAddress::parse(*src);
    auto b = IpAddress::parse(*dst);
    if (!a) return "bad src_ip '" + *src + "'";
    if (!b) return "bad dest_ip '" + *dst + "'";
    t.addr_a = *a;
    t.addr_b = *b;
    t.protocol = *protocol;
    if (has_ports(*protocol)) {
        auto sport = uint_field(doc, "src_port");
        auto dport = uint_field(doc, "dest_port");
        if (!sport || *sport > 65535) return std::string("missing or bad src_port");
        if (!dport || *dport > 65535) return std::string("missing or bad dest_port");
        t.port_a = static_cast<std::uint16_t>(*sport);
        t.port_b = static_cast<std::uint16_t>(*dport);
    }
    rec.tuple = t;
    return rec;
}

}  // namespace detail

/// Parses a one-record-per-line structured event log. Only "alert" events
/// produce records; other event types are counted in `skipped`.
inline AlertParse parse_eve(std::istream& in, const std::string& ruleset) {
    AlertParse out;
    auto lines = read_lines(in);
    out.total_lines = lines.size();
    for (std::size_t i = 0; i < lines.size(); ++i) {
        auto result = detail::parse_eve_line(lines[i]);
        if (auto* reason = std::get_if<std::string>(&result)) {
            out.rejects.push_back({i + 1, std::move(*reason)});
        } else if (std::holds_alternative<detail::EveOutcome>(result)) {
            ++out.skipped;
        } else {
            detail::add_alert(out, std::move(std::get<AlertRecord>(result)), ruleset);
        }
    }
    return out;
}

/// Column mapping for delimiter-separated alert files. Required roles:
/// timestamp, sid. Optional: gid, rev, message, priority, and the tuple
/// group src, dst, sport, dport, proto (all or none).
struct AlertCsvSchema {
    char delimiter = ',';
    std::map<std::string, std::string> columns;

    void validate() const {
        for (const char* role : {"timestamp", "sid"}) {
            auto it = columns.find(role);
            if (it == columns.end() || it->second.empty())
                throw ConfigError(std::string("alert csv schema is missing a mapping for '") + role + "'");
        }
        int tuple_roles = 0;
        for (const char* role : {"src", "dst", "sport", "dport", "proto"}) tuple_roles += columns.count(role) ? 1 : 0;
        if (tuple_roles != 0 && tuple_roles != 5)
            throw ConfigError("alert csv schema must map all of src, dst, sport, dport, proto or none");
    }
};

namespace detail {

inline std::variant<AlertRecord, std::string> csv_row_to_alert(const AlertCsvSchema& schema,
                                                               const std::map<std::string, std::string>& row) {
    auto get = [&](const char* role) -> std::optional<std::string> {
        auto c = schema.columns.find(role);
        if (c == schema.columns.end()) return std::nullopt;
        return std::string(trim(row.at(c->second)));
    };
    AlertRecord rec;
    auto ts = parse_time(*get("timestamp"));
    if (!ts) return "bad timestamp '" + *get("timestamp") + "'";
    rec.timestamp = *ts;
    auto sid = parse_int<std::uint32_t>(*get("sid"));
    if (!sid || *sid < 1) return "bad signature id '" + *get("sid") + "'";
    rec.signature.sid = *sid;
    if (auto g = get("gid"); g && !g->empty()) {
        auto gid = parse_int<std::uint32_t>(*g);
        if (!gid) return "bad generator id '" + *g + "'";
        rec.signature.gid = *gid;
    }
    if (auto r = get("rev"); r && !r->empty()) {
        auto rev = parse_int<std::uint32_t>(*r);
        if (!rev) return "bad revision '" + *r + "'";
        rec.signature.rev = *rev;
    }
    if (auto m = get("message")) rec.message = *m;
    if (auto p = get("priority"); p && !p->empty()) {
        auto priority = parse_int<std::int64_t>(*p);
        if (!priority) return "bad priority '" + *p + "'";
        rec.priority = *priority;
    }
    if (schema.columns.count("src")) {
        auto src = *get("src"), dst = *get("dst"), sport = *get("sport"), dport = *get("dport"), pr = *get("proto");
        bool all_empty = src.empty() && dst.empty() && sport.empty() && dport.empty() && pr.empty();
        if (!all_empty) {
            FiveTuple t;
            auto a = IpAddress::parse(src);
            auto b = IpAddress::parse(dst);
            auto protocol = parse_protocol(pr);
            if (!a || !b) return std::string("bad endpoint address");
            if (!protocol) return "bad protocol '" + pr + "'";
            t.addr_a = *a;
            t.addr_b = *b;
            t.protocol = *protocol;
            if (has_ports(*protocol)) {
                auto sp = parse_int<std::uint16_t>(sport);
                auto dp = parse_int<std::uint16_t>(dport);
                if (!sp || !dp) return std::string("bad port");
                t.port_a = *sp;
                t.port_b = *dp;
            }
            rec.tuple = t;
        }
    }
    return rec;
}

}  // namespace detail

/// The header row and blank lines count as skipped.
inline AlertParse parse_generic_alert_csv(std::istream& in, const AlertCsvSchema& schema, const std::string& ruleset) {
    schema.validate();
    AlertParse out;
    auto lines = read_lines(in);
    out.total_lines = lines.size();
    std::optional<std::vector<std::string>> header;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (detail::trim(lines[i]).empty()) {
            ++out.skipped;
            continue;
        }
        auto cells = split_delimited(lines[i], schema.delimiter);
        if (!header) {
            if (!cells) throw ConfigError("unreadable header row in alert file");
            for (auto& c : *cells) c = std::string(detail::trim(c));
            for (const auto& [role, column] : schema.columns) {
                if (std::find(cells->begin(), cells->end(), column) == cells->end())
                    throw ConfigError("alert file has no column '" + column + "' (mapped from '" + role + "')");
            }
            header = std::move(cells);
            ++out.skipped;
            continue;
        }
        if (!cells) {
            out.rejects.push_back({i + 1, "unterminated quote"});
            continue;
        }
        if (cells->size() != header->size()) {
            out.rejects.push_back({i + 1, "expected " + std::to_string(header->size()) + " columns, found " +
                                              std::to_string(cells->size())});
            continue;
        }
        std::map<std::string, std::string> row;
        for (std::size_t c = 0; c < header->size(); ++c) row[(*header)[c]] = (*cells)[c];
        auto result = detail::csv_row_to_alert(schema, row);
        if (auto* reason = std::get_if<std::string>(&result)) {
            out.rejects.push_back({i + 1, std::move(*reason)});
        } else {
            detail::add_alert(out, std::move(std::get<AlertRecord>(result)), ruleset);
        }
    }
    return out;
}

}  // namespace fnroot
