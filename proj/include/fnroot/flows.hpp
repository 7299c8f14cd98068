#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "fnroot/capture.hpp"
#include "fnroot/net.hpp"
#include "fnroot/text.hpp"

namespace fnroot {

using FlowId = std::uint64_t;

enum class Tag { normal, attack, untagged };
enum class TagSource { dataset, overlay, derived };

inline std::string to_string(Tag t) {
    switch (t) {
        case Tag::normal: return "normal";
        case Tag::attack: return "attack";
        case Tag::untagged: return "untagged";
    }
    return "?";
}

inline std::string to_string(TagSource s) {
    switch (s) {
        case TagSource::dataset: return "dataset";
        case TagSource::overlay: return "overlay";
        case TagSource::derived: return "derived";
    }
    return "?";
}

inline std::optional<Tag> parse_tag(std::string_view s) {
    auto v = detail::to_lower(detail::trim(s));
    if (v == "normal") return Tag::normal;
    if (v == "attack") return Tag::attack;
    if (v == "untagged") return Tag::untagged;
    return std::nullopt;
}

inline std::optional<TagSource> parse_tag_source(std::string_view s) {
    if (s == "dataset") return TagSource::dataset;
    if (s == "overlay") return TagSource::overlay;
    if (s == "derived") return TagSource::derived;
    return std::nullopt;
}

/// A tag that was replaced by an overlay entry.
struct TagChange {
    Tag previous_tag = Tag::untagged;
    TagSource previous_source = TagSource::dataset;
    std::size_t overlay_index = 0;
    std::string rationale;

    friend bool operator==(const TagChange&, const TagChange&) = default;
};

struct FlowRecord {
    FlowId flow_id = 0;
    FiveTuple tuple;  // directional, source first
    EpochMicros start = 0;
    EpochMicros stop = 0;
    Tag tag = Tag::untagged;
    TagSource tag_source = TagSource::derived;
    std::uint64_t packet_count = 0;
    std::uint64_t byte_count = 0;
    bool alert_flag = false;
    std::uint64_t mapped_packets = 0;
    std::vector<TagChange> history;

    friend bool operator==(const FlowRecord&, const FlowRecord&) = default;
};

// ---------------------------------------------------------------------------
// Selectors

/// An address or CIDR prefix.
struct AddressPattern {
    IpAddress network;
    unsigned prefix_bits = 32;

    static std::optional<AddressPattern> parse(std::string_view text) {
        auto slash = text.find('/');
        auto addr = IpAddress::parse(detail::trim(text.substr(0, slash)));
        if (!addr) return std::nullopt;
        AddressPattern p{*addr, static_cast<unsigned>(addr->width() * 8)};
        if (slash != std::string_view::npos) {
            auto bits = detail::parse_int<unsigned>(text.substr(slash + 1));
            if (!bits || *bits > p.prefix_bits) return std::nullopt;
            p.prefix_bits = *bits;
        }
        return p;
    }

    bool matches(const IpAddress& a) const { return a.in_prefix(network, prefix_bits); }

    std::string to_string() const {
        auto s = network.to_string();
        if (prefix_bits != network.width() * 8) s += "/" + std::to_string(prefix_bits);
        return s;
    }

    friend bool operator==(const AddressPattern&, const AddressPattern&) = default;
};

/// Conjunction of optional tuple field constraints. With `either_direction`
/// the pattern also matches the reversed tuple.
struct TuplePattern {
    std::optional<AddressPattern> src;
    std::optional<AddressPattern> dst;
    std::optional<std::uint16_t> src_port;
    std::optional<std::uint16_t> dst_port;
    std::optional<std::uint8_t> protocol;
    bool either_direction = false;

    bool matches(const FiveTuple& t) const {
        return matches_oriented(t) || (either_direction && matches_oriented(t.reversed()));
    }

    bool empty() const { return !src && !dst && !src_port && !dst_port && !protocol; }

    friend bool operator==(const TuplePattern&, const TuplePattern&) = default;

private:
    bool matches_oriented(const FiveTuple& t) const {
        if (src && !src->matches(t.addr_a)) return false;
        if (dst && !dst->matches(t.addr_b)) return false;
        if (src_port && *src_port != t.port_a) return false;
        if (dst_port && *dst_port != t.port_b) return false;
        if (protocol && *protocol != t.protocol) return false;
        return true;
    }
};

/// Closed window; a flow matches when its interval overlaps the window.
struct TimeWindow {
    std::optional<EpochMicros> from;
    std::optional<EpochMicros> to;

    bool overlaps(EpochMicros start, EpochMicros stop) const {
        if (from && stop < *from) return false;
        if (to && start > *to) return false;
        return true;
    }

    friend bool operator==(const TimeWindow&, const TimeWindow&) = default;
};

struct FlowPredicate {
    std::optional<Tag> tag;
    std::optional<bool> alert_flag;
    TuplePattern tuple;
    TimeWindow window;

    bool matches(const FlowRecord& f) const {
        if (tag && f.tag != *tag) return false;
        if (alert_flag && f.alert_flag != *alert_flag) return false;
        return tuple.matches(f.tuple) && window.overlaps(f.start, f.stop);
    }
};

/// Matching flows ordered by (start, flow_id).
inline std::vector<FlowRecord> query_flows(std::span<const FlowRecord> flows, const FlowPredicate& predicate) {
    std::vector<FlowRecord> out;
    for (const auto& f : flows)
        if (predicate.matches(f)) out.push_back(f);
    std::sort(out.begin(), out.end(), [](const FlowRecord& a, const FlowRecord& b) {
        return std::tie(a.start, a.flow_id) < std::tie(b.start, b.flow_id);
    });
    return out;
}

inline const char* kPredicateGrammar =
    "predicate: zero or more TERMs separated by spaces, all of which must hold\n"
    "  tag=attack|normal|untagged   alert=true|false\n"
    "  src=ADDR[/BITS]  dst=ADDR[/BITS]  sport=N  dport=N  proto=NAME|N\n"
    "  from=TIME  to=TIME   (ISO-8601 UTC or epoch seconds; keeps flows overlapping the window)";

/// Parses a query such as "tag=attack alert=true dport=80". Returns the
/// predicate or a message naming the offending term.
inline std::variant<FlowPredicate, std::string> parse_flow_predicate(std::string_view text) {
    FlowPredicate p;
    std::set<std::string> seen;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find_first_of(" \t", pos);
        if (end == std::string_view::npos) end = text.size();
        auto term = text.substr(pos, end - pos);
        pos = end + 1;
        if (term.empty()) continue;
        auto eq = term.find('=');
        if (eq == std::string_view::npos || eq == 0 || eq + 1 == term.size())
            return "expected key=value, got '" + std::string(term) + "'";
        auto key = detail::to_lower(term.substr(0, eq));
        auto value = term.substr(eq + 1);
        if (!seen.insert(key).second) return "key '" + key + "' given twice";
        auto bad = [&] { return "bad value for " + key + ": '" + std::string(value) + "'"; };
        if (key == "tag") {
            auto t = parse_tag(value);
            if (!t) return bad();
            p.tag = t;
        } else if (key == "alert") {
            auto v = detail::to_lower(value);
            if (v != "true" && v != "false") return bad();
            p.alert_flag = v == "true";
        } else if (key == "src" || key == "dst") {
            auto a = AddressPattern::parse(value);
            if (!a) return bad();
            (key == "src" ? p.tuple.src : p.tuple.dst) = a;
        } else if (key == "sport" || key == "dport") {
            auto n = detail::parse_int<std::uint16_t>(value);
            if (!n) return bad();
            (key == "sport" ? p.tuple.src_port : p.tuple.dst_port) = n;
        } else if (key == "proto") {
            auto n = parse_protocol(value);
            if (!n) return bad();
            p.tuple.protocol = n;
        } else if (key == "from" || key == "to") {
            auto t = parse_time(value);
            if (!t) return bad();
            (key == "from" ? p.window.from : p.window.to) = t;
        } else {
            return "unknown key '" + key + "'";
        }
    }
    return p;
}

// ---------------------------------------------------------------------------
// Label ingestion

/// Maps flow-record roles to source field names. Required roles: src, dst,
/// sport, dport, proto, start, stop, tag. Optional: packets, bytes.
struct LabelSchema {
    enum class Format { delimited, markup };

    Format format = Format::delimited;
    char delimiter = ',';
    /// Markup only: element name of one record; empty accepts every child of the root.
    std::string record_element;
    std::map<std::string, std::string> fields;
    /// Source tag spelling (case-insensitive) to tag. Empty means {normal, attack}.
    std::map<std::string, Tag> tag_vocabulary;
    /// Source protocol spelling (case-insensitive) to protocol number, consulted
    /// before the built-in names.
    std::map<std::string, std::uint8_t> protocol_vocabulary;

    static inline const std::vector<std::string> kRequiredRoles = {"src",   "dst",  "sport", "dport",
                                                                   "proto", "start", "stop", "tag"};

    void validate() const {
        for (const auto& role : kRequiredRoles) {
            auto it = fields.find(role);
            if (it == fields.end() || it->second.empty())
                throw ConfigError("flow label schema is missing a mapping for '" + role + "'");
        }
    }
};

struct LabelReject {
    std::size_t entry = 0;  // 1-based record number
    std::string reason;

    friend bool operator==(const LabelReject&, const LabelReject&) = default;
};

struct LabelIngest {
    std::vector<FlowRecord> flows;
    std::vector<LabelReject> rejects;
};

namespace detail {

using FieldLookup = std::map<std::string, std::string>;

inline std::optional<Tag> lookup_tag(const LabelSchema& schema, const std::string& value) {
    auto v = to_lower(trim(value));
    if (schema.tag_vocabulary.empty()) {
        if (v == "attack") return Tag::attack;
        if (v == "normal") return Tag::normal;
        return std::nullopt;
    }
    for (const auto& [word, tag] : schema.tag_vocabulary)
        if (to_lower(word) == v) return tag;
    return std::nullopt;
}

inline std::optional<std::uint8_t> lookup_protocol(const LabelSchema& schema, const std::string& value) {
    auto v = to_lower(trim(value));
    for (const auto& [word, number] : schema.protocol_vocabulary)
        if (to_lower(word) == v) return number;
    return parse_protocol(v);
}

/// Builds one flow from role->value pairs, or returns a reject reason.
inline std::variant<FlowRecord, std::string> label_entry_to_flow(const LabelSchema& schema, const FieldLookup& values) {
    auto get = [&](const std::string& role) -> std::optional<std::string> {
        auto f = schema.fields.find(role);
        if (f == schema.fields.end()) return std::nullopt;
        auto v = values.find(f->second);
        if (v == values.end()) return std::nullopt;
        return std::string(trim(v->second));
    };
    for (const auto& role : LabelSchema::kRequiredRoles)
        if (!get(role)) return "missing field '" + schema.fields.at(role) + "'";

    FlowRecord f;
    auto src = IpAddress::parse(*get("src"));
    auto dst = IpAddress::parse(*get("dst"));
    if (!src) return "bad source address '" + *get("src") + "'";
    if (!dst) return "bad destination address '" + *get("dst") + "'";
    auto protocol = lookup_protocol(schema, *get("proto"));
    if (!protocol) return "unknown protocol '" + *get("proto") + "'";
    f.tuple.addr_a = *src;
    f.tuple.addr_b = *dst;
    f.tuple.protocol = *protocol;
    if (has_ports(*protocol)) {
        auto sport = parse_int<std::uint16_t>(*get("sport"));
        auto dport = parse_int<std::uint16_t>(*get("dport"));
        if (!sport) return "bad source port '" + *get("sport") + "'";
        if (!dport) return "bad destination port '" + *get("dport") + "'";
        f.tuple.port_a = *sport;
        f.tuple.port_b = *dport;
    }
    auto start = parse_time(*get("start"));
    auto stop = parse_time(*get("stop"));
    if (!start) return "bad start time '" + *get("start") + "'";
    if (!stop) return "bad stop time '" + *get("stop") + "'";
    if (*stop < *start) return "inverted interval";
    f.start = *start;
    f.stop = *stop;
    auto tag = lookup_tag(schema, *get("tag"));
    if (!tag) return "unknown tag '" + *get("tag") + "'";
    f.tag = *tag;
    f.tag_source = TagSource::dataset;
    for (auto [role, field] : {std::pair{"packets", &f.packet_count}, std::pair{"bytes", &f.byte_count}}) {
        if (auto v = get(role); v && !v->empty()) {
            auto n = parse_int<std::uint64_t>(*v);
            if (!n) return std::string("bad ") + role + " count '" + *v + "'";
            *field = *n;
        }
    }
    return f;
}

inline void collect(LabelIngest& out, const LabelSchema& schema, std::size_t entry, const FieldLookup& values) {
    auto result = label_entry_to_flow(schema, values);
    if (auto* reason = std::get_if<std::string>(&result)) {
        out.rejects.push_back({entry, std::move(*reason)});
        return;
    }
    auto& flow = std::get<FlowRecord>(result);
    flow.flow_id = out.flows.size() + 1;
    out.flows.push_back(std::move(flow));
}

inline LabelIngest ingest_delimited_labels(std::istream& in, const LabelSchema& schema) {
    LabelIngest out;
    auto lines = read_lines(in);
    std::size_t first = 0;
    while (first < lines.size() && trim(lines[first]).empty()) ++first;
    if (first == lines.size()) return out;
    auto header = split_delimited(lines[first], schema.delimiter);
    if (!header) throw ConfigError("unreadable header row in flow label file");
    for (auto& h : *header) h = std::string(trim(h));
    for (const auto& role : LabelSchema::kRequiredRoles) {
        if (std::find(header->begin(), header->end(), schema.fields.at(role)) == header->end())
            throw ConfigError("flow label file has no column '" + schema.fields.at(role) + "'");
    }

    std::size_t entry = 0;
    for (std::size_t i = first + 1; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        ++entry;
        auto cells = split_delimited(lines[i], schema.delimiter);
        if (!cells) {
            out.rejects.push_back({entry, "unterminated quote"});
            continue;
        }
        if (cells->size() != header->size()) {
            out.rejects.push_back({entry, "expected " + std::to_string(header->size()) + " columns, found " +
                                              std::to_string(cells->size())});
            continue;
        }
        FieldLookup values;
        for (std::size_t c = 0; c < header->size(); ++c) values[(*header)[c]] = (*cells)[c];
        collect(out, schema, entry, values);
    }
    return out;
}

inline LabelIngest ingest_markup_labels(std::istream& in, const LabelSchema& schema) {
    namespace pt = boost::property_tree;
    pt::ptree doc;
    try {
        pt::read_xml(in, doc);
    } catch (const pt::xml_parser_error& e) {
        throw std::runtime_error(std::string("malformed flow label document: ") + e.what());
    }
    LabelIngest out;
    std::size_t entry = 0;
    for (const auto& [root_name, root] : doc) {
        if (root_name == "<xmlcomment>" || root_name == "<xmlattr>") continue;
        for (const auto& [name, node] : root) {
            if (name == "<xmlattr>" || name == "<xmlcomment>") continue;
            if (!schema.record_element.empty() && name != schema.record_element) continue;
            ++entry;
            FieldLookup values;
            for (const auto& [child_name, child] : node) {
                if (child_name == "<xmlattr>") {
                    for (const auto& [attr, value] : child) values[attr] = value.data();
                } else if (child_name != "<xmlcomment>") {
                    values[child_name] = child.data();
                }
            }
            collect(out, schema, entry, values);
        }
    }
    return out;
}

}  // namespace detail

/// One FlowRecord per accepted entry, ids assigned 1.. in entry order.
/// Entries that fail to parse land in `rejects`; a schema missing a
/// required role throws ConfigError before any entry is read.
inline LabelIngest ingest_flow_labels(std::istream& in, const LabelSchema& schema) {
    schema.validate();
    if (schema.format == LabelSchema::Format::markup) return detail::ingest_markup_labels(in, schema);
    return detail::ingest_delimited_labels(in, schema);
}

// ---------------------------------------------------------------------------
// Flow derivation

inline constexpr EpochMicros kDefaultIdleTimeout = 60 * kMicrosPerSecond;

/// Groups keyed packets by directional tuple; a gap larger than
/// `idle_timeout` between consecutive packets of one tuple starts a new flow.
/// Flow ids are assigned in (start, tuple) order.
inline std::vector<FlowRecord> derive_flows(std::span<const PacketRecord> packets,
                                            EpochMicros idle_timeout = kDefaultIdleTimeout) {
    if (idle_timeout <= 0) throw std::invalid_argument("idle timeout must be positive");

    std::map<FiveTuple, std::vector<const PacketRecord*>> by_tuple;
    for (const auto& p : packets)
        if (p.keyed()) by_tuple[*p.tuple].push_back(&p);

    std::vector<FlowRecord> flows;
    for (auto& [tuple, group] : by_tuple) {
        std::stable_sort(group.begin(), group.end(),
                         [](const PacketRecord* a, const PacketRecord* b) { return a->timestamp < b->timestamp; });
        FlowRecord* current = nullptr;
        for (const auto* p : group) {
            if (current == nullptr || p->timestamp - current->stop > idle_timeout) {
                FlowRecord f;
                f.tuple = tuple;
                f.start = f.stop = p->timestamp;
                f.tag = Tag::untagged;
                f.tag_source = TagSource::derived;
                flows.push_back(f);
                current = &flows.back();
            }
            current->stop = p->timestamp;
            current->packet_count += 1;
            current->byte_count += p->ip_length;
        }
    }
    std::sort(flows.begin(), flows.end(), [](const FlowRecord& a, const FlowRecord& b) {
        return std::tie(a.start, a.tuple, a.stop) < std::tie(b.start, b.tuple, b.stop);
    });
    for (std::size_t i = 0; i < flows.size(); ++i) flows[i].flow_id = i + 1;
    return flows;
}

// ---------------------------------------------------------------------------
// Deduplication

struct DuplicateGroup {
    FlowId kept_id = 0;
    std::vector<FlowId> merged_ids;
    Tag resolved_tag = Tag::untagged;
    bool tag_conflict = false;

    friend bool operator==(const DuplicateGroup&, const DuplicateGroup&) = default;
};

struct DuplicateReport {
    std::vector<DuplicateGroup> groups;
    friend bool operator==(const DuplicateReport&, const DuplicateReport&) = default;
};

struct DedupeResult {
    std::vector<FlowRecord> flows;
    DuplicateReport report;
};

namespace detail {
inline int tag_rank(Tag t) {
    switch (t) {
        case Tag::attack: return 2;
        case Tag::normal: return 1;
        case Tag::untagged: return 0;
    }
    return 0;
}
}  // namespace detail

/// Merges flows with identical (tuple, start, stop). The first occurrence is
/// kept; attack outranks normal, which outranks untagged.
inline DedupeResult dedupe_flows(std::span<const FlowRecord> flows) {
    using Key = std::tuple<FiveTuple, EpochMicros, EpochMicros>;
    std::map<Key, std::size_t> first_index;
    DedupeResult out;
    std::map<std::size_t, DuplicateGroup> groups;  // by output position

    for (const auto& f : flows) {
        Key key{f.tuple, f.start, f.stop};
        auto [it, inserted] = first_index.emplace(key, out.flows.size());
        if (inserted) {
            out.flows.push_back(f);
            continue;
        }
        auto& kept = out.flows[it->second];
        auto& group = groups[it->second];
        group.kept_id = kept.flow_id;
        group.merged_ids.push_back(f.flow_id);
        if (f.tag != kept.tag) group.tag_conflict = true;
        if (detail::tag_rank(f.tag) > detail::tag_rank(kept.tag)) {
            kept.tag = f.tag;
            kept.tag_source = f.tag_source;
        }
        kept.packet_count = std::max(kept.packet_count, f.packet_count);
        kept.byte_count = std::max(kept.byte_count, f.byte_count);
        kept.alert_flag = kept.alert_flag || f.alert_flag;
        group.resolved_tag = kept.tag;
    }
    for (auto& [pos, group] : groups) out.report.groups.push_back(std::move(group));
    return out;
}

// ---------------------------------------------------------------------------
// Ground-truth overlays

struct OverlayEntry {
    TuplePattern selector;
    TimeWindow window;
    Tag new_tag = Tag::attack;
    std::string rationale;
};

struct OverlayResult {
    std::vector<FlowRecord> flows;
    std::vector<std::size_t> dead_entries;  // indices of entries that matched nothing
    std::size_t retagged = 0;
};

/// Applies entries in order; each match records the replaced tag in the
/// flow's history.
inline OverlayResult apply_overlay(std::span<const FlowRecord> flows, std::span<const OverlayEntry> overlay) {
    OverlayResult out;
    out.flows.assign(flows.begin(), flows.end());
    std::vector<bool> touched(out.flows.size(), false);
    for (std::size_t i = 0; i < overlay.size(); ++i) {
        const auto& entry = overlay[i];
        bool any = false;
        for (std::size_t k = 0; k < out.flows.size(); ++k) {
            auto& f = out.flows[k];
            if (!entry.selector.matches(f.tuple) || !entry.window.overlaps(f.start, f.stop)) continue;
            any = true;
            touched[k] = true;
            f.history.push_back({f.tag, f.tag_source, i, entry.rationale});
            f.tag = entry.new_tag;
            f.tag_source = TagSource::overlay;
        }
        if (!any) out.dead_entries.push_back(i);
    }
    out.retagged = static_cast<std::size_t>(std::count(touched.begin(), touched.end(), true));
    return out;
}

}  // namespace fnroot
