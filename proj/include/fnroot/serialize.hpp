#pragma once

// JSON forms of every record type, report and configuration object. Stores
// are written one compact object per line; nlohmann::json keeps object keys
// sorted, so output is byte-stable for equal values.

#include <initializer_list>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "fnroot/alerts.hpp"
#include "fnroot/capture.hpp"
#include "fnroot/correlate.hpp"
#include "fnroot/flows.hpp"
#include "fnroot/rootcause.hpp"
#include "fnroot/verdict.hpp"

namespace fnroot {

using Json = nlohmann::json;

namespace detail {

inline void require_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& what) {
    if (!j.is_object()) throw ConfigError(what + " must be an object");
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw ConfigError("unknown key '" + key + "' in " + what);
    }
}

template <typename T>
std::optional<T> opt(const Json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<T>();
}

}  // namespace detail

inline Json to_json(const FiveTuple& t) {
    return {{"src", t.addr_a.to_string()},
            {"dst", t.addr_b.to_string()},
            {"sport", t.port_a},
            {"dport", t.port_b},
            {"proto", t.protocol}};
}

inline FiveTuple tuple_from_json(const Json& j) {
    FiveTuple t;
    auto a = IpAddress::parse(j.at("src").get<std::string>());
    auto b = IpAddress::parse(j.at("dst").get<std::string>());
    if (!a || !b) throw std::runtime_error("bad address in stored tuple");
    t.addr_a = *a;
    t.addr_b = *b;
    t.port_a = j.at("sport").get<std::uint16_t>();
    t.port_b = j.at("dport").get<std::uint16_t>();
    t.protocol = j.at("proto").get<std::uint8_t>();
    return t;
}

// ---------------------------------------------------------------------------
// Store records

inline Json to_json(const PacketRecord& p) {
    Json j{{"id", p.packet_id}, {"ts", p.timestamp}, {"ip_len", p.ip_length}, {"payload_len", p.payload_length},
           {"orig_len", p.original_length}};
    if (p.tuple) j["tuple"] = to_json(*p.tuple);
    if (p.tcp_flags) j["tcp_flags"] = *p.tcp_flags;
    if (p.unkeyed_reason) j["unkeyed"] = *p.unkeyed_reason;
    return j;
}

inline PacketRecord packet_from_json(const Json& j) {
    PacketRecord p;
    p.packet_id = j.at("id").get<std::uint64_t>();
    p.timestamp = j.at("ts").get<EpochMicros>();
    p.ip_length = j.at("ip_len").get<std::uint32_t>();
    p.payload_length = j.at("payload_len").get<std::uint32_t>();
    p.original_length = j.value("orig_len", std::uint32_t{0});
    if (j.contains("tuple")) p.tuple = tuple_from_json(j.at("tuple"));
    p.tcp_flags = detail::opt<std::uint8_t>(j, "tcp_flags");
    p.unkeyed_reason = detail::opt<std::string>(j, "unkeyed");
    return p;
}

inline Json to_json(const FlowRecord& f) {
    Json history = Json::array();
    for (const auto& h : f.history)
        history.push_back({{"previous_tag", to_string(h.previous_tag)},
                           {"previous_source", to_string(h.previous_source)},
                           {"overlay", h.overlay_index},
                           {"rationale", h.rationale}});
    return {{"id", f.flow_id},
            {"tuple", to_json(f.tuple)},
            {"start", f.start},
            {"stop", f.stop},
            {"tag", to_string(f.tag)},
            {"tag_source", to_string(f.tag_source)},
            {"packets", f.packet_count},
            {"bytes", f.byte_count},
            {"alert", f.alert_flag},
            {"mapped_packets", f.mapped_packets},
            {"history", history}};
}

inline FlowRecord flow_from_json(const Json& j) {
    FlowRecord f;
    f.flow_id = j.at("id").get<FlowId>();
    f.tuple = tuple_from_json(j.at("tuple"));
    f.start = j.at("start").get<EpochMicros>();
    f.stop = j.at("stop").get<EpochMicros>();
    auto tag = parse_tag(j.at("tag").get<std::string>());
    auto source = parse_tag_source(j.at("tag_source").get<std::string>());
    if (!tag || !source) throw std::runtime_error("bad tag in stored flow");
    f.tag = *tag;
    f.tag_source = *source;
    f.packet_count = j.at("packets").get<std::uint64_t>();
    f.byte_count = j.at("bytes").get<std::uint64_t>();
    f.alert_flag = j.at("alert").get<bool>();
    f.mapped_packets = j.value("mapped_packets", std::uint64_t{0});
    for (const auto& h : j.value("history", Json::array())) {
        TagChange c;
        c.previous_tag = parse_tag(h.at("previous_tag").get<std::string>()).value_or(Tag::untagged);
        c.previous_source = parse_tag_source(h.at("previous_source").get<std::string>()).value_or(TagSource::dataset);
        c.overlay_index = h.at("overlay").get<std::size_t>();
        c.rationale = h.at("rationale").get<std::string>();
        f.history.push_back(std::move(c));
    }
    return f;
}

inline Json to_json(const AlertRecord& a) {
    Json j{{"id", a.alert_id},
           {"ts", a.timestamp},
           {"sig", a.signature.to_string()},
           {"msg", a.message},
           {"ruleset", a.ruleset}};
    if (a.tuple) j["tuple"] = to_json(*a.tuple);
    if (a.priority) j["priority"] = *a.priority;
    if (a.classification) j["classification"] = *a.classification;
    return j;
}

inline AlertRecord alert_from_json(const Json& j) {
    AlertRecord a;
    a.alert_id = j.at("id").get<AlertId>();
    a.timestamp = j.at("ts").get<EpochMicros>();
    auto sig = Signature::parse(j.at("sig").get<std::string>());
    if (!sig) throw std::runtime_error("bad signature in stored alert");
    a.signature = *sig;
    a.message = j.at("msg").get<std::string>();
    a.ruleset = j.at("ruleset").get<std::string>();
    if (j.contains("tuple")) a.tuple = tuple_from_json(j.at("tuple"));
    a.priority = detail::opt<std::int64_t>(j, "priority");
    a.classification = detail::opt<std::string>(j, "classification");
    return a;
}

inline Json to_json(const MappingEntry& e) {
    return {{"subject", e.subject}, {"flows", e.flow_ids}, {"mode", to_string(e.mode)}, {"slack", e.slack}};
}

inline MappingEntry mapping_from_json(const Json& j) {
    MappingEntry e;
    e.subject = j.at("subject").get<std::uint64_t>();
    e.flow_ids = j.at("flows").get<std::vector<FlowId>>();
    auto mode = parse_mapping_mode(j.at("mode").get<std::string>());
    if (!mode) throw std::runtime_error("bad mapping mode in store");
    e.mode = *mode;
    e.slack = j.at("slack").get<EpochMicros>();
    return e;
}

inline Json to_json(const FlowVerdict& v) {
    Json evidence = Json::array();
    for (const auto& e : v.evidence) evidence.push_back({{"alert", e.alert_id}, {"representative", e.representative}});
    Json j{{"flow", v.flow_id},
           {"tag", to_string(v.tag)},
           {"class", to_string(v.verdict)},
           {"evidence", evidence},
           {"overlap", v.scenario_overlap}};
    if (v.scenario) j["scenario"] = *v.scenario;
    return j;
}

inline FlowVerdict verdict_from_json(const Json& j) {
    FlowVerdict v;
    v.flow_id = j.at("flow").get<FlowId>();
    v.tag = parse_tag(j.at("tag").get<std::string>()).value_or(Tag::untagged);
    auto cls = parse_verdict_class(j.at("class").get<std::string>());
    if (!cls) throw std::runtime_error("bad verdict class in store");
    v.verdict = *cls;
    for (const auto& e : j.at("evidence"))
        v.evidence.push_back({e.at("alert").get<AlertId>(), e.at("representative").get<bool>()});
    v.scenario_overlap = j.value("overlap", false);
    v.scenario = detail::opt<std::string>(j, "scenario");
    return v;
}

inline Json to_json(const LabelReject& r) { return {{"entry", r.entry}, {"reason", r.reason}}; }
inline Json to_json(const AlertReject& r) { return {{"line", r.line}, {"reason", r.reason}}; }

inline Json to_json(const DuplicateReport& report) {
    Json groups = Json::array();
    for (const auto& g : report.groups)
        groups.push_back({{"kept", g.kept_id},
                          {"merged", g.merged_ids},
                          {"tag", to_string(g.resolved_tag)},
                          {"conflict", g.tag_conflict}});
    return {{"groups", groups}};
}

// ---------------------------------------------------------------------------
// Reports

inline Json to_json(const SignatureCount& s) {
    return {{"signature", s.signature.to_string()}, {"message", s.message}, {"count", s.count}};
}

inline Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

inline Json to_json(const PayloadProfile& p) {
    Json per_flow = Json::object();
    for (const auto& [id, bytes] : p.payload_by_flow) per_flow[std::to_string(id)] = bytes;
    return {{"flow_count", p.flow_count},
            {"flows_with_packets", p.flows_with_packets},
            {"zero_payload_flows", p.zero_payload_flows},
            {"handshake_only_flows", p.handshake_only_flows},
            {"no_packet_flows", p.no_packet_flows},
            {"mean_payload_bytes", optional_number(p.mean_payload_bytes)},
            {"attributions", p.attributions},
            {"relaxed_attributions", p.relaxed_attributions},
            {"payload_by_flow", per_flow}};
}

inline Json to_json(const ConfusionSummary& s) {
    Json counts = Json::object();
    for (auto c : kAllVerdictClasses) counts[to_string(c)] = s.count(c);
    return {{"counts", counts},
            {"total", s.total},
            {"untagged", s.untagged},
            {"detection_rate", optional_number(s.detection_rate)},
            {"false_positive_rate", optional_number(s.false_positive_rate)}};
}

inline Json to_json(const Report& r) {
    Json scenarios = Json::array();
    for (const auto& s : r.scenarios) {
        Json counts = Json::object();
        for (const auto& [c, n] : s.class_counts) counts[to_string(c)] = n;
        Json misleading = Json::array(), representative = Json::array();
        for (const auto& m : s.misleading_signatures) misleading.push_back(to_json(m));
        for (const auto& m : s.representative_signatures) representative.push_back(to_json(m));
        scenarios.push_back({{"scenario", s.scenario},
                             {"category", s.category ? Json(to_string(*s.category)) : Json(nullptr)},
                             {"in_ids_scope", s.in_ids_scope},
                             {"attack_flows", s.attack_flows},
                             {"fn_flow_counts", counts},
                             {"misleading_signatures", misleading},
                             {"representative_signatures", representative},
                             {"payload_profile", to_json(s.payload)},
                             {"unattributable_alert_count", s.unattributable_alerts},
                             {"notes", s.notes}});
    }
    const auto& g = r.summary;
    return {{"report-format-version", kReportFormatVersion},
            {"ruleset", r.ruleset},
            {"summary",
             {{"confusion", to_json(g.confusion)},
              {"flows", g.flows},
              {"packets", g.packets},
              {"alerts", g.alerts},
              {"unattributable_alerts", g.unattributable_alerts},
              {"overlay_tagged_flows", g.overlay_tagged_flows},
              {"no_packet_flows", g.no_packet_flows},
              {"scenario_overlaps", g.scenario_overlaps}}},
            {"scenarios", scenarios}};
}

inline Json to_json(const DetectionDiff& d) {
    Json scenarios = Json::array();
    for (const auto& s : d.scenarios)
        scenarios.push_back({{"scenario", s.scenario},
                             {"a_only", s.a_only},
                             {"b_only", s.b_only},
                             {"both", s.both},
                             {"neither", s.neither}});
    return {{"report-format-version", kReportFormatVersion},
            {"ruleset_a", d.ruleset_a},
            {"ruleset_b", d.ruleset_b},
            {"scenarios", scenarios}};
}

// ---------------------------------------------------------------------------
// Configuration objects

/// Integer epoch microseconds, or a string holding ISO-8601 time or decimal
/// epoch seconds.
inline EpochMicros time_from_json(const Json& j, const std::string& what) {
    if (j.is_number_integer()) return j.get<EpochMicros>();
    if (j.is_string()) {
        if (auto t = parse_time(j.get<std::string>())) return *t;
    }
    throw ConfigError("bad time value for " + what + ": " + j.dump());
}

inline TuplePattern tuple_pattern_from_json(const Json& j) {
    detail::require_keys(j, {"src", "dst", "sport", "dport", "proto", "either_direction"}, "tuple pattern");
    TuplePattern p;
    auto address = [&](const char* key) -> std::optional<AddressPattern> {
        if (!j.contains(key)) return std::nullopt;
        auto a = AddressPattern::parse(j.at(key).get<std::string>());
        if (!a) throw ConfigError(std::string("bad address pattern for '") + key + "'");
        return a;
    };
    p.src = address("src");
    p.dst = address("dst");
    if (j.contains("sport")) p.src_port = j.at("sport").get<std::uint16_t>();
    if (j.contains("dport")) p.dst_port = j.at("dport").get<std::uint16_t>();
    if (j.contains("proto")) {
        const auto& v = j.at("proto");
        auto proto = v.is_string() ? parse_protocol(v.get<std::string>())
                                   : std::optional<std::uint8_t>(v.get<std::uint8_t>());
        if (!proto) throw ConfigError("bad protocol in tuple pattern");
        p.protocol = proto;
    }
    p.either_direction = j.value("either_direction", false);
    return p;
}

inline TimeWindow window_from_json(const Json& j) {
    detail::require_keys(j, {"from", "to"}, "time window");
    TimeWindow w;
    if (j.contains("from")) w.from = time_from_json(j.at("from"), "window.from");
    if (j.contains("to")) w.to = time_from_json(j.at("to"), "window.to");
    return w;
}

inline OverlayEntry overlay_from_json(const Json& j) {
    detail::require_keys(j, {"selector", "window", "tag", "rationale"}, "overlay entry");
    OverlayEntry e;
    if (j.contains("selector")) e.selector = tuple_pattern_from_json(j.at("selector"));
    if (j.contains("window")) e.window = window_from_json(j.at("window"));
    auto tag = parse_tag(j.value("tag", std::string("attack")));
    if (!tag || *tag == Tag::untagged) throw ConfigError("overlay tag must be 'attack' or 'normal'");
    e.new_tag = *tag;
    e.rationale = j.value("rationale", std::string());
    return e;
}

inline SignaturePattern signature_pattern_from_json(const Json& j) {
    if (j.is_string()) {
        // "gid:sid:rev" with '*' wildcards, or a bare message substring.
        auto text = j.get<std::string>();
        auto parts = split_delimited(text, ':');
        if (parts && parts->size() == 3) {
            SignaturePattern p;
            bool numeric = true;
            std::optional<std::uint32_t>* slots[] = {&p.gid, &p.sid, &p.rev};
            for (std::size_t i = 0; i < 3; ++i) {
                if ((*parts)[i] == "*") continue;
                auto v = detail::parse_int<std::uint32_t>((*parts)[i]);
                if (!v) numeric = false;
                else *slots[i] = *v;
            }
            if (numeric) return p;
        }
        SignaturePattern p;
        p.message = text;
        return p;
    }
    detail::require_keys(j, {"gid", "sid", "rev", "message"}, "signature pattern");
    SignaturePattern p;
    p.gid = detail::opt<std::uint32_t>(j, "gid");
    p.sid = detail::opt<std::uint32_t>(j, "sid");
    p.rev = detail::opt<std::uint32_t>(j, "rev");
    p.message = detail::opt<std::string>(j, "message");
    return p;
}

inline AttackScenario scenario_from_json(const Json& j) {
    detail::require_keys(j, {"name", "category", "scope", "expected_signatures", "in_ids_scope"}, "scenario");
    AttackScenario s;
    if (!j.contains("name")) throw ConfigError("scenario without a name");
    s.name = j.at("name").get<std::string>();
    auto category = parse_category(j.value("category", std::string("I")));
    if (!category) throw ConfigError("bad category for scenario '" + s.name + "'");
    s.category = *category;
    s.in_ids_scope = j.value("in_ids_scope", AttackScenario::default_in_scope(s.category));
    if (j.contains("scope")) {
        const auto& scope = j.at("scope");
        detail::require_keys(scope, {"patterns", "window"}, "scenario scope");
        for (const auto& p : scope.value("patterns", Json::array())) s.scope.patterns.push_back(tuple_pattern_from_json(p));
        if (scope.contains("window")) s.scope.window = window_from_json(scope.at("window"));
    }
    for (const auto& p : j.value("expected_signatures", Json::array()))
        s.expected_signatures.push_back(signature_pattern_from_json(p));
    return s;
}

inline std::vector<AttackScenario> scenarios_from_json(const Json& j) {
    if (!j.is_array()) throw ConfigError("scenarios must be an array");
    std::vector<AttackScenario> out;
    std::set<std::string> names;
    for (const auto& s : j) {
        out.push_back(scenario_from_json(s));
        if (!names.insert(out.back().name).second) throw ConfigError("duplicate scenario name '" + out.back().name + "'");
    }
    return out;
}

namespace detail {
inline char delimiter_from_json(const Json& j) {
    auto d = j.value("delimiter", std::string(","));
    if (d == "\\t" || d == "tab") return '\t';
    if (d.size() != 1) throw ConfigError("delimiter must be a single character");
    return d[0];
}
}  // namespace detail

inline LabelSchema label_schema_from_json(const Json& j) {
    detail::require_keys(j, {"format", "delimiter", "record_element", "fields", "tag_vocabulary", "protocol_vocabulary"},
                         "flow label schema");
    LabelSchema s;
    auto format = j.value("format", std::string("csv"));
    if (format == "csv" || format == "delimited") s.format = LabelSchema::Format::delimited;
    else if (format == "xml" || format == "markup") s.format = LabelSchema::Format::markup;
    else throw ConfigError("unknown flow label format '" + format + "'");
    s.delimiter = detail::delimiter_from_json(j);
    s.record_element = j.value("record_element", std::string());
    s.fields = j.value("fields", std::map<std::string, std::string>{});
    for (const auto& [word, tag] : j.value("tag_vocabulary", std::map<std::string, std::string>{})) {
        auto t = parse_tag(tag);
        if (!t) throw ConfigError("bad tag '" + tag + "' in tag vocabulary");
        s.tag_vocabulary[word] = *t;
    }
    for (const auto& [word, number] : j.value("protocol_vocabulary", std::map<std::string, unsigned>{})) {
        if (number > 255) throw ConfigError("protocol number out of range for '" + word + "'");
        s.protocol_vocabulary[word] = static_cast<std::uint8_t>(number);
    }
    return s;
}

inline AlertCsvSchema alert_csv_schema_from_json(const Json& j) {
    detail::require_keys(j, {"delimiter", "columns"}, "alert csv schema");
    AlertCsvSchema s;
    s.delimiter = detail::delimiter_from_json(j);
    s.columns = j.value("columns", std::map<std::string, std::string>{});
    return s;
}

inline Json to_json(const TuplePattern& p) {
    Json j = Json::object();
    if (p.src) j["src"] = p.src->to_string();
    if (p.dst) j["dst"] = p.dst->to_string();
    if (p.src_port) j["sport"] = *p.src_port;
    if (p.dst_port) j["dport"] = *p.dst_port;
    if (p.protocol) j["proto"] = *p.protocol;
    if (p.either_direction) j["either_direction"] = true;
    return j;
}

inline Json to_json(const TimeWindow& w) {
    Json j = Json::object();
    if (w.from) j["from"] = *w.from;
    if (w.to) j["to"] = *w.to;
    return j;
}

inline Json to_json(const SignaturePattern& p) {
    Json j = Json::object();
    if (p.gid) j["gid"] = *p.gid;
    if (p.sid) j["sid"] = *p.sid;
    if (p.rev) j["rev"] = *p.rev;
    if (p.message) j["message"] = *p.message;
    return j;
}

inline Json to_json(const OverlayEntry& e) {
    return {{"selector", to_json(e.selector)},
            {"window", to_json(e.window)},
            {"tag", to_string(e.new_tag)},
            {"rationale", e.rationale}};
}

inline Json to_json(const AttackScenario& s) {
    Json patterns = Json::array(), expected = Json::array();
    for (const auto& p : s.scope.patterns) patterns.push_back(to_json(p));
    for (const auto& p : s.expected_signatures) expected.push_back(to_json(p));
    return {{"name", s.name},
            {"category", to_string(s.category)},
            {"scope", {{"patterns", patterns}, {"window", to_json(s.scope.window)}}},
            {"expected_signatures", expected},
            {"in_ids_scope", s.in_ids_scope}};
}

}  // namespace fnroot
