#pragma once

// Frame builders and small labelled datasets for tests and demos. Every
// dataset is fully determined by its arguments.

#include <algorithm>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fnroot/alerts.hpp"
#include "fnroot/capture.hpp"
#include "fnroot/flows.hpp"
#include "fnroot/serialize.hpp"
#include "fnroot/verdict.hpp"

namespace fnroot::synthetic {

struct FrameSpec {
    FiveTuple tuple;
    std::uint8_t tcp_flags = tcp_flag::kAck;
    std::uint32_t payload_length = 0;
    /// Extra TCP option bytes (rounded up to a multiple of 4).
    std::uint32_t tcp_option_bytes = 0;
    bool vlan = false;
    std::uint32_t link_type = linktype::kEthernet;
    /// Nonzero makes an IPv4 non-first fragment.
    std::uint16_t fragment_offset = 0;
};

namespace detail {

inline void put16(std::vector<std::uint8_t>& b, std::uint16_t v) {
    b.push_back(static_cast<std::uint8_t>(v >> 8));
    b.push_back(static_cast<std::uint8_t>(v));
}

inline void put32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    put16(b, static_cast<std::uint16_t>(v >> 16));
    put16(b, static_cast<std::uint16_t>(v));
}

inline void put_addr(std::vector<std::uint8_t>& b, const IpAddress& a) {
    auto n = a.family() == IpAddress::Family::v4 ? 4 : 16;
    b.insert(b.end(), a.bytes().begin(), a.bytes().begin() + n);
}

inline std::uint16_t ipv4_checksum(const std::uint8_t* h, std::size_t n) {
    std::uint32_t sum = 0;
    for (std::size_t i = 0; i + 1 < n; i += 2) sum += std::uint32_t(h[i]) << 8 | h[i + 1];
    while (sum >> 16) sum = (sum & 0xFFFF) + (sum >> 16);
    return static_cast<std::uint16_t>(~sum);
}

inline std::vector<std::uint8_t> transport(const FrameSpec& s) {
    std::vector<std::uint8_t> t;
    const auto& tu = s.tuple;
    switch (tu.protocol) {
        case proto::kTcp: {
            std::uint32_t options = (s.tcp_option_bytes + 3) / 4 * 4;
            put16(t, tu.port_a);
            put16(t, tu.port_b);
            put32(t, 1000);
            put32(t, (s.tcp_flags & tcp_flag::kAck) ? 2000 : 0);
            t.push_back(static_cast<std::uint8_t>(((20 + options) / 4) << 4));
            t.push_back(s.tcp_flags);
            put16(t, 65535);
            put16(t, 0);
            put16(t, 0);
            t.insert(t.end(), options, 0x01);
            break;
        }
        case proto::kUdp:
            put16(t, tu.port_a);
            put16(t, tu.port_b);
            put16(t, static_cast<std::uint16_t>(8 + s.payload_length));
            put16(t, 0);
            break;
        case proto::kIcmp:
        case proto::kIcmpV6:
            t.push_back(tu.protocol == proto::kIcmp ? 8 : 128);
            t.insert(t.end(), 7, 0);
            break;
        default:
            break;
    }
    t.insert(t.end(), s.payload_length, 'A');
    return t;
}

}  // namespace detail

/// Builds a well-formed frame for `spec.link_type` (Ethernet or raw IP).
inline std::vector<std::uint8_t> build_frame(const FrameSpec& spec) {
    auto l4 = detail::transport(spec);
    std::vector<std::uint8_t> ip;
    bool v6 = spec.tuple.addr_a.family() == IpAddress::Family::v6;
    if (!v6) {
        ip.push_back(0x45);
        ip.push_back(0);
        detail::put16(ip, static_cast<std::uint16_t>(20 + l4.size()));
        detail::put16(ip, 0x1234);
        detail::put16(ip, spec.fragment_offset ? static_cast<std::uint16_t>(spec.fragment_offset & 0x1FFF) : 0x4000);
        ip.push_back(64);
        ip.push_back(spec.tuple.protocol);
        detail::put16(ip, 0);
        detail::put_addr(ip, spec.tuple.addr_a);
        detail::put_addr(ip, spec.tuple.addr_b);
        auto sum = detail::ipv4_checksum(ip.data(), 20);
        ip[10] = static_cast<std::uint8_t>(sum >> 8);
        ip[11] = static_cast<std::uint8_t>(sum);
    } else {
        detail::put32(ip, 0x60000000);
        detail::put16(ip, static_cast<std::uint16_t>(l4.size()));
        ip.push_back(spec.tuple.protocol);
        ip.push_back(64);
        detail::put_addr(ip, spec.tuple.addr_a);
        detail::put_addr(ip, spec.tuple.addr_b);
    }
    ip.insert(ip.end(), l4.begin(), l4.end());
    if (spec.link_type != linktype::kEthernet) return ip;

    std::vector<std::uint8_t> frame{0x00, 0x11, 0x22, 0x33, 0x44, 0x55, 0x00, 0x66, 0x77, 0x88, 0x99, 0xaa};
    if (spec.vlan) {
        detail::put16(frame, 0x8100);
        detail::put16(frame, 100);
    }
    detail::put16(frame, v6 ? 0x86DD : 0x0800);
    frame.insert(frame.end(), ip.begin(), ip.end());
    return frame;
}

/// Builds and decodes a frame, keeping the bytes.
inline PacketRecord make_packet(const FrameSpec& spec, EpochMicros ts, std::uint64_t id = 1) {
    auto frame = build_frame(spec);
    auto rec = decode_packet(frame, spec.link_type, ts);
    rec.packet_id = id;
    rec.frame = std::move(frame);
    rec.original_length = static_cast<std::uint32_t>(rec.frame.size());
    return rec;
}

inline FiveTuple tcp(const std::string& src, std::uint16_t sport, const std::string& dst, std::uint16_t dport) {
    return {*IpAddress::parse(src), *IpAddress::parse(dst), sport, dport, proto::kTcp};
}

inline std::string two(unsigned v) {
    std::string s = std::to_string(v);
    return s.size() < 2 ? "0" + s : s;
}

/// One fast-format line; the year is dropped unless `with_year`.
inline std::string format_fast_alert(const AlertRecord& a, bool with_year = false) {
    auto days = std::chrono::floor<std::chrono::days>(std::chrono::sys_time<std::chrono::microseconds>(
        std::chrono::microseconds(a.timestamp)));
    std::chrono::year_month_day ymd{days};
    auto micros = a.timestamp - std::chrono::duration_cast<std::chrono::microseconds>(days.time_since_epoch()).count();
    auto secs = micros / kMicrosPerSecond;
    char frac[8];
    std::snprintf(frac, sizeof frac, "%06lld", static_cast<long long>(micros % kMicrosPerSecond));

    std::ostringstream os;
    os << two(unsigned(ymd.month())) << '/' << two(unsigned(ymd.day()));
    if (with_year) os << '/' << two(static_cast<unsigned>(int(ymd.year()) % 100));
    os << '-' << two(unsigned(secs / 3600)) << ':' << two(unsigned(secs / 60 % 60)) << ':' << two(unsigned(secs % 60))
       << '.' << frac << "  [**] [" << a.signature.to_string() << "] " << a.message << " [**]";
    if (a.classification) os << " [Classification: " << *a.classification << ']';
    if (a.priority) os << " [Priority: " << *a.priority << ']';
    if (a.tuple) {
        auto endpoint = [&](const IpAddress& ip, std::uint16_t port) {
            std::string s = ip.family() == IpAddress::Family::v6 ? "[" + ip.to_string() + "]" : ip.to_string();
            return has_ports(a.tuple->protocol) ? s + ":" + std::to_string(port) : s;
        };
        auto name = protocol_name(a.tuple->protocol);
        os << " {" << name << "} " << endpoint(a.tuple->addr_a, a.tuple->port_a) << " -> "
           << endpoint(a.tuple->addr_b, a.tuple->port_b);
    }
    return os.str();
}

/// One EVE JSON alert event.
inline std::string format_eve_alert(const AlertRecord& a) {
    Json alert{{"gid", a.signature.gid},
               {"signature_id", a.signature.sid},
               {"rev", a.signature.rev},
               {"signature", a.message}};
    if (a.classification) alert["category"] = *a.classification;
    if (a.priority) alert["severity"] = *a.priority;
    Json j{{"timestamp", format_time(a.timestamp)}, {"event_type", "alert"}, {"alert", alert}};
    if (a.tuple) {
        j["src_ip"] = a.tuple->addr_a.to_string();
        j["dest_ip"] = a.tuple->addr_b.to_string();
        j["proto"] = protocol_name(a.tuple->protocol);
        if (has_ports(a.tuple->protocol)) {
            j["src_port"] = a.tuple->port_a;
            j["dest_port"] = a.tuple->port_b;
        }
    }
    return j.dump();
}

/// Accumulates labelled flows, their packets and per-ruleset alerts.
class Dataset {
public:
    FlowId add_flow(const FiveTuple& tuple, EpochMicros start, EpochMicros stop, Tag tag) {
        FlowRecord f;
        f.flow_id = flows_.size() + 1;
        f.tuple = tuple;
        f.start = start;
        f.stop = stop;
        f.tag = tag;
        flows_.push_back(f);
        return f.flow_id;
    }

    void add_packet(const FrameSpec& spec, EpochMicros ts) {
        auto p = make_packet(spec, ts, packets_.size() + 1);
        for (auto& f : flows_) {
            if (f.tuple == spec.tuple && f.start <= ts && ts <= f.stop) {
                ++f.packet_count;
                f.byte_count += p.ip_length;
            }
        }
        packets_.push_back(std::move(p));
    }

    AlertId add_alert(const std::string& ruleset, EpochMicros ts, Signature sig, const std::string& message,
                      std::optional<FiveTuple> tuple, std::optional<std::int64_t> priority = std::nullopt,
                      std::optional<std::string> classification = std::nullopt) {
        auto& list = alerts_[ruleset];
        AlertRecord a;
        a.alert_id = list.size() + 1;
        a.timestamp = ts;
        a.signature = sig;
        a.message = message;
        a.tuple = tuple;
        a.ruleset = ruleset;
        a.priority = priority;
        a.classification = classification;
        list.push_back(a);
        return a.alert_id;
    }

    /// Declares a ruleset that produced no alerts.
    void add_ruleset(const std::string& ruleset) { alerts_[ruleset]; }

    void add_overlay(OverlayEntry e) { overlay_.push_back(std::move(e)); }
    void add_scenario(AttackScenario s) { scenarios_.push_back(std::move(s)); }

    const std::vector<FlowRecord>& flows() const { return flows_; }
    const std::vector<PacketRecord>& packets() const { return packets_; }
    const std::vector<OverlayEntry>& overlay() const { return overlay_; }
    const std::vector<AttackScenario>& scenarios() const { return scenarios_; }

    const std::vector<AlertRecord>& alerts(const std::string& ruleset) const {
        static const std::vector<AlertRecord> kNone;
        auto it = alerts_.find(ruleset);
        return it == alerts_.end() ? kNone : it->second;
    }

    /// Packets ordered by time, renumbered 1..n as a capture would list them.
    std::vector<PacketRecord> capture_order() const {
        auto out = packets_;
        std::stable_sort(out.begin(), out.end(),
                         [](const PacketRecord& a, const PacketRecord& b) { return a.timestamp < b.timestamp; });
        for (std::size_t i = 0; i < out.size(); ++i) out[i].packet_id = i + 1;
        return out;
    }

    std::vector<std::uint8_t> capture_bytes(CaptureMetadata meta = {}) const {
        auto ordered = capture_order();
        meta.packet_count = ordered.size();
        return write_capture(meta, ordered);
    }

    /// Comma-separated labels with a header row; times in ISO-8601 UTC.
    std::string label_csv() const {
        std::ostringstream os;
        os << "src,sport,dst,dport,proto,start,stop,tag\n";
        for (const auto& f : flows_) {
            os << f.tuple.addr_a.to_string() << ',' << f.tuple.port_a << ',' << f.tuple.addr_b.to_string() << ','
               << f.tuple.port_b << ',' << protocol_name(f.tuple.protocol) << ',' << format_time(f.start) << ','
               << format_time(f.stop) << ',' << (f.tag == Tag::attack ? "Attack" : "Normal") << '\n';
        }
        return os.str();
    }

    std::string fast_log(const std::string& ruleset) const {
        std::string out;
        for (const auto& a : alerts(ruleset)) out += format_fast_alert(a) + "\n";
        return out;
    }

    /// EVE output with a couple of non-alert events mixed in, as real logs have.
    std::string eve_log(const std::string& ruleset) const {
        std::string out;
        for (const auto& a : alerts(ruleset)) {
            out += format_eve_alert(a) + "\n";
            Json flow{{"timestamp", format_time(a.timestamp)}, {"event_type", "flow"}};
            out += flow.dump() + "\n";
        }
        return out;
    }

    /// Configuration fragment matching `label_csv()`, the overlay and the scenarios.
    Json config(int base_year) const {
        Json overlays = Json::array(), scenarios = Json::array();
        for (const auto& e : overlay_) overlays.push_back(to_json(e));
        for (const auto& s : scenarios_) scenarios.push_back(to_json(s));
        return {{"base_year", base_year},
                {"flow_schema",
                 {{"format", "csv"},
                  {"fields",
                   {{"src", "src"},
                    {"sport", "sport"},
                    {"dst", "dst"},
                    {"dport", "dport"},
                    {"proto", "proto"},
                    {"start", "start"},
                    {"stop", "stop"},
                    {"tag", "tag"}}}}},
                {"overlays", overlays},
                {"scenarios", scenarios}};
    }

private:
    std::vector<FlowRecord> flows_;
    std::vector<PacketRecord> packets_;
    std::map<std::string, std::vector<AlertRecord>> alerts_;
    std::vector<OverlayEntry> overlay_;
    std::vector<AttackScenario> scenarios_;
};

// ---------------------------------------------------------------------------
// Cases. Each adds labelled flows, packets, alerts and a scenario to a
// dataset. Times fall on 2010-06-14 (UTC) at different hours.

inline const std::string kSnort = "snort";
inline const std::string kSuricata = "suricata";
inline constexpr int kCaseYear = 2010;

inline EpochMicros case_time(int hour, double seconds = 0) {
    return civil_to_micros(kCaseYear, 6, 14, hour, 0, 0, 0) + static_cast<EpochMicros>(seconds * 1e6);
}

inline TuplePattern to_host(const std::string& dst, std::optional<std::uint16_t> dport) {
    TuplePattern p;
    p.dst = AddressPattern::parse(dst);
    p.dst_port = dport;
    p.protocol = proto::kTcp;
    return p;
}

inline SignaturePattern message_pattern(const std::string& m) {
    SignaturePattern p;
    p.message = m;
    return p;
}

struct SqlInjectionCase {
    std::size_t attack_flows = 62;
    std::vector<std::size_t> alerted = {3, 17, 30, 51};
    std::size_t normal_flows = 20;
};

/// Attack flows against a web server, a few of which draw a stream
/// preprocessor alert and none a web-attack signature.
inline void add_sql_injection(Dataset& d, const SqlInjectionCase& c = {}) {
    for (std::size_t i = 0; i < c.attack_flows; ++i) {
        auto tuple = tcp("192.168.2.112", static_cast<std::uint16_t>(4387 + i), "192.168.5.123", 80);
        auto t0 = case_time(14, 20.0 * double(i));
        d.add_flow(tuple, t0, t0 + 2 * kMicrosPerSecond, Tag::attack);
        d.add_packet({tuple, tcp_flag::kSyn}, t0);
        d.add_packet({tuple, tcp_flag::kAck}, t0 + 100'000);
        d.add_packet({tuple, tcp_flag::kPsh | tcp_flag::kAck, 140}, t0 + 500'000);
        d.add_packet({tuple, tcp_flag::kFin | tcp_flag::kAck}, t0 + 1'500'000);
        if (std::find(c.alerted.begin(), c.alerted.end(), i) != c.alerted.end())
            d.add_alert(kSnort, t0 + 500'000, {129, 12, 1}, "Consecutive TCP small segments exceeding threshold", tuple,
                        3, "Potentially Bad Traffic");
    }
    for (std::size_t i = 0; i < c.normal_flows; ++i) {
        auto tuple = tcp("192.168.3.10" + std::to_string(i % 10), static_cast<std::uint16_t>(50000 + i),
                         "192.168.5.123", 80);
        auto t0 = case_time(14, 7.0 + 30.0 * double(i));
        d.add_flow(tuple, t0, t0 + kMicrosPerSecond, Tag::normal);
        d.add_packet({tuple, tcp_flag::kPsh | tcp_flag::kAck, 300}, t0 + 200'000);
    }
    AttackScenario s;
    s.name = "sql-injection";
    s.category = AttackCategory::vulnerability;
    s.scope.patterns = {to_host("192.168.5.123", 80)};
    s.expected_signatures = {message_pattern("sql injection"), message_pattern("sql union select")};
    d.add_scenario(s);
}

/// A stack overflow over SMB that one ruleset misses entirely and the
/// other detects with a dedicated signature.
inline void add_smb_overflow(Dataset& d) {
    auto tuple = tcp("192.168.2.112", 1046, "192.168.2.113", 445);
    auto t0 = case_time(16);
    d.add_flow(tuple, t0, t0 + 4 * kMicrosPerSecond, Tag::attack);
    d.add_packet({tuple, tcp_flag::kSyn}, t0);
    d.add_packet({tuple, tcp_flag::kAck}, t0 + 50'000);
    for (int k = 0; k < 3; ++k) d.add_packet({tuple, tcp_flag::kPsh | tcp_flag::kAck, 1200}, t0 + 1'000'000 * (k + 1));
    d.add_packet({tuple, tcp_flag::kFin | tcp_flag::kAck}, t0 + 4 * kMicrosPerSecond);
    d.add_alert(kSuricata, t0 + 2 * kMicrosPerSecond, {1, 2008705, 5},
                "ET NETBIOS Microsoft Windows NETAPI Stack Overflow Inbound - MS08-067 (15)", tuple, 1,
                "Attempted Administrator Privilege Gain");
    d.add_ruleset(kSnort);

    for (int i = 0; i < 3; ++i) {
        auto normal = tcp("192.168.2.10" + std::to_string(i + 4), static_cast<std::uint16_t>(1100 + i), "192.168.2.113",
                          445);
        auto n0 = case_time(16, 60.0 * (i + 1));
        d.add_flow(normal, n0, n0 + kMicrosPerSecond, Tag::normal);
        d.add_packet({normal, tcp_flag::kPsh | tcp_flag::kAck, 400}, n0 + 100'000);
        if (i == 0)
            d.add_alert(kSnort, n0 + 100'000, {1, 2465, 7}, "NETBIOS SMB-DS IPC$ share access", normal, 3,
                        "Generic Protocol Command Decode");
    }

    AttackScenario s;
    s.name = "smb-stack-overflow";
    s.category = AttackCategory::vulnerability;
    s.scope.patterns = {to_host("192.168.2.113", 445)};
    s.scope.window = {t0 - kMicrosPerSecond, t0 + 10 * kMicrosPerSecond};
    s.expected_signatures = {message_pattern("MS08-067"), message_pattern("netapi")};
    d.add_scenario(s);
}

struct SlowlorisCase {
    std::size_t flows = 1969;
    /// Every n-th flow carries a zero-length PSH-only segment.
    std::size_t push_every = 10;
    /// Every n-th flow draws a sensitive-data preprocessor alert.
    std::size_t alert_every = 400;
};

/// Many connections that hold a web server open with headers that never
/// complete; no packet carries payload.
inline void add_slowloris(Dataset& d, const SlowlorisCase& c = {}) {
    for (std::size_t i = 0; i < c.flows; ++i) {
        auto src = "192.168.2." + std::to_string(105 + i % 4);
        auto tuple = tcp(src, static_cast<std::uint16_t>(30000 + i / 4), "192.168.5.122", 80);
        auto t0 = case_time(18, 0.5 * double(i));
        auto t1 = t0 + 10 * kMicrosPerSecond;
        d.add_flow(tuple, t0, t1, Tag::attack);
        d.add_packet({tuple, tcp_flag::kSyn}, t0);
        d.add_packet({tuple, tcp_flag::kAck}, t0 + 50'000);
        if (i % c.push_every == 0) d.add_packet({tuple, tcp_flag::kPsh}, t0 + 5 * kMicrosPerSecond);
        d.add_packet({tuple, tcp_flag::kFin | tcp_flag::kAck}, t1);
        if (i % c.alert_every == 0)
            d.add_alert(kSnort, t0 + 50'000, {139, 1, 1}, "(spp_sdf) SDF Combination Alert", tuple, 2,
                        "Sensitive Data");
    }
    AttackScenario s;
    s.name = "slowloris";
    s.category = AttackCategory::vulnerability;
    s.scope.patterns = {to_host("192.168.5.122", 80)};
    s.expected_signatures = {message_pattern("slowloris"), message_pattern("http header flood")};
    d.add_scenario(s);
}

/// A mail client fetching a PDF that exploits a reader vulnerability. The
/// labels call the POP flow normal; an overlay corrects that.
inline void add_adobe_printf(Dataset& d) {
    auto client = tcp("192.168.1.105", 1050, "192.168.5.122", 110);
    auto server = client.reversed();
    auto t0 = case_time(10);
    d.add_flow(client, t0, t0 + 60 * kMicrosPerSecond, Tag::normal);
    d.add_packet({client, tcp_flag::kSyn}, t0);
    d.add_packet({client, tcp_flag::kAck}, t0 + 20'000);
    for (int k = 0; k < 5; ++k) d.add_packet({client, tcp_flag::kPsh | tcp_flag::kAck, 12}, t0 + 1'000'000 * (k + 1));
    d.add_packet({client, tcp_flag::kFin | tcp_flag::kAck}, t0 + 59 * kMicrosPerSecond);
    for (int k = 0; k < 2; ++k)
        d.add_alert(kSnort, t0 + 2'000'000 + 1000 * k, {139, 1, 1}, "(spp_sdf) SDF Combination Alert", server, 2,
                    "Sensitive Data");
    for (int k = 0; k < 8; ++k)
        d.add_alert(kSnort, t0 + 3'000'000 + 500'000 * k, {129, 12, 1},
                    "Consecutive TCP small segments exceeding threshold", server, 3, "Potentially Bad Traffic");

    OverlayEntry o;
    o.selector.src = AddressPattern::parse("192.168.5.122");
    o.selector.src_port = 110;
    o.selector.dst = AddressPattern::parse("192.168.1.105");
    o.selector.either_direction = true;
    o.window = {t0, t0 + 60 * kMicrosPerSecond};
    o.new_tag = Tag::attack;
    o.rationale = "mail carried a PDF exploiting util.printf in the reader";
    d.add_overlay(o);

    AttackScenario s;
    s.name = "adobe-printf";
    s.category = AttackCategory::vulnerability;
    TuplePattern p;
    p.src = AddressPattern::parse("192.168.1.105");
    p.dst_port = 110;
    p.either_direction = true;
    s.scope.patterns = {p};
    s.expected_signatures = {message_pattern("util.printf"), message_pattern("pdf")};
    d.add_scenario(s);
}

/// Password guessing against SSH. Not something a signature IDS is asked
/// to catch, so its flows are out of scope.
inline void add_ssh_brute_force(Dataset& d, std::size_t flows = 10) {
    for (std::size_t i = 0; i < flows; ++i) {
        auto tuple = tcp("192.168.2.108", static_cast<std::uint16_t>(40000 + i), "192.168.5.122", 22);
        auto t0 = case_time(20, 3.0 * double(i));
        d.add_flow(tuple, t0, t0 + 2 * kMicrosPerSecond, Tag::attack);
        d.add_packet({tuple, tcp_flag::kPsh | tcp_flag::kAck, 64}, t0 + 500'000);
    }
    AttackScenario s;
    s.name = "ssh-brute-force";
    s.category = AttackCategory::brute_force;
    s.in_ids_scope = AttackScenario::default_in_scope(s.category);
    s.scope.patterns = {to_host("192.168.5.122", 22)};
    d.add_scenario(s);
}

/// All cases together plus one alert without endpoints.
inline Dataset demo_dataset() {
    Dataset d;
    add_adobe_printf(d);
    add_sql_injection(d);
    add_smb_overflow(d);
    add_slowloris(d);
    add_ssh_brute_force(d);
    d.add_alert(kSnort, case_time(21), {139, 1, 1}, "(spp_sdf) SDF Combination Alert", std::nullopt, 2);
    return d;
}

}  // namespace fnroot::synthetic
