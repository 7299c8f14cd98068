// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

#include "cli.hpp"
#include "test_support.hpp"

using namespace fnroot;
using namespace fnroot::synthetic;
namespace t = fnroot::testkit;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

/// Collects failed checks; the first few are kept for the report line.
class Checker {
public:
    void check(bool ok, const std::string& what) {
        if (ok) return;
        ++failures_;
        if (failures_ <= 3) messages_ += (messages_.empty() ? "" : "; ") + what;
    }
    Outcome outcome(std::string detail) const {
        if (failures_ == 0) return {true, std::move(detail)};
        return {false, std::to_string(failures_) + " failed check(s): " + messages_};
    }

private:
    std::size_t failures_ = 0;
    std::string messages_;
};

std::string n(std::size_t v) { return std::to_string(v); }

// 1 -------------------------------------------------------------------------
Outcome mapping_oracle() {
    Checker c;
    t::Rng rng(1001);
    auto start = std::chrono::steady_clock::now();
    auto pool = t::tuple_pool(rng, 120);
    EpochMicros horizon = 3600 * kMicrosPerSecond;
    auto flows = t::random_flows(rng, 1000, pool, horizon);
    auto packets = t::random_packets(rng, 10000, pool, horizon);
    EpochMicros tolerance = 2 * kMicrosPerSecond;

    FlowIndex index(flows, Directionality::directional);
    auto indexed_flows = flows;
    auto indexed = map_all_packets(packets, index, tolerance, indexed_flows);
    auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    auto oracle = oracle_map(subjects_of(std::span<const PacketRecord>(packets)), flows, tolerance,
                             Directionality::directional);

    c.check(indexed.size() == oracle.size(), "entry count differs");
    std::size_t mismatches = 0, relaxed = 0, strict = 0;
    std::map<FlowId, std::uint64_t> counts;
    for (std::size_t i = 0; i < indexed.size() && i < oracle.size(); ++i) {
        mismatches += indexed[i] == oracle[i] ? 0 : 1;
        relaxed += oracle[i].mode == MappingMode::relaxed;
        strict += oracle[i].mode == MappingMode::strict;
        for (auto id : oracle[i].flow_ids) ++counts[id];
    }
    c.check(mismatches == 0, n(mismatches) + " entries differ from oracle");
    for (const auto& f : indexed_flows) c.check(f.mapped_packets == counts[f.flow_id], "mapped_packets differs");
    c.check(strict > 0 && relaxed > 0, "fixture does not exercise both strict and relaxed");

    // Bidirectional policy as well, on the same inputs.
    FlowIndex bi(flows, Directionality::bidirectional);
    auto subjects = subjects_of(std::span<const PacketRecord>(packets));
    c.check(map_subjects(subjects, bi, tolerance) == oracle_map(subjects, flows, tolerance, Directionality::bidirectional),
            "bidirectional mapping differs from oracle");
    c.check(elapsed < 10.0, "indexed mapping took " + std::to_string(elapsed) + " s");
    char buf[160];
    std::snprintf(buf, sizeof buf, "10000 packets x 1000 flows identical (%zu strict, %zu relaxed), indexed %.3f s",
                  strict, relaxed, elapsed);
    return c.outcome(buf);
}

// 2 -------------------------------------------------------------------------
Outcome sql_injection() {
    Checker c;
    Dataset d;
    add_sql_injection(d);
    t::Pipeline p(d, kSnort);
    std::size_t attack = 0, alerted = 0;
    for (const auto& f : p.flows) {
        attack += f.tag == Tag::attack;
        alerted += f.tag == Tag::attack && f.alert_flag;
    }
    c.check(attack == 62, "attack flows " + n(attack));
    c.check(alerted == 4, "alerted attack flows " + n(alerted));
    for (const auto& a : p.alerts) c.check(a.signature == Signature{129, 12, 1}, "unexpected signature");
    for (const auto& s : p.scenarios)
        for (const auto& a : p.alerts) c.check(!s.representative(a), "scenario accepts the stream alert");

    auto s = confusion_summary(p.verdicts);
    auto fm = s.count(VerdictClass::fn_semantic), fs = s.count(VerdictClass::fn_syntactic), tp = s.count(VerdictClass::tp);
    c.check(fm == 4, "FN-semantic " + n(fm));
    c.check(fs == 58, "FN-syntactic " + n(fs));
    c.check(tp == 0, "TP " + n(tp));
    return c.outcome("FN-semantic=" + n(fm) + " FN-syntactic=" + n(fs) + " TP=" + n(tp));
}

// 3 -------------------------------------------------------------------------
Outcome smb_diff() {
    Checker c;
    Dataset d;
    add_smb_overflow(d);
    c.check(d.alerts(kSuricata).size() == 1 && d.alerts(kSuricata)[0].signature == Signature{1, 2008705, 5},
            "suricata fixture alert");
    t::Pipeline a(d, kSnort), b(d, kSuricata);
    auto diff = compare_rulesets(a.verdicts, b.verdicts, d.scenarios(), kSnort, kSuricata);
    c.check(diff.scenarios.size() == 1, "scenario count");
    if (!diff.scenarios.empty()) {
        const auto& s = diff.scenarios[0];
        c.check(s.b_only == std::set<FlowId>{1}, "attack flow not in b-only");
        c.check(s.a_only.empty() && s.both.empty() && s.neither.empty(), "other sets not empty");
    }

    t::Rng rng(1003);
    std::size_t flows_checked = 0;
    for (int round = 0; round < 100; ++round) {
        auto pool = t::tuple_pool(rng, t::uniform(rng, 2, 20));
        auto flows = t::random_flows(rng, t::uniform(rng, 10, 200), pool, 300 * kMicrosPerSecond);
        auto scenarios = t::random_scenarios(rng, pool, t::uniform(rng, 0, 4));
        FlowIndex index(flows, Directionality::bidirectional);
        auto va_alerts = t::random_alerts(rng, t::uniform(rng, 0, 300), pool, 300 * kMicrosPerSecond, "a");
        auto vb_alerts = t::random_alerts(rng, t::uniform(rng, 0, 300), pool, 300 * kMicrosPerSecond, "b");
        auto va = classify_flows(flows, va_alerts, map_subjects(subjects_of(std::span<const AlertRecord>(va_alerts)), index),
                                 scenarios);
        auto vb = classify_flows(flows, vb_alerts, map_subjects(subjects_of(std::span<const AlertRecord>(vb_alerts)), index),
                                 scenarios);
        auto r = compare_rulesets(va, vb, scenarios);

        std::map<FlowId, int> seen;
        for (const auto& s : r.scenarios)
            for (const auto* set : {&s.a_only, &s.b_only, &s.both, &s.neither})
                for (auto id : *set) ++seen[id];
        std::map<FlowId, const FlowVerdict*> vb_by_id;
        for (const auto& v : vb) vb_by_id[v.flow_id] = &v;
        for (const auto& v : va) {
            bool in_scope = v.tag == Tag::attack && v.verdict != VerdictClass::out_of_scope;
            c.check(seen[v.flow_id] == (in_scope ? 1 : 0), "flow not covered exactly once");
            if (!in_scope) continue;
            ++flows_checked;
            bool da = v.verdict == VerdictClass::tp, db = vb_by_id[v.flow_id]->verdict == VerdictClass::tp;
            for (const auto& s : r.scenarios) {
                if (!s.a_only.count(v.flow_id) && !s.b_only.count(v.flow_id) && !s.both.count(v.flow_id) &&
                    !s.neither.count(v.flow_id))
                    continue;
                const auto& expected = da && db ? s.both : da ? s.a_only : db ? s.b_only : s.neither;
                c.check(expected.count(v.flow_id) == 1, "flow in the wrong set");
            }
        }
    }
    return c.outcome("flow 1 detected by suricata only; disjoint cover held on 100 pairs (" + n(flows_checked) +
                     " in-scope attack flows)");
}

// 4 -------------------------------------------------------------------------
Outcome slowloris() {
    Checker c;
    Dataset d;
    add_slowloris(d);
    t::Pipeline p(d, kSnort);
    std::set<FlowId> ids;
    for (const auto& v : p.verdicts)
        if (v.scenario == "slowloris") ids.insert(v.flow_id);
    c.check(ids.size() == 1969, "slowloris flows " + n(ids.size()));
    auto prof = payload_profile(ids, p.packet_mapping, p.packets);
    c.check(prof.zero_payload_flows == 1969, "zero-payload flows " + n(prof.zero_payload_flows));

    // Independent tally from the raw packets: a flow is handshake-only when
    // every packet inside its interval carries SYN, ACK, FIN or RST and no payload.
    std::size_t control_only = 0;
    std::uint64_t raw_bytes = 0;
    for (const auto& f : d.flows()) {
        bool all_control = true, any = false;
        for (const auto& pk : d.packets()) {
            if (!pk.tuple || *pk.tuple != f.tuple || pk.timestamp < f.start || pk.timestamp > f.stop) continue;
            any = true;
            raw_bytes += pk.payload_length;
            bool control = pk.tcp_flags && (*pk.tcp_flags & (tcp_flag::kSyn | tcp_flag::kAck | tcp_flag::kFin |
                                                             tcp_flag::kRst)) != 0;
            all_control = all_control && control && pk.payload_length == 0;
        }
        control_only += any && all_control;
    }
    c.check(prof.handshake_only_flows == control_only,
            "handshake-only " + n(prof.handshake_only_flows) + " vs independent " + n(control_only));

    std::uint64_t profile_bytes = 0, mapped_bytes = 0;
    for (const auto& [id, b] : prof.payload_by_flow) profile_bytes += b;
    std::map<std::uint64_t, const PacketRecord*> by_id;
    for (const auto& pk : p.packets) by_id[pk.packet_id] = &pk;
    std::size_t attributions = 0;
    for (const auto& e : p.packet_mapping)
        for (auto id : e.flow_ids)
            if (ids.count(id)) {
                mapped_bytes += by_id[e.subject]->payload_length;
                ++attributions;
            }
    c.check(profile_bytes == mapped_bytes && mapped_bytes == raw_bytes && raw_bytes == 0, "payload conservation");
    c.check(prof.attributions == attributions, "attribution conservation");
    return c.outcome("1969 zero-payload flows, " + n(prof.handshake_only_flows) + " handshake-only (independent " +
                     n(control_only) + "), " + n(attributions) + " attributions conserved");
}

// 5 -------------------------------------------------------------------------
Outcome adobe() {
    Checker c;
    Dataset d;
    add_adobe_printf(d);
    t::Pipeline p(d, kSnort);
    std::set<FlowId> scope;
    for (const auto& v : p.verdicts)
        if (v.scenario == "adobe-printf") scope.insert(v.flow_id);
    c.check(scope.size() == 1, "scenario flows " + n(scope.size()));
    auto freq = signature_frequency(p.alerts, p.alert_mapping.entries, scope);
    c.check(freq.size() == 2, "signature rows " + n(freq.size()));
    std::string got;
    for (const auto& r : freq) got += (got.empty() ? "" : ", ") + r.signature.to_string() + " x" + n(r.count);
    if (freq.size() == 2) {
        c.check(freq[0].signature == Signature{129, 12, 1} && freq[0].count == 8, "first row " + got);
        c.check(freq[1].signature == Signature{139, 1, 1} && freq[1].count == 2, "second row " + got);
    }
    auto report = p.report();
    const auto* s = p.section(report, "adobe-printf");
    c.check(s != nullptr, "no adobe section");
    if (s) {
        c.check(s->misleading_signatures == freq, "misleading signatures differ from frequency");
        c.check(s->representative_signatures.empty(), "representative signatures present");
    }
    return c.outcome(got + ", both misleading");
}

// 6 -------------------------------------------------------------------------
Outcome parser_conservation() {
    Checker c;
    t::Rng rng(1006);
    auto pool = t::tuple_pool(rng, 30);
    auto alerts = t::random_alerts(rng, 1000, pool, 200LL * 86400 * kMicrosPerSecond);
    for (auto& a : alerts) {
        a.timestamp += civil_to_micros(2010, 1, 1, 0, 0, 0, 0);
        if (!a.tuple) a.tuple = pool[0];
    }

    struct Expect {
        std::size_t valid = 0, invalid = 0, skippable = 0;
    };
    auto verify = [&](const char* name, const AlertParse& p, const Expect& e) {
        std::string tag(name);
        c.check(p.total_lines == 1000, tag + " lines " + n(p.total_lines));
        c.check(p.alerts.size() + p.rejects.size() + p.skipped == 1000, tag + " does not conserve lines");
        c.check(p.alerts.size() == e.valid, tag + " parsed " + n(p.alerts.size()) + " of " + n(e.valid));
        c.check(p.rejects.size() == e.invalid, tag + " rejected " + n(p.rejects.size()) + " of " + n(e.invalid));
        c.check(p.skipped == e.skippable, tag + " skipped " + n(p.skipped) + " of " + n(e.skippable));
    };
    auto kind = [&] { return t::uniform(rng, 0, 9); };  // 0-5 valid, 6-7 invalid, 8-9 skippable

    {  // fast: no skippable lines exist; blank lines are rejects
        std::string text;
        Expect e;
        for (std::size_t i = 0; i < 1000; ++i) {
            auto k = kind();
            if (k <= 5) { text += format_fast_alert(alerts[i]) + "\n"; ++e.valid; }
            else if (k <= 7) { text += "06/14-14:00:00 [**] [1:x:1] broken [**]\n"; ++e.invalid; }
            else { text += "\n"; ++e.invalid; }
        }
        std::istringstream in(text);
        verify("fast", parse_snort_fast(in, "r", {2010, std::nullopt}), e);
    }
    {  // eve: non-alert events are skipped
        std::string text;
        Expect e;
        for (std::size_t i = 0; i < 1000; ++i) {
            auto k = kind();
            if (k <= 5) { text += format_eve_alert(alerts[i]) + "\n"; ++e.valid; }
            else if (k <= 7) { text += (k == 6 ? std::string("{\"event_type\": \"alert\"") : std::string("[1,2]")) + "\n"; ++e.invalid; }
            else { text += R"({"event_type":"dns","timestamp":"2010-06-14T14:00:00Z"})" "\n"; ++e.skippable; }
        }
        std::istringstream in(text);
        verify("eve", parse_eve(in, "r"), e);
    }
    {  // csv: header and blank lines are skipped
        AlertCsvSchema schema;
        schema.columns = {{"timestamp", "ts"}, {"sid", "sid"}, {"gid", "gid"}, {"message", "msg"}, {"src", "src"},
                          {"dst", "dst"}, {"sport", "sp"}, {"dport", "dp"}, {"proto", "proto"}};
        std::string text = "ts,gid,sid,msg,src,sp,dst,dp,proto\n";
        Expect e;
        e.skippable = 1;
        for (std::size_t i = 1; i < 1000; ++i) {
            const auto& a = alerts[i];
            auto k = kind();
            if (k <= 5) {
                text += format_time(a.timestamp) + "," + n(a.signature.gid) + "," + n(a.signature.sid) + ",\"" +
                        a.message + "\"," + a.tuple->addr_a.to_string() + "," + n(a.tuple->port_a) + "," +
                        a.tuple->addr_b.to_string() + "," + n(a.tuple->port_b) + "," + protocol_name(a.tuple->protocol) + "\n";
                ++e.valid;
            } else if (k <= 7) {
                text += k == 6 ? "not-a-time,1,5,m,,,,,\n" : "2010-06-14T14:00:00Z,1,5\n";
                ++e.invalid;
            } else {
                text += "\n";
                ++e.skippable;
            }
        }
        std::istringstream in(text);
        verify("csv", parse_generic_alert_csv(in, schema, "r"), e);
    }

    // Decoder fuzz: random bytes and mutated valid frames over every link type.
    std::size_t keyed = 0;
    for (int i = 0; i < 100000; ++i) {
        std::vector<std::uint8_t> frame;
        if (i % 2 == 0) {
            frame.resize(t::uniform(rng, 0, 200));
            for (auto& b : frame) b = static_cast<std::uint8_t>(t::uniform(rng, 0, 255));
        } else {
            FrameSpec spec{t::random_tuple(rng), static_cast<std::uint8_t>(t::uniform(rng, 0, 63)),
                           static_cast<std::uint32_t>(t::uniform(rng, 0, 100))};
            spec.vlan = t::chance(rng, 0.2);
            spec.tcp_option_bytes = static_cast<std::uint32_t>(4 * t::uniform(rng, 0, 3));
            frame = build_frame(spec);
            for (int k = 0, m = int(t::uniform(rng, 0, 4)); k < m; ++k)
                frame[t::uniform(rng, 0, frame.size() - 1)] = static_cast<std::uint8_t>(t::uniform(rng, 0, 255));
            frame.resize(t::uniform(rng, 0, frame.size()));
        }
        auto lt = std::vector<std::uint32_t>{1, 101, 228, 229, 113}[i % 5];
        auto rec = decode_packet(frame, lt, 0);
        keyed += rec.keyed();
        c.check(rec.tuple.has_value() == rec.keyed(), "keyed flag inconsistent");
        c.check(rec.payload_length <= rec.ip_length, "payload exceeds IP length");
    }
    return c.outcome("fast, eve and csv conserve 1000 lines each; 100000 fuzzed frames decoded (" + n(keyed) +
                     " keyed), no aborts");
}

// 7 -------------------------------------------------------------------------
Outcome capture_round_trip() {
    Checker c;
    t::Rng rng(1007);
    std::size_t variants = 0;
    for (auto precision : {TimestampPrecision::microsecond, TimestampPrecision::nanosecond}) {
        for (auto order : {ByteOrder::little, ByteOrder::big}) {
            // One link type per capture; alternate Ethernet and raw IP across variants.
            auto link = variants % 2 == 0 ? linktype::kEthernet : linktype::kRaw;
            std::vector<PacketRecord> packets;
            for (std::size_t i = 0; i < 1000; ++i) {
                FrameSpec spec{t::random_tuple(rng), static_cast<std::uint8_t>(t::uniform(rng, 0, 63)),
                               static_cast<std::uint32_t>(t::uniform(rng, 0, 1400))};
                spec.link_type = link;
                spec.vlan = link == linktype::kEthernet && t::chance(rng, 0.2);
                if (spec.tuple.protocol == proto::kTcp)
                    spec.tcp_option_bytes = static_cast<std::uint32_t>(4 * t::uniform(rng, 0, 10));
                auto ts = static_cast<EpochMicros>(t::uniform(rng, 0, 0xFFFFFFFFULL * kMicrosPerSecond));
                packets.push_back(make_packet(spec, ts, i + 1));
            }
            CaptureMetadata meta{precision, order, link};
            meta.packet_count = packets.size();
            auto bytes = write_capture(meta, packets);
            auto parsed = parse_capture(bytes, {.keep_frames = true});
            c.check(parsed.metadata == meta, "metadata differs");
            c.check(parsed.packets == packets, "packet values differ");
            c.check(write_capture(parsed.metadata, parsed.packets) == bytes, "bytes differ after rewrite");
            ++variants;
        }
    }
    return c.outcome(n(variants) + " variants x 1000 packets byte- and value-identical");
}

// 8 -------------------------------------------------------------------------
Outcome verdict_partition() {
    Checker c;
    t::Rng rng(1008);
    std::size_t flows_total = 0, perturbations = 0;
    for (int round = 0; round < 200; ++round) {
        auto pool = t::tuple_pool(rng, t::uniform(rng, 1, 25));
        EpochMicros horizon = 600 * kMicrosPerSecond;
        auto flows = t::random_flows(rng, t::uniform(rng, 0, 300), pool, horizon);
        auto alerts = t::random_alerts(rng, t::uniform(rng, 0, 500), pool, horizon);
        auto scenarios = t::random_scenarios(rng, pool, t::uniform(rng, 0, 5));
        FlowIndex index(flows, Directionality::bidirectional);
        auto mapping = map_subjects(subjects_of(std::span<const AlertRecord>(alerts)), index,
                                    static_cast<EpochMicros>(t::uniform(rng, 0, 3)) * kMicrosPerSecond);
        auto verdicts = classify_flows(flows, alerts, mapping, scenarios);
        auto s = confusion_summary(verdicts);
        std::size_t sum = 0;
        for (auto cls : kAllVerdictClasses) sum += s.count(cls);
        c.check(sum == flows.size() && s.total == flows.size(), "class counts do not sum to flow count");
        flows_total += flows.size();

        // Pairwise perturbation: grow one scenario's non-empty expected list.
        for (std::size_t k = 0; k < scenarios.size(); ++k) {
            if (scenarios[k].expected_signatures.empty()) continue;
            auto grown = scenarios;
            grown[k].expected_signatures.push_back(t::random_signature_pattern(rng));
            auto after = classify_flows(flows, alerts, mapping, grown);
            ++perturbations;
            for (std::size_t i = 0; i < verdicts.size(); ++i)
                if (verdicts[i].verdict == VerdictClass::tp) c.check(after[i].verdict == VerdictClass::tp, "TP demoted");
        }
    }
    return c.outcome("200 workspaces (" + n(flows_total) + " flows) partitioned; " + n(perturbations) +
                     " perturbations never demoted a TP");
}

// 9 -------------------------------------------------------------------------
std::map<std::string, std::string> snapshot(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = t::slurp(e.path());
    return files;
}

Outcome end_to_end() {
    Checker c;
    t::TempDir dir;
    auto d = demo_dataset();
    dir.write("capture.pcap", d.capture_bytes());
    dir.write("labels.csv", d.label_csv());
    dir.write("snort.fast", d.fast_log(kSnort));
    dir.write("suricata.eve", d.eve_log(kSuricata));
    dir.write("config.json", d.config(kCaseYear).dump(2));
    auto in = [&](const std::string& f) { return (dir / f).string(); };

    auto pipeline = [&](const std::string& ws, bool init) {
        std::vector<std::vector<std::string>> steps;
        if (init) steps.push_back({"init", "--config", in("config.json")});
        steps.push_back({"ingest-pcap", in("capture.pcap")});
        steps.push_back({"ingest-flows", in("labels.csv")});
        steps.push_back({"ingest-alerts", in("snort.fast"), "--format", "snort-fast", "--label", kSnort});
        steps.push_back({"ingest-alerts", in("suricata.eve"), "--format", "eve", "--label", kSuricata});
        steps.push_back({"map"});
        steps.push_back({"classify"});
        steps.push_back({"report"});
        steps.push_back({"compare", kSnort, kSuricata});
        for (auto args : steps) {
            args.insert(args.begin(), {"--quiet", "--workspace", ws});
            std::ostringstream out, err;
            int rc = cli::run(args, out, err);
            c.check(rc == 0, args[3] + " exited " + std::to_string(rc) + ": " + err.str());
        }
    };
    auto ws1 = (dir / "ws1").string(), ws2 = (dir / "ws2").string();
    pipeline(ws1, true);
    auto first = snapshot(ws1);
    pipeline(ws2, true);
    pipeline(ws1, false);  // re-run over a completed workspace
    auto second = snapshot(ws2);
    auto rerun = snapshot(ws1);
    c.check(first.size() > 10, "workspace has only " + n(first.size()) + " files");
    c.check(first == second, "two fresh workspaces differ");
    c.check(first == rerun, "re-running completed stages changed the workspace");

    // The stored report carries the fixture figures.
    auto report = Json::parse(first["reports/snort.json"]);
    std::map<std::string, Json> by_name;
    for (const auto& s : report.at("scenarios")) by_name[s.at("scenario").get<std::string>()] = s;
    c.check(by_name["sql-injection"]["fn_flow_counts"]["FN-semantic"] == 4, "report SQL FN-semantic");
    c.check(by_name["sql-injection"]["fn_flow_counts"]["FN-syntactic"] == 58, "report SQL FN-syntactic");
    c.check(by_name["slowloris"]["payload_profile"]["zero_payload_flows"] == 1969, "report slowloris zero payload");
    c.check(by_name["adobe-printf"]["misleading_signatures"].size() == 2, "report adobe misleading");
    auto diff = Json::parse(first["compare/snort__suricata.json"]);
    bool smb_b_only = false;
    for (const auto& s : diff.at("scenarios"))
        if (s.at("scenario") == "smb-stack-overflow") smb_b_only = s.at("b_only").size() == 1;
    c.check(smb_b_only, "compare SMB b-only");
    return c.outcome(n(first.size()) + " workspace files byte-identical across fresh runs and re-runs");
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"mapping oracle equivalence", mapping_oracle},
        {"SQL-injection fixture verdicts", sql_injection},
        {"SMB ruleset diff", smb_diff},
        {"Slowloris payload profile", slowloris},
        {"Adobe misleading alerts", adobe},
        {"parser conservation and decoder fuzz", parser_conservation},
        {"capture round trip", capture_round_trip},
        {"verdict partition and monotonicity", verdict_partition},
        {"end-to-end determinism", end_to_end},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::cout << (o.pass ? "PASS " : "FAIL ") << i + 1 << " " << criteria[i].first << ": " << o.detail << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
