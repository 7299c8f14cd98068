#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "fnroot/alerts.hpp"
#include "fnroot/capture.hpp"
#include "fnroot/correlate.hpp"
#include "fnroot/flows.hpp"
#include "fnroot/verdict.hpp"

namespace fnroot {

inline constexpr int kReportFormatVersion = 1;

struct SignatureCount {
    Signature signature;
    std::string message;  // message of the lowest-id alert carrying the signature
    std::size_t count = 0;

    friend bool operator==(const SignatureCount&, const SignatureCount&) = default;
};

namespace detail {

/// Tallies (signature, attribution) pairs; sorts by count descending, then
/// signature ascending.
class SignatureTally {
public:
    void add(const AlertRecord& a) {
        auto& slot = slots_[a.signature];
        if (slot.count == 0 || a.alert_id < slot.first_alert) {
            slot.first_alert = a.alert_id;
            slot.message = a.message;
        }
        ++slot.count;
    }

    std::vector<SignatureCount> sorted() const {
        std::vector<SignatureCount> out;
        for (const auto& [sig, slot] : slots_) out.push_back({sig, slot.message, slot.count});
        std::stable_sort(out.begin(), out.end(),
                         [](const SignatureCount& a, const SignatureCount& b) { return a.count > b.count; });
        return out;
    }

private:
    struct Slot {
        std::size_t count = 0;
        AlertId first_alert = 0;
        std::string message;
    };
    std::map<Signature, Slot> slots_;
};

}  // namespace detail

/// Counts alert attributions to flows in `scope`. An alert attributed to
/// several scoped flows counts once per flow.
inline std::vector<SignatureCount> signature_frequency(std::span<const AlertRecord> alerts,
                                                       std::span<const MappingEntry> alert_mapping,
                                                       const std::set<FlowId>& scope) {
    std::unordered_map<AlertId, const AlertRecord*> by_id;
    for (const auto& a : alerts) by_id[a.alert_id] = &a;
    detail::SignatureTally tally;
    for (const auto& e : alert_mapping) {
        auto it = by_id.find(e.subject);
        if (it == by_id.end()) continue;
        for (auto id : e.flow_ids)
            if (scope.count(id)) tally.add(*it->second);
    }
    return tally.sorted();
}

struct PayloadProfile {
    std::size_t flow_count = 0;
    std::size_t flows_with_packets = 0;
    std::size_t zero_payload_flows = 0;
    std::size_t handshake_only_flows = 0;
    std::size_t no_packet_flows = 0;
    /// Mean payload bytes over flows that have mapped packets.
    std::optional<double> mean_payload_bytes;
    std::size_t attributions = 0;
    std::size_t relaxed_attributions = 0;
    std::map<FlowId, std::uint64_t> payload_by_flow;

    friend bool operator==(const PayloadProfile&, const PayloadProfile&) = default;
};

namespace detail {
inline bool is_control_segment(const PacketRecord& p) {
    constexpr std::uint8_t kControl = tcp_flag::kSyn | tcp_flag::kAck | tcp_flag::kFin | tcp_flag::kRst;
    return p.payload_length == 0 && p.tcp_flags && (*p.tcp_flags & kControl) != 0;
}
}  // namespace detail

/// Payload statistics over the flows in `flows`, from mapped packets.
/// Relaxed attributions count toward every listed flow.
inline PayloadProfile payload_profile(const std::set<FlowId>& flows, std::span<const MappingEntry> packet_mapping,
                                      std::span<const PacketRecord> packets) {
    std::unordered_map<std::uint64_t, const PacketRecord*> by_id;
    for (const auto& p : packets) by_id[p.packet_id] = &p;

    PayloadProfile out;
    out.flow_count = flows.size();
    std::map<FlowId, std::size_t> packet_count;
    std::map<FlowId, bool> control_only;
    for (const auto& e : packet_mapping) {
        auto it = by_id.find(e.subject);
        if (it == by_id.end()) continue;
        const auto& p = *it->second;
        for (auto id : e.flow_ids) {
            if (!flows.count(id)) continue;
            ++out.attributions;
            if (e.mode == MappingMode::relaxed) ++out.relaxed_attributions;
            out.payload_by_flow[id] += p.payload_length;
            ++packet_count[id];
            auto [slot, fresh] = control_only.emplace(id, true);
            slot->second = slot->second && detail::is_control_segment(p);
        }
    }

    std::uint64_t total = 0;
    for (auto id : flows) {
        if (!packet_count.count(id)) {
            ++out.no_packet_flows;
            continue;
        }
        ++out.flows_with_packets;
        auto bytes = out.payload_by_flow[id];
        total += bytes;
        if (bytes == 0) ++out.zero_payload_flows;
        if (control_only[id]) ++out.handshake_only_flows;
    }
    if (out.flows_with_packets > 0)
        out.mean_payload_bytes = static_cast<double>(total) / static_cast<double>(out.flows_with_packets);
    return out;
}

// ---------------------------------------------------------------------------
// Ruleset comparison

inline const std::string kUnscopedScenario = "(no scenario)";

struct ScenarioDiff {
    std::string scenario;
    std::set<FlowId> a_only;
    std::set<FlowId> b_only;
    std::set<FlowId> both;
    std::set<FlowId> neither;

    friend bool operator==(const ScenarioDiff&, const ScenarioDiff&) = default;
};

struct DetectionDiff {
    std::string ruleset_a;
    std::string ruleset_b;
    std::vector<ScenarioDiff> scenarios;
};

namespace detail {
inline bool in_scope_attack(const FlowVerdict& v) {
    return v.tag == Tag::attack && v.verdict != VerdictClass::out_of_scope;
}
}  // namespace detail

/// Places each in-scope attack flow into exactly one of the four sets,
/// "detected" meaning class TP. Both verdict sets must cover the same flows.
inline DetectionDiff compare_rulesets(std::span<const FlowVerdict> verdicts_a, std::span<const FlowVerdict> verdicts_b,
                                      std::span<const AttackScenario> scenarios, std::string ruleset_a = "a",
                                      std::string ruleset_b = "b") {
    std::map<FlowId, const FlowVerdict*> b_by_id;
    for (const auto& v : verdicts_b) b_by_id[v.flow_id] = &v;
    if (b_by_id.size() != verdicts_a.size())
        throw std::invalid_argument("verdict sets cover different flows");

    DetectionDiff diff{std::move(ruleset_a), std::move(ruleset_b), {}};
    std::map<std::string, ScenarioDiff> by_name;
    for (const auto& a : verdicts_a) {
        auto it = b_by_id.find(a.flow_id);
        if (it == b_by_id.end()) throw std::invalid_argument("verdict sets cover different flows");
        const auto& b = *it->second;
        if (a.tag != b.tag || a.scenario != b.scenario || detail::in_scope_attack(a) != detail::in_scope_attack(b))
            throw std::invalid_argument("verdict sets disagree on scope for flow " + std::to_string(a.flow_id));
        if (!detail::in_scope_attack(a)) continue;

        auto name = a.scenario.value_or(kUnscopedScenario);
        auto& sd = by_name[name];
        sd.scenario = name;
        bool da = a.verdict == VerdictClass::tp;
        bool db = b.verdict == VerdictClass::tp;
        (da && db ? sd.both : da ? sd.a_only : db ? sd.b_only : sd.neither).insert(a.flow_id);
    }
    for (const auto& s : scenarios) {
        auto it = by_name.find(s.name);
        if (it == by_name.end()) continue;
        diff.scenarios.push_back(std::move(it->second));
        by_name.erase(it);
    }
    if (auto it = by_name.find(kUnscopedScenario); it != by_name.end()) diff.scenarios.push_back(std::move(it->second));
    return diff;
}

// ---------------------------------------------------------------------------
// Report assembly

struct RootCauseReport {
    std::string scenario;
    std::optional<AttackCategory> category;
    bool in_ids_scope = true;
    std::size_t attack_flows = 0;
    std::map<VerdictClass, std::size_t> class_counts;
    std::vector<SignatureCount> misleading_signatures;
    std::vector<SignatureCount> representative_signatures;
    PayloadProfile payload;
    std::size_t unattributable_alerts = 0;
    std::vector<std::string> notes;
};

struct GlobalSummary {
    ConfusionSummary confusion;
    std::size_t flows = 0;
    std::size_t packets = 0;
    std::size_t alerts = 0;
    std::size_t unattributable_alerts = 0;
    std::size_t overlay_tagged_flows = 0;
    std::size_t no_packet_flows = 0;
    std::size_t scenario_overlaps = 0;
};

struct Report {
    std::string ruleset;
    GlobalSummary summary;
    std::vector<RootCauseReport> scenarios;
};

/// Everything report generation reads. All spans refer to sealed stores.
struct ReportInputs {
    std::string ruleset;
    std::span<const FlowRecord> flows;
    std::span<const PacketRecord> packets;
    std::span<const MappingEntry> packet_mapping;
    std::span<const AlertRecord> alerts;
    std::span<const MappingEntry> alert_mapping;
    std::span<const AlertId> unattributable;
    std::span<const FlowVerdict> verdicts;
    std::span<const AttackScenario> scenarios;
};

namespace detail {

inline std::string percent(std::size_t part, std::size_t whole) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f%%", whole == 0 ? 0.0 : 100.0 * static_cast<double>(part) / whole);
    return buf;
}

/// Snort text rules use generator 1 and shared-object rules generator 3;
/// every other generator is a preprocessor or decoder.
inline bool is_ruleset_generator(std::uint32_t gid) { return gid == 1 || gid == 3; }

inline RootCauseReport scenario_section(const ReportInputs& in, const std::string& name,
                                        const AttackScenario* scenario,
                                        const std::vector<const FlowVerdict*>& verdicts) {
    RootCauseReport r;
    r.scenario = name;
    if (scenario) {
        r.category = scenario->category;
        r.in_ids_scope = scenario->in_ids_scope;
    }
    r.attack_flows = verdicts.size();
    r.unattributable_alerts = in.unattributable.size();
    for (auto c : {VerdictClass::tp, VerdictClass::fn_syntactic, VerdictClass::fn_semantic, VerdictClass::out_of_scope})
        r.class_counts[c] = 0;

    std::unordered_map<AlertId, const AlertRecord*> alert_by_id;
    for (const auto& a : in.alerts) alert_by_id[a.alert_id] = &a;

    SignatureTally misleading, representative;
    std::set<FlowId> flow_ids;
    std::size_t evidence_total = 0, evidence_from_ruleset = 0, overlaps = 0;
    for (const auto* v : verdicts) {
        ++r.class_counts[v->verdict];
        flow_ids.insert(v->flow_id);
        if (v->scenario_overlap) ++overlaps;
        for (const auto& e : v->evidence) {
            const auto& alert = *alert_by_id.at(e.alert_id);
            (e.representative ? representative : misleading).add(alert);
            ++evidence_total;
            if (is_ruleset_generator(alert.signature.gid)) ++evidence_from_ruleset;
        }
    }
    r.misleading_signatures = misleading.sorted();
    r.representative_signatures = representative.sorted();
    r.payload = payload_profile(flow_ids, in.packet_mapping, in.packets);

    auto& notes = r.notes;
    auto n = [](std::size_t v) { return std::to_string(v); };
    if (!r.in_ids_scope)
        notes.push_back("scenario is marked outside the IDS's detection goals; its flows are excluded from detection "
                        "counts");
    if (auto fs = r.class_counts[VerdictClass::fn_syntactic])
        notes.push_back(n(fs) + " of " + n(r.attack_flows) + " attack flows raised no alert at all");
    if (auto fm = r.class_counts[VerdictClass::fn_semantic])
        notes.push_back(n(fm) + " attack flows raised only alerts that do not match the expected signatures");
    if (evidence_total > 0 && evidence_from_ruleset == 0)
        notes.push_back("all alerts on this scenario are anomaly-preprocessor signatures, none from the ruleset");
    if (!r.misleading_signatures.empty() && r.representative_signatures.empty())
        notes.push_back("no alert on this scenario names the attack; review the alert messages for meaning");
    if (r.payload.flows_with_packets > 0 && r.payload.zero_payload_flows == r.payload.flows_with_packets)
        notes.push_back("every flow with mapped packets carries zero payload bytes; payload-inspecting signatures "
                        "have nothing to match");
    else if (r.payload.zero_payload_flows > 0)
        notes.push_back(n(r.payload.zero_payload_flows) + " flows carry zero payload bytes");
    if (r.payload.handshake_only_flows > 0)
        notes.push_back(n(r.payload.handshake_only_flows) + " flows consist solely of TCP control segments");
    if (r.payload.no_packet_flows > 0)
        notes.push_back(n(r.payload.no_packet_flows) + " flows had no packets mapped");
    if (r.payload.relaxed_attributions > 0)
        notes.push_back(n(r.payload.relaxed_attributions) + " of " + n(r.payload.attributions) + " packet attributions (" +
                        percent(r.payload.relaxed_attributions, r.payload.attributions) +
                        ") used the relaxed timestamp rule and count toward every tuple-matching flow");
    if (overlaps > 0) notes.push_back(n(overlaps) + " flows also matched a later scenario");
    if (r.unattributable_alerts > 0)
        notes.push_back(n(r.unattributable_alerts) + " alerts in this run carry no endpoints and are not attributed to "
                        "any flow");
    return r;
}

}  // namespace detail

/// One section per configured scenario that owns at least one attack flow,
/// in configuration order, plus a trailing section for unmatched attack
/// flows. Deterministic for identical inputs.
inline Report generate_report(const ReportInputs& in) {
    Report report;
    report.ruleset = in.ruleset;
    auto& s = report.summary;
    s.confusion = confusion_summary(in.verdicts);
    s.flows = in.flows.size();
    s.packets = in.packets.size();
    s.alerts = in.alerts.size();
    s.unattributable_alerts = in.unattributable.size();
    for (const auto& f : in.flows) {
        if (f.tag_source == TagSource::overlay) ++s.overlay_tagged_flows;
        if (f.mapped_packets == 0) ++s.no_packet_flows;
    }

    std::map<std::string, std::vector<const FlowVerdict*>> by_scenario;
    for (const auto& v : in.verdicts) {
        if (v.scenario_overlap) ++s.scenario_overlaps;
        if (v.tag != Tag::attack) continue;
        by_scenario[v.scenario.value_or(kUnscopedScenario)].push_back(&v);
    }
    for (const auto& sc : in.scenarios) {
        auto it = by_scenario.find(sc.name);
        if (it == by_scenario.end()) continue;
        report.scenarios.push_back(detail::scenario_section(in, sc.name, &sc, it->second));
    }
    if (auto it = by_scenario.find(kUnscopedScenario); it != by_scenario.end())
        report.scenarios.push_back(detail::scenario_section(in, kUnscopedScenario, nullptr, it->second));
    return report;
}

namespace detail {
inline std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

inline void signature_table(std::ostringstream& os, const std::vector<SignatureCount>& rows) {
    if (rows.empty()) {
        os << "    (none)\n";
        return;
    }
    for (const auto& row : rows) {
        char buf[48];
        std::snprintf(buf, sizeof buf, "    %6zu  [%s]  ", row.count, row.signature.to_string().c_str());
        os << buf << row.message << "\n";
    }
}
}  // namespace detail

/// Plain-text rendering.
inline std::string render_report(const Report& report) {
    std::ostringstream os;
    const auto& s = report.summary;
    os << "False-negative root-cause report (format " << kReportFormatVersion << ")\n";
    os << "ruleset: " << report.ruleset << "\n\n";
    os << "flows " << s.flows << "  packets " << s.packets << "  alerts " << s.alerts << "  unattributable alerts "
       << s.unattributable_alerts << "\n";
    os << "overlay-tagged flows " << s.overlay_tagged_flows << "  flows without packets " << s.no_packet_flows
       << "  untagged flows " << s.confusion.untagged << "\n\n";
    os << "  class          count\n";
    for (auto c : kAllVerdictClasses) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "  %-13s %6zu\n", to_string(c).c_str(), s.confusion.count(c));
        os << buf;
    }
    os << "  detection rate     "
       << (s.confusion.detection_rate ? detail::fixed(*s.confusion.detection_rate, 4) : std::string("undefined")) << "\n";
    os << "  false-positive rate "
       << (s.confusion.false_positive_rate ? detail::fixed(*s.confusion.false_positive_rate, 4)
                                           : std::string("undefined"))
       << "\n";

    for (const auto& r : report.scenarios) {
        os << "\n== scenario: " << r.scenario;
        if (r.category) os << " (category " << to_string(*r.category) << ")";
        os << (r.in_ids_scope ? "" : " [outside IDS scope]") << "\n";
        os << "  attack flows " << r.attack_flows;
        for (const auto& [c, count] : r.class_counts) os << "  " << to_string(c) << " " << count;
        os << "\n  misleading signatures:\n";
        detail::signature_table(os, r.misleading_signatures);
        os << "  representative signatures:\n";
        detail::signature_table(os, r.representative_signatures);
        const auto& p = r.payload;
        os << "  payload: flows with packets " << p.flows_with_packets << ", zero-payload " << p.zero_payload_flows
           << ", handshake-only " << p.handshake_only_flows << ", no packets " << p.no_packet_flows << ", mean bytes "
           << (p.mean_payload_bytes ? detail::fixed(*p.mean_payload_bytes, 2) : std::string("undefined")) << "\n";
        os << "  unattributable alerts: " << r.unattributable_alerts << "\n";
        if (!r.notes.empty()) {
            os << "  notes:\n";
            for (const auto& note : r.notes) os << "    - " << note << "\n";
        }
    }
    return os.str();
}

inline std::string render_diff(const DetectionDiff& diff) {
    std::ostringstream os;
    os << "Detection diff: A = " << diff.ruleset_a << ", B = " << diff.ruleset_b << "\n";
    os << "  scenario                         A-only  B-only    both  neither\n";
    for (const auto& s : diff.scenarios) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "  %-30s %7zu %7zu %7zu %8zu\n", s.scenario.c_str(), s.a_only.size(),
                      s.b_only.size(), s.both.size(), s.neither.size());
        os << buf;
    }
    return os.str();
}

}  // namespace fnroot
