#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fnroot/alerts.hpp"
#include "fnroot/correlate.hpp"
#include "fnroot/flows.hpp"

namespace fnroot {

/// I: exploits a software vulnerability. II: auxiliary behaviour (scans,
/// shells, C&C). III: brute force / volumetric.
enum class AttackCategory { vulnerability, auxiliary, brute_force };

inline std::string to_string(AttackCategory c) {
    switch (c) {
        case AttackCategory::vulnerability: return "I";
        case AttackCategory::auxiliary: return "II";
        case AttackCategory::brute_force: return "III";
    }
    return "?";
}

inline std::optional<AttackCategory> parse_category(std::string_view s) {
    auto v = detail::to_lower(detail::trim(s));
    if (v == "i" || v == "1" || v == "vulnerability") return AttackCategory::vulnerability;
    if (v == "ii" || v == "2" || v == "auxiliary") return AttackCategory::auxiliary;
    if (v == "iii" || v == "3" || v == "brute-force" || v == "brute_force") return AttackCategory::brute_force;
    return std::nullopt;
}

/// Matches an alert when every present component matches. The message
/// component is a case-insensitive substring.
struct SignaturePattern {
    std::optional<std::uint32_t> gid;
    std::optional<std::uint32_t> sid;
    std::optional<std::uint32_t> rev;
    std::optional<std::string> message;

    bool matches(const AlertRecord& a) const {
        if (gid && *gid != a.signature.gid) return false;
        if (sid && *sid != a.signature.sid) return false;
        if (rev && *rev != a.signature.rev) return false;
        if (message && detail::to_lower(a.message).find(detail::to_lower(*message)) == std::string::npos)
            return false;
        return true;
    }

    friend bool operator==(const SignaturePattern&, const SignaturePattern&) = default;
};

/// A flow is in scope when it matches any tuple pattern (or there are none)
/// and overlaps the window.
struct ScenarioScope {
    std::vector<TuplePattern> patterns;
    TimeWindow window;

    bool matches(const FlowRecord& f) const {
        bool tuple_ok = patterns.empty() ||
                        std::any_of(patterns.begin(), patterns.end(), [&](const auto& p) { return p.matches(f.tuple); });
        return tuple_ok && window.overlaps(f.start, f.stop);
    }
};

struct AttackScenario {
    std::string name;
    AttackCategory category = AttackCategory::vulnerability;
    ScenarioScope scope;
    /// Empty accepts any alert as representative.
    std::vector<SignaturePattern> expected_signatures;
    bool in_ids_scope = true;

    static bool default_in_scope(AttackCategory c) { return c == AttackCategory::vulnerability; }

    bool representative(const AlertRecord& a) const {
        if (expected_signatures.empty()) return true;
        return std::any_of(expected_signatures.begin(), expected_signatures.end(),
                           [&](const SignaturePattern& p) { return p.matches(a); });
    }
};

enum class VerdictClass { tp, fp, tn, fn_syntactic, fn_semantic, out_of_scope };

inline constexpr VerdictClass kAllVerdictClasses[] = {VerdictClass::tp,           VerdictClass::fp,
                                                      VerdictClass::tn,           VerdictClass::fn_syntactic,
                                                      VerdictClass::fn_semantic, VerdictClass::out_of_scope};

inline std::string to_string(VerdictClass c) {
    switch (c) {
        case VerdictClass::tp: return "TP";
        case VerdictClass::fp: return "FP";
        case VerdictClass::tn: return "TN";
        case VerdictClass::fn_syntactic: return "FN-syntactic";
        case VerdictClass::fn_semantic: return "FN-semantic";
        case VerdictClass::out_of_scope: return "out-of-scope";
    }
    return "?";
}

inline std::optional<VerdictClass> parse_verdict_class(std::string_view s) {
    for (auto c : kAllVerdictClasses)
        if (to_string(c) == s) return c;
    return std::nullopt;
}

struct Evidence {
    AlertId alert_id = 0;
    bool representative = false;

    friend bool operator==(const Evidence&, const Evidence&) = default;
};

struct FlowVerdict {
    FlowId flow_id = 0;
    Tag tag = Tag::untagged;
    VerdictClass verdict = VerdictClass::tn;
    std::optional<std::string> scenario;
    std::vector<Evidence> evidence;  // sorted by alert id
    /// More than one scenario matched; the first in configuration order won.
    bool scenario_overlap = false;

    friend bool operator==(const FlowVerdict&, const FlowVerdict&) = default;
};

namespace detail {

struct ScenarioMatch {
    const AttackScenario* scenario = nullptr;
    bool overlap = false;
};

inline ScenarioMatch match_scenario(const FlowRecord& f, std::span<const AttackScenario> scenarios) {
    ScenarioMatch m;
    for (const auto& s : scenarios) {
        if (!s.scope.matches(f)) continue;
        if (m.scenario == nullptr) {
            m.scenario = &s;
        } else {
            m.overlap = true;
            break;
        }
    }
    return m;
}

}  // namespace detail

/// Normal and untagged flows: TN without alerts, FP with any. Attack flows
/// take the first matching scenario; out-of-scope when that scenario is not
/// an IDS responsibility, otherwise TP if any alert is representative,
/// FN-semantic if alerts exist but none are, FN-syntactic without alerts.
inline FlowVerdict classify_flow(const FlowRecord& flow, std::span<const AlertRecord> alerts_on_flow,
                                 std::span<const AttackScenario> scenarios) {
    FlowVerdict v;
    v.flow_id = flow.flow_id;
    v.tag = flow.tag;

    const AttackScenario* scenario = nullptr;
    if (flow.tag == Tag::attack) {
        auto m = detail::match_scenario(flow, scenarios);
        scenario = m.scenario;
        v.scenario_overlap = m.overlap;
        if (scenario) v.scenario = scenario->name;
    }

    bool any_representative = false;
    for (const auto& a : alerts_on_flow) {
        bool rep = flow.tag == Tag::attack && (scenario == nullptr || scenario->representative(a));
        any_representative = any_representative || rep;
        v.evidence.push_back({a.alert_id, rep});
    }
    std::sort(v.evidence.begin(), v.evidence.end(),
              [](const Evidence& a, const Evidence& b) { return a.alert_id < b.alert_id; });

    if (flow.tag != Tag::attack) {
        v.verdict = alerts_on_flow.empty() ? VerdictClass::tn : VerdictClass::fp;
    } else if (scenario && !scenario->in_ids_scope) {
        v.verdict = VerdictClass::out_of_scope;
    } else if (alerts_on_flow.empty()) {
        v.verdict = VerdictClass::fn_syntactic;
    } else {
        v.verdict = any_representative ? VerdictClass::tp : VerdictClass::fn_semantic;
    }
    return v;
}

/// Groups mapped alerts by flow id. Relaxed attributions count for every
/// listed flow.
inline std::unordered_map<FlowId, std::vector<AlertRecord>> alerts_by_flow(std::span<const AlertRecord> alerts,
                                                                          std::span<const MappingEntry> entries) {
    std::unordered_map<AlertId, const AlertRecord*> by_id;
    for (const auto& a : alerts) by_id[a.alert_id] = &a;
    std::unordered_map<FlowId, std::vector<AlertRecord>> out;
    for (const auto& e : entries) {
        auto it = by_id.find(e.subject);
        if (it == by_id.end()) continue;
        for (auto id : e.flow_ids) out[id].push_back(*it->second);
    }
    return out;
}

inline std::vector<FlowVerdict> classify_flows(std::span<const FlowRecord> flows, std::span<const AlertRecord> alerts,
                                               std::span<const MappingEntry> alert_mapping,
                                               std::span<const AttackScenario> scenarios) {
    auto grouped = alerts_by_flow(alerts, alert_mapping);
    std::vector<FlowVerdict> out;
    out.reserve(flows.size());
    static const std::vector<AlertRecord> kNone;
    for (const auto& f : flows) {
        auto it = grouped.find(f.flow_id);
        out.push_back(classify_flow(f, it == grouped.end() ? kNone : it->second, scenarios));
    }
    return out;
}

struct ConfusionSummary {
    std::map<VerdictClass, std::size_t> counts;
    std::size_t total = 0;
    /// Flows classified as if normal because the ground truth carried no tag.
    std::size_t untagged = 0;
    /// TP / (TP + FN-syntactic + FN-semantic); absent when the denominator is 0.
    std::optional<double> detection_rate;
    /// FP / (FP + TN); absent when the denominator is 0.
    std::optional<double> false_positive_rate;

    std::size_t count(VerdictClass c) const {
        auto it = counts.find(c);
        return it == counts.end() ? 0 : it->second;
    }
};

inline ConfusionSummary confusion_summary(std::span<const FlowVerdict> verdicts) {
    ConfusionSummary s;
    for (auto c : kAllVerdictClasses) s.counts[c] = 0;
    for (const auto& v : verdicts) {
        ++s.counts[v.verdict];
        if (v.tag == Tag::untagged) ++s.untagged;
    }
    s.total = verdicts.size();
    auto tp = s.count(VerdictClass::tp);
    auto attacks = tp + s.count(VerdictClass::fn_syntactic) + s.count(VerdictClass::fn_semantic);
    if (attacks > 0) s.detection_rate = static_cast<double>(tp) / static_cast<double>(attacks);
    auto benign = s.count(VerdictClass::fp) + s.count(VerdictClass::tn);
    if (benign > 0) s.false_positive_rate = static_cast<double>(s.count(VerdictClass::fp)) / static_cast<double>(benign);
    return s;
}

struct ScopePartition {
    std::vector<FlowRecord> in_scope;
    std::vector<FlowRecord> out_of_scope;
};

/// Attack flows follow their first matching scenario's in-scope flag;
/// everything else is in scope.
inline ScopePartition scope_filter(std::span<const FlowRecord> flows, std::span<const AttackScenario> scenarios) {
    ScopePartition out;
    for (const auto& f : flows) {
        bool excluded = false;
        if (f.tag == Tag::attack) {
            auto m = detail::match_scenario(f, scenarios);
            excluded = m.scenario != nullptr && !m.scenario->in_ids_scope;
        }
        (excluded ? out.out_of_scope : out.in_scope).push_back(f);
    }
    return out;
}

}  // namespace fnroot
