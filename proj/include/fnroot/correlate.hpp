#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "fnroot/alerts.hpp"
#include "fnroot/capture.hpp"
#include "fnroot/flows.hpp"
#include "fnroot/net.hpp"

namespace fnroot {

enum class MappingMode { strict, relaxed, unmapped_tuple_known, unmapped_no_tuple };

inline std::string to_string(MappingMode m) {
    switch (m) {
        case MappingMode::strict: return "strict";
        case MappingMode::relaxed: return "relaxed";
        case MappingMode::unmapped_tuple_known: return "unmapped-tuple-known";
        case MappingMode::unmapped_no_tuple: return "unmapped-no-tuple";
    }
    return "?";
}

inline std::optional<MappingMode> parse_mapping_mode(std::string_view s) {
    for (auto m : {MappingMode::strict, MappingMode::relaxed, MappingMode::unmapped_tuple_known,
                   MappingMode::unmapped_no_tuple})
        if (to_string(m) == s) return m;
    return std::nullopt;
}

/// Result of mapping one packet or alert. `flow_ids` is sorted and empty
/// for the two unmapped modes; `slack` is nonzero only for relaxed entries.
struct MappingEntry {
    std::uint64_t subject = 0;
    std::vector<FlowId> flow_ids;
    MappingMode mode = MappingMode::unmapped_no_tuple;
    EpochMicros slack = 0;

    friend bool operator==(const MappingEntry&, const MappingEntry&) = default;
};

/// Anything with an optional tuple and a timestamp.
struct Subject {
    std::uint64_t id = 0;
    std::optional<FiveTuple> tuple;
    EpochMicros timestamp = 0;
};

inline std::vector<Subject> subjects_of(std::span<const PacketRecord> packets) {
    std::vector<Subject> out;
    out.reserve(packets.size());
    for (const auto& p : packets) out.push_back({p.packet_id, p.tuple, p.timestamp});
    return out;
}

inline std::vector<Subject> subjects_of(std::span<const AlertRecord> alerts) {
    std::vector<Subject> out;
    out.reserve(alerts.size());
    for (const auto& a : alerts) out.push_back({a.alert_id, a.tuple, a.timestamp});
    return out;
}

/// Tuple -> start-ordered flow intervals, under one directionality policy.
/// Immutable after construction.
class FlowIndex {
public:
    struct Interval {
        FlowId flow_id = 0;
        EpochMicros start = 0;
        EpochMicros stop = 0;
        std::size_t position = 0;  // index into the flow sequence the index was built from
    };

    struct IntervalList {
        std::vector<Interval> intervals;
        std::vector<EpochMicros> max_stop;  // running maximum of stop over intervals[0..i]
    };

    FlowIndex(std::span<const FlowRecord> flows, Directionality directionality)
        : directionality_(directionality), flow_count_(flows.size()) {
        for (std::size_t i = 0; i < flows.size(); ++i) {
            const auto& f = flows[i];
            lists_[key_for(f.tuple, directionality)].intervals.push_back({f.flow_id, f.start, f.stop, i});
        }
        for (auto& [key, list] : lists_) {
            std::sort(list.intervals.begin(), list.intervals.end(), [](const Interval& a, const Interval& b) {
                return std::tie(a.start, a.flow_id) < std::tie(b.start, b.flow_id);
            });
            EpochMicros running = list.intervals.front().stop;
            for (const auto& iv : list.intervals) {
                running = std::max(running, iv.stop);
                list.max_stop.push_back(running);
            }
        }
    }

    Directionality directionality() const { return directionality_; }
    std::size_t flow_count() const { return flow_count_; }

    const IntervalList* find(const FiveTuple& probe) const {
        auto it = lists_.find(key_for(probe, directionality_));
        return it == lists_.end() ? nullptr : &it->second;
    }

    const std::unordered_map<FiveTuple, IntervalList, FiveTupleHash>& lists() const { return lists_; }

private:
    Directionality directionality_;
    std::size_t flow_count_;
    std::unordered_map<FiveTuple, IntervalList, FiveTupleHash> lists_;
};

/// Maps one subject. Strict: tuple match and start <= ts <= stop + tolerance.
/// Only when no strict match exists, every tuple-matching flow is returned
/// in relaxed mode with `slack` = distance to the nearest (tolerance-extended)
/// interval.
inline MappingEntry map_subject(const FiveTuple& tuple, EpochMicros timestamp, const FlowIndex& index,
                                EpochMicros tolerance = 0) {
    MappingEntry entry;
    const auto* list = index.find(tuple);
    if (list == nullptr) {
        entry.mode = MappingMode::unmapped_tuple_known;
        return entry;
    }
    const auto& ivs = list->intervals;
    auto upper = std::upper_bound(ivs.begin(), ivs.end(), timestamp,
                                  [](EpochMicros ts, const FlowIndex::Interval& iv) { return ts < iv.start; });
    for (auto i = static_cast<std::size_t>(upper - ivs.begin()); i-- > 0;) {
        if (list->max_stop[i] + tolerance < timestamp) break;
        if (ivs[i].stop + tolerance >= timestamp) entry.flow_ids.push_back(ivs[i].flow_id);
    }
    if (!entry.flow_ids.empty()) {
        entry.mode = MappingMode::strict;
        std::sort(entry.flow_ids.begin(), entry.flow_ids.end());
        return entry;
    }

    entry.mode = MappingMode::relaxed;
    entry.slack = std::numeric_limits<EpochMicros>::max();
    for (const auto& iv : ivs) {
        entry.flow_ids.push_back(iv.flow_id);
        EpochMicros distance = timestamp < iv.start ? iv.start - timestamp : timestamp - (iv.stop + tolerance);
        entry.slack = std::min(entry.slack, distance);
    }
    std::sort(entry.flow_ids.begin(), entry.flow_ids.end());
    return entry;
}

inline std::vector<MappingEntry> map_subjects(std::span<const Subject> subjects, const FlowIndex& index,
                                              EpochMicros tolerance = 0) {
    std::vector<MappingEntry> out;
    out.reserve(subjects.size());
    for (const auto& s : subjects) {
        MappingEntry e;
        if (s.tuple) e = map_subject(*s.tuple, s.timestamp, index, tolerance);
        e.subject = s.id;
        out.push_back(std::move(e));
    }
    return out;
}

/// Brute-force reference: scans every flow for every subject.
inline std::vector<MappingEntry> oracle_map(std::span<const Subject> subjects, std::span<const FlowRecord> flows,
                                            EpochMicros tolerance, Directionality directionality) {
    std::vector<MappingEntry> out;
    out.reserve(subjects.size());
    for (const auto& s : subjects) {
        MappingEntry e;
        e.subject = s.id;
        if (!s.tuple) {
            out.push_back(std::move(e));
            continue;
        }
        auto probe = key_for(*s.tuple, directionality);
        std::vector<FlowId> strict;
        std::vector<FlowId> same_tuple;
        EpochMicros slack = 0;
        for (const auto& f : flows) {
            if (key_for(f.tuple, directionality) != probe) continue;
            EpochMicros lo = f.start;
            EpochMicros hi = f.stop + tolerance;
            if (lo <= s.timestamp && s.timestamp <= hi) strict.push_back(f.flow_id);
            EpochMicros d = s.timestamp < lo ? lo - s.timestamp : (s.timestamp > hi ? s.timestamp - hi : 0);
            if (same_tuple.empty() || d < slack) slack = d;
            same_tuple.push_back(f.flow_id);
        }
        if (!strict.empty()) {
            e.mode = MappingMode::strict;
            e.flow_ids = std::move(strict);
        } else if (!same_tuple.empty()) {
            e.mode = MappingMode::relaxed;
            e.flow_ids = std::move(same_tuple);
            e.slack = slack;
        } else {
            e.mode = MappingMode::unmapped_tuple_known;
        }
        std::sort(e.flow_ids.begin(), e.flow_ids.end());
        out.push_back(std::move(e));
    }
    return out;
}

namespace detail {
inline void check_same_store(const FlowIndex& index, std::span<const FlowRecord> flows) {
    if (index.flow_count() != flows.size())
        throw std::invalid_argument("flow index was built over a different flow sequence");
}
}  // namespace detail

/// One entry per packet, in input order. Increments `mapped_packets` on
/// every flow a packet is attributed to.
inline std::vector<MappingEntry> map_all_packets(std::span<const PacketRecord> packets, const FlowIndex& index,
                                                 EpochMicros tolerance, std::span<FlowRecord> flows) {
    detail::check_same_store(index, flows);
    auto subjects = subjects_of(packets);
    auto entries = map_subjects(subjects, index, tolerance);
    std::unordered_map<FlowId, std::size_t> position;
    for (std::size_t i = 0; i < flows.size(); ++i) position[flows[i].flow_id] = i;
    for (const auto& e : entries)
        for (auto id : e.flow_ids) ++flows[position.at(id)].mapped_packets;
    return entries;
}

struct AlertMapping {
    std::vector<MappingEntry> entries;
    /// Alerts without endpoints; never assigned to flows.
    std::vector<AlertId> unattributable;
};

/// Maps alerts and sets `alert_flag` on every flow that receives one.
inline AlertMapping map_all_alerts(std::span<const AlertRecord> alerts, const FlowIndex& index, EpochMicros tolerance,
                                   std::span<FlowRecord> flows) {
    detail::check_same_store(index, flows);
    AlertMapping out;
    auto subjects = subjects_of(alerts);
    out.entries = map_subjects(subjects, index, tolerance);
    std::unordered_map<FlowId, std::size_t> position;
    for (std::size_t i = 0; i < flows.size(); ++i) position[flows[i].flow_id] = i;
    for (const auto& e : out.entries) {
        if (e.mode == MappingMode::unmapped_no_tuple) out.unattributable.push_back(e.subject);
        for (auto id : e.flow_ids) flows[position.at(id)].alert_flag = true;
    }
    return out;
}

}  // namespace fnroot
