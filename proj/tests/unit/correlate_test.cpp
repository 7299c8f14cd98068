#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace fnroot;
using fnroot::synthetic::tcp;

namespace {

constexpr EpochMicros S = kMicrosPerSecond;

FlowRecord flow(FlowId id, const FiveTuple& t, EpochMicros start, EpochMicros stop) {
    FlowRecord f;
    f.flow_id = id;
    f.tuple = t;
    f.start = start;
    f.stop = stop;
    f.tag = Tag::normal;
    return f;
}

const FiveTuple kA = tcp("10.0.0.1", 1000, "10.0.0.2", 80);
const FiveTuple kB = tcp("10.0.0.3", 1000, "10.0.0.2", 80);

}  // namespace

TEST(MapSubject, StrictInsideClosedInterval) {
    std::vector<FlowRecord> flows{flow(1, kA, 10 * S, 20 * S), flow(2, kA, 30 * S, 40 * S)};
    FlowIndex index(flows, Directionality::directional);
    for (auto ts : {10 * S, 15 * S, 20 * S}) {
        auto e = map_subject(kA, ts, index);
        EXPECT_EQ(e.mode, MappingMode::strict);
        EXPECT_EQ(e.flow_ids, std::vector<FlowId>{1});
        EXPECT_EQ(e.slack, 0);
    }
    EXPECT_EQ(map_subject(kA, 40 * S, index).flow_ids, std::vector<FlowId>{2});
}

TEST(MapSubject, ToleranceExtendsOnlyPastStop) {
    std::vector<FlowRecord> flows{flow(1, kA, 10 * S, 20 * S)};
    FlowIndex index(flows, Directionality::directional);
    EXPECT_EQ(map_subject(kA, 21 * S, index, 2 * S).mode, MappingMode::strict);
    EXPECT_EQ(map_subject(kA, 22 * S, index, 2 * S).mode, MappingMode::strict);
    auto late = map_subject(kA, 23 * S, index, 2 * S);
    EXPECT_EQ(late.mode, MappingMode::relaxed);
    EXPECT_EQ(late.slack, S);
    auto early = map_subject(kA, 9 * S, index, 2 * S);
    EXPECT_EQ(early.mode, MappingMode::relaxed);
    EXPECT_EQ(early.slack, S);
}

TEST(MapSubject, OverlappingFlowsAllMatch) {
    std::vector<FlowRecord> flows{flow(3, kA, 0, 100 * S), flow(1, kA, 10 * S, 20 * S), flow(2, kA, 15 * S, 16 * S)};
    FlowIndex index(flows, Directionality::directional);
    EXPECT_EQ(map_subject(kA, 15 * S, index).flow_ids, (std::vector<FlowId>{1, 2, 3}));
    EXPECT_EQ(map_subject(kA, 50 * S, index).flow_ids, (std::vector<FlowId>{3}));
}

TEST(MapSubject, RelaxedReturnsEveryTupleFlowWithNearestSlack) {
    std::vector<FlowRecord> flows{flow(1, kA, 10 * S, 20 * S), flow(2, kA, 30 * S, 40 * S), flow(3, kB, 0, 100 * S)};
    FlowIndex index(flows, Directionality::directional);
    auto e = map_subject(kA, 27 * S, index);
    EXPECT_EQ(e.mode, MappingMode::relaxed);
    EXPECT_EQ(e.flow_ids, (std::vector<FlowId>{1, 2}));
    EXPECT_EQ(e.slack, 3 * S);
}

TEST(MapSubject, UnknownTuple) {
    std::vector<FlowRecord> flows{flow(1, kA, 10 * S, 20 * S)};
    FlowIndex index(flows, Directionality::directional);
    auto e = map_subject(kB, 15 * S, index);
    EXPECT_EQ(e.mode, MappingMode::unmapped_tuple_known);
    EXPECT_TRUE(e.flow_ids.empty());
}

TEST(MapSubject, DirectionalityPolicy) {
    std::vector<FlowRecord> flows{flow(1, kA, 10 * S, 20 * S)};
    FlowIndex directional(flows, Directionality::directional);
    FlowIndex bidirectional(flows, Directionality::bidirectional);
    EXPECT_EQ(map_subject(kA.reversed(), 15 * S, directional).mode, MappingMode::unmapped_tuple_known);
    auto e = map_subject(kA.reversed(), 15 * S, bidirectional);
    EXPECT_EQ(e.mode, MappingMode::strict);
    EXPECT_EQ(e.flow_ids, std::vector<FlowId>{1});
}

TEST(MapSubjects, TuplelessSubjectsAreUnmappedNoTuple) {
    std::vector<FlowRecord> flows{flow(1, kA, 10 * S, 20 * S)};
    FlowIndex index(flows, Directionality::directional);
    std::vector<Subject> subjects{{7, std::nullopt, 15 * S}, {8, kA, 15 * S}};
    auto entries = map_subjects(subjects, index);
    ASSERT_EQ(entries.size(), 2u);
    EXPECT_EQ(entries[0].subject, 7u);
    EXPECT_EQ(entries[0].mode, MappingMode::unmapped_no_tuple);
    EXPECT_EQ(entries[1].subject, 8u);
    EXPECT_EQ(entries[1].mode, MappingMode::strict);
}

TEST(MapAll, CountersAndAlertFlags) {
    std::vector<FlowRecord> flows{flow(1, kA, 10 * S, 20 * S), flow(2, kA, 30 * S, 40 * S), flow(3, kB, 0, S)};
    FlowIndex directional(flows, Directionality::directional);
    FlowIndex bidirectional(flows, Directionality::bidirectional);
    auto packet = [](std::uint64_t id, EpochMicros ts, std::optional<FiveTuple> t) {
        PacketRecord p;
        p.packet_id = id;
        p.timestamp = ts;
        p.tuple = t;
        return p;
    };
    std::vector<PacketRecord> packets{packet(1, 12 * S, kA),
                                      packet(2, 25 * S, kA),  // relaxed: counts on both
                                      packet(3, 12 * S, kA.reversed()), packet(4, 12 * S, std::nullopt)};
    packets[3].unkeyed_reason = "non-IP ethertype";
    auto pm = map_all_packets(packets, directional, 0, flows);
    EXPECT_EQ(flows[0].mapped_packets, 2u);
    EXPECT_EQ(flows[1].mapped_packets, 1u);
    EXPECT_EQ(flows[2].mapped_packets, 0u);
    EXPECT_EQ(pm[2].mode, MappingMode::unmapped_tuple_known);
    EXPECT_EQ(pm[3].mode, MappingMode::unmapped_no_tuple);

    std::vector<AlertRecord> alerts(2);
    alerts[0].alert_id = 1;
    alerts[0].timestamp = 35 * S;
    alerts[0].tuple = kA.reversed();
    alerts[1].alert_id = 2;
    alerts[1].timestamp = 35 * S;
    auto am = map_all_alerts(alerts, bidirectional, 0, flows);
    EXPECT_FALSE(flows[0].alert_flag);
    EXPECT_TRUE(flows[1].alert_flag);
    EXPECT_FALSE(flows[2].alert_flag);
    EXPECT_EQ(am.unattributable, std::vector<AlertId>{2});
}

TEST(MapAll, RejectsIndexOverDifferentStore) {
    std::vector<FlowRecord> flows{flow(1, kA, 10 * S, 20 * S)};
    FlowIndex index(flows, Directionality::directional);
    std::vector<FlowRecord> other{flow(1, kA, 0, S), flow(2, kB, 0, S)};
    std::vector<PacketRecord> packets;
    EXPECT_THROW(map_all_packets(packets, index, 0, other), std::invalid_argument);
}

TEST(MapProperty, IndexMatchesBruteForce) {
    testkit::Rng rng(31);
    for (int round = 0; round < 40; ++round) {
        auto pool = testkit::tuple_pool(rng, 1 + testkit::uniform(rng, 0, 30));
        EpochMicros horizon = 1000 * S;
        auto flows = testkit::random_flows(rng, testkit::uniform(rng, 1, 200), pool, horizon);
        auto packets = testkit::random_packets(rng, 500, pool, horizon);
        auto subjects = subjects_of(std::span<const PacketRecord>(packets));
        EpochMicros tolerance = static_cast<EpochMicros>(testkit::uniform(rng, 0, 5)) * S;
        for (auto dir : {Directionality::directional, Directionality::bidirectional}) {
            FlowIndex index(flows, dir);
            auto fast = map_subjects(subjects, index, tolerance);
            auto slow = oracle_map(subjects, flows, tolerance, dir);
            ASSERT_EQ(fast.size(), slow.size());
            for (std::size_t i = 0; i < fast.size(); ++i) ASSERT_EQ(fast[i], slow[i]) << "round " << round << " subject " << i;
        }
    }
}

TEST(MapProperty, StrictEntriesContainTheTimestamp) {
    testkit::Rng rng(32);
    auto pool = testkit::tuple_pool(rng, 10);
    auto flows = testkit::random_flows(rng, 300, pool, 100 * S);
    auto packets = testkit::random_packets(rng, 2000, pool, 100 * S);
    FlowIndex index(flows, Directionality::directional);
    std::map<FlowId, const FlowRecord*> by_id;
    for (const auto& f : flows) by_id[f.flow_id] = &f;
    auto entries = map_subjects(subjects_of(std::span<const PacketRecord>(packets)), index, S);
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        EXPECT_TRUE(std::is_sorted(e.flow_ids.begin(), e.flow_ids.end()));
        if (e.mode != MappingMode::strict) continue;
        for (auto id : e.flow_ids) {
            const auto& f = *by_id[id];
            EXPECT_EQ(f.tuple, *packets[i].tuple);
            EXPECT_LE(f.start, packets[i].timestamp);
            EXPECT_LE(packets[i].timestamp, f.stop + S);
        }
    }
}

TEST(MappingMode, NamesRoundTrip) {
    for (auto m : {MappingMode::strict, MappingMode::relaxed, MappingMode::unmapped_tuple_known,
                   MappingMode::unmapped_no_tuple})
        EXPECT_EQ(parse_mapping_mode(to_string(m)), m);
    EXPECT_FALSE(parse_mapping_mode("loose"));
}
