#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace fnroot;
using synthetic::tcp;

namespace {

LabelSchema csv_schema() {
    LabelSchema s;
    s.fields = {{"src", "Source"},     {"dst", "Destination"}, {"sport", "SrcPort"}, {"dport", "DstPort"},
                {"proto", "Protocol"}, {"start", "StartTime"}, {"stop", "StopTime"}, {"tag", "Tag"}};
    s.tag_vocabulary = {{"Normal", Tag::normal}, {"Attack", Tag::attack}};
    s.protocol_vocabulary = {{"tcp_ip", proto::kTcp}, {"udp_ip", proto::kUdp}};
    return s;
}

LabelIngest ingest(const std::string& text, const LabelSchema& schema) {
    std::istringstream in(text);
    return ingest_flow_labels(in, schema);
}

const char* kHeader = "Source,Destination,SrcPort,DstPort,Protocol,StartTime,StopTime,Tag\n";

FlowRecord flow(FlowId id, const FiveTuple& t, EpochMicros start, EpochMicros stop, Tag tag) {
    FlowRecord f;
    f.flow_id = id;
    f.tuple = t;
    f.start = start;
    f.stop = stop;
    f.tag = tag;
    f.tag_source = TagSource::dataset;
    return f;
}

}  // namespace

TEST(FlowLabels, TranscribesOneEntry) {
    auto r = ingest(std::string(kHeader) +
                        "192.168.2.112,192.168.2.113,4387,445,tcp_ip,2010-06-14T16:00:00,2010-06-14T16:00:04,Attack\n",
                    csv_schema());
    ASSERT_EQ(r.flows.size(), 1u);
    EXPECT_TRUE(r.rejects.empty());
    const auto& f = r.flows[0];
    EXPECT_EQ(f.flow_id, 1u);
    EXPECT_EQ(f.tuple, tcp("192.168.2.112", 4387, "192.168.2.113", 445));
    EXPECT_EQ(f.start, civil_to_micros(2010, 6, 14, 16, 0, 0, 0));
    EXPECT_EQ(f.stop, civil_to_micros(2010, 6, 14, 16, 0, 4, 0));
    EXPECT_EQ(f.tag, Tag::attack);
    EXPECT_EQ(f.tag_source, TagSource::dataset);
}

TEST(FlowLabels, InvertedIntervalIsRejectedWithReason) {
    auto r = ingest(std::string(kHeader) + "10.0.0.1,10.0.0.2,1,2,TCP,1276524010,1276524000,Normal\n", csv_schema());
    EXPECT_TRUE(r.flows.empty());
    ASSERT_EQ(r.rejects.size(), 1u);
    EXPECT_EQ(r.rejects[0].entry, 1u);
    EXPECT_EQ(r.rejects[0].reason, "inverted interval");
}

TEST(FlowLabels, EveryEntryIsAcceptedOrRejected) {
    std::string text = kHeader;
    text += "10.0.0.1,10.0.0.2,1,2,TCP,100,200,Normal\n";
    text += "10.0.0.1,10.0.0.2,1,2,TCP,100,200,Weird\n";      // unknown tag
    text += "10.0.0.x,10.0.0.2,1,2,TCP,100,200,Normal\n";      // bad address
    text += "10.0.0.1,10.0.0.2,70000,2,TCP,100,200,Normal\n";  // bad port
    text += "10.0.0.1,10.0.0.2,1,2,TCP,100\n";                 // short row
    text += "10.0.0.1,10.0.0.2,1,2,\"TCP,100,200,Normal\n";    // unterminated quote
    text += "\n";
    text += "10.0.0.1,10.0.0.2,x,y,ICMP,100,200,attack\n";     // ports ignored without a port protocol
    auto r = ingest(text, csv_schema());
    EXPECT_EQ(r.flows.size() + r.rejects.size(), 7u);
    EXPECT_EQ(r.flows.size(), 2u);
    EXPECT_EQ(r.flows[1].flow_id, 2u);
    EXPECT_EQ(r.flows[1].tuple.port_a, 0);
    std::vector<std::size_t> entries;
    for (const auto& j : r.rejects) entries.push_back(j.entry);
    EXPECT_EQ(entries, (std::vector<std::size_t>{2, 3, 4, 5, 6}));
    EXPECT_EQ(r.rejects[0].reason, "unknown tag 'Weird'");
}

TEST(FlowLabels, SixtyTwoAttackEntries) {
    synthetic::Dataset d;
    synthetic::add_sql_injection(d);
    LabelSchema s;
    for (const auto& role : LabelSchema::kRequiredRoles) s.fields[role] = role;
    auto r = ingest(d.label_csv(), s);
    ASSERT_TRUE(r.rejects.empty());
    std::size_t attacks = 0;
    for (const auto& f : r.flows) {
        if (f.tag != Tag::attack) continue;
        ++attacks;
        EXPECT_EQ(f.tuple.addr_b.to_string(), "192.168.5.123");
    }
    EXPECT_EQ(attacks, 62u);
}

TEST(FlowLabels, SchemaMissingRequiredRoleIsFatal) {
    auto s = csv_schema();
    s.fields.erase("tag");
    EXPECT_THROW(ingest(std::string(kHeader), s), ConfigError);
}

TEST(FlowLabels, HeaderMissingMappedColumnIsFatal) {
    EXPECT_THROW(ingest("Source,Destination\n1,2\n", csv_schema()), ConfigError);
}

TEST(FlowLabels, MarkupWithElementsAndAttributes) {
    auto s = csv_schema();
    s.format = LabelSchema::Format::markup;
    s.record_element = "Flow";
    std::string xml = R"(<?xml version="1.0"?>
<Flows>
  <!-- exported -->
  <Flow><Source>192.168.1.105</Source><Destination>192.168.5.122</Destination><SrcPort>1050</SrcPort>
        <DstPort>110</DstPort><Protocol>tcp_ip</Protocol><StartTime>2010-06-14T10:00:00</StartTime>
        <StopTime>2010-06-14T10:01:00</StopTime><Tag>Normal</Tag></Flow>
  <Flow Source="10.0.0.1" Destination="10.0.0.2" SrcPort="5" DstPort="6" Protocol="udp_ip"
        StartTime="100" StopTime="101" Tag="Attack"/>
  <Flow Source="10.0.0.1"/>
  <Other/>
</Flows>)";
    auto r = ingest(xml, s);
    ASSERT_EQ(r.flows.size(), 2u);
    EXPECT_EQ(r.flows[0].tuple, tcp("192.168.1.105", 1050, "192.168.5.122", 110));
    EXPECT_EQ(r.flows[1].tuple.protocol, proto::kUdp);
    EXPECT_EQ(r.flows[1].tag, Tag::attack);
    ASSERT_EQ(r.rejects.size(), 1u);
    EXPECT_EQ(r.rejects[0].entry, 3u);
}

TEST(DeriveFlows, SingleFlowWithinTimeout) {
    std::vector<PacketRecord> packets;
    for (int i = 0; i < 10; ++i)
        packets.push_back(synthetic::make_packet({tcp("10.0.0.1", 1, "10.0.0.2", 2)}, i * kMicrosPerSecond, i + 1));
    auto flows = derive_flows(packets, 60 * kMicrosPerSecond);
    ASSERT_EQ(flows.size(), 1u);
    EXPECT_EQ(flows[0].packet_count, 10u);
    EXPECT_EQ(flows[0].start, 0);
    EXPECT_EQ(flows[0].stop, 9 * kMicrosPerSecond);
    EXPECT_EQ(flows[0].tag, Tag::untagged);
    EXPECT_EQ(flows[0].tag_source, TagSource::derived);
    EXPECT_EQ(flows[0].byte_count, 10u * 40);

    EXPECT_EQ(derive_flows(packets, kMicrosPerSecond / 2).size(), 10u);
    EXPECT_THROW(derive_flows(packets, 0), std::invalid_argument);
}

TEST(DeriveFlows, ConservationAndSoundness) {
    testkit::Rng rng(5);
    for (int round = 0; round < 30; ++round) {
        auto pool = testkit::tuple_pool(rng, 1 + testkit::uniform(rng, 0, 6));
        auto packets = testkit::random_packets(rng, 500, pool, 600 * kMicrosPerSecond);
        auto timeout = static_cast<EpochMicros>(testkit::uniform(rng, 1, 120)) * kMicrosPerSecond;
        auto flows = derive_flows(packets, timeout);

        std::size_t keyed = 0;
        for (const auto& p : packets) keyed += p.keyed() ? 1 : 0;
        std::uint64_t total = 0;
        for (const auto& f : flows) total += f.packet_count;
        EXPECT_EQ(total, keyed);

        // Each keyed packet falls inside exactly one flow of its tuple, and
        // same-tuple flows are separated by more than the timeout.
        for (const auto& p : packets) {
            if (!p.keyed()) continue;
            int hits = 0;
            for (const auto& f : flows)
                if (f.tuple == *p.tuple && f.start <= p.timestamp && p.timestamp <= f.stop) ++hits;
            EXPECT_EQ(hits, 1);
        }
        for (const auto& a : flows)
            for (const auto& b : flows)
                if (a.flow_id != b.flow_id && a.tuple == b.tuple && a.stop <= b.start) {
                    EXPECT_GT(b.start - a.stop, timeout);
                }
    }
}

TEST(DeriveFlows, InterleavedTuplesOracle) {
    // Brute-force grouping: with no gaps over the timeout, one flow per tuple.
    std::vector<FiveTuple> tuples = {tcp("10.0.0.1", 1, "10.0.0.2", 2), tcp("10.0.0.2", 2, "10.0.0.1", 1),
                                     tcp("10.0.0.3", 3, "10.0.0.4", 4)};
    std::vector<PacketRecord> packets;
    std::map<FiveTuple, std::uint64_t> expected;
    for (int i = 0; i < 90; ++i) {
        auto& t = tuples[(i * 7) % 3];
        packets.push_back(synthetic::make_packet({t}, i * kMicrosPerSecond, i + 1));
        ++expected[t];
    }
    auto flows = derive_flows(packets);
    ASSERT_EQ(flows.size(), 3u);
    for (const auto& f : flows) EXPECT_EQ(f.packet_count, expected[f.tuple]);
}

TEST(Dedupe, IdenticalAttackFlows) {
    auto t = tcp("10.0.0.1", 1, "10.0.0.2", 2);
    std::vector<FlowRecord> in{flow(1, t, 10, 20, Tag::attack), flow(2, t, 10, 20, Tag::attack)};
    auto r = dedupe_flows(in);
    ASSERT_EQ(r.flows.size(), 1u);
    ASSERT_EQ(r.report.groups.size(), 1u);
    EXPECT_EQ(r.report.groups[0].kept_id, 1u);
    EXPECT_EQ(r.report.groups[0].merged_ids, std::vector<FlowId>{2});
    EXPECT_FALSE(r.report.groups[0].tag_conflict);
}

TEST(Dedupe, AttackWinsConflict) {
    auto t = tcp("10.0.0.1", 1, "10.0.0.2", 2);
    std::vector<FlowRecord> in{flow(1, t, 10, 20, Tag::normal), flow(2, t, 10, 20, Tag::attack)};
    auto r = dedupe_flows(in);
    ASSERT_EQ(r.flows.size(), 1u);
    EXPECT_EQ(r.flows[0].tag, Tag::attack);
    EXPECT_EQ(r.flows[0].flow_id, 1u);
    EXPECT_TRUE(r.report.groups[0].tag_conflict);
    EXPECT_EQ(r.report.groups[0].resolved_tag, Tag::attack);
}

TEST(Dedupe, DistinctInputIsUnchanged) {
    auto t = tcp("10.0.0.1", 1, "10.0.0.2", 2);
    std::vector<FlowRecord> in{flow(1, t, 10, 20, Tag::normal), flow(2, t, 10, 21, Tag::attack),
                               flow(3, t.reversed(), 10, 20, Tag::attack)};
    auto r = dedupe_flows(in);
    EXPECT_EQ(r.flows, in);
    EXPECT_TRUE(r.report.groups.empty());
}

TEST(Dedupe, Idempotent) {
    testkit::Rng rng(3);
    for (int round = 0; round < 50; ++round) {
        auto pool = testkit::tuple_pool(rng, 3);
        std::vector<FlowRecord> in;
        for (FlowId id = 1; id <= 60; ++id) {
            auto start = static_cast<EpochMicros>(testkit::uniform(rng, 0, 4));
            in.push_back(flow(id, pool[testkit::uniform(rng, 0, 2)], start, start + 1,
                              static_cast<Tag>(testkit::uniform(rng, 0, 2))));
        }
        auto once = dedupe_flows(in);
        auto twice = dedupe_flows(once.flows);
        EXPECT_EQ(twice.flows, once.flows);
        EXPECT_TRUE(twice.report.groups.empty());
        std::size_t merged = 0;
        for (const auto& g : once.report.groups) merged += g.merged_ids.size();
        EXPECT_EQ(once.flows.size() + merged, in.size());
    }
}

TEST(Overlay, RetagsPopFlowAndKeepsHistory) {
    synthetic::Dataset d;
    synthetic::add_adobe_printf(d);
    auto r = apply_overlay(d.flows(), d.overlay());
    ASSERT_EQ(r.flows.size(), 1u);
    EXPECT_EQ(r.flows[0].tag, Tag::attack);
    EXPECT_EQ(r.flows[0].tag_source, TagSource::overlay);
    ASSERT_EQ(r.flows[0].history.size(), 1u);
    EXPECT_EQ(r.flows[0].history[0].previous_tag, Tag::normal);
    EXPECT_EQ(r.retagged, 1u);
    EXPECT_TRUE(r.dead_entries.empty());
}

TEST(Overlay, EmptyAndDeadEntries) {
    auto t = tcp("10.0.0.1", 1, "10.0.0.2", 2);
    std::vector<FlowRecord> in{flow(1, t, 10, 20, Tag::normal)};
    EXPECT_EQ(apply_overlay(in, {}).flows, in);

    OverlayEntry miss;
    miss.selector.dst = AddressPattern::parse("192.168.0.0/16");
    auto r = apply_overlay(in, std::vector<OverlayEntry>{miss});
    EXPECT_EQ(r.flows, in);
    EXPECT_EQ(r.dead_entries, std::vector<std::size_t>{0});
}

TEST(Overlay, TouchesOnlyMatchedFlows) {
    testkit::Rng rng(8);
    auto pool = testkit::tuple_pool(rng, 8);
    auto flows = testkit::random_flows(rng, 200, pool, 1000);
    OverlayEntry e;
    e.selector.src = AddressPattern{pool[0].addr_a, static_cast<unsigned>(pool[0].addr_a.width() * 8)};
    e.window = {100, 500};
    auto r = apply_overlay(flows, std::vector<OverlayEntry>{e});
    ASSERT_EQ(r.flows.size(), flows.size());
    for (std::size_t i = 0; i < flows.size(); ++i) {
        bool hit = e.selector.matches(flows[i].tuple) && e.window.overlaps(flows[i].start, flows[i].stop);
        if (hit) {
            EXPECT_EQ(r.flows[i].tag, Tag::attack);
            EXPECT_EQ(r.flows[i].tag_source, TagSource::overlay);
        } else {
            EXPECT_EQ(r.flows[i], flows[i]);
        }
    }
}

TEST(Query, AttackWithAlerts) {
    std::vector<FlowRecord> flows;
    for (FlowId id = 1; id <= 10; ++id) {
        auto f = flow(id, tcp("10.0.0.1", static_cast<std::uint16_t>(id), "10.0.0.2", 80), 100 - id, 200, Tag::attack);
        f.alert_flag = id % 3 == 0 || id == 10;
        flows.push_back(f);
    }
    FlowPredicate p;
    p.tag = Tag::attack;
    p.alert_flag = true;
    auto r = query_flows(flows, p);
    ASSERT_EQ(r.size(), 4u);
    EXPECT_EQ(r[0].flow_id, 10u);  // earliest start first
    EXPECT_EQ(query_flows(flows, {}).size(), 10u);
    FlowPredicate normal;
    normal.tag = Tag::normal;
    EXPECT_TRUE(query_flows(flows, normal).empty());
}

TEST(Query, MatchesLinearFilter) {
    testkit::Rng rng(12);
    for (int round = 0; round < 100; ++round) {
        auto pool = testkit::tuple_pool(rng, 6);
        auto flows = testkit::random_flows(rng, 150, pool, 10000);
        for (auto& f : flows) f.alert_flag = testkit::chance(rng, 0.3);
        FlowPredicate p;
        if (testkit::chance(rng, 0.5)) p.tag = static_cast<Tag>(testkit::uniform(rng, 0, 2));
        if (testkit::chance(rng, 0.5)) p.alert_flag = testkit::chance(rng, 0.5);
        if (testkit::chance(rng, 0.3)) p.tuple.dst_port = pool[testkit::uniform(rng, 0, 5)].port_b;
        if (testkit::chance(rng, 0.3)) p.window = {static_cast<EpochMicros>(testkit::uniform(rng, 0, 5000)),
                                                   static_cast<EpochMicros>(testkit::uniform(rng, 5000, 10000))};
        auto got = query_flows(flows, p);

        std::set<FlowId> expected;
        for (const auto& f : flows) {
            bool ok = (!p.tag || f.tag == *p.tag) && (!p.alert_flag || f.alert_flag == *p.alert_flag) &&
                      (!p.tuple.dst_port || f.tuple.port_b == *p.tuple.dst_port) &&
                      (!p.window.from || f.stop >= *p.window.from) && (!p.window.to || f.start <= *p.window.to);
            if (ok) expected.insert(f.flow_id);
        }
        std::set<FlowId> ids;
        for (const auto& f : got) ids.insert(f.flow_id);
        EXPECT_EQ(ids, expected);
        EXPECT_EQ(got.size(), expected.size());
        EXPECT_TRUE(std::is_sorted(got.begin(), got.end(), [](const FlowRecord& a, const FlowRecord& b) {
            return std::tie(a.start, a.flow_id) < std::tie(b.start, b.flow_id);
        }));
    }
}

TEST(Query, PredicateGrammar) {
    auto p = parse_flow_predicate("tag=attack alert=true dst=192.168.5.0/24 dport=80 proto=tcp");
    ASSERT_TRUE(std::holds_alternative<FlowPredicate>(p));
    const auto& q = std::get<FlowPredicate>(p);
    EXPECT_EQ(q.tag, Tag::attack);
    EXPECT_EQ(q.alert_flag, true);
    EXPECT_EQ(q.tuple.dst_port, 80);
    EXPECT_EQ(q.tuple.protocol, proto::kTcp);
    EXPECT_TRUE(q.tuple.dst->matches(*IpAddress::parse("192.168.5.123")));

    EXPECT_TRUE(std::holds_alternative<FlowPredicate>(parse_flow_predicate("")));
    EXPECT_TRUE(std::holds_alternative<FlowPredicate>(parse_flow_predicate("from=2010-06-14T00:00:00Z to=1276560000")));
    for (const char* bad : {"tag", "tag=evil", "alert=maybe", "sport=99999", "colour=red", "tag=attack tag=normal",
                            "=x", "src=1.2.3"})
        EXPECT_TRUE(std::holds_alternative<std::string>(parse_flow_predicate(bad))) << bad;
}
