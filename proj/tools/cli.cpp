#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <future>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "fnroot/fnroot.hpp"
#include "workspace.hpp"

namespace fnroot::cli {

namespace fs = std::filesystem;

namespace {

struct Config {
    Json snapshot = Json::object();
    std::optional<std::string> workspace;
    std::optional<int> base_year;
    EpochMicros tolerance = 0;
    Directionality packet_direction = Directionality::directional;
    Directionality alert_direction = Directionality::bidirectional;
    EpochMicros idle_timeout = kDefaultIdleTimeout;
    std::optional<LabelSchema> flow_schema;
    std::optional<AlertCsvSchema> alert_csv_schema;
    std::vector<OverlayEntry> overlays;
    std::vector<AttackScenario> scenarios;
};

EpochMicros seconds_to_micros(double s, const std::string& what) {
    if (!std::isfinite(s) || s < 0) throw ConfigError(what + " must be a non-negative number of seconds");
    return static_cast<EpochMicros>(std::llround(s * 1e6));
}

Directionality parse_direction(const std::string& s) {
    if (s == "directional") return Directionality::directional;
    if (s == "bidirectional") return Directionality::bidirectional;
    throw ConfigError("directionality must be 'directional' or 'bidirectional', got '" + s + "'");
}

std::string direction_name(Directionality d) {
    return d == Directionality::directional ? "directional" : "bidirectional";
}

Config parse_config(const Json& j) {
    detail::require_keys(j,
                         {"workspace", "base_year", "tolerance_seconds", "packet_directionality",
                          "alert_directionality", "idle_timeout_seconds", "flow_schema", "alert_csv_schema",
                          "overlays", "scenarios"},
                         "configuration");
    Config c;
    c.snapshot = j;
    c.workspace = detail::opt<std::string>(j, "workspace");
    c.base_year = detail::opt<int>(j, "base_year");
    if (j.contains("tolerance_seconds"))
        c.tolerance = seconds_to_micros(j.at("tolerance_seconds").get<double>(), "tolerance_seconds");
    if (j.contains("idle_timeout_seconds"))
        c.idle_timeout = seconds_to_micros(j.at("idle_timeout_seconds").get<double>(), "idle_timeout_seconds");
    if (j.contains("packet_directionality"))
        c.packet_direction = parse_direction(j.at("packet_directionality").get<std::string>());
    if (j.contains("alert_directionality"))
        c.alert_direction = parse_direction(j.at("alert_directionality").get<std::string>());
    if (j.contains("flow_schema")) c.flow_schema = label_schema_from_json(j.at("flow_schema"));
    if (j.contains("alert_csv_schema")) c.alert_csv_schema = alert_csv_schema_from_json(j.at("alert_csv_schema"));
    for (const auto& o : j.value("overlays", Json::array())) c.overlays.push_back(overlay_from_json(o));
    if (j.contains("scenarios")) c.scenarios = scenarios_from_json(j.at("scenarios"));
    return c;
}

/// Label files default to comma-separated columns named after their roles.
LabelSchema default_label_schema() {
    LabelSchema s;
    for (const auto& role : LabelSchema::kRequiredRoles) s.fields[role] = role;
    return s;
}

Json load_json_file(const fs::path& path) {
    if (!fs::exists(path)) throw CliError(kMissingInput, "no such file: " + path.string());
    try {
        return Json::parse(read_file(path));
    } catch (const Json::exception& e) {
        throw CliError(kFormatError, path.string() + ": " + e.what());
    }
}

void require_file(const std::string& path) {
    if (!fs::is_regular_file(path)) throw CliError(kMissingInput, "no such file: " + path);
}

bool valid_label(const std::string& label) {
    static const std::regex pattern("[A-Za-z0-9][A-Za-z0-9._-]*");
    return std::regex_match(label, pattern);
}

int year_of(EpochMicros t) {
    using namespace std::chrono;
    auto days = floor<std::chrono::days>(sys_time<microseconds>(microseconds(t)));
    return int(year_month_day{days}.year());
}

template <typename T, typename F>
std::vector<Json> to_records(const std::vector<T>& items, F convert) {
    std::vector<Json> out;
    out.reserve(items.size());
    for (const auto& item : items) out.push_back(convert(item));
    return out;
}

template <typename T>
std::vector<Json> to_records(const std::vector<T>& items) {
    return to_records(items, [](const T& v) { return to_json(v); });
}

template <typename T, typename F>
std::vector<T> from_records(const std::vector<Json>& records, F convert) {
    std::vector<T> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(convert(r));
    return out;
}

/// Prints at most `limit` lines of a long list, then a count of the rest.
template <typename T, typename F>
void report_list(std::ostream& err, const std::vector<T>& items, F line, std::size_t limit = 20) {
    for (std::size_t i = 0; i < items.size() && i < limit; ++i) err << line(items[i]) << "\n";
    if (items.size() > limit) err << "  ... and " << items.size() - limit << " more\n";
}

struct Options {
    std::string workspace;
    std::string config;
    bool quiet = false;

    std::vector<std::string> captures;
    std::string labels;
    bool derive = false;
    std::optional<double> idle_timeout;
    std::string alert_path;
    std::string alert_format;
    std::string label;
    std::optional<double> tolerance;
    std::string packet_direction;
    std::string alert_direction;
    std::string scenarios;
    std::string ruleset;
    std::vector<std::string> compare_labels;
    std::vector<std::string> query_terms;
};

class Session {
public:
    Session(const Options& o, std::ostream& out, std::ostream& err) : opt_(o), out_(out), err_(err), ws_("") {}

    int dispatch(const std::string& command) {
        std::optional<Json> given_config;
        if (!opt_.config.empty()) given_config = load_json_file(opt_.config);
        if (given_config) config_ = parse_config(*given_config);
        ws_ = Workspace(resolve_workspace());

        if (command == "init") return init(given_config);
        if (command == "query") {
            ws_.load();
            load_snapshot_config();
            return query();
        }

        ws_.load();
        WorkspaceLock lock(ws_.root());
        ws_.load();
        if (given_config) adopt_config(*given_config);
        else load_snapshot_config();

        if (command == "ingest-pcap") return ingest_pcap();
        if (command == "ingest-flows") return ingest_flows();
        if (command == "ingest-alerts") return ingest_alerts();
        if (command == "map") return map();
        if (command == "classify") return classify();
        if (command == "report") return report();
        if (command == "compare") return compare();
        throw CliError(kUsage, "unknown command " + command);
    }

private:
    std::ostream& out() { return quiet_sink_ ? null_ : out_; }

    fs::path resolve_workspace() const {
        if (!opt_.workspace.empty()) return opt_.workspace;
        if (config_.workspace) return *config_.workspace;
        if (const char* env = std::getenv(kWorkspaceEnv); env && *env) return env;
        return kDefaultWorkspace;
    }

    void load_snapshot_config() {
        if (fs::exists(ws_.root() / "config.json")) config_ = parse_config(ws_.read_json("config.json"));
    }

    /// A configuration differing from the snapshot replaces it and
    /// invalidates every stage.
    void adopt_config(const Json& config) {
        auto digest = sha256_hex(config.dump());
        if (ws_.manifest().value("config_digest", "") == digest) return;
        bool had_stages = !ws_.manifest()["stages"].empty();
        ws_.write_json("config.json", config);
        ws_.manifest()["config_digest"] = digest;
        ws_.invalidate_all();
        ws_.save();
        if (had_stages) err_ << "configuration changed; all stages must be re-run\n";
    }

    int init(const std::optional<Json>& config) {
        fs::create_directories(ws_.root());
        WorkspaceLock lock(ws_.root());
        bool existed = ws_.initialized();
        ws_.create();
        if (config) adopt_config(*config);
        else if (!existed) adopt_config(Json::object());
        out() << (existed ? "workspace already initialized: " : "initialized workspace ") << ws_.root().string()
              << "\n";
        return kOk;
    }

    void record(const std::string& name, Json info) {
        auto digest = sha256_hex(info.dump());
        bool changed = !ws_.complete(name) || ws_.stage_info(name).value("digest", "") != digest;
        if (changed) ws_.invalidate_downstream(name);
        info["digest"] = digest;
        ws_.mark_complete(name, std::move(info));
        ws_.save();
    }

    // -- ingest-pcap ---------------------------------------------------------

    int ingest_pcap() {
        for (const auto& p : opt_.captures) require_file(p);
        std::vector<std::future<ParsedCapture>> jobs;
        std::vector<std::string> bytes(opt_.captures.size());
        for (std::size_t i = 0; i < opt_.captures.size(); ++i) {
            bytes[i] = read_file(opt_.captures[i]);
            jobs.push_back(std::async(std::launch::async, [&, i] {
                std::span<const std::uint8_t> data(reinterpret_cast<const std::uint8_t*>(bytes[i].data()),
                                                   bytes[i].size());
                return parse_capture(data);
            }));
        }

        std::vector<PacketRecord> packets;
        Json inputs = Json::array();
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            ParsedCapture capture;
            try {
                capture = jobs[i].get();
            } catch (const CaptureFormatError& e) {
                std::ostringstream msg;
                msg << opt_.captures[i] << ": " << e.what() << " at byte offset " << e.offset() << " after "
                    << e.packets_parsed() << " packets";
                throw CliError(kFormatError, msg.str());
            }
            const auto& m = capture.metadata;
            inputs.push_back({{"name", fs::path(opt_.captures[i]).filename().string()},
                              {"sha256", sha256_hex(bytes[i])},
                              {"precision", m.precision == TimestampPrecision::microsecond ? "us" : "ns"},
                              {"byte_order", m.byte_order == ByteOrder::little ? "little" : "big"},
                              {"link_type", m.link_type},
                              {"snap_length", m.snap_length},
                              {"packets", m.packet_count}});
            for (auto& p : capture.packets) {
                p.packet_id = packets.size() + 1;
                packets.push_back(std::move(p));
            }
        }

        std::size_t keyed = 0;
        std::map<std::string, std::size_t> unkeyed;
        std::optional<EpochMicros> first, last;
        for (const auto& p : packets) {
            if (p.keyed()) ++keyed;
            else ++unkeyed[*p.unkeyed_reason];
            first = std::min(first.value_or(p.timestamp), p.timestamp);
            last = std::max(last.value_or(p.timestamp), p.timestamp);
        }

        ws_.write_store("packets.jsonl", "packets", to_records(packets));
        Json info{{"inputs", inputs}, {"count", packets.size()}, {"keyed", keyed}};
        if (first) {
            info["first_ts"] = *first;
            info["last_ts"] = *last;
        }
        record(stage::kPackets, info);

        if (!unkeyed.empty() && !opt_.quiet) {
            err_ << "unkeyed packets:";
            for (const auto& [reason, n] : unkeyed) err_ << " " << reason << "=" << n;
            err_ << "\n";
        }
        out() << "ingested " << packets.size() << " packets (" << keyed << " keyed, " << packets.size() - keyed
              << " unkeyed) from " << opt_.captures.size() << " capture(s)\n";
        return kOk;
    }

    // -- ingest-flows --------------------------------------------------------

    int ingest_flows() {
        if (opt_.derive == !opt_.labels.empty())
            throw CliError(kUsage, "ingest-flows takes either a label file or --derive");

        LabelIngest ingest;
        Json source;
        if (opt_.derive) {
            ws_.require(stage::kPackets);
            auto idle = opt_.idle_timeout ? seconds_to_micros(*opt_.idle_timeout, "--idle-timeout")
                                          : config_.idle_timeout;
            auto packets = from_records<PacketRecord>(ws_.read_store("packets.jsonl", "packets"), packet_from_json);
            ingest.flows = derive_flows(packets, idle);
            source = {{"source", "derived"},
                      {"idle_timeout_us", idle},
                      {"packets_digest", ws_.stage_info(stage::kPackets).value("digest", "")}};
        } else {
            require_file(opt_.labels);
            auto schema = config_.flow_schema.value_or(default_label_schema());
            schema.validate();
            std::ifstream in(opt_.labels, std::ios::binary);
            ingest = ingest_flow_labels(in, schema);
            source = {{"source", "labels"},
                      {"input", {{"name", fs::path(opt_.labels).filename().string()},
                                 {"sha256", sha256_file(opt_.labels)}}}};
        }

        auto deduped = dedupe_flows(ingest.flows);
        auto overlaid = apply_overlay(deduped.flows, config_.overlays);
        const auto& flows = overlaid.flows;

        std::size_t conflicts = 0;
        for (const auto& g : deduped.report.groups) conflicts += g.tag_conflict ? 1 : 0;
        std::map<Tag, std::size_t> tags;
        for (const auto& f : flows) ++tags[f.tag];

        ws_.write_store("flows.jsonl", "flows", to_records(flows));
        ws_.write_store("flows.rejects.jsonl", "label-rejects", to_records(ingest.rejects));
        ws_.write_json("flows.duplicates.json", to_json(deduped.report));
        ws_.write_json("flows.overlay.json", {{"dead_entries", overlaid.dead_entries}, {"retagged", overlaid.retagged}});

        source["count"] = flows.size();
        source["rejects"] = ingest.rejects.size();
        source["duplicate_groups"] = deduped.report.groups.size();
        record(stage::kFlows, source);

        if (!ingest.rejects.empty()) {
            err_ << ingest.rejects.size() << " label entries rejected:\n";
            report_list(err_, ingest.rejects,
                        [](const LabelReject& r) { return "  entry " + std::to_string(r.entry) + ": " + r.reason; });
        }
        for (auto i : overlaid.dead_entries) err_ << "warning: overlay entry " << i << " matched no flow\n";
        out() << "ingested " << flows.size() << " flows (" << tags[Tag::attack] << " attack, " << tags[Tag::normal]
              << " normal, " << tags[Tag::untagged] << " untagged); " << ingest.rejects.size() << " rejected; "
              << deduped.report.groups.size() << " duplicate groups (" << conflicts << " with conflicting tags); "
              << overlaid.retagged << " retagged by overlay\n";
        return kOk;
    }

    // -- ingest-alerts -------------------------------------------------------

    int ingest_alerts() {
        if (!valid_label(opt_.label))
            throw CliError(kUsage, "ruleset label must match [A-Za-z0-9][A-Za-z0-9._-]*, got '" + opt_.label + "'");
        require_file(opt_.alert_path);

        AlertTimeContext ctx;
        if (ws_.complete(stage::kPackets)) {
            const auto& info = ws_.stage_info(stage::kPackets);
            if (info.contains("first_ts")) {
                ctx.capture_range = {info.at("first_ts").get<EpochMicros>(), info.at("last_ts").get<EpochMicros>()};
                ctx.base_year = year_of(ctx.capture_range->first);
            }
        }
        if (config_.base_year) ctx.base_year = *config_.base_year;

        std::ifstream in(opt_.alert_path, std::ios::binary);
        AlertParse parsed;
        std::string format = opt_.alert_format == "fast" ? "snort-fast" : opt_.alert_format;
        if (format == "snort-fast") {
            parsed = parse_snort_fast(in, opt_.label, ctx);
        } else if (format == "eve") {
            parsed = parse_eve(in, opt_.label);
        } else {
            if (!config_.alert_csv_schema) throw ConfigError("the configuration has no alert_csv_schema");
            parsed = parse_generic_alert_csv(in, *config_.alert_csv_schema, opt_.label);
        }
        if (parsed.suspicious())
            throw CliError(kFormatError, opt_.alert_path + ": no line parsed as " + format + " (" +
                                             std::to_string(parsed.rejects.size()) +
                                             " rejected); check --format");

        auto name = stage::alerts(opt_.label);
        ws_.write_store("alerts/" + opt_.label + ".jsonl", "alerts", to_records(parsed.alerts));
        ws_.write_store("alerts/" + opt_.label + ".rejects.jsonl", "alert-rejects", to_records(parsed.rejects));
        record(name, {{"format", format},
                      {"input", {{"name", fs::path(opt_.alert_path).filename().string()},
                                 {"sha256", sha256_file(opt_.alert_path)}}},
                      {"base_year", ctx.base_year},
                      {"count", parsed.alerts.size()},
                      {"rejected", parsed.rejects.size()},
                      {"skipped", parsed.skipped},
                      {"lines", parsed.total_lines}});

        if (!parsed.rejects.empty()) {
            err_ << parsed.rejects.size() << " alert lines rejected:\n";
            report_list(err_, parsed.rejects,
                        [](const AlertReject& r) { return "  line " + std::to_string(r.line) + ": " + r.reason; });
        }
        out() << "ingested " << parsed.alerts.size() << " alerts for ruleset " << opt_.label << " ("
              << parsed.rejects.size() << " rejected, " << parsed.skipped << " skipped, " << parsed.total_lines
              << " lines)\n";
        return kOk;
    }

    // -- map -----------------------------------------------------------------

    static std::string mode_summary(const std::vector<MappingEntry>& entries) {
        std::map<MappingMode, std::size_t> n;
        for (const auto& e : entries) ++n[e.mode];
        std::ostringstream os;
        os << n[MappingMode::strict] << " strict, " << n[MappingMode::relaxed] << " relaxed, "
           << n[MappingMode::unmapped_tuple_known] << " unmapped-tuple-known, " << n[MappingMode::unmapped_no_tuple]
           << " unmapped-no-tuple";
        return os.str();
    }

    int map() {
        ws_.require(stage::kPackets);
        ws_.require(stage::kFlows);
        auto labels = ws_.alert_labels(true);
        if (labels.empty()) throw CliError(kStageOrder, "prerequisite stage 'alerts' is not complete");

        auto tolerance = opt_.tolerance ? seconds_to_micros(*opt_.tolerance, "--tolerance") : config_.tolerance;
        auto packet_dir =
            opt_.packet_direction.empty() ? config_.packet_direction : parse_direction(opt_.packet_direction);
        auto alert_dir = opt_.alert_direction.empty() ? config_.alert_direction : parse_direction(opt_.alert_direction);

        auto packets = from_records<PacketRecord>(ws_.read_store("packets.jsonl", "packets"), packet_from_json);
        auto flows = from_records<FlowRecord>(ws_.read_store("flows.jsonl", "flows"), flow_from_json);
        for (auto& f : flows) {
            f.mapped_packets = 0;
            f.alert_flag = false;
        }

        FlowIndex packet_index(flows, packet_dir);
        auto packet_entries = map_all_packets(packets, packet_index, tolerance, flows);
        ws_.write_store("map/packets.jsonl", "packet-mapping", to_records(packet_entries));
        out() << "packets: " << mode_summary(packet_entries) << "\n";

        FlowIndex alert_index(flows, alert_dir);
        for (const auto& label : labels) {
            auto alerts = from_records<AlertRecord>(ws_.read_store("alerts/" + label + ".jsonl", "alerts"),
                                                    alert_from_json);
            auto labelled = flows;
            auto mapping = map_all_alerts(alerts, alert_index, tolerance, labelled);
            ws_.write_store("map/" + label + ".alerts.jsonl", "alert-mapping", to_records(mapping.entries));
            ws_.write_store("map/" + label + ".flows.jsonl", "flows", to_records(labelled));
            ws_.write_json("map/" + label + ".unattributable.json", mapping.unattributable);
            out() << "alerts[" << label << "]: " << mode_summary(mapping.entries) << "\n";
        }

        Json inputs = Json::object();
        for (const auto& name : std::vector<std::string>{stage::kPackets, stage::kFlows})
            inputs[name] = ws_.stage_info(name).value("digest", "");
        for (const auto& label : labels) inputs[stage::alerts(label)] = ws_.stage_info(stage::alerts(label)).value("digest", "");
        record(stage::kMap, {{"tolerance_us", tolerance},
                             {"packet_directionality", direction_name(packet_dir)},
                             {"alert_directionality", direction_name(alert_dir)},
                             {"labels", labels},
                             {"inputs", inputs}});
        return kOk;
    }

    std::vector<std::string> mapped_labels() const {
        return ws_.stage_info(stage::kMap).at("labels").get<std::vector<std::string>>();
    }

    // -- classify ------------------------------------------------------------

    int classify() {
        ws_.require(stage::kMap);
        std::vector<AttackScenario> scenarios = config_.scenarios;
        if (!opt_.scenarios.empty()) {
            auto j = load_json_file(opt_.scenarios);
            scenarios = scenarios_from_json(j.is_object() && j.contains("scenarios") ? j.at("scenarios") : j);
        }
        Json scenario_json = Json::array();
        for (const auto& s : scenarios) scenario_json.push_back(to_json(s));
        ws_.write_json("scenarios.json", scenario_json);

        auto labels = mapped_labels();
        for (const auto& label : labels) {
            auto flows = from_records<FlowRecord>(ws_.read_store("map/" + label + ".flows.jsonl", "flows"),
                                                  flow_from_json);
            auto alerts = from_records<AlertRecord>(ws_.read_store("alerts/" + label + ".jsonl", "alerts"),
                                                    alert_from_json);
            auto mapping = from_records<MappingEntry>(
                ws_.read_store("map/" + label + ".alerts.jsonl", "alert-mapping"), mapping_from_json);
            auto verdicts = classify_flows(flows, alerts, mapping, scenarios);
            auto summary = confusion_summary(verdicts);
            ws_.write_store("verdicts/" + label + ".jsonl", "verdicts", to_records(verdicts));
            ws_.write_json("verdicts/" + label + ".summary.json", to_json(summary));

            std::size_t overlaps = 0;
            for (const auto& v : verdicts) overlaps += v.scenario_overlap ? 1 : 0;
            if (overlaps > 0)
                err_ << "warning: " << overlaps << " attack flows match more than one scenario; the first listed wins\n";
            out() << "ruleset " << label << ":";
            for (auto c : kAllVerdictClasses) out() << " " << to_string(c) << "=" << summary.count(c);
            out() << " (" << summary.total << " flows)\n";
        }
        record(stage::kClassify, {{"labels", labels},
                                  {"scenarios_digest", sha256_hex(scenario_json.dump())},
                                  {"map_digest", ws_.stage_info(stage::kMap).value("digest", "")}});
        return kOk;
    }

    std::vector<std::string> classified_labels() const {
        return ws_.stage_info(stage::kClassify).at("labels").get<std::vector<std::string>>();
    }

    void require_classified(const std::string& label) const {
        auto labels = classified_labels();
        if (std::find(labels.begin(), labels.end(), label) == labels.end())
            throw CliError(kStageOrder, "ruleset '" + label + "' has not been classified");
    }

    std::vector<AttackScenario> stored_scenarios() const { return scenarios_from_json(ws_.read_json("scenarios.json")); }

    std::vector<FlowVerdict> stored_verdicts(const std::string& label) const {
        return from_records<FlowVerdict>(ws_.read_store("verdicts/" + label + ".jsonl", "verdicts"), verdict_from_json);
    }

    // -- report --------------------------------------------------------------

    int report() {
        ws_.require(stage::kClassify);
        auto labels = classified_labels();
        if (!opt_.ruleset.empty()) {
            require_classified(opt_.ruleset);
            labels = {opt_.ruleset};
        }
        auto scenarios = stored_scenarios();
        auto packets = from_records<PacketRecord>(ws_.read_store("packets.jsonl", "packets"), packet_from_json);
        auto packet_mapping =
            from_records<MappingEntry>(ws_.read_store("map/packets.jsonl", "packet-mapping"), mapping_from_json);

        for (const auto& label : labels) {
            auto flows = from_records<FlowRecord>(ws_.read_store("map/" + label + ".flows.jsonl", "flows"),
                                                  flow_from_json);
            auto alerts = from_records<AlertRecord>(ws_.read_store("alerts/" + label + ".jsonl", "alerts"),
                                                    alert_from_json);
            auto alert_mapping = from_records<MappingEntry>(
                ws_.read_store("map/" + label + ".alerts.jsonl", "alert-mapping"), mapping_from_json);
            auto unattributable =
                ws_.read_json("map/" + label + ".unattributable.json").get<std::vector<AlertId>>();
            auto verdicts = stored_verdicts(label);

            ReportInputs in{label, flows, packets, packet_mapping, alerts, alert_mapping, unattributable, verdicts,
                            scenarios};
            auto rep = generate_report(in);
            auto text = render_report(rep);
            ws_.write_json("reports/" + label + ".json", to_json(rep));
            ws_.write_text("reports/" + label + ".txt", text);
            out() << text;
        }
        record(stage::kReport, {{"labels", labels},
                                {"classify_digest", ws_.stage_info(stage::kClassify).value("digest", "")}});
        return kOk;
    }

    // -- compare -------------------------------------------------------------

    int compare() {
        if (opt_.compare_labels.size() != 2)
            throw CliError(kUsage, "compare needs exactly two ruleset labels, got " +
                                       std::to_string(opt_.compare_labels.size()));
        const auto& a = opt_.compare_labels[0];
        const auto& b = opt_.compare_labels[1];
        if (a == b) throw CliError(kUsage, "compare needs two different ruleset labels");
        ws_.require(stage::kClassify);
        require_classified(a);
        require_classified(b);

        auto diff = compare_rulesets(stored_verdicts(a), stored_verdicts(b), stored_scenarios(), a, b);
        auto text = render_diff(diff);
        ws_.write_json("compare/" + a + "__" + b + ".json", to_json(diff));
        ws_.write_text("compare/" + a + "__" + b + ".txt", text);
        out() << text;
        return kOk;
    }

    // -- query ---------------------------------------------------------------

    int query() {
        std::string text;
        for (const auto& t : opt_.query_terms) text += (text.empty() ? "" : " ") + t;
        auto parsed = parse_flow_predicate(text);
        if (auto* error = std::get_if<std::string>(&parsed))
            throw CliError(kUsage, *error + "\n" + kPredicateGrammar);

        ws_.require(stage::kClassify);
        auto labels = classified_labels();
        std::string label = opt_.ruleset;
        if (label.empty()) {
            if (labels.size() != 1)
                throw CliError(kUsage, "several rulesets are classified; choose one with --ruleset");
            label = labels.front();
        }
        require_classified(label);

        auto flows = from_records<FlowRecord>(ws_.read_store("map/" + label + ".flows.jsonl", "flows"),
                                              flow_from_json);
        auto matches = query_flows(flows, std::get<FlowPredicate>(parsed));
        for (const auto& f : matches)
            out_ << f.flow_id << '\t' << f.tuple.to_string() << '\t' << format_time(f.start) << '\t'
                 << format_time(f.stop) << '\t' << to_string(f.tag) << '\t' << (f.alert_flag ? "alert" : "-") << '\n';
        out_ << matches.size() << " flows\n";
        return kOk;
    }

    struct NullBuffer : std::streambuf {
        int overflow(int c) override { return c; }
    };

    const Options& opt_;
    std::ostream& out_;
    std::ostream& err_;
    NullBuffer null_buffer_;
    std::ostream null_{&null_buffer_};
    bool quiet_sink_ = opt_.quiet;
    Workspace ws_;
    Config config_;
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options opt;
    CLI::App app{"Correlates packet captures, flow labels and IDS alerts to find and explain false negatives.",
                 "fnroot"};
    app.fallthrough();
    app.require_subcommand(1);
    app.add_option("--workspace", opt.workspace, "Workspace directory");
    app.add_option("--config", opt.config, "Configuration file (JSON)");
    app.add_flag("--quiet,-q", opt.quiet, "Suppress summaries on standard output");

    app.add_subcommand("init", "Create a workspace and snapshot the configuration");
    auto* pcap = app.add_subcommand("ingest-pcap", "Parse capture files into the packet store");
    pcap->add_option("captures", opt.captures, "Capture files (classic pcap)")->required();
    auto* flows = app.add_subcommand("ingest-flows", "Load ground-truth flow labels, or derive flows from packets");
    flows->add_option("labels", opt.labels, "Label file (CSV or XML, per flow_schema)");
    flows->add_flag("--derive", opt.derive, "Build untagged flows from the packet store");
    flows->add_option("--idle-timeout", opt.idle_timeout, "Idle gap in seconds that splits derived flows");
    auto* alerts = app.add_subcommand("ingest-alerts", "Parse one IDS alert log under a ruleset label");
    alerts->add_option("path", opt.alert_path, "Alert log")->required();
    alerts->add_option("--format", opt.alert_format, "snort-fast, eve or csv")
        ->required()
        ->check(CLI::IsMember({"snort-fast", "fast", "eve", "csv"}));
    alerts->add_option("--label", opt.label, "Ruleset label, e.g. snort or suricata")->required();
    auto* map = app.add_subcommand("map", "Attribute packets and alerts to flows");
    map->add_option("--tolerance", opt.tolerance, "Seconds a subject may trail a flow's stop time");
    map->add_option("--packet-direction", opt.packet_direction, "directional or bidirectional")
        ->check(CLI::IsMember({"directional", "bidirectional"}));
    map->add_option("--alert-direction", opt.alert_direction, "directional or bidirectional")
        ->check(CLI::IsMember({"directional", "bidirectional"}));
    auto* classify = app.add_subcommand("classify", "Assign a verdict class to every flow");
    classify->add_option("--scenarios", opt.scenarios, "Scenario file overriding the configuration");
    auto* report = app.add_subcommand("report", "Write root-cause reports");
    report->add_option("--ruleset", opt.ruleset, "Only this ruleset");
    auto* compare = app.add_subcommand("compare", "Diff detection outcomes of two rulesets");
    compare->add_option("rulesets", opt.compare_labels, "Two ruleset labels");
    auto* query = app.add_subcommand("query", "Print flows matching a predicate");
    query->add_option("predicate", opt.query_terms, "Terms such as tag=attack alert=true");
    query->add_option("--ruleset", opt.ruleset, "Ruleset whose alert flags to use");
    query->footer(kPredicateGrammar);

    std::vector<std::string> argv_storage{"fnroot"};
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_storage) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e, out, err);
        return rc == 0 ? kOk : kUsage;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        Session session(opt, out, err);
        return session.dispatch(command);
    } catch (const CliError& e) {
        err << "error: " << e.what() << "\n";
        return e.code();
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << "\n";
        return kFormatError;
    } catch (const Json::exception& e) {
        err << "format error: " << e.what() << "\n";
        return kFormatError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kFormatError;
    }
}

}  // namespace fnroot::cli
