#include "simpipe/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <map>
#include <set>

#include "simpipe/dataset.hpp"
#include "simpipe/error.hpp"
#include "simpipe/fsutil.hpp"
#include "simpipe/otn.hpp"
#include "simpipe/pcap.hpp"
#include "simpipe/rng.hpp"

namespace simpipe::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(Mode mode) noexcept
{
    return mode == Mode::singular ? "singular" : "distributed";
}

Mode mode_from_string(const std::string& name)
{
    if (name == "singular")
        return Mode::singular;
    if (name == "distributed")
        return Mode::distributed;
    throw config_error("unknown mode '" + name + "' (expected singular or distributed)");
}

StageSeeds derive_stage_seeds(std::uint64_t base)
{
    return {splitmix64(base ^ 1), splitmix64(base ^ 2), splitmix64(base ^ 3)};
}

void PipelineConfig::validate() const
{
    if (!(timeout_s > 0.0))
        throw config_error("timeout_s must be positive");
    if (poll_interval_ms <= 0)
        throw config_error("poll_interval_ms must be positive");
    if (worker_count <= 0)
        throw config_error("workers must be positive");
    if (worker_id < 0 || worker_id >= worker_count)
        throw config_error("worker_id must lie in [0, workers)");
    if (mode == Mode::singular && worker_count != 1)
        throw config_error("singular mode runs exactly one worker");
    if (master_dir.empty())
        throw config_error("master_dir is not set");
    if (transport.topology.empty())
        throw config_error("transport.topology is not set");
    if (transport.k == 0)
        throw config_error("transport.k must be positive");
    if (!(transport.rate_headroom >= 1.0))
        throw config_error("transport.rate_headroom must be >= 1");
    if (!(mobility.time_step_s > 0.0 && mobility.duration_s > 0.0))
        throw config_error("mobility time_step_s and duration_s must be positive");
    if (!mobility.import_path) {
        mobility.population.validate();
        for (const auto& e : mobility.events)
            e.validate(mobility.duration_s);
    }
    traffic.policy.validate();
    for (const auto& [kind, p] : traffic.profiles)
        p.validate();
}

// ---------------------------------------------------------------------------
// Configuration parsing

namespace {

void expect_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where)
{
    if (!obj.is_object())
        throw config_error(where + " must be an object");
    for (const auto& [key, value] : obj.items()) {
        bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
        if (!known)
            throw config_error("unknown key '" + key + "' in " + where);
    }
}

fs::path resolve(const fs::path& base, const std::string& p)
{
    fs::path path(p);
    return path.is_absolute() ? path : (base / path).lexically_normal();
}

mobility::HourWindow parse_window(const json& j)
{
    auto v = j.get<std::vector<double>>();
    if (v.size() != 2)
        throw config_error("hour windows are [start, end]");
    return {v[0], v[1]};
}

mobility::PopulationConfig parse_population(const json& j)
{
    expect_keys(j,
                {"inhabitants", "groups", "households", "work_hours", "education_hours", "map", "vehicle_share",
                 "home_radius_m", "mall_visit_probability", "locations"},
                "mobility.population");
    mobility::PopulationConfig p;
    p.inhabitant_count = j.at("inhabitants").get<std::uint64_t>();
    for (const auto& g : j.at("groups")) {
        expect_keys(g, {"name", "fraction", "employment_rate", "student"}, "population group");
        p.demographic_groups.push_back({g.at("name").get<std::string>(), g.at("fraction").get<double>(),
                                        g.value("employment_rate", 0.0), g.value("student", false)});
    }
    for (const auto& h : j.value("households", json::array({{{"size", 1}, {"probability", 1.0}}}))) {
        expect_keys(h, {"size", "probability"}, "household size");
        p.household_size_distribution.push_back({h.at("size").get<int>(), h.at("probability").get<double>()});
    }
    if (j.contains("work_hours"))
        p.work_hours = parse_window(j.at("work_hours"));
    if (j.contains("education_hours"))
        p.education_hours = parse_window(j.at("education_hours"));
    if (j.contains("map")) {
        expect_keys(j.at("map"), {"width_m", "height_m"}, "population map");
        p.map_width_m = j.at("map").value("width_m", p.map_width_m);
        p.map_height_m = j.at("map").value("height_m", p.map_height_m);
    }
    p.vehicle_share = j.value("vehicle_share", p.vehicle_share);
    p.home_radius_m = j.value("home_radius_m", p.home_radius_m);
    p.mall_visit_probability = j.value("mall_visit_probability", p.mall_visit_probability);
    for (const auto& l : j.at("locations")) {
        expect_keys(l, {"kind", "x", "y", "capacity", "open_close"}, "location");
        mobility::LocationSpec spec;
        spec.kind = mobility::location_kind_from_string(l.at("kind").get<std::string>());
        spec.position = {l.at("x").get<double>(), l.at("y").get<double>()};
        spec.capacity = l.value("capacity", 1);
        if (l.contains("open_close"))
            spec.open_close = parse_window(l.at("open_close"));
        p.locations.push_back(spec);
    }
    return p;
}

mobility::EventInjection parse_event(const json& j)
{
    expect_keys(j, {"kind", "x", "y", "radius_m", "start_s", "end_s", "intensity"}, "event");
    mobility::EventInjection e;
    auto kind = j.at("kind").get<std::string>();
    if (kind == "congestion")
        e.kind = mobility::EventKind::congestion;
    else if (kind == "public_event")
        e.kind = mobility::EventKind::public_event;
    else
        throw config_error("unknown event kind '" + kind + "'");
    e.center = {j.at("x").get<double>(), j.at("y").get<double>()};
    e.radius_m = j.at("radius_m").get<double>();
    e.start_s = j.at("start_s").get<double>();
    e.end_s = j.at("end_s").get<double>();
    e.intensity = j.at("intensity").get<double>();
    return e;
}

traffic::AppAssignmentPolicy parse_policy(const json& j)
{
    expect_keys(j, {"mode", "app", "mix"}, "traffic.policy");
    traffic::AppAssignmentPolicy p;
    auto mode = j.at("mode").get<std::string>();
    if (mode == "single_app") {
        p.mode = traffic::AppAssignmentPolicy::Mode::single_app;
        p.single_app = traffic::app_kind_from_string(j.at("app").get<std::string>());
    } else if (mode == "heterogeneous") {
        p.mode = traffic::AppAssignmentPolicy::Mode::heterogeneous;
        for (const auto& e : j.at("mix")) {
            expect_keys(e, {"group", "band", "video_streaming", "voip", "file_transfer"}, "mix entry");
            std::array<double, 3> probs{};
            for (auto k : traffic::all_app_kinds)
                probs[traffic::app_index(k)] = e.value(traffic::to_string(k), 0.0);
            auto group = e.value("group", std::string("*"));
            auto band = e.value("band", std::string("*"));
            if (band == "*") {
                for (auto b : {traffic::HourBand::night, traffic::HourBand::morning, traffic::HourBand::afternoon,
                               traffic::HourBand::evening})
                    p.mix_table.try_emplace({group, b}, probs);
            } else {
                p.mix_table[{group, traffic::hour_band_from_string(band)}] = probs;
            }
        }
    } else {
        throw config_error("unknown policy mode '" + mode + "'");
    }
    return p;
}

void apply_profile_overrides(traffic::ProfileTable& table, const json& j)
{
    if (!j.is_object())
        throw config_error("traffic.profiles must be an object");
    for (const auto& [name, o] : j.items()) {
        auto kind = traffic::app_kind_from_string(name);
        expect_keys(o,
                    {"latency_req_ms", "demand_duration_s", "demand_freq_per_hour", "avg_packet_size_bytes",
                     "packet_interval_ms"},
                    "profile " + name);
        auto& p = table[kind];
        p.kind = kind;
        p.latency_req_ms = o.value("latency_req_ms", p.latency_req_ms);
        p.demand_duration_s = o.value("demand_duration_s", p.demand_duration_s);
        p.demand_freq_per_hour = o.value("demand_freq_per_hour", p.demand_freq_per_hour);
        p.avg_packet_size_bytes = o.value("avg_packet_size_bytes", p.avg_packet_size_bytes);
        p.packet_interval_ms = o.value("packet_interval_ms", p.packet_interval_ms);
    }
}

} // namespace

PipelineConfig parse_pipeline_config(const std::string& json_text, const fs::path& base_dir)
{
    PipelineConfig c;
    try {
        json doc = json::parse(json_text);
        expect_keys(doc,
                    {"label", "master_dir", "mode", "worker_id", "workers", "timeout_s", "poll_interval_ms", "seed",
                     "seeds", "interactive", "mobility", "traffic", "transport", "report"},
                    "configuration");
        c.label = doc.value("label", c.label);
        if (doc.contains("master_dir"))
            c.master_dir = resolve(base_dir, doc.at("master_dir").get<std::string>());
        c.mode = mode_from_string(doc.value("mode", std::string("singular")));
        c.worker_id = doc.value("worker_id", std::int64_t{0});
        c.worker_count = doc.value("workers", std::int64_t{1});
        c.timeout_s = doc.value("timeout_s", c.timeout_s);
        c.poll_interval_ms = doc.value("poll_interval_ms", c.poll_interval_ms);
        c.interactive = doc.value("interactive", false);
        c.seeds = derive_stage_seeds(doc.value("seed", std::uint64_t{0}));
        if (doc.contains("seeds")) {
            const auto& s = doc.at("seeds");
            expect_keys(s, {"mobility", "traffic", "transport"}, "seeds");
            c.seeds.mobility = s.value("mobility", c.seeds.mobility);
            c.seeds.traffic = s.value("traffic", c.seeds.traffic);
            c.seeds.transport = s.value("transport", c.seeds.transport);
        }

        const auto& m = doc.at("mobility");
        expect_keys(m, {"import", "time_step_s", "duration_s", "clock_origin_s", "population", "events"}, "mobility");
        if (m.contains("import"))
            c.mobility.import_path = resolve(base_dir, m.at("import").get<std::string>());
        else
            c.mobility.population = parse_population(m.at("population"));
        c.mobility.time_step_s = m.value("time_step_s", c.mobility.time_step_s);
        c.mobility.duration_s = m.value("duration_s", c.mobility.duration_s);
        c.mobility.clock_origin_s = m.value("clock_origin_s", c.mobility.clock_origin_s);
        for (const auto& e : m.value("events", json::array()))
            c.mobility.events.push_back(parse_event(e));

        const auto& t = doc.at("traffic");
        expect_keys(t, {"policy", "profiles", "naming"}, "traffic");
        c.traffic.policy = parse_policy(t.at("policy"));
        if (t.contains("profiles"))
            apply_profile_overrides(c.traffic.profiles, t.at("profiles"));
        c.traffic.naming = t.value("naming", c.traffic.naming);

        const auto& o = doc.at("transport");
        expect_keys(o, {"topology", "k", "rate_headroom"}, "transport");
        c.transport.topology = resolve(base_dir, o.at("topology").get<std::string>());
        c.transport.k = o.value("k", c.transport.k);
        c.transport.rate_headroom = o.value("rate_headroom", c.transport.rate_headroom);

        if (doc.contains("report")) {
            const auto& r = doc.at("report");
            expect_keys(r, {"format", "reference"}, "report");
            c.report.format = metrics::report_format_from_string(r.value("format", std::string("tsv")));
            if (r.contains("reference"))
                c.report.reference_dir = resolve(base_dir, r.at("reference").get<std::string>());
        }

        doc.erase("master_dir");
        c.document = std::move(doc);
    } catch (const json::exception& e) {
        throw config_error(std::string("malformed configuration: ") + e.what());
    }
    if (const char* env = std::getenv("SIMPIPE_MASTER_DIR"); env && *env)
        c.master_dir = fs::path(env);
    return c;
}

PipelineConfig load_pipeline_config(const fs::path& path)
{
    if (!fs::exists(path))
        throw config_error("configuration file " + path.string() + " does not exist");
    return parse_pipeline_config(fsutil::read_text(path), fs::absolute(path).parent_path());
}

StageDirs StageDirs::under(const fs::path& master_dir)
{
    return {master_dir / "mobility", master_dir / "traffic", master_dir / "transport", master_dir / "report"};
}

// ---------------------------------------------------------------------------
// Stages

std::size_t run_mobility_stage(const PipelineConfig& config)
{
    auto dirs = StageDirs::under(config.master_dir);
    fs::create_directories(dirs.mobility);
    mobility::MobilityTrace trace;
    if (config.mobility.import_path) {
        trace = mobility::import_trace(*config.mobility.import_path);
    } else {
        auto population = config.mobility.population;
        population.rng_seed = config.seeds.mobility;
        auto agents = mobility::generate_population(population);
        mobility::SimulationOptions opts{config.mobility.time_step_s, config.mobility.duration_s,
                                         config.seeds.mobility, config.mobility.clock_origin_s};
        trace = mobility::simulate_mobility(agents, population.locations, config.mobility.events, opts);
    }
    trace.validate();
    return mobility::export_trace(trace, dirs.trace());
}

namespace {

bool has_packets(const traffic::DemandSchedule& s)
{
    return std::any_of(s.sessions.begin(), s.sessions.end(), [](const auto& x) { return x.end_s > x.start_s; });
}

bool owned(std::uint64_t id, const PipelineConfig& c)
{
    return id % static_cast<std::uint64_t>(c.worker_count) == static_cast<std::uint64_t>(c.worker_id);
}

} // namespace

TrafficPlan plan_traffic(const PipelineConfig& config)
{
    auto dirs = StageDirs::under(config.master_dir);
    TrafficPlan plan;
    plan.element_count = orchestrator::read_element_count(dirs.trace());
    auto trace = mobility::import_trace(dirs.trace());
    auto topology = otn::build_topology(config.transport.topology);
    plan.schedules = traffic::assign_apps(trace, config.traffic.policy, config.traffic.profiles,
                                          topology.attachment_points(), config.seeds.traffic);
    plan.active_users = static_cast<std::size_t>(std::count_if(plan.schedules.begin(), plan.schedules.end(), has_packets));
    if (plan.active_users > plan.element_count)
        throw stage_error("traffic stage would emit " + std::to_string(plan.active_users) +
                          " captures, more than the element count " + std::to_string(plan.element_count));
    return plan;
}

std::size_t run_traffic_stage(const PipelineConfig& config, const TrafficPlan& plan)
{
    auto dirs = StageDirs::under(config.master_dir);
    fs::create_directories(dirs.traffic);
    if (config.worker_id == 0) {
        traffic::DatasetManifest m;
        m.label = config.label;
        auto trace_head = mobility::import_trace(dirs.trace());
        m.trace_duration_s = trace_head.duration_s;
        m.clock_origin_s = trace_head.clock_origin_s;
        m.element_count = plan.element_count;
        m.profiles = config.traffic.profiles;
        m.policy = config.traffic.policy;
        m.schedules = plan.schedules;
        for (const auto& s : plan.schedules)
            if (has_packets(s))
                m.pcaps.push_back(traffic::format_name(config.traffic.naming, traffic::flow_key(s)));
        traffic::write_manifest(m, dirs.traffic / traffic::dataset_manifest_name);
    }
    return traffic::emit_user_pcaps(plan.schedules, config.traffic.profiles, dirs.traffic, config.traffic.naming,
                                    config.seeds.traffic, [&](std::uint64_t id) { return owned(id, config); });
}

namespace {

struct FlowSource {
    traffic::FlowKey key;
    fs::path path;
};

std::vector<FlowSource> list_ingress(const fs::path& dir)
{
    std::vector<FlowSource> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        auto name = entry.path().filename().string();
        auto parsed = traffic::parse_canonical_name(name);
        if (parsed && parsed->second == traffic::CaptureRole::ingress && entry.is_regular_file())
            out.push_back({parsed->first, entry.path()});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
    return out;
}

/// Peak rate of concurrently active sessions and the rate-weighted mean
/// captured packet size.
std::pair<double, double> offered_load(const traffic::DemandSchedule& s, const traffic::ProfileTable& profiles)
{
    std::vector<std::pair<double, double>> edges;
    double weighted = 0.0, weight = 0.0;
    for (const auto& sess : s.sessions) {
        if (!(sess.end_s > sess.start_s))
            continue;
        const auto& p = profiles.at(sess.app);
        double rate = p.active_rate_bps();
        edges.emplace_back(sess.start_s, rate);
        edges.emplace_back(sess.end_s, -rate);
        weighted += rate * (p.avg_packet_size_bytes + traffic::SyntheticPacketHeader::size);
        weight += rate;
    }
    std::sort(edges.begin(), edges.end());
    double running = 0.0, peak = 0.0;
    for (const auto& [t, delta] : edges) {
        running += delta;
        peak = std::max(peak, running);
    }
    return {peak, weight > 0.0 ? weighted / weight : 0.0};
}

std::pair<double, double> measured_load(const pcap::PcapStream& stream)
{
    if (stream.records.empty())
        return {0.0, 0.0};
    double bytes = 0.0;
    for (const auto& r : stream.records)
        bytes += r.captured_len();
    double span_s = static_cast<double>(stream.records.back().micros() - stream.records.front().micros()) / 1e6;
    double mean = bytes / static_cast<double>(stream.records.size());
    return {bytes * 8.0 / std::max(span_s, 1.0), mean};
}

} // namespace

TransportSummary run_transport_stage(const PipelineConfig& config)
{
    auto dirs = StageDirs::under(config.master_dir);
    fs::create_directories(dirs.transport);
    auto topology = otn::build_topology(config.transport.topology);
    auto sources = list_ingress(dirs.traffic);

    std::optional<traffic::DatasetManifest> manifest;
    if (fs::exists(dirs.traffic / traffic::dataset_manifest_name))
        manifest = traffic::read_manifest(dirs.traffic / traffic::dataset_manifest_name);
    std::map<std::uint64_t, const traffic::DemandSchedule*> schedule_of;
    if (manifest)
        for (const auto& s : manifest->schedules)
            schedule_of[s.user_id] = &s;

    std::vector<otn::Flow> flows;
    otn::PathSetMap path_sets;
    for (std::size_t i = 0; i < sources.size(); ++i) {
        const auto& src = sources[i];
        otn::Flow f;
        f.flow_id = i;
        f.src = src.key.source;
        f.dst = src.key.destination;
        std::pair<double, double> load;
        auto it = schedule_of.find(src.key.user_id);
        if (it != schedule_of.end() && it->second->source == src.key.source)
            load = offered_load(*it->second, manifest->profiles);
        else
            load = measured_load(pcap::read_pcap(src.path));
        f.mean_rate_bps = load.first * config.transport.rate_headroom;
        f.mean_packet_bytes = load.second;
        flows.push_back(f);
        if (!path_sets.count({f.src, f.dst})) {
            if (!topology.has_node(f.src) || !topology.has_node(f.dst))
                throw stage_error(src.path.filename().string() + " names a node absent from the topology");
            path_sets[{f.src, f.dst}] = otn::compute_disjoint_paths(topology, f.src, f.dst, config.transport.k);
        }
    }
    auto grooming = otn::groom(flows, topology, path_sets);

    TransportSummary summary;
    summary.flows = sources.size();
    summary.channels = grooming.channels.size();
    summary.unroutable = grooming.unroutable.size();

    auto emit = [&](const std::vector<std::uint64_t>& members, std::optional<std::size_t> channel) {
        std::vector<otn::IngressFlow> batch;
        for (auto id : members)
            batch.push_back({id, sources[id].key, pcap::read_pcap(sources[id].path)});
        std::function<bool(std::uint64_t)> only;
        if (channel)
            only = [c = *channel](std::uint64_t x) { return x == c; };
        auto result = otn::simulate_transport(batch, grooming, topology, path_sets, config.seeds.transport, only);
        for (const auto& flow : batch) {
            const auto& egress = result.egress.at(flow.flow_id);
            auto rit = result.by_flow.find(flow.flow_id);
            std::vector<otn::TransportRecord> records;
            if (rit != result.by_flow.end())
                records = rit->second;
            // The egress capture goes last: its appearance tells watchers the
            // flow's outputs are complete.
            otn::write_transport_records(records, dirs.transport / otn::transport_sidecar_name(flow.key));
            pcap::write_pcap(otn::truncate_stream(flow.stream, egress),
                             dirs.transport / traffic::canonical_name(flow.key, traffic::CaptureRole::truncated));
            pcap::write_pcap(egress, dirs.transport / traffic::canonical_name(flow.key, traffic::CaptureRole::egress));
            ++summary.written;
        }
    };

    for (std::size_t c = 0; c < grooming.channels.size(); ++c)
        if (owned(c, config))
            emit(grooming.channels[c].members, c);
    for (auto id : grooming.unroutable)
        if (owned(id, config))
            emit({id}, std::nullopt);
    return summary;
}

fs::path run_report_stage(const PipelineConfig& config)
{
    auto dirs = StageDirs::under(config.master_dir);
    fs::create_directories(dirs.report);
    auto pairing = metrics::pair_streams(dirs.traffic, dirs.transport);
    std::vector<metrics::UserMetrics> rows;
    rows.reserve(pairing.pairs.size());
    for (const auto& pair : pairing.pairs)
        rows.push_back(metrics::compute_user_metrics(metrics::load_pair(pair)));

    std::optional<metrics::ConformityReport> conformity;
    if (config.report.reference_dir) {
        auto candidate = metrics::extract_features(dirs.traffic);
        auto reference = metrics::extract_features(*config.report.reference_dir);
        conformity = metrics::conformity_score(candidate, reference);
        conformity->candidate_label = config.label;
        conformity->reference_label =
            traffic::read_manifest(*config.report.reference_dir / traffic::dataset_manifest_name).label;
    }
    auto name = config.report.format == metrics::ReportFormat::tsv ? "report.tsv" : "report.jsonl";
    return metrics::export_report(rows, conformity, dirs.report / name, config.report.format);
}

// ---------------------------------------------------------------------------
// Orchestration

fs::path run_manifest_path(const PipelineConfig& config)
{
    if (config.mode == Mode::singular)
        return config.master_dir / run_manifest_name;
    return config.master_dir / ("run_manifest.w" + std::to_string(config.worker_id) + ".json");
}

json strip_wall_clock(json manifest)
{
    if (manifest.is_object()) {
        manifest.erase("wall_clock");
        for (auto& [key, value] : manifest.items())
            value = strip_wall_clock(std::move(value));
    } else if (manifest.is_array()) {
        for (auto& value : manifest)
            value = strip_wall_clock(std::move(value));
    }
    return manifest;
}

namespace {

using steady = std::chrono::steady_clock;

double seconds_since(steady::time_point t0)
{
    return std::chrono::duration<double>(steady::now() - t0).count();
}

json inventory(const fs::path& dir)
{
    std::vector<fs::path> files;
    if (fs::is_directory(dir))
        for (const auto& entry : fs::directory_iterator(dir)) {
            auto name = entry.path().filename().string();
            if (entry.is_regular_file() && !name.empty() && name.front() != '.')
                files.push_back(entry.path());
        }
    std::sort(files.begin(), files.end());
    json out = json::array();
    for (const auto& f : files) {
        auto bytes = fsutil::read_bytes(f);
        out.push_back({{"name", f.filename().string()}, {"bytes", bytes.size()}, {"fnv1a64", fsutil::hex64(fsutil::fnv1a64(bytes))}});
    }
    return out;
}

void default_prompt(const std::string& stage)
{
    std::cerr << "simpipe: press Enter to start stage '" << stage << "'" << std::endl;
    std::string line;
    std::getline(std::cin, line);
}

} // namespace

fs::path run_pipeline(const PipelineConfig& config, const PromptHook& prompt)
{
    config.validate();
    auto dirs = StageDirs::under(config.master_dir);
    for (const auto& d : {dirs.mobility, dirs.traffic, dirs.transport, dirs.report})
        fs::create_directories(d);
    const auto manifest_path = run_manifest_path(config);
    const bool leader = config.worker_id == 0;
    const auto timeout = std::chrono::milliseconds(static_cast<std::int64_t>(config.timeout_s * 1000.0));
    const auto poll = std::chrono::milliseconds(config.poll_interval_ms);
    PromptHook ask = prompt ? prompt : PromptHook(default_prompt);

    json previous;
    if (fs::exists(manifest_path)) {
        try {
            previous = json::parse(fsutil::read_text(manifest_path));
        } catch (const json::exception&) {
            previous = json();
        }
    }

    json manifest;
    manifest["format"] = 1;
    manifest["label"] = config.label;
    manifest["mode"] = to_string(config.mode);
    manifest["worker_id"] = config.worker_id;
    manifest["workers"] = config.worker_count;
    manifest["seeds"] = {{"mobility", config.seeds.mobility},
                         {"traffic", config.seeds.traffic},
                         {"transport", config.seeds.transport}};
    manifest["config"] = config.document;
    manifest["stages"] = json::array();
    manifest["wall_clock"] = json::object();
    const auto run_start = steady::now();
    double monitored_total = 0.0;

    auto save = [&] {
        manifest["wall_clock"]["total_s"] = seconds_since(run_start);
        manifest["wall_clock"]["monitored_s"] = monitored_total;
        manifest["wall_clock"]["automated_s"] = seconds_since(run_start) - monitored_total;
        fsutil::atomic_write(manifest_path, manifest.dump(1) + "\n");
    };

    auto fired_before = [&](const std::string& name) -> const json* {
        if (!previous.is_object() || !previous.contains("stages"))
            return nullptr;
        for (const auto& s : previous["stages"])
            if (s.value("name", "") == name && s.contains("trigger") &&
                s["trigger"].value("status", "waiting") != "waiting")
                return &s;
        return nullptr;
    };

    std::optional<TrafficPlan> plan;

    struct StageSpec {
        std::string name;
        fs::path dir;
        const char* pattern;
        bool runs_here;
        std::function<std::size_t()> work; // returns the trigger's expected count
    };
    std::vector<StageSpec> stages{
        {"mobility", dirs.mobility, trace_pattern, leader,
         [&]() -> std::size_t {
             if (leader)
                 run_mobility_stage(config);
             return 1;
         }},
        {"traffic", dirs.traffic, ingress_pattern, true,
         [&]() -> std::size_t {
             plan = plan_traffic(config);
             run_traffic_stage(config, *plan);
             return plan->active_users;
         }},
        {"transport", dirs.transport, egress_pattern, true,
         [&]() -> std::size_t { return run_transport_stage(config).flows; }},
        {"report", dirs.report, report_pattern, leader,
         [&]() -> std::size_t {
             if (leader)
                 run_report_stage(config);
             return 1;
         }},
    };

    for (auto& stage : stages) {
        if (const json* done = fired_before(stage.name)) {
            json entry = *done;
            entry["resumed"] = true;
            manifest["stages"].push_back(entry);
            manifest["wall_clock"]["stages"][stage.name] = {{"skipped", true}};
            save();
            continue;
        }

        json entry{{"name", stage.name}, {"dir", fs::relative(stage.dir, config.master_dir).generic_string()}};
        const auto stage_start = steady::now();
        double monitored = 0.0;
        if (config.interactive) {
            auto p0 = steady::now();
            ask(stage.name);
            monitored = seconds_since(p0);
            monitored_total += monitored;
        }

        std::size_t expected = 0;
        orchestrator::TriggerState trigger;
        double work_s = 0.0;
        try {
            auto w0 = steady::now();
            expected = stage.work();
            work_s = seconds_since(w0);
            trigger = orchestrator::make_trigger(stage.dir, expected, timeout, stage.pattern);
            trigger = orchestrator::watch_and_trigger(trigger, poll);
        } catch (const error& e) {
            entry["status"] = "failed";
            entry["error"] = e.what();
            manifest["stages"].push_back(entry);
            manifest["wall_clock"]["stages"][stage.name] = {{"monitored_s", monitored},
                                                            {"automated_s", seconds_since(stage_start) - monitored}};
            save();
            throw stage_error(stage.name + " stage failed: " + e.what());
        }

        entry["status"] = stage.runs_here ? "completed" : "awaited";
        entry["trigger"] = {{"pattern", stage.pattern},
                            {"expected", trigger.expected},
                            {"observed", trigger.observed},
                            {"status", orchestrator::to_string(trigger.status)}};
        entry["outputs"] = inventory(stage.dir);
        if (stage.name == "traffic" && plan)
            entry["element_count"] = plan->element_count;
        manifest["stages"].push_back(entry);
        manifest["wall_clock"]["stages"][stage.name] = {
            {"monitored_s", monitored},
            {"automated_s", seconds_since(stage_start) - monitored},
            {"work_s", work_s},
            {"trigger_wait_s", std::chrono::duration<double>(trigger.fired_at - stage_start).count() - monitored - work_s}};
        save();

        if (trigger.status == orchestrator::TriggerStatus::fired_on_timeout && trigger.observed == 0) {
            throw trigger_timeout(stage.name + " trigger timed out with no input in " + stage.dir.string());
        }
    }

    if (leader) {
        auto report = config.report.format == metrics::ReportFormat::tsv ? "report/report.tsv" : "report/report.jsonl";
        manifest["report"] = report;
    }
    save();
    return manifest_path;
}

} // namespace simpipe::pipeline
