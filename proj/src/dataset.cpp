#include "simpipe/dataset.hpp"

#include <json.hpp>

#include "simpipe/error.hpp"
#include "simpipe/fsutil.hpp"

namespace simpipe::traffic {

using nlohmann::json;

namespace {

json profile_json(const AppProfile& p)
{
    return {{"latency_req_ms", p.latency_req_ms},
            {"demand_duration_s", p.demand_duration_s},
            {"demand_freq_per_hour", p.demand_freq_per_hour},
            {"avg_packet_size_bytes", p.avg_packet_size_bytes},
            {"packet_interval_ms", p.packet_interval_ms}};
}

} // namespace

std::string render_manifest(const DatasetManifest& m)
{
    json doc;
    doc["label"] = m.label;
    doc["trace_duration_s"] = m.trace_duration_s;
    doc["clock_origin_s"] = m.clock_origin_s;
    doc["element_count"] = m.element_count;
    json profiles = json::object();
    for (const auto& [kind, p] : m.profiles)
        profiles[to_string(kind)] = profile_json(p);
    doc["profiles"] = profiles;

    json policy;
    policy["mode"] = m.policy.mode == AppAssignmentPolicy::Mode::single_app ? "single_app" : "heterogeneous";
    if (m.policy.single_app)
        policy["single_app"] = to_string(*m.policy.single_app);
    json mix = json::array();
    for (const auto& [key, probs] : m.policy.mix_table)
        mix.push_back({{"group", key.first}, {"band", to_string(key.second)}, {"probabilities", probs}});
    policy["mix_table"] = mix;
    doc["policy"] = policy;

    json users = json::array();
    for (const auto& s : m.schedules) {
        json sessions = json::array();
        for (const auto& sess : s.sessions)
            sessions.push_back({to_string(sess.app), sess.start_s, sess.end_s, sess.destination});
        users.push_back(
            {{"user_id", s.user_id}, {"group", s.demographic_group}, {"source", s.source}, {"sessions", sessions}});
    }
    doc["schedules"] = users;
    doc["pcaps"] = m.pcaps;
    return doc.dump(1) + "\n";
}

DatasetManifest parse_manifest(const std::string& text)
{
    DatasetManifest m;
    try {
        json doc = json::parse(text);
        m.label = doc.value("label", std::string{});
        m.trace_duration_s = doc.at("trace_duration_s").get<double>();
        m.clock_origin_s = doc.value("clock_origin_s", 0.0);
        m.element_count = doc.at("element_count").get<std::size_t>();
        for (const auto& [name, p] : doc.at("profiles").items()) {
            AppProfile prof;
            prof.kind = app_kind_from_string(name);
            prof.latency_req_ms = p.at("latency_req_ms").get<double>();
            prof.demand_duration_s = p.at("demand_duration_s").get<double>();
            prof.demand_freq_per_hour = p.at("demand_freq_per_hour").get<double>();
            prof.avg_packet_size_bytes = p.at("avg_packet_size_bytes").get<double>();
            prof.packet_interval_ms = p.at("packet_interval_ms").get<double>();
            m.profiles[prof.kind] = prof;
        }
        const auto& policy = doc.at("policy");
        m.policy.mode = policy.at("mode").get<std::string>() == "single_app" ? AppAssignmentPolicy::Mode::single_app
                                                                              : AppAssignmentPolicy::Mode::heterogeneous;
        if (policy.contains("single_app"))
            m.policy.single_app = app_kind_from_string(policy.at("single_app").get<std::string>());
        for (const auto& e : policy.value("mix_table", json::array()))
            m.policy.mix_table[{e.at("group").get<std::string>(), hour_band_from_string(e.at("band").get<std::string>())}] =
                e.at("probabilities").get<std::array<double, 3>>();
        for (const auto& u : doc.at("schedules")) {
            DemandSchedule s;
            s.user_id = u.at("user_id").get<std::uint64_t>();
            s.demographic_group = u.value("group", std::string{});
            s.source = u.at("source").get<std::uint16_t>();
            for (const auto& sess : u.at("sessions"))
                s.sessions.push_back({app_kind_from_string(sess.at(0).get<std::string>()), sess.at(1).get<double>(),
                                      sess.at(2).get<double>(), sess.at(3).get<std::uint16_t>()});
            m.schedules.push_back(std::move(s));
        }
        m.pcaps = doc.value("pcaps", std::vector<std::string>{});
    } catch (const json::exception& e) {
        throw format_error(std::string("malformed dataset manifest: ") + e.what());
    }
    return m;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path)
{
    fsutil::atomic_write(path, render_manifest(manifest));
}

DatasetManifest read_manifest(const std::filesystem::path& path)
{
    if (!std::filesystem::exists(path))
        throw io_error("missing dataset manifest " + path.string());
    return parse_manifest(fsutil::read_text(path));
}

} // namespace simpipe::traffic
