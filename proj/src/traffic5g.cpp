#include "simpipe/traffic5g.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <regex>

#include "simpipe/error.hpp"
#include "simpipe/rng.hpp"

namespace simpipe::traffic {

namespace {

constexpr double band_length_s = 6.0 * 3600.0;
constexpr double day_s = 86400.0;

void put_be(std::uint8_t* out, std::uint64_t v, int bytes)
{
    for (int i = bytes - 1; i >= 0; --i) {
        out[i] = static_cast<std::uint8_t>(v);
        v >>= 8;
    }
}

std::uint64_t get_be(const std::uint8_t* in, int bytes)
{
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i)
        v = (v << 8) | in[i];
    return v;
}

const AppProfile& profile_for(const ProfileTable& profiles, AppKind kind)
{
    auto it = profiles.find(kind);
    if (it == profiles.end())
        throw config_error(std::string("no profile for application ") + to_string(kind));
    return it->second;
}

} // namespace

const char* to_string(AppKind kind) noexcept
{
    switch (kind) {
    case AppKind::video_streaming: return "video_streaming";
    case AppKind::voip: return "voip";
    case AppKind::file_transfer: return "file_transfer";
    }
    return "unknown";
}

AppKind app_kind_from_string(const std::string& name)
{
    for (auto k : all_app_kinds)
        if (name == to_string(k))
            return k;
    throw config_error("unknown application kind '" + name + "'");
}

std::size_t app_index(AppKind kind) noexcept
{
    return static_cast<std::size_t>(kind) - 1;
}

void AppProfile::validate() const
{
    if (!(latency_req_ms > 0 && demand_duration_s > 0 && demand_freq_per_hour > 0 && avg_packet_size_bytes > 0 &&
          packet_interval_ms > 0))
        throw config_error(std::string("profile ") + to_string(kind) + ": all parameters must be positive");
    if (avg_packet_size_bytes > 1500)
        throw config_error(std::string("profile ") + to_string(kind) + ": avg_packet_size_bytes exceeds 1500");
}

double AppProfile::active_rate_bps() const noexcept
{
    return (avg_packet_size_bytes + SyntheticPacketHeader::size) * 8.0 / (packet_interval_ms / 1000.0);
}

ProfileTable default_profiles()
{
    return {
        {AppKind::voip, {AppKind::voip, 50.0, 120.0, 4.0, 160.0, 20.0}},
        {AppKind::video_streaming, {AppKind::video_streaming, 300.0, 600.0, 1.0, 1200.0, 5.0}},
        {AppKind::file_transfer, {AppKind::file_transfer, 1000.0, 30.0, 2.0, 1400.0, 1.0}},
    };
}

const char* to_string(HourBand band) noexcept
{
    switch (band) {
    case HourBand::night: return "night";
    case HourBand::morning: return "morning";
    case HourBand::afternoon: return "afternoon";
    case HourBand::evening: return "evening";
    }
    return "unknown";
}

HourBand hour_band_from_string(const std::string& name)
{
    for (auto b : {HourBand::night, HourBand::morning, HourBand::afternoon, HourBand::evening})
        if (name == to_string(b))
            return b;
    throw config_error("unknown hour band '" + name + "'");
}

HourBand band_of(double clock_s) noexcept
{
    double t = std::fmod(clock_s, day_s);
    if (t < 0)
        t += day_s;
    return static_cast<HourBand>(std::min(3, static_cast<int>(t / band_length_s)));
}

void AppAssignmentPolicy::validate() const
{
    if (mode == Mode::single_app && !single_app)
        throw config_error("single_app mode requires an application kind");
    if (mode == Mode::heterogeneous) {
        for (const auto& [key, probs] : mix_table) {
            double sum = std::accumulate(probs.begin(), probs.end(), 0.0);
            bool negative = std::any_of(probs.begin(), probs.end(), [](double p) { return p < 0.0; });
            if (negative || std::abs(sum - 1.0) > 1e-9)
                throw config_error("mix_table entry (" + key.first + ", " + to_string(key.second) +
                                   ") is not a probability vector");
        }
    }
}

std::vector<DemandSchedule> assign_apps(const mobility::MobilityTrace& trace, const AppAssignmentPolicy& policy,
                                        const ProfileTable& profiles, const AttachmentPoints& attachment,
                                        std::uint64_t seed)
{
    policy.validate();
    for (const auto& [kind, p] : profiles)
        p.validate();
    if (trace.agents.empty())
        return {};
    if (attachment.egress.empty())
        throw config_error("empty egress set");
    if (attachment.ingress.empty())
        throw config_error("empty ingress set");

    std::map<std::uint64_t, std::pair<double, double>> position_sum;
    std::map<std::uint64_t, std::size_t> position_count;
    for (const auto& s : trace.samples) {
        auto& acc = position_sum[s.user_id];
        acc.first += s.x;
        acc.second += s.y;
        ++position_count[s.user_id];
    }

    // Band segments of the trace, in trace seconds.
    struct Segment {
        double start, end;
        HourBand band;
    };
    std::vector<Segment> segments;
    for (double t = 0.0; t < trace.duration_s;) {
        double clock = trace.clock_origin_s + t;
        double next_boundary = (std::floor(clock / band_length_s) + 1.0) * band_length_s - trace.clock_origin_s;
        double end = std::min(trace.duration_s, next_boundary);
        segments.push_back({t, end, band_of(clock)});
        t = end;
    }

    using Mode = AppAssignmentPolicy::Mode;
    std::vector<DemandSchedule> schedules;
    schedules.reserve(trace.agents.size());
    std::vector<const mobility::Agent*> agents;
    for (const auto& a : trace.agents)
        agents.push_back(&a);
    std::sort(agents.begin(), agents.end(), [](auto* a, auto* b) { return a->user_id < b->user_id; });

    for (const auto* agent : agents) {
        DemandSchedule sched;
        sched.user_id = agent->user_id;
        sched.demographic_group = agent->demographic_group;

        mobility::Position mean = agent->home;
        if (auto n = position_count[agent->user_id]; n > 0) {
            const auto& acc = position_sum[agent->user_id];
            mean = {acc.first / static_cast<double>(n), acc.second / static_cast<double>(n)};
        }
        const NodeSite* nearest = &attachment.ingress.front();
        for (const auto& site : attachment.ingress) {
            double d = mobility::distance(mean, site.position);
            double best = mobility::distance(mean, nearest->position);
            if (d < best || (d == best && site.id < nearest->id))
                nearest = &site;
        }
        sched.source = nearest->id;

        double u = hash_uniform(seed, stream_tag::destination, agent->user_id);
        auto di = std::min(attachment.egress.size() - 1,
                           static_cast<std::size_t>(u * static_cast<double>(attachment.egress.size())));
        std::uint16_t destination = attachment.egress[di];

        auto eng = make_engine(seed, agent->user_id, stream_tag::app_assignment);
        auto add_session = [&](AppKind app, double start) {
            const auto& p = profile_for(profiles, app);
            double end = std::min(trace.duration_s, start + sample_exponential(eng, p.demand_duration_s));
            sched.sessions.push_back({app, start, end, destination});
        };

        if (policy.mode == Mode::single_app) {
            const auto& p = profile_for(profiles, *policy.single_app);
            auto count = sample_poisson(eng, p.demand_freq_per_hour * trace.duration_s / 3600.0);
            for (std::uint64_t k = 0; k < count; ++k)
                add_session(p.kind, uniform01(eng) * trace.duration_s);
        } else {
            for (const auto& seg : segments) {
                auto it = policy.mix_table.find({agent->demographic_group, seg.band});
                if (it == policy.mix_table.end())
                    it = policy.mix_table.find({"*", seg.band});
                if (it == policy.mix_table.end())
                    throw config_error("missing mix_table entry for (" + agent->demographic_group + ", " +
                                       to_string(seg.band) + ")");
                const auto& probs = it->second;
                double rate = 0.0;
                for (auto k : all_app_kinds)
                    if (probs[app_index(k)] > 0.0)
                        rate += probs[app_index(k)] * profile_for(profiles, k).demand_freq_per_hour;
                auto count = sample_poisson(eng, rate * (seg.end - seg.start) / 3600.0);
                for (std::uint64_t k = 0; k < count; ++k) {
                    double start = seg.start + uniform01(eng) * (seg.end - seg.start);
                    double pick = uniform01(eng);
                    AppKind app = all_app_kinds.back();
                    for (auto kind : all_app_kinds) {
                        pick -= probs[app_index(kind)];
                        if (pick < 0.0) {
                            app = kind;
                            break;
                        }
                    }
                    add_session(app, start);
                }
            }
        }
        std::stable_sort(sched.sessions.begin(), sched.sessions.end(),
                         [](const Session& a, const Session& b) { return a.start_s < b.start_s; });
        schedules.push_back(std::move(sched));
    }
    return schedules;
}

void SyntheticPacketHeader::encode(std::span<std::uint8_t, size> out) const noexcept
{
    std::uint8_t* p = out.data();
    std::copy(magic.begin(), magic.end(), p);
    put_be(p + 4, user_id, 8);
    put_be(p + 12, sequence, 8);
    p[20] = static_cast<std::uint8_t>(app);
    put_be(p + 21, destination, 2);
    put_be(p + 23, source, 2);
    p[25] = flags;
    put_be(p + 26, payload_len, 2);
    put_be(p + 28, send_us, 4);
}

SyntheticPacketHeader SyntheticPacketHeader::decode(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < size || !std::equal(magic.begin(), magic.end(), bytes.begin()))
        throw format_error("payload does not carry a synthetic packet header");
    const std::uint8_t* p = bytes.data();
    SyntheticPacketHeader h;
    h.user_id = get_be(p + 4, 8);
    h.sequence = get_be(p + 12, 8);
    h.app = static_cast<AppKind>(p[20]);
    h.destination = static_cast<std::uint16_t>(get_be(p + 21, 2));
    h.source = static_cast<std::uint16_t>(get_be(p + 23, 2));
    h.flags = p[25];
    h.payload_len = static_cast<std::uint16_t>(get_be(p + 26, 2));
    h.send_us = static_cast<std::uint32_t>(get_be(p + 28, 4));
    return h;
}

pcap::PcapStream generate_packets(const DemandSchedule& schedule, const ProfileTable& profiles, std::uint64_t seed)
{
    struct Pending {
        std::uint64_t time_us;
        std::size_t session;
        std::uint16_t size;
    };
    std::vector<Pending> pending;
    auto eng = make_engine(seed, schedule.user_id, stream_tag::packets);
    for (std::size_t i = 0; i < schedule.sessions.size(); ++i) {
        const Session& s = schedule.sessions[i];
        if (s.end_s < s.start_s)
            throw invariant_error("session ends before it starts for user " + std::to_string(schedule.user_id));
        const auto& p = profile_for(profiles, s.app);
        const double gap_mean_s = p.packet_interval_ms / 1000.0;
        for (double t = s.start_s; t < s.end_s; t += sample_exponential(eng, gap_mean_s)) {
            double size = sample_normal(eng, p.avg_packet_size_bytes, 0.1 * p.avg_packet_size_bytes);
            size = std::round(std::clamp(size, 32.0, 1500.0));
            pending.push_back({pcap::to_micros(t), i, static_cast<std::uint16_t>(size)});
        }
    }
    std::stable_sort(pending.begin(), pending.end(),
                     [](const Pending& a, const Pending& b) { return a.time_us < b.time_us; });

    pcap::PcapStream stream;
    stream.records.reserve(pending.size());
    std::uint64_t seq = 0;
    for (const auto& pk : pending) {
        const Session& s = schedule.sessions[pk.session];
        SyntheticPacketHeader h;
        h.user_id = schedule.user_id;
        h.sequence = seq++;
        h.app = s.app;
        h.destination = s.destination;
        h.source = schedule.source;
        h.payload_len = pk.size;
        h.send_us = static_cast<std::uint32_t>(pk.time_us);

        pcap::PacketRecord r;
        r.set_micros(pk.time_us);
        r.payload.assign(SyntheticPacketHeader::size + pk.size, 0);
        h.encode(std::span<std::uint8_t, SyntheticPacketHeader::size>(r.payload.data(), SyntheticPacketHeader::size));
        r.original_len = r.captured_len();
        stream.records.push_back(std::move(r));
    }
    return stream;
}

FlowKey flow_key(const DemandSchedule& schedule)
{
    FlowKey key{schedule.user_id, schedule.source, 0};
    if (!schedule.sessions.empty())
        key.destination = schedule.sessions.front().destination;
    return key;
}

std::string format_name(const std::string& pattern, const FlowKey& key)
{
    std::string out = pattern;
    auto replace = [&](const std::string& token, const std::string& value) {
        for (auto pos = out.find(token); pos != std::string::npos; pos = out.find(token, pos + value.size()))
            out.replace(pos, token.size(), value);
    };
    replace("{user}", std::to_string(key.user_id));
    replace("{src}", std::to_string(key.source));
    replace("{dst}", std::to_string(key.destination));
    return out;
}

std::optional<std::pair<FlowKey, CaptureRole>> parse_canonical_name(const std::string& filename)
{
    static const std::regex pattern(R"(^u(\d+)_s(\d+)_d(\d+)(\.egress|\.trunc)?\.pcap$)");
    std::smatch m;
    if (!std::regex_match(filename, m, pattern))
        return std::nullopt;
    unsigned long long user = 0;
    unsigned long src = 0;
    unsigned long dst = 0;
    try {
        user = std::stoull(m[1].str());
        src = std::stoul(m[2].str());
        dst = std::stoul(m[3].str());
    } catch (const std::out_of_range&) {
        return std::nullopt;
    }
    if (src > std::numeric_limits<std::uint16_t>::max() || dst > std::numeric_limits<std::uint16_t>::max())
        return std::nullopt;
    CaptureRole role = CaptureRole::ingress;
    if (m[4] == ".egress")
        role = CaptureRole::egress;
    else if (m[4] == ".trunc")
        role = CaptureRole::truncated;
    return std::pair{FlowKey{user, static_cast<std::uint16_t>(src), static_cast<std::uint16_t>(dst)}, role};
}

std::string canonical_name(const FlowKey& key, CaptureRole role)
{
    std::string base = format_name("u{user}_s{src}_d{dst}", key);
    switch (role) {
    case CaptureRole::ingress: return base + ".pcap";
    case CaptureRole::egress: return base + ".egress.pcap";
    case CaptureRole::truncated: return base + ".trunc.pcap";
    }
    return base + ".pcap";
}

std::size_t emit_user_pcaps(std::span<const DemandSchedule> schedules, const ProfileTable& profiles,
                            const std::filesystem::path& out_dir, const std::string& naming, std::uint64_t seed,
                            const std::function<bool(std::uint64_t)>& include)
{
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec)
        throw io_error("cannot create " + out_dir.string());

    std::vector<std::filesystem::path> written;
    try {
        for (const auto& sched : schedules) {
            if (sched.sessions.empty() || (include && !include(sched.user_id)))
                continue;
            auto stream = generate_packets(sched, profiles, seed);
            if (stream.records.empty())
                continue;
            auto path = out_dir / format_name(naming, flow_key(sched));
            pcap::write_pcap(stream, path);
            written.push_back(path);
        }
    } catch (const error&) {
        for (const auto& p : written)
            std::filesystem::remove(p, ec);
        throw;
    }
    return written.size();
}

} // namespace simpipe::traffic
