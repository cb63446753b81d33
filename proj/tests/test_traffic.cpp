#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "simpipe/error.hpp"
#include "simpipe/fsutil.hpp"
#include "simpipe/traffic5g.hpp"
#include "support.hpp"

using namespace simpipe;
using namespace simpipe::traffic;
using testsupport::TempDir;

namespace {

mobility::MobilityTrace population_trace(std::uint64_t n, double duration_s = 3600, double origin = 8 * 3600,
                                         const std::string& group = "adult")
{
    mobility::MobilityTrace t;
    t.time_step_s = 60;
    t.duration_s = duration_s;
    t.clock_origin_s = origin;
    for (std::uint64_t i = 0; i < n; ++i) {
        mobility::Agent a;
        a.user_id = i;
        a.demographic_group = group;
        a.home = {static_cast<double>(i % 5000), 2500};
        t.agents.push_back(a);
    }
    return t;
}

AttachmentPoints two_by_two()
{
    return {{{1, {1000, 2500}}, {2, {4000, 2500}}}, {7, 8}};
}

AppAssignmentPolicy single(AppKind k)
{
    AppAssignmentPolicy p;
    p.single_app = k;
    return p;
}

AppAssignmentPolicy mixed(std::array<double, 3> probs)
{
    AppAssignmentPolicy p;
    p.mode = AppAssignmentPolicy::Mode::heterogeneous;
    for (auto b : {HourBand::night, HourBand::morning, HourBand::afternoon, HourBand::evening})
        p.mix_table[{"*", b}] = probs;
    return p;
}

ProfileTable voip_at(double per_hour, double duration_s = 120)
{
    auto t = default_profiles();
    t[AppKind::voip].demand_freq_per_hour = per_hour;
    t[AppKind::voip].demand_duration_s = duration_s;
    return t;
}

DemandSchedule one_session(std::uint64_t user, AppKind app, double start, double end)
{
    DemandSchedule s;
    s.user_id = user;
    s.source = 1;
    s.sessions.push_back({app, start, end, 7});
    return s;
}

} // namespace

TEST(Assign, NoUsersNoSchedules)
{
    EXPECT_TRUE(assign_apps(population_trace(0), single(AppKind::voip), default_profiles(), two_by_two(), 1).empty());
}

TEST(Assign, SingleAppOnlyUsesThatApp)
{
    auto s = assign_apps(population_trace(500), single(AppKind::video_streaming), default_profiles(), two_by_two(), 1);
    ASSERT_EQ(s.size(), 500u);
    for (const auto& sched : s) {
        std::set<std::uint16_t> dst;
        for (const auto& ses : sched.sessions) {
            EXPECT_EQ(ses.app, AppKind::video_streaming);
            EXPECT_GE(ses.start_s, 0.0);
            EXPECT_LE(ses.end_s, 3600.0);
            EXPECT_LE(ses.start_s, ses.end_s);
            dst.insert(ses.destination);
        }
        EXPECT_LE(dst.size(), 1u);
        if (!dst.empty())
            EXPECT_TRUE(*dst.begin() == 7 || *dst.begin() == 8);
    }
}

TEST(Assign, ConfigErrors)
{
    AppAssignmentPolicy partial = mixed({1, 0, 0});
    partial.mix_table.erase({"*", HourBand::morning});
    EXPECT_THROW(assign_apps(population_trace(5), partial, default_profiles(), two_by_two(), 1), config_error);
    auto no_egress = two_by_two();
    no_egress.egress.clear();
    EXPECT_THROW(assign_apps(population_trace(5), single(AppKind::voip), default_profiles(), no_egress, 1),
                 config_error);
    EXPECT_THROW(assign_apps(population_trace(5), mixed({0.5, 0.6, 0}), default_profiles(), two_by_two(), 1),
                 config_error);
    AppAssignmentPolicy unnamed;
    EXPECT_THROW(assign_apps(population_trace(5), unnamed, default_profiles(), two_by_two(), 1), config_error);
    auto bad = default_profiles();
    bad[AppKind::voip].avg_packet_size_bytes = 1600;
    EXPECT_THROW(assign_apps(population_trace(5), single(AppKind::voip), bad, two_by_two(), 1), config_error);
}

TEST(Assign, GroupEntryBeatsWildcard)
{
    auto p = mixed({0, 0, 1});
    p.mix_table[{"adult", HourBand::morning}] = {0, 1, 0};
    auto s = assign_apps(population_trace(300), p, default_profiles(), two_by_two(), 2);
    std::size_t total = 0;
    for (const auto& sched : s)
        for (const auto& ses : sched.sessions) {
            EXPECT_EQ(ses.app, AppKind::voip);
            ++total;
        }
    EXPECT_GT(total, 0u);
}

TEST(Assign, SessionCountFollowsPoissonRate)
{
    auto s = assign_apps(population_trace(10000), single(AppKind::voip), voip_at(2.0), two_by_two(), 3);
    std::size_t total = 0;
    for (const auto& sched : s)
        total += sched.sessions.size();
    // Sum of 10000 Poisson(2) draws is Poisson(20000).
    EXPECT_NEAR(static_cast<double>(total), 20000.0, 3 * std::sqrt(20000.0));
}

TEST(Assign, HeterogeneousMarginals)
{
    auto s = assign_apps(population_trace(10000), mixed({0.2, 0.5, 0.3}), default_profiles(), two_by_two(), 4);
    std::array<double, 3> counts{};
    double total = 0;
    for (const auto& sched : s)
        for (const auto& ses : sched.sessions) {
            counts[app_index(ses.app)] += 1;
            total += 1;
        }
    ASSERT_GT(total, 10000);
    EXPECT_NEAR(counts[app_index(AppKind::video_streaming)] / total, 0.2, 0.02);
    EXPECT_NEAR(counts[app_index(AppKind::voip)] / total, 0.5, 0.02);
    EXPECT_NEAR(counts[app_index(AppKind::file_transfer)] / total, 0.3, 0.02);
}

TEST(Assign, SessionsRespectHourBands)
{
    // Trace crosses 12:00: mornings use voip only, afternoons file transfer only.
    auto p = mixed({0, 1, 0});
    p.mix_table[{"*", HourBand::afternoon}] = {0, 0, 1};
    auto s = assign_apps(population_trace(2000, 7200, 11 * 3600), p, default_profiles(), two_by_two(), 5);
    for (const auto& sched : s)
        for (const auto& ses : sched.sessions)
            EXPECT_EQ(ses.app, ses.start_s < 3600 ? AppKind::voip : AppKind::file_transfer) << ses.start_s;
}

TEST(Assign, NearestIngressAndDeterminism)
{
    auto trace = population_trace(50);
    auto a = assign_apps(trace, single(AppKind::voip), default_profiles(), two_by_two(), 6);
    auto b = assign_apps(trace, single(AppKind::voip), default_profiles(), two_by_two(), 6);
    EXPECT_EQ(a, b);
    for (const auto& sched : a) {
        double x = static_cast<double>(sched.user_id % 5000);
        EXPECT_EQ(sched.source, std::abs(x - 1000) <= std::abs(x - 4000) ? 1 : 2);
    }
}

TEST(Packets, VoipMinuteHasExpectedCount)
{
    auto profiles = default_profiles();
    // Exponential gaps with mean 20 ms over 60 s: about 3000 packets.
    double sum = 0;
    const int users = 20;
    for (int u = 0; u < users; ++u) {
        auto n = static_cast<double>(generate_packets(one_session(u, AppKind::voip, 0, 60), profiles, 9).records.size());
        EXPECT_NEAR(n, 3000.0, 4 * std::sqrt(3000.0));
        sum += n;
    }
    EXPECT_NEAR(sum / users, 3000.0, 3 * std::sqrt(3000.0 / users) + 1);
}

TEST(Packets, HeadersSequenceAndTiming)
{
    DemandSchedule s;
    s.user_id = 12;
    s.source = 2;
    s.sessions = {{AppKind::voip, 10, 20, 8}, {AppKind::file_transfer, 15, 16, 8}, {AppKind::voip, 30, 31, 8}};
    auto stream = generate_packets(s, default_profiles(), 11);
    ASSERT_FALSE(stream.records.empty());
    std::uint64_t prev = 0;
    for (std::size_t i = 0; i < stream.records.size(); ++i) {
        const auto& r = stream.records[i];
        auto h = SyntheticPacketHeader::decode(r.payload);
        EXPECT_EQ(h.sequence, i);
        EXPECT_EQ(h.user_id, 12u);
        EXPECT_EQ(h.source, 2);
        EXPECT_EQ(h.destination, 8);
        EXPECT_EQ(h.payload_len + SyntheticPacketHeader::size, r.captured_len());
        EXPECT_EQ(h.send_us, static_cast<std::uint32_t>(r.micros()));
        EXPECT_GE(r.micros(), prev);
        prev = r.micros();
        double t = static_cast<double>(r.micros()) / 1e6;
        bool inside = false;
        for (const auto& ses : s.sessions)
            inside = inside || (ses.app == h.app && t >= ses.start_s && t <= ses.end_s);
        EXPECT_TRUE(inside) << "packet " << i << " at " << t;
    }
}

TEST(Packets, SizesFollowProfile)
{
    auto stream = generate_packets(one_session(1, AppKind::file_transfer, 0, 5), default_profiles(), 13);
    double sum = 0;
    for (const auto& r : stream.records) {
        auto len = r.captured_len() - SyntheticPacketHeader::size;
        EXPECT_GE(len, 32u);
        EXPECT_LE(len, 1500u);
        sum += len;
    }
    // Normal(1400, 140) clamped at 1500 pulls the mean down a little.
    EXPECT_NEAR(sum / static_cast<double>(stream.records.size()), 1390.0, 10.0);
}

TEST(Packets, RejectsBackwardSession)
{
    EXPECT_THROW(generate_packets(one_session(1, AppKind::voip, 5, 4), default_profiles(), 1), invariant_error);
}

TEST(Header, EncodeDecodeRoundtrip)
{
    SyntheticPacketHeader h{0x0102030405060708ULL, 77, AppKind::file_transfer, 8, 2, SyntheticPacketHeader::flag_egress,
                            1368, 0xdeadbeef};
    std::array<std::uint8_t, SyntheticPacketHeader::size> buf{};
    h.encode(buf);
    EXPECT_EQ(buf[0], 'S');
    EXPECT_EQ(buf[4], 0x01);
    EXPECT_EQ(buf[11], 0x08);
    EXPECT_EQ(buf[20], 3);
    EXPECT_EQ(SyntheticPacketHeader::decode(buf), h);
    buf[0] = 'X';
    EXPECT_THROW(SyntheticPacketHeader::decode(buf), format_error);
    EXPECT_THROW(SyntheticPacketHeader::decode(std::span<const std::uint8_t>(buf.data(), 10)), format_error);
}

TEST(Naming, CanonicalNames)
{
    FlowKey k{12, 1, 7};
    EXPECT_EQ(canonical_name(k), "u12_s1_d7.pcap");
    EXPECT_EQ(canonical_name(k, CaptureRole::egress), "u12_s1_d7.egress.pcap");
    EXPECT_EQ(format_name("UE{user}-src{src}-dst{dst}.pcap", k), "UE12-src1-dst7.pcap");
    for (auto role : {CaptureRole::ingress, CaptureRole::egress, CaptureRole::truncated}) {
        auto parsed = parse_canonical_name(canonical_name(k, role));
        ASSERT_TRUE(parsed);
        EXPECT_EQ(parsed->first, k);
        EXPECT_EQ(parsed->second, role);
    }
    EXPECT_FALSE(parse_canonical_name("u1_s70000_d1.pcap"));
    EXPECT_FALSE(parse_canonical_name("u1_s1_d1.pcapng"));
    EXPECT_FALSE(parse_canonical_name("UE1-src1-dst1.pcap"));
}

TEST(Emit, OneFilePerActiveUser)
{
    TempDir dir;
    std::vector<DemandSchedule> s{one_session(1, AppKind::voip, 0, 2), one_session(2, AppKind::voip, 0, 2),
                                  one_session(3, AppKind::voip, 0, 2)};
    DemandSchedule idle;
    idle.user_id = 4;
    idle.source = 1;
    s.push_back(idle);
    EXPECT_EQ(emit_user_pcaps(s, default_profiles(), dir.path(), canonical_pattern, 5), 3u);
    EXPECT_TRUE(std::filesystem::exists(dir / "u1_s1_d7.pcap"));
    EXPECT_TRUE(std::filesystem::exists(dir / "u3_s1_d7.pcap"));
    EXPECT_EQ(std::distance(std::filesystem::directory_iterator(dir.path()), {}), 3);

    auto first = fsutil::read_bytes(dir / "u2_s1_d7.pcap");
    TempDir again;
    emit_user_pcaps(s, default_profiles(), again.path(), canonical_pattern, 5);
    EXPECT_EQ(fsutil::read_bytes(again / "u2_s1_d7.pcap"), first);

    TempDir some;
    EXPECT_EQ(emit_user_pcaps(s, default_profiles(), some.path(), canonical_pattern, 5,
                              [](std::uint64_t u) { return u % 2 == 1; }),
              2u);
    EXPECT_EQ(fsutil::read_bytes(some / "u1_s1_d7.pcap"), fsutil::read_bytes(dir / "u1_s1_d7.pcap"));
}

TEST(Emit, FailureRemovesPartialOutput)
{
    TempDir dir;
    std::vector<DemandSchedule> s{one_session(1, AppKind::voip, 0, 2), one_session(2, AppKind::voip, 3, 2)};
    EXPECT_THROW(emit_user_pcaps(s, default_profiles(), dir.path(), canonical_pattern, 5), invariant_error);
    EXPECT_EQ(std::distance(std::filesystem::directory_iterator(dir.path()), {}), 0);
}
