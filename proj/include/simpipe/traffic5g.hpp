#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "simpipe/mobility.hpp"
#include "simpipe/pcap.hpp"

namespace simpipe::traffic {

enum class AppKind : std::uint8_t { video_streaming = 1, voip = 2, file_transfer = 3 };

inline constexpr std::array<AppKind, 3> all_app_kinds{AppKind::video_streaming, AppKind::voip,
                                                      AppKind::file_transfer};

const char* to_string(AppKind kind) noexcept;
AppKind app_kind_from_string(const std::string& name);
std::size_t app_index(AppKind kind) noexcept;

struct AppProfile {
    AppKind kind = AppKind::voip;
    double latency_req_ms = 0.0;
    double demand_duration_s = 0.0;
    double demand_freq_per_hour = 0.0;
    double avg_packet_size_bytes = 0.0;
    double packet_interval_ms = 0.0;

    void validate() const;
    /// Bit rate while a session is active, synthetic header included.
    double active_rate_bps() const noexcept;
};

using ProfileTable = std::map<AppKind, AppProfile>;

/// voip 50 ms/120 s/4 per h/160 B/20 ms, video 300 ms/600 s/1 per h/1200 B/5 ms,
/// file transfer 1000 ms/30 s/2 per h/1400 B/1 ms.
ProfileTable default_profiles();

/// Six-hour bands of the clock day.
enum class HourBand : std::uint8_t { night = 0, morning = 1, afternoon = 2, evening = 3 };

const char* to_string(HourBand band) noexcept;
HourBand hour_band_from_string(const std::string& name);
HourBand band_of(double clock_s) noexcept;

struct AppAssignmentPolicy {
    enum class Mode { single_app, heterogeneous };

    Mode mode = Mode::single_app;
    std::optional<AppKind> single_app;
    /// Probability over all_app_kinds, indexed by app_index(). Group "*"
    /// covers groups without an entry of their own.
    std::map<std::pair<std::string, HourBand>, std::array<double, 3>> mix_table;

    void validate() const;
};

struct Session {
    AppKind app = AppKind::voip;
    /// Trace seconds.
    double start_s = 0.0;
    double end_s = 0.0;
    std::uint16_t destination = 0;

    bool operator==(const Session&) const = default;
};

struct DemandSchedule {
    std::uint64_t user_id = 0;
    std::string demographic_group;
    /// Ingress node nearest the user's mean position.
    std::uint16_t source = 0;
    std::vector<Session> sessions;

    bool operator==(const DemandSchedule&) const = default;
};

struct NodeSite {
    std::uint16_t id = 0;
    mobility::Position position;
};

/// Where user traffic enters and may leave the transport network.
struct AttachmentPoints {
    std::vector<NodeSite> ingress;
    std::vector<std::uint16_t> egress;
};

/// One schedule per user of the trace, ordered by user id. Every session of a
/// user shares one destination, so each active user yields exactly one
/// capture and the element count caps the number of files.
std::vector<DemandSchedule> assign_apps(const mobility::MobilityTrace& trace, const AppAssignmentPolicy& policy,
                                        const ProfileTable& profiles, const AttachmentPoints& attachment,
                                        std::uint64_t seed);

/// Fixed 32-byte big-endian header carried at the start of every payload.
struct SyntheticPacketHeader {
    static constexpr std::size_t size = 32;
    static constexpr std::array<std::uint8_t, 4> magic{'S', 'G', 'P', 'K'};
    static constexpr std::uint8_t flag_egress = 0x01;

    std::uint64_t user_id = 0;
    std::uint64_t sequence = 0;
    AppKind app = AppKind::voip;
    std::uint16_t destination = 0;
    std::uint16_t source = 0;
    std::uint8_t flags = 0;
    std::uint16_t payload_len = 0;
    /// Send time in microseconds, modulo 2^32.
    std::uint32_t send_us = 0;

    void encode(std::span<std::uint8_t, size> out) const noexcept;
    /// Throws format_error if the bytes do not start with the magic.
    static SyntheticPacketHeader decode(std::span<const std::uint8_t> bytes);

    bool operator==(const SyntheticPacketHeader&) const = default;
};

pcap::PcapStream generate_packets(const DemandSchedule& schedule, const ProfileTable& profiles, std::uint64_t seed);

/// Identity of a capture file: `u{user}_s{src}_d{dst}`.
struct FlowKey {
    std::uint64_t user_id = 0;
    std::uint16_t source = 0;
    std::uint16_t destination = 0;

    auto operator<=>(const FlowKey&) const = default;
};

FlowKey flow_key(const DemandSchedule& schedule);

inline constexpr const char* canonical_pattern = "u{user}_s{src}_d{dst}.pcap";

/// Expands {user}, {src} and {dst} in `pattern`.
std::string format_name(const std::string& pattern, const FlowKey& key);

enum class CaptureRole { ingress, egress, truncated };

/// Parses `u7_s1_d4.pcap`, `.egress.pcap` and `.trunc.pcap` names.
std::optional<std::pair<FlowKey, CaptureRole>> parse_canonical_name(const std::string& filename);
std::string canonical_name(const FlowKey& key, CaptureRole role = CaptureRole::ingress);

/// Writes one capture per user with at least one packet and returns the count.
/// `include` restricts which users this call generates (distributed workers).
/// On failure every file written by this call is removed.
std::size_t emit_user_pcaps(std::span<const DemandSchedule> schedules, const ProfileTable& profiles,
                            const std::filesystem::path& out_dir, const std::string& naming, std::uint64_t seed,
                            const std::function<bool(std::uint64_t)>& include = {});

} // namespace simpipe::traffic
