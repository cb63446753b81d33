#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "simpipe/error.hpp"

namespace simpipe::pcap {

inline constexpr std::uint32_t magic_micro = 0xa1b2c3d4;
inline constexpr std::uint32_t magic_nano = 0xa1b23c4d;
inline constexpr std::uint16_t version_major = 2;
inline constexpr std::uint16_t version_minor = 4;
inline constexpr std::size_t global_header_size = 24;
inline constexpr std::size_t record_header_size = 16;
inline constexpr std::uint32_t default_snap_len = 65535;
inline constexpr std::uint32_t default_link_type = 1;

/// Raised for unreadable captures; `offset()` is the byte position of the
/// damaged header or record.
class pcap_error : public format_error {
public:
    pcap_error(const std::string& what, std::size_t offset)
        : format_error(what), offset_(offset)
    {
    }
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

struct PacketRecord {
    std::uint32_t timestamp_s = 0;
    std::uint32_t timestamp_us = 0;
    std::uint32_t original_len = 0;
    std::vector<std::uint8_t> payload;

    std::uint32_t captured_len() const noexcept { return static_cast<std::uint32_t>(payload.size()); }

    /// Timestamp as whole microseconds.
    std::uint64_t micros() const noexcept
    {
        return std::uint64_t{timestamp_s} * 1'000'000 + timestamp_us;
    }

    void set_micros(std::uint64_t us) noexcept
    {
        timestamp_s = static_cast<std::uint32_t>(us / 1'000'000);
        timestamp_us = static_cast<std::uint32_t>(us % 1'000'000);
    }

    bool operator==(const PacketRecord&) const = default;
};

struct PcapStream {
    std::uint32_t link_type = default_link_type;
    std::uint32_t snap_len = default_snap_len;
    std::vector<PacketRecord> records;

    /// Throws invariant_error naming the first offending record.
    void validate() const;

    bool operator==(const PcapStream&) const = default;
};

/// Seconds to whole microseconds, rounding half up.
std::uint64_t to_micros(double seconds);

std::vector<std::uint8_t> serialize(const PcapStream& stream);

/// Accepts microsecond and nanosecond captures in either byte order;
/// nanosecond timestamps are rounded half up to microseconds.
PcapStream parse(std::span<const std::uint8_t> bytes);

PcapStream read_pcap(const std::filesystem::path& path);

/// Writes atomically (temporary file + rename) and returns the byte count.
std::size_t write_pcap(const PcapStream& stream, const std::filesystem::path& path);

} // namespace simpipe::pcap
