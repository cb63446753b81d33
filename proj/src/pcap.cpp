#include "simpipe/pcap.hpp"

#include <cmath>
#include <string>

#include "simpipe/fsutil.hpp"

namespace simpipe::pcap {

namespace {

void put_le16(std::vector<std::uint8_t>& out, std::uint16_t v)
{
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_le32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get32(const std::uint8_t* p, bool swapped)
{
    if (swapped)
        return std::uint32_t{p[0]} << 24 | std::uint32_t{p[1]} << 16 | std::uint32_t{p[2]} << 8 | p[3];
    return std::uint32_t{p[3]} << 24 | std::uint32_t{p[2]} << 16 | std::uint32_t{p[1]} << 8 | p[0];
}

} // namespace

void PcapStream::validate() const
{
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        std::string where = "record " + std::to_string(i) + ": ";
        if (r.timestamp_us >= 1'000'000)
            throw invariant_error(where + "timestamp_us out of range");
        if (r.captured_len() > r.original_len)
            throw invariant_error(where + "captured_len exceeds original_len");
        if (r.captured_len() > snap_len)
            throw invariant_error(where + "captured_len exceeds snap_len");
        if (i > 0 && r.micros() < records[i - 1].micros())
            throw invariant_error(where + "timestamp decreases");
    }
}

std::uint64_t to_micros(double seconds)
{
    return static_cast<std::uint64_t>(std::floor(seconds * 1e6 + 0.5));
}

std::vector<std::uint8_t> serialize(const PcapStream& stream)
{
    stream.validate();
    std::size_t total = global_header_size;
    for (const auto& r : stream.records)
        total += record_header_size + r.payload.size();

    std::vector<std::uint8_t> out;
    out.reserve(total);
    put_le32(out, magic_micro);
    put_le16(out, version_major);
    put_le16(out, version_minor);
    put_le32(out, 0); // thiszone
    put_le32(out, 0); // sigfigs
    put_le32(out, stream.snap_len);
    put_le32(out, stream.link_type);
    for (const auto& r : stream.records) {
        put_le32(out, r.timestamp_s);
        put_le32(out, r.timestamp_us);
        put_le32(out, r.captured_len());
        put_le32(out, r.original_len);
        out.insert(out.end(), r.payload.begin(), r.payload.end());
    }
    return out;
}

PcapStream parse(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < global_header_size)
        throw pcap_error("truncated global header", 0);

    const std::uint8_t* p = bytes.data();
    bool swapped = false;
    bool nano = false;
    std::uint32_t magic = get32(p, false);
    if (magic == magic_micro) {
    } else if (magic == magic_nano) {
        nano = true;
    } else {
        magic = get32(p, true);
        swapped = true;
        if (magic == magic_nano)
            nano = true;
        else if (magic != magic_micro)
            throw pcap_error("unrecognized magic number", 0);
    }

    PcapStream stream;
    stream.snap_len = get32(p + 16, swapped);
    stream.link_type = get32(p + 20, swapped);

    std::size_t off = global_header_size;
    while (off < bytes.size()) {
        if (bytes.size() - off < record_header_size)
            throw pcap_error("truncated record header at offset " + std::to_string(off), off);
        const std::uint8_t* h = p + off;
        PacketRecord r;
        r.timestamp_s = get32(h, swapped);
        std::uint32_t frac = get32(h + 4, swapped);
        std::uint32_t incl = get32(h + 8, swapped);
        r.original_len = get32(h + 12, swapped);
        if (nano) {
            std::uint64_t us = std::uint64_t{r.timestamp_s} * 1'000'000 + (frac + 500) / 1000;
            r.set_micros(us);
        } else {
            r.timestamp_us = frac;
        }
        if (bytes.size() - off - record_header_size < incl)
            throw pcap_error("truncated record payload at offset " + std::to_string(off), off);
        r.payload.assign(h + record_header_size, h + record_header_size + incl);
        stream.records.push_back(std::move(r));
        off += record_header_size + incl;
    }
    return stream;
}

PcapStream read_pcap(const std::filesystem::path& path)
{
    if (!std::filesystem::exists(path))
        throw io_error("no such capture: " + path.string());
    auto bytes = fsutil::read_bytes(path);
    try {
        return parse(bytes);
    } catch (const pcap_error& e) {
        throw pcap_error(path.string() + ": " + e.what(), e.offset());
    }
}

std::size_t write_pcap(const PcapStream& stream, const std::filesystem::path& path)
{
    auto bytes = serialize(stream);
    fsutil::atomic_write(path, bytes);
    return bytes.size();
}

} // namespace simpipe::pcap
