#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "simpipe/fsutil.hpp"
#include "simpipe/pcap.hpp"
#include "support.hpp"

using namespace simpipe;
using testsupport::TempDir;

namespace {

pcap::PacketRecord record(std::uint64_t us, std::size_t len, std::uint8_t fill = 0xab)
{
    pcap::PacketRecord r;
    r.set_micros(us);
    r.payload.assign(len, fill);
    r.original_len = static_cast<std::uint32_t>(len);
    return r;
}

std::string run(const std::string& cmd)
{
    std::string out;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p)
        return out;
    char buf[4096];
    while (std::size_t n = fread(buf, 1, sizeof buf, p))
        out.append(buf, n);
    pclose(p);
    return out;
}

} // namespace

TEST(Pcap, EmptyStreamIsGlobalHeaderOnly)
{
    TempDir dir;
    pcap::PcapStream s;
    EXPECT_EQ(pcap::write_pcap(s, dir / "e.pcap"), 24u);
    auto back = pcap::read_pcap(dir / "e.pcap");
    EXPECT_TRUE(back.records.empty());
    EXPECT_EQ(back, s);
}

TEST(Pcap, TwoRecordSizeByHand)
{
    TempDir dir;
    pcap::PcapStream s;
    s.records.push_back(record(1'000'000, 60));
    s.records.push_back(record(2'000'000, 1400));
    EXPECT_EQ(pcap::write_pcap(s, dir / "two.pcap"), 24u + (16 + 60) + (16 + 1400));
    EXPECT_EQ(std::filesystem::file_size(dir / "two.pcap"), 1516u);
}

TEST(Pcap, GlobalHeaderLayout)
{
    pcap::PcapStream s;
    s.snap_len = 0x1234;
    s.link_type = 101;
    auto bytes = pcap::serialize(s);
    ASSERT_EQ(bytes.size(), 24u);
    const std::uint8_t expect[24] = {0xd4, 0xc3, 0xb2, 0xa1, 2, 0, 4, 0, 0, 0, 0, 0,
                                     0,    0,    0,    0,    0x34, 0x12, 0, 0, 101, 0, 0, 0};
    for (std::size_t i = 0; i < 24; ++i)
        EXPECT_EQ(bytes[i], expect[i]) << "byte " << i;
}

TEST(Pcap, RandomRoundtripAndDeterminism)
{
    TempDir dir;
    std::mt19937_64 rng(11);
    for (int i = 0; i < 50; ++i) {
        auto s = testsupport::random_stream(rng);
        auto path = dir / ("r" + std::to_string(i) + ".pcap");
        pcap::write_pcap(s, path);
        EXPECT_EQ(pcap::read_pcap(path), s);
        EXPECT_EQ(pcap::serialize(s), pcap::serialize(s));
        EXPECT_EQ(fsutil::read_bytes(path), pcap::serialize(s));
    }
}

TEST(Pcap, RoundsHalfUpToMicroseconds)
{
    EXPECT_EQ(pcap::to_micros(1.0000005), 1'000'001u);
    EXPECT_EQ(pcap::to_micros(0.0000004), 0u);
    EXPECT_EQ(pcap::to_micros(2.5), 2'500'000u);
}

TEST(Pcap, TruncatedRecordReportsOffset)
{
    pcap::PcapStream s;
    s.records.push_back(record(5, 10));
    s.records.push_back(record(6, 100));
    auto bytes = pcap::serialize(s);
    bytes.resize(bytes.size() - 7);
    try {
        pcap::parse(bytes);
        FAIL() << "expected pcap_error";
    } catch (const pcap::pcap_error& e) {
        EXPECT_EQ(e.offset(), 24u + 16 + 10);
    }
}

TEST(Pcap, RejectsUnknownMagicAndMissingFile)
{
    std::vector<std::uint8_t> junk(24, 0x42);
    EXPECT_THROW(pcap::parse(junk), pcap::pcap_error);
    EXPECT_THROW(pcap::read_pcap("/nonexistent/nothing.pcap"), error);
}

TEST(Pcap, ReadsNanosecondAndSwappedCaptures)
{
    // Big-endian nanosecond capture, one 3-byte record at 7.0000015 s.
    std::vector<std::uint8_t> b = {0xa1, 0xb2, 0x3c, 0x4d, 0, 2, 0, 4, 0, 0, 0, 0, 0, 0, 0, 0,
                                   0,    0,    0xff, 0xff, 0, 0, 0, 1, 0, 0, 0, 7, 0, 0, 0x05, 0xdc,
                                   0,    0,    0,    3,    0, 0, 0, 3, 9, 8, 7};
    auto s = pcap::parse(b);
    ASSERT_EQ(s.records.size(), 1u);
    EXPECT_EQ(s.records[0].micros(), 7'000'002u);
    EXPECT_EQ(s.records[0].payload, (std::vector<std::uint8_t>{9, 8, 7}));
}

TEST(Pcap, WriteRejectsInvariantViolations)
{
    TempDir dir;
    pcap::PcapStream s;
    s.records.push_back(record(10, 4));
    s.records.push_back(record(5, 4));
    EXPECT_THROW(pcap::write_pcap(s, dir / "bad.pcap"), invariant_error);
    EXPECT_FALSE(std::filesystem::exists(dir / "bad.pcap"));

    pcap::PcapStream big;
    big.snap_len = 8;
    big.records.push_back(record(1, 9));
    EXPECT_THROW(pcap::write_pcap(big, dir / "big.pcap"), invariant_error);

    auto r = record(1, 4);
    r.original_len = 3;
    pcap::PcapStream shorter;
    shorter.records.push_back(r);
    EXPECT_THROW(pcap::write_pcap(shorter, dir / "short.pcap"), invariant_error);
}

TEST(Pcap, UnwritablePathFails)
{
    EXPECT_THROW(pcap::write_pcap(pcap::PcapStream{}, "/nonexistent-dir/x.pcap"), error);
}

TEST(Pcap, ReadsCaptureWrittenByDpkt)
{
    TempDir dir;
    auto script = testsupport::source_dir() / "tests" / "scripts" / "pcap_dump.py";
    auto file = dir / "dpkt.pcap";
    run(std::string(SIMPIPE_PYTHON) + " " + script.string() + " write " + file.string());
    ASSERT_TRUE(std::filesystem::exists(file));
    auto s = pcap::read_pcap(file);
    ASSERT_EQ(s.records.size(), 3u);

    std::istringstream dump(run(std::string(SIMPIPE_PYTHON) + " " + script.string() + " dump " + file.string()));
    std::string header;
    std::getline(dump, header);
    EXPECT_EQ(header, "file linktype 1 snaplen 65535");
    for (const auto& r : s.records) {
        double ts;
        std::size_t len;
        std::string hex;
        ASSERT_TRUE(dump >> ts >> len >> hex);
        EXPECT_NEAR(static_cast<double>(r.micros()) / 1e6, ts, 1.5e-6);
        EXPECT_EQ(r.captured_len(), len);
        std::string ours;
        char buf[3];
        for (auto b : r.payload) {
            std::snprintf(buf, sizeof buf, "%02x", b);
            ours += buf;
        }
        EXPECT_EQ(ours, hex);
    }
    EXPECT_EQ(s.records[0].micros(), 1'700'000'000'250'000u);
    EXPECT_EQ(s.records[1].captured_len(), 60u);
    EXPECT_EQ(s.records[2].captured_len(), 1400u);
}
