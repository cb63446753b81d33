#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "simpipe/pcap.hpp"

namespace testsupport {

namespace fs = std::filesystem;

inline fs::path source_dir()
{
    return fs::path(SIMPIPE_SOURCE_DIR);
}

inline fs::path fixture(const std::string& name)
{
    return source_dir() / "tests" / "fixtures" / name;
}

inline fs::path reference_topology()
{
    return source_dir() / "configs" / "reference_8node.topo";
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "t")
    {
        static std::atomic<unsigned> counter{0};
        std::random_device rd;
        path_ = fs::temp_directory_path() /
                ("simpipe-" + tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        fs::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

/// Random but valid stream: sorted times, arbitrary payload bytes.
inline simpipe::pcap::PcapStream random_stream(std::mt19937_64& rng, std::size_t max_records = 40)
{
    simpipe::pcap::PcapStream s;
    s.link_type = std::uniform_int_distribution<std::uint32_t>(0, 300)(rng);
    s.snap_len = std::uniform_int_distribution<std::uint32_t>(64, 65535)(rng);
    std::size_t n = std::uniform_int_distribution<std::size_t>(0, max_records)(rng);
    std::uint64_t t = std::uniform_int_distribution<std::uint64_t>(0, 4'000'000'000ULL * 1'000'000ULL / 2)(rng);
    for (std::size_t i = 0; i < n; ++i) {
        t += std::uniform_int_distribution<std::uint64_t>(0, 5'000'000)(rng);
        simpipe::pcap::PacketRecord r;
        r.set_micros(t);
        std::size_t len = std::uniform_int_distribution<std::size_t>(0, std::min<std::size_t>(s.snap_len, 1600))(rng);
        r.payload.resize(len);
        for (auto& b : r.payload)
            b = static_cast<std::uint8_t>(rng());
        r.original_len = static_cast<std::uint32_t>(len) + std::uniform_int_distribution<std::uint32_t>(0, 100)(rng);
        s.records.push_back(std::move(r));
    }
    return s;
}

} // namespace testsupport
