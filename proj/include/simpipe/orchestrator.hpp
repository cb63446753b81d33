#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "simpipe/traffic5g.hpp"

namespace simpipe::orchestrator {

/// Root attribute of an exported trace; the number of communication elements.
std::size_t read_element_count(const std::filesystem::path& trace_path);

enum class TriggerStatus { waiting, fired_on_count, fired_on_timeout };

const char* to_string(TriggerStatus status) noexcept;
TriggerStatus trigger_status_from_string(const std::string& name);

struct TriggerState {
    using clock = std::chrono::steady_clock;

    std::filesystem::path watched_dir;
    /// ECMAScript regex matched against whole file names. Hidden files
    /// (in-progress atomic writes) are never counted.
    std::string pattern = R"(.*\.pcap)";
    std::size_t expected = 0;
    std::size_t observed = 0;
    clock::time_point deadline;
    TriggerStatus status = TriggerStatus::waiting;
    clock::time_point fired_at;

    bool fired() const noexcept { return status != TriggerStatus::waiting; }
};

TriggerState make_trigger(std::filesystem::path dir, std::size_t expected, std::chrono::milliseconds timeout,
                          std::string pattern = R"(.*\.pcap)");

/// Polls until `expected` matching files are present and size-stable across
/// two consecutive polls, or the deadline passes. The first poll happens one
/// interval after the call; an expected count of zero fires immediately.
/// A fired state is returned unchanged.
TriggerState watch_and_trigger(TriggerState state, std::chrono::milliseconds poll_interval);

/// Round-robin by user_id modulo worker_count.
std::vector<std::vector<std::uint64_t>> partition_work(std::span<const std::uint64_t> user_ids,
                                                       std::int64_t worker_count);

using RenameMap = std::map<std::string, std::string>;
using NameInferencer = std::function<std::optional<traffic::FlowKey>(const std::string&)>;

inline constexpr const char* rename_map_name = "rename_map.tsv";

/// Recognizes foreign names carrying user, source and destination numbers,
/// e.g. `UE12-src3-dst7.pcap` or `user_12_source_3_dest_7_trace.pcap`.
std::optional<traffic::FlowKey> infer_flow_key(const std::string& filename);

RenameMap read_rename_map(const std::filesystem::path& path);
void write_rename_map(const RenameMap& map, const std::filesystem::path& path);

/// Renames every non-canonical capture in `dir`: map entries are applied
/// verbatim, other names go through `inferencer`. Validates every rename
/// before touching the directory, so a collision or unparseable name leaves
/// it unchanged. Applied renames are appended to `rename_map.tsv` in `dir`.
std::size_t rename_batch(const std::filesystem::path& dir, const RenameMap& map = {},
                         const NameInferencer& inferencer = infer_flow_key);

} // namespace simpipe::orchestrator
