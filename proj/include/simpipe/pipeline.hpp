#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "simpipe/metrics.hpp"
#include "simpipe/mobility.hpp"
#include "simpipe/orchestrator.hpp"
#include "simpipe/traffic5g.hpp"

namespace simpipe::pipeline {

enum class Mode { singular, distributed };

const char* to_string(Mode mode) noexcept;
Mode mode_from_string(const std::string& name);

struct StageSeeds {
    std::uint64_t mobility = 0;
    std::uint64_t traffic = 0;
    std::uint64_t transport = 0;
};

/// Per-stage seeds derived from one base seed.
StageSeeds derive_stage_seeds(std::uint64_t base);

struct MobilityStage {
    /// Use an existing trace instead of generating one.
    std::optional<std::filesystem::path> import_path;
    mobility::PopulationConfig population;
    std::vector<mobility::EventInjection> events;
    double time_step_s = 10.0;
    double duration_s = 3600.0;
    double clock_origin_s = 8.0 * 3600.0;
};

struct TrafficStage {
    traffic::AppAssignmentPolicy policy;
    traffic::ProfileTable profiles = traffic::default_profiles();
    std::string naming = traffic::canonical_pattern;
};

struct TransportStage {
    std::filesystem::path topology;
    std::size_t k = 2;
    /// Committed rate over the peak offered rate of a flow.
    double rate_headroom = 1.25;
};

struct ReportStage {
    metrics::ReportFormat format = metrics::ReportFormat::tsv;
    /// Dataset directory (with manifest.json) to score conformity against.
    std::optional<std::filesystem::path> reference_dir;
};

struct PipelineConfig {
    std::string label = "run";
    Mode mode = Mode::singular;
    std::int64_t worker_id = 0;
    std::int64_t worker_count = 1;
    std::filesystem::path master_dir;
    double timeout_s = 600.0;
    int poll_interval_ms = 250;
    StageSeeds seeds;
    /// Ask for confirmation before every stage; the wait counts as monitored time.
    bool interactive = false;

    MobilityStage mobility;
    TrafficStage traffic;
    TransportStage transport;
    ReportStage report;

    /// The configuration as loaded, recorded in the run manifest.
    nlohmann::json document;

    void validate() const;
};

/// Relative paths resolve against `base_dir`. SIMPIPE_MASTER_DIR, when set,
/// replaces master_dir.
PipelineConfig parse_pipeline_config(const std::string& json_text, const std::filesystem::path& base_dir);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

struct StageDirs {
    std::filesystem::path mobility;
    std::filesystem::path traffic;
    std::filesystem::path transport;
    std::filesystem::path report;

    static StageDirs under(const std::filesystem::path& master_dir);
    std::filesystem::path trace() const { return mobility / "trace.xml"; }
};

inline constexpr const char* trace_pattern = R"(trace\.xml)";
inline constexpr const char* ingress_pattern = R"(u\d+_s\d+_d\d+\.pcap)";
inline constexpr const char* egress_pattern = R"(u\d+_s\d+_d\d+\.egress\.pcap)";
inline constexpr const char* report_pattern = R"(report\.(tsv|jsonl))";

/// Generates or imports the trace and writes mobility/trace.xml. Returns the
/// element count.
std::size_t run_mobility_stage(const PipelineConfig& config);

struct TrafficPlan {
    std::vector<traffic::DemandSchedule> schedules;
    std::size_t element_count = 0;
    /// Users with at least one packet; the number of captures the stage emits.
    std::size_t active_users = 0;
};

/// Deterministic schedule computation shared by every worker.
TrafficPlan plan_traffic(const PipelineConfig& config);

/// Writes this worker's captures (and, on worker 0, manifest.json).
std::size_t run_traffic_stage(const PipelineConfig& config, const TrafficPlan& plan);

struct TransportSummary {
    /// Ingress captures found; every one yields an egress capture.
    std::size_t flows = 0;
    /// Egress captures written by this worker.
    std::size_t written = 0;
    std::size_t channels = 0;
    std::size_t unroutable = 0;
};

/// Flows are read from the traffic directory; this worker simulates channels
/// (and unroutable flows) whose id is congruent to its worker id.
TransportSummary run_transport_stage(const PipelineConfig& config);

/// Pairs ingress and egress captures, computes metrics and conformity, and
/// writes report/report.tsv (or .jsonl).
std::filesystem::path run_report_stage(const PipelineConfig& config);

inline constexpr const char* run_manifest_name = "run_manifest.json";

std::filesystem::path run_manifest_path(const PipelineConfig& config);

/// Called before each stage when the configuration is interactive.
using PromptHook = std::function<void(const std::string& stage)>;

/// Runs the four stages in order, each followed by a trigger on its output
/// directory. Stages whose trigger fired in an earlier run are skipped.
/// Throws stage_error on failure and trigger_timeout when a trigger expired
/// without seeing any file; the run manifest is written in every case.
std::filesystem::path run_pipeline(const PipelineConfig& config, const PromptHook& prompt = {});

/// Drops wall-clock fields so manifests of repeated runs compare equal.
nlohmann::json strip_wall_clock(nlohmann::json manifest);

} // namespace simpipe::pipeline
