#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "simpipe/otn.hpp"
#include "simpipe/pcap.hpp"
#include "simpipe/traffic5g.hpp"

namespace simpipe::metrics {

struct StreamPair {
    traffic::FlowKey key;
    std::filesystem::path ingress;
    std::filesystem::path egress;
    /// Transport record sidecar next to the egress capture, when present.
    std::optional<std::filesystem::path> sidecar;
};

struct Pairing {
    /// Ordered by (user, src, dst).
    std::vector<StreamPair> pairs;
    /// Captures with no counterpart, sorted by path.
    std::vector<std::filesystem::path> unmatched;
};

/// Matches every `u*_s*_d*.pcap` with its `.egress.pcap`.
Pairing pair_streams(const std::filesystem::path& dir);
Pairing pair_streams(const std::filesystem::path& ingress_dir, const std::filesystem::path& egress_dir);

struct LoadedPair {
    traffic::FlowKey key;
    pcap::PcapStream ingress;
    pcap::PcapStream egress;
    std::optional<std::vector<otn::TransportRecord>> transport;
};

LoadedPair load_pair(const StreamPair& pair);

struct UserMetrics {
    traffic::FlowKey key;
    std::vector<double> latency_ms;
    std::uint64_t packet_count = 0;
    std::uint64_t delivered = 0;
    std::uint64_t lost = 0;
    /// Repeated egress sequence numbers; excluded from latency statistics.
    std::uint64_t duplicates = 0;
    double loss_rate = 0.0;
    /// Corruption drops over packets sent; unknown without transport records.
    std::optional<double> error_rate;
    double mean_latency_ms = 0.0;
    /// Nearest-rank 95th percentile.
    double p95_latency_ms = 0.0;
};

UserMetrics compute_user_metrics(const LoadedPair& pair);

/// Dataset-level operands of the conformity score.
struct FeatureVector {
    double latency_req_ms_mean = 0.0;
    double demand_dur_s_mean = 0.0;
    double demand_freq_per_hour_mean = 0.0;
    double packet_avg_size_bytes = 0.0;

    std::array<double, 4> values() const noexcept
    {
        return {latency_req_ms_mean, demand_dur_s_mean, demand_freq_per_hour_mean, packet_avg_size_bytes};
    }
    static FeatureVector from_values(const std::array<double, 4>& v) noexcept { return {v[0], v[1], v[2], v[3]}; }
};

/// Reads `manifest.json` in `dataset_dir` and the captures it lists.
FeatureVector extract_features(const std::filesystem::path& dataset_dir);

struct ConformityWeights {
    double latency = 6.0;
    double duration = 4.0;
    double frequency = 2.0;
    double size = 3.0;

    std::array<double, 4> values() const noexcept { return {latency, duration, frequency, size}; }
    void validate() const;
};

struct ConformityReport {
    std::string reference_label;
    std::string candidate_label;
    FeatureVector reference;
    FeatureVector candidate;
    /// Per-feature similarity in feature order: latency, duration, frequency, size.
    std::array<double, 4> similarity{};
    double aggregate = 0.0;
};

/// Weighted aggregate of per-feature similarities given per-feature
/// similarity values directly.
double aggregate_conformity(const std::array<double, 4>& similarity, const ConformityWeights& weights = {});

/// s_i = 1 - min(1, |c_i - r_i| / r_i), aggregate = sum(w_i s_i) / sum(w_i).
ConformityReport conformity_score(const FeatureVector& candidate, const FeatureVector& reference,
                                  const ConformityWeights& weights = {});

enum class ReportFormat { tsv, json_lines };

ReportFormat report_format_from_string(const std::string& name);

std::string render_report(std::span<const UserMetrics> metrics, const std::optional<ConformityReport>& report,
                          ReportFormat format);
std::filesystem::path export_report(std::span<const UserMetrics> metrics,
                                    const std::optional<ConformityReport>& report,
                                    const std::filesystem::path& path, ReportFormat format);

/// Row-level view of a TSV report, as printed.
struct ParsedReport {
    struct Row {
        traffic::FlowKey key;
        std::uint64_t packet_count = 0;
        std::uint64_t delivered = 0;
        std::uint64_t lost = 0;
        std::uint64_t duplicates = 0;
        double loss_rate = 0.0;
        std::optional<double> error_rate;
        double mean_latency_ms = 0.0;
        double p95_latency_ms = 0.0;
    };
    std::vector<Row> rows;
    std::optional<ConformityReport> conformity;
};

ParsedReport parse_tsv_report(const std::string& text);

} // namespace simpipe::metrics
