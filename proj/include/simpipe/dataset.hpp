#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "simpipe/traffic5g.hpp"

namespace simpipe::traffic {

inline constexpr const char* dataset_manifest_name = "manifest.json";

/// Links the profiles, realized schedules and capture inventory of one
/// generated dataset; the input of feature extraction.
struct DatasetManifest {
    std::string label;
    double trace_duration_s = 0.0;
    double clock_origin_s = 0.0;
    std::size_t element_count = 0;
    ProfileTable profiles;
    AppAssignmentPolicy policy;
    std::vector<DemandSchedule> schedules;
    /// File names, relative to the manifest's directory.
    std::vector<std::string> pcaps;
};

std::string render_manifest(const DatasetManifest& manifest);
DatasetManifest parse_manifest(const std::string& text);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest read_manifest(const std::filesystem::path& path);

} // namespace simpipe::traffic
