#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace simpipe::mobility {

struct Position {
    double x = 0.0;
    double y = 0.0;

    bool operator==(const Position&) const = default;
};

double distance(Position a, Position b) noexcept;

enum class LocationKind { home_zone, workplace, school, mall, stadium, bus_stop };
enum class TravelMode { pedestrian, vehicle };

inline constexpr double pedestrian_max_speed_mps = 2.0;
inline constexpr double vehicle_max_speed_mps = 30.0;

double max_speed(TravelMode mode) noexcept;

const char* to_string(LocationKind kind) noexcept;
LocationKind location_kind_from_string(const std::string& name);

/// Clock hours in [0, 24]; start < end.
struct HourWindow {
    double start_hour = 0.0;
    double end_hour = 24.0;
};

struct LocationSpec {
    LocationKind kind = LocationKind::home_zone;
    Position position;
    int capacity = 1;
    std::optional<HourWindow> open_close;
};

struct DemographicGroup {
    std::string name;
    double fraction = 0.0;
    double employment_rate = 0.0;
    /// Non-employed members of a student group attend school.
    bool student = false;
};

struct HouseholdSize {
    int size = 1;
    double probability = 1.0;
};

struct PopulationConfig {
    std::uint64_t inhabitant_count = 0;
    std::vector<DemographicGroup> demographic_groups;
    std::vector<HouseholdSize> household_size_distribution;
    HourWindow work_hours{8.0, 17.0};
    HourWindow education_hours{8.0, 15.0};
    std::vector<LocationSpec> locations;
    double map_width_m = 5000.0;
    double map_height_m = 5000.0;
    /// Fraction of agents travelling by vehicle; the rest walk.
    double vehicle_share = 0.5;
    /// Household homes scatter uniformly within this radius of their zone.
    double home_radius_m = 150.0;
    double mall_visit_probability = 0.3;
    std::uint64_t rng_seed = 0;

    void validate() const;
};

struct Activity {
    LocationKind kind = LocationKind::home_zone;
    /// Index into PopulationConfig::locations. For home activities the agent's
    /// own home position is used instead of the zone centre.
    std::size_t location = 0;
    /// Clock seconds since midnight; the agent heads for `location` at start_s.
    double start_s = 0.0;
    double end_s = 0.0;
};

struct Agent {
    std::uint64_t user_id = 0;
    std::string demographic_group;
    TravelMode mode = TravelMode::pedestrian;
    Position home;
    std::uint64_t household = 0;
    std::vector<Activity> daily_plan;
};

struct Sample {
    double time_s = 0.0;
    std::uint64_t user_id = 0;
    double x = 0.0;
    double y = 0.0;
    double speed = 0.0;

    bool operator==(const Sample&) const = default;
};

struct MobilityTrace {
    double time_step_s = 1.0;
    double duration_s = 0.0;
    /// Clock time (seconds since midnight) of trace time 0.
    double clock_origin_s = 0.0;
    std::vector<Sample> samples;
    std::vector<Agent> agents;

    /// Ordering, membership and per-mode speed bound; throws invariant_error.
    void validate() const;
    std::size_t element_count() const;
};

enum class EventKind { congestion, public_event };

struct EventInjection {
    EventKind kind = EventKind::congestion;
    Position center;
    double radius_m = 0.0;
    /// Trace seconds.
    double start_s = 0.0;
    double end_s = 0.0;
    /// Congestion: speed divisor (>= 1). Public event: fraction of agents attracted.
    double intensity = 1.0;

    void validate(double duration_s) const;
};

struct SimulationOptions {
    double time_step_s = 1.0;
    double duration_s = 0.0;
    std::uint64_t seed = 0;
    double clock_origin_s = 0.0;
};

/// Largest-remainder apportionment of `total` over `weights`; ties go to
/// the earlier weight.
std::vector<std::uint64_t> apportion(std::uint64_t total, std::span<const double> weights);

std::vector<Agent> generate_population(const PopulationConfig& config);

/// Whether `user_id` is drawn into public event number `event_index`.
/// Seeded hash of the id compared against the event intensity.
bool attends_event(std::uint64_t user_id, const EventInjection& event, std::size_t event_index,
                   std::uint64_t seed);

MobilityTrace simulate_mobility(std::span<const Agent> agents, std::span<const LocationSpec> locations,
                                std::span<const EventInjection> events, const SimulationOptions& options);

/// FCD-style XML. Returns the element count written to the root.
std::size_t export_trace(const MobilityTrace& trace, const std::filesystem::path& path);
std::string render_trace(const MobilityTrace& trace);

MobilityTrace import_trace(const std::filesystem::path& path);
MobilityTrace parse_trace(const std::string& xml);

} // namespace simpipe::mobility
