#include "simpipe/mobility.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "simpipe/error.hpp"
#include "simpipe/fsutil.hpp"
#include "simpipe/rng.hpp"

namespace simpipe::mobility {

namespace {

constexpr double seconds_per_hour = 3600.0;
constexpr double seconds_per_day = 86400.0;
constexpr double bus_stop_wait_s = 600.0;
constexpr double bus_stop_min_distance_m = 1000.0;

std::string fmt_double(const char* spec, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v + 0.0);
    return buf;
}

std::size_t pick_index(rng_engine& eng, std::size_t n)
{
    auto i = static_cast<std::size_t>(uniform01(eng) * static_cast<double>(n));
    return std::min(i, n - 1);
}

template <typename T>
void shuffle(std::vector<T>& v, rng_engine& eng)
{
    for (std::size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[pick_index(eng, i)]);
}

/// Location index drawn with probability proportional to capacity.
std::size_t pick_by_capacity(rng_engine& eng, const std::vector<std::size_t>& candidates,
                             const std::vector<LocationSpec>& locations)
{
    double total = 0.0;
    for (auto i : candidates)
        total += locations[i].capacity;
    double u = uniform01(eng) * total;
    for (auto i : candidates) {
        u -= locations[i].capacity;
        if (u < 0.0)
            return i;
    }
    return candidates.back();
}

void check_window(const HourWindow& w, const char* what)
{
    if (!(w.start_hour >= 0.0 && w.end_hour <= 24.0 && w.start_hour < w.end_hour))
        throw config_error(std::string(what) + " must satisfy 0 <= start < end <= 24");
}

} // namespace

double distance(Position a, Position b) noexcept
{
    return std::hypot(a.x - b.x, a.y - b.y);
}

double max_speed(TravelMode mode) noexcept
{
    return mode == TravelMode::vehicle ? vehicle_max_speed_mps : pedestrian_max_speed_mps;
}

const char* to_string(LocationKind kind) noexcept
{
    switch (kind) {
    case LocationKind::home_zone: return "home_zone";
    case LocationKind::workplace: return "workplace";
    case LocationKind::school: return "school";
    case LocationKind::mall: return "mall";
    case LocationKind::stadium: return "stadium";
    case LocationKind::bus_stop: return "bus_stop";
    }
    return "unknown";
}

LocationKind location_kind_from_string(const std::string& name)
{
    for (auto k : {LocationKind::home_zone, LocationKind::workplace, LocationKind::school, LocationKind::mall,
                   LocationKind::stadium, LocationKind::bus_stop})
        if (name == to_string(k))
            return k;
    throw config_error("unknown location kind '" + name + "'");
}

void PopulationConfig::validate() const
{
    double fsum = 0.0;
    for (const auto& g : demographic_groups) {
        if (g.fraction < 0.0 || g.employment_rate < 0.0 || g.employment_rate > 1.0)
            throw config_error("demographic group '" + g.name + "' has an out-of-range fraction or employment rate");
        fsum += g.fraction;
    }
    if (inhabitant_count > 0 && std::abs(fsum - 1.0) > 1e-9)
        throw config_error("demographic fractions must sum to 1");
    double hsum = 0.0;
    for (const auto& h : household_size_distribution) {
        if (h.size <= 0 || h.probability < 0.0)
            throw config_error("household sizes must be positive with non-negative probability");
        hsum += h.probability;
    }
    if (inhabitant_count > 0 && std::abs(hsum - 1.0) > 1e-9)
        throw config_error("household size probabilities must sum to 1");
    check_window(work_hours, "work_hours");
    check_window(education_hours, "education_hours");
    if (!(map_width_m > 0.0 && map_height_m > 0.0))
        throw config_error("map bounds must be positive");
    if (vehicle_share < 0.0 || vehicle_share > 1.0)
        throw config_error("vehicle_share must lie in [0, 1]");
    for (std::size_t i = 0; i < locations.size(); ++i) {
        const auto& l = locations[i];
        std::string where = "location " + std::to_string(i) + ": ";
        if (l.capacity <= 0)
            throw config_error(where + "capacity must be positive");
        if (l.position.x < 0.0 || l.position.y < 0.0 || l.position.x > map_width_m || l.position.y > map_height_m)
            throw config_error(where + "position outside the map bounds");
        if (l.open_close)
            check_window(*l.open_close, "open_close");
    }
}

std::size_t MobilityTrace::element_count() const
{
    std::set<std::uint64_t> ids;
    for (const auto& s : samples)
        ids.insert(s.user_id);
    return ids.size();
}

void MobilityTrace::validate() const
{
    std::map<std::uint64_t, TravelMode> modes;
    for (const auto& a : agents)
        if (!modes.emplace(a.user_id, a.mode).second)
            throw invariant_error("duplicate user_id " + std::to_string(a.user_id) + " in agents");

    std::map<std::uint64_t, const Sample*> last;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (i > 0) {
            const auto& p = samples[i - 1];
            if (s.time_s < p.time_s || (s.time_s == p.time_s && s.user_id <= p.user_id))
                throw invariant_error("samples not sorted by (time, user_id) at index " + std::to_string(i));
        }
        auto m = modes.find(s.user_id);
        if (m == modes.end())
            throw invariant_error("sample references unknown user_id " + std::to_string(s.user_id));
        auto& prev = last[s.user_id];
        if (prev) {
            double dt = s.time_s - prev->time_s;
            double d = std::hypot(s.x - prev->x, s.y - prev->y);
            // Printed coordinates carry 1e-6 m of rounding each.
            if (d > max_speed(m->second) * dt * (1.0 + 1e-6) + 2e-6)
                throw invariant_error("user " + std::to_string(s.user_id) + " exceeds its mode speed at t=" +
                                      fmt_double("%.2f", s.time_s));
        }
        prev = &s;
    }
}

void EventInjection::validate(double duration_s) const
{
    if (!(start_s >= 0.0 && end_s <= duration_s && start_s < end_s))
        throw config_error("event window [" + fmt_double("%.2f", start_s) + ", " + fmt_double("%.2f", end_s) +
                           "] lies outside the trace duration");
    if (!(radius_m > 0.0))
        throw config_error("event radius must be positive");
    if (kind == EventKind::congestion && !(intensity >= 1.0))
        throw config_error("congestion intensity is a speed divisor and must be >= 1");
    if (kind == EventKind::public_event && !(intensity > 0.0 && intensity <= 1.0))
        throw config_error("public event intensity must lie in (0, 1]");
}

std::vector<std::uint64_t> apportion(std::uint64_t total, std::span<const double> weights)
{
    std::vector<std::uint64_t> counts(weights.size(), 0);
    double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (weights.empty() || !(wsum > 0.0))
        return counts;

    std::vector<double> remainder(weights.size());
    std::uint64_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        double quota = static_cast<double>(total) * weights[i] / wsum;
        counts[i] = static_cast<std::uint64_t>(std::floor(quota));
        // Quantized so that exact ties in the rational quotas stay ties.
        remainder[i] = std::round((quota - std::floor(quota)) * 1e9);
        assigned += counts[i];
    }
    std::vector<std::size_t> order(weights.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t k = 0; assigned < total; ++k, ++assigned)
        ++counts[order[k % order.size()]];
    return counts;
}

std::vector<Agent> generate_population(const PopulationConfig& config)
{
    config.validate();
    const std::uint64_t n = config.inhabitant_count;
    if (n == 0)
        return {};

    const auto& locs = config.locations;
    std::map<LocationKind, std::vector<std::size_t>> by_kind;
    for (std::size_t i = 0; i < locs.size(); ++i)
        by_kind[locs[i].kind].push_back(i);
    auto require = [&](LocationKind k) -> const std::vector<std::size_t>& {
        auto it = by_kind.find(k);
        if (it == by_kind.end() || it->second.empty())
            throw config_error(std::string("no location of kind ") + to_string(k) + " available for agent plans");
        return it->second;
    };
    const auto& home_zones = require(LocationKind::home_zone);

    const auto& groups = config.demographic_groups;
    std::vector<double> fractions;
    for (const auto& g : groups)
        fractions.push_back(g.fraction);
    auto group_counts = apportion(n, fractions);

    std::vector<std::size_t> labels;
    labels.reserve(n);
    for (std::size_t g = 0; g < groups.size(); ++g)
        labels.insert(labels.end(), group_counts[g], g);
    auto eng = make_engine(config.rng_seed, 0, stream_tag::population);
    shuffle(labels, eng);

    std::vector<Agent> agents(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        agents[i].user_id = i;
        agents[i].demographic_group = groups[labels[i]].name;
        agents[i].mode = hash_uniform(config.rng_seed, stream_tag::population, i, 1) < config.vehicle_share
                             ? TravelMode::vehicle
                             : TravelMode::pedestrian;
    }

    std::vector<bool> employed(n, false);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        std::vector<std::uint64_t> members;
        for (std::uint64_t i = 0; i < n; ++i)
            if (labels[i] == g)
                members.push_back(i);
        const double rate = groups[g].employment_rate;
        const double split[] = {rate, 1.0 - rate};
        auto k = apportion(members.size(), split)[0];
        auto geng = make_engine(config.rng_seed, g + 1, stream_tag::population);
        shuffle(members, geng);
        for (std::uint64_t j = 0; j < k; ++j)
            employed[members[j]] = true;
    }

    // Households fill consecutive ids and share one home position.
    std::vector<std::size_t> home_zone_of(n);
    {
        auto heng = make_engine(config.rng_seed, 0, stream_tag::household);
        std::uint64_t i = 0;
        std::uint64_t household = 0;
        while (i < n) {
            double u = uniform01(heng);
            int size = config.household_size_distribution.back().size;
            for (const auto& h : config.household_size_distribution) {
                u -= h.probability;
                if (u < 0.0) {
                    size = h.size;
                    break;
                }
            }
            std::size_t zone = pick_by_capacity(heng, home_zones, locs);
            double r = config.home_radius_m * std::sqrt(uniform01(heng));
            double theta = 2.0 * std::numbers::pi * uniform01(heng);
            Position home{locs[zone].position.x + r * std::cos(theta), locs[zone].position.y + r * std::sin(theta)};
            home.x = std::clamp(home.x, 0.0, config.map_width_m);
            home.y = std::clamp(home.y, 0.0, config.map_height_m);
            for (int k = 0; k < size && i < n; ++k, ++i) {
                agents[i].home = home;
                agents[i].household = household;
                home_zone_of[i] = zone;
            }
            ++household;
        }
    }

    for (std::uint64_t i = 0; i < n; ++i) {
        Agent& a = agents[i];
        const DemographicGroup& group = groups[labels[i]];
        auto peng = make_engine(config.rng_seed, i, stream_tag::plan);
        auto& plan = a.daily_plan;
        auto push = [&](LocationKind kind, std::size_t loc, double start) {
            if (!plan.empty())
                plan.back().end_s = start;
            plan.push_back({kind, loc, start, seconds_per_day});
        };
        push(LocationKind::home_zone, home_zone_of[i], 0.0);

        double free_from = (9.0 + 3.0 * uniform01(peng)) * seconds_per_hour;
        std::optional<std::pair<LocationKind, HourWindow>> main;
        if (employed[i])
            main.emplace(LocationKind::workplace, config.work_hours);
        else if (group.student)
            main.emplace(LocationKind::school, config.education_hours);

        if (main) {
            const auto& [kind, window] = *main;
            std::size_t dest = pick_by_capacity(peng, require(kind), locs);
            double len = (window.end_hour - window.start_hour) * seconds_per_hour;
            double start = window.start_hour * seconds_per_hour + 0.15 * len * uniform01(peng);
            double end = window.end_hour * seconds_per_hour - 0.15 * len * uniform01(peng);
            auto stops = by_kind.find(LocationKind::bus_stop);
            if (a.mode == TravelMode::pedestrian && stops != by_kind.end() &&
                distance(a.home, locs[dest].position) > bus_stop_min_distance_m && start + bus_stop_wait_s < end) {
                std::size_t nearest = stops->second.front();
                for (auto s : stops->second)
                    if (distance(a.home, locs[s].position) < distance(a.home, locs[nearest].position))
                        nearest = s;
                push(LocationKind::bus_stop, nearest, start);
                start += bus_stop_wait_s;
            }
            push(kind, dest, start);
            free_from = end;
        }

        bool visited = false;
        auto malls = by_kind.find(LocationKind::mall);
        if (malls != by_kind.end() && uniform01(peng) < config.mall_visit_probability) {
            std::size_t mall = malls->second[pick_index(peng, malls->second.size())];
            HourWindow hours = locs[mall].open_close.value_or(HourWindow{0.0, 24.0});
            double start = std::max(free_from, hours.start_hour * seconds_per_hour);
            double end = std::min(start + (0.5 + 1.5 * uniform01(peng)) * seconds_per_hour,
                                  hours.end_hour * seconds_per_hour);
            if (end > start + bus_stop_wait_s) {
                // Leave work or school on time even when the mall opens later.
                if (main && start > free_from)
                    push(LocationKind::home_zone, home_zone_of[i], free_from);
                push(LocationKind::mall, mall, start);
                free_from = end;
                visited = true;
            }
        }
        if (main || visited)
            push(LocationKind::home_zone, home_zone_of[i], free_from);
    }
    return agents;
}

bool attends_event(std::uint64_t user_id, const EventInjection& event, std::size_t event_index, std::uint64_t seed)
{
    return event.kind == EventKind::public_event &&
           hash_uniform(seed, stream_tag::public_event, user_id, event_index) < event.intensity;
}

namespace {

/// Straight-line kinematics of one agent with piecewise-constant speed.
/// Speed changes only at activity starts, event window edges and congestion
/// region boundaries, each of which is integrated exactly.
class AgentMover {
public:
    AgentMover(const Agent& agent, std::span<const LocationSpec> locations, std::span<const EventInjection> events,
               std::vector<std::size_t> attended, double clock_origin)
        : agent_(agent), locations_(locations), events_(events), attended_(std::move(attended)),
          origin_(clock_origin)
    {
        for (const auto& act : agent_.daily_plan)
            if (act.kind != LocationKind::home_zone && act.location >= locations_.size())
                throw config_error("agent " + std::to_string(agent_.user_id) + " plan references missing location " +
                                   std::to_string(act.location));
    }

    Position plan_target(double t) const
    {
        const auto& plan = agent_.daily_plan;
        if (plan.empty())
            return agent_.home;
        double clock = origin_ + t;
        const Activity* current = &plan.front();
        for (const auto& act : plan)
            if (act.start_s <= clock)
                current = &act;
        if (current->kind == LocationKind::home_zone)
            return agent_.home;
        return locations_[current->location].position;
    }

    Position target(double t) const
    {
        for (auto e : attended_)
            if (t >= events_[e].start_s && t < events_[e].end_s)
                return events_[e].center;
        return plan_target(t);
    }

    /// Earliest time after `now` at which the target or a congestion window changes.
    double next_change(double now, double limit) const
    {
        double next = limit;
        for (const auto& act : agent_.daily_plan) {
            double t = act.start_s - origin_;
            if (t > now && t < next)
                next = t;
        }
        auto consider = [&](const EventInjection& e) {
            if (e.start_s > now && e.start_s < next)
                next = e.start_s;
            if (e.end_s > now && e.end_s < next)
                next = e.end_s;
        };
        for (auto e : attended_)
            consider(events_[e]);
        for (const auto& e : events_)
            if (e.kind == EventKind::congestion)
                consider(e);
        return next;
    }

    double speed_divisor(Position probe, double now) const
    {
        double divisor = 1.0;
        for (const auto& e : events_)
            if (e.kind == EventKind::congestion && now >= e.start_s && now < e.end_s &&
                distance(probe, e.center) < e.radius_m)
                divisor = std::max(divisor, e.intensity);
        return divisor;
    }

    /// Distance along the unit direction until the next congestion boundary.
    double boundary_distance(Position pos, double dx, double dy, double now) const
    {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& e : events_) {
            if (e.kind != EventKind::congestion || now < e.start_s || now >= e.end_s)
                continue;
            double ox = pos.x - e.center.x;
            double oy = pos.y - e.center.y;
            double b = dx * ox + dy * oy;
            double c = ox * ox + oy * oy - e.radius_m * e.radius_m;
            double disc = b * b - c;
            if (disc <= 0.0)
                continue;
            double root = std::sqrt(disc);
            for (double d : {-b - root, -b + root})
                if (d > 1e-7 && d < best)
                    best = d;
        }
        return best;
    }

    void advance(Position& pos, double from, double to) const
    {
        const double vmax = max_speed(agent_.mode);
        double now = from;
        while (now < to) {
            Position tgt = target(now);
            double horizon = next_change(now, to);
            double d = distance(pos, tgt);
            if (d <= 1e-12) {
                pos = tgt;
                now = horizon;
                continue;
            }
            double dx = (tgt.x - pos.x) / d;
            double dy = (tgt.y - pos.y) / d;
            double v = vmax / speed_divisor({pos.x + dx * 1e-7, pos.y + dy * 1e-7}, now);
            double seg = horizon - now;
            bool to_horizon = true;
            double limit_d = std::min(d, boundary_distance(pos, dx, dy, now));
            if (limit_d / v < seg) {
                seg = limit_d / v;
                to_horizon = false;
            }
            double move = v * seg;
            if (move >= d - 1e-12) {
                pos = tgt;
            } else {
                pos.x += dx * move;
                pos.y += dy * move;
            }
            now = to_horizon ? horizon : now + seg;
        }
    }

private:
    const Agent& agent_;
    std::span<const LocationSpec> locations_;
    std::span<const EventInjection> events_;
    std::vector<std::size_t> attended_;
    double origin_;
};

} // namespace

MobilityTrace simulate_mobility(std::span<const Agent> agents, std::span<const LocationSpec> locations,
                                std::span<const EventInjection> events, const SimulationOptions& options)
{
    if (!(options.time_step_s > 0.0))
        throw config_error("time_step_s must be positive");
    if (!(options.duration_s >= options.time_step_s))
        throw config_error("duration_s must be at least one time step");
    for (const auto& e : events)
        e.validate(options.duration_s);

    MobilityTrace trace;
    trace.time_step_s = options.time_step_s;
    trace.duration_s = options.duration_s;
    trace.clock_origin_s = options.clock_origin_s;
    trace.agents.assign(agents.begin(), agents.end());
    std::sort(trace.agents.begin(), trace.agents.end(),
              [](const Agent& a, const Agent& b) { return a.user_id < b.user_id; });
    for (std::size_t i = 1; i < trace.agents.size(); ++i)
        if (trace.agents[i].user_id == trace.agents[i - 1].user_id)
            throw invariant_error("duplicate user_id " + std::to_string(trace.agents[i].user_id));

    const auto steps = static_cast<std::size_t>(std::floor(options.duration_s / options.time_step_s + 1e-9));
    const std::size_t count = trace.agents.size();
    trace.samples.resize((steps + 1) * count);

    for (std::size_t a = 0; a < count; ++a) {
        const Agent& agent = trace.agents[a];
        std::vector<std::size_t> attended;
        for (std::size_t e = 0; e < events.size(); ++e)
            if (attends_event(agent.user_id, events[e], e, options.seed))
                attended.push_back(e);
        AgentMover mover(agent, locations, events, std::move(attended), options.clock_origin_s);

        Position pos = mover.plan_target(0.0);
        trace.samples[a] = {0.0, agent.user_id, pos.x, pos.y, 0.0};
        for (std::size_t k = 1; k <= steps; ++k) {
            double t0 = static_cast<double>(k - 1) * options.time_step_s;
            double t1 = static_cast<double>(k) * options.time_step_s;
            Position before = pos;
            mover.advance(pos, t0, t1);
            trace.samples[k * count + a] = {t1, agent.user_id, pos.x, pos.y,
                                            distance(before, pos) / options.time_step_s};
        }
    }
    return trace;
}

std::string render_trace(const MobilityTrace& trace)
{
    std::map<std::uint64_t, const Agent*> agents;
    for (const auto& a : trace.agents)
        agents[a.user_id] = &a;

    std::string out;
    out.reserve(trace.samples.size() * 96 + 256);
    out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<fcd-export element_count=\"" + std::to_string(trace.element_count()) + "\" time_step=\"" +
           fmt_double("%.2f", trace.time_step_s) + "\" duration=\"" + fmt_double("%.2f", trace.duration_s) +
           "\" clock_origin=\"" + fmt_double("%.2f", trace.clock_origin_s) + "\">\n";
    bool open = false;
    double current = 0.0;
    for (const auto& s : trace.samples) {
        if (!open || s.time_s != current) {
            if (open)
                out += "    </timestep>\n";
            out += "    <timestep time=\"" + fmt_double("%.2f", s.time_s) + "\">\n";
            open = true;
            current = s.time_s;
        }
        auto it = agents.find(s.user_id);
        bool vehicle = it != agents.end() && it->second->mode == TravelMode::vehicle;
        out += vehicle ? "        <vehicle" : "        <person";
        out += " id=\"" + std::to_string(s.user_id) + "\" x=\"" + fmt_double("%.6f", s.x) + "\" y=\"" +
               fmt_double("%.6f", s.y) + "\" speed=\"" + fmt_double("%.6f", s.speed) + "\"";
        if (it != agents.end() && !it->second->demographic_group.empty())
            out += " type=\"" + it->second->demographic_group + "\"";
        out += "/>\n";
    }
    if (open)
        out += "    </timestep>\n";
    out += "</fcd-export>\n";
    return out;
}

std::size_t export_trace(const MobilityTrace& trace, const std::filesystem::path& path)
{
    trace.validate();
    fsutil::atomic_write(path, render_trace(trace));
    return trace.element_count();
}

MobilityTrace parse_trace(const std::string& xml)
{
    namespace pt = boost::property_tree;
    pt::ptree doc;
    try {
        std::istringstream in(xml);
        pt::read_xml(in, doc);
    } catch (const pt::xml_parser_error& e) {
        throw format_error(std::string("malformed trace document: ") + e.what());
    }
    auto root = doc.get_child_optional("fcd-export");
    if (!root)
        throw format_error("malformed trace document: missing <fcd-export> root");

    MobilityTrace trace;
    trace.clock_origin_s = root->get("<xmlattr>.clock_origin", 0.0);
    std::map<std::uint64_t, Agent> agents;
    std::vector<double> times;
    try {
        for (const auto& [name, step] : *root) {
            if (name != "timestep")
                continue;
            double t = step.get<double>("<xmlattr>.time");
            if (!times.empty() && t <= times.back())
                throw format_error("non-monotone timestep at time " + fmt_double("%.2f", t));
            times.push_back(t);
            std::set<std::uint64_t> seen;
            std::size_t first = trace.samples.size();
            for (const auto& [kind, entry] : step) {
                if (kind != "person" && kind != "vehicle")
                    continue;
                Sample s;
                s.time_s = t;
                s.user_id = entry.get<std::uint64_t>("<xmlattr>.id");
                s.x = entry.get<double>("<xmlattr>.x");
                s.y = entry.get<double>("<xmlattr>.y");
                s.speed = entry.get<double>("<xmlattr>.speed", 0.0);
                if (!seen.insert(s.user_id).second)
                    throw format_error("duplicate id " + std::to_string(s.user_id) + " at time " +
                                       fmt_double("%.2f", t));
                auto [it, fresh] = agents.try_emplace(s.user_id);
                if (fresh) {
                    it->second.user_id = s.user_id;
                    it->second.mode = kind == "vehicle" ? TravelMode::vehicle : TravelMode::pedestrian;
                    it->second.demographic_group = entry.get("<xmlattr>.type", std::string{});
                    it->second.home = {s.x, s.y};
                }
                trace.samples.push_back(s);
            }
            std::sort(trace.samples.begin() + static_cast<std::ptrdiff_t>(first), trace.samples.end(),
                      [](const Sample& a, const Sample& b) { return a.user_id < b.user_id; });
        }
    } catch (const pt::ptree_error& e) {
        throw format_error(std::string("malformed trace entry: ") + e.what());
    }

    double inferred_step = times.size() >= 2 ? times[1] - times[0] : 1.0;
    trace.time_step_s = root->get("<xmlattr>.time_step", inferred_step);
    trace.duration_s = root->get("<xmlattr>.duration", times.empty() ? 0.0 : times.back());
    for (auto& [id, agent] : agents)
        trace.agents.push_back(std::move(agent));
    trace.validate();
    return trace;
}

MobilityTrace import_trace(const std::filesystem::path& path)
{
    if (!std::filesystem::exists(path))
        throw io_error("no such trace: " + path.string());
    return parse_trace(fsutil::read_text(path));
}

} // namespace simpipe::mobility
