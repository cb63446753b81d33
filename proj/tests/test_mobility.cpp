#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <random>

#include "oracles.hpp"
#include "simpipe/error.hpp"
#include "simpipe/fsutil.hpp"
#include "simpipe/mobility.hpp"
#include "support.hpp"

using namespace simpipe;
using namespace simpipe::mobility;
using testsupport::TempDir;

namespace {

PopulationConfig town(std::uint64_t n, std::uint64_t seed = 5)
{
    PopulationConfig c;
    c.inhabitant_count = n;
    c.demographic_groups = {{"A", 0.7, 0.6, false}, {"B", 0.3, 0.2, true}};
    c.household_size_distribution = {{1, 0.3}, {2, 0.4}, {4, 0.3}};
    c.locations = {{LocationKind::home_zone, {1000, 1000}, 30, {}},
                   {LocationKind::home_zone, {4000, 3500}, 70, {}},
                   {LocationKind::workplace, {2500, 2500}, 10, {}},
                   {LocationKind::workplace, {500, 4500}, 5, {}},
                   {LocationKind::school, {3000, 1000}, 5, {}},
                   {LocationKind::mall, {2000, 4000}, 5, HourWindow{10, 20}},
                   {LocationKind::bus_stop, {1200, 1100}, 1, {}},
                   {LocationKind::bus_stop, {3800, 3400}, 1, {}}};
    c.rng_seed = seed;
    return c;
}

SimulationOptions options(double step, double duration, std::uint64_t seed = 1, double origin = 0.0)
{
    return {step, duration, seed, origin};
}

/// Pedestrian at the origin that sets off toward location 0 at `depart_s`.
Agent walker(double depart_s, TravelMode mode = TravelMode::pedestrian)
{
    Agent a;
    a.user_id = 1;
    a.demographic_group = "A";
    a.mode = mode;
    a.home = {0, 0};
    a.daily_plan = {{LocationKind::home_zone, 0, 0, depart_s}, {LocationKind::workplace, 0, depart_s, 86400}};
    return a;
}

std::vector<Sample> samples_of(const MobilityTrace& t, std::uint64_t id)
{
    std::vector<Sample> out;
    for (const auto& s : t.samples)
        if (s.user_id == id)
            out.push_back(s);
    return out;
}

} // namespace

TEST(Apportion, MatchesIntegerOracle)
{
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 500; ++trial) {
        std::size_t k = 1 + rng() % 6;
        std::vector<std::uint64_t> w(k);
        std::vector<double> wd(k);
        std::uint64_t total = rng() % 2000;
        for (std::size_t i = 0; i < k; ++i) {
            w[i] = rng() % 10;
            wd[i] = static_cast<double>(w[i]) / 10.0;
        }
        auto got = apportion(total, wd);
        auto sum = std::accumulate(w.begin(), w.end(), std::uint64_t{0});
        if (sum == 0)
            continue;
        EXPECT_EQ(got, oracle::apportion(total, w)) << "trial " << trial;
        EXPECT_EQ(std::accumulate(got.begin(), got.end(), std::uint64_t{0}), total);
    }
}

TEST(Apportion, TiesGoToEarlierGroup)
{
    const double half[] = {0.5, 0.5};
    EXPECT_EQ(apportion(3, half), (std::vector<std::uint64_t>{2, 1}));
}

TEST(Population, EmptyPopulation)
{
    EXPECT_TRUE(generate_population(town(0)).empty());
}

TEST(Population, ExactGroupSplit)
{
    auto agents = generate_population(town(100));
    ASSERT_EQ(agents.size(), 100u);
    std::map<std::string, int> counts;
    for (const auto& a : agents)
        ++counts[a.demographic_group];
    EXPECT_EQ(counts["A"], 70);
    EXPECT_EQ(counts["B"], 30);
}

TEST(Population, EmploymentCountMatchesOracleAndPlansFitWindows)
{
    auto cfg = town(1000);
    auto agents = generate_population(cfg);
    auto groups = oracle::apportion(1000, {7, 3});
    auto expected_work = oracle::apportion(groups[0], {6, 4})[0] + oracle::apportion(groups[1], {2, 8})[0];

    std::uint64_t workers = 0;
    std::uint64_t pupils = 0;
    for (const auto& a : agents) {
        bool works = false, studies = false;
        for (std::size_t i = 1; i < a.daily_plan.size(); ++i)
            EXPECT_LE(a.daily_plan[i - 1].end_s, a.daily_plan[i].start_s);
        for (const auto& act : a.daily_plan) {
            EXPECT_LE(act.start_s, act.end_s);
            if (act.kind == LocationKind::workplace) {
                works = true;
                EXPECT_GE(act.start_s, cfg.work_hours.start_hour * 3600);
                EXPECT_LE(act.end_s, cfg.work_hours.end_hour * 3600);
            }
            if (act.kind == LocationKind::school) {
                studies = true;
                EXPECT_GE(act.start_s, cfg.education_hours.start_hour * 3600);
                EXPECT_LE(act.end_s, cfg.education_hours.end_hour * 3600);
            }
            if (act.kind == LocationKind::mall) {
                EXPECT_GE(act.start_s, 10 * 3600.0);
                EXPECT_LE(act.end_s, 20 * 3600.0 + 1e-9);
            }
        }
        workers += works;
        pupils += studies;
        if (a.demographic_group == "B" && !works)
            EXPECT_TRUE(studies) << "student " << a.user_id;
    }
    EXPECT_EQ(workers, expected_work);
    EXPECT_EQ(pupils, groups[1] - oracle::apportion(groups[1], {2, 8})[0]);
}

TEST(Population, HouseholdsShareHomes)
{
    auto agents = generate_population(town(300));
    std::map<std::uint64_t, Position> home_of;
    for (const auto& a : agents) {
        auto [it, fresh] = home_of.emplace(a.household, a.home);
        if (!fresh)
            EXPECT_EQ(it->second, a.home);
    }
    EXPECT_LT(home_of.size(), agents.size());
}

TEST(Population, DeterministicForSeed)
{
    auto a = generate_population(town(200, 9));
    auto b = generate_population(town(200, 9));
    auto c = generate_population(town(200, 10));
    auto cfg = town(200);
    auto ta = simulate_mobility(a, cfg.locations, {}, options(60, 3600, 1, 8 * 3600));
    auto tb = simulate_mobility(b, cfg.locations, {}, options(60, 3600, 1, 8 * 3600));
    auto tc = simulate_mobility(c, cfg.locations, {}, options(60, 3600, 1, 8 * 3600));
    EXPECT_EQ(render_trace(ta), render_trace(tb));
    EXPECT_NE(render_trace(ta), render_trace(tc));
}

TEST(Population, ConfigErrors)
{
    auto c = town(10);
    c.demographic_groups[0].fraction = 0.6;
    EXPECT_THROW(generate_population(c), config_error);
    c = town(10);
    c.household_size_distribution[0].probability = 0.9;
    EXPECT_THROW(generate_population(c), config_error);
    c = town(10);
    c.work_hours = {17, 8};
    EXPECT_THROW(generate_population(c), config_error);
    c = town(10);
    c.locations.erase(c.locations.begin() + 4); // the only school
    EXPECT_THROW(generate_population(c), config_error);
    c = town(10);
    c.locations[0].position = {-1, 10};
    EXPECT_THROW(generate_population(c), config_error);
}

TEST(Simulation, StationaryAgentStaysHome)
{
    Agent a;
    a.user_id = 4;
    a.home = {10, 20};
    a.daily_plan = {{LocationKind::home_zone, 0, 0, 86400}};
    std::vector<LocationSpec> locs{{LocationKind::home_zone, {0, 0}, 1, {}}};
    auto t = simulate_mobility(std::vector<Agent>{a}, locs, {}, options(5, 100));
    ASSERT_EQ(t.samples.size(), 21u);
    for (const auto& s : t.samples) {
        EXPECT_EQ(s.x, 10);
        EXPECT_EQ(s.y, 20);
        EXPECT_EQ(s.speed, 0);
    }
}

TEST(Simulation, UniformLinearMotion)
{
    std::vector<LocationSpec> locs{{LocationKind::workplace, {100, 0}, 1, {}}};
    auto t = simulate_mobility(std::vector<Agent>{walker(10)}, locs, {}, options(1, 100));
    auto s = samples_of(t, 1);
    for (int k = 0; k <= 50; ++k) {
        EXPECT_NEAR(s[10 + k].x, 2.0 * k, 1e-9);
        EXPECT_NEAR(s[10 + k].speed, k == 0 ? 0.0 : 2.0, 1e-9);
    }
    EXPECT_NEAR(s[59].x, 98.0, 1e-9);
    EXPECT_EQ(s[60].x, 100.0);
    EXPECT_EQ(s[61].speed, 0.0);
}

TEST(Simulation, CongestionStretchesInRegionTraversal)
{
    std::vector<LocationSpec> locs{{LocationKind::workplace, {1000, 0}, 1, {}}};
    std::vector<Agent> agents{walker(10)};
    EventInjection jam{EventKind::congestion, {500, 0}, 100, 0, 1000, 4};
    auto free_run = samples_of(simulate_mobility(agents, locs, {}, options(1, 1000)), 1);
    auto jammed = samples_of(simulate_mobility(agents, locs, std::vector{jam}, options(1, 1000)), 1);

    // Region spans x in [400, 600]: 100 s unperturbed, 400 s at a quarter of the speed.
    auto entered = [](const std::vector<Sample>& s, double x) {
        for (const auto& p : s)
            if (p.x >= x - 1e-6)
                return p.time_s;
        return -1.0;
    };
    double free_in = entered(free_run, 600) - entered(free_run, 400);
    double jam_in = entered(jammed, 600) - entered(jammed, 400);
    EXPECT_NEAR(free_in, 100.0, 1e-9);
    EXPECT_NEAR(jam_in, 4.0 * free_in, 1e-9);
    EXPECT_NEAR(jammed[410].x, 500.0, 1e-6); // 200 s at 0.5 m/s past x = 400
    EXPECT_EQ(entered(jammed, 1000) - entered(free_run, 1000), 300.0);
}

TEST(Simulation, EventLocality)
{
    auto cfg = town(120);
    auto agents = generate_population(cfg);
    std::vector<EventInjection> events{{EventKind::congestion, {2500, 2500}, 300, 600, 2400, 3}};
    auto base = simulate_mobility(agents, cfg.locations, {}, options(30, 3600, 2, 7 * 3600));
    auto with = simulate_mobility(agents, cfg.locations, events, options(30, 3600, 2, 7 * 3600));
    with.validate();
    ASSERT_EQ(base.samples.size(), with.samples.size());

    std::set<std::uint64_t> touched;
    for (const auto& s : with.samples)
        if (s.time_s >= 600 - 30 && s.time_s <= 2400 + 30 && distance({s.x, s.y}, {2500, 2500}) < 300 + 30 * 30)
            touched.insert(s.user_id);
    std::size_t compared = 0;
    for (std::size_t i = 0; i < base.samples.size(); ++i)
        if (!touched.count(base.samples[i].user_id)) {
            EXPECT_EQ(base.samples[i], with.samples[i]);
            ++compared;
        }
    EXPECT_GT(compared, 0u);
}

TEST(Simulation, PublicEventAttractsChosenFraction)
{
    auto cfg = town(2000);
    cfg.vehicle_share = 1.0;
    auto agents = generate_population(cfg);
    EventInjection fair{EventKind::public_event, {2500, 2500}, 200, 600, 1800, 0.25};
    std::size_t chosen = 0;
    for (const auto& a : agents)
        chosen += attends_event(a.user_id, fair, 0, 3);
    EXPECT_NEAR(static_cast<double>(chosen) / 2000.0, 0.25, 3 * std::sqrt(0.25 * 0.75 / 2000));

    auto t = simulate_mobility(agents, cfg.locations, std::vector{fair}, options(60, 3600, 3, 10 * 3600));
    t.validate();
    for (const auto& s : t.samples)
        if (s.time_s == 1740.0 && attends_event(s.user_id, fair, 0, 3))
            EXPECT_EQ(Position(s.x, s.y), fair.center) << "user " << s.user_id;
}

TEST(Simulation, SpeedBoundHoldsForGeneratedTown)
{
    auto cfg = town(300);
    auto agents = generate_population(cfg);
    std::vector<EventInjection> events{{EventKind::congestion, {2500, 2500}, 800, 0, 7200, 2.5},
                                       {EventKind::public_event, {3000, 3000}, 100, 1200, 2400, 0.5}};
    auto t = simulate_mobility(agents, cfg.locations, events, options(10, 7200, 8, 7 * 3600));
    EXPECT_NO_THROW(t.validate());
    std::map<std::uint64_t, TravelMode> mode;
    for (const auto& a : agents)
        mode[a.user_id] = a.mode;
    for (const auto& s : t.samples)
        EXPECT_LE(s.speed, max_speed(mode[s.user_id]) * (1 + 1e-6));
}

TEST(Simulation, Errors)
{
    std::vector<LocationSpec> locs{{LocationKind::workplace, {100, 0}, 1, {}}};
    std::vector<Agent> agents{walker(10)};
    EventInjection late{EventKind::congestion, {0, 0}, 10, 50, 200, 2};
    EXPECT_THROW(simulate_mobility(agents, locs, std::vector{late}, options(1, 100)), config_error);
    EventInjection crowd{EventKind::public_event, {0, 0}, 10, 0, 50, 1.5};
    EXPECT_THROW(simulate_mobility(agents, locs, std::vector{crowd}, options(1, 100)), config_error);
    EXPECT_THROW(simulate_mobility(agents, {}, {}, options(1, 100)), config_error);
    EXPECT_THROW(simulate_mobility(agents, locs, {}, options(0, 100)), config_error);
}

TEST(Trace, ExportCountsAgents)
{
    TempDir dir;
    auto cfg = town(3);
    auto t = simulate_mobility(generate_population(cfg), cfg.locations, {}, options(60, 600));
    EXPECT_EQ(export_trace(t, dir / "t.xml"), 3u);
    EXPECT_NE(fsutil::read_text(dir / "t.xml").find("element_count=\"3\""), std::string::npos);
}

TEST(Trace, EmptyTrace)
{
    TempDir dir;
    MobilityTrace t;
    t.duration_s = 10;
    EXPECT_EQ(export_trace(t, dir / "e.xml"), 0u);
    auto text = fsutil::read_text(dir / "e.xml");
    EXPECT_NE(text.find("element_count=\"0\""), std::string::npos);
    EXPECT_EQ(text.find("<timestep"), std::string::npos);
    EXPECT_TRUE(import_trace(dir / "e.xml").samples.empty());
}

TEST(Trace, RoundtripWithinPrintedPrecision)
{
    TempDir dir;
    auto cfg = town(40);
    auto t = simulate_mobility(generate_population(cfg), cfg.locations, {}, options(15, 1800, 1, 8 * 3600));
    export_trace(t, dir / "t.xml");
    auto back = import_trace(dir / "t.xml");
    ASSERT_EQ(back.samples.size(), t.samples.size());
    EXPECT_EQ(back.element_count(), 40u);
    EXPECT_EQ(back.time_step_s, 15);
    EXPECT_EQ(back.clock_origin_s, 8 * 3600);
    for (std::size_t i = 0; i < t.samples.size(); ++i) {
        EXPECT_EQ(back.samples[i].user_id, t.samples[i].user_id);
        EXPECT_NEAR(back.samples[i].time_s, t.samples[i].time_s, 5e-3);
        EXPECT_NEAR(back.samples[i].x, t.samples[i].x, 5e-7);
        EXPECT_NEAR(back.samples[i].y, t.samples[i].y, 5e-7);
        EXPECT_NEAR(back.samples[i].speed, t.samples[i].speed, 5e-7);
    }
    for (const auto& a : back.agents)
        EXPECT_TRUE(a.daily_plan.empty());
    // Re-export of the import is a fixpoint.
    EXPECT_EQ(render_trace(back), render_trace(import_trace(dir / "t.xml")));
}

TEST(Trace, HandWrittenFixture)
{
    auto t = import_trace(testsupport::fixture("two_agents.xml"));
    ASSERT_EQ(t.samples.size(), 6u);
    const Sample expect[] = {{0, 3, 100, 200, 0},        {0, 8, 2500.5, 1250.25, 0}, {1, 3, 101.5, 200, 1.5},
                             {1, 8, 2500.5, 1250.25, 0}, {2, 3, 103, 201, 1.802776}, {2, 8, 2500.5, 1250.25, 0}};
    for (std::size_t i = 0; i < 6; ++i)
        EXPECT_EQ(t.samples[i], expect[i]) << "sample " << i;
    ASSERT_EQ(t.agents.size(), 2u);
    EXPECT_EQ(t.agents[0].demographic_group, "adult");
    EXPECT_EQ(t.agents[1].mode, TravelMode::vehicle);
}

TEST(Trace, DuplicateIdIsNamed)
{
    std::string xml = R"(<fcd-export element_count="1"><timestep time="3.00">
        <person id="7" x="1" y="1" speed="0"/><person id="7" x="2" y="1" speed="0"/></timestep></fcd-export>)";
    try {
        parse_trace(xml);
        FAIL() << "expected format_error";
    } catch (const format_error& e) {
        std::string what = e.what();
        EXPECT_NE(what.find("id 7"), std::string::npos) << what;
        EXPECT_NE(what.find("3.0"), std::string::npos) << what;
    }
}

TEST(Trace, RejectsNonMonotoneAndMalformed)
{
    std::string back_in_time = R"(<fcd-export element_count="1">
        <timestep time="2.00"><person id="1" x="1" y="1" speed="0"/></timestep>
        <timestep time="1.00"><person id="1" x="1" y="1" speed="0"/></timestep></fcd-export>)";
    EXPECT_THROW(parse_trace(back_in_time), format_error);
    EXPECT_THROW(parse_trace("<fcd-export><timestep"), format_error);
    EXPECT_THROW(parse_trace("<other/>"), format_error);
    std::string too_fast = R"(<fcd-export element_count="1">
        <timestep time="0.00"><person id="1" x="0" y="0" speed="0"/></timestep>
        <timestep time="1.00"><person id="1" x="50" y="0" speed="50"/></timestep></fcd-export>)";
    EXPECT_THROW(parse_trace(too_fast), invariant_error);
}
