#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "epipolicy/epipolicy.hpp"

using namespace epipolicy;
namespace fs = std::filesystem;

namespace {

const fs::path kScenarios = EPIPOLICY_SCENARIO_DIR;

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "epipolicy_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::size_t count_lines(const fs::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) {
        ++n;
    }
    return n;
}

std::string field_of(const std::string& text) {
    try {
        (void)parse_scenario(text);
    } catch (const ScenarioError& e) {
        return e.field();
    }
    return "<accepted>";
}

const char* kMinimal = R"({
  "name": "tiny",
  "mode": "simulate",
  "params": {"r0": 2.5},
  "regions": [{"id": "a", "initial": {"i": 0.01}}],
  "horizon": 50
})";

} // namespace

TEST(LoadScenario, FranceWeekly) {
    const auto sc = load_scenario(kScenarios / "france_dt7.json");
    EXPECT_EQ(sc.mode, Mode::optimize);
    ASSERT_EQ(sc.regions.size(), 1u);
    EXPECT_EQ(sc.regions[0].population, 6.7e7);
    EXPECT_DOUBLE_EQ(sc.regions[0].initial->i, 1e3 / 6.7e7);
    EXPECT_EQ(sc.params.r0(), 2.9);
    EXPECT_EQ(sc.params.gamma(), 0.1);
    EXPECT_EQ(sc.t0, 98);
    EXPECT_EQ(sc.dt, 7);
    EXPECT_EQ(*sc.intensities, IntensitySet({0.0, 0.5, 1.0}));
    EXPECT_EQ(sc.horizon, 1500);
}

TEST(LoadScenario, FranceFourWeekly) {
    const auto sc = load_scenario(kScenarios / "france_dt28.json");
    EXPECT_EQ(sc.t0, 112);
    EXPECT_EQ(sc.dt, 28);
}

TEST(LoadScenario, EveryBundledFileLoads) {
    std::size_t count = 0;
    for (const auto& entry : fs::directory_iterator(kScenarios)) {
        if (entry.path().extension() == ".json") {
            EXPECT_NO_THROW((void)load_scenario(entry.path())) << entry.path();
            ++count;
        }
    }
    EXPECT_EQ(count, 12u);
}

TEST(LoadScenario, Defaults) {
    const auto sc = parse_scenario(kMinimal);
    EXPECT_EQ(sc.params.gamma(), 0.1);
    EXPECT_EQ(sc.epsilon, 0.01);
    EXPECT_EQ(sc.excitation_matrix(1), ExcitationMatrix::identity(1));
    EXPECT_EQ(sc.t0, 0);
    EXPECT_EQ(sc.schedule_for("a").num_intervals(), 0u);
    const auto dflt = parse_scenario(R"({"name": "x", "mode": "simulate", "params": {"r0": 2},
        "regions": [{"id": "a", "initial": {"i": 0.01}}]})");
    EXPECT_EQ(dflt.horizon, 1500);
}

TEST(LoadScenario, CdcLevels) {
    const auto sc = load_scenario(kScenarios / "la_r025_r0frac02.json");
    EXPECT_EQ(*sc.intensities, IntensitySet({0.2, 0.6, 1.0}));
    EXPECT_EQ(sc.regions[0].initial->r, 0.2);
    EXPECT_EQ(field_of(R"({"name": "x", "mode": "game", "params": {"r0": 2}, "horizon": 70,
        "regions": [{"id": "a", "initial": {"i": 0.01}}], "cdc_levels": [1, 7]})"),
              "cdc_levels");
}

TEST(LoadScenario, MissingR0NamesField) {
    EXPECT_EQ(field_of(R"({"name": "x", "mode": "simulate", "params": {},
        "regions": [{"id": "a", "initial": {"i": 0.01}}]})"),
              "params.r0");
    try {
        (void)parse_scenario(R"({"name": "x", "mode": "simulate", "params": {"gamma": 0.2},
            "regions": [{"id": "a", "initial": {"i": 0.01}}]})");
        FAIL();
    } catch (const ScenarioError& e) {
        EXPECT_NE(std::string(e.what()).find("params.r0"), std::string::npos);
    }
}

TEST(LoadScenario, ValidationNamesField) {
    EXPECT_EQ(field_of(R"({"name": "x", "mode": "simulate", "params": {"r0": 2}, "colour": 1,
        "regions": [{"id": "a", "initial": {"i": 0.01}}]})"),
              "colour");
    EXPECT_EQ(field_of(R"({"name": "x", "mode": "teleport", "params": {"r0": 2},
        "regions": [{"id": "a", "initial": {"i": 0.01}}]})"),
              "mode");
    EXPECT_EQ(field_of(R"({"name": "x", "mode": "simulate", "params": {"r0": 2},
        "regions": [{"id": "a", "initial": {"i": 0.01, "I": 5}}]})"),
              "regions[0].initial");
    EXPECT_EQ(field_of(R"({"name": "x", "mode": "simulate", "params": {"r0": 2},
        "regions": [{"id": "a", "initial": {"I": 5}}]})"),
              "regions[0].population");
    EXPECT_EQ(field_of(R"({"name": "x", "mode": "simulate", "params": {"r0": 2},
        "regions": [{"id": "a", "initial": {"i": 1.5}}]})"),
              "regions[0].initial");
    EXPECT_EQ(field_of(R"({"name": "x", "mode": "simulate", "params": {"r0": 2}, "excitation": [[1, 0], [0, 1]],
        "regions": [{"id": "a", "initial": {"i": 0.01}}]})"),
              "excitation");
    EXPECT_EQ(field_of(R"({"name": "x", "mode": "simulate", "params": {"r0": 2}, "t0": 10,
        "regions": [{"id": "a", "initial": {"i": 0.01}}]})"),
              "t0");
    EXPECT_EQ(field_of(R"({"name": "x", "mode": "simulate", "params": {"r0": 2}, "t0": 14,
        "schedules": {"a": [1]}, "regions": [{"id": "a", "initial": {"i": 0.01}}]})"),
              "schedules.a");
    EXPECT_EQ(field_of(R"({"name": "x", "mode": "simulate", "params": {"r0": 2}, "t0": 7,
        "schedules": {"b": [1]}, "regions": [{"id": "a", "initial": {"i": 0.01}}]})"),
              "schedules.b");
    EXPECT_EQ(field_of(R"({"name": "x", "mode": "game", "params": {"r0": 2}, "intensities": [0, 1], "t0": 7,
        "horizon": 70, "regions": [{"id": "a", "initial": {"i": 0.01}}]})"),
              "t0");
    EXPECT_EQ(field_of(R"({"name": "x", "mode": "game", "params": {"r0": 2}, "intensities": [0, 1],
        "horizon": 71, "regions": [{"id": "a", "initial": {"i": 0.01}}]})"),
              "horizon");
    EXPECT_EQ(field_of(R"({"name": "x", "mode": "optimize", "params": {"r0": 2}, "intensities": [0, 1],
        "regions": [{"id": "a", "initial": {"i": 0.01}}]})"),
              "t0");
    EXPECT_EQ(field_of(R"({"name": "x", "mode": "optimize", "params": {"r0": 2}, "intensities": [0, 1], "t0": 14,
        "regions": [{"id": "a", "initial": {"i": 0.01}, "weights": {"kappa": 0.2, "eta": 0.2}}]})"),
              "regions[0].weights");
    EXPECT_EQ(field_of(R"({"name": "x", "mode": "simulate", "params": {"r0": 2},
        "regions": [{"id": "a", "initial": {"i": 0.01}, "parent": "nobody"}]})"),
              "regions");
    EXPECT_EQ(field_of(R"({"name": "x", "mode": "simulate", "params": {"r0": "two"},
        "regions": [{"id": "a", "initial": {"i": 0.01}}]})"),
              "params.r0");
    EXPECT_EQ(field_of(R"({"name": "x", "mode": "simulate", "params": {"r0": 50},
        "regions": [{"id": "a", "initial": {"i": 0.01}}]})"),
              "params");
}

TEST(LoadScenario, SyntaxErrorsCarryLine) {
    try {
        (void)parse_scenario("{\n  \"name\": \"x\",\n  \"mode\": simulate\n}");
        FAIL();
    } catch (const ScenarioError& e) {
        EXPECT_EQ(e.line(), 3);
        EXPECT_EQ(std::string(e.what()).rfind("line 3", 0), 0u);
    }
    EXPECT_THROW(load_scenario(kScenarios / "no_such_file.json"), ScenarioError);
}

TEST(Run, SimulateWritesConsistentFiles) {
    const auto dir = scratch("simulate");
    auto sc = load_scenario(kScenarios / "three_county_uncontrolled.json");
    const auto report = run(sc, {(dir / "uc").string(), 1, false});
    EXPECT_EQ(count_lines(dir / "uc_trajectory.csv"), 1u + 141u * 3u);
    EXPECT_EQ(slurp(dir / "uc_trajectory.csv").substr(0, 19), "day,region,s,i,r,u\n");
    EXPECT_EQ(count_lines(dir / "uc_costs.csv"), 4u);
    for (const auto& f : report.files) {
        EXPECT_TRUE(fs::exists(f)) << f;
    }
    for (const auto& r : report.regions) {
        EXPECT_LT(r.trajectory.final_state().s, 0.5);
    }
    const auto reloaded = load_report(dir / "uc_report.json");
    EXPECT_EQ(reloaded["status"], "ok");
    EXPECT_EQ(reloaded["scenario"]["name"], "three_county_uncontrolled");
}

TEST(Run, IdenticalInputsGiveIdenticalOutputs) {
    const auto dir = scratch("determinism");
    const auto sc = load_scenario(kScenarios / "three_county_state.json");
    run(sc, {(dir / "a").string(), 1, false});
    run(sc, {(dir / "b").string(), 1, false});
    EXPECT_EQ(slurp(dir / "a_schedule.csv"), slurp(dir / "b_schedule.csv"));
    EXPECT_EQ(slurp(dir / "a_trajectory.csv"), slurp(dir / "b_trajectory.csv"));
    EXPECT_EQ(slurp(dir / "a_game_log.jsonl"), slurp(dir / "b_game_log.jsonl"));
    auto ra = load_report(dir / "a_report.json");
    auto rb = load_report(dir / "b_report.json");
    ra.erase("wall_time_seconds");
    rb.erase("wall_time_seconds");
    ra.erase("files");
    rb.erase("files");
    EXPECT_EQ(ra, rb);
}

TEST(Run, StateGameScheduleBlocks) {
    const auto dir = scratch("state_game");
    const auto report = run(load_scenario(kScenarios / "three_county_state.json"), {(dir / "g").string(), 1, false});
    ASSERT_EQ(report.regions.size(), 4u);
    for (std::size_t k = 1; k < 4; ++k) {
        EXPECT_EQ(report.regions[k].schedule, report.regions[0].schedule);
    }
    std::ifstream csv(dir / "g_schedule.csv");
    std::set<std::string> blocks;
    std::string line;
    std::getline(csv, line);
    while (std::getline(csv, line)) {
        blocks.insert(line.substr(0, line.find(',')));
    }
    EXPECT_EQ(blocks, (std::set<std::string>{"state", "county1", "county2", "county3"}));
    EXPECT_EQ(count_lines(dir / "g_trajectory.csv"), 1u + 141u * 3u);
    EXPECT_EQ(count_lines(dir / "g_game_log.jsonl"), report.decisions.size());
    const auto first = nlohmann::json::parse(slurp(dir / "g_game_log.jsonl").substr(0, slurp(dir / "g_game_log.jsonl").find('\n')));
    EXPECT_EQ(first["region"], "state");
    EXPECT_EQ(first["day"], 7);
    EXPECT_TRUE(first["parent_choice"].is_null());
    EXPECT_EQ(first["candidates"].size(), 3u);
}

TEST(Run, OptimizeSmallSearch) {
    const auto dir = scratch("optimize");
    const auto report = run(load_scenario(kScenarios / "france_dt28.json"), {(dir / "f").string(), 1, false});
    ASSERT_TRUE(report.feasible);
    EXPECT_EQ(report.search->explored, 81u);
    const auto json = load_report(dir / "f_report.json");
    EXPECT_EQ(json["search"]["explored"], 81);
    EXPECT_EQ(json["regions"][0]["s_final"].get<double>(), std::stod(format_number(report.search->s_final)));
}

TEST(Run, InfeasibleOptimization) {
    const auto dir = scratch("infeasible");
    auto sc = parse_scenario(R"({"name": "strict", "mode": "optimize", "params": {"r0": 2.9},
        "regions": [{"id": "a", "initial": {"i": 0.001}}], "intensities": [0.9, 1], "dt": 28, "t0": 56,
        "epsilon": 0.000001})");
    const auto report = run(sc, {(dir / "x").string(), 1, false});
    EXPECT_FALSE(report.feasible);
    EXPECT_TRUE(report.regions.empty());
    EXPECT_EQ(nlohmann::json::parse(slurp(dir / "x_report.json"))["status"], "infeasible");
    EXPECT_FALSE(fs::exists(dir / "x_trajectory.csv"));
}

TEST(Run, SearchGuard) {
    auto sc = parse_scenario(R"({"name": "huge", "mode": "optimize", "params": {"r0": 2.9},
        "regions": [{"id": "a", "initial": {"i": 0.001}}], "intensities": [0, 0.5, 1], "dt": 7, "t0": 112})");
    EXPECT_THROW(run(sc, {(scratch("guard") / "h").string(), 1, false}), SearchTooLargeError);
}

TEST(Compare, IdenticalReportsGiveZeros) {
    const auto dir = scratch("compare");
    run(load_scenario(kScenarios / "three_county.json"), {(dir / "a").string(), 1, false});
    const auto a = load_report(dir / "a_report.json");
    for (const auto& d : compare_runs(a, a)) {
        EXPECT_EQ(d.s_final_delta, 0.0);
        EXPECT_EQ(*d.total_cost_delta, 0.0);
        EXPECT_EQ(d.peak_i_delta, 0.0);
        EXPECT_EQ(d.waves_a, d.waves_b);
    }
}

TEST(Compare, InterventionHelpsEveryCounty) {
    const auto dir = scratch("compare_intervention");
    run(load_scenario(kScenarios / "three_county_uncontrolled.json"), {(dir / "u").string(), 1, false});
    run(load_scenario(kScenarios / "three_county.json"), {(dir / "c").string(), 1, false});
    const auto deltas = compare_runs(load_report(dir / "u_report.json"), load_report(dir / "c_report.json"));
    ASSERT_EQ(deltas.size(), 3u);
    for (const auto& d : deltas) {
        EXPECT_GT(d.s_final_delta, 0.0) << d.id;
    }
}

TEST(Compare, MismatchedRegions) {
    const auto dir = scratch("compare_mismatch");
    run(load_scenario(kScenarios / "three_county.json"), {(dir / "a").string(), 1, false});
    run(load_scenario(kScenarios / "three_county_state.json"), {(dir / "b").string(), 1, false});
    EXPECT_THROW(compare_runs(load_report(dir / "a_report.json"), load_report(dir / "b_report.json")),
                 PreconditionError);
}

TEST(Format, TenSignificantDigits) {
    EXPECT_EQ(format_number(1.0 / 3.0), "0.3333333333");
    EXPECT_EQ(format_number(0.5), "0.5");
    EXPECT_EQ(format_number(6.7e7), "67000000");
}
