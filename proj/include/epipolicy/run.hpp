#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cost.hpp"
#include "errors.hpp"
#include "game.hpp"
#include "optimizer.hpp"
#include "policy.hpp"
#include "scenario.hpp"
#include "sir.hpp"

namespace epipolicy {

/// Largest search space `run` visits unless explicitly allowed.
inline constexpr std::uint64_t kSearchGuard = 10'000'000;

struct RunOptions {
    std::optional<std::string> out_prefix; // overrides the scenario's output
    unsigned threads = 1;
    bool allow_large_search = false;
};

struct RegionOutcome {
    std::string id;
    bool leaf = true;
    double population = 0.0;
    PolicySchedule schedule = PolicySchedule({}, 1, 0);
    Trajectory trajectory;
    std::optional<CostBreakdown> cost;
    CostWeights weights;
};

struct RunReport {
    Scenario scenario;
    bool feasible = true;
    std::vector<RegionOutcome> regions;
    std::optional<OptimizerResult> search;
    std::vector<GameDecision> decisions;
    double wall_seconds = 0.0;
    std::filesystem::path prefix;
    std::vector<std::filesystem::path> files;
};

/// Number formatting shared by every report file: 10 significant digits.
inline std::string format_number(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

namespace detail {

using nlohmann::json;

inline double rounded(double x) { return std::stod(format_number(x)); }

inline json cost_json(const std::optional<CostBreakdown>& c) {
    if (!c) {
        return nullptr;
    }
    return {{"implementation", rounded(c->implementation)},
            {"impact", rounded(c->impact)},
            {"non_compliance", rounded(c->non_compliance)},
            {"total", rounded(c->total)}};
}

inline json schedule_json(const PolicySchedule& s) {
    json stages = json::array();
    for (const auto& st : s.stages()) {
        stages.push_back({{"start_day", st.start_day}, {"end_day", st.end_day}, {"intensity", rounded(st.intensity)}});
    }
    return stages;
}

inline json scenario_json(const Scenario& sc) {
    json regions = json::array();
    for (const auto& r : sc.regions) {
        json node{{"id", r.id},
                  {"population", rounded(r.population)},
                  {"weights", {{"kappa", rounded(r.weights.kappa)}, {"eta", rounded(r.weights.eta)}}}};
        if (r.parent) {
            node["parent"] = *r.parent;
        }
        if (r.initial) {
            node["initial"] = {{"i", rounded(r.initial->i)}, {"r", rounded(r.initial->r)}};
        }
        regions.push_back(node);
    }
    json out{{"name", sc.name},
             {"mode", to_string(sc.mode)},
             {"params", {{"r0", rounded(sc.params.r0())}, {"gamma", rounded(sc.params.gamma())}}},
             {"regions", regions},
             {"dt", sc.dt},
             {"horizon", sc.horizon}};
    if (sc.intensities) {
        json levels = json::array();
        for (double a : sc.intensities->levels()) {
            levels.push_back(rounded(a));
        }
        out["intensities"] = levels;
    }
    if (sc.mode != Mode::game) {
        out["t0"] = sc.t0;
        out["cost_horizon"] = sc.cost_horizon.value_or(sc.horizon);
    }
    if (sc.mode == Mode::optimize) {
        out["epsilon"] = rounded(sc.epsilon);
        out["enforce_herd"] = sc.enforce_herd;
        out["prune"] = sc.prune;
    }
    if (sc.excitation) {
        out["excitation"] = *sc.excitation;
    }
    if (!sc.notes.empty()) {
        out["notes"] = sc.notes;
    }
    return out;
}

inline std::filesystem::path with_suffix(const std::filesystem::path& prefix, const std::string& suffix) {
    return prefix.string() + suffix;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    return out;
}

// Realised cost of every region under the schedules that were actually applied.
inline void score_regions(const RegionForest& forest, std::vector<RegionOutcome>& outcomes, int T) {
    std::vector<SirState> at_T;
    for (std::size_t node : forest.leaves()) {
        at_T.push_back(outcomes[node].trajectory.states[static_cast<std::size_t>(T)]);
    }
    for (std::size_t node = 0; node < forest.size(); ++node) {
        const auto parent = forest.parent(node);
        const PolicySchedule* pi = parent ? &outcomes[*parent].schedule : nullptr;
        const double r_T = std::clamp(detail::node_state(forest, node, at_T).r, 0.0, 1.0);
        outcomes[node].cost = total_cost(outcomes[node].schedule, pi, outcomes[node].weights, T, r_T);
    }
}

inline std::vector<RegionOutcome> outcomes_for(const RegionForest& forest) {
    std::vector<RegionOutcome> out;
    for (const auto& node : forest.nodes()) {
        RegionOutcome o;
        o.id = node.id;
        o.population = node.population;
        o.weights = node.weights;
        out.push_back(std::move(o));
    }
    for (std::size_t node = 0; node < forest.size(); ++node) {
        out[node].leaf = forest.is_leaf(node);
    }
    return out;
}

inline void fill_inner_trajectories(const RegionForest& forest, std::vector<RegionOutcome>& outcomes) {
    std::vector<Trajectory> leaves;
    for (std::size_t node : forest.leaves()) {
        leaves.push_back(outcomes[node].trajectory);
    }
    for (std::size_t node = 0; node < forest.size(); ++node) {
        if (!forest.is_leaf(node)) {
            outcomes[node].trajectory = node_trajectory(forest, node, leaves);
        }
    }
}

inline void run_simulate(RunReport& report) {
    const Scenario& sc = report.scenario;
    const auto forest = sc.forest();
    auto outcomes = outcomes_for(forest);
    std::vector<SirState> init;
    std::vector<PolicySchedule> schedules;
    for (std::size_t node = 0; node < forest.size(); ++node) {
        outcomes[node].schedule = sc.schedule_for(outcomes[node].id);
    }
    for (std::size_t node : forest.leaves()) {
        init.push_back(*forest.node(node).initial);
        schedules.push_back(outcomes[node].schedule);
    }
    const auto k = sc.excitation_matrix(init.size());
    auto trajectories = simulate(init, sc.params, k, schedules, sc.horizon);
    for (std::size_t slot = 0; slot < trajectories.size(); ++slot) {
        outcomes[forest.leaves()[slot]].trajectory = std::move(trajectories[slot]);
    }
    fill_inner_trajectories(forest, outcomes);
    score_regions(forest, outcomes, sc.cost_horizon.value_or(sc.horizon));
    report.regions = std::move(outcomes);
}

inline OptimizerConfig optimizer_config(const Scenario& sc, const RunOptions& options) {
    OptimizerConfig c;
    c.intensities = *sc.intensities;
    c.dt = sc.dt;
    c.t0 = sc.t0;
    c.horizon = sc.horizon;
    c.cost_horizon = sc.cost_horizon;
    c.epsilon = sc.epsilon;
    c.weights = sc.regions.front().weights;
    c.enforce_herd = sc.enforce_herd;
    c.prune = sc.prune;
    c.threads = options.threads;
    if (sc.parent_schedule) {
        c.parent = PolicySchedule(*sc.parent_schedule, sc.dt, sc.t0);
    }
    return c;
}

inline void run_optimize(RunReport& report, const RunOptions& options) {
    const Scenario& sc = report.scenario;
    const auto config = optimizer_config(sc, options);
    const auto space = schedule_count(config.intensities.size(), static_cast<std::size_t>(sc.t0 / sc.dt));
    if (space > kSearchGuard && !options.allow_large_search) {
        throw SearchTooLargeError("search space of " + std::to_string(space) + " schedules exceeds the guard of " +
                                  std::to_string(kSearchGuard) + "; pass --allow-large-search to run it");
    }
    const auto& node = sc.regions.front();
    auto result = optimize(*node.initial, sc.params, config);
    report.feasible = result.feasible;
    RegionOutcome o;
    o.id = node.id;
    o.population = node.population;
    o.weights = node.weights;
    if (result.feasible) {
        auto eval = evaluate_schedule(*node.initial, sc.params, *result.best_schedule, config);
        o.schedule = *result.best_schedule;
        o.trajectory = std::move(eval.trajectory);
        o.cost = result.best_cost;
        report.regions.push_back(std::move(o));
    }
    report.search = std::move(result);
}

inline void run_game_mode(RunReport& report) {
    const Scenario& sc = report.scenario;
    const auto forest = sc.forest();
    GameConfig config;
    config.intensities = *sc.intensities;
    config.dt = sc.dt;
    config.horizon = sc.horizon;
    auto result = run_game(forest, sc.excitation_matrix(forest.leaves().size()), sc.params, config);
    auto outcomes = outcomes_for(forest);
    for (std::size_t node = 0; node < forest.size(); ++node) {
        outcomes[node].schedule = result.schedules[node];
    }
    for (std::size_t slot = 0; slot < forest.leaves().size(); ++slot) {
        outcomes[forest.leaves()[slot]].trajectory = std::move(result.leaf_trajectories[slot]);
    }
    fill_inner_trajectories(forest, outcomes);
    score_regions(forest, outcomes, sc.horizon);
    report.regions = std::move(outcomes);
    report.decisions = std::move(result.decisions);
}

inline json region_json(const RegionOutcome& r) {
    json out{{"id", r.id},
             {"leaf", r.leaf},
             {"population", rounded(r.population)},
             {"weights", {{"kappa", rounded(r.weights.kappa)}, {"eta", rounded(r.weights.eta)}}},
             {"schedule", schedule_json(r.schedule)},
             {"cost", cost_json(r.cost)}};
    if (!r.trajectory.states.empty()) {
        const auto& end = r.trajectory.final_state();
        out["s_final"] = rounded(end.s);
        out["i_final"] = rounded(end.i);
        out["r_final"] = rounded(end.r);
        out["peak_i"] = rounded(r.trajectory.peak_infected());
        out["peak_day"] = r.trajectory.peak_day();
        out["waves"] = r.trajectory.waves();
    }
    return out;
}

} // namespace detail

/// Report JSON. Only `wall_time_seconds` differs between identical runs.
inline nlohmann::json report_json(const RunReport& report) {
    using detail::json;
    json regions = json::array();
    for (const auto& r : report.regions) {
        regions.push_back(detail::region_json(r));
    }
    json files = json::array();
    for (const auto& f : report.files) {
        files.push_back(f.filename().string());
    }
    json out{{"scenario", detail::scenario_json(report.scenario)},
             {"status", report.feasible ? "ok" : "infeasible"},
             {"regions", regions},
             {"files", files},
             {"wall_time_seconds", detail::rounded(report.wall_seconds)}};
    if (report.search) {
        out["search"] = {{"explored", report.search->explored},
                         {"feasible", report.search->feasible},
                         {"space", schedule_count(report.scenario.intensities->size(),
                                                  static_cast<std::size_t>(report.scenario.t0 / report.scenario.dt))}};
    }
    if (report.scenario.mode == Mode::game) {
        out["decisions"] = report.decisions.size();
    }
    return out;
}

/// Writes trajectory, schedule, cost and report files next to `report.prefix`.
inline void write_outputs(RunReport& report) {
    using detail::with_suffix;
    const auto& sc = report.scenario;
    if (!report.regions.empty()) {
        const auto traj_path = with_suffix(report.prefix, "_trajectory.csv");
        auto traj = detail::open_output(traj_path);
        traj << "day,region,s,i,r,u\n";
        for (std::size_t t = 0; t <= static_cast<std::size_t>(sc.horizon); ++t) {
            for (const auto& r : report.regions) {
                if (!r.leaf) {
                    continue;
                }
                const auto& st = r.trajectory.states[t];
                traj << t << ',' << r.id << ',' << format_number(st.s) << ',' << format_number(st.i) << ','
                     << format_number(st.r) << ',' << format_number(r.schedule.value_at(static_cast<int>(t))) << '\n';
            }
        }
        report.files.push_back(traj_path);

        const auto sched_path = with_suffix(report.prefix, "_schedule.csv");
        auto sched = detail::open_output(sched_path);
        sched << "region,start_day,end_day,intensity\n";
        for (const auto& r : report.regions) {
            for (const auto& st : r.schedule.stages()) {
                sched << r.id << ',' << st.start_day << ',' << st.end_day << ',' << format_number(st.intensity) << '\n';
            }
        }
        report.files.push_back(sched_path);

        const auto cost_path = with_suffix(report.prefix, "_costs.csv");
        auto costs = detail::open_output(cost_path);
        costs << "region,kappa,eta,implementation,impact,non_compliance,total\n";
        for (const auto& r : report.regions) {
            if (!r.cost) {
                continue;
            }
            costs << r.id << ',' << format_number(r.weights.kappa) << ',' << format_number(r.weights.eta) << ','
                  << format_number(r.cost->implementation) << ',' << format_number(r.cost->impact) << ','
                  << format_number(r.cost->non_compliance) << ',' << format_number(r.cost->total) << '\n';
        }
        report.files.push_back(cost_path);
    }
    if (sc.mode == Mode::game) {
        const auto log_path = with_suffix(report.prefix, "_game_log.jsonl");
        auto log = detail::open_output(log_path);
        for (const auto& d : report.decisions) {
            detail::json candidates = detail::json::array();
            for (const auto& c : d.candidates) {
                candidates.push_back({{"alpha", detail::rounded(c.alpha)}, {"cost", detail::cost_json(c.cost)}});
            }
            detail::json line{{"interval", d.interval},
                              {"day", d.day},
                              {"region", report.regions[d.node].id},
                              {"parent_choice", d.parent_choice ? detail::json(detail::rounded(*d.parent_choice))
                                                                : detail::json(nullptr)},
                              {"candidates", candidates},
                              {"chosen", detail::rounded(d.chosen)}};
            log << line.dump() << '\n';
        }
        report.files.push_back(log_path);
    }
    const auto report_path = with_suffix(report.prefix, "_report.json");
    report.files.push_back(report_path);
    auto out = detail::open_output(report_path);
    out << report_json(report).dump(2) << '\n';
}

inline std::filesystem::path output_prefix(const Scenario& sc, const RunOptions& options) {
    if (options.out_prefix) {
        return *options.out_prefix;
    }
    return sc.output.empty() ? sc.name : sc.output;
}

/// Runs a scenario in its own mode and writes every report file.
inline RunReport run(const Scenario& scenario, const RunOptions& options = {}) {
    RunReport report;
    report.scenario = scenario;
    report.prefix = output_prefix(scenario, options);
    const auto start = std::chrono::steady_clock::now();
    switch (scenario.mode) {
    case Mode::simulate:
        detail::run_simulate(report);
        break;
    case Mode::optimize:
        detail::run_optimize(report, options);
        break;
    case Mode::game:
        detail::run_game_mode(report);
        break;
    }
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_outputs(report);
    return report;
}

/// Reads a report written by `run`, checking the keys `compare_runs` relies on.
inline nlohmann::json load_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ScenarioError("<file>", "cannot read " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ScenarioError("<syntax>", e.what(), detail::line_of(text, e.byte == 0 ? 0 : e.byte - 1));
    }
    if (!doc.is_object() || !doc.contains("regions") || !doc["regions"].is_array()) {
        throw ScenarioError("regions", "report has no region list");
    }
    for (std::size_t k = 0; k < doc["regions"].size(); ++k) {
        const auto& r = doc["regions"][k];
        const std::string path_k = "regions[" + std::to_string(k) + "]";
        if (!r.is_object() || !r.contains("id") || !r["id"].is_string()) {
            throw ScenarioError(path_k + ".id", "missing region id");
        }
        for (const char* key : {"s_final", "peak_i", "waves"}) {
            if (!r.contains(key) || !r[key].is_number()) {
                throw ScenarioError(path_k + "." + key, "missing or not a number");
            }
        }
    }
    return doc;
}

struct RegionDelta {
    std::string id;
    double s_final_delta;
    std::optional<double> total_cost_delta; // absent when either side has no cost
    double peak_i_delta;
    int waves_a;
    int waves_b;
};

/// Per-region differences b - a between two reports over the same regions.
inline std::vector<RegionDelta> compare_runs(const nlohmann::json& a, const nlohmann::json& b) {
    auto index = [](const nlohmann::json& doc) {
        std::map<std::string, const nlohmann::json*> out;
        for (const auto& r : doc.at("regions")) {
            out[r.at("id").get<std::string>()] = &r;
        }
        return out;
    };
    const auto ra = index(a);
    const auto rb = index(b);
    std::vector<std::string> ids_a;
    std::vector<std::string> ids_b;
    for (const auto& [id, r] : ra) {
        ids_a.push_back(id);
    }
    for (const auto& [id, r] : rb) {
        ids_b.push_back(id);
    }
    if (ids_a != ids_b) {
        throw PreconditionError("reports cover different regions");
    }
    std::vector<RegionDelta> out;
    for (const auto& r : a.at("regions")) {
        const auto& id = r.at("id").get_ref<const std::string&>();
        const auto& x = *ra.at(id);
        const auto& y = *rb.at(id);
        RegionDelta d{id, y.at("s_final").get<double>() - x.at("s_final").get<double>(), std::nullopt,
                      y.at("peak_i").get<double>() - x.at("peak_i").get<double>(), x.at("waves").get<int>(),
                      y.at("waves").get<int>()};
        if (x.contains("cost") && y.contains("cost") && x.at("cost").is_object() && y.at("cost").is_object()) {
            d.total_cost_delta = y.at("cost").at("total").get<double>() - x.at("cost").at("total").get<double>();
        }
        out.push_back(d);
    }
    return out;
}

inline nlohmann::json compare_json(const std::vector<RegionDelta>& deltas) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& d : deltas) {
        out.push_back({{"region", d.id},
                       {"s_final_delta", detail::rounded(d.s_final_delta)},
                       {"total_cost_delta", d.total_cost_delta ? nlohmann::json(detail::rounded(*d.total_cost_delta))
                                                               : nlohmann::json(nullptr)},
                       {"peak_i_delta", detail::rounded(d.peak_i_delta)},
                       {"waves_a", d.waves_a},
                       {"waves_b", d.waves_b}});
    }
    return out;
}

} // namespace epipolicy
