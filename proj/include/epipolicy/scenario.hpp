#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cost.hpp"
#include "errors.hpp"
#include "game.hpp"
#include "policy.hpp"
#include "sir.hpp"

namespace epipolicy {

enum class Mode { simulate, optimize, game };

inline const char* to_string(Mode m) {
    switch (m) {
    case Mode::simulate:
        return "simulate";
    case Mode::optimize:
        return "optimize";
    case Mode::game:
        return "game";
    }
    return "?";
}

/// A validated experiment description. Initial conditions are stored as fractions.
struct Scenario {
    std::string name;
    Mode mode = Mode::simulate;
    SirParams params = SirParams::from_r0(2.0);
    std::vector<RegionNode> regions;
    std::optional<std::vector<std::vector<double>>> excitation; // over leaves, identity when absent
    std::optional<IntensitySet> intensities;
    int dt = 7;
    int t0 = 0;
    int horizon = kDefaultHorizon;
    std::optional<int> cost_horizon;
    double epsilon = 0.01;
    bool enforce_herd = true;
    bool prune = false;
    std::map<std::string, std::vector<double>> schedules; // simulate: per region, t0/dt values
    std::optional<std::vector<double>> parent_schedule;   // optimize: policy of the parent jurisdiction
    std::string output;
    std::string notes;

    RegionForest forest() const { return RegionForest(regions); }

    ExcitationMatrix excitation_matrix(std::size_t leaves) const {
        return excitation ? ExcitationMatrix(*excitation) : ExcitationMatrix::identity(leaves);
    }

    /// Schedule of a region in simulate mode; regions without one run uncontrolled.
    PolicySchedule schedule_for(const std::string& id) const {
        auto it = schedules.find(id);
        if (it == schedules.end()) {
            return PolicySchedule::constant(1.0, dt, t0);
        }
        return PolicySchedule(it->second, dt, t0);
    }
};

namespace detail {

using nlohmann::json;

inline std::string join_path(const std::string& base, const std::string& key) {
    return base.empty() ? key : base + "." + key;
}

// Reads the members of one JSON object and rejects keys nobody asked for.
class Fields {
public:
    Fields(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) {
            throw ScenarioError(path_.empty() ? "<root>" : path_, "expected an object");
        }
    }

    bool has(const std::string& key) const { return obj_.contains(key); }

    const json& raw(const std::string& key) {
        if (!obj_.contains(key)) {
            throw ScenarioError(join_path(path_, key), "required field is missing");
        }
        seen_.insert(key);
        return obj_.at(key);
    }

    template <class T>
    T get(const std::string& key) {
        const json& v = raw(key);
        try {
            if constexpr (std::is_same_v<T, int>) {
                if (!v.is_number_integer()) {
                    throw ScenarioError(join_path(path_, key), "expected an integer");
                }
            } else if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) {
                    throw ScenarioError(join_path(path_, key), "expected a number");
                }
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) {
                    throw ScenarioError(join_path(path_, key), "expected true or false");
                }
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) {
                    throw ScenarioError(join_path(path_, key), "expected a string");
                }
            }
            return v.get<T>();
        } catch (const json::exception& e) {
            throw ScenarioError(join_path(path_, key), e.what());
        }
    }

    template <class T>
    std::optional<T> optional(const std::string& key) {
        if (!obj_.contains(key) || obj_.at(key).is_null()) {
            seen_.insert(key);
            return std::nullopt;
        }
        return get<T>(key);
    }

    std::vector<double> numbers(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_array()) {
            throw ScenarioError(join_path(path_, key), "expected a list of numbers");
        }
        std::vector<double> out;
        for (std::size_t k = 0; k < v.size(); ++k) {
            if (!v[k].is_number()) {
                throw ScenarioError(join_path(path_, key) + "[" + std::to_string(k) + "]", "expected a number");
            }
            out.push_back(v[k].get<double>());
        }
        return out;
    }

    void forbid(const std::string& key, const std::string& why) const {
        if (obj_.contains(key)) {
            throw ScenarioError(join_path(path_, key), why);
        }
    }

    void finish() const {
        for (const auto& [key, value] : obj_.items()) {
            if (!seen_.contains(key)) {
                throw ScenarioError(join_path(path_, key), "unknown field");
            }
        }
    }

    const std::string& path() const { return path_; }

private:
    const json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

template <class F>
auto with_field(const std::string& field, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const PreconditionError& e) {
        throw ScenarioError(field, e.what());
    }
}

inline RegionNode parse_region(const json& value, const std::string& path) {
    Fields r(value, path);
    RegionNode node;
    node.id = r.get<std::string>("id");
    if (node.id.empty()) {
        throw ScenarioError(join_path(path, "id"), "must not be empty");
    }
    node.population = r.optional<double>("population").value_or(0.0);
    if (r.has("population") && !(node.population > 0.0)) {
        throw ScenarioError(join_path(path, "population"), "must be positive");
    }
    node.parent = r.optional<std::string>("parent");
    if (r.has("children")) {
        const json& kids = r.raw("children");
        if (!kids.is_array()) {
            throw ScenarioError(join_path(path, "children"), "expected a list of region ids");
        }
        for (const auto& k : kids) {
            if (!k.is_string()) {
                throw ScenarioError(join_path(path, "children"), "expected a list of region ids");
            }
            node.children.push_back(k.get<std::string>());
        }
    }
    if (r.has("weights")) {
        Fields w(r.raw("weights"), join_path(path, "weights"));
        node.weights.kappa = w.get<double>("kappa");
        node.weights.eta = w.get<double>("eta");
        w.finish();
        with_field(w.path(), [&] { node.weights.validate(); });
    }
    if (r.has("initial")) {
        const std::string ipath = join_path(path, "initial");
        Fields init(r.raw("initial"), ipath);
        const bool absolute = init.has("I") || init.has("R");
        const bool fractional = init.has("i") || init.has("r");
        if (absolute && fractional) {
            throw ScenarioError(ipath, "give either absolute counts (I, R) or fractions (i, r), not both");
        }
        if (absolute) {
            if (!(node.population > 0.0)) {
                throw ScenarioError(join_path(path, "population"), "required when initial counts are absolute");
            }
            const double infected = init.get<double>("I");
            const double recovered = init.optional<double>("R").value_or(0.0);
            node.initial = with_field(ipath, [&] { return SirState::from_counts(node.population, infected, recovered); });
        } else {
            const double i = init.get<double>("i");
            const double rec = init.optional<double>("r").value_or(0.0);
            node.initial = with_field(ipath, [&] { return SirState::from_fractions(i, rec); });
            if (!r.has("population")) {
                node.population = 1.0;
            }
        }
        init.finish();
    }
    r.finish();
    return node;
}

inline Mode parse_mode(const std::string& text) {
    if (text == "simulate") {
        return Mode::simulate;
    }
    if (text == "optimize") {
        return Mode::optimize;
    }
    if (text == "game") {
        return Mode::game;
    }
    throw ScenarioError("mode", "expected simulate, optimize or game, got '" + text + "'");
}

inline int line_of(const std::string& text, std::size_t byte) {
    int line = 1;
    for (std::size_t k = 0; k < std::min(byte, text.size()); ++k) {
        if (text[k] == '\n') {
            ++line;
        }
    }
    return line;
}

} // namespace detail

/// Parses and validates a scenario from JSON text. Defaults: gamma 0.1, epsilon 0.01,
/// horizon 1500 days, identity excitation.
inline Scenario parse_scenario(const std::string& text) {
    using detail::Fields;
    using detail::json;
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        const int line = detail::line_of(text, e.byte == 0 ? 0 : e.byte - 1);
        throw ScenarioError("<syntax>", e.what(), line);
    }
    Fields root(doc, "");
    Scenario sc;
    sc.name = root.get<std::string>("name");
    sc.mode = detail::parse_mode(root.get<std::string>("mode"));

    {
        Fields p(root.raw("params"), "params");
        const double r0 = p.get<double>("r0");
        const double gamma = p.optional<double>("gamma").value_or(kDefaultGamma);
        p.finish();
        if (!(r0 > 0.0)) {
            throw ScenarioError("params.r0", "must be positive");
        }
        sc.params = detail::with_field("params", [&] { return SirParams::from_r0(r0, gamma); });
    }

    const json& regions = root.raw("regions");
    if (!regions.is_array() || regions.empty()) {
        throw ScenarioError("regions", "expected a non-empty list of regions");
    }
    for (std::size_t k = 0; k < regions.size(); ++k) {
        sc.regions.push_back(detail::parse_region(regions[k], "regions[" + std::to_string(k) + "]"));
    }

    if (root.has("intensities") && root.has("cdc_levels")) {
        throw ScenarioError("cdc_levels", "give either intensities or cdc_levels, not both");
    }
    if (root.has("intensities")) {
        auto levels = root.numbers("intensities");
        sc.intensities = detail::with_field("intensities", [&] { return IntensitySet(levels); });
    } else if (root.has("cdc_levels")) {
        std::vector<double> levels;
        for (double l : root.numbers("cdc_levels")) {
            if (l != static_cast<int>(l)) {
                throw ScenarioError("cdc_levels", "levels are whole numbers 0..5");
            }
            levels.push_back(detail::with_field("cdc_levels", [&] { return cdc_level_to_intensity(static_cast<int>(l)); }));
        }
        sc.intensities = detail::with_field("cdc_levels", [&] { return IntensitySet(levels); });
    }

    sc.dt = root.optional<int>("dt").value_or(7);
    if (sc.dt <= 0) {
        throw ScenarioError("dt", "must be a positive number of days");
    }
    sc.horizon = root.optional<int>("horizon").value_or(kDefaultHorizon);
    if (sc.horizon < 1) {
        throw ScenarioError("horizon", "must be at least one day");
    }
    sc.output = root.optional<std::string>("output").value_or("");
    sc.notes = root.optional<std::string>("notes").value_or("");

    if (root.has("excitation")) {
        const json& k = root.raw("excitation");
        if (!k.is_array()) {
            throw ScenarioError("excitation", "expected a square list of rows");
        }
        std::vector<std::vector<double>> rows;
        for (std::size_t a = 0; a < k.size(); ++a) {
            if (!k[a].is_array()) {
                throw ScenarioError("excitation[" + std::to_string(a) + "]", "expected a row of numbers");
            }
            std::vector<double> row;
            for (const auto& x : k[a]) {
                if (!x.is_number()) {
                    throw ScenarioError("excitation[" + std::to_string(a) + "]", "expected a row of numbers");
                }
                row.push_back(x.get<double>());
            }
            rows.push_back(std::move(row));
        }
        detail::with_field("excitation", [&] { (void)ExcitationMatrix(rows); });
        sc.excitation = std::move(rows);
    }

    if (sc.mode != Mode::optimize) {
        for (std::size_t k = 0; k < sc.regions.size(); ++k) {
            if (!sc.regions[k].parent && !sc.regions[k].weights.top_layer()) {
                throw ScenarioError("regions[" + std::to_string(k) + "].weights",
                                    "a region without a parent needs kappa + eta = 1");
            }
        }
        const auto forest = detail::with_field("regions", [&] { return RegionForest(sc.regions); });
        if (sc.excitation && sc.excitation->size() != forest.leaves().size()) {
            throw ScenarioError("excitation",
                                "needs one row per leaf region (" + std::to_string(forest.leaves().size()) + ")");
        }
    }

    switch (sc.mode) {
    case Mode::optimize: {
        if (sc.regions.size() != 1) {
            throw ScenarioError("regions", "optimize mode takes exactly one region");
        }
        if (!sc.regions.front().initial) {
            throw ScenarioError("regions[0].initial", "required field is missing");
        }
        if (sc.regions.front().parent) {
            throw ScenarioError("regions[0].parent", "optimize mode takes a parent_schedule instead of a parent region");
        }
        root.forbid("excitation", "not used in optimize mode");
        root.forbid("schedules", "not used in optimize mode");
        if (!sc.intensities) {
            throw ScenarioError("intensities", "required field is missing");
        }
        sc.t0 = root.get<int>("t0");
        sc.cost_horizon = root.optional<int>("cost_horizon");
        sc.epsilon = root.optional<double>("epsilon").value_or(0.01);
        sc.enforce_herd = root.optional<bool>("enforce_herd").value_or(true);
        sc.prune = root.optional<bool>("prune").value_or(false);
        if (root.has("parent_schedule")) {
            sc.parent_schedule = root.numbers("parent_schedule");
        }
        if (!(sc.epsilon > 0.0)) {
            throw ScenarioError("epsilon", "must be positive");
        }
        if (sc.enforce_herd && !(sc.params.r0() > 1.0)) {
            throw ScenarioError("params.r0", "herd constraint needs R0 > 1");
        }
        const auto& w = sc.regions.front().weights;
        if (!sc.parent_schedule && !w.top_layer()) {
            throw ScenarioError("regions[0].weights", "a region without parent_schedule needs kappa + eta = 1");
        }
        break;
    }
    case Mode::game:
        if (!sc.intensities) {
            throw ScenarioError("intensities", "required field is missing");
        }
        for (const char* key : {"t0", "cost_horizon", "epsilon", "enforce_herd", "prune", "schedules", "parent_schedule"}) {
            root.forbid(key, "not used in game mode");
        }
        if (sc.horizon % sc.dt != 0) {
            throw ScenarioError("horizon", "game horizon must be a multiple of dt");
        }
        break;
    case Mode::simulate:
        for (const char* key : {"epsilon", "enforce_herd", "prune", "parent_schedule"}) {
            root.forbid(key, "not used in simulate mode");
        }
        sc.t0 = root.optional<int>("t0").value_or(0);
        sc.cost_horizon = root.optional<int>("cost_horizon");
        if (root.has("schedules")) {
            Fields s(root.raw("schedules"), "schedules");
            for (const auto& node : sc.regions) {
                if (s.has(node.id)) {
                    sc.schedules[node.id] = s.numbers(node.id);
                }
            }
            s.finish();
        }
        break;
    }

    if (sc.t0 < 0 || sc.t0 % sc.dt != 0) {
        throw ScenarioError("t0", "must be a non-negative multiple of dt");
    }
    if (sc.t0 > sc.horizon) {
        throw ScenarioError("t0", "must not exceed the horizon");
    }
    if (sc.cost_horizon && (*sc.cost_horizon < std::max(sc.t0, 1) || *sc.cost_horizon > sc.horizon)) {
        throw ScenarioError("cost_horizon", "must lie between t0 and the horizon");
    }
    for (const auto& [id, values] : sc.schedules) {
        const std::string field = "schedules." + id;
        detail::with_field(field, [&] { (void)PolicySchedule(values, sc.dt, sc.t0); });
        if (sc.intensities && !PolicySchedule(values, sc.dt, sc.t0).within(*sc.intensities)) {
            throw ScenarioError(field, "uses an intensity outside the intensity set");
        }
    }
    if (sc.parent_schedule) {
        detail::with_field("parent_schedule", [&] { (void)PolicySchedule(*sc.parent_schedule, sc.dt, sc.t0); });
    }
    root.finish();
    return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ScenarioError("<file>", "cannot read " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_scenario(buffer.str());
}

} // namespace epipolicy
