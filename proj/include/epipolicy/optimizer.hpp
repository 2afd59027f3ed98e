#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "cost.hpp"
#include "errors.hpp"
#include "policy.hpp"
#include "sir.hpp"

namespace epipolicy {

inline constexpr std::uint64_t kOracleLimit = 100'000;

struct OptimizerConfig {
    IntensitySet intensities = IntensitySet({0.0, 0.5, 1.0});
    int dt = 7;
    int t0 = 98;
    int horizon = kDefaultHorizon;     // days simulated; s_final is read here
    std::optional<int> cost_horizon;   // normalisation horizon T, defaults to `horizon`
    double epsilon = 0.01;             // herd tolerance
    CostWeights weights{0.0, 1.0};
    bool enforce_herd = true;
    bool prune = false;                // skip subtrees whose running cost already reaches the best
    unsigned threads = 1;
    std::optional<PolicySchedule> parent; // parent jurisdiction's policy, if any

    int normalization_horizon() const { return cost_horizon.value_or(horizon); }

    void validate() const {
        if (dt <= 0 || t0 < 0 || t0 % dt != 0) {
            throw PreconditionError("t0 must be a non-negative multiple of a positive dt");
        }
        if (t0 > horizon) {
            throw PreconditionError("policy end time t0 must not exceed the horizon");
        }
        const int T = normalization_horizon();
        if (T <= 0 || T < t0 || T > horizon) {
            throw PreconditionError("cost horizon T must satisfy t0 <= T <= horizon and T > 0");
        }
        if (!(epsilon > 0.0)) {
            throw PreconditionError("herd tolerance epsilon must be positive");
        }
        if (threads == 0) {
            throw PreconditionError("need at least one search thread");
        }
        detail::check_weights_for_parent(weights, parent.has_value());
    }
};

struct OptimizerResult {
    std::optional<PolicySchedule> best_schedule; // empty when infeasible
    CostBreakdown best_cost;
    double s_final = 0.0;
    double r_final = 0.0;
    std::uint64_t explored = 0; // leaves evaluated
    bool feasible = false;
};

struct ScheduleEvaluation {
    CostBreakdown cost;
    double s_final = 0.0;
    Trajectory trajectory;
};

/// Simulates `schedule` and scores it; no search.
inline ScheduleEvaluation evaluate_schedule(const SirState& initial, const SirParams& params,
                                            const PolicySchedule& schedule, const OptimizerConfig& config) {
    config.validate();
    const int T = config.normalization_horizon();
    if (schedule.t0() > T) {
        throw PreconditionError("schedule extends past the cost horizon");
    }
    ScheduleEvaluation out;
    out.trajectory = simulate(initial, params, schedule, config.horizon);
    const double r_at_T = out.trajectory.states[static_cast<std::size_t>(T)].r;
    out.cost = total_cost(schedule, config.parent ? &*config.parent : nullptr, config.weights, T, r_at_T);
    out.s_final = out.trajectory.final_state().s;
    return out;
}

namespace detail {

class DepthFirstSearch {
public:
    struct Best {
        bool found = false;
        CostBreakdown cost{0.0, 0.0, 0.0, std::numeric_limits<double>::infinity()};
        double s_final = 0.0;
        double r_final = 0.0;
        std::vector<std::size_t> path;
        std::uint64_t explored = 0;
    };

    DepthFirstSearch(const SirState& initial, const SirParams& params, const OptimizerConfig& config)
        : initial_(initial), beta_(params.beta()), gamma_(params.gamma()), config_(config),
          levels_(config.intensities.size()), intervals_(static_cast<std::size_t>(config.t0 / config.dt)),
          T_(config.normalization_horizon()) {
        herd_limit_ = config.enforce_herd ? herd_threshold(params) - config.epsilon
                                          : -std::numeric_limits<double>::infinity();
        const PolicySchedule* parent = config.parent ? &*config.parent : nullptr;
        terms_.resize(intervals_ * levels_);
        for (std::size_t k = 0; k < intervals_; ++k) {
            const int begin = static_cast<int>(k) * config.dt;
            for (std::size_t j = 0; j < levels_; ++j) {
                terms_[k * levels_ + j] = span_terms(config.intensities[j], parent, begin, begin + config.dt, T_);
            }
        }
        tail_ = span_terms(1.0, parent, config.t0, T_, T_);
    }

    std::size_t intervals() const noexcept { return intervals_; }
    std::size_t levels() const noexcept { return levels_; }

    /// Searches every completion of `prefix` (level indices) in lexicographic order.
    Best search(const std::vector<std::size_t>& prefix) const {
        Best best;
        std::vector<std::size_t> path(intervals_);
        SirState st = initial_;
        double implementation = 0.0;
        double non_compliance = 0.0;
        for (std::size_t k = 0; k < prefix.size(); ++k) {
            path[k] = prefix[k];
            st = run_interval(st, config_.intensities[prefix[k]]);
            const auto& terms = terms_[k * levels_ + prefix[k]];
            implementation += terms.implementation;
            non_compliance += terms.non_compliance;
        }
        descend(prefix.size(), st, implementation, non_compliance, path, best);
        return best;
    }

private:
    SirState run_interval(SirState st, double alpha) const noexcept {
        for (int d = 0; d < config_.dt; ++d) {
            st = euler_day(st, st.i, alpha, beta_, gamma_);
        }
        return st;
    }

    bool pruned(double implementation, double non_compliance, const Best& best) const {
        return config_.prune && best.found &&
               combine(config_.weights, implementation, 0.0, non_compliance).total >= best.cost.total;
    }

    void descend(std::size_t depth, const SirState& st, double implementation, double non_compliance,
                 std::vector<std::size_t>& path, Best& best) const {
        if (depth == intervals_) {
            Lane lane{st, implementation, non_compliance, 0};
            finish_lanes(std::span<Lane>(&lane, 1), path, best);
            return;
        }
        if (depth + 1 == intervals_) {
            expand_last(depth, st, implementation, non_compliance, path, best);
            return;
        }
        for (std::size_t j = 0; j < levels_; ++j) {
            const auto& terms = terms_[depth * levels_ + j];
            const double impl = implementation + terms.implementation;
            const double nc = non_compliance + terms.non_compliance;
            if (pruned(impl, nc, best)) {
                continue;
            }
            path[depth] = j;
            descend(depth + 1, run_interval(st, config_.intensities[j]), impl, nc, path, best);
        }
    }

    struct Lane {
        SirState state;
        double implementation;
        double non_compliance;
        std::size_t level;
    };

    // Children of the last interval share a parent state; their uncontrolled tails are
    // independent, so they are advanced together.
    void expand_last(std::size_t depth, const SirState& st, double implementation, double non_compliance,
                     std::vector<std::size_t>& path, Best& best) const {
        lanes_buffer().clear();
        auto& lanes = lanes_buffer();
        for (std::size_t j = 0; j < levels_; ++j) {
            const auto& terms = terms_[depth * levels_ + j];
            const double impl = implementation + terms.implementation;
            const double nc = non_compliance + terms.non_compliance;
            if (pruned(impl, nc, best)) {
                continue;
            }
            lanes.push_back({run_interval(st, config_.intensities[j]), impl, nc, j});
        }
        if (!lanes.empty()) {
            finish_lanes(lanes, path, best, depth);
        }
    }

    void finish_lanes(std::span<Lane> lanes, std::vector<std::size_t>& path, Best& best,
                      std::optional<std::size_t> lane_depth = std::nullopt) const {
        const std::size_t n = lanes.size();
        std::vector<double>& r_at_T = r_buffer();
        r_at_T.assign(n, 0.0);
        if (T_ == config_.t0) {
            for (std::size_t l = 0; l < n; ++l) {
                r_at_T[l] = lanes[l].state.r;
            }
        }
        for (int day = config_.t0; day < config_.horizon; ++day) {
            for (std::size_t l = 0; l < n; ++l) {
                lanes[l].state = euler_day(lanes[l].state, lanes[l].state.i, 1.0, beta_, gamma_);
            }
            if (day + 1 == T_) {
                for (std::size_t l = 0; l < n; ++l) {
                    r_at_T[l] = lanes[l].state.r;
                }
            }
        }
        for (std::size_t l = 0; l < n; ++l) {
            ++best.explored;
            const SirState& end = lanes[l].state;
            if (!(end.s > herd_limit_)) {
                continue;
            }
            const auto cost = combine(config_.weights, lanes[l].implementation + tail_.implementation, r_at_T[l],
                                      lanes[l].non_compliance + tail_.non_compliance);
            if (cost.total < best.cost.total) {
                if (lane_depth) {
                    path[*lane_depth] = lanes[l].level;
                }
                best.found = true;
                best.cost = cost;
                best.s_final = end.s;
                best.r_final = end.r;
                best.path = path;
            }
        }
    }

    static std::vector<Lane>& lanes_buffer() {
        thread_local std::vector<Lane> buffer;
        return buffer;
    }

    static std::vector<double>& r_buffer() {
        thread_local std::vector<double> buffer;
        return buffer;
    }

    SirState initial_;
    double beta_;
    double gamma_;
    const OptimizerConfig& config_;
    std::size_t levels_;
    std::size_t intervals_;
    int T_;
    double herd_limit_;
    std::vector<SpanTerms> terms_;
    SpanTerms tail_;
};

inline PolicySchedule schedule_from_path(const OptimizerConfig& config, const std::vector<std::size_t>& path) {
    std::vector<double> values(path.size());
    for (std::size_t k = 0; k < path.size(); ++k) {
        values[k] = config.intensities[path[k]];
    }
    return PolicySchedule(std::move(values), config.dt, config.t0);
}

} // namespace detail

/// Exhaustive depth-first search for the cheapest piecewise-constant schedule whose
/// terminal susceptible fraction stays above herd_threshold - epsilon (when enforced).
///
/// Cost is accumulated interval by interval and the epidemic state is carried down the
/// tree, so each node costs one interval of simulation. Ties keep the first minimum in
/// enumeration order. With `threads > 1` the tree is split by schedule prefix and the
/// per-prefix winners are merged in prefix order, which reproduces the serial answer.
inline OptimizerResult optimize(const SirState& initial, const SirParams& params, const OptimizerConfig& config) {
    config.validate();
    detail::check_state(initial);
    const detail::DepthFirstSearch search(initial, params, config);

    std::vector<std::vector<std::size_t>> prefixes{{}};
    if (config.threads > 1) {
        const std::uint64_t wanted = 8ull * config.threads;
        std::size_t depth = 0;
        while (depth < search.intervals() && schedule_count(search.levels(), depth) < wanted) {
            ++depth;
        }
        for (std::size_t d = 0; d < depth; ++d) {
            std::vector<std::vector<std::size_t>> longer;
            longer.reserve(prefixes.size() * search.levels());
            for (const auto& p : prefixes) {
                for (std::size_t j = 0; j < search.levels(); ++j) {
                    longer.push_back(p);
                    longer.back().push_back(j);
                }
            }
            prefixes = std::move(longer);
        }
    }

    std::vector<detail::DepthFirstSearch::Best> partial(prefixes.size());
    if (config.threads == 1) {
        partial[0] = search.search(prefixes[0]);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t task = next++; task < prefixes.size(); task = next++) {
                partial[task] = search.search(prefixes[task]);
            }
        };
        std::vector<std::jthread> pool;
        const unsigned count = std::min<unsigned>(config.threads, static_cast<unsigned>(prefixes.size()));
        for (unsigned w = 0; w < count; ++w) {
            pool.emplace_back(worker);
        }
    }

    OptimizerResult result;
    const detail::DepthFirstSearch::Best* winner = nullptr;
    for (const auto& p : partial) {
        result.explored += p.explored;
        if (p.found && (winner == nullptr || p.cost.total < winner->cost.total)) {
            winner = &p;
        }
    }
    if (winner != nullptr) {
        result.feasible = true;
        result.best_schedule = detail::schedule_from_path(config, winner->path);
        result.best_cost = winner->cost;
        result.s_final = winner->s_final;
        result.r_final = winner->r_final;
    }
    return result;
}

/// Independent check of `optimize`: materialises every schedule and simulates each one
/// from day 0. Refuses search spaces above `limit` schedules.
inline OptimizerResult brute_force_oracle(const SirState& initial, const SirParams& params,
                                          const OptimizerConfig& config, std::uint64_t limit = kOracleLimit) {
    config.validate();
    const auto schedules = enumerate_schedules(config.intensities, config.dt, config.t0);
    if (schedules.size() > limit) {
        throw SearchTooLargeError("brute-force oracle limited to " + std::to_string(limit) + " schedules");
    }
    const double limit_s =
        config.enforce_herd ? herd_threshold(params) - config.epsilon : -std::numeric_limits<double>::infinity();
    OptimizerResult result;
    for (const auto& schedule : schedules) {
        ++result.explored;
        auto eval = evaluate_schedule(initial, params, schedule, config);
        if (!(eval.s_final > limit_s)) {
            continue;
        }
        if (!result.feasible || eval.cost.total < result.best_cost.total) {
            result.feasible = true;
            result.best_schedule = schedule;
            result.best_cost = eval.cost;
            result.s_final = eval.s_final;
            result.r_final = eval.trajectory.final_state().r;
        }
    }
    return result;
}

} // namespace epipolicy
