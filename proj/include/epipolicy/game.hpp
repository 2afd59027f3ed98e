#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cost.hpp"
#include "errors.hpp"
#include "policy.hpp"
#include "sir.hpp"

namespace epipolicy {

/// A jurisdiction. Leaves carry epidemic state; inner nodes (states, federal level)
/// aggregate the leaves below them.
struct RegionNode {
    std::string id;
    double population = 0.0;
    std::optional<SirState> initial; // leaves only
    CostWeights weights;
    std::optional<std::string> parent;
    std::vector<std::string> children; // filled from parent links when empty
};

/// Validated jurisdiction forest. Leaves are numbered ("slots") in node order; the
/// excitation matrix of a game is indexed by these slots.
class RegionForest {
public:
    explicit RegionForest(std::vector<RegionNode> nodes) : nodes_(std::move(nodes)) {
        if (nodes_.empty()) {
            throw PreconditionError("region forest needs at least one region");
        }
        for (std::size_t k = 0; k < nodes_.size(); ++k) {
            if (nodes_[k].id.empty()) {
                throw PreconditionError("region ids must be non-empty");
            }
            if (!index_.emplace(nodes_[k].id, k).second) {
                throw PreconditionError("duplicate region id '" + nodes_[k].id + "'");
            }
        }
        parent_.assign(nodes_.size(), std::nullopt);
        children_.assign(nodes_.size(), {});
        for (std::size_t k = 0; k < nodes_.size(); ++k) {
            if (nodes_[k].parent) {
                const std::size_t p = index_of(*nodes_[k].parent);
                if (p == k) {
                    throw PreconditionError("region '" + nodes_[k].id + "' is its own parent");
                }
                parent_[k] = p;
                children_[p].push_back(k);
            }
        }
        for (std::size_t k = 0; k < nodes_.size(); ++k) {
            auto& listed = nodes_[k].children;
            if (listed.empty()) {
                for (std::size_t c : children_[k]) {
                    listed.push_back(nodes_[c].id);
                }
            } else {
                std::vector<std::string> linked;
                for (std::size_t c : children_[k]) {
                    linked.push_back(nodes_[c].id);
                }
                auto sorted = listed;
                std::sort(sorted.begin(), sorted.end());
                std::sort(linked.begin(), linked.end());
                if (sorted != linked) {
                    throw PreconditionError("children of '" + nodes_[k].id + "' disagree with parent links");
                }
            }
        }
        depth_.assign(nodes_.size(), 0);
        for (std::size_t k = 0; k < nodes_.size(); ++k) {
            std::size_t steps = 0;
            for (auto p = parent_[k]; p; p = parent_[*p]) {
                if (++steps > nodes_.size()) {
                    throw PreconditionError("region hierarchy contains a cycle through '" + nodes_[k].id + "'");
                }
            }
            depth_[k] = steps;
        }
        leaf_slot_.assign(nodes_.size(), std::numeric_limits<std::size_t>::max());
        for (std::size_t k = 0; k < nodes_.size(); ++k) {
            auto& node = nodes_[k];
            node.weights.validate();
            if (!parent_[k] && !node.weights.top_layer()) {
                throw PreconditionError("top-layer region '" + node.id + "' needs kappa + eta = 1");
            }
            if (children_[k].empty()) {
                if (!node.initial) {
                    throw PreconditionError("leaf region '" + node.id + "' needs an initial state");
                }
                if (!(node.population > 0.0)) {
                    throw PreconditionError("leaf region '" + node.id + "' needs a positive population");
                }
                detail::check_state(*node.initial);
                leaf_slot_[k] = leaves_.size();
                leaves_.push_back(k);
            } else if (node.initial) {
                throw PreconditionError("inner region '" + node.id + "' must not carry its own epidemic state");
            }
        }
        // inner populations are the sum of their leaves
        for (std::size_t k = 0; k < nodes_.size(); ++k) {
            if (!children_[k].empty()) {
                double total = 0.0;
                for (std::size_t slot : descendant_leaves(k)) {
                    total += nodes_[leaves_[slot]].population;
                }
                nodes_[k].population = total;
            }
        }
        std::size_t max_depth = 0;
        for (std::size_t d : depth_) {
            max_depth = std::max(max_depth, d);
        }
        layers_.assign(max_depth + 1, {});
        for (std::size_t k = 0; k < nodes_.size(); ++k) {
            layers_[depth_[k]].push_back(k);
        }
    }

    std::size_t size() const noexcept { return nodes_.size(); }
    const RegionNode& node(std::size_t k) const { return nodes_.at(k); }
    std::span<const RegionNode> nodes() const noexcept { return nodes_; }

    std::size_t index_of(const std::string& id) const {
        auto it = index_.find(id);
        if (it == index_.end()) {
            throw PreconditionError("unknown region id '" + id + "'");
        }
        return it->second;
    }

    bool is_leaf(std::size_t k) const { return children_.at(k).empty(); }
    std::optional<std::size_t> parent(std::size_t k) const { return parent_.at(k); }
    std::span<const std::size_t> children(std::size_t k) const { return children_.at(k); }
    std::size_t depth(std::size_t k) const { return depth_.at(k); }

    /// Node indices of the leaves, in slot order.
    std::span<const std::size_t> leaves() const noexcept { return leaves_; }
    std::size_t leaf_slot(std::size_t k) const {
        if (!is_leaf(k)) {
            throw PreconditionError("region '" + nodes_.at(k).id + "' is not a leaf");
        }
        return leaf_slot_[k];
    }

    /// Node indices grouped by depth, roots first.
    const std::vector<std::vector<std::size_t>>& layers() const noexcept { return layers_; }

    /// Leaf slots at or below node `k`, in slot order.
    std::vector<std::size_t> descendant_leaves(std::size_t k) const {
        std::vector<std::size_t> out;
        collect(k, out);
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    void collect(std::size_t k, std::vector<std::size_t>& out) const {
        if (children_[k].empty()) {
            out.push_back(leaf_slot_[k]);
            return;
        }
        for (std::size_t c : children_[k]) {
            collect(c, out);
        }
    }

    std::vector<RegionNode> nodes_;
    std::map<std::string, std::size_t> index_;
    std::vector<std::optional<std::size_t>> parent_;
    std::vector<std::vector<std::size_t>> children_;
    std::vector<std::size_t> depth_;
    std::vector<std::size_t> leaves_;
    std::vector<std::size_t> leaf_slot_;
    std::vector<std::vector<std::size_t>> layers_;
};

namespace detail {

inline SirState population_mean(const RegionForest& forest, std::span<const std::size_t> slots,
                                std::span<const SirState> leaf_states) {
    double total = 0.0;
    for (std::size_t slot : slots) {
        total += forest.node(forest.leaves()[slot]).population;
    }
    if (!(total > 0.0)) {
        throw PreconditionError("cannot aggregate regions with zero total population");
    }
    SirState out{0.0, 0.0, 0.0};
    for (std::size_t slot : slots) {
        const double w = forest.node(forest.leaves()[slot]).population / total;
        out.s += w * leaf_states[slot].s;
        out.i += w * leaf_states[slot].i;
        out.r += w * leaf_states[slot].r;
    }
    return out;
}

// State of any node: a leaf's own state, or the population-weighted mean of its leaves.
inline SirState node_state(const RegionForest& forest, std::size_t node, std::span<const SirState> leaf_states) {
    if (forest.is_leaf(node)) {
        return leaf_states[forest.leaf_slot(node)];
    }
    return population_mean(forest, forest.descendant_leaves(node), leaf_states);
}

} // namespace detail

/// Population-weighted mean (s, i, r) over the leaves below an inner node.
inline SirState aggregate_parent_state(const RegionForest& forest, std::size_t node,
                                       std::span<const SirState> leaf_states) {
    if (forest.is_leaf(node)) {
        throw PreconditionError("aggregate_parent_state needs an inner node");
    }
    if (leaf_states.size() != forest.leaves().size()) {
        throw PreconditionError("need one state per leaf region");
    }
    return detail::population_mean(forest, forest.descendant_leaves(node), leaf_states);
}

/// Daily aggregate trajectory of any node.
inline Trajectory node_trajectory(const RegionForest& forest, std::size_t node,
                                  std::span<const Trajectory> leaf_trajectories) {
    if (forest.is_leaf(node)) {
        return leaf_trajectories[forest.leaf_slot(node)];
    }
    Trajectory out;
    const std::size_t days = leaf_trajectories.front().states.size();
    std::vector<SirState> day_states(leaf_trajectories.size());
    for (std::size_t t = 0; t < days; ++t) {
        for (std::size_t slot = 0; slot < leaf_trajectories.size(); ++slot) {
            day_states[slot] = leaf_trajectories[slot].states[t];
        }
        out.states.push_back(aggregate_parent_state(forest, node, day_states));
    }
    return out;
}

struct GameConfig {
    IntensitySet intensities = IntensitySet({0.0, 0.5, 1.0});
    int dt = 7;
    int horizon = 364; // T: end of the game and cost normalisation horizon
};

/// What a region knows when it decides: all leaf states at the start of the interval and
/// every leaf's policy from the previous interval.
struct GameContext {
    int interval = 0;
    int day = 0;
    std::span<const SirState> leaf_states;
    std::span<const double> leaf_policies;
};

struct CandidateCost {
    double alpha;
    CostBreakdown cost;
};

struct BestResponse {
    double alpha = 1.0;
    std::vector<CandidateCost> candidates; // one per intensity level, ascending
};

/// Impact term for `node` choosing `alpha` now: every leaf below the node holds `alpha`
/// and every other leaf keeps its context policy, all the way to the horizon.
inline double projected_recovered(const RegionForest& forest, std::size_t node, double alpha,
                                  const GameContext& context, const SirParams& params, const ExcitationMatrix& k,
                                  int horizon) {
    std::vector<double> policies(context.leaf_policies.begin(), context.leaf_policies.end());
    for (std::size_t slot : forest.descendant_leaves(node)) {
        policies[slot] = alpha;
    }
    std::vector<SirState> current(context.leaf_states.begin(), context.leaf_states.end());
    std::vector<SirState> next(current.size());
    for (int t = context.day; t < horizon; ++t) {
        detail::network_day(current, params, k, policies, next);
        current.swap(next);
    }
    return detail::node_state(forest, node, current).r;
}

/// Unilateral best response of one region for the interval starting at `context.day`.
/// Ties go to the larger (less restrictive) intensity.
inline BestResponse best_response(const RegionForest& forest, std::size_t node, const GameContext& context,
                                  const SirParams& params, const ExcitationMatrix& k, const GameConfig& config,
                                  std::optional<double> parent_choice) {
    if (context.leaf_states.size() != forest.leaves().size() || context.leaf_policies.size() != forest.leaves().size()) {
        throw PreconditionError("game context needs one state and one policy per leaf region");
    }
    const auto& weights = forest.node(node).weights;
    BestResponse out;
    double best = std::numeric_limits<double>::infinity();
    for (double alpha : config.intensities.levels()) {
        const double r_at_T = projected_recovered(forest, node, alpha, context, params, k, config.horizon);
        const auto cost = interval_cost(alpha, parent_choice, weights, config.dt, config.horizon,
                                        std::clamp(r_at_T, 0.0, 1.0));
        out.candidates.push_back({alpha, cost});
        if (cost.total <= best) {
            best = cost.total;
            out.alpha = alpha;
        }
    }
    return out;
}

struct GameDecision {
    int interval;
    int day;
    std::size_t node;
    std::optional<double> parent_choice;
    std::vector<CandidateCost> candidates;
    double chosen;
};

struct GameResult {
    std::vector<PolicySchedule> schedules;      // per node, t0 = horizon
    std::vector<Trajectory> leaf_trajectories;  // per leaf slot
    std::vector<GameDecision> decisions;
};

/// Per-interval hierarchical best-response dynamics.
///
/// Every region starts without control and the first interval runs on those policies.
/// At the start of each later interval the layers decide top-down: a region sees its
/// parent's choice for this interval and the previous-interval policies of everyone else,
/// so siblings never observe each other's same-interval moves. The leaves' choices then
/// drive the network dynamics for `dt` days.
inline GameResult run_game(const RegionForest& forest, const ExcitationMatrix& k, const SirParams& params,
                           const GameConfig& config) {
    if (config.dt <= 0 || config.horizon <= 0 || config.horizon % config.dt != 0) {
        throw PreconditionError("game horizon must be a positive multiple of dt");
    }
    const std::size_t n_leaves = forest.leaves().size();
    if (k.size() != n_leaves) {
        throw PreconditionError("excitation matrix must have one row per leaf region");
    }
    const int intervals = config.horizon / config.dt;

    std::vector<SirState> current(n_leaves);
    GameResult result;
    result.leaf_trajectories.resize(n_leaves);
    for (std::size_t slot = 0; slot < n_leaves; ++slot) {
        current[slot] = *forest.node(forest.leaves()[slot]).initial;
        result.leaf_trajectories[slot].states.push_back(current[slot]);
    }
    std::vector<double> policy(forest.size(), 1.0);
    std::vector<std::vector<double>> chosen(forest.size());
    std::vector<double> leaf_policy(n_leaves, 1.0);
    std::vector<SirState> next(n_leaves);

    for (int n = 0; n < intervals; ++n) {
        const int day = n * config.dt;
        if (n > 0) {
            const GameContext context{n, day, current, leaf_policy};
            std::vector<double> fresh = policy;
            for (const auto& layer : forest.layers()) {
                std::vector<std::pair<std::size_t, double>> commits;
                for (std::size_t node : layer) {
                    std::optional<double> parent_choice;
                    if (auto p = forest.parent(node)) {
                        parent_choice = fresh[*p];
                    }
                    auto response = best_response(forest, node, context, params, k, config, parent_choice);
                    commits.emplace_back(node, response.alpha);
                    result.decisions.push_back(
                        {n, day, node, parent_choice, std::move(response.candidates), response.alpha});
                }
                for (const auto& [node, alpha] : commits) {
                    fresh[node] = alpha;
                }
            }
            policy = std::move(fresh);
            for (std::size_t slot = 0; slot < n_leaves; ++slot) {
                leaf_policy[slot] = policy[forest.leaves()[slot]];
            }
        }
        for (std::size_t node = 0; node < forest.size(); ++node) {
            chosen[node].push_back(policy[node]);
        }
        for (int d = 0; d < config.dt; ++d) {
            detail::network_day(current, params, k, leaf_policy, next);
            current.swap(next);
            for (std::size_t slot = 0; slot < n_leaves; ++slot) {
                result.leaf_trajectories[slot].states.push_back(current[slot]);
                result.leaf_trajectories[slot].intensities.push_back(leaf_policy[slot]);
            }
        }
    }
    for (std::size_t node = 0; node < forest.size(); ++node) {
        result.schedules.emplace_back(std::move(chosen[node]), config.dt, config.horizon);
    }
    return result;
}

} // namespace epipolicy
