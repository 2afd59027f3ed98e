#pragma once

#include <algorithm>
#include <cmath>
#include <optional>

#include "errors.hpp"
#include "policy.hpp"

namespace epipolicy {

inline constexpr double kWeightTolerance = 1e-12;

/// Implementation weight kappa and impact weight eta; the remainder 1 - kappa - eta
/// weighs non-compliance with the parent jurisdiction.
struct CostWeights {
    double kappa = 0.0;
    double eta = 1.0;

    double non_compliance() const noexcept { return std::max(0.0, 1.0 - kappa - eta); }

    /// Top-layer regions answer to nobody and must put all weight on kappa and eta.
    bool top_layer() const noexcept { return std::abs(kappa + eta - 1.0) <= kWeightTolerance; }

    void validate() const {
        if (!(kappa >= 0.0 && eta >= 0.0 && kappa + eta <= 1.0 + kWeightTolerance)) {
            throw PreconditionError("cost weights need kappa >= 0, eta >= 0 and kappa + eta <= 1");
        }
    }

    friend bool operator==(const CostWeights&, const CostWeights&) = default;
};

/// Unweighted cost terms and their weighted total.
struct CostBreakdown {
    double implementation = 0.0;
    double impact = 0.0;
    double non_compliance = 0.0;
    double total = 0.0;

    friend bool operator==(const CostBreakdown&, const CostBreakdown&) = default;
};

inline CostBreakdown combine(const CostWeights& w, double implementation, double impact, double non_compliance) {
    return {implementation, impact, non_compliance,
            w.kappa * implementation + w.eta * impact + w.non_compliance() * non_compliance};
}

namespace detail {

inline void check_weights_for_parent(const CostWeights& w, bool has_parent) {
    w.validate();
    if (!has_parent && !w.top_layer()) {
        throw PreconditionError("a region without a parent policy needs kappa + eta = 1");
    }
}

} // namespace detail

/// Cost of holding `alpha` for one `dt`-day interval, normalised by horizon `T`:
///   kappa (1-alpha) dt/T + eta r_T + (1-kappa-eta) (alpha-pi)^2 dt/T.
/// `parent` is the parent jurisdiction's intensity for the interval, absent at the top layer.
inline CostBreakdown interval_cost(double alpha, std::optional<double> parent, const CostWeights& weights, int dt,
                                   int horizon, double r_at_horizon) {
    detail::check_weights_for_parent(weights, parent.has_value());
    if (!(alpha >= 0.0 && alpha <= 1.0) || (parent && !(*parent >= 0.0 && *parent <= 1.0))) {
        throw PreconditionError("intensities must lie in [0, 1]");
    }
    if (dt <= 0 || horizon < dt) {
        throw PreconditionError("need 0 < dt <= T");
    }
    if (!(r_at_horizon >= 0.0 && r_at_horizon <= 1.0)) {
        throw PreconditionError("recovered fraction must lie in [0, 1]");
    }
    const double share = static_cast<double>(dt) / horizon;
    const double deviation = parent ? alpha - *parent : 0.0;
    return combine(weights, share * (1.0 - alpha), r_at_horizon, share * deviation * deviation);
}

/// Implementation and non-compliance contributions of days [begin, end) at a constant
/// intensity. Whole-schedule costs are sums of these in interval order.
struct SpanTerms {
    double implementation = 0.0;
    double non_compliance = 0.0;
};

inline SpanTerms span_terms(double alpha, const PolicySchedule* parent, int begin, int end, int horizon) {
    SpanTerms out;
    out.implementation = (1.0 - alpha) * (end - begin) / horizon;
    if (parent != nullptr) {
        double squares = 0.0;
        for (int t = begin; t < end; ++t) {
            const double d = alpha - parent->value_at(t);
            squares += d * d;
        }
        out.non_compliance = squares / horizon;
    }
    return out;
}

/// Whole-schedule cost averaged over [0, T): the controlled intervals, then the
/// uncontrolled days from t0 to T, with the impact counted once at T.
/// `parent` is null for a top-layer region.
inline CostBreakdown total_cost(const PolicySchedule& schedule, const PolicySchedule* parent,
                                const CostWeights& weights, int horizon, double r_at_horizon) {
    detail::check_weights_for_parent(weights, parent != nullptr);
    if (horizon < schedule.t0() || horizon <= 0) {
        throw PreconditionError("cost horizon T must be positive and not before t0");
    }
    if (!(r_at_horizon >= 0.0 && r_at_horizon <= 1.0)) {
        throw PreconditionError("recovered fraction must lie in [0, 1]");
    }
    double implementation = 0.0;
    double non_compliance = 0.0;
    const int dt = schedule.dt();
    for (std::size_t k = 0; k < schedule.num_intervals(); ++k) {
        const int begin = static_cast<int>(k) * dt;
        const auto terms = span_terms(schedule.intensities()[k], parent, begin, begin + dt, horizon);
        implementation += terms.implementation;
        non_compliance += terms.non_compliance;
    }
    const auto tail = span_terms(1.0, parent, schedule.t0(), horizon, horizon);
    implementation += tail.implementation;
    non_compliance += tail.non_compliance;
    return combine(weights, implementation, r_at_horizon, non_compliance);
}

} // namespace epipolicy
