#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "errors.hpp"
#include "policy.hpp"

namespace epipolicy {

inline constexpr double kDefaultGamma = 0.1;       // per day, 10-day infectious period
inline constexpr double kDefaultQuiescence = 1e-9; // infected fraction regarded as extinct
inline constexpr int kDefaultHorizon = 1500;       // days
inline constexpr double kStateTolerance = 1e-12;

/// Transmission and recovery rates, both in (0, 1].
class SirParams {
public:
    static SirParams from_r0(double r0, double gamma = kDefaultGamma) { return SirParams(r0 * gamma, gamma, r0); }
    static SirParams from_rates(double beta, double gamma) { return SirParams(beta, gamma, beta / gamma); }

    double beta() const noexcept { return beta_; }
    double gamma() const noexcept { return gamma_; }
    double r0() const noexcept { return r0_; }

private:
    SirParams(double beta, double gamma, double r0) : beta_(beta), gamma_(gamma), r0_(r0) {
        if (!(gamma_ > 0.0 && gamma_ <= 1.0)) {
            throw PreconditionError("gamma must lie in (0, 1]");
        }
        if (!(beta_ > 0.0 && beta_ <= 1.0)) {
            throw PreconditionError("beta must lie in (0, 1]");
        }
    }

    double beta_;
    double gamma_;
    double r0_;
};

/// Compartment fractions of one region's population.
struct SirState {
    double s = 1.0;
    double i = 0.0;
    double r = 0.0;

    static SirState from_fractions(double i, double r) { return checked({1.0 - i - r, i, r}); }

    static SirState from_counts(double population, double infected, double recovered = 0.0) {
        if (!(population > 0.0)) {
            throw PreconditionError("population must be positive");
        }
        return from_fractions(infected / population, recovered / population);
    }

    static SirState checked(SirState state) {
        if (!state.valid()) {
            throw PreconditionError("SIR state must have s, i, r in [0, 1] summing to 1");
        }
        return state;
    }

    double total() const noexcept { return s + i + r; }

    bool valid(double tol = kStateTolerance) const noexcept {
        auto in_unit = [tol](double x) { return x >= -tol && x <= 1.0 + tol; };
        return in_unit(s) && in_unit(i) && in_unit(r) && std::abs(total() - 1.0) <= tol;
    }

    friend bool operator==(const SirState&, const SirState&) = default;
};

/// Daily states from day 0 to the horizon and the intensity applied on each day.
struct Trajectory {
    std::vector<SirState> states;
    std::vector<double> intensities;

    int horizon() const noexcept { return static_cast<int>(intensities.size()); }
    const SirState& final_state() const { return states.back(); }

    double peak_infected() const {
        double peak = 0.0;
        for (const auto& st : states) {
            peak = std::max(peak, st.i);
        }
        return peak;
    }

    int peak_day() const {
        auto it = std::max_element(states.begin(), states.end(),
                                   [](const SirState& a, const SirState& b) { return a.i < b.i; });
        return static_cast<int>(it - states.begin());
    }

    /// Interior local maxima of the infected curve above `threshold`.
    int waves(double threshold = 1e-4) const {
        int count = 0;
        for (std::size_t t = 1; t + 1 < states.size(); ++t) {
            const double here = states[t].i;
            if (here > threshold && here > states[t - 1].i && here >= states[t + 1].i) {
                ++count;
            }
        }
        return count;
    }
};

/// Nonnegative square matrix with unit diagonal; entry (a, b) scales how infections in
/// region b drive new infections in region a.
class ExcitationMatrix {
public:
    static ExcitationMatrix identity(std::size_t n) {
        std::vector<std::vector<double>> rows(n, std::vector<double>(n, 0.0));
        for (std::size_t a = 0; a < n; ++a) {
            rows[a][a] = 1.0;
        }
        return ExcitationMatrix(rows);
    }

    explicit ExcitationMatrix(const std::vector<std::vector<double>>& rows) : n_(rows.size()) {
        entries_.reserve(n_ * n_);
        for (std::size_t a = 0; a < n_; ++a) {
            if (rows[a].size() != n_) {
                throw PreconditionError("excitation matrix must be square");
            }
            for (std::size_t b = 0; b < n_; ++b) {
                const double k = rows[a][b];
                if (a == b && k != 1.0) {
                    throw PreconditionError("excitation matrix diagonal must be 1");
                }
                if (!(k >= 0.0)) {
                    throw PreconditionError("excitation matrix entries must be non-negative");
                }
                entries_.push_back(k);
            }
        }
    }

    std::size_t size() const noexcept { return n_; }
    double operator()(std::size_t a, std::size_t b) const { return entries_[a * n_ + b]; }

    std::vector<std::vector<double>> rows() const {
        std::vector<std::vector<double>> out(n_);
        for (std::size_t a = 0; a < n_; ++a) {
            out[a].assign(entries_.begin() + static_cast<std::ptrdiff_t>(a * n_),
                          entries_.begin() + static_cast<std::ptrdiff_t>((a + 1) * n_));
        }
        return out;
    }

    friend bool operator==(const ExcitationMatrix&, const ExcitationMatrix&) = default;

private:
    std::size_t n_;
    std::vector<double> entries_;
};

namespace detail {

// One Euler day; every simulation route goes through here.
inline SirState euler_day(const SirState& st, double pressure, double alpha, double beta, double gamma) noexcept {
    const double infections = alpha * beta * pressure * st.s;
    const double recoveries = gamma * st.i;
    return {st.s - infections, st.i + infections - recoveries, st.r + recoveries};
}

inline void check_alpha(double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw PreconditionError("control intensity must lie in [0, 1]");
    }
}

inline void check_state(const SirState& st) {
    if (!st.valid()) {
        throw PreconditionError("SIR state must have s, i, r in [0, 1] summing to 1");
    }
}

// Advances all regions one day in place. `next` must have the size of `states`.
inline void network_day(std::span<const SirState> states, const SirParams& params, const ExcitationMatrix& k,
                        std::span<const double> alphas, std::span<SirState> next) {
    const std::size_t n = states.size();
    for (std::size_t a = 0; a < n; ++a) {
        double pressure = 0.0;
        for (std::size_t b = 0; b < n; ++b) {
            pressure += k(a, b) * states[b].i;
        }
        if (alphas[a] * params.beta() * pressure > 1.0) {
            throw PreconditionError("infection pressure exceeds the unit-step stability bound");
        }
        next[a] = euler_day(states[a], pressure, alphas[a], params.beta(), params.gamma());
    }
}

} // namespace detail

/// One day of the controlled SIR map:
///   s' = s - a*beta*i*s,  i' = i + a*beta*i*s - gamma*i,  r' = r + gamma*i.
inline SirState step_single(const SirState& state, const SirParams& params, double alpha) {
    detail::check_alpha(alpha);
    detail::check_state(state);
    return detail::euler_day(state, state.i, alpha, params.beta(), params.gamma());
}

/// One day of the cross-excited network map: region a sees infection pressure
/// sum_b K(a, b) * i_b in place of its own i.
inline std::vector<SirState> step_network(std::span<const SirState> states, const SirParams& params,
                                          const ExcitationMatrix& k, std::span<const double> alphas) {
    if (states.size() != k.size() || alphas.size() != k.size()) {
        throw PreconditionError("need one state and one intensity per row of the excitation matrix");
    }
    for (double a : alphas) {
        detail::check_alpha(a);
    }
    for (const auto& st : states) {
        detail::check_state(st);
    }
    std::vector<SirState> next(states.size());
    detail::network_day(states, params, k, alphas, next);
    return next;
}

/// Day-by-day simulation of every region under its own schedule.
inline std::vector<Trajectory> simulate(std::span<const SirState> initial, const SirParams& params,
                                        const ExcitationMatrix& k, std::span<const PolicySchedule> schedules,
                                        int horizon) {
    if (horizon < 1) {
        throw PreconditionError("horizon must be at least one day");
    }
    if (initial.size() != k.size() || schedules.size() != k.size()) {
        throw PreconditionError("need one initial state and one schedule per region");
    }
    for (const auto& st : initial) {
        detail::check_state(st);
    }
    const std::size_t n = initial.size();
    std::vector<Trajectory> out(n);
    for (std::size_t a = 0; a < n; ++a) {
        out[a].states.reserve(static_cast<std::size_t>(horizon) + 1);
        out[a].intensities.reserve(static_cast<std::size_t>(horizon));
        out[a].states.push_back(initial[a]);
    }
    std::vector<SirState> current(initial.begin(), initial.end());
    std::vector<SirState> next(n);
    std::vector<double> alphas(n);
    for (int t = 0; t < horizon; ++t) {
        for (std::size_t a = 0; a < n; ++a) {
            alphas[a] = schedules[a].value_at(t);
        }
        detail::network_day(current, params, k, alphas, next);
        for (std::size_t a = 0; a < n; ++a) {
            out[a].states.push_back(next[a]);
            out[a].intensities.push_back(alphas[a]);
        }
        current.swap(next);
    }
    return out;
}

/// Single-region simulation.
inline Trajectory simulate(const SirState& initial, const SirParams& params, const PolicySchedule& schedule,
                           int horizon) {
    if (horizon < 1) {
        throw PreconditionError("horizon must be at least one day");
    }
    detail::check_state(initial);
    Trajectory out;
    out.states.reserve(static_cast<std::size_t>(horizon) + 1);
    out.intensities.reserve(static_cast<std::size_t>(horizon));
    out.states.push_back(initial);
    SirState current = initial;
    for (int t = 0; t < horizon; ++t) {
        const double alpha = schedule.value_at(t);
        current = detail::euler_day(current, current.i, alpha, params.beta(), params.gamma());
        out.states.push_back(current);
        out.intensities.push_back(alpha);
    }
    return out;
}

/// Susceptible fraction below which infections decline without control: 1/R0.
inline double herd_threshold(const SirParams& params) {
    if (!(params.r0() > 1.0)) {
        throw NoEpidemicError("herd immunity threshold requires R0 > 1");
    }
    return 1.0 / params.r0();
}

struct FinalSize {
    double s_final;
    double r_final;
    bool quiescent; // infected fraction below the quiescence level at the horizon
};

/// Terminal state of a finite-horizon run, standing in for S_inf / R_inf.
inline FinalSize final_size(const SirState& initial, const SirParams& params, const PolicySchedule& schedule,
                            int horizon = kDefaultHorizon, double quiescence = kDefaultQuiescence) {
    if (horizon < schedule.t0()) {
        throw PreconditionError("horizon must not end before the policy does");
    }
    const auto end = simulate(initial, params, schedule, horizon).final_state();
    return {end.s, end.r, end.i < quiescence};
}

} // namespace epipolicy
