#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <iterator>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace epipolicy {

/// Finite ascending set of admissible control intensities in [alpha_max, 1].
/// 0 is a full lockdown, 1 is no control.
class IntensitySet {
public:
    explicit IntensitySet(std::vector<double> levels) : levels_(std::move(levels)) {
        if (levels_.empty()) {
            throw PreconditionError("intensity set must not be empty");
        }
        std::sort(levels_.begin(), levels_.end());
        if (std::adjacent_find(levels_.begin(), levels_.end()) != levels_.end()) {
            throw PreconditionError("intensity levels must be distinct");
        }
        if (levels_.front() < 0.0 || levels_.back() != 1.0) {
            throw PreconditionError("intensity levels must lie in [0, 1] and include 1");
        }
    }

    /// {alpha_max, (alpha_max + 1) / 2, 1}, the three-level set used for the single-region studies.
    static IntensitySet three_level(double alpha_max) {
        if (!(alpha_max >= 0.0 && alpha_max < 1.0)) {
            throw PreconditionError("alpha_max must lie in [0, 1)");
        }
        return IntensitySet({alpha_max, (alpha_max + 1.0) / 2.0, 1.0});
    }

    double alpha_max() const noexcept { return levels_.front(); }
    std::size_t size() const noexcept { return levels_.size(); }
    double operator[](std::size_t k) const { return levels_[k]; }
    std::span<const double> levels() const noexcept { return levels_; }
    bool contains(double alpha) const { return std::binary_search(levels_.begin(), levels_.end(), alpha); }

    friend bool operator==(const IntensitySet&, const IntensitySet&) = default;

private:
    std::vector<double> levels_;
};

/// A maximal run of days with one intensity, [start_day, end_day).
struct Stage {
    int start_day;
    int end_day;
    double intensity;

    friend bool operator==(const Stage&, const Stage&) = default;
};

/// Piecewise-constant control on a grid of `dt`-day intervals covering [0, t0).
/// After t0 the control is lifted (intensity 1).
class PolicySchedule {
public:
    PolicySchedule(std::vector<double> intensities, int dt, int t0)
        : intensities_(std::move(intensities)), dt_(dt), t0_(t0) {
        if (dt_ <= 0) {
            throw PreconditionError("policy interval dt must be a positive number of days");
        }
        if (t0_ < 0 || t0_ % dt_ != 0) {
            throw PreconditionError("policy end time t0 must be a non-negative multiple of dt");
        }
        if (intensities_.size() != static_cast<std::size_t>(t0_ / dt_)) {
            throw PreconditionError("schedule needs exactly t0/dt intensities");
        }
        for (double a : intensities_) {
            if (!(a >= 0.0 && a <= 1.0)) {
                throw PreconditionError("schedule intensities must lie in [0, 1]");
            }
        }
    }

    static PolicySchedule constant(double alpha, int dt, int t0) {
        return PolicySchedule(std::vector<double>(t0 > 0 && dt > 0 ? t0 / dt : 0, alpha), dt, t0);
    }

    /// Intensity in force on day `t`.
    double value_at(int t) const {
        if (t < 0) {
            throw PreconditionError("day must be non-negative");
        }
        return t < t0_ ? intensities_[static_cast<std::size_t>(t / dt_)] : 1.0;
    }

    std::span<const double> intensities() const noexcept { return intensities_; }
    std::size_t num_intervals() const noexcept { return intensities_.size(); }
    int dt() const noexcept { return dt_; }
    int t0() const noexcept { return t0_; }

    /// Adjacent equal intervals merged into stages over [0, t0).
    std::vector<Stage> stages() const {
        std::vector<Stage> out;
        for (std::size_t k = 0; k < intensities_.size(); ++k) {
            const int start = static_cast<int>(k) * dt_;
            if (!out.empty() && out.back().intensity == intensities_[k]) {
                out.back().end_day = start + dt_;
            } else {
                out.push_back({start, start + dt_, intensities_[k]});
            }
        }
        return out;
    }

    bool within(const IntensitySet& set) const {
        return std::all_of(intensities_.begin(), intensities_.end(), [&](double a) { return set.contains(a); });
    }

    friend bool operator==(const PolicySchedule&, const PolicySchedule&) = default;

private:
    std::vector<double> intensities_;
    int dt_;
    int t0_;
};

/// Lexicographic order on the interval values; this is also enumeration order.
inline bool lexicographically_less(const PolicySchedule& a, const PolicySchedule& b) {
    return std::lexicographical_compare(a.intensities().begin(), a.intensities().end(), b.intensities().begin(),
                                        b.intensities().end());
}

/// Reverses the block between the first and last controlled (< 1) interval, keeping the
/// uncontrolled lead-in and tail in place. A looser-then-stricter policy becomes
/// stricter-then-looser starting on the same day.
inline PolicySchedule flip_control_block(const PolicySchedule& schedule) {
    std::vector<double> values(schedule.intensities().begin(), schedule.intensities().end());
    auto controlled = [](double a) { return a < 1.0; };
    auto first = std::find_if(values.begin(), values.end(), controlled);
    if (first != values.end()) {
        auto last = std::find_if(values.rbegin(), values.rend(), controlled).base();
        std::reverse(first, last);
    }
    return PolicySchedule(std::move(values), schedule.dt(), schedule.t0());
}

/// |levels|^intervals, saturating at uint64 max.
inline std::uint64_t schedule_count(std::size_t levels, std::size_t intervals) {
    std::uint64_t count = 1;
    for (std::size_t k = 0; k < intervals; ++k) {
        if (levels != 0 && count > std::numeric_limits<std::uint64_t>::max() / levels) {
            return std::numeric_limits<std::uint64_t>::max();
        }
        count *= levels;
    }
    return count;
}

/// Every schedule over an intensity set, depth-first lexicographic with levels ascending
/// at each position. The order is part of the contract: it fixes downstream tie-breaking.
class ScheduleEnumeration {
public:
    class iterator {
    public:
        using iterator_concept = std::input_iterator_tag;
        using value_type = PolicySchedule;
        using difference_type = std::ptrdiff_t;

        iterator() = default;

        PolicySchedule operator*() const {
            std::vector<double> values(digits_.size());
            for (std::size_t k = 0; k < digits_.size(); ++k) {
                values[k] = owner_->levels_[digits_[k]];
            }
            return PolicySchedule(std::move(values), owner_->dt_, owner_->t0_);
        }

        iterator& operator++() {
            // odometer with the last interval varying fastest
            std::size_t k = digits_.size();
            while (k > 0) {
                --k;
                if (++digits_[k] < owner_->levels_.size()) {
                    return *this;
                }
                digits_[k] = 0;
            }
            done_ = true;
            return *this;
        }

        void operator++(int) { ++*this; }

        friend bool operator==(const iterator& it, std::default_sentinel_t) { return it.done_; }

    private:
        friend class ScheduleEnumeration;
        iterator(const ScheduleEnumeration* owner, std::size_t intervals)
            : owner_(owner), digits_(intervals, 0), done_(false) {}

        const ScheduleEnumeration* owner_ = nullptr;
        std::vector<std::size_t> digits_;
        bool done_ = true;
    };

    ScheduleEnumeration(IntensitySet levels, int dt, int t0) : levels_(std::move(levels)), dt_(dt), t0_(t0) {
        if (dt_ <= 0 || t0_ < 0 || t0_ % dt_ != 0) {
            throw PreconditionError("t0 must be a non-negative multiple of a positive dt");
        }
    }

    iterator begin() const { return iterator(this, static_cast<std::size_t>(t0_ / dt_)); }
    std::default_sentinel_t end() const { return {}; }
    std::uint64_t size() const { return schedule_count(levels_.size(), static_cast<std::size_t>(t0_ / dt_)); }

private:
    IntensitySet levels_;
    int dt_;
    int t0_;
};

inline ScheduleEnumeration enumerate_schedules(const IntensitySet& levels, int dt, int t0) {
    return ScheduleEnumeration(levels, dt, t0);
}

/// Maps the six CDC stay-at-home levels linearly onto [0, 1].
inline double cdc_level_to_intensity(int level) {
    if (level < 0 || level > 5) {
        throw PreconditionError("CDC stay-at-home level must be in 0..5, got " + std::to_string(level));
    }
    return level / 5.0;
}

} // namespace epipolicy
