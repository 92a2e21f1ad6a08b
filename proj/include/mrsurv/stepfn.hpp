#pragma once

#include <algorithm>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace mrsurv {

/// Right-continuous nonincreasing step survival curve on a window starting at
/// t_k, equal to one at t_k. Stored as the list of jump times and the value
/// right after each jump.
class StepSurvival {
public:
    /// Constant-one curve.
    explicit StepSurvival(double window_start = 0.0) : start_(window_start) {}

    /// Equal consecutive jump times are merged, keeping the later value.
    /// Throws DomainError if times are not > window_start and increasing, or if
    /// values leave [0,1] or increase.
    StepSurvival(double window_start, std::vector<double> jump_times, std::vector<double> values);

    double window_start() const noexcept { return start_; }
    std::span<const double> jump_times() const noexcept { return times_; }
    std::span<const double> values() const noexcept { return values_; }
    std::size_t size() const noexcept { return times_.size(); }

    /// Value at t >= window_start.
    double eval(double t) const;
    /// lim_{s -> t-}; requires t > window_start.
    double left_limit(double t) const;

    /// Sum over jump times s in (a, b] of f(s, S(s-), S(s)) * (S(s) - S(s-)).
    /// Jumps of size exactly zero are skipped.
    template <class F>
    double stieltjes_sum(double a, double b, F&& f) const;

    void write_csv(std::ostream& out) const;

private:
    void check_domain(double t, bool strict) const;
    /// Index of the first jump time > t.
    std::size_t upper(double t) const {
        return static_cast<std::size_t>(std::upper_bound(times_.begin(), times_.end(), t) - times_.begin());
    }

    double start_ = 0.0;
    std::vector<double> times_;
    std::vector<double> values_;
};

/// Left limits at nondecreasing query times in amortized O(1).
class LeftLimitCursor {
public:
    explicit LeftLimitCursor(const StepSurvival& curve) : curve_(&curve) {}
    double operator()(double t);

private:
    const StepSurvival* curve_;
    std::size_t index_ = 0;  // jumps before index_ are < last query
};

template <class F>
double StepSurvival::stieltjes_sum(double a, double b, F&& f) const {
    check_domain(a, false);
    if (b < a) check_domain(b, false);
    if (b <= a) return 0.0;
    double total = 0.0;
    std::size_t i = upper(a);
    double pre = i == 0 ? 1.0 : values_[i - 1];
    for (; i < times_.size() && times_[i] <= b; ++i) {
        const double post = values_[i];
        if (post != pre) total += f(times_[i], pre, post) * (post - pre);
        pre = post;
    }
    return total;
}

}  // namespace mrsurv
