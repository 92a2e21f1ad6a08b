#include "mrsurv/stepfn.hpp"

#include "mrsurv/core.hpp"
#include "mrsurv/errors.hpp"

#include <ostream>

namespace mrsurv {

StepSurvival::StepSurvival(double window_start, std::vector<double> jump_times, std::vector<double> values)
    : start_(window_start) {
    if (jump_times.size() != values.size())
        throw DomainError("StepSurvival: jump times and values differ in length");
    times_.reserve(jump_times.size());
    values_.reserve(values.size());
    double previous = 1.0;
    for (std::size_t i = 0; i < jump_times.size(); ++i) {
        const double t = jump_times[i];
        const double v = values[i];
        if (!(t > window_start)) throw DomainError("StepSurvival: jump time not after window start");
        if (!(v >= 0.0 && v <= 1.0)) throw DomainError("StepSurvival: value outside [0,1]");
        if (v > previous) throw DomainError("StepSurvival: values must be nonincreasing");
        if (!times_.empty() && t == times_.back()) {
            values_.back() = v;
        } else {
            if (!times_.empty() && t < times_.back())
                throw DomainError("StepSurvival: jump times must be increasing");
            times_.push_back(t);
            values_.push_back(v);
        }
        previous = v;
    }
}

void StepSurvival::check_domain(double t, bool strict) const {
    if (strict ? !(t > start_) : !(t >= start_))
        throw DomainError("StepSurvival: time " + format_double(t) + " precedes window start " +
                          format_double(start_));
}

double StepSurvival::eval(double t) const {
    check_domain(t, false);
    const std::size_t i = upper(t);
    return i == 0 ? 1.0 : values_[i - 1];
}

double StepSurvival::left_limit(double t) const {
    check_domain(t, true);
    const auto i = static_cast<std::size_t>(std::lower_bound(times_.begin(), times_.end(), t) - times_.begin());
    return i == 0 ? 1.0 : values_[i - 1];
}

void StepSurvival::write_csv(std::ostream& out) const {
    out << "time,value\n" << format_double(start_) << ",1\n";
    for (std::size_t i = 0; i < times_.size(); ++i)
        out << format_double(times_[i]) << ',' << format_double(values_[i]) << '\n';
}

double LeftLimitCursor::operator()(double t) {
    const auto times = curve_->jump_times();
    while (index_ < times.size() && times[index_] < t) ++index_;
    return index_ == 0 ? 1.0 : curve_->values()[index_ - 1];
}

}  // namespace mrsurv
