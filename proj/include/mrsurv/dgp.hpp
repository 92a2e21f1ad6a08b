#pragma once

#include "mrsurv/core.hpp"
#include "mrsurv/rng.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mrsurv {

/// Weibull law of the time spent in one window, as a function of history.
struct WeibullLaw {
    double shape = 1.0;
    std::function<double(std::span<const double>)> scale;
    /// Absolute administrative end: the time is truncated there and the
    /// survival curve drops to zero at the cutoff.
    std::optional<double> cutoff;

    /// P(time > t | H_k = history, at risk at t_k) for absolute t >= window_start.
    double survival(double t, double window_start, std::span<const double> history) const;
    /// Window-local draw from a uniform by inverse transform (before truncation).
    double quantile(double uniform, std::span<const double> history) const;
};

/// A named data-generating mechanism with K visits and one event and one
/// censoring law per window. Covariates at a visit are drawn independently of
/// event and censoring times given the earlier history.
struct DgpSpec {
    std::string name;
    std::vector<double> visit_times;
    CovariateSchema schema;
    /// Administrative end of follow-up (also the default evaluation time).
    double horizon = 0.0;
    std::vector<WeibullLaw> event_laws;
    /// nullopt: no censoring in that window.
    std::vector<std::optional<WeibullLaw>> censor_laws;
    /// Draws L_k given the flattened history of earlier visits. Must consume a
    /// fixed number of uniforms per call.
    std::function<std::vector<double>(std::size_t visit, std::span<const double> history, Rng&)> draw_covariates;

    std::size_t num_visits() const noexcept { return visit_times.size(); }
};

/// Two visits at days 0 and 30, evaluation at day 60. Baseline L11 ~ N(0,1),
/// L12 ~ Bernoulli(0.5) (treatment arm), L13 ~ N(0,1); day-30 L21 ~ N(0,1),
/// L22 ~ Bernoulli(0.5). Window times:
///   T1 ~ Weibull(5, 30 + 20 L12 + 2|L11| + L13^2) ∧ 30
///   C1 ~ Weibull(4, 35 + 15 L12 + 0.5 |L11| L12) ∧ 30
///   T2 ~ Weibull(3, 30 + 20 L22 + 2|L21| + L13^2)
///   C2 ~ Weibull(4, 35 + 15 L22 + 0.5 |L21| L22) ∧ 30
inline constexpr std::string_view kTwoVisitTrial = "two_visit_trial";
/// Same event laws without any censoring.
inline constexpr std::string_view kTwoVisitTrialUncensored = "two_visit_trial_uncensored";

/// Throws ConfigError for an unknown name.
const DgpSpec& find_dgp(std::string_view name);
std::vector<std::string> dgp_names();

}  // namespace mrsurv
