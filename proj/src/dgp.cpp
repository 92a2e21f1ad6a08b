#include "mrsurv/dgp.hpp"

#include "mrsurv/errors.hpp"

#include <cmath>

namespace mrsurv {

double WeibullLaw::survival(double t, double window_start, std::span<const double> history) const {
    if (cutoff && t >= *cutoff) return 0.0;
    const double local = t - window_start;
    if (local <= 0.0) return 1.0;
    return std::exp(-std::pow(local / scale(history), shape));
}

double WeibullLaw::quantile(double uniform, std::span<const double> history) const {
    return scale(history) * std::pow(-std::log(uniform), 1.0 / shape);
}

namespace {

// Flattened history layout: L11, L12, L13, L21, L22.
DgpSpec make_two_visit_trial(bool censored) {
    DgpSpec d;
    d.name = std::string(censored ? kTwoVisitTrial : kTwoVisitTrialUncensored);
    d.visit_times = {0.0, 30.0};
    d.schema.visit_columns = {{"L11", "L12", "L13"}, {"L21", "L22"}};
    d.horizon = 60.0;
    d.event_laws = {
        WeibullLaw{5.0, [](std::span<const double> h) { return 30.0 + 20.0 * h[1] + 2.0 * std::abs(h[0]) + h[2] * h[2]; }, std::nullopt},
        WeibullLaw{3.0, [](std::span<const double> h) { return 30.0 + 20.0 * h[4] + 2.0 * std::abs(h[3]) + h[2] * h[2]; }, std::nullopt},
    };
    if (censored) {
        d.censor_laws = {
            WeibullLaw{4.0, [](std::span<const double> h) { return 35.0 + 15.0 * h[1] + 0.5 * std::abs(h[0]) * h[1]; }, std::nullopt},
            WeibullLaw{4.0, [](std::span<const double> h) { return 35.0 + 15.0 * h[4] + 0.5 * std::abs(h[3]) * h[4]; }, 60.0},
        };
    } else {
        d.censor_laws = {std::nullopt, std::nullopt};
    }
    d.draw_covariates = [](std::size_t visit, std::span<const double>, Rng& rng) {
        if (visit == 0) {
            const double l11 = rng.normal();
            const double l12 = rng.bernoulli(0.5) ? 1.0 : 0.0;
            const double l13 = rng.normal();
            return std::vector<double>{l11, l12, l13};
        }
        const double l21 = rng.normal();
        const double l22 = rng.bernoulli(0.5) ? 1.0 : 0.0;
        return std::vector<double>{l21, l22};
    };
    return d;
}

}  // namespace

const DgpSpec& find_dgp(std::string_view name) {
    static const DgpSpec trial = make_two_visit_trial(true);
    static const DgpSpec uncensored = make_two_visit_trial(false);
    if (name == trial.name) return trial;
    if (name == uncensored.name) return uncensored;
    throw ConfigError("unknown data-generating mechanism '" + std::string(name) + "'");
}

std::vector<std::string> dgp_names() {
    return {std::string(kTwoVisitTrial), std::string(kTwoVisitTrialUncensored)};
}

}  // namespace mrsurv
