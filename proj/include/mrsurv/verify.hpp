#pragma once

#include "mrsurv/rng.hpp"
#include "mrsurv/stepfn.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace mrsurv {

/// Event and censoring times on a finite grid inside (start, end). Given
/// survival to t^{j-1}, the event occurs at t^j with probability
/// event_hazard[j] and censoring with censor_hazard[j]; a tie is an event.
/// Subjects outliving the grid leave the window at `end` uncensored.
struct DiscreteLaw {
    double start = 0.0;
    double end = 1.0;
    std::vector<double> support;
    std::vector<double> event_hazard;
    std::vector<double> censor_hazard;

    struct Outcome {
        double x;
        bool delta;
        double prob;
    };
    /// Every (x, δ) with its exact probability; 2J + 1 outcomes.
    std::vector<Outcome> outcomes() const;
    StepSurvival event_curve() const;
    StepSurvival censor_curve() const;
};

/// Product-limit curve with hazard h[j] at support[j].
StepSurvival curve_from_hazards(double start, const std::vector<double>& support, const std::vector<double>& hazards);
/// Independent uniform hazards in [0.05, 0.95].
std::vector<double> random_hazards(Rng& rng, std::size_t count);
/// 1..max_support sorted distinct grid points inside (start, end).
DiscreteLaw random_law(Rng& rng, double start, double end, std::size_t max_support = 6);

template <class F>
double enumerate_expectation(const DiscreteLaw& law, F&& functional) {
    double total = 0.0;
    for (const auto& o : law.outcomes()) total += o.prob * functional(o.x, o.delta);
    return total;
}

/// Discrete mixed-bias remainder
///   Ŝ(t̄) Σ_{t^j <= t̄} [(G* - Ĝ)/Ĝ](t^{j-1}) S*(t^{j-1}) (λ̂_j - λ*_j) / Ŝ(t^j),
/// which equals E[Y^MR(Ŝ, Ĝ)] - S*(t̄). All curves jump only on `support`.
double remainder_closed_form(const std::vector<double>& support, const StepSurvival& s_true,
                             const StepSurvival& s_hat, const StepSurvival& g_true, const StepSurvival& g_hat,
                             double t_bar);

struct HazardSurvivalReport {
    double sup_survival = 0.0;  // max_j |Ŝ(t^j) - S*(t^j)| over t^j <= t̄
    double sup_hazard = 0.0;    // max_j |λ̂_j - λ*_j| over t^j <= t̄
    double ratio = 0.0;         // sup_survival / sup_hazard, 0 when both vanish
    std::size_t grid_points = 0;
    bool survival_bounded = true;  // sup_survival <= J sup_hazard
    bool hazard_bounded = true;    // sup_hazard <= 2 sup_survival / S*(t̄)
};
HazardSurvivalReport hazard_survival_equivalence(const std::vector<double>& support, const StepSurvival& s_hat,
                                                 const StepSurvival& s_true, double t_bar);

/// Two windows conditional on a fixed W. L2 is Bernoulli(p_l2) and
/// independent of the window-1 times; window 2 has one law per L2 value.
struct TwoWindowLaw {
    DiscreteLaw first;
    double p_l2 = 0.5;
    DiscreteLaw second[2];
    double tau = 0.0;

    double truth() const;
};
TwoWindowLaw random_two_window_law(Rng& rng);

struct RobustnessCase {
    std::string pattern;  // e.g. "S1 G1* | S2* G2"; a star marks a true nuisance
    double product = 0.0;
    double truth = 0.0;
    double error = 0.0;
};
/// Population value of the MR product under every assignment with at least
/// one true nuisance per window, plus the pattern with both window-1
/// nuisances perturbed as a negative control (last entry).
std::vector<RobustnessCase> robustness_patterns(const TwoWindowLaw& law, Rng& rng);

/// For identities `value` is the largest absolute error and must not exceed
/// `tolerance`; for a negative control it is the median deviation and must
/// exceed it.
struct IdentityCheck {
    std::string name;
    std::size_t cases = 0;
    double value = 0.0;
    double tolerance = 0.0;
    bool negative_control = false;
    bool passed = false;
};

struct IdentitySuite {
    std::vector<IdentityCheck> checks;
    double seconds = 0.0;
    bool passed() const;
};

/// Runs every identity over `laws` random discrete laws.
IdentitySuite run_identity_suite(std::size_t laws, std::uint64_t seed);
void print_identity_table(std::ostream& out, const IdentitySuite& suite);

}  // namespace mrsurv
