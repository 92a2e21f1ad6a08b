#include "mrsurv/verify.hpp"

#include "mrsurv/errors.hpp"
#include "mrsurv/pseudo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace mrsurv {

std::vector<DiscreteLaw::Outcome> DiscreteLaw::outcomes() const {
    std::vector<Outcome> out;
    out.reserve(2 * support.size() + 1);
    double s = 1.0;
    double g = 1.0;
    for (std::size_t j = 0; j < support.size(); ++j) {
        out.push_back({support[j], true, s * g * event_hazard[j]});
        out.push_back({support[j], false, s * (1.0 - event_hazard[j]) * g * censor_hazard[j]});
        s *= 1.0 - event_hazard[j];
        g *= 1.0 - censor_hazard[j];
    }
    out.push_back({end, false, s * g});
    return out;
}

StepSurvival curve_from_hazards(double start, const std::vector<double>& support, const std::vector<double>& hazards) {
    std::vector<double> values(support.size());
    double s = 1.0;
    for (std::size_t j = 0; j < support.size(); ++j) {
        s *= 1.0 - hazards[j];
        values[j] = s;
    }
    return StepSurvival(start, support, std::move(values));
}

StepSurvival DiscreteLaw::event_curve() const { return curve_from_hazards(start, support, event_hazard); }
StepSurvival DiscreteLaw::censor_curve() const { return curve_from_hazards(start, support, censor_hazard); }

std::vector<double> random_hazards(Rng& rng, std::size_t count) {
    std::vector<double> h(count);
    for (double& x : h) x = 0.05 + 0.9 * rng.uniform();
    return h;
}

DiscreteLaw random_law(Rng& rng, double start, double end, std::size_t max_support) {
    DiscreteLaw law;
    law.start = start;
    law.end = end;
    const std::size_t J = 1 + static_cast<std::size_t>(rng.below(max_support));
    while (law.support.size() < J) {
        const double t = start + (end - start) * rng.uniform();
        if (t > start && t < end && std::find(law.support.begin(), law.support.end(), t) == law.support.end())
            law.support.push_back(t);
    }
    std::sort(law.support.begin(), law.support.end());
    law.event_hazard = random_hazards(rng, J);
    law.censor_hazard = random_hazards(rng, J);
    return law;
}

double remainder_closed_form(const std::vector<double>& support, const StepSurvival& s_true,
                             const StepSurvival& s_hat, const StepSurvival& g_true, const StepSurvival& g_hat,
                             double t_bar) {
    double total = 0.0;
    double prev = s_true.window_start();
    for (double t : support) {
        if (t > t_bar) break;
        const double gh = g_hat.eval(prev);
        const double sh = s_hat.eval(t);
        if (!(gh > 0.0) || !(sh > 0.0)) throw DomainError("remainder_closed_form: zero denominator at t=" + format_double(t));
        const double lambda_hat = 1.0 - sh / s_hat.eval(prev);
        const double lambda_true = 1.0 - s_true.eval(t) / s_true.eval(prev);
        total += (g_true.eval(prev) - gh) / gh * s_true.eval(prev) * (lambda_hat - lambda_true) / sh;
        prev = t;
    }
    return s_hat.eval(t_bar) * total;
}

HazardSurvivalReport hazard_survival_equivalence(const std::vector<double>& support, const StepSurvival& s_hat,
                                                 const StepSurvival& s_true, double t_bar) {
    HazardSurvivalReport r;
    double prev = s_true.window_start();
    for (double t : support) {
        if (t > t_bar) break;
        ++r.grid_points;
        r.sup_survival = std::max(r.sup_survival, std::abs(s_hat.eval(t) - s_true.eval(t)));
        const double lh = 1.0 - s_hat.eval(t) / s_hat.eval(prev);
        const double lt = 1.0 - s_true.eval(t) / s_true.eval(prev);
        r.sup_hazard = std::max(r.sup_hazard, std::abs(lh - lt));
        prev = t;
    }
    r.ratio = r.sup_hazard > 0.0 ? r.sup_survival / r.sup_hazard : 0.0;
    const double slack = 1e-12;
    r.survival_bounded = r.sup_survival <= static_cast<double>(r.grid_points) * r.sup_hazard + slack;
    r.hazard_bounded = r.sup_hazard <= 2.0 * r.sup_survival / s_true.eval(t_bar) + slack;
    return r;
}

double TwoWindowLaw::truth() const {
    const double s1 = first.event_curve().eval(first.end);
    return s1 * ((1.0 - p_l2) * second[0].event_curve().eval(tau) + p_l2 * second[1].event_curve().eval(tau));
}

TwoWindowLaw random_two_window_law(Rng& rng) {
    TwoWindowLaw law;
    law.first = random_law(rng, 0.0, 1.0);
    law.p_l2 = 0.1 + 0.8 * rng.uniform();
    law.second[0] = random_law(rng, 1.0, 2.0);
    law.second[1] = random_law(rng, 1.0, 2.0);
    law.tau = 1.0 + rng.uniform();
    return law;
}

namespace {

double mean_mr(const DiscreteLaw& law, const StepSurvival& S, const StepSurvival& G, double t_bar) {
    return enumerate_expectation(law, [&](double x, bool d) { return pseudo_mr(S, G, x, d, t_bar); });
}

struct Nuisance {
    StepSurvival s;
    StepSurvival g;
    bool s_true;
    bool g_true;
};

std::vector<Nuisance> choices(const DiscreteLaw& law, Rng& rng, bool include_both_wrong) {
    const StepSurvival s_true = law.event_curve();
    const StepSurvival g_true = law.censor_curve();
    const StepSurvival s_hat = curve_from_hazards(law.start, law.support, random_hazards(rng, law.support.size()));
    const StepSurvival g_hat = curve_from_hazards(law.start, law.support, random_hazards(rng, law.support.size()));
    std::vector<Nuisance> out{{s_true, g_hat, true, false}, {s_hat, g_true, false, true}, {s_true, g_true, true, true}};
    if (include_both_wrong) out.push_back({s_hat, g_hat, false, false});
    return out;
}

std::string label(const Nuisance& n, int window) {
    const std::string k = std::to_string(window);
    return "S" + k + (n.s_true ? "*" : "") + " G" + k + (n.g_true ? "*" : "");
}

}  // namespace

std::vector<RobustnessCase> robustness_patterns(const TwoWindowLaw& law, Rng& rng) {
    const double truth = law.truth();
    const auto w1 = choices(law.first, rng, true);
    const auto w2a = choices(law.second[0], rng, false);
    const auto w2b = choices(law.second[1], rng, false);
    std::vector<RobustnessCase> out;
    auto evaluate = [&](const Nuisance& a, std::size_t b) {
        const double q1 = mean_mr(law.first, a.s, a.g, law.first.end);
        const double q2 = (1.0 - law.p_l2) * mean_mr(law.second[0], w2a[b].s, w2a[b].g, law.tau) +
                          law.p_l2 * mean_mr(law.second[1], w2b[b].s, w2b[b].g, law.tau);
        RobustnessCase c;
        c.pattern = label(a, 1) + " | " + label(w2a[b], 2);
        c.product = q1 * q2;
        c.truth = truth;
        c.error = std::abs(c.product - truth);
        return c;
    };
    for (std::size_t a = 0; a < 3; ++a) {
        for (std::size_t b = 0; b < 3; ++b) out.push_back(evaluate(w1[a], b));
    }
    out.push_back(evaluate(w1[3], 2));
    return out;
}

bool IdentitySuite::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const IdentityCheck& c) { return c.passed; });
}

IdentitySuite run_identity_suite(std::size_t laws, std::uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    const double tol = 1e-12;
    IdentityCheck total{"outcome probabilities sum to one", 0, 0.0, tol};
    IdentityCheck ipcw_rep{"IPCW representation 1 - E[1(X<=t)D/G*(X-)] = S*(t)", 0, 0.0, tol};
    IdentityCheck dr_s{"DR transform with true S: E[T(S*, G)] = 0", 0, 0.0, tol};
    IdentityCheck dr_g{"DR transform with true G: E[T(S, G*)] = S*(t) - S(t)", 0, 0.0, tol};
    IdentityCheck remainder{"closed-form remainder = E[Y_MR] - S*(t)", 0, 0.0, tol};
    IdentityCheck unit{"IPCW pseudo-outcome = MR with unit S (rowwise, exact)", 0, 0.0, 0.0};
    IdentityCheck hazard{"hazard/survival sup-difference bounds (excess)", 0, 0.0, 0.0};
    IdentityCheck robust{"two-window MR product = Q* under 9 robust patterns", 0, 0.0, tol};
    IdentityCheck control{"negative control: both window-1 nuisances wrong (median deviation)", 0, 0.0, 1e-6, true};
    std::vector<double> control_errors;

    Rng rng(seed);
    for (std::size_t i = 0; i < laws; ++i) {
        const DiscreteLaw law = random_law(rng, 0.0, 1.0);
        const double t_bar = rng.bernoulli(0.5) ? law.support[rng.below(law.support.size())] : rng.uniform();
        const StepSurvival s_true = law.event_curve();
        const StepSurvival g_true = law.censor_curve();
        const StepSurvival s_hat = curve_from_hazards(0.0, law.support, random_hazards(rng, law.support.size()));
        const StepSurvival g_hat = curve_from_hazards(0.0, law.support, random_hazards(rng, law.support.size()));

        auto bump = [](IdentityCheck& c, double err) {
            ++c.cases;
            c.value = std::max(c.value, err);
        };
        bump(total, std::abs(enumerate_expectation(law, [](double, bool) { return 1.0; }) - 1.0));
        const double weighted = enumerate_expectation(
            law, [&](double x, bool d) { return (x <= t_bar && d) ? 1.0 / g_true.left_limit(x) : 0.0; });
        bump(ipcw_rep, std::abs(1.0 - weighted - s_true.eval(t_bar)));
        bump(dr_s, std::abs(enumerate_expectation(
                       law, [&](double x, bool d) { return dr_transform(s_true, g_hat, x, d, t_bar); })));
        const double e_g = enumerate_expectation(law, [&](double x, bool d) { return dr_transform(s_hat, g_true, x, d, t_bar); });
        bump(dr_g, std::abs(e_g - (s_true.eval(t_bar) - s_hat.eval(t_bar))));
        const double r = remainder_closed_form(law.support, s_true, s_hat, g_true, g_hat, t_bar);
        bump(remainder, std::abs(mean_mr(law, s_hat, g_hat, t_bar) - s_true.eval(t_bar) - r));

        const StepSurvival unit_law(law.start);
        for (const auto& o : law.outcomes()) {
            const double a = pseudo_ipcw(g_hat, o.x, o.delta, t_bar);
            const double b = pseudo_mr(unit_law, g_hat, o.x, o.delta, t_bar);
            bump(unit, a == b ? 0.0 : std::abs(a - b) + std::numeric_limits<double>::denorm_min());
        }

        const auto h = hazard_survival_equivalence(law.support, s_hat, s_true, t_bar);
        double excess = std::max(0.0, h.sup_survival - static_cast<double>(h.grid_points) * h.sup_hazard);
        excess = std::max(excess, h.sup_hazard - 2.0 * h.sup_survival / s_true.eval(t_bar));
        bump(hazard, excess);

        const TwoWindowLaw two = random_two_window_law(rng);
        const auto cases = robustness_patterns(two, rng);
        for (std::size_t c = 0; c + 1 < cases.size(); ++c) bump(robust, cases[c].error);
        control_errors.push_back(cases.back().error);
    }
    if (!control_errors.empty()) {
        auto mid = control_errors.begin() + static_cast<std::ptrdiff_t>(control_errors.size() / 2);
        std::nth_element(control_errors.begin(), mid, control_errors.end());
        control.value = *mid;
        control.cases = control_errors.size();
    }
    IdentitySuite suite;
    suite.checks = {total, ipcw_rep, dr_s, dr_g, remainder, unit, hazard, robust, control};
    for (auto& c : suite.checks) c.passed = c.negative_control ? c.value > c.tolerance : c.value <= c.tolerance;
    suite.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return suite;
}

void print_identity_table(std::ostream& out, const IdentitySuite& suite) {
    char buf[256];
    for (const auto& c : suite.checks) {
        std::snprintf(buf, sizeof buf, "%-4s %-68s cases=%-6zu %s=%.3e %s %.0e\n", c.passed ? "PASS" : "FAIL",
                      c.name.c_str(), c.cases, c.negative_control ? "median" : "max", c.value,
                      c.negative_control ? ">" : "<=", c.tolerance);
        out << buf;
    }
}

}  // namespace mrsurv
