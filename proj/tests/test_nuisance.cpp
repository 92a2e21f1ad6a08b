#include "mrsurv/dgp.hpp"
#include "mrsurv/errors.hpp"
#include "mrsurv/nuisance.hpp"
#include "mrsurv/rng.hpp"
#include "mrsurv/simulate.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace mrsurv;

namespace {

WindowData bare(std::vector<double> t, std::vector<char> f, double end = 10.0) {
    WindowData d;
    d.start = 0.0;
    d.end = end;
    for (std::size_t i = 0; i < t.size(); ++i) d.push({}, t[i], f[i] != 0, 1.0);
    return d;
}

WindowData one_covariate(const std::vector<double>& t, const std::vector<char>& f, const std::vector<double>& z) {
    WindowData d;
    d.start = 0.0;
    d.end = 10.0;
    d.history_dim = 1;
    for (std::size_t i = 0; i < t.size(); ++i) d.push(std::span<const double>(&z[i], 1), t[i], f[i] != 0, 1.0);
    return d;
}

std::vector<FeatureTerm> raw_terms(std::size_t p) {
    std::vector<FeatureTerm> out(p);
    for (std::size_t j = 0; j < p; ++j) {
        out[j].column = j;
        out[j].label = "x" + std::to_string(j);
    }
    return out;
}

// Breslow partial likelihood written out directly: for each distinct event
// time, sum over events of z'b minus d * log of the risk-set sum.
double brute_loglik(const std::vector<double>& t, const std::vector<char>& f, const std::vector<double>& z, double b) {
    double ll = 0.0;
    std::vector<double> done;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!f[i] || std::find(done.begin(), done.end(), t[i]) != done.end()) continue;
        done.push_back(t[i]);
        double d = 0.0, risk = 0.0;
        for (std::size_t j = 0; j < t.size(); ++j) {
            if (t[j] == t[i] && f[j]) {
                d += 1.0;
                ll += z[j] * b;
            }
            if (t[j] >= t[i]) risk += std::exp(z[j] * b);
        }
        ll -= d * std::log(risk);
    }
    return ll;
}

double brute_score(const std::vector<double>& t, const std::vector<char>& f, const std::vector<double>& z, double b) {
    double u = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!f[i]) continue;
        double s0 = 0.0, s1 = 0.0;
        for (std::size_t j = 0; j < t.size(); ++j) {
            if (t[j] >= t[i]) {
                s0 += std::exp(z[j] * b);
                s1 += z[j] * std::exp(z[j] * b);
            }
        }
        u += z[i] - s1 / s0;
    }
    return u;
}

void check_curve(const StepSurvival& s, double start, double horizon) {
    CHECK(s.window_start() == start);
    CHECK(s.eval(start) == 1.0);
    double prev = 1.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(s.jump_times()[i] > start);
        CHECK(s.jump_times()[i] <= horizon);
        CHECK(s.values()[i] <= prev);
        CHECK(s.values()[i] >= 0.0);
        prev = s.values()[i];
    }
}

WindowData first_window(const Dataset& data, bool censor_flag) {
    WindowData d;
    d.start = 0.0;
    d.end = 30.0;
    d.history_dim = 3;
    for (const auto& r : data.records) {
        const bool inside = r.followup <= 30.0;
        const bool flag = censor_flag ? inside && !r.event : inside && r.event;
        d.push(*r.covariates[0], std::min(r.followup, 30.0), flag, 1.0);
    }
    return d;
}

}  // namespace

TEST_CASE("Kaplan-Meier hand example") {
    const auto s = kaplan_meier(bare({1, 2, 3, 3}, {1, 0, 1, 0}));
    CHECK(s.eval(1.0) == 0.75);
    CHECK(s.eval(2.5) == 0.75);
    CHECK(s.eval(3.0) == 0.375);
    CHECK(s.size() == 2);
}

TEST_CASE("Kaplan-Meier edge cases") {
    CHECK(kaplan_meier(bare({1, 2, 3}, {0, 0, 0})).size() == 0);
    const auto tied = kaplan_meier(bare({2, 2, 2, 5, 6}, {1, 1, 1, 0, 0}));
    CHECK(tied.eval(2.0) == 1.0 - 3.0 / 5.0);
    CHECK_THROWS_AS(kaplan_meier(bare({}, {})), FitError);
}

TEST_CASE("Kaplan-Meier without censoring is the empirical survival function") {
    Rng rng(9);
    std::vector<double> t(500);
    for (auto& x : t) x = std::ceil(rng.weibull(1.5, 4.0) * 4.0) / 4.0;  // heavy ties
    const auto s = kaplan_meier(bare(t, std::vector<char>(t.size(), 1), 1e9));
    for (double q = 0.0; q < 20.0; q += 0.125) {
        const double frac = static_cast<double>(std::count_if(t.begin(), t.end(), [&](double x) { return x > q; })) /
                            static_cast<double>(t.size());
        CHECK(s.eval(q) == doctest::Approx(frac).epsilon(1e-14));
    }
}

TEST_CASE("Cox matches an independent optimizer on five rows with a tie") {
    const std::vector<double> t{1, 2, 2, 3, 4};
    const std::vector<char> f{1, 1, 1, 0, 1};
    const std::vector<double> z{0.5, -1.0, 0.3, 1.2, -0.4};
    double lo = -20.0, hi = 20.0;
    REQUIRE(brute_score(t, f, z, lo) > 0.0);
    REQUIRE(brute_score(t, f, z, hi) < 0.0);
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (brute_score(t, f, z, mid) > 0.0 ? lo : hi) = mid;
    }
    const double b_ref = 0.5 * (lo + hi);
    const auto fit = fit_cox_breslow(one_covariate(t, f, z), raw_terms(1));
    CHECK(std::abs(fit->beta()(0) - b_ref) < 1e-8);
    const auto design = make_cox_design(one_covariate(t, f, z), raw_terms(1));
    const Eigen::VectorXd b = Eigen::VectorXd::Constant(1, b_ref);
    CHECK(cox_derivatives(design, b).loglik == doctest::Approx(brute_loglik(t, f, z, b_ref)).epsilon(1e-12));
}

TEST_CASE("Cox score and information agree with finite differences") {
    const auto& dgp = find_dgp(kTwoVisitTrial);
    const WindowData d = first_window(generate(dgp, 400, 21), false);
    const auto design = make_cox_design(d, raw_terms(3));
    Rng rng(4);
    const double h = 1e-5;
    for (int rep = 0; rep < 20; ++rep) {
        Eigen::VectorXd b(3);
        for (int j = 0; j < 3; ++j) b(j) = rng.uniform() * 2.0 - 1.0;
        const auto at = cox_derivatives(design, b);
        for (int j = 0; j < 3; ++j) {
            Eigen::VectorXd up = b, dn = b;
            up(j) += h;
            dn(j) -= h;
            const auto du = cox_derivatives(design, up);
            const auto dd = cox_derivatives(design, dn);
            const double fd = (du.loglik - dd.loglik) / (2.0 * h);
            CHECK(std::abs(fd - at.score(j)) <= 1e-6 * std::max(1.0, std::abs(at.score(j))));
            for (int k = 0; k < 3; ++k) {
                const double fd2 = -(du.score(k) - dd.score(k)) / (2.0 * h);
                CHECK(std::abs(fd2 - at.information(j, k)) <= 1e-6 * std::max(1.0, std::abs(at.information(j, k))));
            }
        }
    }
}

TEST_CASE("Cox with constant covariates gives the Nelson-Aalen baseline") {
    const std::vector<double> t{1, 2, 2, 3, 5, 6};
    const std::vector<char> f{1, 1, 0, 1, 0, 1};
    const std::vector<double> z(6, 2.0);
    const auto fit = fit_cox_breslow(one_covariate(t, f, z), raw_terms(1));
    CHECK(fit->beta()(0) == 0.0);
    const double na[] = {1.0 / 6.0, 1.0 / 6.0 + 1.0 / 5.0, 1.0 / 6.0 + 1.0 / 5.0 + 1.0 / 3.0,
                         1.0 / 6.0 + 1.0 / 5.0 + 1.0 / 3.0 + 1.0};
    const double at[] = {1.0, 2.0, 3.0, 6.0};
    const double h = 2.0;
    const auto curve = fit->predict(std::span<const double>(&h, 1), 10.0);
    for (int i = 0; i < 4; ++i) {
        CHECK(fit->baseline().eval(at[i]) == doctest::Approx(std::exp(-na[i])).epsilon(1e-14));
        CHECK(curve.eval(at[i]) == doctest::Approx(std::exp(-na[i])).epsilon(1e-14));
    }
}

TEST_CASE("Cox with beta = 0 injected equals the Breslow baseline") {
    const auto& dgp = find_dgp(kTwoVisitTrial);
    const WindowData d = first_window(generate(dgp, 300, 5), false);
    const CoxBreslowModel model(d, raw_terms(3), Eigen::VectorXd::Zero(3));
    for (std::size_t i = 0; i < 20; ++i) {
        const auto curve = model.predict(d.row(i), 30.0);
        REQUIRE(curve.size() == model.baseline().size());
        for (std::size_t j = 0; j < curve.size(); ++j) CHECK(curve.values()[j] == model.baseline().values()[j]);
    }
}

TEST_CASE("Cox without events is the unit curve") {
    const auto fit = fit_cox_breslow(one_covariate({1, 2, 3}, {0, 0, 0}, {0.1, 0.5, 0.2}), raw_terms(1));
    CHECK(fit->beta()(0) == 0.0);
    const double h = 0.3;
    CHECK(fit->predict(std::span<const double>(&h, 1), 10.0).size() == 0);
}

TEST_CASE("Cox reports a monotone likelihood") {
    // Larger z always fails first: the MLE is at infinity.
    const auto data = one_covariate({1, 2, 3, 4}, {1, 1, 1, 1}, {3.0, 2.0, 1.0, 0.0});
    CHECK_THROWS_AS(fit_cox_breslow(data, raw_terms(1)), FitError);
}

TEST_CASE("feature maps") {
    const CovariateSchema schema{{{"L11", "L12", "L13"}, {"L21", "L22"}}};
    const auto all1 = build_feature_map({}, schema, 0);
    CHECK(all1.size() == 3);
    CHECK(build_feature_map({}, schema, 1).size() == 5);
    const auto terms = build_feature_map({"abs(L11)", "L13^2", "L21"}, schema, 0);
    REQUIRE(terms.size() == 2);
    const std::vector<double> h{-1.5, 1.0, 3.0};
    CHECK(terms[0].apply(h) == 1.5);
    CHECK(terms[1].apply(h) == 9.0);
    CHECK_THROWS_AS(build_feature_map({"L99"}, schema, 0), ConfigError);
    CHECK_THROWS_AS(build_feature_map({"L11^4"}, schema, 0), ConfigError);
}

TEST_CASE("oracle curves agree with simulated draws at a fixed history") {
    const auto& dgp = find_dgp(kTwoVisitTrial);
    const std::vector<double> h1{0.5, 1.0, -0.3};
    const std::vector<double> h2{0.5, 1.0, -0.3, -1.2, 0.0};
    struct Case {
        std::size_t window;
        NuisanceRole role;
        const WeibullLaw* law;
        std::vector<double> h;
        std::vector<double> grid;
    };
    const Case cases[] = {
        {0, NuisanceRole::Event, &dgp.event_laws[0], h1, {10, 20, 25, 28, 29.5}},
        {0, NuisanceRole::Censor, &*dgp.censor_laws[0], h1, {10, 20, 25, 28, 29.5}},
        {1, NuisanceRole::Event, &dgp.event_laws[1], h2, {35, 40, 45, 50, 55}},
        {1, NuisanceRole::Censor, &*dgp.censor_laws[1], h2, {45, 50, 55, 58, 59}},
    };
    for (const auto& c : cases) {
        WindowData grid;
        grid.window = c.window;
        grid.start = dgp.visit_times[c.window];
        grid.end = c.window == 0 ? 30.0 : 60.0;
        grid.history_dim = c.h.size();
        for (double g : c.grid) grid.push(c.h, g, true, 1.0);
        const auto curve = fit_oracle(dgp, grid, c.role)->predict(c.h, grid.end);
        Rng rng(derive_seed(2024, c.window * 2 + (c.role == NuisanceRole::Censor)));
        const int m = 100000;
        std::vector<double> draws(m);
        for (auto& x : draws) x = grid.start + c.law->quantile(rng.uniform(), c.h);
        for (double g : c.grid) {
            const double p = curve.eval(g);
            const double emp =
                static_cast<double>(std::count_if(draws.begin(), draws.end(), [&](double x) { return x > g; })) / m;
            const double se = std::sqrt(std::max(p * (1.0 - p), 1e-12) / m);
            CHECK(std::abs(emp - p) <= 3.0 * se + 1e-12);
        }
    }
}

TEST_CASE("every model predicts valid curves for 100 histories") {
    const auto& dgp = find_dgp(kTwoVisitTrial);
    const Dataset data = generate(dgp, 600, 31);
    const WindowData ev = first_window(data, false);
    const WindowData ce = first_window(data, true);
    const auto features = build_feature_map({}, dgp.schema, 0);
    const ModelPtr models[] = {
        fit_km(ev),
        fit_cox_breslow(ev, features),
        fit_cox_breslow(ce, features),
        fit_oracle(dgp, ev, NuisanceRole::Event),
        fit_oracle(dgp, ce, NuisanceRole::Censor),
        std::make_shared<UnitModel>(0.0),
    };
    Rng rng(8);
    for (const auto& m : models) {
        for (int i = 0; i < 100; ++i) {
            const std::vector<double> h{rng.normal(), rng.bernoulli(0.5) ? 1.0 : 0.0, rng.normal()};
            check_curve(m->predict(h, 30.0), 0.0, 30.0);
        }
    }
}

TEST_CASE("oracle censoring without a law is the unit curve") {
    const auto& dgp = find_dgp(kTwoVisitTrialUncensored);
    const Dataset data = generate(dgp, 50, 1);
    const auto g = fit_oracle(dgp, first_window(data, true), NuisanceRole::Censor);
    CHECK(g->predict(*data.records[0].covariates[0], 30.0).size() == 0);
}

TEST_CASE("model names") {
    CHECK(parse_model_choice("km").kind == ModelChoice::Kind::KaplanMeier);
    CHECK(parse_model_choice("cox").kind == ModelChoice::Kind::Cox);
    CHECK(parse_model_choice("unit").kind == ModelChoice::Kind::Unit);
    const auto o = parse_model_choice("oracle:two_visit_trial");
    CHECK(o.kind == ModelChoice::Kind::Oracle);
    CHECK(o.dgp == "two_visit_trial");
    CHECK(o.name() == "oracle:two_visit_trial");
    CHECK_THROWS_AS(parse_model_choice("forest"), ConfigError);
    CHECK_THROWS_AS(parse_model_choice("oracle:nope"), ConfigError);
}
