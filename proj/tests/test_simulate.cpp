#include "mrsurv/core.hpp"
#include "mrsurv/dgp.hpp"
#include "mrsurv/errors.hpp"
#include "mrsurv/simulate.hpp"

#include <doctest.h>
#include <omp.h>

#include <cmath>
#include <sstream>

using namespace mrsurv;

namespace {

// P(T > tau) for the two-visit trial by adaptive quadrature over the
// covariates (scipy.integrate.quad, symmetric in L11 and L21).
constexpr double kTruth40 = 0.7119942767768104;
constexpr double kTruth60 = 0.46682526904544513;
// P(uncapped C < T) from two million draws of an independent Python
// implementation of the same mechanism (SE 0.00035).
constexpr double kLatentCensoring = 0.4833;

std::string bytes(const Dataset& d) {
    std::ostringstream out;
    write_dataset(out, d);
    return out.str();
}

}  // namespace

TEST_CASE("generated records satisfy the presence invariant") {
    const auto& dgp = find_dgp(kTwoVisitTrial);
    const VisitSchedule schedule(dgp.visit_times, 0, {60.0});
    const auto g = generate_with_latent(dgp, 5000, 1);
    for (std::size_t i = 0; i < g.data.size(); ++i) {
        const auto& r = g.data.records[i];
        CHECK_NOTHROW(validate_record(r, schedule, dgp.schema));
        const auto& z = g.latent[i];
        CHECK(r.followup == std::min(z.event_time, z.censor_time));
        CHECK(r.event == (z.event_time <= z.censor_time));
        CHECK(r.followup <= 60.0);
    }
}

TEST_CASE("window-one draws are truncated at the second visit") {
    const auto& dgp = find_dgp(kTwoVisitTrial);
    const std::uint64_t seed = 17;
    const auto g = generate_with_latent(dgp, 5000, seed);
    for (std::size_t i = 0; i < g.latent.size(); ++i) {
        Rng rng(derive_seed(seed, i));
        const auto l1 = dgp.draw_covariates(0, {}, rng);
        const double first = dgp.event_laws[0].quantile(rng.uniform(), l1);
        const double t = g.latent[i].event_time;
        if (first < 30.0) {
            CHECK(t == first);
        } else {
            CHECK(t > 30.0);
        }
    }
}

TEST_CASE("latent censoring fraction") {
    const auto& dgp = find_dgp(kTwoVisitTrial);
    const auto g = generate_with_latent(dgp, 100000, 3);
    double censored = 0.0;
    for (const auto& z : g.latent) censored += z.censor_uncapped < z.event_time ? 1.0 : 0.0;
    CHECK(std::abs(censored / 1e5 - kLatentCensoring) < 0.01);
}

TEST_CASE("empirical survival at day 60 without censoring") {
    const auto& dgp = find_dgp(kTwoVisitTrialUncensored);
    const Dataset d = generate(dgp, 1000000, 4);
    double beyond = 0.0;
    std::size_t events = 0;
    for (const auto& r : d.records) {
        events += r.event ? 1 : 0;
        beyond += r.followup > 60.0 ? 1.0 : 0.0;
    }
    CHECK(events == d.size());
    const double p = beyond / 1e6;
    CHECK(std::abs(p - kTruth60) < 3.0 * std::sqrt(p * (1.0 - p) / 1e6));
    // the published value is reported to two decimals
    CHECK(std::round(p * 100.0) / 100.0 == 0.47);
}

TEST_CASE("Monte Carlo marginal truth") {
    const auto& dgp = find_dgp(kTwoVisitTrial);
    const auto t60 = truth_marginal(dgp, 60.0, 1000000, 5);
    CHECK(std::abs(t60.value - kTruth60) < 3.0 * t60.se);
    CHECK(std::round(t60.value * 100.0) / 100.0 == 0.47);
    const auto t40 = truth_marginal(dgp, 40.0, 200000, 5);
    CHECK(std::abs(t40.value - kTruth40) < 3.0 * t40.se);
    CHECK(truth_marginal(dgp, 0.0, 1000, 5).value == 1.0);
    double prev = 1.0;
    for (double tau = 0.0; tau <= 90.0; tau += 7.5) {
        const double v = truth_marginal(dgp, tau, 20000, 6).value;
        CHECK(v <= prev);
        prev = v;
    }
}

TEST_CASE("conditional truth") {
    const auto& dgp = find_dgp(kTwoVisitTrial);
    const std::vector<std::vector<double>> h{{0.3, 0.0, 0.5}, {0.3, 1.0, 0.5}, {-1.2, 1.0, 0.0}};
    const auto q = truth_conditional(dgp, 0, h, 60.0, 20000, 1);
    CHECK(q[1] > q[0]);

    const auto early = truth_conditional(dgp, 0, h, 25.0, 10, 1);
    for (std::size_t i = 0; i < h.size(); ++i)
        CHECK(early[i] == doctest::Approx(dgp.event_laws[0].survival(25.0, 0.0, h[i])).epsilon(1e-14));

    const auto sample = sample_anchor_histories(dgp, 0, 2000, 2);
    const auto qs = truth_conditional(dgp, 0, sample, 60.0, 2000, 3);
    double mean = 0.0;
    for (double v : qs) mean += v / static_cast<double>(qs.size());
    CHECK(std::abs(mean - kTruth60) < 0.02);

    CHECK_THROWS_AS(truth_conditional(dgp, 0, {{1.0, 2.0}}, 60.0, 10, 1), DomainError);
}

TEST_CASE("generation does not depend on the thread count") {
    const auto& dgp = find_dgp(kTwoVisitTrial);
    omp_set_num_threads(1);
    const std::string one = bytes(generate(dgp, 3000, 8));
    omp_set_num_threads(4);
    const std::string four = bytes(generate(dgp, 3000, 8));
    CHECK(one == four);
    CHECK(one != bytes(generate(dgp, 3000, 9)));
}

TEST_CASE("benchmark reports are reproducible") {
    BenchmarkConfig cfg;
    cfg.n_grid = {300};
    cfg.reps = 4;
    cfg.folds = 2;
    cfg.truth_draws = 20000;
    auto render = [](const BenchmarkConfig& c) {
        const auto r = run_benchmark(c);
        std::ostringstream out;
        r.write_csv(out);
        r.write_json(out);
        return out.str();
    };
    omp_set_num_threads(3);
    const std::string a = render(cfg);
    omp_set_num_threads(1);
    CHECK(a == render(cfg));
    CHECK(a.find("seconds") == std::string::npos);

    cfg.conditional = true;
    cfg.taus = {40.0, 60.0};
    cfg.eval_points = 50;
    cfg.truth_inner = 200;
    cfg.arms = {"MR", "Gcomp.Smis"};
    const std::string c = render(cfg);
    CHECK(c == render(cfg));
    const auto report = run_benchmark(cfg);
    for (const auto& s : report.summaries) {
        CHECK(s.projected_ok);
        CHECK(std::isfinite(s.mean_l2));
    }
}

TEST_CASE("benchmark configuration errors") {
    BenchmarkConfig cfg;
    cfg.reps = 1;
    cfg.n_grid = {100};
    cfg.truth_draws = 1000;
    cfg.arms = {"MR.bogus"};
    CHECK_THROWS_AS(run_benchmark(cfg), ConfigError);
    cfg.arms = {"MR"};
    cfg.dgp = "unknown";
    CHECK_THROWS_AS(run_benchmark(cfg), ConfigError);
}
