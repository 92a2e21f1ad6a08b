#include "mrsurv/errors.hpp"
#include "mrsurv/rng.hpp"
#include "mrsurv/stepfn.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace mrsurv;

namespace {

StepSurvival example() { return StepSurvival(0.0, {1.0, 2.0}, {0.5, 0.25}); }

StepSurvival random_curve(Rng& rng, double start) {
    const std::size_t n = 1 + rng.below(8);
    std::vector<double> t(n), v(n);
    for (auto& x : t) x = start + 10.0 * rng.uniform();
    std::sort(t.begin(), t.end());
    double s = 1.0;
    for (auto& x : v) x = s *= rng.uniform();
    return StepSurvival(start, t, v);
}

}  // namespace

TEST_CASE("eval is right-continuous") {
    const auto s = example();
    CHECK(s.eval(1.0) == 0.5);
    CHECK(s.eval(1.5) == 0.5);
    CHECK(s.eval(0.0) == 1.0);
    CHECK(s.eval(7.0) == 0.25);
    CHECK_THROWS_AS(s.eval(-0.1), DomainError);
}

TEST_CASE("left limits") {
    const auto s = example();
    CHECK(s.left_limit(1.0) == 1.0);
    CHECK(s.left_limit(2.0) == 0.5);
    CHECK(s.left_limit(1.5) == 0.5);
    CHECK_THROWS_AS(s.left_limit(0.0), DomainError);
}

TEST_CASE("Stieltjes sums") {
    const auto s = example();
    auto one = [](double, double, double) { return 1.0; };
    CHECK(s.stieltjes_sum(0.0, 2.0, one) == doctest::Approx(-0.75).epsilon(1e-15));
    CHECK(s.stieltjes_sum(0.0, 0.5, one) == 0.0);
    auto inv = [](double, double pre, double post) { return 1.0 / (post * pre); };
    CHECK(s.stieltjes_sum(0.0, 2.0, inv) == -3.0);
}

TEST_CASE("constructor validation and merging") {
    CHECK_THROWS_AS(StepSurvival(1.0, {1.0}, {0.5}), DomainError);
    CHECK_THROWS_AS(StepSurvival(0.0, {2.0, 1.0}, {0.5, 0.2}), DomainError);
    CHECK_THROWS_AS(StepSurvival(0.0, {1.0, 2.0}, {0.5, 0.6}), DomainError);
    CHECK_THROWS_AS(StepSurvival(0.0, {1.0}, {1.5}), DomainError);
    CHECK_THROWS_AS(StepSurvival(0.0, {1.0, 2.0}, {0.5}), DomainError);
    const StepSurvival merged(0.0, {1.0, 1.0, 2.0}, {0.7, 0.5, 0.2});
    CHECK(merged.size() == 2);
    CHECK(merged.eval(1.0) == 0.5);
}

TEST_CASE("random curves satisfy the step invariants") {
    Rng rng(11);
    for (int rep = 0; rep < 200; ++rep) {
        const double start = 5.0 * rng.uniform();
        const auto s = random_curve(rng, start);
        auto one = [](double, double, double) { return 1.0; };
        for (int q = 0; q < 20; ++q) {
            const double t = start + 1e-9 + 11.0 * rng.uniform();
            CHECK(s.eval(t) <= s.left_limit(t));
            CHECK(s.left_limit(t) <= 1.0);
            CHECK(s.stieltjes_sum(start, t, one) == doctest::Approx(s.eval(t) - 1.0).epsilon(1e-14));
            const double mid = start + (t - start) * rng.uniform();
            const double split = s.stieltjes_sum(start, mid, one) + s.stieltjes_sum(mid, t, one);
            CHECK(split == doctest::Approx(s.stieltjes_sum(start, t, one)).epsilon(1e-14));
        }
    }
}

TEST_CASE("cursor agrees with left_limit on increasing queries") {
    Rng rng(3);
    for (int rep = 0; rep < 50; ++rep) {
        const auto s = random_curve(rng, 0.0);
        LeftLimitCursor cursor(s);
        std::vector<double> q(30);
        for (auto& x : q) x = 1e-6 + 11.0 * rng.uniform();
        for (double t : s.jump_times()) q.push_back(t);
        std::sort(q.begin(), q.end());
        for (double t : q) CHECK(cursor(t) == s.left_limit(t));
    }
}

TEST_CASE("rng is reproducible and in range") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) {
        const double u = a.uniform();
        CHECK(u == b.uniform());
        CHECK(u > 0.0);
        CHECK(u < 1.0);
        CHECK(a.below(7) == b.below(7));
    }
    CHECK(derive_seed(1, 2) != derive_seed(2, 1));
    CHECK(derive_seed(1, 2) == derive_seed(1, 2));
}

TEST_CASE("rng moments") {
    Rng rng(5);
    const int n = 200000;
    double sum = 0.0, sq = 0.0, wsum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        sum += z;
        sq += z * z;
        wsum += rng.weibull(2.0, 1.0);
    }
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(std::abs(sq / n - 1.0) < 0.02);
    // E = Γ(1.5) = sqrt(pi)/2 for shape 2, scale 1
    CHECK(std::abs(wsum / n - std::sqrt(M_PI) / 2.0) < 0.01);
}
