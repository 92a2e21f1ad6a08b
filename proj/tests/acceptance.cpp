// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Full size by default; --quick scales the benchmarks down for a smoke run.

#include "mrsurv/config.hpp"
#include "mrsurv/estimate.hpp"
#include "mrsurv/nuisance.hpp"
#include "mrsurv/pseudo.hpp"
#include "mrsurv/simulate.hpp"
#include "mrsurv/verify.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

using namespace mrsurv;

namespace {

constexpr double kIdentityTol = 1e-12;
constexpr double kIdentitySeconds = 10.0;
constexpr std::size_t kLaws = 1000;
constexpr double kBiasMr = 0.01;
constexpr double kBiasMis = 0.015;
constexpr double kBiasRatio = 3.0;
constexpr double kCoverLo = 0.925;
constexpr double kCoverHi = 0.975;
constexpr double kInfluenceTol = 1e-10;
constexpr double kL2Robust = 1.5;
constexpr double kL2Ratio = 3.0;
constexpr double kFdTol = 1e-6;
constexpr double kFdStep = 1e-5;

int failures = 0;

void report(bool ok, const std::string& label, const std::string& detail) {
    std::printf("%s  %s: %s\n", ok ? "PASS" : "FAIL", label.c_str(), detail.c_str());
    std::fflush(stdout);
    failures += ok ? 0 : 1;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double elapsed(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string render(const BenchmarkReport& r) {
    std::ostringstream out;
    r.write_csv(out);
    r.write_json(out);
    return out.str();
}

void identities() {
    const auto suite = run_identity_suite(kLaws, 20240601);
    double worst = 0.0;
    bool ok = true;
    bool negative = true;
    for (const auto& c : suite.checks) {
        if (c.name.find("robust") != std::string::npos) continue;
        if (c.negative_control) {
            negative = negative && c.passed;
        } else {
            worst = std::max(worst, c.value);
            ok = ok && c.passed && c.value <= kIdentityTol && c.cases >= kLaws;
        }
    }
    report(ok && negative && suite.seconds < kIdentitySeconds, "1 identity suite",
           fmt("%zu laws, max error %.2e (tol %.0e), %.2f s (limit %.0f s)", kLaws, worst, kIdentityTol, suite.seconds,
               kIdentitySeconds));
}

void robustness() {
    Rng rng(7);
    double worst = 0.0;
    std::size_t patterns = 0;
    for (std::size_t i = 0; i < kLaws; ++i) {
        const auto law = random_two_window_law(rng);
        const auto cases = robustness_patterns(law, rng);
        patterns = cases.size() - 1;
        for (std::size_t c = 0; c + 1 < cases.size(); ++c) worst = std::max(worst, cases[c].error);
    }
    report(worst <= kIdentityTol, "2 two-window robustness",
           fmt("%zu laws x %zu patterns, max |product - Q*| %.2e (tol %.0e)", kLaws, patterns, worst, kIdentityTol));
}

struct Benchmarks {
    BenchmarkReport marginal;
    BenchmarkReport conditional;
};

void marginal_criteria(const BenchmarkReport& r, bool quick) {
    const std::size_t n = r.config.n_grid.back();
    auto bias = [&](const char* arm) { return std::abs(r.summary(arm, n).bias); };
    const double mr = bias("MR"), smis = bias("MR.Smis"), gmis = bias("MR.Gmis");
    const double gc = bias("Gcomp.Smis"), ip = bias("IPCW.Gmis");
    std::size_t failed = 0;
    for (const auto& s : r.summaries) failed += s.failures;
    const bool ok = mr < kBiasMr && smis < kBiasMis && gmis < kBiasMis && gc > kBiasRatio * smis &&
                    ip > kBiasRatio * gmis && failed == 0;
    report(ok, "3 marginal benchmark",
           fmt("n=%zu reps=%zu truth=%.4f |bias| MR %.4f (<%.2f), MR.Smis %.4f, MR.Gmis %.4f (<%.3f), "
               "Gcomp.Smis %.4f (%.1fx), IPCW.Gmis %.4f (%.1fx, need >%.0fx), failed fits %zu, %.0f s%s",
               n, r.config.reps, r.truth.value, mr, kBiasMr, smis, gmis, kBiasMis, gc, gc / smis, ip, ip / gmis,
               kBiasRatio, failed, r.seconds, quick ? " [quick]" : ""));

    const auto& s = r.summary("MR", n);
    double infl = 0.0;
    for (const auto& a : r.summaries) infl = std::max(infl, a.max_abs_mean_influence);
    report(s.coverage >= kCoverLo && s.coverage <= kCoverHi && infl <= kInfluenceTol, "4 MR Wald coverage",
           fmt("coverage %.3f in [%.3f, %.3f], max |mean influence| %.2e (tol %.0e)", s.coverage, kCoverLo, kCoverHi,
               infl, kInfluenceTol));
}

void conditional_criteria(const BenchmarkReport& r, bool quick) {
    bool monotone = true, robust = true, ordered = true;
    double prev = INFINITY;
    std::string detail;
    for (std::size_t n : r.config.n_grid) {
        const double mr = r.summary("MR", n).mean_l2;
        const double smis = r.summary("MR.Smis", n).mean_l2;
        const double gmis = r.summary("MR.Gmis", n).mean_l2;
        const double gc = r.summary("Gcomp.Smis", n).mean_l2;
        monotone = monotone && mr < prev;
        robust = robust && smis <= kL2Robust * mr && gmis <= kL2Robust * mr;
        ordered = ordered && gc > kL2Ratio * mr;
        prev = mr;
        detail += fmt("n=%zu MR %.4f Smis %.2fx Gmis %.2fx Gcomp.Smis %.2fx; ", n, mr, smis / mr, gmis / mr, gc / mr);
    }
    detail += fmt("need decreasing, <=%.1fx, >%.0fx; reps=%zu%s", kL2Robust, kL2Ratio, r.config.reps,
                  quick ? " [quick]" : "");
    report(monotone && robust && ordered, "5 conditional benchmark", detail);
}

void structural(const Benchmarks& b) {
    const auto& dgp = find_dgp(kTwoVisitTrial);
    const Dataset data = generate(dgp, 1500, 31);
    const VisitSchedule schedule(dgp.visit_times, 0, {40.0, 50.0, 60.0});
    NuisancePlan cox;
    cox.event.assign(2, parse_model_choice("cox"));
    cox.censor.assign(2, parse_model_choice("cox"));
    NuisancePlan unit = cox;
    unit.event.assign(2, parse_model_choice("unit"));
    const PanelOptions opt{5, 3, 0.05, Execution::Parallel};
    const PanelSet a = build_panels(data, schedule, cox, {EstimatorKind::IPCW}, opt);
    const PanelSet u = build_panels(data, schedule, unit, {EstimatorKind::MR}, opt);
    std::size_t rows = 0;
    bool rowwise = a.panels.size() == u.panels.size();
    for (std::size_t p = 0; rowwise && p < a.panels.size(); ++p) {
        rowwise = a.panels[p].y == u.panels[p].y;
        rows += a.panels[p].y.size();
    }

    const PanelSet panels = build_panels(data, schedule, cox, {EstimatorKind::MR, EstimatorKind::G, EstimatorKind::IPCW}, opt);
    bool intercept = true;
    for (auto kind : panels.kinds) {
        const auto m = fit_marginal(panels, kind, data, schedule);
        const auto raw = fit_conditional(panels, kind, data, schedule, BasisSpec{}, false).raw(std::vector<double>{});
        intercept = intercept && raw == m.estimate;
    }

    std::size_t outputs = 0;
    bool projected = true;
    for (const auto* r : {&b.marginal, &b.conditional}) {
        for (const auto& rep : r->replicates) {
            if (rep.failed) continue;
            projected = projected && rep.projected_ok;
            ++outputs;
        }
    }
    report(rowwise && intercept && projected, "6 structural identities",
           fmt("IPCW == MR(unit S) on %zu rows: %s; intercept-only == marginal: %s; "
               "projected curves valid on %zu benchmark fits: %s",
               rows, rowwise ? "exact" : "differs", intercept ? "exact" : "differs", outputs,
               projected ? "yes" : "no"));
}

WindowData first_window(const Dataset& data) {
    WindowData d;
    d.start = 0.0;
    d.end = 30.0;
    d.history_dim = 3;
    for (const auto& r : data.records) d.push(*r.covariates[0], std::min(r.followup, 30.0), r.followup <= 30.0 && r.event, 1.0);
    return d;
}

void numerical() {
    const auto& dgp = find_dgp(kTwoVisitTrial);
    const WindowData d = first_window(generate(dgp, 400, 21));
    std::vector<FeatureTerm> terms(3);
    for (std::size_t j = 0; j < 3; ++j) terms[j].column = j;
    const auto design = make_cox_design(d, terms);
    Rng rng(4);
    double worst = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        Eigen::VectorXd b(3);
        for (int j = 0; j < 3; ++j) b(j) = rng.uniform() * 2.0 - 1.0;
        const auto at = cox_derivatives(design, b);
        for (int j = 0; j < 3; ++j) {
            Eigen::VectorXd up = b, dn = b;
            up(j) += kFdStep;
            dn(j) -= kFdStep;
            const double fd = (cox_derivatives(design, up).loglik - cox_derivatives(design, dn).loglik) / (2.0 * kFdStep);
            worst = std::max(worst, std::abs(fd - at.score(j)) / std::max(1.0, std::abs(at.score(j))));
        }
    }

    WindowData plain;
    plain.start = 0.0;
    plain.end = 1e9;
    std::vector<double> t(2000);
    for (auto& x : t) {
        x = std::ceil(rng.weibull(1.5, 4.0) * 4.0) / 4.0;
        plain.push({}, x, true, 1.0);
    }
    const auto km = kaplan_meier(plain);
    std::sort(t.begin(), t.end());
    bool exact = true;
    for (double q = 0.0; q < 20.0; q += 0.125) {
        const auto beyond = static_cast<double>(t.end() - std::upper_bound(t.begin(), t.end(), q));
        exact = exact && std::abs(km.eval(q) - beyond / static_cast<double>(t.size())) <= 1e-15;
    }

    BenchmarkConfig cfg;
    cfg.n_grid = {400};
    cfg.reps = 6;
    cfg.folds = 3;
    cfg.truth_draws = 20000;
    omp_set_num_threads(std::max(2, omp_get_num_procs()));
    const std::string first = render(run_benchmark(cfg));
    omp_set_num_threads(1);
    const std::string second = render(run_benchmark(cfg));
    omp_set_num_threads(omp_get_num_procs());
    std::ostringstream g1, g2;
    write_dataset(g1, generate(dgp, 2000, 99));
    write_dataset(g2, generate(dgp, 2000, 99));
    const bool bytes = first == second && g1.str() == g2.str();

    report(worst <= kFdTol && exact && bytes, "7 numerical checks",
           fmt("Cox score vs FD at 20 beta: max rel error %.2e (tol %.0e); KM without censoring == empirical: %s; "
               "seeded reports byte-identical across thread counts: %s",
               worst, kFdTol, exact ? "yes" : "no", bytes ? "yes" : "no"));
}

}  // namespace

int main(int argc, char** argv) {
    const bool quick = argc > 1 && std::strcmp(argv[1], "--quick") == 0;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        identities();
        robustness();

        Benchmarks b;
        BenchmarkConfig m;
        m.n_grid = {2000};
        m.reps = quick ? 40 : 500;
        if (quick) m.truth_draws = 200000;
        b.marginal = run_benchmark(m);
        marginal_criteria(b.marginal, quick);

        BenchmarkConfig c;
        c.conditional = true;
        c.taus = {40.0, 50.0, 60.0};
        c.reps = quick ? 20 : 200;
        c.arms = {"MR", "MR.Smis", "MR.Gmis", "Gcomp.Smis"};
        if (quick) {
            c.truth_draws = 100000;
            c.eval_points = 300;
            c.truth_inner = 5000;
        }
        b.conditional = run_benchmark(c);
        conditional_criteria(b.conditional, quick);

        structural(b);
        numerical();
    } catch (const std::exception& e) {
        std::printf("FAIL  aborted: %s\n", e.what());
        return 1;
    }
    std::printf("%s  %d failing, %.0f s total\n", failures == 0 ? "PASS" : "FAIL", failures, elapsed(t0));
    return failures == 0 ? 0 : 1;
}
