#include "mrsurv/simulate.hpp"

#include "mrsurv/errors.hpp"
#include "mrsurv/estimate.hpp"
#include "mrsurv/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>

namespace mrsurv {

LatentSubject draw_latent(const DgpSpec& dgp, Rng& rng) {
    const std::size_t K = dgp.num_visits();
    const double inf = std::numeric_limits<double>::infinity();
    LatentSubject s;
    s.event_time = inf;
    s.censor_time = inf;
    s.censor_uncapped = inf;
    bool event_done = false;
    bool censor_done = false;
    for (std::size_t k = 0; k < K; ++k) {
        const auto covariates = dgp.draw_covariates(k, s.history, rng);
        s.history.insert(s.history.end(), covariates.begin(), covariates.end());
        const double u_event = rng.uniform();
        const double u_censor = rng.uniform();
        const double start = dgp.visit_times[k];
        const double length = k + 1 < K ? dgp.visit_times[k + 1] - start : inf;
        if (!event_done) {
            const double local = dgp.event_laws[k].quantile(u_event, s.history);
            if (local < length) {
                s.event_time = start + local;
                event_done = true;
            }
        }
        if (!censor_done && dgp.censor_laws[k]) {
            const WeibullLaw& law = *dgp.censor_laws[k];
            const double local = law.quantile(u_censor, s.history);
            if (local < length) {
                s.censor_uncapped = start + local;
                s.censor_time = law.cutoff ? std::min(s.censor_uncapped, *law.cutoff) : s.censor_uncapped;
                censor_done = true;
            }
        }
    }
    return s;
}

SubjectRecord observe(const DgpSpec& dgp, const LatentSubject& latent, std::string id) {
    SubjectRecord r;
    r.id = std::move(id);
    r.followup = std::min(latent.event_time, latent.censor_time);
    r.event = latent.event_time <= latent.censor_time;
    std::size_t offset = 0;
    for (std::size_t k = 0; k < dgp.num_visits(); ++k) {
        const std::size_t width = dgp.schema.visit_columns[k].size();
        if (r.followup > dgp.visit_times[k]) {
            r.covariates.emplace_back(std::vector<double>(latent.history.begin() + static_cast<std::ptrdiff_t>(offset),
                                                          latent.history.begin() + static_cast<std::ptrdiff_t>(offset + width)));
        } else {
            r.covariates.emplace_back(std::nullopt);
        }
        offset += width;
    }
    return r;
}

GeneratedData generate_with_latent(const DgpSpec& dgp, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw ConfigError("sample size must be at least 1");
    GeneratedData out;
    out.data.schema = dgp.schema;
    out.data.records.resize(n);
    out.latent.resize(n);
    const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        Rng rng(derive_seed(seed, idx));
        out.latent[idx] = draw_latent(dgp, rng);
        out.data.records[idx] = observe(dgp, out.latent[idx], std::to_string(idx + 1));
    }
    return out;
}

Dataset generate(const DgpSpec& dgp, std::size_t n, std::uint64_t seed) {
    return std::move(generate_with_latent(dgp, n, seed).data);
}

TruthEstimate truth_marginal(const DgpSpec& dgp, double tau, std::size_t draws, std::uint64_t seed) {
    if (draws == 0) throw ConfigError("truth needs at least one draw");
    constexpr std::size_t block = 4096;
    const std::size_t blocks = (draws + block - 1) / block;
    std::size_t survivors = 0;
    const auto count = static_cast<std::ptrdiff_t>(blocks);
#pragma omp parallel for schedule(static) reduction(+ : survivors)
    for (std::ptrdiff_t b = 0; b < count; ++b) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
        const std::size_t lo = static_cast<std::size_t>(b) * block;
        const std::size_t hi = std::min(draws, lo + block);
        for (std::size_t i = lo; i < hi; ++i) {
            if (draw_latent(dgp, rng).event_time > tau) ++survivors;
        }
    }
    const double m = static_cast<double>(draws);
    const double p = static_cast<double>(survivors) / m;
    return {p, std::sqrt(p * (1.0 - p) / m)};
}

std::vector<double> truth_conditional(const DgpSpec& dgp, std::size_t anchor, const std::vector<std::vector<double>>& h,
                                      double tau, std::size_t draws, std::uint64_t seed) {
    if (draws == 0) throw ConfigError("truth needs at least one draw");
    const std::size_t K = dgp.num_visits();
    if (anchor >= K) throw ConfigError("anchor visit outside the mechanism");
    const double t_anchor = dgp.visit_times[anchor];
    if (!(tau > t_anchor)) throw ConfigError("tau must exceed the anchor visit time");
    std::size_t last = anchor;
    while (last + 1 < K && dgp.visit_times[last + 1] < tau) ++last;
    const std::size_t width = dgp.schema.history_width(anchor);

    for (const auto& point : h) {
        if (point.size() != width) throw DomainError("truth_conditional: history has the wrong width");
    }
    std::vector<double> out(h.size());
    const auto count = static_cast<std::ptrdiff_t>(h.size());
#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        const auto& point = h[static_cast<std::size_t>(i)];
        const double first_end = anchor + 1 < K ? std::min(dgp.visit_times[anchor + 1], tau) : tau;
        const double first = dgp.event_laws[anchor].survival(first_end, t_anchor, point);
        if (last == anchor) {
            out[static_cast<std::size_t>(i)] = first;
            continue;
        }
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
        double total = 0.0;
        std::vector<double> path;
        for (std::size_t m = 0; m < draws; ++m) {
            path.assign(point.begin(), point.end());
            double prod = 1.0;
            for (std::size_t k = anchor + 1; k <= last; ++k) {
                const auto cov = dgp.draw_covariates(k, path, rng);
                path.insert(path.end(), cov.begin(), cov.end());
                const double end = k + 1 < K ? std::min(dgp.visit_times[k + 1], tau) : tau;
                prod *= dgp.event_laws[k].survival(end, dgp.visit_times[k], path);
            }
            total += prod;
        }
        out[static_cast<std::size_t>(i)] = first * total / static_cast<double>(draws);
    }
    return out;
}

std::vector<std::vector<double>> sample_anchor_histories(const DgpSpec& dgp, std::size_t anchor, std::size_t count,
                                                         std::uint64_t seed) {
    const double t_anchor = dgp.visit_times.at(anchor);
    const std::size_t width = dgp.schema.history_width(anchor);
    std::vector<std::vector<double>> out;
    for (std::uint64_t i = 0; out.size() < count; ++i) {
        Rng rng(derive_seed(seed, i));
        const auto latent = draw_latent(dgp, rng);
        if (std::min(latent.event_time, latent.censor_time) > t_anchor)
            out.emplace_back(latent.history.begin(), latent.history.begin() + static_cast<std::ptrdiff_t>(width));
    }
    return out;
}

const std::vector<std::string>& benchmark_arms() {
    static const std::vector<std::string> arms{"MR", "MR.Smis", "MR.Gmis", "Gcomp", "Gcomp.Smis", "IPCW", "IPCW.Gmis"};
    return arms;
}

namespace {

// Nuisance pair shared by several arms: 0 = both oracle, 1 = KM event, 2 = KM censoring.
struct ArmDef {
    int pass;
    EstimatorKind kind;
};

ArmDef arm_def(const std::string& arm) {
    if (arm == "MR") return {0, EstimatorKind::MR};
    if (arm == "Gcomp") return {0, EstimatorKind::G};
    if (arm == "IPCW") return {0, EstimatorKind::IPCW};
    if (arm == "MR.Smis") return {1, EstimatorKind::MR};
    if (arm == "Gcomp.Smis") return {1, EstimatorKind::G};
    if (arm == "MR.Gmis") return {2, EstimatorKind::MR};
    if (arm == "IPCW.Gmis") return {2, EstimatorKind::IPCW};
    throw ConfigError("unknown benchmark arm '" + arm + "'");
}

NuisancePlan plan_for(int pass, const DgpSpec& dgp) {
    const auto oracle = parse_model_choice("oracle:" + dgp.name);
    const auto km = parse_model_choice("km");
    const std::size_t K = dgp.num_visits();
    NuisancePlan plan;
    plan.event.assign(K, pass == 1 ? km : oracle);
    plan.censor.assign(K, pass == 2 ? km : oracle);
    return plan;
}

struct ConditionalTruth {
    std::vector<std::vector<double>> w;
    std::vector<double> q;
};

std::vector<ReplicateResult> run_replicate(const BenchmarkConfig& cfg, const DgpSpec& dgp, const VisitSchedule& schedule,
                                           const ConditionalTruth& truth, std::size_t n, std::size_t rep) {
    std::vector<ReplicateResult> out;
    for (const auto& arm : cfg.arms) {
        ReplicateResult r;
        r.arm = arm;
        r.n = n;
        r.rep = rep;
        out.push_back(r);
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    auto fail_all = [&](const std::vector<std::size_t>& idx, const std::string& what) {
        for (std::size_t i : idx) {
            out[i].failed = true;
            out[i].error = what;
        }
    };
    Dataset data;
    try {
        data = generate(dgp, n, derive_seed(derive_seed(cfg.seed, n), rep));
    } catch (const Error& e) {
        std::vector<std::size_t> all(out.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        fail_all(all, e.what());
        return out;
    }
    const std::size_t target = cfg.taus.size() - 1;
    for (int pass = 0; pass < 3; ++pass) {
        std::vector<std::size_t> idx;
        std::vector<EstimatorKind> kinds;
        for (std::size_t i = 0; i < cfg.arms.size(); ++i) {
            const auto def = arm_def(cfg.arms[i]);
            if (def.pass != pass) continue;
            idx.push_back(i);
            kinds.push_back(def.kind);
        }
        if (idx.empty()) continue;
        try {
            const PanelOptions options{cfg.folds, derive_seed(cfg.seed ^ 0x5eedf01dULL, rep), cfg.trim, Execution::Serial};
            const auto panels = build_panels(data, schedule, plan_for(pass, dgp), kinds, options);
            for (std::size_t a = 0; a < idx.size(); ++a) {
                auto& r = out[idx[a]];
                try {
                    if (!cfg.conditional) {
                        const auto fit = fit_marginal(panels, kinds[a], data, schedule);
                        r.estimate = fit.estimate[target];
                        r.se = fit.se[target];
                        r.ci_lo = fit.ci_lo[target];
                        r.ci_hi = fit.ci_hi[target];
                        double sum = 0.0;
                        for (double d : fit.influence[target]) sum += d;
                        r.mean_influence = sum / static_cast<double>(n);
                        r.l2 = nan;
                    } else {
                        const auto fit = fit_conditional(panels, kinds[a], data, schedule, cfg.basis, true);
                        double sq = 0.0;
                        for (std::size_t e = 0; e < truth.w.size(); ++e) {
                            const auto q = fit.predict(truth.w[e]);
                            for (std::size_t j = 0; j < q.size(); ++j) {
                                if (!(q[j] >= 0.0 && q[j] <= 1.0) || (j > 0 && q[j] > q[j - 1])) r.projected_ok = false;
                            }
                            const double diff = q[target] - truth.q[e];
                            sq += diff * diff;
                        }
                        r.l2 = std::sqrt(sq / static_cast<double>(truth.w.size()));
                        r.estimate = r.se = r.ci_lo = r.ci_hi = nan;
                        r.mean_influence = nan;
                    }
                } catch (const Error& e) {
                    r.failed = true;
                    r.error = e.what();
                }
            }
        } catch (const Error& e) {
            fail_all(idx, e.what());
        }
    }
    return out;
}

}  // namespace

const ArmSummary& BenchmarkReport::summary(const std::string& arm, std::size_t n) const {
    for (const auto& s : summaries) {
        if (s.arm == arm && s.n == n) return s;
    }
    throw DomainError("no summary for arm " + arm + " at n=" + std::to_string(n));
}

BenchmarkReport run_benchmark(const BenchmarkConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    if (cfg.reps == 0) throw ConfigError("benchmark needs at least one replicate");
    if (cfg.n_grid.empty()) throw ConfigError("benchmark needs at least one sample size");
    if (cfg.taus.empty()) throw ConfigError("benchmark needs at least one tau");
    for (const auto& arm : cfg.arms) arm_def(arm);
    const DgpSpec& dgp = find_dgp(cfg.dgp);
    const VisitSchedule schedule(dgp.visit_times, 0, cfg.taus);
    const double tau = cfg.taus.back();

    BenchmarkReport report;
    report.config = cfg;
    report.truth = truth_marginal(dgp, tau, cfg.truth_draws, derive_seed(cfg.seed, 0x7a017ULL));

    ConditionalTruth truth;
    if (cfg.conditional) {
        auto anchor_cols = dgp.schema.visit_columns[0];
        auto basis_cols = cfg.basis.columns;
        std::sort(anchor_cols.begin(), anchor_cols.end());
        std::sort(basis_cols.begin(), basis_cols.end());
        if (anchor_cols != basis_cols)
            throw ConfigError("conditional benchmark: W must consist of exactly the first-visit covariates");
        const auto h = sample_anchor_histories(dgp, 0, cfg.eval_points, derive_seed(cfg.seed, 0xe7a1ULL));
        truth.q = truth_conditional(dgp, 0, h, tau, cfg.truth_inner, derive_seed(cfg.seed, 0xc0dULL));
        for (const auto& hist : h) {
            std::vector<double> w;
            for (const auto& c : cfg.basis.columns) w.push_back(hist[*dgp.schema.history_index(c)]);
            truth.w.push_back(std::move(w));
        }
    }

    std::vector<std::pair<std::size_t, std::size_t>> jobs;
    for (std::size_t n : cfg.n_grid) {
        for (std::size_t rep = 0; rep < cfg.reps; ++rep) jobs.emplace_back(n, rep);
    }
    std::vector<std::vector<ReplicateResult>> results(jobs.size());
    const auto count = static_cast<std::ptrdiff_t>(jobs.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t j = 0; j < count; ++j) {
        const auto [n, rep] = jobs[static_cast<std::size_t>(j)];
        results[static_cast<std::size_t>(j)] = run_replicate(cfg, dgp, schedule, truth, n, rep);
    }
    for (auto& r : results) report.replicates.insert(report.replicates.end(), r.begin(), r.end());

    for (std::size_t n : cfg.n_grid) {
        for (const auto& arm : cfg.arms) {
            ArmSummary s;
            s.arm = arm;
            s.n = n;
            s.reps = cfg.reps;
            s.truth = report.truth.value;
            std::vector<const ReplicateResult*> ok;
            for (const auto& r : report.replicates) {
                if (r.arm != arm || r.n != n) continue;
                if (r.failed) ++s.failures;
                else ok.push_back(&r);
            }
            const double m = static_cast<double>(ok.size());
            const double nan = std::numeric_limits<double>::quiet_NaN();
            if (ok.empty()) {
                s.mean = s.bias = s.sd = s.bias_mcse = s.mean_se = s.coverage = s.mean_l2 = nan;
                report.summaries.push_back(s);
                continue;
            }
            double sum = 0.0, se_sum = 0.0, l2_sum = 0.0, covered = 0.0;
            for (const auto* r : ok) {
                sum += r->estimate;
                se_sum += r->se;
                l2_sum += r->l2;
                if (r->ci_lo <= s.truth && s.truth <= r->ci_hi) covered += 1.0;
                s.max_abs_mean_influence = std::max(s.max_abs_mean_influence, std::abs(r->mean_influence));
                s.projected_ok = s.projected_ok && r->projected_ok;
            }
            s.mean = sum / m;
            s.bias = s.mean - s.truth;
            double ss = 0.0;
            for (const auto* r : ok) ss += (r->estimate - s.mean) * (r->estimate - s.mean);
            s.sd = ok.size() > 1 ? std::sqrt(ss / (m - 1.0)) : nan;
            s.bias_mcse = s.sd / std::sqrt(m);
            s.mean_se = se_sum / m;
            s.coverage = std::isnan(s.mean_se) ? nan : covered / m;
            s.mean_l2 = l2_sum / m;
            report.summaries.push_back(s);
        }
    }
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

void BenchmarkReport::write_csv(std::ostream& out) const {
    out << "arm,n,rep,failed,estimate,se,ci_lo,ci_hi,covered,l2,mean_influence,error\n";
    for (const auto& r : replicates) {
        const bool covered = !r.failed && r.ci_lo <= truth.value && truth.value <= r.ci_hi;
        std::string err = r.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        out << r.arm << ',' << r.n << ',' << r.rep << ',' << (r.failed ? 1 : 0) << ',' << format_double(r.estimate) << ','
            << format_double(r.se) << ',' << format_double(r.ci_lo) << ',' << format_double(r.ci_hi) << ','
            << (covered ? 1 : 0) << ',' << format_double(r.l2) << ',' << format_double(r.mean_influence) << ',' << err
            << '\n';
    }
}

void BenchmarkReport::write_json(std::ostream& out) const {
    using nlohmann::json;
    auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    json j;
    j["dgp"] = config.dgp;
    j["seed"] = config.seed;
    j["reps"] = config.reps;
    j["n_grid"] = config.n_grid;
    j["tau"] = config.taus;
    j["conditional"] = config.conditional;
    j["folds"] = config.folds;
    j["trim"] = config.trim;
    j["truth"] = {{"value", truth.value}, {"se", truth.se}, {"draws", config.truth_draws}};
    if (config.conditional) {
        j["basis"] = {{"columns", config.basis.columns},
                      {"degree", config.basis.degree},
                      {"interactions", config.basis.interactions}};
        j["eval_points"] = config.eval_points;
        j["truth_inner"] = config.truth_inner;
    }
    json arms = json::array();
    for (const auto& s : summaries) {
        arms.push_back({{"arm", s.arm},
                        {"n", s.n},
                        {"reps", s.reps},
                        {"failures", s.failures},
                        {"truth", num(s.truth)},
                        {"mean", num(s.mean)},
                        {"bias", num(s.bias)},
                        {"sd", num(s.sd)},
                        {"bias_mcse", num(s.bias_mcse)},
                        {"mean_se", num(s.mean_se)},
                        {"coverage", num(s.coverage)},
                        {"mean_l2", num(s.mean_l2)},
                        {"max_abs_mean_influence", num(s.max_abs_mean_influence)},
                        {"projected_ok", s.projected_ok}});
    }
    j["arms"] = arms;
    out << j.dump(2) << '\n';
}

}  // namespace mrsurv
