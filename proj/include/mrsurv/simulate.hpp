#pragma once

#include "mrsurv/core.hpp"
#include "mrsurv/dgp.hpp"
#include "mrsurv/regression.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace mrsurv {

/// Full data of one simulated subject before coarsening.
struct LatentSubject {
    std::vector<double> history;  // every visit's covariates, flattened
    double event_time = 0.0;
    double censor_time = 0.0;     // after any administrative cutoff; +inf without censoring
    double censor_uncapped = 0.0; // before the cutoff
};

/// One subject from its own random stream. Consumes a fixed number of
/// uniforms: per visit, the covariate draw plus one event and one censoring
/// uniform, whether or not the subject is still at risk.
LatentSubject draw_latent(const DgpSpec& dgp, Rng& rng);
/// Observed record (X, Δ, covariates present while at risk).
SubjectRecord observe(const DgpSpec& dgp, const LatentSubject& latent, std::string id);

struct GeneratedData {
    Dataset data;
    std::vector<LatentSubject> latent;
};
/// Subject i uses the stream derive_seed(seed, i), so the output does not
/// depend on the thread count.
GeneratedData generate_with_latent(const DgpSpec& dgp, std::size_t n, std::uint64_t seed);
Dataset generate(const DgpSpec& dgp, std::size_t n, std::uint64_t seed);

struct TruthEstimate {
    double value = 0.0;
    double se = 0.0;
};
/// Fraction of M latent event times beyond τ, with its binomial SE.
TruthEstimate truth_marginal(const DgpSpec& dgp, double tau, std::size_t draws, std::uint64_t seed);

/// Q*(h) = P(T > τ | T > t_anchor, H_anchor = h) for complete anchor
/// histories h, by averaging Π_k S_k(t̄_k | H_k) over `draws` simulated
/// later covariate paths (covariates are drawn independently of the times).
std::vector<double> truth_conditional(const DgpSpec& dgp, std::size_t anchor, const std::vector<std::vector<double>>& h,
                                      double tau, std::size_t draws, std::uint64_t seed);

/// Anchor histories of simulated subjects with X > t_anchor.
std::vector<std::vector<double>> sample_anchor_histories(const DgpSpec& dgp, std::size_t anchor, std::size_t count,
                                                         std::uint64_t seed);

/// Names of the seven comparison arms.
const std::vector<std::string>& benchmark_arms();

struct BenchmarkConfig {
    std::string dgp{kTwoVisitTrial};
    std::vector<std::size_t> n_grid{500, 1000, 2000};
    std::size_t reps = 500;
    std::uint64_t seed = 20240601;
    std::vector<std::string> arms = benchmark_arms();
    bool conditional = false;
    std::vector<double> taus{60.0};  // the last one is the reported target
    int folds = 10;
    double trim = 0.05;
    BasisSpec basis{{"L11", "L12", "L13"}, 2, false};
    std::size_t truth_draws = 1000000;
    std::size_t eval_points = 1000;   // conditional: W sample for the L2 distance
    std::size_t truth_inner = 20000;  // conditional: paths per W point
};

struct ReplicateResult {
    std::string arm;
    std::size_t n = 0;
    std::size_t rep = 0;
    bool failed = false;
    std::string error;
    double estimate = 0.0;  // marginal estimate (NaN in conditional runs)
    double se = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double l2 = 0.0;        // conditional runs
    double mean_influence = 0.0;
    bool projected_ok = true;  // post-processed curves nonincreasing and in [0,1]
};

struct ArmSummary {
    std::string arm;
    std::size_t n = 0;
    std::size_t reps = 0;
    std::size_t failures = 0;
    double truth = 0.0;
    double mean = 0.0;
    double bias = 0.0;
    double sd = 0.0;
    double bias_mcse = 0.0;  // sd / sqrt(successful reps)
    double mean_se = 0.0;
    double coverage = 0.0;
    double mean_l2 = 0.0;
    double max_abs_mean_influence = 0.0;
    bool projected_ok = true;
};

struct BenchmarkReport {
    BenchmarkConfig config;
    TruthEstimate truth;              // marginal truth (both run types)
    std::vector<ReplicateResult> replicates;
    std::vector<ArmSummary> summaries;
    double seconds = 0.0;             // not written to the report files

    const ArmSummary& summary(const std::string& arm, std::size_t n) const;
    void write_csv(std::ostream& out) const;
    void write_json(std::ostream& out) const;
};

/// Runs every (n, replicate) in parallel; each replicate draws from
/// derive_seed(derive_seed(seed, n), rep). Replicate failures are recorded
/// and excluded from the summaries.
BenchmarkReport run_benchmark(const BenchmarkConfig& config);

}  // namespace mrsurv
