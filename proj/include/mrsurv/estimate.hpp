#pragma once

#include "mrsurv/config.hpp"
#include "mrsurv/core.hpp"
#include "mrsurv/pseudo.hpp"
#include "mrsurv/regression.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace mrsurv {

/// Balanced random folds: a seeded Fisher-Yates permutation dealt round-robin.
/// folds == 1 puts every subject in fold 0.
std::vector<int> assign_folds(std::size_t n, int folds, std::uint64_t seed);

/// Pseudo-outcome panels for every window from the anchor on, every requested
/// estimator, and every τ that reaches the window.
struct PanelSet {
    std::size_t anchor = 0;
    std::vector<double> taus;
    std::vector<EstimatorKind> kinds;
    std::vector<int> fold;            // per dataset row
    std::vector<PseudoPanel> panels;

    /// Windows anchor..last_window(taus[j]).
    std::vector<std::size_t> windows(const VisitSchedule& schedule, std::size_t tau_index) const;
    /// Throws DomainError when the panel was not computed.
    const PseudoPanel& find(std::size_t window, EstimatorKind kind, std::size_t tau_index) const;
};

struct PanelOptions {
    int folds = 10;
    std::uint64_t seed = 1;
    double trim = 0.05;
    Execution execution = Execution::Parallel;
};

/// Fits fold-held-out nuisances per window (oracle models are shared across
/// folds) and computes all panels, one kernel pass per window.
PanelSet build_panels(const Dataset& data, const VisitSchedule& schedule, const NuisancePlan& plan,
                      const std::vector<EstimatorKind>& kinds, const PanelOptions& options);

/// W of a record at risk at the anchor visit.
std::vector<double> extract_w(const SubjectRecord& record, const CovariateSchema& schema, std::size_t anchor,
                              const std::vector<std::string>& columns);

/// PAVA onto nonincreasing sequences, then clamp to [0,1].
std::vector<double> isotonic_project(std::vector<double> values);

class ConditionalFit {
public:
    ConditionalFit(EstimatorKind kind, std::vector<double> taus, LinearBasis basis, bool isotonic,
                   std::vector<std::vector<Eigen::VectorXd>> coefficients);

    EstimatorKind kind() const noexcept { return kind_; }
    const std::vector<double>& taus() const noexcept { return taus_; }
    const LinearBasis& basis() const noexcept { return basis_; }
    /// Coefficients of window anchor + m at taus[j]: coefficients()[j][m].
    const std::vector<std::vector<Eigen::VectorXd>>& coefficients() const noexcept { return coef_; }

    /// Π_k Q_k(w) per τ, before any post-processing.
    std::vector<double> raw(std::span<const double> w) const;
    /// raw() clamped to [0,1] and, if enabled, made nonincreasing over τ.
    std::vector<double> predict(std::span<const double> w) const;

    std::size_t n_at_risk_anchor = 0;
    std::vector<std::size_t> trim_count;  // per τ, summed over windows

private:
    EstimatorKind kind_;
    std::vector<double> taus_;
    LinearBasis basis_;
    bool isotonic_;
    std::vector<std::vector<Eigen::VectorXd>> coef_;
};

ConditionalFit fit_conditional(const PanelSet& panels, EstimatorKind kind, const Dataset& data,
                               const VisitSchedule& schedule, const BasisSpec& basis, bool isotonic);
ConditionalFit fit_conditional(const Dataset& data, const RunConfig& config, EstimatorKind kind,
                               Execution execution = Execution::Parallel);

struct MarginalFit {
    EstimatorKind kind = EstimatorKind::MR;
    std::vector<double> taus;
    std::vector<double> estimate;
    std::vector<double> se;      // NaN unless kind is MR
    std::vector<double> ci_lo;
    std::vector<double> ci_hi;
    std::vector<std::vector<double>> q;          // [τ][window - anchor]
    std::vector<double> pi;                      // P_n 1(X > t_k), window - anchor
    std::vector<std::vector<double>> influence;  // [τ][dataset row]
    std::size_t n_at_risk_anchor = 0;
    std::vector<std::size_t> trim_count;
};

MarginalFit fit_marginal(const PanelSet& panels, EstimatorKind kind, const Dataset& data,
                         const VisitSchedule& schedule);
MarginalFit fit_marginal(const Dataset& data, const RunConfig& config, EstimatorKind kind,
                         Execution execution = Execution::Parallel);

/// {1 - Q(w_treated)} - {1 - Q(w_control)}, or the difference of logs of the
/// cumulative incidences when `log_scale` is set.
double contrast_cde(const ConditionalFit& fit, std::span<const double> w_treated, std::span<const double> w_control,
                    std::size_t tau_index, bool log_scale = false);

struct EstimateRow {
    EstimatorKind kind = EstimatorKind::MR;
    double tau = 0.0;
    std::vector<double> w;  // empty for marginal rows
    double estimate = 0.0;
    double se = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    std::size_t n_at_risk_anchor = 0;
    std::size_t trim_count = 0;
};

struct EstimateTable {
    bool marginal = false;
    std::vector<std::string> w_columns;
    std::vector<EstimateRow> rows;

    void append(const MarginalFit& fit);
    void append(const ConditionalFit& fit, const std::vector<std::vector<double>>& w_grid);
    /// Header estimator,tau,<W columns | w>,estimate,se,ci_lo,ci_hi,n_at_risk_anchor,trim_count.
    /// Marginal rows carry "marginal" in the w column; missing values print as NA.
    void write_csv(std::ostream& out) const;
};

/// CDE at every τ for each base point of the grid, with the contrast column
/// set to the treated and control values.
struct ContrastRow {
    EstimatorKind kind;
    double tau;
    std::vector<double> w;
    double cde;
};
std::vector<ContrastRow> tabulate_contrast(const ConditionalFit& fit, const std::vector<std::vector<double>>& w_grid,
                                           const ContrastSpec& spec, const std::vector<std::string>& w_columns);
void write_contrast_csv(std::ostream& out, const std::vector<ContrastRow>& rows,
                        const std::vector<std::string>& w_columns, bool log_scale);

/// Runs every configured estimator on one set of panels.
struct RunResult {
    EstimateTable table;
    std::vector<ContrastRow> contrast;
    std::vector<std::vector<double>> w_grid;
    std::vector<std::size_t> fold_sizes;
};
RunResult run_estimation(const Dataset& data, const RunConfig& config, Execution execution = Execution::Parallel);

}  // namespace mrsurv
