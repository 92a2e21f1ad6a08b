#pragma once

#include "mrsurv/core.hpp"
#include "mrsurv/nuisance.hpp"
#include "mrsurv/stepfn.hpp"

#include <cstddef>
#include <iosfwd>
#include <vector>

namespace mrsurv {

/// Doubly robust transform of one subject in window (t_k, ·]:
///
///   T = -S(t̄) { 1(x <= t̄) δ / (S(x) G(x-)) + Σ_{s in (t_k, x ∧ t̄]} ΔS(s) / (S(s) S(s-) G(s-)) }
///
/// x is absolute. G evaluations below `g_floor` are raised to it and flagged
/// through `trimmed`. Returns 0 when x <= t_k or S(t̄) = 0. Throws
/// PositivityError if a G denominator is not positive.
double dr_transform(const StepSurvival& S, const StepSurvival& G, double x, bool delta, double t_bar,
                    double g_floor = 0.0, bool* trimmed = nullptr);

/// Y^MR = S(t̄) + T.
double pseudo_mr(const StepSurvival& S, const StepSurvival& G, double x, bool delta, double t_bar,
                 double g_floor = 0.0, bool* trimmed = nullptr);
/// Y^G = S(t̄).
double pseudo_g(const StepSurvival& S, double t_bar);
/// Y^IPCW = 1 - 1(x <= t̄) δ / G(x-).
double pseudo_ipcw(const StepSurvival& G, double x, bool delta, double t_bar, double g_floor = 0.0,
                   bool* trimmed = nullptr);

/// Pseudo-outcomes of one estimator at one τ over the window-k risk set.
struct PseudoPanel {
    std::size_t window = 0;
    EstimatorKind kind = EstimatorKind::MR;
    double tau = 0.0;
    double t_bar = 0.0;
    std::vector<std::size_t> subject;  // dataset row of each panel row
    std::vector<double> y;
    std::vector<double> weight;
    std::vector<int> fold;
    std::size_t trim_count = 0;  // rows with at least one floored G evaluation

    std::size_t size() const noexcept { return y.size(); }
};

/// The window-k risk set as seen by the pseudo-outcome kernel. `data.flag`
/// holds the in-window event indicator.
struct PanelRows {
    WindowData data;
    std::vector<std::size_t> subject;
    std::vector<int> fold;
};

/// Event and censoring models trained without one fold. Either may be null
/// when no requested estimator uses it.
struct FoldModels {
    ModelPtr event;
    ModelPtr censor;
};

enum class Execution { Serial, Parallel };

/// Computes every (kind, τ) panel in one pass over the rows: each row's
/// curves are predicted once from the models of its own fold. Output order is
/// kind-major: panels[i * taus.size() + j] holds kinds[i] at taus[j].
/// Serial and Parallel give identical results.
std::vector<PseudoPanel> compute_panels(const PanelRows& rows, const std::vector<FoldModels>& models,
                                        const VisitSchedule& schedule, const std::vector<EstimatorKind>& kinds,
                                        const std::vector<double>& taus, double g_floor,
                                        Execution execution = Execution::Parallel);

/// Debug dump with header id,k,tau,estimator,Y,fold (k one-based).
void write_panel_csv(std::ostream& out, const PseudoPanel& panel, const Dataset& data);

}  // namespace mrsurv
