#pragma once

#include "mrsurv/core.hpp"

#include <cstddef>
#include <vector>

namespace mrsurv {

/// A subject seen through window (t_k, t_{k+1}].
struct WindowView {
    std::size_t k = 0;
    bool at_risk = false;          // X > t_k
    double x_local = 0.0;          // (X ∧ end_k - t_k) 1(X > t_k)
    double exit_time = 0.0;        // X ∧ end_k in absolute time (exact, no subtraction)
    bool delta = false;            // event observed inside the window
    bool censored = false;         // censored inside the window: (1 - Delta) 1(t_k < X <= end_k)
    std::vector<double> history;   // L_1..L_k flattened; empty when not at risk
};

/// Per-window decomposition; the last window closes at `horizon`.
/// Requires horizon >= the last visit time.
std::vector<WindowView> decompose(const SubjectRecord& record, const VisitSchedule& schedule, double horizon);

/// Recovers (X ∧ horizon, Delta 1(X <= horizon)) from a decomposition.
struct Reconstructed {
    double followup;
    bool event;
};
Reconstructed reconstruct(const std::vector<WindowView>& views);

}  // namespace mrsurv
