#include "mrsurv/windows.hpp"

#include "mrsurv/errors.hpp"

#include <algorithm>

namespace mrsurv {

std::vector<WindowView> decompose(const SubjectRecord& record, const VisitSchedule& schedule, double horizon) {
    const std::size_t K = schedule.num_visits();
    if (horizon < schedule.visit_times().back())
        throw DomainError("decompose: horizon precedes the last visit time");
    std::vector<WindowView> views(K);
    for (std::size_t k = 0; k < K; ++k) {
        auto& v = views[k];
        v.k = k;
        const double start = schedule.visit_time(k);
        const double end = k + 1 < K ? schedule.visit_time(k + 1) : horizon;
        v.at_risk = record.followup > start;
        if (!v.at_risk) continue;
        v.exit_time = std::min(record.followup, end);
        v.x_local = v.exit_time - start;
        const bool inside = record.followup <= end;
        v.delta = inside && record.event;
        v.censored = inside && !record.event;
        for (std::size_t j = 0; j <= k; ++j) {
            const auto& cov = record.covariates.at(j);
            if (cov) v.history.insert(v.history.end(), cov->begin(), cov->end());
        }
    }
    return views;
}

Reconstructed reconstruct(const std::vector<WindowView>& views) {
    Reconstructed out{0.0, false};
    for (const auto& v : views) {
        if (!v.at_risk) break;
        out.followup = v.exit_time;
        out.event = out.event || v.delta;
    }
    return out;
}

}  // namespace mrsurv
