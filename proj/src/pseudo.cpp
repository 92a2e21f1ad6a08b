#include "mrsurv/pseudo.hpp"

#include "mrsurv/errors.hpp"

#include <algorithm>
#include <exception>
#include <ostream>

namespace mrsurv {

namespace {

double floored(double g, double t, double g_floor, bool* trimmed) {
    if (g < g_floor) {
        g = g_floor;
        if (trimmed) *trimmed = true;
    }
    if (!(g > 0.0)) throw PositivityError("censoring survival is zero at t=" + format_double(t), t);
    return g;
}

}  // namespace

double dr_transform(const StepSurvival& S, const StepSurvival& G, double x, bool delta, double t_bar,
                    double g_floor, bool* trimmed) {
    const double start = S.window_start();
    if (G.window_start() != start) throw DomainError("dr_transform: curves start at different times");
    if (!(t_bar > start)) throw DomainError("dr_transform: t_bar must exceed the window start");
    if (x <= start) return 0.0;
    const double s_bar = S.eval(t_bar);
    if (s_bar == 0.0) return 0.0;

    LeftLimitCursor g_minus(G);
    const double upper = std::min(x, t_bar);
    const double integral = S.stieltjes_sum(start, upper, [&](double s, double pre, double post) {
        return 1.0 / (post * pre * floored(g_minus(s), s, g_floor, trimmed));
    });
    double event = 0.0;
    if (delta && x <= t_bar) event = 1.0 / (S.eval(x) * floored(g_minus(x), x, g_floor, trimmed));
    return -s_bar * (event + integral);
}

double pseudo_mr(const StepSurvival& S, const StepSurvival& G, double x, bool delta, double t_bar, double g_floor,
                 bool* trimmed) {
    return S.eval(t_bar) + dr_transform(S, G, x, delta, t_bar, g_floor, trimmed);
}

double pseudo_g(const StepSurvival& S, double t_bar) { return S.eval(t_bar); }

double pseudo_ipcw(const StepSurvival& G, double x, bool delta, double t_bar, double g_floor, bool* trimmed) {
    if (!(delta && x <= t_bar)) return 1.0;
    return 1.0 - 1.0 / floored(G.left_limit(x), x, g_floor, trimmed);
}

namespace {

void compute_row(const PanelRows& rows, std::size_t i, const std::vector<FoldModels>& models,
                 const std::vector<EstimatorKind>& kinds, const std::vector<double>& t_bars, double horizon,
                 double g_floor, std::size_t stride, std::vector<double>& y, std::vector<char>& trimmed) {
    const auto& m = models.at(static_cast<std::size_t>(rows.fold[i]));
    const auto h = rows.data.row(i);
    const bool need_s = std::any_of(kinds.begin(), kinds.end(), [](EstimatorKind k) { return k != EstimatorKind::IPCW; });
    const bool need_g = std::any_of(kinds.begin(), kinds.end(), [](EstimatorKind k) { return k != EstimatorKind::G; });
    const StepSurvival S = need_s ? m.event->predict(h, horizon) : StepSurvival(rows.data.start);
    const StepSurvival G = need_g ? m.censor->predict(h, horizon) : StepSurvival(rows.data.start);
    const double x = rows.data.time[i];
    const bool delta = rows.data.flag[i] != 0;
    for (std::size_t a = 0; a < kinds.size(); ++a) {
        for (std::size_t b = 0; b < t_bars.size(); ++b) {
            const std::size_t slot = (a * t_bars.size() + b) * stride + i;
            bool trim = false;
            switch (kinds[a]) {
                case EstimatorKind::MR: y[slot] = pseudo_mr(S, G, x, delta, t_bars[b], g_floor, &trim); break;
                case EstimatorKind::G: y[slot] = pseudo_g(S, t_bars[b]); break;
                case EstimatorKind::IPCW: y[slot] = pseudo_ipcw(G, x, delta, t_bars[b], g_floor, &trim); break;
            }
            trimmed[slot] = trim ? 1 : 0;
        }
    }
}

}  // namespace

std::vector<PseudoPanel> compute_panels(const PanelRows& rows, const std::vector<FoldModels>& models,
                                        const VisitSchedule& schedule, const std::vector<EstimatorKind>& kinds,
                                        const std::vector<double>& taus, double g_floor, Execution execution) {
    const std::size_t k = rows.data.window;
    const std::size_t n = rows.data.size();
    if (rows.subject.size() != n || rows.fold.size() != n) throw DomainError("compute_panels: row arrays differ in length");
    for (EstimatorKind kind : kinds) {
        for (const auto& m : models) {
            if (kind != EstimatorKind::IPCW && !m.event) throw DomainError("compute_panels: missing event model");
            if (kind != EstimatorKind::G && !m.censor) throw DomainError("compute_panels: missing censoring model");
        }
    }
    std::vector<double> t_bars;
    for (double tau : taus) t_bars.push_back(schedule.t_bar(k, tau));
    const double horizon = *std::max_element(t_bars.begin(), t_bars.end());

    const std::size_t slots = kinds.size() * taus.size();
    std::vector<double> y(slots * n);
    std::vector<char> trimmed(slots * n);

    if (execution == Execution::Serial) {
        for (std::size_t i = 0; i < n; ++i) compute_row(rows, i, models, kinds, t_bars, horizon, g_floor, n, y, trimmed);
    } else {
        // Exceptions cannot leave an OpenMP region; keep the first one and rethrow.
        std::exception_ptr failure;
        const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 16)
        for (std::ptrdiff_t i = 0; i < count; ++i) {
            try {
                compute_row(rows, static_cast<std::size_t>(i), models, kinds, t_bars, horizon, g_floor, n, y, trimmed);
            } catch (...) {
#pragma omp critical(mrsurv_panel_failure)
                if (!failure) failure = std::current_exception();
            }
        }
        if (failure) std::rethrow_exception(failure);
    }

    std::vector<PseudoPanel> panels(slots);
    for (std::size_t a = 0; a < kinds.size(); ++a) {
        for (std::size_t b = 0; b < taus.size(); ++b) {
            const std::size_t s = a * taus.size() + b;
            auto& p = panels[s];
            p.window = k;
            p.kind = kinds[a];
            p.tau = taus[b];
            p.t_bar = t_bars[b];
            p.subject = rows.subject;
            p.weight = rows.data.weight;
            p.fold = rows.fold;
            p.y.assign(y.begin() + static_cast<std::ptrdiff_t>(s * n), y.begin() + static_cast<std::ptrdiff_t>((s + 1) * n));
            p.trim_count = static_cast<std::size_t>(std::count(trimmed.begin() + static_cast<std::ptrdiff_t>(s * n),
                                                               trimmed.begin() + static_cast<std::ptrdiff_t>((s + 1) * n), 1));
        }
    }
    return panels;
}

void write_panel_csv(std::ostream& out, const PseudoPanel& panel, const Dataset& data) {
    out << "id,k,tau,estimator,Y,fold\n";
    for (std::size_t i = 0; i < panel.size(); ++i) {
        out << data.records.at(panel.subject[i]).id << ',' << panel.window + 1 << ',' << format_double(panel.tau) << ','
            << to_string(panel.kind) << ',' << format_double(panel.y[i]) << ',' << panel.fold[i] + 1 << '\n';
    }
}

}  // namespace mrsurv
