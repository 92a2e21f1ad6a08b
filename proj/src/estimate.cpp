#include "mrsurv/estimate.hpp"

#include "mrsurv/errors.hpp"
#include "mrsurv/rng.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <ostream>

namespace mrsurv {

std::vector<int> assign_folds(std::size_t n, int folds, std::uint64_t seed) {
    if (folds < 1) throw ConfigError("fold count must be at least 1");
    std::vector<int> out(n, 0);
    if (folds == 1) return out;
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    for (std::size_t pos = 0; pos < n; ++pos) out[perm[pos]] = static_cast<int>(pos % static_cast<std::size_t>(folds));
    return out;
}

std::vector<std::size_t> PanelSet::windows(const VisitSchedule& schedule, std::size_t tau_index) const {
    std::vector<std::size_t> out;
    for (std::size_t k = anchor; k <= schedule.last_window(taus.at(tau_index)); ++k) out.push_back(k);
    return out;
}

const PseudoPanel& PanelSet::find(std::size_t window, EstimatorKind kind, std::size_t tau_index) const {
    const double tau = taus.at(tau_index);
    for (const auto& p : panels) {
        if (p.window == window && p.kind == kind && p.tau == tau) return p;
    }
    throw DomainError("no " + std::string(to_string(kind)) + " panel for window " + std::to_string(window + 1) +
                      " at tau=" + format_double(tau));
}

namespace {

struct WindowRows {
    PanelRows event;
    WindowData censor;
};

WindowRows collect_rows(const Dataset& data, const VisitSchedule& schedule, std::size_t k,
                        const std::vector<int>& fold) {
    const double start = schedule.visit_time(k);
    const double end = schedule.window_end(k);
    WindowRows rows;
    auto init = [&](WindowData& d) {
        d.window = k;
        d.start = start;
        d.end = end;
        d.history_dim = data.schema.history_width(k);
    };
    init(rows.event.data);
    init(rows.censor);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& r = data.records[i];
        if (!(r.followup > start)) continue;
        const auto h = flatten_history(r, k);
        const double exit = std::min(r.followup, end);
        const bool inside = r.followup <= end;
        rows.event.data.push(h, exit, inside && r.event, r.weight);
        rows.censor.push(h, exit, inside && !r.event, r.weight);
        rows.event.subject.push_back(i);
        rows.event.fold.push_back(fold[i]);
    }
    return rows;
}

WindowData subset(const WindowData& d, const std::vector<int>& fold, int held_out) {
    WindowData out;
    out.window = d.window;
    out.start = d.start;
    out.end = d.end;
    out.history_dim = d.history_dim;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (fold[i] != held_out) out.push(d.row(i), d.time[i], d.flag[i] != 0, d.weight[i]);
    }
    return out;
}

std::vector<ModelPtr> fit_fold_models(const ModelChoice& choice, const WindowData& full, const std::vector<int>& fold,
                                      int folds, NuisanceRole role, const std::vector<FeatureTerm>& features,
                                      const std::vector<double>& extra, Execution execution) {
    std::vector<ModelPtr> models(static_cast<std::size_t>(folds));
    if (folds == 1 || choice.kind == ModelChoice::Kind::Oracle || choice.kind == ModelChoice::Kind::Unit) {
        auto shared = fit_model(choice, full, full, role, features, extra);
        std::fill(models.begin(), models.end(), shared);
        return models;
    }
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1) if (execution == Execution::Parallel)
    for (int f = 0; f < folds; ++f) {
        try {
            models[static_cast<std::size_t>(f)] = fit_model(choice, subset(full, fold, f), full, role, features, extra);
        } catch (...) {
#pragma omp critical(mrsurv_fold_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return models;
}

}  // namespace

PanelSet build_panels(const Dataset& data, const VisitSchedule& schedule, const NuisancePlan& plan,
                      const std::vector<EstimatorKind>& kinds, const PanelOptions& options) {
    if (kinds.empty()) throw ConfigError("no estimator requested");
    PanelSet set;
    set.anchor = schedule.anchor();
    set.taus = schedule.tau_grid();
    set.kinds = kinds;
    set.fold = assign_folds(data.size(), options.folds, options.seed);

    const bool need_s = std::any_of(kinds.begin(), kinds.end(), [](EstimatorKind k) { return k != EstimatorKind::IPCW; });
    const bool need_g = std::any_of(kinds.begin(), kinds.end(), [](EstimatorKind k) { return k != EstimatorKind::G; });
    const std::size_t last = schedule.last_window(schedule.horizon());
    for (std::size_t k = schedule.anchor(); k <= last; ++k) {
        WindowRows rows = collect_rows(data, schedule, k, set.fold);
        if (rows.event.data.size() == 0)
            throw FitError("empty risk set in window " + std::to_string(k + 1) + " (no subject with X > " +
                           format_double(schedule.visit_time(k)) + ")");
        std::vector<double> taus;
        for (double tau : set.taus) {
            if (tau > schedule.visit_time(k)) taus.push_back(tau);
        }
        std::vector<FoldModels> models(static_cast<std::size_t>(options.folds));
        if (need_s) {
            const auto features = build_feature_map(plan.event_features, data.schema, k);
            auto fitted = fit_fold_models(plan.event.at(k), rows.event.data, rows.event.fold, options.folds,
                                          NuisanceRole::Event, features, taus, options.execution);
            for (std::size_t f = 0; f < models.size(); ++f) models[f].event = fitted[f];
        }
        if (need_g) {
            const auto features = build_feature_map(plan.censor_features, data.schema, k);
            auto fitted = fit_fold_models(plan.censor.at(k), rows.censor, rows.event.fold, options.folds,
                                          NuisanceRole::Censor, features, taus, options.execution);
            for (std::size_t f = 0; f < models.size(); ++f) models[f].censor = fitted[f];
        }
        auto panels = compute_panels(rows.event, models, schedule, kinds, taus, options.trim, options.execution);
        for (auto& p : panels) set.panels.push_back(std::move(p));
    }
    return set;
}

std::vector<double> extract_w(const SubjectRecord& record, const CovariateSchema& schema, std::size_t anchor,
                              const std::vector<std::string>& columns) {
    const auto h = flatten_history(record, anchor);
    std::vector<double> w;
    w.reserve(columns.size());
    for (const auto& c : columns) w.push_back(h.at(*schema.history_index(c)));
    return w;
}

std::vector<double> isotonic_project(std::vector<double> v) {
    // Blocks of (mean, size); merge while a later block exceeds an earlier one.
    std::vector<double> mean;
    std::vector<std::size_t> size;
    for (double x : v) {
        mean.push_back(x);
        size.push_back(1);
        while (mean.size() > 1 && mean[mean.size() - 2] < mean.back()) {
            const std::size_t n = size.back() + size[size.size() - 2];
            const double m = (mean.back() * static_cast<double>(size.back()) +
                              mean[mean.size() - 2] * static_cast<double>(size[size.size() - 2])) /
                             static_cast<double>(n);
            mean.pop_back();
            size.pop_back();
            mean.back() = m;
            size.back() = n;
        }
    }
    std::size_t pos = 0;
    for (std::size_t b = 0; b < mean.size(); ++b) {
        for (std::size_t j = 0; j < size[b]; ++j) v[pos++] = std::clamp(mean[b], 0.0, 1.0);
    }
    return v;
}

ConditionalFit::ConditionalFit(EstimatorKind kind, std::vector<double> taus, LinearBasis basis, bool isotonic,
                               std::vector<std::vector<Eigen::VectorXd>> coefficients)
    : kind_(kind), taus_(std::move(taus)), basis_(std::move(basis)), isotonic_(isotonic), coef_(std::move(coefficients)) {}

std::vector<double> ConditionalFit::raw(std::span<const double> w) const {
    const Eigen::RowVectorXd x = basis_.expand(w);
    std::vector<double> out(taus_.size());
    for (std::size_t j = 0; j < taus_.size(); ++j) {
        double prod = 1.0;
        for (const auto& c : coef_[j]) prod *= x.dot(c);
        out[j] = prod;
    }
    return out;
}

std::vector<double> ConditionalFit::predict(std::span<const double> w) const {
    auto v = raw(w);
    for (double& x : v) x = std::clamp(x, 0.0, 1.0);
    if (isotonic_) v = isotonic_project(std::move(v));
    return v;
}

namespace {

std::vector<std::vector<double>> anchor_w(const Dataset& data, std::size_t anchor, double t_anchor,
                                          const std::vector<std::string>& columns, std::vector<double>* weights) {
    std::vector<std::vector<double>> rows;
    for (const auto& r : data.records) {
        if (!(r.followup > t_anchor)) continue;
        rows.push_back(extract_w(r, data.schema, anchor, columns));
        if (weights) weights->push_back(r.weight);
    }
    return rows;
}

std::size_t count_at_risk(const Dataset& data, double t) {
    return static_cast<std::size_t>(
        std::count_if(data.records.begin(), data.records.end(), [&](const SubjectRecord& r) { return r.followup > t; }));
}

PanelOptions options_of(const RunConfig& c, Execution execution) { return {c.folds, c.seed, c.trim, execution}; }

}  // namespace

ConditionalFit fit_conditional(const PanelSet& panels, EstimatorKind kind, const Dataset& data,
                               const VisitSchedule& schedule, const BasisSpec& spec, bool isotonic) {
    const double t_anchor = schedule.visit_time(schedule.anchor());
    LinearBasis basis(spec, anchor_w(data, schedule.anchor(), t_anchor, spec.columns, nullptr));

    // Basis rows per dataset subject at risk at the anchor.
    std::vector<Eigen::RowVectorXd> x(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data.records[i].followup > t_anchor)
            x[i] = basis.expand(extract_w(data.records[i], data.schema, schedule.anchor(), spec.columns));
    }

    std::vector<std::vector<Eigen::VectorXd>> coef(panels.taus.size());
    std::vector<std::size_t> trims(panels.taus.size(), 0);
    for (std::size_t j = 0; j < panels.taus.size(); ++j) {
        for (std::size_t k : panels.windows(schedule, j)) {
            const PseudoPanel& p = panels.find(k, kind, j);
            trims[j] += p.trim_count;
            Eigen::VectorXd c;
            if (basis.intercept_only()) {
                c = Eigen::VectorXd::Constant(1, weighted_mean(p.y, p.weight));
            } else {
                const auto n = static_cast<Eigen::Index>(p.size());
                Eigen::MatrixXd X(n, static_cast<Eigen::Index>(basis.size()));
                for (Eigen::Index r = 0; r < n; ++r) X.row(r) = x[p.subject[static_cast<std::size_t>(r)]];
                const Eigen::Map<const Eigen::VectorXd> y(p.y.data(), n);
                const Eigen::Map<const Eigen::VectorXd> w(p.weight.data(), n);
                try {
                    c = fit_wls(X, y, w);
                } catch (const FitError& e) {
                    throw FitError(std::string(e.what()) + " in window " + std::to_string(k + 1));
                }
            }
            coef[j].push_back(std::move(c));
        }
    }
    ConditionalFit fit(kind, panels.taus, std::move(basis), isotonic, std::move(coef));
    fit.n_at_risk_anchor = count_at_risk(data, t_anchor);
    fit.trim_count = std::move(trims);
    return fit;
}

ConditionalFit fit_conditional(const Dataset& data, const RunConfig& config, EstimatorKind kind, Execution execution) {
    const auto panels = build_panels(data, config.schedule, config.nuisance, {kind}, options_of(config, execution));
    return fit_conditional(panels, kind, data, config.schedule, config.w, config.isotonic);
}

MarginalFit fit_marginal(const PanelSet& panels, EstimatorKind kind, const Dataset& data,
                         const VisitSchedule& schedule) {
    const std::size_t n = data.size();
    double total_weight = 0.0;
    for (const auto& r : data.records) total_weight += r.weight;
    if (!(total_weight > 0.0)) throw FitError("marginal estimate over an empty sample");

    MarginalFit fit;
    fit.kind = kind;
    fit.taus = panels.taus;
    const std::size_t last = schedule.last_window(schedule.horizon());
    for (std::size_t k = schedule.anchor(); k <= last; ++k) {
        double at_risk = 0.0;
        for (const auto& r : data.records) {
            if (r.followup > schedule.visit_time(k)) at_risk += r.weight;
        }
        fit.pi.push_back(at_risk / total_weight);
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t j = 0; j < fit.taus.size(); ++j) {
        const auto ks = panels.windows(schedule, j);
        std::vector<double> q;
        std::size_t trims = 0;
        for (std::size_t k : ks) {
            const auto& p = panels.find(k, kind, j);
            q.push_back(weighted_mean(p.y, p.weight));
            trims += p.trim_count;
        }
        double estimate = 1.0;
        for (double v : q) estimate *= v;

        std::vector<double> d(n, 0.0);
        for (std::size_t m = 0; m < ks.size(); ++m) {
            double others = 1.0;
            for (std::size_t l = 0; l < ks.size(); ++l) {
                if (l != m) others *= q[l];
            }
            const auto& p = panels.find(ks[m], kind, j);
            const double scale = others / fit.pi[ks[m] - schedule.anchor()];
            for (std::size_t r = 0; r < p.size(); ++r) d[p.subject[r]] += scale * (p.y[r] - q[m]);
        }
        double second = 0.0;
        for (std::size_t i = 0; i < n; ++i) second += data.records[i].weight * d[i] * d[i];
        const double se = std::sqrt(second / total_weight / static_cast<double>(n));

        fit.estimate.push_back(estimate);
        fit.q.push_back(std::move(q));
        fit.influence.push_back(std::move(d));
        fit.trim_count.push_back(trims);
        if (kind == EstimatorKind::MR) {
            fit.se.push_back(se);
            fit.ci_lo.push_back(estimate - 1.96 * se);
            fit.ci_hi.push_back(estimate + 1.96 * se);
        } else {
            fit.se.push_back(nan);
            fit.ci_lo.push_back(nan);
            fit.ci_hi.push_back(nan);
        }
    }
    fit.n_at_risk_anchor = count_at_risk(data, schedule.visit_time(schedule.anchor()));
    return fit;
}

MarginalFit fit_marginal(const Dataset& data, const RunConfig& config, EstimatorKind kind, Execution execution) {
    const auto panels = build_panels(data, config.schedule, config.nuisance, {kind}, options_of(config, execution));
    return fit_marginal(panels, kind, data, config.schedule);
}

double contrast_cde(const ConditionalFit& fit, std::span<const double> w_treated, std::span<const double> w_control,
                    std::size_t tau_index, bool log_scale) {
    const double qt = fit.predict(w_treated).at(tau_index);
    const double qc = fit.predict(w_control).at(tau_index);
    if (log_scale) return std::log(1.0 - qt) - std::log(1.0 - qc);
    return (1.0 - qt) - (1.0 - qc);
}

void EstimateTable::append(const MarginalFit& fit) {
    marginal = true;
    for (std::size_t j = 0; j < fit.taus.size(); ++j) {
        rows.push_back({fit.kind, fit.taus[j], {}, fit.estimate[j], fit.se[j], fit.ci_lo[j], fit.ci_hi[j],
                        fit.n_at_risk_anchor, fit.trim_count[j]});
    }
}

void EstimateTable::append(const ConditionalFit& fit, const std::vector<std::vector<double>>& w_grid) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto& w : w_grid) {
        const auto q = fit.predict(w);
        for (std::size_t j = 0; j < fit.taus().size(); ++j) {
            rows.push_back({fit.kind(), fit.taus()[j], w, q[j], nan, nan, nan, fit.n_at_risk_anchor, fit.trim_count[j]});
        }
    }
}

void EstimateTable::write_csv(std::ostream& out) const {
    out << "estimator,tau";
    if (marginal) {
        out << ",w";
    } else {
        for (const auto& c : w_columns) out << ',' << c;
    }
    out << ",estimate,se,ci_lo,ci_hi,n_at_risk_anchor,trim_count\n";
    for (const auto& r : rows) {
        out << to_string(r.kind) << ',' << format_double(r.tau);
        if (marginal) {
            out << ",marginal";
        } else {
            for (double v : r.w) out << ',' << format_double(v);
        }
        out << ',' << format_double(r.estimate) << ',' << format_double(r.se) << ',' << format_double(r.ci_lo) << ','
            << format_double(r.ci_hi) << ',' << r.n_at_risk_anchor << ',' << r.trim_count << '\n';
    }
}

std::vector<ContrastRow> tabulate_contrast(const ConditionalFit& fit, const std::vector<std::vector<double>>& w_grid,
                                           const ContrastSpec& spec, const std::vector<std::string>& w_columns) {
    const auto col = static_cast<std::size_t>(std::find(w_columns.begin(), w_columns.end(), spec.column) - w_columns.begin());
    if (col >= w_columns.size()) throw ConfigError("contrast.column must be one of w.columns");
    std::vector<ContrastRow> out;
    for (const auto& base : w_grid) {
        auto treated = base;
        auto control = base;
        treated[col] = spec.treated;
        control[col] = spec.control;
        for (std::size_t j = 0; j < fit.taus().size(); ++j)
            out.push_back({fit.kind(), fit.taus()[j], base, contrast_cde(fit, treated, control, j, spec.log_scale)});
    }
    return out;
}

void write_contrast_csv(std::ostream& out, const std::vector<ContrastRow>& rows,
                        const std::vector<std::string>& w_columns, bool log_scale) {
    out << "estimator,tau";
    for (const auto& c : w_columns) out << ',' << c;
    out << (log_scale ? ",log_cde\n" : ",cde\n");
    for (const auto& r : rows) {
        out << to_string(r.kind) << ',' << format_double(r.tau);
        for (double v : r.w) out << ',' << format_double(v);
        out << ',' << format_double(r.cde) << '\n';
    }
}

RunResult run_estimation(const Dataset& data, const RunConfig& config, Execution execution) {
    validate_config(config);
    const auto panels = build_panels(data, config.schedule, config.nuisance, config.estimators,
                                     options_of(config, execution));
    RunResult result;
    result.fold_sizes.assign(static_cast<std::size_t>(config.folds), 0);
    for (int f : panels.fold) ++result.fold_sizes[static_cast<std::size_t>(f)];
    result.table.w_columns = config.w.columns;

    if (config.marginal) {
        for (EstimatorKind kind : config.estimators) result.table.append(fit_marginal(panels, kind, data, config.schedule));
        return result;
    }

    result.w_grid = config.w_grid;
    if (result.w_grid.empty()) {
        std::vector<double> weights;
        const auto rows = anchor_w(data, config.schedule.anchor(), config.schedule.visit_time(config.schedule.anchor()),
                                   config.w.columns, &weights);
        std::vector<double> means(config.w.columns.size(), 0.0);
        std::vector<double> column(rows.size());
        for (std::size_t c = 0; c < means.size(); ++c) {
            for (std::size_t i = 0; i < rows.size(); ++i) column[i] = rows[i][c];
            means[c] = weighted_mean(column, weights);
        }
        result.w_grid.push_back(std::move(means));
    }
    for (EstimatorKind kind : config.estimators) {
        const auto fit = fit_conditional(panels, kind, data, config.schedule, config.w, config.isotonic);
        result.table.append(fit, result.w_grid);
        if (config.contrast) {
            auto rows = tabulate_contrast(fit, result.w_grid, *config.contrast, config.w.columns);
            result.contrast.insert(result.contrast.end(), rows.begin(), rows.end());
        }
    }
    return result;
}

}  // namespace mrsurv
