#include "mrsurv/nuisance.hpp"

#include "mrsurv/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mrsurv {

void WindowData::push(std::span<const double> h, double t, bool f, double w) {
    if (h.size() != history_dim) throw DomainError("WindowData: history width mismatch");
    history.insert(history.end(), h.begin(), h.end());
    time.push_back(t);
    flag.push_back(f ? 1 : 0);
    weight.push_back(w);
}

// ---------------------------------------------------------------------------
// Kaplan-Meier

StepSurvival kaplan_meier(const WindowData& data) {
    if (data.size() == 0) throw FitError("Kaplan-Meier: empty risk set in window " + std::to_string(data.window + 1));
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return data.time[a] < data.time[b]; });

    double at_risk = 0.0;
    for (double w : data.weight) at_risk += w;
    std::vector<double> times;
    std::vector<double> values;
    double surv = 1.0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double t = data.time[order[i]];
        double events = 0.0;
        double leaving = 0.0;
        std::size_t j = i;
        for (; j < order.size() && data.time[order[j]] == t; ++j) {
            const double w = data.weight[order[j]];
            leaving += w;
            if (data.flag[order[j]]) events += w;
        }
        if (events > 0.0) {
            surv *= 1.0 - events / at_risk;
            if (surv < 0.0) surv = 0.0;
            times.push_back(t);
            values.push_back(surv);
        }
        at_risk -= leaving;
        i = j;
    }
    return StepSurvival(data.start, std::move(times), std::move(values));
}

StepSurvival KaplanMeierModel::predict(std::span<const double>, double) const { return curve_; }

ModelPtr fit_km(const WindowData& data) { return std::make_shared<KaplanMeierModel>(kaplan_meier(data)); }

// ---------------------------------------------------------------------------
// Feature maps

double FeatureTerm::apply(std::span<const double> history) const {
    const double x = history[column];
    switch (transform) {
        case Transform::Raw: return x;
        case Transform::Abs: return std::abs(x);
        case Transform::Power: return std::pow(x, power);
    }
    return x;
}

std::vector<FeatureTerm> build_feature_map(const std::vector<std::string>& names, const CovariateSchema& schema,
                                           std::size_t window) {
    std::vector<FeatureTerm> terms;
    if (names.empty()) {
        std::size_t column = 0;
        for (std::size_t v = 0; v <= window && v < schema.num_visits(); ++v) {
            for (const auto& name : schema.visit_columns[v]) terms.push_back({column++, FeatureTerm::Transform::Raw, 1, name});
        }
        return terms;
    }
    for (const auto& spec : names) {
        FeatureTerm term;
        term.label = spec;
        std::string column = spec;
        if (spec.size() > 5 && spec.rfind("abs(", 0) == 0 && spec.back() == ')') {
            column = spec.substr(4, spec.size() - 5);
            term.transform = FeatureTerm::Transform::Abs;
        } else if (auto caret = spec.find('^'); caret != std::string::npos) {
            column = spec.substr(0, caret);
            term.transform = FeatureTerm::Transform::Power;
            try {
                term.power = std::stoi(spec.substr(caret + 1));
            } catch (const std::exception&) {
                throw ConfigError("feature '" + spec + "': bad exponent");
            }
            if (term.power < 1 || term.power > 3) throw ConfigError("feature '" + spec + "': exponent must be 1..3");
        }
        const std::size_t visit = schema.visit_of(column);
        if (visit > window) continue;
        term.column = *schema.history_index(column);
        terms.push_back(term);
    }
    return terms;
}

// ---------------------------------------------------------------------------
// Cox proportional hazards with Breslow ties

CoxDesign make_cox_design(const WindowData& data, const std::vector<FeatureTerm>& features) {
    const auto n = static_cast<Eigen::Index>(data.size());
    const auto p = static_cast<Eigen::Index>(features.size());
    CoxDesign d;
    d.z.resize(n, p);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto h = data.row(static_cast<std::size_t>(i));
        for (Eigen::Index j = 0; j < p; ++j) d.z(i, j) = features[static_cast<std::size_t>(j)].apply(h);
    }
    double total = 0.0;
    d.means = Eigen::VectorXd::Zero(p);
    for (Eigen::Index i = 0; i < n; ++i) {
        total += data.weight[static_cast<std::size_t>(i)];
        d.means += data.weight[static_cast<std::size_t>(i)] * d.z.row(i).transpose();
    }
    if (total > 0.0) d.means /= total;
    d.z.rowwise() -= d.means.transpose();
    d.time = data.time;
    d.event = data.flag;
    d.weight = data.weight;
    return d;
}

CoxDerivatives cox_derivatives(const CoxDesign& d, const Eigen::VectorXd& beta) {
    const auto n = static_cast<std::size_t>(d.z.rows());
    const auto p = d.z.cols();
    CoxDerivatives out;
    out.score = Eigen::VectorXd::Zero(p);
    out.information = Eigen::MatrixXd::Zero(p, p);
    if (n == 0) return out;

    const Eigen::VectorXd eta = d.z * beta;
    const double shift = eta.maxCoeff();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d.time[a] > d.time[b]; });

    double s0 = 0.0;
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);
    std::size_t i = 0;
    while (i < n) {
        const double t = d.time[order[i]];
        std::size_t j = i;
        for (; j < n && d.time[order[j]] == t; ++j) {
            const auto r = static_cast<Eigen::Index>(order[j]);
            const double risk = d.weight[order[j]] * std::exp(eta(r) - shift);
            s0 += risk;
            s1 += risk * d.z.row(r).transpose();
            s2.noalias() += risk * d.z.row(r).transpose() * d.z.row(r);
        }
        double events = 0.0;
        Eigen::VectorXd event_z = Eigen::VectorXd::Zero(p);
        for (std::size_t m = i; m < j; ++m) {
            if (!d.event[order[m]]) continue;
            const auto r = static_cast<Eigen::Index>(order[m]);
            const double w = d.weight[order[m]];
            events += w;
            event_z += w * d.z.row(r).transpose();
            out.loglik += w * eta(r);
        }
        if (events > 0.0) {
            const Eigen::VectorXd mean = s1 / s0;
            out.loglik -= events * (std::log(s0) + shift);
            out.score += event_z - events * mean;
            out.information += events * (s2 / s0 - mean * mean.transpose());
        }
        i = j;
    }
    return out;
}

CoxBreslowModel::CoxBreslowModel(const WindowData& data, std::vector<FeatureTerm> features, Eigen::VectorXd beta)
    : features_(std::move(features)), beta_(std::move(beta)), start_(data.start), baseline_(data.start) {
    const CoxDesign d = make_cox_design(data, features_);
    if (beta_.size() != d.z.cols()) throw DomainError("CoxBreslowModel: coefficient length mismatch");
    means_ = d.means;
    const Eigen::VectorXd eta = d.z * beta_;
    const std::size_t n = data.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d.time[a] > d.time[b]; });

    // Risk-set sums in descending time, hazard increments collected in reverse.
    std::vector<double> rev_times;
    std::vector<double> rev_increments;
    double s0 = 0.0;
    std::size_t i = 0;
    while (i < n) {
        const double t = d.time[order[i]];
        std::size_t j = i;
        double events = 0.0;
        for (; j < n && d.time[order[j]] == t; ++j) {
            s0 += d.weight[order[j]] * std::exp(eta(static_cast<Eigen::Index>(order[j])));
            if (d.event[order[j]]) events += d.weight[order[j]];
        }
        if (events > 0.0) {
            rev_times.push_back(t);
            rev_increments.push_back(events / s0);
        }
        i = j;
    }
    times_.assign(rev_times.rbegin(), rev_times.rend());
    cumhaz_.resize(times_.size());
    double cum = 0.0;
    std::vector<double> values(times_.size());
    for (std::size_t m = 0; m < times_.size(); ++m) {
        cum += rev_increments[times_.size() - 1 - m];
        cumhaz_[m] = cum;
        values[m] = std::exp(-cum);
    }
    baseline_ = StepSurvival(start_, times_, std::move(values));
}

StepSurvival CoxBreslowModel::predict(std::span<const double> history, double horizon) const {
    double lp = 0.0;
    for (std::size_t j = 0; j < features_.size(); ++j)
        lp += beta_(static_cast<Eigen::Index>(j)) * (features_[j].apply(history) - means_(static_cast<Eigen::Index>(j)));
    const double rel = std::exp(lp);
    std::vector<double> t;
    std::vector<double> v;
    t.reserve(times_.size());
    v.reserve(times_.size());
    double previous = 1.0;
    for (std::size_t m = 0; m < times_.size() && times_[m] <= horizon; ++m) {
        t.push_back(times_[m]);
        previous = std::min(previous, std::exp(-cumhaz_[m] * rel));
        v.push_back(previous);
    }
    return StepSurvival(start_, std::move(t), std::move(v));
}

std::shared_ptr<const CoxBreslowModel> fit_cox_breslow(const WindowData& data, std::vector<FeatureTerm> features,
                                                       const CoxOptions& options) {
    const std::string where = "Cox fit in window " + std::to_string(data.window + 1) + ": ";
    if (data.size() == 0) throw FitError(where + "empty risk set");
    const bool any_event = std::any_of(data.flag.begin(), data.flag.end(), [](char f) { return f != 0; });

    const CoxDesign design = make_cox_design(data, features);
    const Eigen::Index p = design.z.cols();

    // Columns with zero spread keep a zero coefficient.
    std::vector<Eigen::Index> active;
    Eigen::VectorXd sd = Eigen::VectorXd::Zero(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        sd(j) = std::sqrt(design.z.col(j).squaredNorm() / static_cast<double>(design.z.rows()));
        if (sd(j) > 1e-12) active.push_back(j);
    }
    const auto q = static_cast<Eigen::Index>(active.size());
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    int iterations = 0;
    // Without events the likelihood is flat and the baseline hazard is zero for every beta.
    if (q > 0 && any_event) {
        Eigen::MatrixXd za(design.z.rows(), q);
        for (Eigen::Index j = 0; j < q; ++j) za.col(j) = design.z.col(active[static_cast<std::size_t>(j)]);
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(za);
        if (qr.rank() < q) throw FitError(where + "design matrix is rank deficient after centering");

        CoxDesign sub{za, Eigen::VectorXd::Zero(q), design.time, design.event, design.weight};
        Eigen::VectorXd b = Eigen::VectorXd::Zero(q);
        CoxDerivatives cur = cox_derivatives(sub, b);
        // A monotone likelihood flattens the score while the Newton step stays
        // near one unit, so convergence also requires a small step.
        while (true) {
            const double grad = cur.score.norm();
            Eigen::LDLT<Eigen::MatrixXd> ldlt(cur.information);
            if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
                throw FitError(where + "singular information matrix (monotone likelihood?)");
            const Eigen::VectorXd step = ldlt.solve(cur.score);
            double scaled_step = 0.0;
            for (Eigen::Index j = 0; j < q; ++j)
                scaled_step = std::max(scaled_step, std::abs(step(j)) * sd(active[static_cast<std::size_t>(j)]));
            if (grad <= options.gradient_tolerance && scaled_step <= options.step_tolerance) break;
            if (iterations >= options.max_iterations)
                throw FitError(where + "Newton-Raphson did not converge after " + std::to_string(iterations) +
                               " iterations (gradient norm " + format_double(grad) + ")");
            ++iterations;
            double scale = 1.0;
            CoxDerivatives next = cox_derivatives(sub, b + step);
            int halvings = 0;
            while (!(next.loglik >= cur.loglik - 1e-12 * std::abs(cur.loglik)) && halvings < options.max_halvings) {
                scale *= 0.5;
                ++halvings;
                next = cox_derivatives(sub, b + scale * step);
            }
            b += scale * step;
            cur = std::move(next);
            for (Eigen::Index j = 0; j < q; ++j) {
                if (std::abs(b(j)) * sd(active[static_cast<std::size_t>(j)]) > options.divergence_bound)
                    throw FitError(where + "monotone likelihood: coefficient diverges");
            }
        }
        for (Eigen::Index j = 0; j < q; ++j) beta(active[static_cast<std::size_t>(j)]) = b(j);
    }
    auto model = std::make_shared<CoxBreslowModel>(data, std::move(features), beta);
    model->set_iterations(iterations);
    return model;
}

// ---------------------------------------------------------------------------
// Oracle

OracleModel::OracleModel(const DgpSpec& dgp, std::size_t window, NuisanceRole role, std::vector<double> grid)
    : dgp_(&dgp), window_(window), role_(role), start_(dgp.visit_times.at(window)), grid_(std::move(grid)) {
    if (window >= dgp.num_visits()) throw ConfigError("oracle: window outside the mechanism's visits");
    for (double g : grid_) log_offset_.push_back(std::log(g - start_));
}

StepSurvival OracleModel::predict(std::span<const double> history, double horizon) const {
    const WeibullLaw* law = nullptr;
    if (role_ == NuisanceRole::Event) {
        law = &dgp_->event_laws[window_];
    } else if (dgp_->censor_laws[window_]) {
        law = &*dgp_->censor_laws[window_];
    }
    if (law == nullptr) return StepSurvival(start_);

    // exp(-((t - start) / b)^a) evaluated as exp(-exp(a (log(t - start) - log b))).
    const double log_scale = std::log(law->scale(history));
    const double shape = law->shape;
    std::vector<double> t;
    std::vector<double> v;
    t.reserve(grid_.size());
    v.reserve(grid_.size());
    double previous = 1.0;
    for (std::size_t i = 0; i < grid_.size(); ++i) {
        const double g = grid_[i];
        if (g > horizon) break;
        double s = (law->cutoff && g >= *law->cutoff) ? 0.0 : std::exp(-std::exp(shape * (log_offset_[i] - log_scale)));
        previous = std::min(previous, s);
        t.push_back(g);
        v.push_back(previous);
    }
    return StepSurvival(start_, std::move(t), std::move(v));
}

ModelPtr fit_oracle(const DgpSpec& dgp, const WindowData& data, NuisanceRole role, const std::vector<double>& extra) {
    std::vector<double> grid(data.time.begin(), data.time.end());
    grid.push_back(data.end);
    for (double e : extra) {
        if (e > data.start && e < data.end) grid.push_back(e);
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    grid.erase(std::remove_if(grid.begin(), grid.end(), [&](double g) { return !(g > data.start); }), grid.end());
    return std::make_shared<OracleModel>(dgp, data.window, role, std::move(grid));
}

// ---------------------------------------------------------------------------

std::string ModelChoice::name() const {
    switch (kind) {
        case Kind::KaplanMeier: return "km";
        case Kind::Cox: return "cox";
        case Kind::Unit: return "unit";
        case Kind::Oracle: return "oracle:" + dgp;
    }
    return "?";
}

ModelChoice parse_model_choice(const std::string& name) {
    if (name == "km") return {ModelChoice::Kind::KaplanMeier, {}};
    if (name == "cox") return {ModelChoice::Kind::Cox, {}};
    if (name == "unit") return {ModelChoice::Kind::Unit, {}};
    if (name.rfind("oracle:", 0) == 0) {
        ModelChoice c{ModelChoice::Kind::Oracle, name.substr(7)};
        find_dgp(c.dgp);
        return c;
    }
    throw ConfigError("unknown nuisance model '" + name + "' (expected km, cox, unit or oracle:<dgp>)");
}

ModelPtr fit_model(const ModelChoice& choice, const WindowData& training, const WindowData& oracle_grid_data,
                   NuisanceRole role, const std::vector<FeatureTerm>& features,
                   const std::vector<double>& oracle_extra) {
    switch (choice.kind) {
        case ModelChoice::Kind::KaplanMeier: return fit_km(training);
        case ModelChoice::Kind::Cox: return fit_cox_breslow(training, features);
        case ModelChoice::Kind::Unit: return std::make_shared<UnitModel>(training.start);
        case ModelChoice::Kind::Oracle: return fit_oracle(find_dgp(choice.dgp), oracle_grid_data, role, oracle_extra);
    }
    throw ConfigError("unhandled nuisance model");
}

}  // namespace mrsurv
