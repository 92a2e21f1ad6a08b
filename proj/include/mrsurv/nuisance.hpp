#pragma once

#include "mrsurv/core.hpp"
#include "mrsurv/dgp.hpp"
#include "mrsurv/stepfn.hpp"

#include <Eigen/Dense>

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mrsurv {

/// Training data for one window: at-risk subjects, their flattened history,
/// absolute exit time X ∧ end, and the target flag (event for the event model,
/// in-window censoring for the censor model).
struct WindowData {
    std::size_t window = 0;
    double start = 0.0;
    double end = 0.0;
    std::size_t history_dim = 0;
    std::vector<double> history;  // row-major, size() * history_dim
    std::vector<double> time;
    std::vector<char> flag;
    std::vector<double> weight;

    std::size_t size() const noexcept { return time.size(); }
    std::span<const double> row(std::size_t i) const {
        return {history.data() + i * history_dim, history_dim};
    }
    void push(std::span<const double> h, double t, bool f, double w);
};

/// Conditional survival curve t ↦ S(t | h_k) on a window.
class ConditionalSurvivalModel {
public:
    virtual ~ConditionalSurvivalModel() = default;
    /// Curve on (start, horizon]; equals one at the window start.
    virtual StepSurvival predict(std::span<const double> history, double horizon) const = 0;
};

using ModelPtr = std::shared_ptr<const ConditionalSurvivalModel>;

/// S ≡ 1 on the window.
class UnitModel final : public ConditionalSurvivalModel {
public:
    explicit UnitModel(double start) : start_(start) {}
    StepSurvival predict(std::span<const double>, double) const override { return StepSurvival(start_); }

private:
    double start_;
};

/// Covariate-free product-limit estimate.
class KaplanMeierModel final : public ConditionalSurvivalModel {
public:
    explicit KaplanMeierModel(StepSurvival curve) : curve_(std::move(curve)) {}
    StepSurvival predict(std::span<const double> history, double horizon) const override;
    const StepSurvival& curve() const noexcept { return curve_; }

private:
    StepSurvival curve_;
};

/// Weighted product-limit curve; throws FitError on an empty risk set.
StepSurvival kaplan_meier(const WindowData& data);
ModelPtr fit_km(const WindowData& data);

/// A regressor built from one history column: raw, |x| or x^p.
struct FeatureTerm {
    enum class Transform { Raw, Abs, Power };
    std::size_t column = 0;  // index into the flattened history
    Transform transform = Transform::Raw;
    int power = 1;
    std::string label;
    double apply(std::span<const double> history) const;
};

/// Parses names like "L11", "abs(L11)" or "L13^2". Terms whose column is
/// measured after visit `window` are dropped. An empty list means every
/// history column through that visit.
std::vector<FeatureTerm> build_feature_map(const std::vector<std::string>& names,
                                           const CovariateSchema& schema, std::size_t window);

/// Newton-Raphson controls.
struct CoxOptions {
    int max_iterations = 50;
    double gradient_tolerance = 1e-9;
    double step_tolerance = 1e-6;  // on |step_j| * sd_j
    int max_halvings = 30;
    /// |beta_j| * sd_j beyond this is treated as a divergent (monotone) likelihood.
    double divergence_bound = 30.0;
};

/// Design matrix of a Cox fit: features centered at their weighted means.
struct CoxDesign {
    Eigen::MatrixXd z;            // n x p, centered
    Eigen::VectorXd means;
    std::vector<double> time;
    std::vector<char> event;
    std::vector<double> weight;
};
CoxDesign make_cox_design(const WindowData& data, const std::vector<FeatureTerm>& features);

/// Breslow-tie log partial likelihood, its score and observed information.
struct CoxDerivatives {
    double loglik = 0.0;
    Eigen::VectorXd score;
    Eigen::MatrixXd information;
};
CoxDerivatives cox_derivatives(const CoxDesign& design, const Eigen::VectorXd& beta);

class CoxBreslowModel final : public ConditionalSurvivalModel {
public:
    /// Breslow baseline computed for the given coefficients.
    CoxBreslowModel(const WindowData& data, std::vector<FeatureTerm> features, Eigen::VectorXd beta);

    StepSurvival predict(std::span<const double> history, double horizon) const override;

    const Eigen::VectorXd& beta() const noexcept { return beta_; }
    int iterations() const noexcept { return iterations_; }
    /// exp(-Λ0(t)) at the covariate means.
    const StepSurvival& baseline() const noexcept { return baseline_; }
    void set_iterations(int n) { iterations_ = n; }

private:
    std::vector<FeatureTerm> features_;
    Eigen::VectorXd beta_;
    Eigen::VectorXd means_;
    double start_;
    std::vector<double> times_;
    std::vector<double> cumhaz_;
    StepSurvival baseline_;
    int iterations_ = 0;
};

/// Maximizes the Breslow partial likelihood by Newton-Raphson with step
/// halving. Constant features get a zero coefficient, and without events the
/// fit is beta = 0 with a unit curve. Throws FitError on an empty risk set, a
/// rank-deficient design, a monotone likelihood, or the iteration limit.
std::shared_ptr<const CoxBreslowModel> fit_cox_breslow(const WindowData& data, std::vector<FeatureTerm> features,
                                                       const CoxOptions& options = {});

enum class NuisanceRole { Event, Censor };

/// True conditional law of a known mechanism, evaluated on a fixed time grid.
class OracleModel final : public ConditionalSurvivalModel {
public:
    OracleModel(const DgpSpec& dgp, std::size_t window, NuisanceRole role, std::vector<double> grid);
    StepSurvival predict(std::span<const double> history, double horizon) const override;

private:
    const DgpSpec* dgp_;
    std::size_t window_;
    NuisanceRole role_;
    double start_;
    std::vector<double> grid_;
    std::vector<double> log_offset_;  // log(grid - start)
};

/// Grid = sorted distinct exit times of `data`, the window end, and any
/// `extra` points inside the window (evaluation times).
ModelPtr fit_oracle(const DgpSpec& dgp, const WindowData& data, NuisanceRole role,
                    const std::vector<double>& extra = {});

/// Parsed nuisance name: "km", "cox", "unit" or "oracle:<dgp-name>".
struct ModelChoice {
    enum class Kind { KaplanMeier, Cox, Unit, Oracle };
    Kind kind = Kind::KaplanMeier;
    std::string dgp;
    std::string name() const;
};
/// Throws ConfigError for an unknown name.
ModelChoice parse_model_choice(const std::string& name);

/// Dispatches on the choice. `oracle_grid_data` supplies the discretization
/// grid for oracle models (normally the full window risk set).
ModelPtr fit_model(const ModelChoice& choice, const WindowData& training, const WindowData& oracle_grid_data,
                   NuisanceRole role, const std::vector<FeatureTerm>& features,
                   const std::vector<double>& oracle_extra = {});

}  // namespace mrsurv
