#pragma once

#include "mrsurv/core.hpp"
#include "mrsurv/nuisance.hpp"
#include "mrsurv/regression.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mrsurv {

/// Per-window nuisance choices (index 0 = first visit window).
struct NuisancePlan {
    std::vector<ModelChoice> event;
    std::vector<ModelChoice> censor;
    std::vector<std::string> event_features;
    std::vector<std::string> censor_features;
};

struct ContrastSpec {
    std::string column;
    double treated = 1.0;
    double control = 0.0;
    bool log_scale = false;
};

struct RunConfig {
    VisitSchedule schedule;
    CovariateSchema schema;
    BasisSpec w;
    NuisancePlan nuisance;
    int folds = 10;
    std::uint64_t seed = 1;
    double trim = 0.05;
    bool isotonic = true;
    std::vector<EstimatorKind> estimators{EstimatorKind::MR};
    bool marginal = false;
    /// Points at which conditional estimates are reported; empty means the
    /// weighted column means of W over the anchor risk set.
    std::vector<std::vector<double>> w_grid;
    std::optional<ContrastSpec> contrast;
};

/// Throws ConfigError naming the offending key.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);

/// Checks the invariants shared by every entry point (trim, folds, model
/// and basis columns against the schema).
void validate_config(const RunConfig& config);

/// (key, description) for every key the parser consumes.
std::vector<std::pair<std::string, std::string>> config_keys();

}  // namespace mrsurv
