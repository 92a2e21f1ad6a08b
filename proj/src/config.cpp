#include "mrsurv/config.hpp"

#include "mrsurv/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace mrsurv {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key())) throw ConfigError("unknown key '" + where + it.key() + "'");
    }
}

template <class T>
T get(const json& j, const std::string& key) {
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        throw ConfigError("key '" + key + "' has the wrong type");
    }
}

const json& require(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key)) throw ConfigError("missing required key '" + where + key + "'");
    return obj.at(key);
}

std::vector<ModelChoice> parse_models(const json& j, const std::string& key, std::size_t windows) {
    std::vector<ModelChoice> out;
    if (j.is_string()) {
        out.assign(windows, parse_model_choice(j.get<std::string>()));
    } else if (j.is_array()) {
        for (const auto& e : j) out.push_back(parse_model_choice(get<std::string>(e, key)));
        if (out.size() != windows)
            throw ConfigError("key '" + key + "' lists " + std::to_string(out.size()) + " models for " +
                              std::to_string(windows) + " windows");
    } else {
        throw ConfigError("key '" + key + "' must be a model name or a list with one name per window");
    }
    return out;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> config_keys() {
    return {
        {"schedule.visit_times", "strictly increasing visit times t_1 < ... < t_K (required)"},
        {"schedule.anchor", "1-based visit whose history defines W (default 1)"},
        {"schedule.tau", "increasing evaluation times, each beyond the anchor visit (required)"},
        {"covariates", "list with one list of column names per visit (required)"},
        {"w.columns", "columns of the anchor history used as W (default none: intercept only)"},
        {"w.degree", "polynomial degree 1..3 of each W column (default 1)"},
        {"w.interactions", "add pairwise products of W columns (default false)"},
        {"nuisance.event", "event model: km, cox, unit or oracle:<dgp>, or one per window (default cox)"},
        {"nuisance.censor", "censoring model, same choices (default cox)"},
        {"nuisance.event_features", "Cox terms for the event model, e.g. L11, abs(L11), L13^2 (default all columns)"},
        {"nuisance.censor_features", "Cox terms for the censoring model (default all columns)"},
        {"crossfit.folds", "number of cross-fitting folds, 1 disables (default 10)"},
        {"crossfit.seed", "seed of the fold assignment (default 1)"},
        {"trim", "floor for censoring survival in denominators, in (0, 0.5) (default 0.05)"},
        {"isotonic", "clamp to [0,1] and project onto nonincreasing curves over tau (default true)"},
        {"estimators", "subset of mr, g, ipcw (default [mr])"},
        {"marginal", "estimate marginal survival with Wald intervals instead of Q(w) (default false)"},
        {"w_grid", "list of W points for conditional output (default: W column means)"},
        {"contrast.column", "binary W column defining treatment for the controlled direct effect"},
        {"contrast.treated", "value of that column in the treated arm (default 1)"},
        {"contrast.control", "value in the control arm (default 0)"},
        {"contrast.scale", "additive or log (default additive)"},
    };
}

RunConfig parse_config(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config must be a JSON object");
    reject_unknown(root, "", {"schedule", "covariates", "w", "nuisance", "crossfit", "trim", "isotonic", "estimators",
                              "marginal", "w_grid", "contrast"});
    RunConfig c;

    const json& sched = require(root, "schedule", "");
    reject_unknown(sched, "schedule.", {"visit_times", "anchor", "tau"});
    auto visits = get<std::vector<double>>(require(sched, "visit_times", "schedule."), "schedule.visit_times");
    int anchor = sched.contains("anchor") ? get<int>(sched.at("anchor"), "schedule.anchor") : 1;
    if (anchor < 1) throw ConfigError("schedule.anchor is 1-based and must be at least 1");
    const json& tau_json = require(sched, "tau", "schedule.");
    std::vector<double> taus = tau_json.is_number() ? std::vector<double>{tau_json.get<double>()}
                                                    : get<std::vector<double>>(tau_json, "schedule.tau");
    c.schedule = VisitSchedule(std::move(visits), static_cast<std::size_t>(anchor - 1), std::move(taus));

    c.schema.visit_columns =
        get<std::vector<std::vector<std::string>>>(require(root, "covariates", ""), "covariates");
    if (c.schema.num_visits() != c.schedule.num_visits())
        throw ConfigError("covariates must list one group of columns per visit");

    if (root.contains("w")) {
        const json& w = root.at("w");
        reject_unknown(w, "w.", {"columns", "degree", "interactions"});
        if (w.contains("columns")) c.w.columns = get<std::vector<std::string>>(w.at("columns"), "w.columns");
        if (w.contains("degree")) c.w.degree = get<int>(w.at("degree"), "w.degree");
        if (w.contains("interactions")) c.w.interactions = get<bool>(w.at("interactions"), "w.interactions");
    }

    const std::size_t K = c.schedule.num_visits();
    c.nuisance.event.assign(K, parse_model_choice("cox"));
    c.nuisance.censor.assign(K, parse_model_choice("cox"));
    if (root.contains("nuisance")) {
        const json& n = root.at("nuisance");
        reject_unknown(n, "nuisance.", {"event", "censor", "event_features", "censor_features"});
        if (n.contains("event")) c.nuisance.event = parse_models(n.at("event"), "nuisance.event", K);
        if (n.contains("censor")) c.nuisance.censor = parse_models(n.at("censor"), "nuisance.censor", K);
        if (n.contains("event_features"))
            c.nuisance.event_features = get<std::vector<std::string>>(n.at("event_features"), "nuisance.event_features");
        if (n.contains("censor_features"))
            c.nuisance.censor_features =
                get<std::vector<std::string>>(n.at("censor_features"), "nuisance.censor_features");
    }

    if (root.contains("crossfit")) {
        const json& cf = root.at("crossfit");
        reject_unknown(cf, "crossfit.", {"folds", "seed"});
        if (cf.contains("folds")) c.folds = get<int>(cf.at("folds"), "crossfit.folds");
        if (cf.contains("seed")) c.seed = get<std::uint64_t>(cf.at("seed"), "crossfit.seed");
    }
    if (root.contains("trim")) c.trim = get<double>(root.at("trim"), "trim");
    if (root.contains("isotonic")) c.isotonic = get<bool>(root.at("isotonic"), "isotonic");
    if (root.contains("estimators")) {
        c.estimators.clear();
        for (const auto& e : root.at("estimators")) c.estimators.push_back(parse_estimator(get<std::string>(e, "estimators")));
        if (c.estimators.empty()) throw ConfigError("estimators must name at least one estimator");
    }
    if (root.contains("marginal")) c.marginal = get<bool>(root.at("marginal"), "marginal");
    if (root.contains("w_grid")) c.w_grid = get<std::vector<std::vector<double>>>(root.at("w_grid"), "w_grid");
    if (root.contains("contrast")) {
        const json& ct = root.at("contrast");
        reject_unknown(ct, "contrast.", {"column", "treated", "control", "scale"});
        ContrastSpec spec;
        spec.column = get<std::string>(require(ct, "column", "contrast."), "contrast.column");
        if (ct.contains("treated")) spec.treated = get<double>(ct.at("treated"), "contrast.treated");
        if (ct.contains("control")) spec.control = get<double>(ct.at("control"), "contrast.control");
        if (ct.contains("scale")) {
            const auto scale = get<std::string>(ct.at("scale"), "contrast.scale");
            if (scale == "log") spec.log_scale = true;
            else if (scale != "additive") throw ConfigError("contrast.scale must be additive or log");
        }
        c.contrast = spec;
    }
    validate_config(c);
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

void validate_config(const RunConfig& c) {
    if (!(c.trim > 0.0 && c.trim < 0.5)) throw ConfigError("trim must lie in (0, 0.5)");
    if (c.folds < 1) throw ConfigError("crossfit.folds must be at least 1");
    const std::size_t K = c.schedule.num_visits();
    if (c.schema.num_visits() != K) throw ConfigError("covariates must list one group of columns per visit");
    if (c.nuisance.event.size() != K || c.nuisance.censor.size() != K)
        throw ConfigError("nuisance models must be given for every window");
    std::set<std::string> seen;
    for (const auto& group : c.schema.visit_columns) {
        for (const auto& name : group) {
            if (name == "id" || name == "X" || name == "Delta" || name == "weight")
                throw ConfigError("covariate column '" + name + "' clashes with a reserved column");
            if (!seen.insert(name).second) throw ConfigError("covariate column '" + name + "' listed twice");
        }
    }
    for (const auto& name : c.w.columns) {
        if (c.schema.visit_of(name) > c.schedule.anchor())
            throw ConfigError("w.columns: '" + name + "' is measured after the anchor visit");
    }
    if (c.w.degree < 1 || c.w.degree > 3) throw ConfigError("w.degree must be 1, 2 or 3");
    for (const auto& point : c.w_grid) {
        if (point.size() != c.w.columns.size())
            throw ConfigError("w_grid points must have one value per w.columns entry");
    }
    for (std::size_t k = 0; k < K; ++k) {
        build_feature_map(c.nuisance.event_features, c.schema, k);
        build_feature_map(c.nuisance.censor_features, c.schema, k);
        for (const auto* choice : {&c.nuisance.event[k], &c.nuisance.censor[k]}) {
            if (choice->kind != ModelChoice::Kind::Oracle) continue;
            const DgpSpec& dgp = find_dgp(choice->dgp);
            if (dgp.visit_times != c.schedule.visit_times() || dgp.schema.visit_columns != c.schema.visit_columns)
                throw ConfigError("oracle:" + choice->dgp + " requires the mechanism's visit times and covariate columns");
        }
    }
    if (c.contrast) {
        const auto& cols = c.w.columns;
        if (std::find(cols.begin(), cols.end(), c.contrast->column) == cols.end())
            throw ConfigError("contrast.column must be one of w.columns");
        if (c.marginal) throw ConfigError("contrast requires conditional estimation (marginal = false)");
    }
}

}  // namespace mrsurv
