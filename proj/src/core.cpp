#include "mrsurv/core.hpp"

#include "mrsurv/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace mrsurv {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    for (;;) {
        auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            cells.push_back(trim(line.substr(start)));
            break;
        }
        cells.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return cells;
}

bool is_missing(std::string_view cell) { return cell.empty() || cell == "NA" || cell == "na"; }

double parse_number(std::string_view cell, std::size_t row, std::string_view column) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(value)) {
        throw DataError("row " + std::to_string(row) + ": column '" + std::string(column) +
                        "' is not a finite number: '" + std::string(cell) + "'");
    }
    return value;
}

}  // namespace

VisitSchedule::VisitSchedule(std::vector<double> visit_times, std::size_t anchor,
                             std::vector<double> tau_grid)
    : visit_times_(std::move(visit_times)), anchor_(anchor), tau_grid_(std::move(tau_grid)) {
    if (visit_times_.empty()) throw ConfigError("schedule: at least one visit time is required");
    for (std::size_t k = 1; k < visit_times_.size(); ++k) {
        if (!(visit_times_[k] > visit_times_[k - 1]))
            throw ConfigError("schedule: visit times must be strictly increasing");
    }
    if (anchor_ >= visit_times_.size())
        throw ConfigError("schedule: anchor visit index must not exceed the number of visits");
    if (tau_grid_.empty()) throw ConfigError("schedule: tau grid is empty");
    for (std::size_t i = 1; i < tau_grid_.size(); ++i) {
        if (!(tau_grid_[i] > tau_grid_[i - 1]))
            throw ConfigError("schedule: tau grid must be strictly increasing");
    }
    if (!(tau_grid_.front() > visit_times_[anchor_]))
        throw ConfigError("schedule: every tau must exceed the anchor visit time t_anchor = " +
                          format_double(visit_times_[anchor_]));
}

double VisitSchedule::window_end(std::size_t k) const {
    if (k + 1 < visit_times_.size()) return visit_times_[k + 1];
    return std::max(horizon(), visit_times_.back());
}

double VisitSchedule::t_bar(std::size_t k, double tau) const {
    if (k + 1 < visit_times_.size()) return std::min(visit_times_[k + 1], tau);
    return tau;
}

std::size_t VisitSchedule::last_window(double tau) const {
    std::size_t k = 0;
    while (k + 1 < visit_times_.size() && visit_times_[k + 1] < tau) ++k;
    return k;
}

std::size_t CovariateSchema::history_width(std::size_t k) const {
    std::size_t width = 0;
    for (std::size_t v = 0; v <= k && v < visit_columns.size(); ++v) width += visit_columns[v].size();
    return width;
}

std::optional<std::size_t> CovariateSchema::history_index(std::string_view name) const {
    std::size_t offset = 0;
    for (const auto& columns : visit_columns) {
        for (std::size_t j = 0; j < columns.size(); ++j) {
            if (columns[j] == name) return offset + j;
        }
        offset += columns.size();
    }
    return std::nullopt;
}

std::size_t CovariateSchema::visit_of(std::string_view name) const {
    for (std::size_t v = 0; v < visit_columns.size(); ++v) {
        if (std::find(visit_columns[v].begin(), visit_columns[v].end(), name) != visit_columns[v].end())
            return v;
    }
    throw ConfigError("unknown covariate column '" + std::string(name) + "'");
}

std::string_view to_string(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::MR: return "MR";
        case EstimatorKind::G: return "Gcomp";
        case EstimatorKind::IPCW: return "IPCW";
    }
    return "?";
}

EstimatorKind parse_estimator(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "mr") return EstimatorKind::MR;
    if (lower == "g" || lower == "gcomp") return EstimatorKind::G;
    if (lower == "ipcw") return EstimatorKind::IPCW;
    throw ConfigError("unknown estimator '" + std::string(name) + "' (expected mr, g or ipcw)");
}

std::vector<double> flatten_history(const SubjectRecord& record, std::size_t k) {
    std::vector<double> out;
    for (std::size_t v = 0; v <= k; ++v) {
        const auto& cov = record.covariates.at(v);
        if (!cov) throw DomainError("flatten_history: visit covariates absent (subject not at risk)");
        out.insert(out.end(), cov->begin(), cov->end());
    }
    return out;
}

void validate_record(const SubjectRecord& r, const VisitSchedule& schedule,
                     const CovariateSchema& schema) {
    const std::string who = "subject '" + r.id + "': ";
    if (!(r.followup > 0.0) || !std::isfinite(r.followup))
        throw DataError(who + "follow-up X must be a positive finite number");
    if (!(r.weight > 0.0) || !std::isfinite(r.weight)) throw DataError(who + "weight must be positive");
    if (r.covariates.size() != schedule.num_visits())
        throw DataError(who + "expected covariates for " + std::to_string(schedule.num_visits()) + " visits");
    if (schema.num_visits() != schedule.num_visits())
        throw DataError("schema lists " + std::to_string(schema.num_visits()) + " visits but the schedule has " +
                        std::to_string(schedule.num_visits()));
    bool absent_seen = false;
    for (std::size_t k = 0; k < schedule.num_visits(); ++k) {
        const bool at_risk = r.followup > schedule.visit_time(k);
        const auto& cov = r.covariates[k];
        if (cov && !at_risk)
            throw DataError(who + "covariates present at visit " + std::to_string(k + 1) +
                            " although X <= t_k (L_k is observed only while at risk)");
        if (!cov && at_risk)
            throw DataError(who + "covariates missing at visit " + std::to_string(k + 1) +
                            " although X > t_k (L_k is observed while at risk)");
        if (cov && absent_seen)
            throw DataError(who + "covariates reappear after an absent visit");
        if (!cov) absent_seen = true;
        if (cov && cov->size() != schema.visit_columns[k].size())
            throw DataError(who + "wrong number of covariates at visit " + std::to_string(k + 1));
    }
}

Dataset load_dataset(std::istream& in, const VisitSchedule& schedule, const CovariateSchema& schema) {
    if (schema.num_visits() != schedule.num_visits())
        throw ConfigError("covariate schema must list columns for each of the " +
                          std::to_string(schedule.num_visits()) + " visits");
    std::string line;
    if (!std::getline(in, line)) throw DataError("dataset is empty (missing header)");
    auto header = split_csv(line);
    std::unordered_map<std::string, std::size_t> position;
    for (std::size_t j = 0; j < header.size(); ++j) position.emplace(std::string(header[j]), j);

    auto column = [&](const std::string& name) -> std::size_t {
        auto it = position.find(name);
        if (it == position.end()) throw DataError("dataset header lacks column '" + name + "'");
        return it->second;
    };
    const std::size_t id_col = column("id");
    const std::size_t x_col = column("X");
    const std::size_t delta_col = column("Delta");
    std::optional<std::size_t> weight_col;
    if (auto it = position.find("weight"); it != position.end()) weight_col = it->second;
    std::vector<std::vector<std::size_t>> cov_cols(schema.num_visits());
    for (std::size_t v = 0; v < schema.num_visits(); ++v) {
        for (const auto& name : schema.visit_columns[v]) cov_cols[v].push_back(column(name));
    }

    Dataset data;
    data.schema = schema;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        auto cells = split_csv(line);
        if (cells.size() != header.size())
            throw DataError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                            " cells, found " + std::to_string(cells.size()));
        SubjectRecord r;
        r.id = std::string(cells[id_col]);
        r.followup = parse_number(cells[x_col], row, "X");
        const double delta = parse_number(cells[delta_col], row, "Delta");
        if (delta != 0.0 && delta != 1.0)
            throw DataError("row " + std::to_string(row) + ": Delta must be 0 or 1");
        r.event = delta == 1.0;
        if (weight_col) r.weight = parse_number(cells[*weight_col], row, "weight");
        r.covariates.resize(schema.num_visits());
        for (std::size_t v = 0; v < schema.num_visits(); ++v) {
            std::size_t missing = 0;
            std::vector<double> values;
            for (std::size_t j = 0; j < cov_cols[v].size(); ++j) {
                auto cell = cells[cov_cols[v][j]];
                if (is_missing(cell)) {
                    ++missing;
                } else {
                    values.push_back(parse_number(cell, row, schema.visit_columns[v][j]));
                }
            }
            if (missing == 0) {
                r.covariates[v] = std::move(values);
            } else if (missing != cov_cols[v].size()) {
                throw DataError("row " + std::to_string(row) + ": visit " + std::to_string(v + 1) +
                                " is partially observed");
            }
        }
        try {
            validate_record(r, schedule, schema);
        } catch (const DataError& e) {
            throw DataError("row " + std::to_string(row) + ": " + e.what());
        }
        data.records.push_back(std::move(r));
    }
    if (data.records.empty()) throw DataError("dataset has no rows");
    return data;
}

Dataset load_dataset(const std::string& path, const VisitSchedule& schedule,
                     const CovariateSchema& schema) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset '" + path + "'");
    return load_dataset(in, schedule, schema);
}

std::string format_double(double value) {
    if (std::isnan(value)) return "NA";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

void write_dataset(std::ostream& out, const Dataset& data) {
    const bool weighted = std::any_of(data.records.begin(), data.records.end(),
                                      [](const SubjectRecord& r) { return r.weight != 1.0; });
    out << "id,X,Delta";
    if (weighted) out << ",weight";
    for (const auto& columns : data.schema.visit_columns) {
        for (const auto& name : columns) out << ',' << name;
    }
    out << '\n';
    for (const auto& r : data.records) {
        out << r.id << ',' << format_double(r.followup) << ',' << (r.event ? 1 : 0);
        if (weighted) out << ',' << format_double(r.weight);
        for (std::size_t v = 0; v < data.schema.num_visits(); ++v) {
            for (std::size_t j = 0; j < data.schema.visit_columns[v].size(); ++j) {
                out << ',';
                if (v < r.covariates.size() && r.covariates[v]) out << format_double((*r.covariates[v])[j]);
            }
        }
        out << '\n';
    }
}

void write_dataset(const std::string& path, const Dataset& data) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write dataset '" + path + "'");
    write_dataset(out, data);
}

}  // namespace mrsurv
