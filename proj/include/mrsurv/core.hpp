#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mrsurv {

/// Visit times t_1 < ... < t_K, the anchor visit whose covariates define W,
/// and the evaluation times. Indices are zero-based throughout the library.
class VisitSchedule {
public:
    VisitSchedule() = default;
    /// Throws ConfigError when an invariant is violated.
    VisitSchedule(std::vector<double> visit_times, std::size_t anchor,
                  std::vector<double> tau_grid);

    std::size_t num_visits() const noexcept { return visit_times_.size(); }
    std::size_t anchor() const noexcept { return anchor_; }
    const std::vector<double>& visit_times() const noexcept { return visit_times_; }
    const std::vector<double>& tau_grid() const noexcept { return tau_grid_; }
    double visit_time(std::size_t k) const { return visit_times_.at(k); }

    /// Largest evaluation time; closes the last window.
    double horizon() const noexcept { return tau_grid_.back(); }
    /// Right end of window k: t_{k+1}, or the horizon for the last window.
    double window_end(std::size_t k) const;
    /// t_{k+1} ∧ tau.
    double t_bar(std::size_t k, double tau) const;
    /// Last window k with t_k < tau; windows after it contribute a factor of one.
    std::size_t last_window(double tau) const;

private:
    std::vector<double> visit_times_;
    std::size_t anchor_ = 0;
    std::vector<double> tau_grid_;
};

/// One subject's observed data O = (H_K, X, Delta).
struct SubjectRecord {
    std::string id;
    /// Entry k holds L_k; present iff followup > t_k.
    std::vector<std::optional<std::vector<double>>> covariates;
    double followup = 0.0;
    bool event = false;
    double weight = 1.0;
};

/// Column names measured at each visit.
struct CovariateSchema {
    std::vector<std::vector<std::string>> visit_columns;

    std::size_t num_visits() const noexcept { return visit_columns.size(); }
    /// Number of flattened history entries through visit k (inclusive).
    std::size_t history_width(std::size_t k) const;
    /// Position of a column inside the flattened history, or nullopt.
    std::optional<std::size_t> history_index(std::string_view name) const;
    /// Visit that measures a column; throws ConfigError when unknown.
    std::size_t visit_of(std::string_view name) const;
};

struct Dataset {
    CovariateSchema schema;
    std::vector<SubjectRecord> records;

    std::size_t size() const noexcept { return records.size(); }
};

enum class EstimatorKind { MR, G, IPCW };

std::string_view to_string(EstimatorKind kind);
/// Accepts "mr", "g", "gcomp", "ipcw" (case-insensitive). Throws ConfigError.
EstimatorKind parse_estimator(std::string_view name);

/// Flatten L_1..L_k of a record into one vector. Requires the record to be at risk at t_k.
std::vector<double> flatten_history(const SubjectRecord& record, std::size_t k);

/// Throws DataError naming the violated invariant.
void validate_record(const SubjectRecord& record, const VisitSchedule& schedule,
                     const CovariateSchema& schema);

/// Reads the wide CSV layout: id, X, Delta, optional weight, and one column per
/// covariate named in the schema. Empty or "NA" cells mark absent covariates.
Dataset load_dataset(std::istream& in, const VisitSchedule& schedule,
                     const CovariateSchema& schema);
Dataset load_dataset(const std::string& path, const VisitSchedule& schedule,
                     const CovariateSchema& schema);

void write_dataset(std::ostream& out, const Dataset& data);
void write_dataset(const std::string& path, const Dataset& data);

/// Round-trippable decimal representation used by every CSV writer.
std::string format_double(double value);

}  // namespace mrsurv
