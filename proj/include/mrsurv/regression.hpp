#pragma once

#include "mrsurv/core.hpp"

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace mrsurv {

/// Basis for W: intercept, powers 1..degree of each selected column, and
/// optionally all pairwise products of the raw columns. 0/1 columns are never
/// raised to a power since x^p = x for them.
struct BasisSpec {
    std::vector<std::string> columns;
    int degree = 1;
    bool interactions = false;
};

class LinearBasis {
public:
    /// `w_rows` holds the W values of the rows used to detect 0/1 columns.
    LinearBasis(const BasisSpec& spec, const std::vector<std::vector<double>>& w_rows);

    std::size_t size() const noexcept { return labels_.size(); }
    std::size_t input_dim() const noexcept { return binary_.size(); }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    bool intercept_only() const noexcept { return labels_.size() == 1; }

    Eigen::RowVectorXd expand(std::span<const double> w) const;

private:
    BasisSpec spec_;
    std::vector<bool> binary_;
    std::vector<std::string> labels_;
};

/// Σ w_i y_i / Σ w_i, accumulated left to right.
double weighted_mean(std::span<const double> y, std::span<const double> w);

/// Weighted least squares by column-pivoted QR of diag(sqrt w) X. Throws
/// FitError when X is rank deficient.
Eigen::VectorXd fit_wls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w);

}  // namespace mrsurv
