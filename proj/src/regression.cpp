#include "mrsurv/regression.hpp"

#include "mrsurv/errors.hpp"

#include <cmath>

namespace mrsurv {

LinearBasis::LinearBasis(const BasisSpec& spec, const std::vector<std::vector<double>>& w_rows) : spec_(spec) {
    if (spec.degree < 1 || spec.degree > 3) throw ConfigError("basis degree must be 1, 2 or 3");
    const std::size_t d = spec.columns.size();
    binary_.assign(d, true);
    for (const auto& row : w_rows) {
        if (row.size() != d) throw DomainError("LinearBasis: W row has the wrong width");
        for (std::size_t j = 0; j < d; ++j) {
            if (row[j] != 0.0 && row[j] != 1.0) binary_[j] = false;
        }
    }
    labels_.push_back("(intercept)");
    for (std::size_t j = 0; j < d; ++j) {
        labels_.push_back(spec.columns[j]);
        if (binary_[j]) continue;
        for (int p = 2; p <= spec.degree; ++p) labels_.push_back(spec.columns[j] + "^" + std::to_string(p));
    }
    if (spec.interactions) {
        for (std::size_t a = 0; a < d; ++a) {
            for (std::size_t b = a + 1; b < d; ++b) labels_.push_back(spec.columns[a] + ":" + spec.columns[b]);
        }
    }
}

Eigen::RowVectorXd LinearBasis::expand(std::span<const double> w) const {
    if (w.size() != binary_.size()) throw DomainError("LinearBasis: W has the wrong width");
    Eigen::RowVectorXd out(static_cast<Eigen::Index>(labels_.size()));
    Eigen::Index c = 0;
    out(c++) = 1.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
        double power = w[j];
        out(c++) = power;
        if (binary_[j]) continue;
        for (int p = 2; p <= spec_.degree; ++p) {
            power *= w[j];
            out(c++) = power;
        }
    }
    if (spec_.interactions) {
        for (std::size_t a = 0; a < w.size(); ++a) {
            for (std::size_t b = a + 1; b < w.size(); ++b) out(c++) = w[a] * w[b];
        }
    }
    return out;
}

double weighted_mean(std::span<const double> y, std::span<const double> w) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        num += w[i] * y[i];
        den += w[i];
    }
    if (!(den > 0.0)) throw FitError("weighted mean over an empty or zero-weight set");
    return num / den;
}

Eigen::VectorXd fit_wls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
    if (X.rows() < X.cols()) throw FitError("regression has fewer rows than basis functions");
    const Eigen::VectorXd root = w.array().sqrt();
    const Eigen::MatrixXd A = root.asDiagonal() * X;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    if (qr.rank() < X.cols())
        throw FitError("rank-deficient regression basis (rank " + std::to_string(qr.rank()) + " of " +
                       std::to_string(X.cols()) + ")");
    return qr.solve(root.cwiseProduct(y));
}

}  // namespace mrsurv
