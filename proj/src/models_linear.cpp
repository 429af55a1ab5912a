#include <Eigen/Dense>
#include <cmath>

#include "countyml/error.hpp"
#include "countyml/models.hpp"

namespace countyml {

double LinearModel::predict_row(const double* row, std::size_t p) const {
  if (p != coefficients.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                "linear model has " + std::to_string(coefficients.size()) +
                    " coefficients, input has " + std::to_string(p));
  }
  double value = intercept;
  for (std::size_t j = 0; j < p; ++j) value += coefficients[j] * row[j];
  return value;
}

// Centering the design before the solve keeps the intercept exact: the fit
// passes through (feature means, target mean) by construction, which linear
// SHAP relies on.
LinearModel fit_linear(const DesignMatrix& matrix, LinearFitInfo* info) {
  matrix.validate();
  if (matrix.n <= matrix.p) {
    throw Error(ErrorKind::InvalidArgument,
                "fit_linear needs n > p; got n = " + std::to_string(matrix.n) +
                    ", p = " + std::to_string(matrix.p));
  }
  const auto n = static_cast<Eigen::Index>(matrix.n);
  const auto p = static_cast<Eigen::Index>(matrix.p);

  Eigen::MatrixXd x(n, p);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      x(i, j) = matrix.at(static_cast<std::size_t>(i),
                          static_cast<std::size_t>(j));
    }
    y(i) = matrix.y[static_cast<std::size_t>(i)];
  }

  const Eigen::RowVectorXd x_means = x.colwise().mean();
  const double y_mean = y.mean();
  x.rowwise() -= x_means;
  y.array() -= y_mean;

  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(x);
  const auto rank = static_cast<std::size_t>(cod.rank());
  const Eigen::VectorXd beta = cod.solve(y);  // minimum-norm when deficient

  LinearModel model;
  model.feature_names = matrix.feature_names;
  model.coefficients.assign(beta.data(), beta.data() + p);
  model.training_feature_means.assign(x_means.data(), x_means.data() + p);
  model.intercept = y_mean;
  for (Eigen::Index j = 0; j < p; ++j) {
    model.intercept -= beta(j) * x_means(j);
  }

  if (info) {
    info->rank = rank;
    info->rank_deficient = rank < matrix.p;
    info->dependent_columns.clear();
    info->warning.clear();
    if (info->rank_deficient) {
      // Columns pivoted past the numerical rank are the dependent ones.
      const auto& perm = cod.colsPermutation().indices();
      for (Eigen::Index j = static_cast<Eigen::Index>(rank); j < p; ++j) {
        info->dependent_columns.push_back(
            matrix.feature_names[static_cast<std::size_t>(perm(j))]);
      }
      info->warning = "design is rank deficient (rank " +
                      std::to_string(rank) + " of " +
                      std::to_string(matrix.p) +
                      "); using the minimum-norm solution";
    }
  }
  return model;
}

}  // namespace countyml
