#pragma once

#include <Eigen/Dense>

namespace shapemed {

/// Ordinary least squares via column-pivoted QR.
struct OlsFit {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd fitted;
  double residual_ss = 0.0;
  /// (X^T X)^{-1}; multiply by a residual variance to get the covariance.
  Eigen::MatrixXd xtx_inverse;
};

/// Throws RankDeficientError when X does not have full column rank.
/// A design with zero columns yields an empty fit with fitted = 0.
OlsFit ols(const Eigen::MatrixXd& design, const Eigen::VectorXd& response);

/// Relative pivot threshold used for every rank decision in the library.
inline constexpr double kRankThreshold = 1e-10;

}  // namespace shapemed
