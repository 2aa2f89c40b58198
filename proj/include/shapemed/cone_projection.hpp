#pragma once

// Least-squares projection onto the polyhedral cone
//     { V a + Z b : b >= 0 }
// solved with the hinge (active-set) algorithm on the residualized edges
// Delta = (I - P_V) Z. V is unconstrained and must have full column rank.

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace shapemed {

struct ConeProblem {
  Eigen::VectorXd response;
  Eigen::MatrixXd unconstrained;  // V, n x p
  Eigen::MatrixXd constrained;    // Z, n x q
};

struct ConeSolution {
  Eigen::VectorXd alpha;  // p
  Eigen::VectorXd beta;   // q, entrywise >= 0, zero outside active_set
  std::vector<Eigen::Index> active_set;  // sorted column indices into Z
  Eigen::VectorXd fitted;
  double residual_ss = 0.0;
  int iterations = 0;
};

/// Dual tolerance is `tol * ||y||` on the normalized dual Delta_j^T r / ||Delta_j||.
/// Throws RankDeficientError for rank-deficient V, ConvergenceError after 10 q
/// hinge additions.
ConeSolution project_onto_cone(const ConeProblem& problem, double tol = 1e-8);

struct ActiveRefit {
  /// p + q coefficients in [V, Z] order; eliminated Z columns are exactly 0.
  Eigen::VectorXd coefficients;
  /// (p + q) x (p + q); rows/columns of eliminated Z columns are 0.
  Eigen::MatrixXd covariance;
  double sigma2_hat = 0.0;
  double residual_ss = 0.0;
  Eigen::Index residual_df = 0;
  Eigen::VectorXd fitted;
};

/// OLS on [V, Z_active] with sigma^2 = RSS / (n - p - |active|).
ActiveRefit refit_active(const ConeProblem& problem, std::span<const Eigen::Index> active_set);

}  // namespace shapemed
