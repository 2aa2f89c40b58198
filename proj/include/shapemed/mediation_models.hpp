#pragma once

// Outcome model
//     Y = b0 + b1 A + f1(M) A + f2(M) (1 - A) + b4^T C + e1
// with f1, f2 shape-restricted regression splines, and mediator model
//     M = g0 + g1 A + g2^T C + e2.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "shapemed/cone_projection.hpp"
#include "shapemed/spline_basis.hpp"

namespace shapemed {

struct Dataset {
  Eigen::VectorXd outcome;
  Eigen::VectorXd exposure;  // 0/1
  Eigen::VectorXd mediator;
  Eigen::MatrixXd confounders;  // n x d, already numerically encoded
  std::vector<std::string> confounder_names;

  Eigen::Index size() const { return outcome.size(); }
  Eigen::Index num_confounders() const { return confounders.cols(); }
};

/// Throws DataError on size mismatch or non-finite values and ExposureError
/// when the exposure is not 0/1.
void validate(const Dataset& data);

enum class Shape { Increasing, Decreasing, Convex, Concave };

struct ShapeSpec {
  Shape exposed = Shape::Increasing;
  Shape unexposed = Shape::Increasing;

  bool operator==(const ShapeSpec&) const = default;
};

const char* to_string(Shape shape);
Shape shape_from_string(const std::string& name);

/// Increasing/Decreasing -> I-splines, Convex/Concave -> C-splines; negated
/// for Decreasing/Concave.
BasisKind basis_kind_for(Shape shape);

/// Row-wise scaling: out(i, j) = column(i) * matrix(i, j).
Eigen::MatrixXd face_split(const Eigen::VectorXd& column, const Eigen::MatrixXd& matrix);

struct DesignPartition {
  Eigen::MatrixXd w0;  // [1, (M.A), (M.(1-A))] identity terms present only for C-spline groups
  Eigen::MatrixXd w;   // [A, C]
  Eigen::MatrixXd z1;  // +/- basis . A
  Eigen::MatrixXd z0;  // +/- basis . (1 - A)
  std::vector<std::string> column_labels;  // order of [w0, w, z1, z0]
  BasisKind exposed_kind;
  BasisKind unexposed_kind;
  bool exposed_identity = false;    // M.A present in w0
  bool unexposed_identity = false;  // M.(1-A) present in w0

  Eigen::MatrixXd v() const;  // [w0, w]
  Eigen::MatrixXd z() const;  // [z1, z0]
  Eigen::Index num_columns() const { return w0.cols() + w.cols() + z1.cols() + z0.cols(); }
};

DesignPartition build_outcome_design(const Dataset& data, const ShapeSpec& shapes,
                                     const KnotSequence& knots);

/// Coefficient layout of a fitted group curve: for C-splines the identity
/// coefficient comes first, followed by the k spline coefficients.
struct GroupCurve {
  BasisKind kind;  // never negated in a fit; coefficients carry the sign
  Eigen::VectorXd coefficients;
};

struct OutcomeFit {
  double beta0 = 0.0;
  double beta1 = 0.0;
  Eigen::VectorXd beta2{};  // f1 coefficients (k, or k+1 with leading identity term)
  Eigen::VectorXd beta3{};  // f2 coefficients
  Eigen::VectorXd beta4{};  // d
  double sigma1_sq = 0.0;
  /// Covariance over [beta0, beta1, beta2, beta3, beta4] in that order.
  Eigen::MatrixXd covariance{};
  /// Kept columns of Z = [Z1, Z0], zero-based.
  std::vector<Eigen::Index> active_set{};
  KnotSequence knots;
  ShapeSpec shapes{};
  double residual_ss = 0.0;
  Eigen::Index residual_df = 0;
  Eigen::VectorXd fitted{};

  SplineFamily exposed_family() const { return basis_kind_for(shapes.exposed).family; }
  SplineFamily unexposed_family() const { return basis_kind_for(shapes.unexposed).family; }
  GroupCurve exposed_curve() const { return {{exposed_family(), false}, beta2}; }
  GroupCurve unexposed_curve() const { return {{unexposed_family(), false}, beta3}; }

  Eigen::Index beta1_index() const { return 1; }
  Eigen::Index beta2_offset() const { return 2; }
  Eigen::Index beta3_offset() const { return 2 + beta2.size(); }
  Eigen::Index beta4_offset() const { return 2 + beta2.size() + beta3.size(); }
};

struct MediatorFit {
  double gamma0 = 0.0;
  double gamma1 = 0.0;
  Eigen::VectorXd gamma2;
  double sigma2_sq = 0.0;
  /// Covariance over [gamma0, gamma1, gamma2].
  Eigen::MatrixXd covariance;
  Eigen::Index residual_df = 0;

  double mean(double a, const Eigen::VectorXd& c) const;
};

/// Number of coefficients in a group curve for the given family and k.
Eigen::Index curve_length(SplineFamily family, std::size_t num_bases);

/// Cone problem for a prepared design; exposed for consistency checks.
ConeProblem outcome_cone_problem(const Dataset& data, const DesignPartition& design);

OutcomeFit fit_outcome(const Dataset& data, const ShapeSpec& shapes, std::size_t num_bases);

/// Same as above with caller-supplied knots.
OutcomeFit fit_outcome(const Dataset& data, const ShapeSpec& shapes, const KnotSequence& knots);

MediatorFit fit_mediator(const Dataset& data);

}  // namespace shapemed
