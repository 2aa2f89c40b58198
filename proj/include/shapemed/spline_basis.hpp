#pragma once

// Quadratic I-spline and cubic C-spline bases for shape-restricted regression.
//
// Knots follow the doubled-boundary layout
//     t_1 = t_2 < t_3 < ... < t_{k+1} = t_{k+2}
// which yields exactly k I-spline (or C-spline) basis functions. All basis
// indices in this header are zero-based: index j refers to the (j+1)-th
// function of the usual one-based notation.
//
// A non-negative combination of I-spline columns is non-decreasing; a
// non-negative combination of C-spline columns plus any multiple of x is
// convex. Decreasing/concave fits use the negated columns.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace shapemed {

class KnotSequence {
 public:
  /// Validates the doubled-boundary layout; throws std::invalid_argument.
  explicit KnotSequence(std::vector<double> knots);

  std::span<const double> values() const { return knots_; }
  double operator[](std::size_t i) const { return knots_[i]; }
  std::size_t size() const { return knots_.size(); }

  /// Number of quadratic I-spline / cubic C-spline basis functions (k).
  std::size_t num_bases() const { return knots_.size() - 2; }

  double lower() const { return knots_.front(); }
  double upper() const { return knots_.back(); }

  /// Distinct breakpoints t_2, ..., t_{k+1}.
  std::vector<double> breakpoints() const;

  bool operator==(const KnotSequence&) const = default;

 private:
  std::vector<double> knots_;
};

enum class SplineFamily { IQuadratic, CCubic };

struct BasisKind {
  SplineFamily family = SplineFamily::IQuadratic;
  bool negated = false;

  bool operator==(const BasisKind&) const = default;
};

struct BasisMatrix {
  Eigen::MatrixXd values;
  BasisKind kind;
  KnotSequence knots;
};

/// M-spline of the given order via the Ramsay recursion. Valid indices are
/// 0 <= index < knots.size() - order. Zero outside [t_i, t_{i+order}).
double mspline_eval(double x, std::size_t index, int order, const KnotSequence& knots);

/// Quadratic I-spline I_i(x | 2, t); values in [0, 1], non-decreasing.
double ispline_eval(double x, std::size_t index, const KnotSequence& knots);

/// Cubic C-spline C_i(x | 2, t); convex, non-decreasing, linear right of t_{i+2}.
double cspline_eval(double x, std::size_t index, const KnotSequence& knots);

/// Basis function `index` of `family` (sign flip not applied).
double basis_eval(double x, std::size_t index, SplineFamily family, const KnotSequence& knots);

/// All k basis functions of `kind` at x, sign flip applied.
void basis_row(double x, const BasisKind& kind, const KnotSequence& knots, std::span<double> out);

/// Boundary knots at min/max of the data, interior knots at the
/// probabilities j/(k-1), j = 1..k-2, of the empirical quantile function
/// (linear interpolation between order statistics).
KnotSequence make_knots(std::span<const double> mediator_values, std::size_t num_bases);

/// n x k matrix; column j holds basis j evaluated at each value.
BasisMatrix basis_matrix(std::span<const double> values, const BasisKind& kind,
                         const KnotSequence& knots);

const char* to_string(SplineFamily family);
SplineFamily spline_family_from_string(const std::string& name);

}  // namespace shapemed
