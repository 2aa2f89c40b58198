#include "shapemed/mediation_models.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "shapemed/errors.hpp"
#include "shapemed/least_squares.hpp"

namespace shapemed {

void validate(const Dataset& data) {
  const Eigen::Index n = data.outcome.size();
  if (n == 0) throw DataError("dataset is empty");
  if (data.exposure.size() != n || data.mediator.size() != n ||
      (data.confounders.cols() > 0 && data.confounders.rows() != n)) {
    throw DataError("dataset fields have inconsistent lengths");
  }
  if (!data.confounder_names.empty() &&
      static_cast<Eigen::Index>(data.confounder_names.size()) != data.confounders.cols()) {
    throw DataError("confounder names do not match confounder columns");
  }
  if (!data.outcome.allFinite() || !data.mediator.allFinite() || !data.exposure.allFinite() ||
      !data.confounders.allFinite()) {
    throw DataError("dataset contains missing or non-finite values");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = data.exposure(i);
    if (a != 0.0 && a != 1.0) {
      throw ExposureError("exposure must be coded 0/1; row " + std::to_string(i) + " has " +
                          std::to_string(a));
    }
  }
}

const char* to_string(Shape shape) {
  switch (shape) {
    case Shape::Increasing: return "Increasing";
    case Shape::Decreasing: return "Decreasing";
    case Shape::Convex: return "Convex";
    case Shape::Concave: return "Concave";
  }
  return "?";
}

Shape shape_from_string(const std::string& name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (s == "increasing") return Shape::Increasing;
  if (s == "decreasing") return Shape::Decreasing;
  if (s == "convex") return Shape::Convex;
  if (s == "concave") return Shape::Concave;
  throw std::invalid_argument("unknown shape '" + name +
                              "' (expected increasing, decreasing, convex or concave)");
}

BasisKind basis_kind_for(Shape shape) {
  switch (shape) {
    case Shape::Increasing: return {SplineFamily::IQuadratic, false};
    case Shape::Decreasing: return {SplineFamily::IQuadratic, true};
    case Shape::Convex: return {SplineFamily::CCubic, false};
    case Shape::Concave: return {SplineFamily::CCubic, true};
  }
  return {};
}

Eigen::MatrixXd face_split(const Eigen::VectorXd& column, const Eigen::MatrixXd& matrix) {
  if (column.size() != matrix.rows()) throw DataError("face_split: row counts differ");
  return column.asDiagonal() * matrix;
}

Eigen::MatrixXd DesignPartition::v() const {
  Eigen::MatrixXd out(w0.rows(), w0.cols() + w.cols());
  out << w0, w;
  return out;
}

Eigen::MatrixXd DesignPartition::z() const {
  Eigen::MatrixXd out(z1.rows(), z1.cols() + z0.cols());
  out << z1, z0;
  return out;
}

Eigen::Index curve_length(SplineFamily family, std::size_t num_bases) {
  return static_cast<Eigen::Index>(num_bases) + (family == SplineFamily::CCubic ? 1 : 0);
}

DesignPartition build_outcome_design(const Dataset& data, const ShapeSpec& shapes,
                                     const KnotSequence& knots) {
  validate(data);
  const Eigen::Index n = data.size();
  const Eigen::Index d = data.num_confounders();
  const std::size_t k = knots.num_bases();

  DesignPartition design;
  design.exposed_kind = basis_kind_for(shapes.exposed);
  design.unexposed_kind = basis_kind_for(shapes.unexposed);
  design.exposed_identity = design.exposed_kind.family == SplineFamily::CCubic;
  design.unexposed_identity = design.unexposed_kind.family == SplineFamily::CCubic;

  const Eigen::VectorXd& a = data.exposure;
  const Eigen::VectorXd not_a = Eigen::VectorXd::Ones(n) - a;
  const std::span<const double> m(data.mediator.data(), static_cast<std::size_t>(n));

  const Eigen::Index w0_cols = 1 + (design.exposed_identity ? 1 : 0) +
                               (design.unexposed_identity ? 1 : 0);
  design.w0.resize(n, w0_cols);
  design.w0.col(0).setOnes();
  design.column_labels.push_back("intercept");
  Eigen::Index col = 1;
  if (design.exposed_identity) {
    design.w0.col(col++) = data.mediator.cwiseProduct(a);
    design.column_labels.push_back("M*A");
  }
  if (design.unexposed_identity) {
    design.w0.col(col++) = data.mediator.cwiseProduct(not_a);
    design.column_labels.push_back("M*(1-A)");
  }

  design.w.resize(n, 1 + d);
  design.w.col(0) = a;
  if (d > 0) design.w.rightCols(d) = data.confounders;
  design.column_labels.push_back("A");
  for (Eigen::Index j = 0; j < d; ++j) {
    design.column_labels.push_back(data.confounder_names.empty()
                                       ? "C" + std::to_string(j + 1)
                                       : data.confounder_names[static_cast<std::size_t>(j)]);
  }

  design.z1 = face_split(a, basis_matrix(m, design.exposed_kind, knots).values);
  design.z0 = face_split(not_a, basis_matrix(m, design.unexposed_kind, knots).values);
  const auto block_label = [](const BasisKind& kind, const char* group, std::size_t j) {
    std::string name = kind.negated ? "-" : "";
    name += kind.family == SplineFamily::IQuadratic ? "I" : "C";
    return name + std::to_string(j + 1) + "*" + group;
  };
  for (std::size_t j = 0; j < k; ++j) design.column_labels.push_back(block_label(design.exposed_kind, "A", j));
  for (std::size_t j = 0; j < k; ++j) design.column_labels.push_back(block_label(design.unexposed_kind, "(1-A)", j));
  return design;
}

ConeProblem outcome_cone_problem(const Dataset& data, const DesignPartition& design) {
  return {data.outcome, design.v(), design.z()};
}

OutcomeFit fit_outcome(const Dataset& data, const ShapeSpec& shapes, std::size_t num_bases) {
  validate(data);
  const std::span<const double> m(data.mediator.data(), static_cast<std::size_t>(data.size()));
  return fit_outcome(data, shapes, make_knots(m, num_bases));
}

OutcomeFit fit_outcome(const Dataset& data, const ShapeSpec& shapes, const KnotSequence& knots) {
  const DesignPartition design = build_outcome_design(data, shapes, knots);
  const Eigen::Index n = data.size();
  if (n <= design.num_columns()) {
    throw DataError("fit_outcome: need more observations (" + std::to_string(n) +
                    ") than design columns (" + std::to_string(design.num_columns()) + ")");
  }

  const ConeProblem problem = outcome_cone_problem(data, design);
  const ConeSolution cone = project_onto_cone(problem);
  const ActiveRefit refit = refit_active(problem, cone.active_set);

  const std::size_t k = knots.num_bases();
  const Eigen::Index d = data.num_confounders();
  OutcomeFit fit{.knots = knots};
  fit.shapes = shapes;
  const Eigen::Index len2 = curve_length(design.exposed_kind.family, k);
  const Eigen::Index len3 = curve_length(design.unexposed_kind.family, k);
  fit.beta2 = Eigen::VectorXd::Zero(len2);
  fit.beta3 = Eigen::VectorXd::Zero(len3);
  const Eigen::Index total = 2 + len2 + len3 + d;

  // Design column -> (canonical index, sign). Negated blocks flip back here.
  std::vector<std::pair<Eigen::Index, double>> target;
  target.reserve(static_cast<std::size_t>(design.num_columns()));
  const Eigen::Index off2 = 2;
  const Eigen::Index off3 = 2 + len2;
  const Eigen::Index off4 = 2 + len2 + len3;
  target.emplace_back(0, 1.0);
  if (design.exposed_identity) target.emplace_back(off2, 1.0);
  if (design.unexposed_identity) target.emplace_back(off3, 1.0);
  target.emplace_back(1, 1.0);
  for (Eigen::Index j = 0; j < d; ++j) target.emplace_back(off4 + j, 1.0);
  const Eigen::Index skip2 = design.exposed_identity ? 1 : 0;
  const Eigen::Index skip3 = design.unexposed_identity ? 1 : 0;
  const double sign1 = design.exposed_kind.negated ? -1.0 : 1.0;
  const double sign0 = design.unexposed_kind.negated ? -1.0 : 1.0;
  for (std::size_t j = 0; j < k; ++j) target.emplace_back(off2 + skip2 + static_cast<Eigen::Index>(j), sign1);
  for (std::size_t j = 0; j < k; ++j) target.emplace_back(off3 + skip3 + static_cast<Eigen::Index>(j), sign0);

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(total);
  fit.covariance = Eigen::MatrixXd::Zero(total, total);
  for (std::size_t r = 0; r < target.size(); ++r) {
    const auto [tr, sr] = target[r];
    theta(tr) = sr * refit.coefficients(static_cast<Eigen::Index>(r));
    for (std::size_t c = 0; c < target.size(); ++c) {
      const auto [tc, sc] = target[c];
      fit.covariance(tr, tc) = sr * sc *
          refit.covariance(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
  }
  fit.beta0 = theta(0);
  fit.beta1 = theta(1);
  fit.beta2 = theta.segment(off2, len2);
  fit.beta3 = theta.segment(off3, len3);
  fit.beta4 = theta.segment(off4, d);
  fit.sigma1_sq = refit.sigma2_hat;
  fit.active_set = cone.active_set;
  fit.residual_ss = refit.residual_ss;
  fit.residual_df = refit.residual_df;
  fit.fitted = refit.fitted;
  return fit;
}

double MediatorFit::mean(double a, const Eigen::VectorXd& c) const {
  if (c.size() != gamma2.size()) throw DataError("confounder vector length does not match gamma2");
  return gamma0 + gamma1 * a + gamma2.dot(c);
}

MediatorFit fit_mediator(const Dataset& data) {
  validate(data);
  const Eigen::Index n = data.size();
  const Eigen::Index d = data.num_confounders();
  if (n <= d + 2) throw DataError("fit_mediator: need n > d + 2 observations");
  Eigen::MatrixXd x(n, 2 + d);
  x.col(0).setOnes();
  x.col(1) = data.exposure;
  if (d > 0) x.rightCols(d) = data.confounders;
  const OlsFit ols_fit = ols(x, data.mediator);

  MediatorFit fit;
  fit.gamma0 = ols_fit.coefficients(0);
  fit.gamma1 = ols_fit.coefficients(1);
  fit.gamma2 = ols_fit.coefficients.tail(d);
  fit.residual_df = n - d - 2;
  fit.sigma2_sq = ols_fit.residual_ss / static_cast<double>(fit.residual_df);
  fit.covariance = fit.sigma2_sq * ols_fit.xtx_inverse;
  return fit;
}

}  // namespace shapemed
