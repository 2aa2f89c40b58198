#include "shapemed/report.hpp"

#include <stdexcept>
#include <string>

#include "shapemed/errors.hpp"

namespace shapemed {

Json to_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Json to_json(const Eigen::MatrixXd& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

Eigen::VectorXd vector_from_json(const Json& j) {
  if (!j.is_array()) throw DataError("expected a JSON array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

Eigen::MatrixXd matrix_from_json(const Json& j) {
  if (!j.is_array()) throw DataError("expected a JSON array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw DataError("ragged matrix in JSON");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

Json to_json(const MediatorFit& fit) {
  return {{"gamma0", fit.gamma0},
          {"gamma1", fit.gamma1},
          {"gamma2", to_json(fit.gamma2)},
          {"sigma2_sq", fit.sigma2_sq},
          {"covariance", to_json(fit.covariance)},
          {"residual_df", fit.residual_df}};
}

MediatorFit mediator_fit_from_json(const Json& j) {
  MediatorFit fit;
  fit.gamma0 = j.at("gamma0").get<double>();
  fit.gamma1 = j.at("gamma1").get<double>();
  fit.gamma2 = vector_from_json(j.at("gamma2"));
  fit.sigma2_sq = j.at("sigma2_sq").get<double>();
  fit.covariance = matrix_from_json(j.at("covariance"));
  fit.residual_df = j.at("residual_df").get<Eigen::Index>();
  return fit;
}

Json to_json(const OutcomeFit& fit) {
  Json active = Json::array();
  for (Eigen::Index i : fit.active_set) active.push_back(i);
  Json knots = Json::array();
  for (double t : fit.knots.values()) knots.push_back(t);
  return {{"beta0", fit.beta0},
          {"beta1", fit.beta1},
          {"beta2", to_json(fit.beta2)},
          {"beta3", to_json(fit.beta3)},
          {"beta4", to_json(fit.beta4)},
          {"sigma1_sq", fit.sigma1_sq},
          {"covariance", to_json(fit.covariance)},
          {"active_set", active},
          {"knots", knots},
          {"shapes", {{"exposed", to_string(fit.shapes.exposed)},
                      {"unexposed", to_string(fit.shapes.unexposed)}}},
          {"exposed_basis", to_string(fit.exposed_family())},
          {"unexposed_basis", to_string(fit.unexposed_family())},
          {"residual_ss", fit.residual_ss},
          {"residual_df", fit.residual_df}};
}

OutcomeFit outcome_fit_from_json(const Json& j) {
  OutcomeFit fit{.knots = KnotSequence(j.at("knots").get<std::vector<double>>())};
  fit.beta0 = j.at("beta0").get<double>();
  fit.beta1 = j.at("beta1").get<double>();
  fit.beta2 = vector_from_json(j.at("beta2"));
  fit.beta3 = vector_from_json(j.at("beta3"));
  fit.beta4 = vector_from_json(j.at("beta4"));
  fit.sigma1_sq = j.at("sigma1_sq").get<double>();
  fit.covariance = matrix_from_json(j.at("covariance"));
  fit.active_set = j.at("active_set").get<std::vector<Eigen::Index>>();
  fit.shapes.exposed = shape_from_string(j.at("shapes").at("exposed").get<std::string>());
  fit.shapes.unexposed = shape_from_string(j.at("shapes").at("unexposed").get<std::string>());
  fit.residual_ss = j.at("residual_ss").get<double>();
  fit.residual_df = j.at("residual_df").get<Eigen::Index>();
  const std::size_t k = fit.knots.num_bases();
  if (fit.beta2.size() != curve_length(fit.exposed_family(), k) ||
      fit.beta3.size() != curve_length(fit.unexposed_family(), k)) {
    throw DataError("curve coefficients do not match the knots and shapes");
  }
  return fit;
}

Json to_json(const EffectEstimate& e) {
  return {{"kind", to_string(e.kind)},   {"estimate", e.estimate}, {"std_error", e.std_error},
          {"ci_lower", e.ci_lower},      {"ci_upper", e.ci_upper}, {"level", e.level}};
}

EffectKind effect_kind_from_string(const std::string& name) {
  if (name == "CDE") return EffectKind::CDE;
  if (name == "NDE") return EffectKind::NDE;
  if (name == "NIE") return EffectKind::NIE;
  throw std::invalid_argument("unknown effect '" + name + "'");
}

EffectEstimate effect_from_json(const Json& j) {
  EffectEstimate e;
  e.kind = effect_kind_from_string(j.at("kind").get<std::string>());
  e.estimate = j.at("estimate").get<double>();
  e.std_error = j.at("std_error").get<double>();
  e.ci_lower = j.at("ci_lower").get<double>();
  e.ci_upper = j.at("ci_upper").get<double>();
  e.level = j.at("level").get<double>();
  return e;
}

CurveTable curve_table(const OutcomeFit& fit, int points) {
  if (points < 0) throw std::invalid_argument("curve_table: points must be >= 0");
  CurveTable table;
  const double lo = fit.knots.lower();
  const double hi = fit.knots.upper();
  const GroupCurve f1 = fit.exposed_curve();
  const GroupCurve f2 = fit.unexposed_curve();
  for (int i = 0; i < points; ++i) {
    const double m = points == 1 ? lo : lo + (hi - lo) * i / (points - 1);
    table.m.push_back(m);
    table.f1.push_back(eval_f(f1, fit.knots, m));
    table.f2.push_back(eval_f(f2, fit.knots, m));
  }
  return table;
}

Json to_json(const CurveTable& table) {
  return {{"m", table.m}, {"f1", table.f1}, {"f2", table.f2}};
}

CurveTable curve_table_from_json(const Json& j) {
  CurveTable table;
  table.m = j.at("m").get<std::vector<double>>();
  table.f1 = j.at("f1").get<std::vector<double>>();
  table.f2 = j.at("f2").get<std::vector<double>>();
  if (table.f1.size() != table.m.size() || table.f2.size() != table.m.size()) {
    throw DataError("curve table columns differ in length");
  }
  return table;
}

}  // namespace shapemed
