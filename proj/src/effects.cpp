#include "shapemed/effects.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "shapemed/errors.hpp"
#include "shapemed/least_squares.hpp"

namespace shapemed {

const char* to_string(EffectKind kind) {
  switch (kind) {
    case EffectKind::CDE: return "CDE";
    case EffectKind::NDE: return "NDE";
    case EffectKind::NIE: return "NIE";
  }
  return "?";
}

void EffectQuery::validate() const {
  if (a == a_star) throw std::invalid_argument("effect query needs a != a_star");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("confidence level must be in (0, 1)");
}

namespace {

Eigen::Index identity_terms(SplineFamily family) { return family == SplineFamily::CCubic ? 1 : 0; }

void check_length(std::size_t size, const BasisKind& kind, const KnotSequence& knots) {
  const auto expected = static_cast<std::size_t>(curve_length(kind.family, knots.num_bases()));
  if (size != expected) {
    throw std::invalid_argument("curve has " + std::to_string(size) + " coefficients, expected " +
                                std::to_string(expected));
  }
}

}  // namespace

double eval_f(std::span<const double> coefs, const BasisKind& kind, const KnotSequence& knots,
              double m) {
  check_length(coefs.size(), kind, knots);
  const auto lead = static_cast<std::size_t>(identity_terms(kind.family));
  const double sign = kind.negated ? -1.0 : 1.0;
  double value = lead ? coefs[0] * m : 0.0;
  for (std::size_t j = 0; j < knots.num_bases(); ++j) {
    value += coefs[lead + j] * sign * basis_eval(m, j, kind.family, knots);
  }
  return value;
}

double eval_f(const GroupCurve& curve, const KnotSequence& knots, double m) {
  return eval_f({curve.coefficients.data(), static_cast<std::size_t>(curve.coefficients.size())},
                curve.kind, knots, m);
}

Eigen::VectorXd curve_gradient(const GroupCurve& curve, const KnotSequence& knots, double m) {
  check_length(static_cast<std::size_t>(curve.coefficients.size()), curve.kind, knots);
  const Eigen::Index lead = identity_terms(curve.kind.family);
  Eigen::VectorXd g(curve.coefficients.size());
  if (lead) g(0) = m;
  basis_row(m, curve.kind, knots, {g.data() + lead, knots.num_bases()});
  return g;
}

NormalExpectation expected_f_terms(const GroupCurve& curve, const KnotSequence& knots, double mean,
                                   double variance, const QuadratureSpec& quad) {
  if (!(variance > 0.0)) throw std::invalid_argument("expected_f: mediator variance must be positive");
  check_length(static_cast<std::size_t>(curve.coefficients.size()), curve.kind, knots);
  const double sd = std::sqrt(variance);
  const Eigen::Index lead = identity_terms(curve.kind.family);
  const auto k = static_cast<Eigen::Index>(knots.num_bases());
  const Eigen::VectorXd spline_coefs = curve.coefficients.tail(k);

  NormalExpectation out;
  out.d_coefficients = Eigen::VectorXd::Zero(curve.coefficients.size());
  Eigen::VectorXd basis(k);
  Eigen::VectorXd basis_sum = Eigen::VectorXd::Zero(k);
  double value = 0.0;
  double score_mean = 0.0;
  double score_var = 0.0;

  const std::vector<double> breaks = knots.breakpoints();
  const GaussLegendreRule& rule = gauss_legendre(quad.points);
  for (const auto& [lo, hi] : normal_panels(mean, sd, breaks, quad)) {
    const double half = 0.5 * (hi - lo);
    const double mid = 0.5 * (hi + lo);
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      const double x = mid + half * rule.nodes[q];
      const double z = x - mean;
      const double w = rule.weights[q] * half * normal_pdf(z / sd) / sd;
      basis_row(x, curve.kind, knots, {basis.data(), static_cast<std::size_t>(k)});
      const double f = spline_coefs.dot(basis);
      basis_sum += w * basis;
      value += w * f;
      score_mean += w * f * z / variance;
      score_var += w * f * (-0.5 / variance + z * z / (2.0 * variance * variance));
    }
  }
  out.value = value;
  out.d_coefficients.tail(k) = basis_sum;
  out.d_mean = score_mean;
  out.d_variance = score_var;
  if (lead) {
    // The identity term integrates exactly: E[b0 M] = b0 mean.
    out.value += curve.coefficients(0) * mean;
    out.d_coefficients(0) = mean;
    out.d_mean += curve.coefficients(0);
  }
  return out;
}

double expected_f(const GroupCurve& curve, const KnotSequence& knots, const MediatorFit& mediator,
                  double a, const Eigen::VectorXd& c, const QuadratureSpec& quad) {
  return expected_f_terms(curve, knots, mediator.mean(a, c), mediator.sigma2_sq, quad).value;
}

ParameterLayout parameter_layout(const OutcomeFit& outcome, const MediatorFit& mediator) {
  ParameterLayout l;
  l.beta1 = 0;
  l.beta2 = 1;
  l.beta2_size = outcome.beta2.size();
  l.beta3 = l.beta2 + l.beta2_size;
  l.beta3_size = outcome.beta3.size();
  l.outcome_size = l.beta3 + l.beta3_size;
  l.gamma0 = l.outcome_size;
  l.gamma1 = l.gamma0 + 1;
  l.gamma2 = l.gamma1 + 1;
  l.gamma2_size = mediator.gamma2.size();
  l.sigma2_sq = l.gamma2 + l.gamma2_size;
  l.size = l.sigma2_sq + 1;
  return l;
}

Eigen::VectorXd pack_parameters(const OutcomeFit& outcome, const MediatorFit& mediator) {
  const ParameterLayout l = parameter_layout(outcome, mediator);
  Eigen::VectorXd theta(l.size);
  theta(l.beta1) = outcome.beta1;
  theta.segment(l.beta2, l.beta2_size) = outcome.beta2;
  theta.segment(l.beta3, l.beta3_size) = outcome.beta3;
  theta(l.gamma0) = mediator.gamma0;
  theta(l.gamma1) = mediator.gamma1;
  theta.segment(l.gamma2, l.gamma2_size) = mediator.gamma2;
  theta(l.sigma2_sq) = mediator.sigma2_sq;
  return theta;
}

void unpack_parameters(const Eigen::VectorXd& theta, OutcomeFit& outcome, MediatorFit& mediator) {
  const ParameterLayout l = parameter_layout(outcome, mediator);
  if (theta.size() != l.size) throw std::invalid_argument("unpack_parameters: size mismatch");
  outcome.beta1 = theta(l.beta1);
  outcome.beta2 = theta.segment(l.beta2, l.beta2_size);
  outcome.beta3 = theta.segment(l.beta3, l.beta3_size);
  mediator.gamma0 = theta(l.gamma0);
  mediator.gamma1 = theta(l.gamma1);
  mediator.gamma2 = theta.segment(l.gamma2, l.gamma2_size);
  mediator.sigma2_sq = theta(l.sigma2_sq);
}

Eigen::MatrixXd parameter_covariance(const OutcomeFit& outcome, const MediatorFit& mediator) {
  const ParameterLayout l = parameter_layout(outcome, mediator);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(l.size, l.size);
  // [beta1, beta2, beta3] are contiguous at canonical positions 1.. of the outcome covariance.
  cov.topLeftCorner(l.outcome_size, l.outcome_size) =
      outcome.covariance.block(outcome.beta1_index(), outcome.beta1_index(), l.outcome_size,
                               l.outcome_size);
  const Eigen::Index g = 2 + l.gamma2_size;
  cov.block(l.gamma0, l.gamma0, g, g) = mediator.covariance;
  if (mediator.residual_df <= 0) throw std::invalid_argument("mediator fit has no residual df");
  cov(l.sigma2_sq, l.sigma2_sq) =
      2.0 * mediator.sigma2_sq * mediator.sigma2_sq / static_cast<double>(mediator.residual_df);
  return cov;
}

EffectValue cde_value(const OutcomeFit& outcome, const EffectQuery& query) {
  const double contrast = query.a - query.a_star;
  const GroupCurve f1 = outcome.exposed_curve();
  const GroupCurve f2 = outcome.unexposed_curve();
  EffectValue v;
  v.estimate = (outcome.beta1 + eval_f(f1, outcome.knots, query.m) -
                eval_f(f2, outcome.knots, query.m)) * contrast;
  const Eigen::Index n2 = outcome.beta2.size();
  const Eigen::Index n3 = outcome.beta3.size();
  v.gradient.resize(1 + n2 + n3);
  v.gradient(0) = contrast;
  v.gradient.segment(1, n2) = contrast * curve_gradient(f1, outcome.knots, query.m);
  v.gradient.segment(1 + n2, n3) = -contrast * curve_gradient(f2, outcome.knots, query.m);
  return v;
}

EffectValue nde_value(const OutcomeFit& outcome, const MediatorFit& mediator,
                      const EffectQuery& query, const QuadratureSpec& quad) {
  const ParameterLayout l = parameter_layout(outcome, mediator);
  const double contrast = query.a - query.a_star;
  const double mu = mediator.mean(query.a_star, query.c);
  const NormalExpectation e1 =
      expected_f_terms(outcome.exposed_curve(), outcome.knots, mu, mediator.sigma2_sq, quad);
  const NormalExpectation e2 =
      expected_f_terms(outcome.unexposed_curve(), outcome.knots, mu, mediator.sigma2_sq, quad);

  EffectValue v;
  v.estimate = (outcome.beta1 + e1.value - e2.value) * contrast;
  v.gradient = Eigen::VectorXd::Zero(l.size);
  v.gradient(l.beta1) = contrast;
  v.gradient.segment(l.beta2, l.beta2_size) = contrast * e1.d_coefficients;
  v.gradient.segment(l.beta3, l.beta3_size) = -contrast * e2.d_coefficients;
  const double d_mu = contrast * (e1.d_mean - e2.d_mean);
  v.gradient(l.gamma0) = d_mu;
  v.gradient(l.gamma1) = d_mu * query.a_star;
  v.gradient.segment(l.gamma2, l.gamma2_size) = d_mu * query.c;
  v.gradient(l.sigma2_sq) = contrast * (e1.d_variance - e2.d_variance);
  return v;
}

EffectValue nie_value(const OutcomeFit& outcome, const MediatorFit& mediator,
                      const EffectQuery& query, const QuadratureSpec& quad) {
  const ParameterLayout l = parameter_layout(outcome, mediator);
  const double a = query.a;
  const double as = query.a_star;
  const double mu_a = mediator.mean(a, query.c);
  const double mu_s = mediator.mean(as, query.c);
  const double var = mediator.sigma2_sq;

  EffectValue v;
  v.estimate = 0.0;
  v.gradient = Eigen::VectorXd::Zero(l.size);
  double d_gamma0 = 0.0;
  double d_gamma1 = 0.0;
  double d_var = 0.0;
  // One term per group; a weight of zero (a in {0, 1}) drops the other curve entirely.
  const auto add_group = [&](const GroupCurve& curve, double weight, Eigen::Index offset,
                             Eigen::Index size) {
    if (weight == 0.0) return;
    const NormalExpectation ea = expected_f_terms(curve, outcome.knots, mu_a, var, quad);
    const NormalExpectation es = expected_f_terms(curve, outcome.knots, mu_s, var, quad);
    v.estimate += weight * (ea.value - es.value);
    v.gradient.segment(offset, size) += weight * (ea.d_coefficients - es.d_coefficients);
    d_gamma0 += weight * (ea.d_mean - es.d_mean);
    d_gamma1 += weight * (a * ea.d_mean - as * es.d_mean);
    d_var += weight * (ea.d_variance - es.d_variance);
  };
  add_group(outcome.exposed_curve(), a, l.beta2, l.beta2_size);
  add_group(outcome.unexposed_curve(), 1.0 - a, l.beta3, l.beta3_size);
  v.gradient(l.gamma0) = d_gamma0;
  v.gradient(l.gamma1) = d_gamma1;
  v.gradient.segment(l.gamma2, l.gamma2_size) = d_gamma0 * query.c;
  v.gradient(l.sigma2_sq) = d_var;
  return v;
}

double total_effect(const OutcomeFit& outcome, const MediatorFit& mediator,
                    const EffectQuery& query, const QuadratureSpec& quad) {
  const auto mean_outcome = [&](double a) {
    const double mu = mediator.mean(a, query.c);
    double y = outcome.beta1 * a;
    if (a != 0.0) {
      y += a * expected_f_terms(outcome.exposed_curve(), outcome.knots, mu, mediator.sigma2_sq, quad).value;
    }
    if (a != 1.0) {
      y += (1.0 - a) *
           expected_f_terms(outcome.unexposed_curve(), outcome.knots, mu, mediator.sigma2_sq, quad).value;
    }
    return y;
  };
  return mean_outcome(query.a) - mean_outcome(query.a_star);
}

double delta_variance(const Eigen::VectorXd& gradient, const Eigen::MatrixXd& covariance) {
  if (covariance.rows() != gradient.size() || covariance.cols() != gradient.size()) {
    throw std::invalid_argument("delta_variance: gradient and covariance dimensions differ");
  }
  return std::max(0.0, gradient.dot(covariance * gradient));
}

std::pair<double, double> confidence_interval(double estimate, double variance, double level) {
  if (variance < 0.0) throw std::invalid_argument("confidence_interval: negative variance");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("confidence level must be in (0, 1)");
  const double half_width = normal_quantile(0.5 * (1.0 + level)) * std::sqrt(variance);
  return {estimate - half_width, estimate + half_width};
}

EffectEstimate make_estimate(EffectKind kind, double estimate, double variance, double level) {
  const auto [lo, hi] = confidence_interval(estimate, variance, level);
  return {kind, estimate, std::sqrt(variance), lo, hi, level};
}

EffectEstimate cde(const OutcomeFit& outcome, const EffectQuery& query) {
  query.validate();
  const EffectValue v = cde_value(outcome, query);
  const Eigen::Index size = v.gradient.size();
  const Eigen::MatrixXd cov = outcome.covariance.block(outcome.beta1_index(),
                                                       outcome.beta1_index(), size, size);
  return make_estimate(EffectKind::CDE, v.estimate, delta_variance(v.gradient, cov), query.level);
}

EffectEstimate nde(const OutcomeFit& outcome, const MediatorFit& mediator, const EffectQuery& query,
                   const QuadratureSpec& quad) {
  query.validate();
  const EffectValue v = nde_value(outcome, mediator, query, quad);
  return make_estimate(EffectKind::NDE, v.estimate,
                       delta_variance(v.gradient, parameter_covariance(outcome, mediator)),
                       query.level);
}

EffectEstimate nie(const OutcomeFit& outcome, const MediatorFit& mediator, const EffectQuery& query,
                   const QuadratureSpec& quad) {
  query.validate();
  const EffectValue v = nie_value(outcome, mediator, query, quad);
  return make_estimate(EffectKind::NIE, v.estimate,
                       delta_variance(v.gradient, parameter_covariance(outcome, mediator)),
                       query.level);
}

LinearBaselineFit fit_linear_baseline(const Dataset& data) {
  validate(data);
  const Eigen::Index n = data.size();
  const Eigen::Index d = data.num_confounders();
  if (n <= d + 4) throw DataError("linear baseline: need n > d + 4 observations");
  Eigen::MatrixXd x(n, 4 + d);
  x.col(0).setOnes();
  x.col(1) = data.exposure;
  x.col(2) = data.mediator;
  x.col(3) = data.exposure.cwiseProduct(data.mediator);
  if (d > 0) x.rightCols(d) = data.confounders;
  const OlsFit ols_fit = ols(x, data.outcome);

  LinearBaselineFit fit;
  fit.beta0 = ols_fit.coefficients(0);
  fit.beta1 = ols_fit.coefficients(1);
  fit.beta2 = ols_fit.coefficients(2);
  fit.beta3 = ols_fit.coefficients(3);
  fit.beta4 = ols_fit.coefficients.tail(d);
  fit.sigma1_sq = ols_fit.residual_ss / static_cast<double>(n - 4 - d);
  fit.covariance = fit.sigma1_sq * ols_fit.xtx_inverse;
  fit.mediator = fit_mediator(data);
  return fit;
}

Eigen::VectorXd pack_parameters(const LinearBaselineFit& fit) {
  const Eigen::Index d = fit.mediator.gamma2.size();
  Eigen::VectorXd theta(5 + d);
  theta << fit.beta1, fit.beta2, fit.beta3, fit.mediator.gamma0, fit.mediator.gamma1,
      fit.mediator.gamma2;
  return theta;
}

void unpack_parameters(const Eigen::VectorXd& theta, LinearBaselineFit& fit) {
  const Eigen::Index d = fit.mediator.gamma2.size();
  if (theta.size() != 5 + d) throw std::invalid_argument("unpack_parameters: size mismatch");
  fit.beta1 = theta(0);
  fit.beta2 = theta(1);
  fit.beta3 = theta(2);
  fit.mediator.gamma0 = theta(3);
  fit.mediator.gamma1 = theta(4);
  fit.mediator.gamma2 = theta.tail(d);
}

Eigen::MatrixXd parameter_covariance(const LinearBaselineFit& fit) {
  const Eigen::Index d = fit.mediator.gamma2.size();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(5 + d, 5 + d);
  cov.topLeftCorner(3, 3) = fit.covariance.block(1, 1, 3, 3);
  cov.bottomRightCorner(2 + d, 2 + d) = fit.mediator.covariance;
  return cov;
}

std::array<EffectValue, 3> linear_effect_values(const LinearBaselineFit& fit,
                                                const EffectQuery& query) {
  const Eigen::Index d = fit.mediator.gamma2.size();
  const double contrast = query.a - query.a_star;
  const double mu_star = fit.mediator.mean(query.a_star, query.c);
  const double g1 = fit.mediator.gamma1;
  std::array<EffectValue, 3> out;
  for (auto& v : out) v.gradient = Eigen::VectorXd::Zero(5 + d);

  EffectValue& c = out[0];
  c.estimate = (fit.beta1 + fit.beta3 * query.m) * contrast;
  c.gradient(0) = contrast;
  c.gradient(2) = query.m * contrast;

  EffectValue& nd = out[1];
  nd.estimate = (fit.beta1 + fit.beta3 * mu_star) * contrast;
  nd.gradient(0) = contrast;
  nd.gradient(2) = mu_star * contrast;
  nd.gradient(3) = fit.beta3 * contrast;
  nd.gradient(4) = fit.beta3 * query.a_star * contrast;
  nd.gradient.tail(d) = fit.beta3 * contrast * query.c;

  EffectValue& ni = out[2];
  ni.estimate = (fit.beta2 * g1 + fit.beta3 * g1 * query.a) * contrast;
  ni.gradient(1) = g1 * contrast;
  ni.gradient(2) = g1 * query.a * contrast;
  ni.gradient(4) = (fit.beta2 + fit.beta3 * query.a) * contrast;
  return out;
}

std::array<EffectEstimate, 3> linear_baseline(const LinearBaselineFit& fit,
                                              const EffectQuery& query) {
  query.validate();
  const auto values = linear_effect_values(fit, query);
  const Eigen::MatrixXd cov = parameter_covariance(fit);
  constexpr std::array kinds{EffectKind::CDE, EffectKind::NDE, EffectKind::NIE};
  std::array<EffectEstimate, 3> out;
  for (std::size_t i = 0; i < 3; ++i) {
    out[i] = make_estimate(kinds[i], values[i].estimate, delta_variance(values[i].gradient, cov),
                           query.level);
  }
  return out;
}

std::array<EffectEstimate, 3> linear_baseline(const Dataset& data, const EffectQuery& query) {
  return linear_baseline(fit_linear_baseline(data), query);
}

}  // namespace shapemed
