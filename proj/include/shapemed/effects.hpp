#pragma once

// Controlled direct, natural direct and natural indirect effects for the
// shape-restricted mediation model, with delta-method standard errors.
//
// Delta-method parameter vector (shared by all three effects):
//     theta = [beta1, beta2, beta3, gamma0, gamma1, gamma2, sigma2_sq]
// CDE only depends on the leading [beta1, beta2, beta3] block. The outcome
// and mediator estimates are treated as independent, and sigma2_sq has
// variance 2 sigma2^4 / (n - d - 2).

#include <array>
#include <span>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "shapemed/mediation_models.hpp"
#include "shapemed/quadrature.hpp"
#include "shapemed/spline_basis.hpp"

namespace shapemed {

enum class EffectKind { CDE, NDE, NIE };

const char* to_string(EffectKind kind);

struct EffectQuery {
  double a = 1.0;
  double a_star = 0.0;
  double m = 0.0;         // mediator level for the CDE
  Eigen::VectorXd c;      // confounder values (encoded columns)
  double level = 0.95;

  /// Throws std::invalid_argument if a == a_star or level is outside (0, 1).
  void validate() const;
};

struct EffectEstimate {
  EffectKind kind = EffectKind::CDE;
  double estimate = 0.0;
  double std_error = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  double level = 0.95;
};

/// Group curve value; coefficients are [identity, spline_1..k] for C-splines.
double eval_f(std::span<const double> coefs, const BasisKind& kind, const KnotSequence& knots,
              double m);
double eval_f(const GroupCurve& curve, const KnotSequence& knots, double m);

/// d f / d coefficient at m (the basis row, with the identity term for C-splines).
Eigen::VectorXd curve_gradient(const GroupCurve& curve, const KnotSequence& knots, double m);

/// E[f(M)] for M ~ Normal(mean, variance) together with its partial
/// derivatives in the curve coefficients, the mean and the variance.
struct NormalExpectation {
  double value = 0.0;
  Eigen::VectorXd d_coefficients;
  double d_mean = 0.0;
  double d_variance = 0.0;
};

NormalExpectation expected_f_terms(const GroupCurve& curve, const KnotSequence& knots, double mean,
                                   double variance, const QuadratureSpec& quad = {});

/// E[f(M) | a, c] under the fitted mediator model.
double expected_f(const GroupCurve& curve, const KnotSequence& knots, const MediatorFit& mediator,
                  double a, const Eigen::VectorXd& c, const QuadratureSpec& quad = {});

/// Point estimate and gradient in the theta layout described above.
struct EffectValue {
  double estimate = 0.0;
  Eigen::VectorXd gradient;
};

struct ParameterLayout {
  Eigen::Index beta1 = 0;
  Eigen::Index beta2 = 1;
  Eigen::Index beta2_size = 0;
  Eigen::Index beta3 = 0;
  Eigen::Index beta3_size = 0;
  Eigen::Index gamma0 = 0;
  Eigen::Index gamma1 = 0;
  Eigen::Index gamma2 = 0;
  Eigen::Index gamma2_size = 0;
  Eigen::Index sigma2_sq = 0;
  Eigen::Index size = 0;
  Eigen::Index outcome_size = 0;  // length of the [beta1, beta2, beta3] block
};

ParameterLayout parameter_layout(const OutcomeFit& outcome, const MediatorFit& mediator);
Eigen::VectorXd pack_parameters(const OutcomeFit& outcome, const MediatorFit& mediator);
/// Overwrites the theta entries of the two fits.
void unpack_parameters(const Eigen::VectorXd& theta, OutcomeFit& outcome, MediatorFit& mediator);
Eigen::MatrixXd parameter_covariance(const OutcomeFit& outcome, const MediatorFit& mediator);

/// CDE gradient covers the [beta1, beta2, beta3] block only.
EffectValue cde_value(const OutcomeFit& outcome, const EffectQuery& query);
EffectValue nde_value(const OutcomeFit& outcome, const MediatorFit& mediator,
                      const EffectQuery& query, const QuadratureSpec& quad = {});
EffectValue nie_value(const OutcomeFit& outcome, const MediatorFit& mediator,
                      const EffectQuery& query, const QuadratureSpec& quad = {});

/// E[Y | a, M_a, c] - E[Y | a*, M_{a*}, c] composed directly from the
/// outcome and mediator components.
double total_effect(const OutcomeFit& outcome, const MediatorFit& mediator,
                    const EffectQuery& query, const QuadratureSpec& quad = {});

EffectEstimate cde(const OutcomeFit& outcome, const EffectQuery& query);
EffectEstimate nde(const OutcomeFit& outcome, const MediatorFit& mediator, const EffectQuery& query,
                   const QuadratureSpec& quad = {});
EffectEstimate nie(const OutcomeFit& outcome, const MediatorFit& mediator, const EffectQuery& query,
                   const QuadratureSpec& quad = {});

/// g^T Sigma g, clamped at zero against rounding.
double delta_variance(const Eigen::VectorXd& gradient, const Eigen::MatrixXd& covariance);

/// estimate -/+ z_{(1+level)/2} sqrt(variance).
std::pair<double, double> confidence_interval(double estimate, double variance, double level);

EffectEstimate make_estimate(EffectKind kind, double estimate, double variance, double level);

// Linear interaction baseline:
//     Y = b0 + b1 A + b2 M + b3 A M + b4^T C + e1
struct LinearBaselineFit {
  double beta0 = 0.0;
  double beta1 = 0.0;
  double beta2 = 0.0;
  double beta3 = 0.0;
  Eigen::VectorXd beta4;
  double sigma1_sq = 0.0;
  /// Covariance over [beta0, beta1, beta2, beta3, beta4].
  Eigen::MatrixXd covariance;
  MediatorFit mediator;
};

LinearBaselineFit fit_linear_baseline(const Dataset& data);

/// theta = [beta1, beta2, beta3, gamma0, gamma1, gamma2].
Eigen::VectorXd pack_parameters(const LinearBaselineFit& fit);
void unpack_parameters(const Eigen::VectorXd& theta, LinearBaselineFit& fit);
Eigen::MatrixXd parameter_covariance(const LinearBaselineFit& fit);

std::array<EffectValue, 3> linear_effect_values(const LinearBaselineFit& fit,
                                                const EffectQuery& query);
std::array<EffectEstimate, 3> linear_baseline(const LinearBaselineFit& fit,
                                              const EffectQuery& query);
std::array<EffectEstimate, 3> linear_baseline(const Dataset& data, const EffectQuery& query);

}  // namespace shapemed
