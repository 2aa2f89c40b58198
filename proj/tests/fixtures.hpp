#pragma once

// Random problem generators shared by the unit tests and the acceptance run.

#include <random>
#include <vector>

#include <Eigen/Dense>

#include "shapemed/cone_projection.hpp"
#include "shapemed/effects.hpp"
#include "shapemed/mediation_models.hpp"
#include "shapemed/simulation.hpp"
#include "shapemed/spline_basis.hpp"

namespace fixtures {

inline Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = z(rng);
  return m;
}

/// V has an intercept column when p >= 1. Z alternates between Gaussian
/// columns and an I-spline basis of a uniform covariate; the true Z
/// coefficients are half negative so constraints bind.
inline shapemed::ConeProblem random_cone_problem(std::mt19937_64& rng, Eigen::Index n, Eigen::Index p,
                                                 Eigen::Index q) {
  std::normal_distribution<double> z(0.0, 1.0);
  shapemed::ConeProblem prob;
  prob.unconstrained = normal_matrix(n, p, rng);
  if (p >= 1) prob.unconstrained.col(0).setOnes();
  if (q >= 2 && std::bernoulli_distribution(0.5)(rng)) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> x(static_cast<std::size_t>(n));
    for (double& v : x) v = u(rng);
    const shapemed::KnotSequence knots = shapemed::make_knots(x, static_cast<std::size_t>(q));
    prob.constrained = shapemed::basis_matrix(x, {shapemed::SplineFamily::IQuadratic, false}, knots).values;
  } else {
    prob.constrained = normal_matrix(n, q, rng);
  }
  Eigen::VectorXd alpha = normal_matrix(p, 1, rng);
  Eigen::VectorXd beta = normal_matrix(q, 1, rng);
  prob.response = prob.unconstrained * alpha + prob.constrained * beta + 0.5 * normal_matrix(n, 1, rng);
  return prob;
}

struct FittedConfiguration {
  shapemed::Dataset data;
  shapemed::OutcomeFit outcome;
  shapemed::MediatorFit mediator;
  shapemed::EffectQuery query;
};

inline shapemed::Shape random_shape(std::mt19937_64& rng) {
  return static_cast<shapemed::Shape>(std::uniform_int_distribution<int>(0, 3)(rng));
}

/// A simulated cohort fitted with random declared shapes and basis count,
/// queried at a random observed row with a random exposure direction.
inline FittedConfiguration random_fitted_configuration(std::mt19937_64& rng) {
  using namespace shapemed;
  StudyConfig cfg;
  cfg.pattern = make_pattern(static_cast<PatternName>(std::uniform_int_distribution<int>(0, 3)(rng)));
  cfg.n = std::uniform_int_distribution<int>(150, 400)(rng);
  cfg.sigma1 = std::uniform_real_distribution<double>(5.0, 40.0)(rng);
  Rng stream = make_stream(rng(), 0);
  Dataset data = drop_constant_confounders(gen_dataset(cfg, stream));

  const ShapeSpec shapes{random_shape(rng), random_shape(rng)};
  const auto k = static_cast<std::size_t>(std::uniform_int_distribution<int>(3, 7)(rng));
  OutcomeFit outcome = fit_outcome(data, shapes, k);
  MediatorFit mediator = fit_mediator(data);

  EffectQuery query;
  const bool forward = std::bernoulli_distribution(0.7)(rng);
  query.a = forward ? 1.0 : 0.0;
  query.a_star = forward ? 0.0 : 1.0;
  const auto row = std::uniform_int_distribution<Eigen::Index>(0, data.size() - 1)(rng);
  query.m = data.mediator(row);
  query.c = data.confounders.row(row).transpose();
  query.level = 0.95;
  return {std::move(data), std::move(outcome), std::move(mediator), std::move(query)};
}

}  // namespace fixtures
