#include "shapemed/cone_projection.hpp"

#include <algorithm>
#include <string>

#include "shapemed/errors.hpp"
#include "shapemed/least_squares.hpp"

namespace shapemed {

namespace {

Eigen::MatrixXd stack_columns(const Eigen::MatrixXd& v, const Eigen::MatrixXd& z,
                              std::span<const Eigen::Index> active) {
  Eigen::MatrixXd x(v.rows(), v.cols() + static_cast<Eigen::Index>(active.size()));
  x.leftCols(v.cols()) = v;
  for (std::size_t j = 0; j < active.size(); ++j) {
    x.col(v.cols() + static_cast<Eigen::Index>(j)) = z.col(active[j]);
  }
  return x;
}

void check_shapes(const ConeProblem& problem) {
  const Eigen::Index n = problem.response.size();
  if (problem.unconstrained.rows() != n && problem.unconstrained.cols() > 0) {
    throw DataError("cone problem: V row count does not match response");
  }
  if (problem.constrained.rows() != n && problem.constrained.cols() > 0) {
    throw DataError("cone problem: Z row count does not match response");
  }
}

Eigen::MatrixXd unconstrained_block(const ConeProblem& problem) {
  if (problem.unconstrained.cols() == 0) {
    return Eigen::MatrixXd::Zero(problem.response.size(), 0);
  }
  return problem.unconstrained;
}

}  // namespace

ConeSolution project_onto_cone(const ConeProblem& problem, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("cone projection tolerance must be positive");
  check_shapes(problem);
  const Eigen::VectorXd& y = problem.response;
  const Eigen::MatrixXd v = unconstrained_block(problem);
  const Eigen::MatrixXd& z = problem.constrained;
  const Eigen::Index p = v.cols();
  const Eigen::Index q = z.cols();

  OlsFit fit;
  try {
    fit = ols(v, y);
  } catch (const RankDeficientError&) {
    throw RankDeficientError("cone projection: unconstrained block V is not of full column rank");
  }

  // Norms of the residualized edges Delta_j; edges lying in span(V) can
  // never enter the active set.
  Eigen::VectorXd edge_norm = Eigen::VectorXd::Zero(q);
  if (q > 0) {
    Eigen::MatrixXd delta = z;
    if (p > 0) delta -= v * (fit.xtx_inverse * (v.transpose() * z));
    edge_norm = delta.colwise().norm().transpose();
  }
  const Eigen::VectorXd z_norm =
      q > 0 ? Eigen::VectorXd(z.colwise().norm().transpose()) : Eigen::VectorXd::Zero(0);

  const double dual_threshold = tol * std::max(y.norm(), 1e-300);
  const int max_iterations = static_cast<int>(10 * q);

  std::vector<Eigen::Index> active;
  ConeSolution solution;
  Eigen::VectorXd coefficients = fit.coefficients;

  for (;;) {
    const Eigen::VectorXd residual = y - fit.fitted;
    // r is orthogonal to span(V), so Z_j^T r equals Delta_j^T r.
    Eigen::Index best = -1;
    double best_dual = 0.0;
    for (Eigen::Index j = 0; j < q; ++j) {
      if (edge_norm(j) <= kRankThreshold * std::max(z_norm(j), 1.0)) continue;
      if (std::find(active.begin(), active.end(), j) != active.end()) continue;
      const double dual = z.col(j).dot(residual);
      if (dual > dual_threshold * edge_norm(j) && dual > best_dual) {
        best = j;
        best_dual = dual;
      }
    }
    if (best < 0) break;
    if (++solution.iterations > max_iterations) {
      throw ConvergenceError("hinge algorithm did not converge within " +
                             std::to_string(max_iterations) + " iterations");
    }
    active.insert(std::upper_bound(active.begin(), active.end(), best), best);

    // Refit on the current edges; drop the most negative edge until feasible.
    for (;;) {
      fit = ols(stack_columns(v, z, active), y);
      coefficients = fit.coefficients;
      Eigen::Index worst = -1;
      double worst_value = 0.0;
      for (std::size_t j = 0; j < active.size(); ++j) {
        const double b = coefficients(p + static_cast<Eigen::Index>(j));
        if (b < worst_value) {
          worst_value = b;
          worst = static_cast<Eigen::Index>(j);
        }
      }
      if (worst < 0) break;
      active.erase(active.begin() + worst);
    }
  }

  solution.alpha = coefficients.head(p);
  solution.beta = Eigen::VectorXd::Zero(q);
  for (std::size_t j = 0; j < active.size(); ++j) {
    solution.beta(active[j]) = coefficients(p + static_cast<Eigen::Index>(j));
  }
  solution.active_set = std::move(active);
  solution.fitted = fit.fitted;
  solution.residual_ss = fit.residual_ss;
  return solution;
}

ActiveRefit refit_active(const ConeProblem& problem, std::span<const Eigen::Index> active_set) {
  check_shapes(problem);
  const Eigen::MatrixXd v = unconstrained_block(problem);
  const Eigen::Index n = problem.response.size();
  const Eigen::Index p = v.cols();
  const Eigen::Index q = problem.constrained.cols();
  for (Eigen::Index j : active_set) {
    if (j < 0 || j >= q) throw std::out_of_range("refit_active: active index out of range");
  }
  const auto m = static_cast<Eigen::Index>(active_set.size());

  const OlsFit fit = ols(stack_columns(v, problem.constrained, active_set), problem.response);

  ActiveRefit out;
  out.residual_df = n - p - m;
  if (out.residual_df <= 0) {
    throw RankDeficientError("refit_active: no residual degrees of freedom");
  }
  out.residual_ss = fit.residual_ss;
  out.sigma2_hat = fit.residual_ss / static_cast<double>(out.residual_df);
  out.fitted = fit.fitted;

  // Map [V, Z_active] positions back to [V, Z] positions.
  std::vector<Eigen::Index> position(static_cast<std::size_t>(p + m));
  for (Eigen::Index j = 0; j < p; ++j) position[static_cast<std::size_t>(j)] = j;
  for (Eigen::Index j = 0; j < m; ++j) {
    position[static_cast<std::size_t>(p + j)] = p + active_set[static_cast<std::size_t>(j)];
  }
  out.coefficients = Eigen::VectorXd::Zero(p + q);
  out.covariance = Eigen::MatrixXd::Zero(p + q, p + q);
  for (Eigen::Index r = 0; r < p + m; ++r) {
    const Eigen::Index pr = position[static_cast<std::size_t>(r)];
    out.coefficients(pr) = fit.coefficients(r);
    for (Eigen::Index c = 0; c < p + m; ++c) {
      out.covariance(pr, position[static_cast<std::size_t>(c)]) =
          out.sigma2_hat * fit.xtx_inverse(r, c);
    }
  }
  return out;
}

}  // namespace shapemed
