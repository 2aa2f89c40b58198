#include "shapemed/least_squares.hpp"

#include <string>

#include "shapemed/errors.hpp"

namespace shapemed {

OlsFit ols(const Eigen::MatrixXd& design, const Eigen::VectorXd& response) {
  const Eigen::Index n = design.rows();
  const Eigen::Index p = design.cols();
  if (response.size() != n) throw DataError("ols: response length does not match design rows");

  OlsFit fit;
  if (p == 0) {
    fit.coefficients = Eigen::VectorXd::Zero(0);
    fit.fitted = Eigen::VectorXd::Zero(n);
    fit.residual_ss = response.squaredNorm();
    fit.xtx_inverse = Eigen::MatrixXd::Zero(0, 0);
    return fit;
  }
  if (n < p) throw RankDeficientError("ols: fewer rows than columns");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(kRankThreshold);
  if (qr.rank() < p) {
    throw RankDeficientError("ols: design has rank " + std::to_string(qr.rank()) + " < " +
                             std::to_string(p) + " columns");
  }
  fit.coefficients = qr.solve(response);
  fit.fitted = design * fit.coefficients;
  fit.residual_ss = (response - fit.fitted).squaredNorm();

  // X P = Q R  =>  (X^T X)^{-1} = P R^{-1} R^{-T} P^T
  const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd inner = r_inv * r_inv.transpose();
  const auto& perm = qr.colsPermutation();
  fit.xtx_inverse = perm * inner * perm.transpose();
  return fit;
}

}  // namespace shapemed
