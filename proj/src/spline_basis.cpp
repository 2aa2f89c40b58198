#include "shapemed/spline_basis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace shapemed {

KnotSequence::KnotSequence(std::vector<double> knots) : knots_(std::move(knots)) {
  const std::size_t m = knots_.size();
  if (m < 4) {
    throw std::invalid_argument("knot sequence needs at least 4 knots (k >= 2)");
  }
  for (double t : knots_) {
    if (!std::isfinite(t)) throw std::invalid_argument("knot sequence contains a non-finite value");
  }
  if (knots_[0] != knots_[1] || knots_[m - 2] != knots_[m - 1]) {
    throw std::invalid_argument("boundary knots must be doubled");
  }
  for (std::size_t i = 1; i + 2 < m; ++i) {
    if (!(knots_[i] < knots_[i + 1])) {
      throw std::invalid_argument("knots t_2..t_{k+1} must be strictly increasing");
    }
  }
}

std::vector<double> KnotSequence::breakpoints() const {
  return {knots_.begin() + 1, knots_.end() - 1};
}

double mspline_eval(double x, std::size_t index, int order, const KnotSequence& knots) {
  if (order < 1) throw std::invalid_argument("M-spline order must be >= 1");
  if (index + static_cast<std::size_t>(order) >= knots.size()) {
    throw std::out_of_range("M-spline index out of range for this order");
  }
  const double lo = knots[index];
  const double hi = knots[index + order];
  if (x < lo || x >= hi || !(hi > lo)) return 0.0;
  if (order == 1) return 1.0 / (hi - lo);
  const double k = order;
  const double left = (x - lo) * mspline_eval(x, index, order - 1, knots);
  const double right = (hi - x) * mspline_eval(x, index + 1, order - 1, knots);
  return k * (left + right) / ((k - 1.0) * (hi - lo));
}

namespace {

void check_index(std::size_t index, const KnotSequence& knots) {
  if (index >= knots.num_bases()) throw std::out_of_range("spline basis index out of range");
}

}  // namespace

// Branches are ordered so that a zero-width interval (doubled boundary
// knot) is never entered, which keeps every denominator positive.
double ispline_eval(double x, std::size_t index, const KnotSequence& knots) {
  check_index(index, knots);
  const double t0 = knots[index];
  const double t1 = knots[index + 1];
  const double t2 = knots[index + 2];
  if (x < t0) return 0.0;
  if (x < t1) return (x - t0) * (x - t0) / ((t2 - t0) * (t1 - t0));
  if (x < t2) return 1.0 - (t2 - x) * (t2 - x) / ((t2 - t0) * (t2 - t1));
  return 1.0;
}

double cspline_eval(double x, std::size_t index, const KnotSequence& knots) {
  check_index(index, knots);
  const double t0 = knots[index];
  const double t1 = knots[index + 1];
  const double t2 = knots[index + 2];
  if (x < t0) return 0.0;
  if (x < t1) return std::pow(x - t0, 3) / (3.0 * (t2 - t0) * (t1 - t0));
  const double shift = (t0 + t1 + t2) / 3.0;
  if (x < t2) return x - shift + std::pow(t2 - x, 3) / (3.0 * (t2 - t0) * (t2 - t1));
  return x - shift;
}

double basis_eval(double x, std::size_t index, SplineFamily family, const KnotSequence& knots) {
  return family == SplineFamily::IQuadratic ? ispline_eval(x, index, knots)
                                            : cspline_eval(x, index, knots);
}

void basis_row(double x, const BasisKind& kind, const KnotSequence& knots, std::span<double> out) {
  const std::size_t k = knots.num_bases();
  if (out.size() != k) throw std::invalid_argument("basis_row: output size must equal num_bases");
  const double sign = kind.negated ? -1.0 : 1.0;
  for (std::size_t j = 0; j < k; ++j) out[j] = sign * basis_eval(x, j, kind.family, knots);
}

KnotSequence make_knots(std::span<const double> mediator_values, std::size_t num_bases) {
  if (num_bases < 2) throw std::invalid_argument("num_bases must be >= 2");
  if (mediator_values.empty()) throw std::invalid_argument("mediator vector is empty");
  std::vector<double> sorted(mediator_values.begin(), mediator_values.end());
  std::sort(sorted.begin(), sorted.end());
  const double lo = sorted.front();
  const double hi = sorted.back();
  if (!(hi > lo)) throw std::invalid_argument("mediator vector is constant");

  const auto quantile = [&](double p) {
    const double h = p * static_cast<double>(sorted.size() - 1);
    const auto below = static_cast<std::size_t>(std::floor(h));
    const std::size_t above = std::min(below + 1, sorted.size() - 1);
    return sorted[below] + (h - static_cast<double>(below)) * (sorted[above] - sorted[below]);
  };

  std::vector<double> knots;
  knots.reserve(num_bases + 2);
  knots.push_back(lo);
  knots.push_back(lo);
  for (std::size_t j = 1; j + 1 < num_bases; ++j) {
    knots.push_back(quantile(static_cast<double>(j) / static_cast<double>(num_bases - 1)));
  }
  knots.push_back(hi);
  knots.push_back(hi);
  try {
    return KnotSequence(std::move(knots));
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument("quantile knots are not distinct (too many ties in the mediator "
                                "for " + std::to_string(num_bases) + " bases)");
  }
}

BasisMatrix basis_matrix(std::span<const double> values, const BasisKind& kind,
                         const KnotSequence& knots) {
  const std::size_t k = knots.num_bases();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(values.size()), static_cast<Eigen::Index>(k));
  std::vector<double> row(k);
  for (std::size_t i = 0; i < values.size(); ++i) {
    basis_row(values[i], kind, knots, row);
    for (std::size_t j = 0; j < k; ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
    }
  }
  return {std::move(out), kind, knots};
}

const char* to_string(SplineFamily family) {
  return family == SplineFamily::IQuadratic ? "IQuadratic" : "CCubic";
}

SplineFamily spline_family_from_string(const std::string& name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (lower == "iquadratic" || lower == "i" || lower == "ispline") return SplineFamily::IQuadratic;
  if (lower == "ccubic" || lower == "c" || lower == "cspline") return SplineFamily::CCubic;
  throw std::invalid_argument("unknown spline family '" + name + "'");
}

}  // namespace shapemed
