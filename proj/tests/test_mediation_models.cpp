#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "shapemed/cone_projection.hpp"
#include "shapemed/effects.hpp"
#include "shapemed/errors.hpp"
#include "shapemed/mediation_models.hpp"
#include "shapemed/simulation.hpp"

using namespace shapemed;

namespace {

Dataset toy_dataset(int n, std::mt19937_64& rng, int d = 2) {
  std::normal_distribution<double> z(0.0, 1.0);
  Dataset data;
  data.exposure.resize(n);
  data.mediator.resize(n);
  data.outcome.resize(n);
  data.confounders = fixtures::normal_matrix(n, d, rng);
  for (int i = 0; i < n; ++i) {
    data.exposure(i) = i % 2;
    data.mediator(i) = z(rng);
    data.outcome(i) = z(rng);
  }
  return data;
}

bool contains(const std::vector<Eigen::Index>& v, Eigen::Index j) {
  return std::find(v.begin(), v.end(), j) != v.end();
}

}  // namespace

TEST_SUITE("mediation_models") {

TEST_CASE("face-splitting product") {
  Eigen::VectorXd col(2);
  col << 2, 3;
  Eigen::MatrixXd m(2, 2);
  m << 1, 2, 3, 4;
  Eigen::MatrixXd expected(2, 2);
  expected << 2, 4, 9, 12;
  CHECK(face_split(col, m) == expected);
  CHECK(face_split(Eigen::VectorXd::Ones(2), m) == m);
  CHECK_THROWS_AS(face_split(Eigen::VectorXd::Ones(3), m), DataError);

  Eigen::VectorXd a(2);
  a << 1, 0;
  CHECK(face_split(a, m) + face_split(Eigen::VectorXd::Ones(2) - a, m) == m);
}

TEST_CASE("outcome design layouts") {
  std::mt19937_64 rng(8);
  const Dataset data = toy_dataset(40, rng);
  const KnotSequence knots = make_knots(std::span<const double>(data.mediator.data(), 40), 4);
  const Eigen::VectorXd a = data.exposure;
  const Eigen::VectorXd one_minus_a = Eigen::VectorXd::Ones(40) - a;
  const std::span<const double> m(data.mediator.data(), 40);
  const Eigen::MatrixXd is = basis_matrix(m, {SplineFamily::IQuadratic, false}, knots).values;
  const Eigen::MatrixXd cs = basis_matrix(m, {SplineFamily::CCubic, false}, knots).values;

  SUBCASE("both increasing") {
    const DesignPartition d = build_outcome_design(data, {Shape::Increasing, Shape::Increasing}, knots);
    CHECK(d.w0 == Eigen::MatrixXd::Ones(40, 1));
    CHECK(d.w.col(0) == a);
    CHECK(d.w.rightCols(2) == data.confounders);
    CHECK(d.z1 == face_split(a, is));
    CHECK(d.z0 == face_split(one_minus_a, is));
    CHECK(d.num_columns() == 1 + 3 + 4 + 4);
    CHECK(d.column_labels.size() == 12);
  }
  SUBCASE("concave exposed, increasing unexposed") {
    const DesignPartition d = build_outcome_design(data, {Shape::Concave, Shape::Increasing}, knots);
    REQUIRE(d.w0.cols() == 2);
    CHECK(d.w0.col(1) == data.mediator.cwiseProduct(a));
    CHECK(d.z1 == -face_split(a, cs));
    CHECK(d.z0 == face_split(one_minus_a, is));
    CHECK(d.exposed_identity);
    CHECK_FALSE(d.unexposed_identity);
  }
  SUBCASE("convex unexposed, decreasing exposed") {
    const DesignPartition d = build_outcome_design(data, {Shape::Decreasing, Shape::Convex}, knots);
    REQUIRE(d.w0.cols() == 2);
    CHECK(d.w0.col(1) == data.mediator.cwiseProduct(one_minus_a));
    CHECK(d.z1 == -face_split(a, is));
    CHECK(d.z0 == face_split(one_minus_a, cs));
  }
  SUBCASE("both C-splines") {
    const DesignPartition d = build_outcome_design(data, {Shape::Convex, Shape::Concave}, knots);
    CHECK(d.w0.cols() == 3);
    CHECK(d.z0 == -face_split(one_minus_a, cs));
    CHECK(d.num_columns() == 3 + 3 + 4 + 4);
  }
  SUBCASE("all-zero exposure") {
    Dataset zero = data;
    zero.exposure.setZero();
    const DesignPartition d = build_outcome_design(zero, {Shape::Increasing, Shape::Increasing}, knots);
    CHECK(d.z1.isZero());
  }
}

TEST_CASE("flat noiseless data") {
  std::mt19937_64 rng(3);
  Dataset data = toy_dataset(60, rng, 0);
  data.outcome.setConstant(5.0);
  for (Shape s : {Shape::Increasing, Shape::Convex}) {
    const OutcomeFit fit = fit_outcome(data, {s, s}, 5);
    CHECK(fit.beta2.cwiseAbs().maxCoeff() < 1e-10);
    CHECK(fit.beta3.cwiseAbs().maxCoeff() < 1e-10);
    CHECK(fit.beta0 == doctest::Approx(5.0));
    CHECK(std::abs(fit.beta1) < 1e-10);
  }
}

TEST_CASE("monotone noiseless data is interpolated") {
  std::mt19937_64 rng(12);
  Dataset data = toy_dataset(80, rng);
  const KnotSequence knots = make_knots(std::span<const double>(data.mediator.data(), 80), 5);
  std::vector<double> w1{0.5, 2.0, 0.0, 1.0, 3.0}, w0{1.0, 0.0, 0.0, 4.0, 0.5};
  std::vector<double> row(5);
  for (Eigen::Index i = 0; i < 80; ++i) {
    basis_row(data.mediator(i), {SplineFamily::IQuadratic, false}, knots, row);
    double f = 0.0;
    for (std::size_t j = 0; j < 5; ++j) f += (data.exposure(i) == 1.0 ? w1[j] : w0[j]) * row[j];
    data.outcome(i) = 2.0 + 0.5 * data.exposure(i) + f + data.confounders.row(i).sum();
  }
  const OutcomeFit fit = fit_outcome(data, {Shape::Increasing, Shape::Increasing}, knots);
  CHECK(fit.residual_ss < 1e-16 * data.outcome.squaredNorm());
  for (double m = knots.lower(); m <= knots.upper(); m += 0.01) {
    CHECK(eval_f(fit.exposed_curve(), knots, m + 0.01) >= eval_f(fit.exposed_curve(), knots, m) - 1e-12);
  }
  for (std::size_t j = 0; j < 5; ++j) CHECK(fit.beta2(static_cast<Eigen::Index>(j)) == doctest::Approx(w1[j]).epsilon(1e-8));
}

TEST_CASE("declared shapes hold on every fitted curve") {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 24; ++rep) {
    fixtures::FittedConfiguration fc = fixtures::random_fitted_configuration(rng);
    const OutcomeFit& fit = fc.outcome;
    const auto check_curve = [&](const GroupCurve& curve, Shape shape) {
      const bool c_spline = curve.kind.family == SplineFamily::CCubic;
      const Eigen::VectorXd spline = c_spline ? Eigen::VectorXd(curve.coefficients.tail(curve.coefficients.size() - 1))
                                              : curve.coefficients;
      const bool nonneg = shape == Shape::Increasing || shape == Shape::Convex;
      CHECK((nonneg ? (spline.array() >= 0.0).all() : (spline.array() <= 0.0).all()));
      const double lo = fit.knots.lower(), hi = fit.knots.upper();
      const int g = 200;
      double prev = eval_f(curve, fit.knots, lo), prev_d = 0.0;
      for (int i = 1; i <= g; ++i) {
        const double v = eval_f(curve, fit.knots, lo + (hi - lo) * i / g);
        const double d = v - prev;
        const double tol = 1e-9 * (1.0 + std::abs(v));
        if (shape == Shape::Increasing) CHECK(d >= -tol);
        if (shape == Shape::Decreasing) CHECK(d <= tol);
        if (i > 1 && shape == Shape::Convex) CHECK(d - prev_d >= -tol);
        if (i > 1 && shape == Shape::Concave) CHECK(d - prev_d <= tol);
        prev = v;
        prev_d = d;
      }
    };
    check_curve(fit.exposed_curve(), fit.shapes.exposed);
    check_curve(fit.unexposed_curve(), fit.shapes.unexposed);

    // refit consistency with a direct projection of the same design
    const DesignPartition design = build_outcome_design(fc.data, fit.shapes, fit.knots);
    const ConeSolution cone = project_onto_cone(outcome_cone_problem(fc.data, design));
    CHECK((cone.fitted - fit.fitted).norm() <= 1e-8 * (1.0 + fit.fitted.norm()));
    CHECK(cone.active_set == fit.active_set);
    CHECK(fit.residual_df == fc.data.size() - design.w0.cols() - design.w.cols() -
                                 static_cast<Eigen::Index>(fit.active_set.size()));
    CHECK(fit.sigma1_sq == doctest::Approx(fit.residual_ss / static_cast<double>(fit.residual_df)));
    const Eigen::Index total = 2 + fit.beta2.size() + fit.beta3.size() + fit.beta4.size();
    CHECK(fit.covariance.rows() == total);
    CHECK((fit.covariance - fit.covariance.transpose()).norm() < 1e-9 * (1.0 + fit.covariance.norm()));
    for (Eigen::Index j = 0; j < design.z1.cols() + design.z0.cols(); ++j) {
      if (contains(fit.active_set, j)) continue;
      const Eigen::Index k = static_cast<Eigen::Index>(fit.knots.num_bases());
      const Eigen::Index idx = j < k ? fit.beta2_offset() + (design.exposed_identity ? 1 : 0) + j
                                     : fit.beta3_offset() + (design.unexposed_identity ? 1 : 0) + (j - k);
      const Eigen::VectorXd canonical = [&] {
        Eigen::VectorXd t(total);
        t << fit.beta0, fit.beta1, fit.beta2, fit.beta3, fit.beta4;
        return t;
      }();
      CHECK(canonical(idx) == 0.0);
      CHECK(fit.covariance.row(idx).isZero());
    }
  }
}

TEST_CASE("Pattern 1 curves are recovered within RMSE 10") {
  StudyConfig cfg;
  cfg.pattern = make_pattern(PatternName::Pattern1);
  cfg.sigma1 = 10.0;
  Rng rng = make_stream(cfg.seed, 0);
  const Dataset data = drop_constant_confounders(gen_dataset(cfg, rng));
  const OutcomeFit fit = fit_outcome(data, cfg.pattern.declared_shapes, 5);

  // Curves are identified up to an additive constant, so compare centered
  // versions over the central 90% of the mediator sample.
  std::vector<double> m(data.mediator.data(), data.mediator.data() + data.size());
  std::sort(m.begin(), m.end());
  const double lo = m[m.size() / 20], hi = m[m.size() - 1 - m.size() / 20];
  const int g = 200;
  for (int group = 0; group < 2; ++group) {
    const GroupCurve curve = group == 0 ? fit.exposed_curve() : fit.unexposed_curve();
    const auto& truth = group == 0 ? cfg.pattern.f1 : cfg.pattern.f2;
    Eigen::VectorXd est(g + 1), tru(g + 1);
    for (int i = 0; i <= g; ++i) {
      const double x = lo + (hi - lo) * i / g;
      est(i) = eval_f(curve, fit.knots, x);
      tru(i) = truth(x);
    }
    const Eigen::VectorXd diff = (est.array() - est.mean()) - (tru.array() - tru.mean());
    const double rmse = std::sqrt(diff.squaredNorm() / (g + 1));
    MESSAGE("group " << group << " centered RMSE " << rmse);
    CHECK(rmse <= 10.0);
  }
}

TEST_CASE("mediator model") {
  std::mt19937_64 rng(6);
  Dataset data = toy_dataset(50, rng);
  for (Eigen::Index i = 0; i < 50; ++i) {
    data.mediator(i) = 0.4 - 1.5 * data.exposure(i) + 2.0 * data.confounders(i, 0) - data.confounders(i, 1);
  }
  const MediatorFit exact = fit_mediator(data);
  CHECK(exact.gamma0 == doctest::Approx(0.4));
  CHECK(exact.gamma1 == doctest::Approx(-1.5));
  CHECK(exact.gamma2(0) == doctest::Approx(2.0));
  CHECK(exact.gamma2(1) == doctest::Approx(-1.0));
  CHECK(exact.sigma2_sq < 1e-20);
  CHECK(exact.residual_df == 46);
  CHECK(exact.mean(1.0, Eigen::Vector2d(1.0, 1.0)) == doctest::Approx(0.4 - 1.5 + 2.0 - 1.0));

  // A orthogonal to a centered C: simple-regression slope
  Dataset orth;
  const int n = 8;
  orth.exposure = Eigen::VectorXd(n);
  orth.exposure << 0, 1, 0, 1, 0, 1, 0, 1;
  orth.confounders = Eigen::MatrixXd(n, 1);
  orth.confounders << 1, 1, -1, -1, 1, 1, -1, -1;
  orth.mediator = Eigen::VectorXd(n);
  orth.mediator << 0.3, 1.1, -0.4, 0.2, 0.9, 1.7, -0.8, 0.6;
  orth.outcome = Eigen::VectorXd::Zero(n);
  const MediatorFit o = fit_mediator(orth);
  const Eigen::VectorXd ac = orth.exposure.array() - orth.exposure.mean();
  const Eigen::VectorXd mc = orth.mediator.array() - orth.mediator.mean();
  CHECK(o.gamma1 == doctest::Approx(ac.dot(mc) / ac.squaredNorm()));

  // residual variance is unbiased for 0.3^2 on simulated cohorts
  StudyConfig cfg;
  double mean_s2 = 0.0;
  for (int r = 0; r < 200; ++r) {
    Rng stream = make_stream(99, static_cast<std::uint64_t>(r));
    mean_s2 += fit_mediator(drop_constant_confounders(gen_dataset(cfg, stream))).sigma2_sq / 200.0;
  }
  CHECK(mean_s2 == doctest::Approx(0.09).epsilon(0.10));
}

TEST_CASE("validation errors") {
  std::mt19937_64 rng(1);
  Dataset data = toy_dataset(20, rng);
  CHECK_NOTHROW(validate(data));
  Dataset bad = data;
  bad.exposure(3) = 2.0;
  CHECK_THROWS_AS(validate(bad), ExposureError);
  bad = data;
  bad.mediator.resize(19);
  CHECK_THROWS_AS(validate(bad), DataError);
  bad = data;
  bad.outcome(0) = std::nan("");
  CHECK_THROWS_AS(validate(bad), DataError);
  Dataset tiny = toy_dataset(9, rng);
  CHECK_THROWS_AS(fit_outcome(tiny, {}, 5), DataError);
  CHECK(shape_from_string("Concave") == Shape::Concave);
  CHECK_THROWS_AS(shape_from_string("wiggly"), std::invalid_argument);
  CHECK(basis_kind_for(Shape::Decreasing) == BasisKind{SplineFamily::IQuadratic, true});
  CHECK(basis_kind_for(Shape::Convex) == BasisKind{SplineFamily::CCubic, false});
}

}
