#pragma once

// Monte Carlo coverage study for the shape-restricted estimator and the
// linear interaction baseline.
//
// Synthetic cohorts carry seven confounders (age, inverse maternal weight,
// race, season of blood draw, smoking, ovum donor, diabetes), a 50/50
// binary exposure, a normal mediator and an outcome built from one of the
// closed-form pattern curves.

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "shapemed/effects.hpp"
#include "shapemed/mediation_models.hpp"

namespace shapemed {

using Rng = std::mt19937_64;

/// Independent stream for (seed, stream): identical regardless of which
/// thread consumes it or in what order streams are created.
Rng make_stream(std::uint64_t seed, std::uint64_t stream);

enum class PatternName { Pattern1, Pattern2, Pattern3, Linear };

const char* to_string(PatternName name);
PatternName pattern_from_string(const std::string& name);

struct PatternSpec {
  PatternName name = PatternName::Pattern1;
  std::function<double(double)> f1;  // exposed
  std::function<double(double)> f2;  // unexposed
  ShapeSpec declared_shapes;
};

PatternSpec make_pattern(PatternName name);

/// Names of the 12 encoded confounder columns produced by gen_confounders.
const std::vector<std::string>& confounder_column_names();

struct GeneratorCoefficients {
  double beta0 = 0.0;
  double beta1 = 0.0;
  Eigen::VectorXd beta4;
  double gamma0 = 0.0;
  double gamma1 = 0.0;
  Eigen::VectorXd gamma2;

  /// Default set. The mediator averages about 0.14 at A=0 and spreads
  /// roughly +-3.5 with age, so the pattern curves bend over the data.
  static GeneratorCoefficients defaults();
};

struct StudyConfig {
  PatternSpec pattern = make_pattern(PatternName::Pattern1);
  int n = 500;
  int reps = 500;
  double sigma1 = 10.0;
  double sigma2 = 0.3;
  GeneratorCoefficients generator = GeneratorCoefficients::defaults();
  std::uint64_t seed = 20240601;
  std::size_t num_bases = 5;
  /// 0 = SHAPEMED_THREADS or hardware concurrency.
  int threads = 0;

  void validate() const;
};

/// n x 12 encoded table (race and season one-hot with the first level dropped).
Eigen::MatrixXd gen_confounders(int n, Rng& rng);

Dataset gen_dataset(const StudyConfig& config, Rng& rng);

/// Copy without the confounder columns that are constant in this sample
/// (e.g. no ovum donors drawn); the intercept already absorbs them.
Dataset drop_constant_confounders(const Dataset& data);

struct TrueEffects {
  double cde = 0.0;
  double nde = 0.0;
  double nie = 0.0;
};

/// Effects at a = 1, a* = 0 under the generating model, conditioning at c_bar;
/// the CDE is evaluated at m_bar.
TrueEffects true_effects(const StudyConfig& config, const Eigen::VectorXd& c_bar, double m_bar);

enum class Method { ShapeRestricted, LinearBaseline };
const char* to_string(Method method);

struct ReplicateRecord {
  int replicate = 0;
  Method method = Method::ShapeRestricted;
  EffectKind effect = EffectKind::CDE;
  double estimate = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  double truth = 0.0;
  bool covered = false;
};

struct EffectSummary {
  Method method = Method::ShapeRestricted;
  EffectKind effect = EffectKind::CDE;
  double coverage = 0.0;
  double avg_abs_rel_bias = 0.0;
  double avg_mse = 0.0;
  double avg_bias = 0.0;
  int replicates = 0;
};

struct StudyResult {
  PatternName pattern = PatternName::Pattern1;
  double sigma1 = 0.0;
  int failures = 0;
  std::vector<std::string> failure_messages;
  /// ShapeRestricted {CDE, NDE, NIE} followed by LinearBaseline {CDE, NDE, NIE}.
  std::array<EffectSummary, 6> summaries;
  std::vector<ReplicateRecord> records;

  const EffectSummary& summary(Method method, EffectKind effect) const;
};

/// Replicate r draws from make_stream(seed, r), so results do not depend on
/// the thread count, and the same cohorts (up to the scale of the outcome
/// noise) are reused across sigma1 values.
StudyResult run_study(const StudyConfig& config);

/// Resolved worker count for a config.
int study_threads(const StudyConfig& config);

}  // namespace shapemed
