#include "shapemed/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <optional>
#include <stdexcept>
#include <thread>

#include "shapemed/quadrature.hpp"

namespace shapemed {

Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x5eedu};
  return Rng(seq);
}

const char* to_string(PatternName name) {
  switch (name) {
    case PatternName::Pattern1: return "Pattern1";
    case PatternName::Pattern2: return "Pattern2";
    case PatternName::Pattern3: return "Pattern3";
    case PatternName::Linear: return "Linear";
  }
  return "?";
}

PatternName pattern_from_string(const std::string& name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (s == "pattern1" || s == "1") return PatternName::Pattern1;
  if (s == "pattern2" || s == "2") return PatternName::Pattern2;
  if (s == "pattern3" || s == "3") return PatternName::Pattern3;
  if (s == "linear") return PatternName::Linear;
  throw std::invalid_argument("unknown pattern '" + name + "'");
}

namespace {

double sigmoid_curve(double m) {
  const double e = std::exp(6.0 * m / 5.0);
  return 50.0 * e / (2.0 + e) + 50.0;
}

}  // namespace

PatternSpec make_pattern(PatternName name) {
  PatternSpec p;
  p.name = name;
  switch (name) {
    case PatternName::Pattern1:
      p.f1 = [](double m) { return -6.0 * (m - 5.0 / 3.0) * (m - 5.0 / 3.0) / 5.0 + 100.0; };
      p.f2 = sigmoid_curve;
      p.declared_shapes = {Shape::Concave, Shape::Increasing};
      break;
    case PatternName::Pattern2:
      p.f1 = [](double m) { return (-std::exp(m) - 100.0 * m * m) / 50.0 + 100.0; };
      p.f2 = [](double m) { return -6.0 * (m + 5.0 / 3.0) * (m + 5.0 / 3.0) / 5.0 + 100.0; };
      p.declared_shapes = {Shape::Concave, Shape::Concave};
      break;
    case PatternName::Pattern3:
      p.f1 = sigmoid_curve;
      p.f2 = [](double m) { return 300.0 * std::log(-std::exp(m / 2.0) + m + 40.0) - 1000.0; };
      p.declared_shapes = {Shape::Increasing, Shape::Concave};
      break;
    case PatternName::Linear:
      p.f1 = [](double m) { return 5.5 * m + 70.0; };
      p.f2 = [](double m) { return 9.5 * m + 60.0; };
      p.declared_shapes = {Shape::Increasing, Shape::Increasing};
      break;
  }
  return p;
}

const std::vector<std::string>& confounder_column_names() {
  static const std::vector<std::string> names{
      "age",     "inv_weight", "race2",   "race3",   "race4",      "race5",
      "season2", "season3",    "season4", "smoking", "ovum_donor", "diabetes"};
  return names;
}

GeneratorCoefficients GeneratorCoefficients::defaults() {
  GeneratorCoefficients g;
  g.beta0 = 3000.0;
  g.beta1 = 16.0;
  g.beta4.resize(12);
  g.beta4 << 5.0, -20000.0, -50.0, -30.0, 20.0, -10.0, 10.0, -5.0, 15.0, -150.0, 30.0, 80.0;
  g.gamma0 = -8.714;
  g.gamma1 = 0.3;
  g.gamma2.resize(12);
  g.gamma2 << 0.3, 10.0, 0.3, -0.3, 0.2, -0.2, 0.1, -0.1, 0.05, -0.4, 0.3, 0.3;
  return g;
}

void StudyConfig::validate() const {
  if (!(sigma1 > 0.0) || !(sigma2 > 0.0)) throw std::invalid_argument("sigma1 and sigma2 must be positive");
  if (reps < 1) throw std::invalid_argument("reps must be >= 1");
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  if (num_bases < 2) throw std::invalid_argument("num_bases must be >= 2");
  const auto d = static_cast<Eigen::Index>(confounder_column_names().size());
  if (generator.beta4.size() != d || generator.gamma2.size() != d) {
    throw std::invalid_argument("generator beta4 and gamma2 need " + std::to_string(d) + " entries");
  }
  if (!pattern.f1 || !pattern.f2) throw std::invalid_argument("pattern curves are not set");
}

Eigen::MatrixXd gen_confounders(int n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("gen_confounders: n must be >= 1");
  std::uniform_int_distribution<int> age_step(0, 44);         // 18.0 .. 40.0 by 0.5
  std::uniform_int_distribution<int> weight_step(20, 143);    // 0.0020 .. 0.0143 by 0.0001
  std::discrete_distribution<int> race({0.46, 0.28, 0.13, 0.10, 0.03});
  std::uniform_int_distribution<int> season(0, 3);
  std::bernoulli_distribution smoking(0.05);
  std::bernoulli_distribution donor(0.02);
  std::bernoulli_distribution diabetes(0.05);

  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, 12);
  for (int i = 0; i < n; ++i) {
    c(i, 0) = 18.0 + 0.5 * age_step(rng);
    c(i, 1) = weight_step(rng) / 10000.0;
    const int r = race(rng);
    if (r > 0) c(i, 1 + r) = 1.0;
    const int s = season(rng);
    if (s > 0) c(i, 5 + s) = 1.0;
    c(i, 9) = smoking(rng) ? 1.0 : 0.0;
    c(i, 10) = donor(rng) ? 1.0 : 0.0;
    c(i, 11) = diabetes(rng) ? 1.0 : 0.0;
  }
  return c;
}

Dataset gen_dataset(const StudyConfig& config, Rng& rng) {
  config.validate();
  const int n = config.n;
  const GeneratorCoefficients& g = config.generator;
  Dataset data;
  data.confounders = gen_confounders(n, rng);
  data.confounder_names = confounder_column_names();
  data.exposure.resize(n);
  data.mediator.resize(n);
  data.outcome.resize(n);

  std::bernoulli_distribution exposed(0.5);
  for (int i = 0; i < n; ++i) data.exposure(i) = exposed(rng) ? 1.0 : 0.0;

  std::normal_distribution<double> standard(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    data.mediator(i) = g.gamma0 + g.gamma1 * data.exposure(i) +
                       g.gamma2.dot(data.confounders.row(i).transpose()) +
                       config.sigma2 * standard(rng);
  }
  for (int i = 0; i < n; ++i) {
    const double a = data.exposure(i);
    const double m = data.mediator(i);
    const double curve = a == 1.0 ? config.pattern.f1(m) : config.pattern.f2(m);
    data.outcome(i) = g.beta0 + g.beta1 * a + curve +
                      g.beta4.dot(data.confounders.row(i).transpose()) +
                      config.sigma1 * standard(rng);
  }
  return data;
}

TrueEffects true_effects(const StudyConfig& config, const Eigen::VectorXd& c_bar, double m_bar) {
  const GeneratorCoefficients& g = config.generator;
  const PatternSpec& p = config.pattern;
  const double mu0 = g.gamma0 + g.gamma2.dot(c_bar);
  const double mu1 = mu0 + g.gamma1;
  const auto expect = [&](const std::function<double(double)>& f, double mu) {
    return normal_expectation(f, mu, config.sigma2);
  };
  TrueEffects t;
  t.cde = g.beta1 + p.f1(m_bar) - p.f2(m_bar);
  const double e1_0 = expect(p.f1, mu0);
  t.nde = g.beta1 + e1_0 - expect(p.f2, mu0);
  t.nie = expect(p.f1, mu1) - e1_0;
  return t;
}

const char* to_string(Method method) {
  return method == Method::ShapeRestricted ? "ShapeRestricted" : "LinearBaseline";
}

const EffectSummary& StudyResult::summary(Method method, EffectKind effect) const {
  const std::size_t base = method == Method::ShapeRestricted ? 0 : 3;
  return summaries[base + static_cast<std::size_t>(effect)];
}

int study_threads(const StudyConfig& config) {
  if (config.threads > 0) return config.threads;
  if (const char* env = std::getenv("SHAPEMED_THREADS")) {
    const int value = std::atoi(env);
    if (value > 0) return value;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

Dataset drop_constant_confounders(const Dataset& data) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < data.confounders.cols(); ++j) {
    const auto col = data.confounders.col(j);
    if (col.maxCoeff() > col.minCoeff()) keep.push_back(j);
  }
  if (static_cast<Eigen::Index>(keep.size()) == data.confounders.cols()) return data;
  Dataset out = data;
  out.confounders.resize(data.size(), static_cast<Eigen::Index>(keep.size()));
  out.confounder_names.clear();
  for (std::size_t j = 0; j < keep.size(); ++j) {
    out.confounders.col(static_cast<Eigen::Index>(j)) = data.confounders.col(keep[j]);
    out.confounder_names.push_back(data.confounder_names[static_cast<std::size_t>(keep[j])]);
  }
  return out;
}

namespace {

struct ReplicateOutcome {
  std::array<EffectEstimate, 6> estimates;  // shape CDE/NDE/NIE, linear CDE/NDE/NIE
  TrueEffects truth;
};

ReplicateOutcome run_replicate(const StudyConfig& config, int replicate) {
  Rng rng = make_stream(config.seed, static_cast<std::uint64_t>(replicate));
  const Dataset generated = gen_dataset(config, rng);
  const Eigen::VectorXd c_all = generated.confounders.colwise().mean().transpose();
  const double m_bar = generated.mediator.mean();

  ReplicateOutcome out;
  out.truth = true_effects(config, c_all, m_bar);

  const Dataset data = drop_constant_confounders(generated);
  EffectQuery query;
  query.a = 1.0;
  query.a_star = 0.0;
  query.m = m_bar;
  query.c = data.confounders.colwise().mean().transpose();
  query.level = 0.95;

  const OutcomeFit outcome = fit_outcome(data, config.pattern.declared_shapes, config.num_bases);
  const MediatorFit mediator = fit_mediator(data);
  out.estimates[0] = cde(outcome, query);
  out.estimates[1] = nde(outcome, mediator, query);
  out.estimates[2] = nie(outcome, mediator, query);
  const auto linear = linear_baseline(data, query);
  std::copy(linear.begin(), linear.end(), out.estimates.begin() + 3);
  return out;
}

}  // namespace

StudyResult run_study(const StudyConfig& config) {
  config.validate();
  const int reps = config.reps;
  std::vector<std::optional<ReplicateOutcome>> outcomes(static_cast<std::size_t>(reps));
  std::vector<std::string> errors(static_cast<std::size_t>(reps));

  std::atomic<int> next{0};
  const auto worker = [&] {
    for (int r = next++; r < reps; r = next++) {
      try {
        outcomes[static_cast<std::size_t>(r)] = run_replicate(config, r);
      } catch (const std::exception& e) {
        errors[static_cast<std::size_t>(r)] = e.what();
      }
    }
  };
  const int threads = std::min(study_threads(config), reps);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  StudyResult result;
  result.pattern = config.pattern.name;
  result.sigma1 = config.sigma1;
  constexpr std::array kinds{EffectKind::CDE, EffectKind::NDE, EffectKind::NIE};
  constexpr std::array methods{Method::ShapeRestricted, Method::LinearBaseline};
  std::array<double, 6> covered{};
  std::array<double, 6> rel_bias{};
  std::array<double, 6> sq_err{};
  std::array<double, 6> bias{};
  int successes = 0;

  // Sequential fold in replicate order: independent of scheduling.
  for (int r = 0; r < reps; ++r) {
    const auto& o = outcomes[static_cast<std::size_t>(r)];
    if (!o) {
      ++result.failures;
      result.failure_messages.push_back("replicate " + std::to_string(r) + ": " +
                                        errors[static_cast<std::size_t>(r)]);
      continue;
    }
    ++successes;
    const std::array truths{o->truth.cde, o->truth.nde, o->truth.nie};
    for (std::size_t slot = 0; slot < 6; ++slot) {
      const EffectEstimate& e = o->estimates[slot];
      const double truth = truths[slot % 3];
      ReplicateRecord rec;
      rec.replicate = r;
      rec.method = methods[slot / 3];
      rec.effect = kinds[slot % 3];
      rec.estimate = e.estimate;
      rec.ci_lower = e.ci_lower;
      rec.ci_upper = e.ci_upper;
      rec.truth = truth;
      rec.covered = e.ci_lower <= truth && truth <= e.ci_upper;
      result.records.push_back(rec);
      covered[slot] += rec.covered ? 1.0 : 0.0;
      rel_bias[slot] += std::abs(e.estimate - truth) / std::abs(truth);
      sq_err[slot] += (e.estimate - truth) * (e.estimate - truth);
      bias[slot] += e.estimate - truth;
    }
  }
  for (std::size_t slot = 0; slot < 6; ++slot) {
    EffectSummary& s = result.summaries[slot];
    s.method = methods[slot / 3];
    s.effect = kinds[slot % 3];
    s.replicates = successes;
    if (successes > 0) {
      s.coverage = covered[slot] / successes;
      s.avg_abs_rel_bias = rel_bias[slot] / successes;
      s.avg_mse = sq_err[slot] / successes;
      s.avg_bias = bias[slot] / successes;
    }
  }
  return result;
}

}  // namespace shapemed
