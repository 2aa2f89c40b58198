#pragma once

// JSON serialization of fitted models and effect estimates.
//
// Doubles are written with round-trip precision, so a fit read back from a
// report evaluates to exactly the same curve values.

#include <vector>

#include <json.hpp>

#include "shapemed/effects.hpp"
#include "shapemed/mediation_models.hpp"

namespace shapemed {

using Json = nlohmann::json;

Json to_json(const Eigen::VectorXd& v);
Json to_json(const Eigen::MatrixXd& m);  // array of rows
Eigen::VectorXd vector_from_json(const Json& j);
Eigen::MatrixXd matrix_from_json(const Json& j);

Json to_json(const MediatorFit& fit);
MediatorFit mediator_fit_from_json(const Json& j);

/// Everything except the fitted values.
Json to_json(const OutcomeFit& fit);
OutcomeFit outcome_fit_from_json(const Json& j);

Json to_json(const EffectEstimate& e);
EffectEstimate effect_from_json(const Json& j);
EffectKind effect_kind_from_string(const std::string& name);

/// f1 and f2 (without intercept or confounder terms) on an even grid over
/// the knot range.
struct CurveTable {
  std::vector<double> m;
  std::vector<double> f1;
  std::vector<double> f2;
};

CurveTable curve_table(const OutcomeFit& fit, int points = 101);
Json to_json(const CurveTable& table);
CurveTable curve_table_from_json(const Json& j);

}  // namespace shapemed
