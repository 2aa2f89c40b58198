#pragma once

// Command-line front end: `fit`, `simulate` and `basis`.
//
// Exit codes: 0 success, 1 other failure (including failed simulation
// replicates), 2 unreadable input or bad arguments, 3 unusable exposure,
// 4 rank-deficient design.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "shapemed/mediation_models.hpp"
#include "shapemed/report.hpp"
#include "shapemed/simulation.hpp"

namespace shapemed::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kBadInput = 2,
  kBadExposure = 3,
  kRankDeficient = 4,
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Comma-separated with a header row; fields may be double-quoted. Throws
/// DataError naming `source` on empty input or ragged rows.
CsvTable read_csv(std::istream& in, const std::string& source);
CsvTable read_csv_file(const std::string& path);

struct ColumnMap {
  std::string outcome;
  std::string exposure;
  std::string mediator;
  std::vector<std::string> confounders;
};

/// A non-numeric confounder, one-hot encoded with the lexicographically
/// first level dropped.
struct CategoricalEncoding {
  std::string column;
  std::string reference;
  std::vector<std::string> encoded;  // "<column>_<level>"
};

struct LoadedData {
  Dataset data;
  std::size_t rows_read = 0;
  std::size_t rows_rejected = 0;  // rows with an empty or NA cell in a mapped column
  std::vector<CategoricalEncoding> categorical;
};

/// Throws DataError for unknown columns or non-numeric outcome/mediator, and
/// ExposureError when the exposure is not a two-valued 0/1 column.
LoadedData load_dataset(const CsvTable& table, const ColumnMap& columns);

struct FitRequest {
  std::string input;
  ColumnMap columns;
  ShapeSpec shapes;
  std::size_t num_bases = 5;
  double a = 1.0;
  double a_star = 0.0;
  std::optional<double> m;               // sample mean when empty
  std::optional<std::vector<double>> c;  // sample means of the encoded columns when empty
  double level = 0.95;
  int curve_points = 101;
};

Json fit_report(const FitRequest& request);

/// Study settings plus the list of outcome noise levels to run.
struct SimulationPlan {
  StudyConfig config;
  std::vector<double> sigma1;
};

/// Keys: pattern (required), n, reps, sigma1 (number or list), sigma2, seed,
/// num_bases, threads, generator {beta0, beta1, beta4, gamma0, gamma1, gamma2}.
SimulationPlan parse_simulation_config(const Json& j);

std::string summary_csv(const std::vector<StudyResult>& results);
std::string replicate_csv(const std::vector<StudyResult>& results);

struct BasisRequest {
  SplineFamily family = SplineFamily::IQuadratic;
  bool negated = false;
  std::vector<double> knots;
  std::optional<double> grid_min;  // knots.front() when empty
  std::optional<double> grid_max;  // knots.back() when empty
  int grid_points = 101;
};

/// Header "x,basis_1,...,basis_k" followed by one row per grid point.
std::string basis_csv(const BasisRequest& request);

/// Full command line, argv[0] included.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace shapemed::cli
