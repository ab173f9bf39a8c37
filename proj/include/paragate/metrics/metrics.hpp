// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "paragate/common/error.hpp"

namespace paragate::metrics {

enum class MetricsErrorKind { DegenerateTruth, SizeMismatch };
using MetricsError = KindedError<MetricsErrorKind>;

inline constexpr double kMapeFloor = 1e-6;

/// 1 - SS_res / SS_tot. Needs at least two points and non-constant truth.
double r2(const std::vector<double>& pred, const std::vector<double>& truth);
/// Mean |pred - truth| / max(|truth|, 1e-6), in percent.
double mape(const std::vector<double>& pred, const std::vector<double>& truth);
/// |pred - truth| / truth, in percent.
double total_relative_error(double pred_total, double truth_total);

struct DesignEval {
  std::string design;
  std::size_t n_points = 0;
  double r2 = 0.0;
  double mape = 0.0;
  double total_rel_err = 0.0;
};

struct Runtime {
  double step1_s = 0.0;
  double step2_s = 0.0;
  double step3_s = 0.0;
  [[nodiscard]] double total() const { return step1_s + step2_s + step3_s; }
};

/// Pooled metrics plus the per-design breakdown and its means.
struct EvalResult {
  double r2 = 0.0;
  double mape = 0.0;
  double total_rel_err = 0.0;
  std::size_t n_points = 0;
  double mean_design_r2 = 0.0;
  double mean_design_mape = 0.0;
  std::vector<DesignEval> designs;
  Runtime runtime;
};

/// One design's values; pred/truth totals feed the total-error column.
DesignEval evaluate_design(const std::string& design, const std::vector<double>& pred,
                           const std::vector<double>& truth, double pred_total, double truth_total);
/// Pools the raw points of several designs. `pred`/`truth` are per design.
EvalResult combine(const std::vector<DesignEval>& designs, const std::vector<std::vector<double>>& pred,
                   const std::vector<std::vector<double>>& truth);

nlohmann::ordered_json to_json(const EvalResult& r);
std::string designs_csv(const EvalResult& r);

}  // namespace paragate::metrics
