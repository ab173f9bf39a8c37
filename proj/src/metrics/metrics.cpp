// SPDX-License-Identifier: Apache-2.0
#include "paragate/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "paragate/common/text.hpp"

namespace paragate::metrics {

namespace {

void check_sizes(const std::vector<double>& pred, const std::vector<double>& truth) {
  if (pred.size() != truth.size()) {
    throw MetricsError(MetricsErrorKind::SizeMismatch, "prediction and truth lengths differ (" +
                                                           std::to_string(pred.size()) + " vs " +
                                                           std::to_string(truth.size()) + ")");
  }
}

}  // namespace

double r2(const std::vector<double>& pred, const std::vector<double>& truth) {
  check_sizes(pred, truth);
  if (truth.size() < 2) throw MetricsError(MetricsErrorKind::DegenerateTruth, "r2 needs at least two points");
  double mean = 0.0;
  for (double t : truth) mean += t;
  mean /= static_cast<double>(truth.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ss_res += (pred[i] - truth[i]) * (pred[i] - truth[i]);
    ss_tot += (truth[i] - mean) * (truth[i] - mean);
  }
  if (!(ss_tot > 0.0)) throw MetricsError(MetricsErrorKind::DegenerateTruth, "truth has zero variance");
  return 1.0 - ss_res / ss_tot;
}

double mape(const std::vector<double>& pred, const std::vector<double>& truth) {
  check_sizes(pred, truth);
  if (truth.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    sum += std::fabs(pred[i] - truth[i]) / std::max(std::fabs(truth[i]), kMapeFloor);
  }
  return 100.0 * sum / static_cast<double>(truth.size());
}

double total_relative_error(double pred_total, double truth_total) {
  if (!(truth_total > 0.0)) throw MetricsError(MetricsErrorKind::DegenerateTruth, "truth total must be positive");
  return 100.0 * std::fabs(pred_total - truth_total) / truth_total;
}

DesignEval evaluate_design(const std::string& design, const std::vector<double>& pred,
                           const std::vector<double>& truth, double pred_total, double truth_total) {
  DesignEval d;
  d.design = design;
  d.n_points = truth.size();
  d.r2 = r2(pred, truth);
  d.mape = mape(pred, truth);
  d.total_rel_err = truth_total > 0.0 ? total_relative_error(pred_total, truth_total) : 0.0;
  return d;
}

EvalResult combine(const std::vector<DesignEval>& designs, const std::vector<std::vector<double>>& pred,
                   const std::vector<std::vector<double>>& truth) {
  EvalResult r;
  r.designs = designs;
  std::vector<double> p, t;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    p.insert(p.end(), pred[k].begin(), pred[k].end());
    t.insert(t.end(), truth[k].begin(), truth[k].end());
  }
  r.n_points = t.size();
  if (t.size() >= 2) r.r2 = r2(p, t);
  r.mape = mape(p, t);
  for (std::size_t k = 0; k < designs.size(); ++k) {
    r.mean_design_r2 += designs[k].r2;
    r.mean_design_mape += designs[k].mape;
    r.total_rel_err += designs[k].total_rel_err;
  }
  if (!designs.empty()) {
    const double n = static_cast<double>(designs.size());
    r.mean_design_r2 /= n;
    r.mean_design_mape /= n;
    r.total_rel_err /= n;
  }
  return r;
}

nlohmann::ordered_json to_json(const EvalResult& r) {
  nlohmann::ordered_json j;
  j["r2"] = r.r2;
  j["mape"] = r.mape;
  j["total_rel_err"] = r.total_rel_err;
  j["n_points"] = r.n_points;
  j["mean_design_r2"] = r.mean_design_r2;
  j["mean_design_mape"] = r.mean_design_mape;
  auto& d = j["designs"] = nlohmann::ordered_json::array();
  for (const auto& e : r.designs) {
    d.push_back({{"design", e.design},
                 {"n_points", e.n_points},
                 {"r2", e.r2},
                 {"mape", e.mape},
                 {"total_rel_err", e.total_rel_err}});
  }
  if (r.runtime.total() > 0.0) {
    j["runtime"] = {{"step1_s", r.runtime.step1_s},
                    {"step2_s", r.runtime.step2_s},
                    {"step3_s", r.runtime.step3_s},
                    {"total_s", r.runtime.total()}};
  }
  return j;
}

std::string designs_csv(const EvalResult& r) {
  std::ostringstream os;
  os << "design,n_points,r2,mape,total_rel_err\n";
  for (const auto& e : r.designs) {
    os << e.design << ',' << e.n_points << ',' << text::format_exact(e.r2) << ',' << text::format_exact(e.mape) << ','
       << text::format_exact(e.total_rel_err) << '\n';
  }
  return os.str();
}

}  // namespace paragate::metrics
