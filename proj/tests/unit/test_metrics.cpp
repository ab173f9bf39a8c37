// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include "doctest.h"
#include "paragate/metrics/metrics.hpp"

using namespace paragate::metrics;

namespace {

bool throws_kind(MetricsErrorKind kind, const auto& f) {
  try {
    f();
  } catch (const MetricsError& e) {
    return e.kind() == kind;
  }
  return false;
}

}  // namespace

TEST_CASE("hand fixtures") {
  CHECK(r2({1, 2, 3}, {1, 2, 3}) == 1.0);
  // truth mean 2, SS_tot 2, SS_res 0.25 + 0 + 0.25.
  CHECK(r2({1.5, 2, 2.5}, {1, 2, 3}) == doctest::Approx(0.75));
  CHECK(r2({2, 2, 2}, {1, 2, 3}) == doctest::Approx(0.0));
  CHECK(mape({110, 90}, {100, 100}) == doctest::Approx(10.0));
  CHECK(mape({1, 3}, {2, 2}) == doctest::Approx(50.0));
  CHECK(total_relative_error(1.00909, 1.0) == doctest::Approx(0.909).epsilon(1e-9));
  CHECK(total_relative_error(0.95, 1.0) == doctest::Approx(5.0));
}

TEST_CASE("R2 is invariant to a common affine change of units") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  std::vector<double> t(200), p(200);
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = nd(rng);
    p[i] = t[i] + 0.3 * nd(rng);
  }
  const double base = r2(p, t);
  std::vector<double> t2 = t, p2 = p;
  for (auto& v : t2) v = 7.0 * v + 3.0;
  for (auto& v : p2) v = 7.0 * v + 3.0;
  CHECK(r2(p2, t2) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("MAPE is scale-invariant and order-free") {
  const std::vector<double> t = {1, 4, 9, 16}, p = {1.5, 3, 10, 20};
  const double base = mape(p, t);
  std::vector<double> t2 = t, p2 = p;
  for (auto& v : t2) v *= 1e3;
  for (auto& v : p2) v *= 1e3;
  CHECK(mape(p2, t2) == doctest::Approx(base).epsilon(1e-12));
  CHECK(mape({20, 10, 3, 1.5}, {16, 9, 4, 1}) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("degenerate inputs") {
  CHECK(throws_kind(MetricsErrorKind::DegenerateTruth, [] { r2({1, 2}, {5, 5}); }));
  CHECK(throws_kind(MetricsErrorKind::DegenerateTruth, [] { r2({1}, {1}); }));
  CHECK(throws_kind(MetricsErrorKind::SizeMismatch, [] { r2({1, 2}, {1, 2, 3}); }));
  CHECK(throws_kind(MetricsErrorKind::SizeMismatch, [] { mape({1}, {}); }));
  CHECK(throws_kind(MetricsErrorKind::DegenerateTruth, [] { total_relative_error(1.0, 0.0); }));
  // Zero truth is floored rather than divided by.
  CHECK(std::isfinite(mape({1.0}, {0.0})));
}

TEST_CASE("combine pools points and averages designs") {
  const std::vector<std::vector<double>> pred = {{1, 2, 3}, {10, 30}};
  const std::vector<std::vector<double>> truth = {{1, 2, 4}, {10, 20}};
  std::vector<DesignEval> d;
  for (std::size_t k = 0; k < 2; ++k) d.push_back(evaluate_design("d" + std::to_string(k), pred[k], truth[k], 1, 1));
  const auto r = combine(d, pred, truth);
  CHECK(r.n_points == 5);
  CHECK(r.mape == doctest::Approx(mape({1, 2, 3, 10, 30}, {1, 2, 4, 10, 20})));
  CHECK(r.r2 == doctest::Approx(r2({1, 2, 3, 10, 30}, {1, 2, 4, 10, 20})));
  CHECK(r.mean_design_r2 == doctest::Approx((d[0].r2 + d[1].r2) / 2.0));
  CHECK(r.mean_design_mape == doctest::Approx((d[0].mape + d[1].mape) / 2.0));
  const auto j = to_json(r);
  CHECK(j.contains("designs"));
  CHECK_FALSE(j.contains("runtime"));
  const auto csv = designs_csv(r);
  CHECK(csv.find("d0") != std::string::npos);
  CHECK(csv.find("d1") != std::string::npos);
}
