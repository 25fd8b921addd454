#pragma once

#include <cmath>
#include <vector>

#include "slfa/design.hpp"
#include "slfa/estimator.hpp"
#include "slfa/model.hpp"
#include "slfa/simulation.hpp"

namespace slfa::test {

inline constexpr double kTraceSlack = 1e-10;

inline Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double lo = -1.0,
                             double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = u(rng);
  return m;
}

inline Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

// Largest step up of the trace (0 when it never increases).
inline double worst_trace_increase(const std::vector<double>& trace) {
  double worst = 0.0;
  for (std::size_t t = 1; t < trace.size(); ++t) worst = std::max(worst, trace[t] - trace[t - 1]);
  return worst;
}

// Every fit in the suite runs through here, so the non-increasing objective
// trace is asserted on each of them.
inline FitResult checked_fit(const ResponseData& data, const DesignMatrix& q,
                             const ModelFamily& family, const FitConfig& config) {
  FitResult r = fit(data, q, family, config);
  REQUIRE(!r.objective_trace.empty());
  CHECK(worst_trace_increase(r.objective_trace) <= kTraceSlack);
  return r;
}

struct Truth {
  DesignMatrix q;
  FactorScores theta;
  Loadings a;
  Matrix y;
};

inline Truth make_truth(const ModelFamily& family, std::size_t n, std::size_t j, std::size_t k,
                        DesignKind kind, double radius, std::uint64_t seed) {
  Rng rng(seed);
  Truth t;
  t.q = gen_design(kind, j, k).q;
  t.theta = sample_ball(n, k, radius, rng);
  t.a = apply_design(sample_ball(j, k, radius, rng), t.q);
  t.y = sample_responses(family, t.theta, t.a, rng);
  return t;
}

inline double max_row_norm(const Matrix& m) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) worst = std::max(worst, m.row(i).norm());
  return worst;
}

}  // namespace slfa::test
