#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "slfa/design.hpp"
#include "slfa/estimator.hpp"
#include "slfa/model.hpp"

namespace slfa {

enum class DesignKind { Simple, Mixed, StudyII, Table1, Custom };
enum class BallDistribution { UniformBall, UniformSphere, TruncatedNormal };

struct GeneratedDesign {
  DesignMatrix q;
  bool partial_cycle = false;  // J was not a multiple of the pattern length
};

// Cyclic pattern for each design kind, in row order (0-based factor sets).
std::vector<FactorSet> design_patterns(DesignKind kind, std::size_t factors,
                                       const std::vector<FactorSet>& custom = {});

GeneratedDesign gen_design(DesignKind kind, std::size_t items, std::size_t factors,
                           const std::vector<FactorSet>& custom = {});

// count x K matrix of i.i.d. rows supported on {||x|| <= radius}.
// TruncatedNormal draws N(0, (radius/2)^2 I) conditioned on the ball.
Matrix sample_ball(std::size_t count, std::size_t factors, double radius, Rng& rng,
                   BallDistribution dist = BallDistribution::UniformBall);

// Zeroes the loadings that the design forbids.
Loadings apply_design(const Matrix& a_raw, const DesignMatrix& q);

// i.i.d. Bernoulli(n_expected / (N J)) observation indicators.
ResponseData::Mask gen_mask(double n_expected, std::size_t rows, std::size_t cols, Rng& rng);

struct StudyConfig {
  std::string name = "study";
  ModelFamily family = ModelFamily::gaussian();
  std::size_t factors = 5;
  DesignKind design = DesignKind::Simple;
  std::vector<FactorSet> custom_patterns;
  std::vector<std::size_t> j_grid{50, 100, 200};
  double n_multiplier = 25.0;
  std::vector<std::size_t> n_list;  // overrides n_multiplier when nonempty
  double radius = 2.5;
  double cprime_multiplier = 1.2;
  int replications = 5;
  std::uint64_t seed = 1;
  std::optional<double> missing_n;          // expected observed cells
  std::optional<double> observed_fraction;  // n / (N J); used if missing_n unset
  double quantile_lower = 0.55;
  double quantile_upper = 0.65;
  BallDistribution ball = BallDistribution::UniformBall;
  std::size_t metric_factor = 0;  // 0-based factor for score-recovery metrics
  int max_outer_iters = 1000;
  int inner_steps = 5;
  double tol_rel_obj = 1e-7;

  void validate() const;
  std::size_t persons_for(std::size_t grid_index) const;
  static StudyConfig from_json(const std::string& text);
  static StudyConfig from_json_file(const std::string& path);
  std::string to_json(int indent = 2) const;
};

struct ReplicationRecord {
  std::size_t items = 0;    // J
  std::size_t persons = 0;  // N
  int replication = 0;
  bool ok = true;
  std::string error;
  std::vector<double> sine;  // per factor
  double frobenius = 0;
  double wasserstein = 0;
  double kendall = 0;
  double classification = 0;
  double tau_lower = 0;
  double tau_upper = 0;
  int iterations = 0;
  bool converged = false;
  double observed_fraction = 1.0;
  double gamma_theta = 0;    // audit of the person draw
  double gamma_a_min = 0;    // weakest active design block of the loading draw
  double sigma_nj = 0;       // signal index of the metric factor
  double wall_seconds = 0;   // not serialized to the records file
  double trace_rise = 0;     // largest objective increase; not serialized
};

// All (J, replication) cells, ordered by grid position then replication.
// Each cell derives its own generator from (seed, J, replication), so the
// output does not depend on `threads`.
std::vector<ReplicationRecord> run_study(const StudyConfig& config, int threads = 1);

// Tidy CSV: J,N,replication,metric,value.
std::string records_csv(const std::vector<ReplicationRecord>& records);
// Per (J, metric): median and 25%/75% quantiles over successful replications.
std::string aggregate_csv(const std::vector<ReplicationRecord>& records);

// Median of `metric` at each grid point, in grid order. Metric names match the
// records file ("frobenius", "sin_factor_1", ...).
std::vector<double> median_by_j(const std::vector<ReplicationRecord>& records,
                                const std::string& metric);

}  // namespace slfa
