#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "slfa/design.hpp"
#include "slfa/model.hpp"

namespace slfa {

struct LineSearchConfig {
  double backtrack = 0.5;     // step multiplier on rejection, in (0, 1)
  double initial_step = 1.0;  // also the cap for remembered steps
  int max_halvings = 50;
  double armijo = 1e-4;
  // Start each step from the last accepted step / backtrack instead of
  // initial_step.
  bool remember_steps = true;
};

struct FitConfig {
  double c_prime = 3.0;  // radius of the norm balls for theta_i and a_j
  int max_outer_iters = 1000;
  int inner_steps = 5;
  double tol_rel_obj = 1e-7;
  LineSearchConfig line_search;
  bool intercept_mode = false;
  std::uint64_t seed = 1;
  int threads = 1;
  // Caller-supplied starting values; projected onto the feasible set.
  std::optional<FactorScores> theta_init;
  std::optional<Loadings> a_init;

  void validate() const;
};

struct FitResult {
  FactorScores theta_hat;  // N x K
  Loadings a_hat;          // J x K
  // Negative log-likelihood at the start and after each outer iteration.
  std::vector<double> objective_trace;
  bool converged = false;
  int iters_used = 0;
  // Row/column updates whose line search ran out of halvings.
  std::size_t stalled_updates = 0;
  // Largest |column sum| of theta columns 2..K seen after a theta block
  // (intercept mode only).
  double centering_drift = 0.0;
};

// Euclidean projection onto {||x|| <= radius}.
Vector project_ball(const Vector& x, double radius);
// Zeroes coordinates outside `allowed`, then projects onto the ball.
Vector project_loading(const Vector& a, FactorSet allowed, double radius);
// Projection of every row onto {theta_1 = 1, ||theta|| <= radius} intersected
// with {columns 2..K sum to zero}, by Dykstra's alternating projections.
FactorScores project_intercept_scores(const FactorScores& theta, double radius);

struct BlockStats {
  std::size_t stalled = 0;
  // Log-likelihood at the block's starting point, summed over rows in order.
  // Set by update_theta_block only.
  double start_loglik = 0.0;
};

// Per-block state that persists across outer iterations (remembered steps).
struct BlockSteps {
  std::vector<double> theta;
  std::vector<double> loadings;
  double theta_global = 0.0;
};

// One theta half-step of the alternating scheme: every person row gets up to
// inner_steps projected-gradient ascent steps on its own likelihood with A held
// fixed.
FactorScores update_theta_block(const ResponseData& data, const Loadings& a_fixed,
                                const FactorScores& theta, const ModelFamily& family,
                                const FitConfig& config, BlockSteps* steps = nullptr,
                                BlockStats* stats = nullptr);

// One loading half-step: every item column, projected onto its Q-pattern and
// the ball.
Loadings update_a_block(const ResponseData& data, const FactorScores& theta_fixed,
                        const Loadings& a, const DesignMatrix& q, const ModelFamily& family,
                        const FitConfig& config, BlockSteps* steps = nullptr,
                        BlockStats* stats = nullptr);

// Constrained joint maximum likelihood by alternating projected gradient
// blocks. Dispatches to fit_with_intercept when config.intercept_mode is set.
FitResult fit(const ResponseData& data, const DesignMatrix& q, const ModelFamily& family,
              const FitConfig& config);

// Intercept variant: theta column 1 is fixed at 1, columns 2..K are kept
// centered, and every item must load on factor 1.
FitResult fit_with_intercept(const ResponseData& data, const DesignMatrix& q,
                             const ModelFamily& family, const FitConfig& config);

}  // namespace slfa
