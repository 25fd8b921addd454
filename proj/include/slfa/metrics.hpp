#pragma once

#include <cstdint>
#include <vector>

#include "slfa/model.hpp"

namespace slfa {

// sqrt(N)-scaled unit vector, optionally sign-flipped.
struct NormalizedScores {
  Vector values;
  bool aligned = false;
};

struct ClassificationSpec {
  double lower;  // tau_minus
  double upper;  // tau_plus
};

// Sine of the angle between column k of the true and estimated scores.
double sin_angle_factor(const FactorScores& theta_true, const FactorScores& theta_hat,
                        Eigen::Index k);

// +1 if w.w' > 0, else -1; an exactly zero dot product gives +1.
int sign_align(const Vector& w, const Vector& w2);

// v_i = c sqrt(N) theta_i / ||theta||.
NormalizedScores normalize_scores(const Vector& theta_col, int sign = 1);

// Exact 1-Wasserstein distance between two equal-weight empirical measures.
double wasserstein_empirical(const Vector& v, const Vector& v_hat);

// Number of unordered pairs ranked strictly in opposite orders; ties in either
// vector never count. O(N log N).
std::uint64_t kendall_tau_distance(const Vector& v, const Vector& v_hat);
// kendall_tau_distance / (N(N-1)/2); 0 when N < 2.
double kendall_tau_normalized(const Vector& v, const Vector& v_hat);

// Fraction of entries that cross the indifference zone in opposite directions.
double classification_error(const Vector& v, const Vector& v_hat, const ClassificationSpec& spec);

// ||M_hat - M||_F / sqrt(NJ).
double frobenius_scaled(const Matrix& m_hat, const Matrix& m_true);

// Linear-interpolation sample quantile (the usual "type 7" rule), p in [0,1].
double quantile(const Vector& x, double p);

struct FactorRecovery {
  double sine = 0;
  int sign = 1;
  double wasserstein = 0;
  double kendall = 0;  // normalized
  double classification = 0;
  double tau_lower = 0;
  double tau_upper = 0;
};

// Bundle used by studies and the eval command: sign alignment on column k,
// normalized scores, and all score-recovery metrics with thresholds at the
// given quantiles of the true normalized scores.
FactorRecovery factor_recovery(const FactorScores& theta_true, const FactorScores& theta_hat,
                               Eigen::Index k, double q_lower, double q_upper);

}  // namespace slfa
