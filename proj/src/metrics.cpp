#include "slfa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "slfa/error.hpp"
#include "slfa/linalg.hpp"

namespace slfa {

namespace {

void require_same_length(const Vector& a, const Vector& b, const char* what) {
  if (a.size() != b.size()) fail(ErrorKind::Shape, std::string(what) + ": length mismatch");
}

std::vector<double> sorted_copy(const Vector& v) {
  std::vector<double> out(v.data(), v.data() + v.size());
  std::sort(out.begin(), out.end());
  return out;
}

// Counts pairs (a, b), a before b, with key[a] > key[b] strictly.
std::uint64_t merge_count(std::vector<double>& key, std::vector<double>& scratch,
                          std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t count = merge_count(key, scratch, lo, mid) + merge_count(key, scratch, mid, hi);
  std::size_t i = lo, j = mid, out = lo;
  while (i < mid && j < hi) {
    if (key[j] < key[i]) {
      count += mid - i;
      scratch[out++] = key[j++];
    } else {
      scratch[out++] = key[i++];
    }
  }
  while (i < mid) scratch[out++] = key[i++];
  while (j < hi) scratch[out++] = key[j++];
  std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(lo),
            scratch.begin() + static_cast<std::ptrdiff_t>(hi),
            key.begin() + static_cast<std::ptrdiff_t>(lo));
  return count;
}

}  // namespace

double sin_angle_factor(const FactorScores& theta_true, const FactorScores& theta_hat,
                        Eigen::Index k) {
  if (theta_true.rows() != theta_hat.rows())
    fail(ErrorKind::Shape, "sin_angle_factor: row counts differ");
  if (k < 0 || k >= theta_true.cols() || k >= theta_hat.cols())
    fail(ErrorKind::InvalidArgument, "sin_angle_factor: factor index out of range");
  return sin_angle_vec(theta_true.col(k), theta_hat.col(k));
}

int sign_align(const Vector& w, const Vector& w2) {
  require_same_length(w, w2, "sign_align");
  if (w.squaredNorm() == 0.0 || w2.squaredNorm() == 0.0)
    fail(ErrorKind::Domain, "sign_align: zero vector");
  return w.dot(w2) >= 0.0 ? 1 : -1;
}

NormalizedScores normalize_scores(const Vector& theta_col, int sign) {
  const double norm = theta_col.norm();
  if (norm == 0.0) fail(ErrorKind::Domain, "normalize_scores: zero column");
  const double c = sign < 0 ? -1.0 : 1.0;
  NormalizedScores out;
  out.values = (c * std::sqrt(static_cast<double>(theta_col.size())) / norm) * theta_col;
  out.aligned = sign < 0;
  return out;
}

double wasserstein_empirical(const Vector& v, const Vector& v_hat) {
  require_same_length(v, v_hat, "wasserstein_empirical");
  if (v.size() == 0) return 0.0;
  const auto a = sorted_copy(v);
  const auto b = sorted_copy(v_hat);
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += std::abs(a[i] - b[i]);
  return total / static_cast<double>(a.size());
}

std::uint64_t kendall_tau_distance(const Vector& v, const Vector& v_hat) {
  require_same_length(v, v_hat, "kendall_tau_distance");
  const auto n = static_cast<std::size_t>(v.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Ties in v are ordered by v_hat so they never form strict inversions.
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
    if (v(ia) != v(ib)) return v(ia) < v(ib);
    return v_hat(ia) < v_hat(ib);
  });
  std::vector<double> key(n), scratch(n);
  for (std::size_t i = 0; i < n; ++i) key[i] = v_hat(static_cast<Eigen::Index>(order[i]));
  return merge_count(key, scratch, 0, n);
}

double kendall_tau_normalized(const Vector& v, const Vector& v_hat) {
  const double n = static_cast<double>(v.size());
  if (n < 2) {
    require_same_length(v, v_hat, "kendall_tau_normalized");
    return 0.0;
  }
  return static_cast<double>(kendall_tau_distance(v, v_hat)) / (n * (n - 1) / 2.0);
}

double classification_error(const Vector& v, const Vector& v_hat,
                            const ClassificationSpec& spec) {
  require_same_length(v, v_hat, "classification_error");
  if (!(spec.lower < spec.upper))
    fail(ErrorKind::InvalidArgument, "classification thresholds need tau_minus < tau_plus");
  if (v.size() == 0) return 0.0;
  std::size_t wrong = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v_hat(i) >= spec.upper && v(i) <= spec.lower) ++wrong;
    if (v_hat(i) <= spec.lower && v(i) >= spec.upper) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(v.size());
}

double frobenius_scaled(const Matrix& m_hat, const Matrix& m_true) {
  if (m_hat.rows() != m_true.rows() || m_hat.cols() != m_true.cols())
    fail(ErrorKind::Shape, "frobenius_scaled: shape mismatch");
  if (m_hat.size() == 0) return 0.0;
  return (m_hat - m_true).norm() / std::sqrt(static_cast<double>(m_hat.size()));
}

double quantile(const Vector& x, double p) {
  if (x.size() == 0) fail(ErrorKind::InvalidArgument, "quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) fail(ErrorKind::InvalidArgument, "quantile level outside [0,1]");
  const auto s = sorted_copy(x);
  const double h = p * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

FactorRecovery factor_recovery(const FactorScores& theta_true, const FactorScores& theta_hat,
                               Eigen::Index k, double q_lower, double q_upper) {
  if (theta_true.rows() != theta_hat.rows() || theta_true.cols() != theta_hat.cols())
    fail(ErrorKind::Shape, "true and estimated scores have different shapes");
  if (k < 0 || k >= theta_true.cols())
    fail(ErrorKind::InvalidArgument, "factor index out of range");
  if (!(q_lower < q_upper)) fail(ErrorKind::InvalidArgument, "quantiles need q- < q+");
  const Vector truth = theta_true.col(k);
  const Vector est = theta_hat.col(k);
  FactorRecovery r;
  r.sine = sin_angle_vec(truth, est);
  r.sign = sign_align(truth, est);
  const Vector v = normalize_scores(truth).values;
  const Vector v_hat = normalize_scores(est, r.sign).values;
  r.wasserstein = wasserstein_empirical(v, v_hat);
  r.kendall = kendall_tau_normalized(v, v_hat);
  r.tau_lower = quantile(v, q_lower);
  r.tau_upper = quantile(v, q_upper);
  if (r.tau_lower < r.tau_upper)
    r.classification = classification_error(v, v_hat, {r.tau_lower, r.tau_upper});
  return r;
}

}  // namespace slfa
