#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace slfa {

class DesignMatrix;

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
// N x K person parameters and J x K manifest-variable parameters.
using FactorScores = Matrix;
using Loadings = Matrix;
using Rng = std::mt19937_64;

enum class FamilyKind { Gaussian, Bernoulli, Poisson };

std::string_view to_string(FamilyKind kind);
FamilyKind parse_family(std::string_view name);

// Natural exponential family with a known dispersion. Bernoulli and Poisson
// always carry dispersion 1.
class ModelFamily {
 public:
  static ModelFamily gaussian(double variance = 1.0);
  static ModelFamily bernoulli();
  static ModelFamily poisson();
  static ModelFamily make(FamilyKind kind, double dispersion = 1.0);

  FamilyKind kind() const { return kind_; }
  double dispersion() const { return dispersion_; }

 private:
  ModelFamily(FamilyKind kind, double dispersion)
      : kind_(kind), dispersion_(dispersion) {}
  FamilyKind kind_;
  double dispersion_;
};

// b(m), b'(m), b''(m). Throw ErrorKind::Domain on non-finite m.
double cumulant(const ModelFamily& family, double m);
double mean(const ModelFamily& family, double m);
double variance_function(const ModelFamily& family, double m);

// Unchecked versions for inner loops.
namespace detail {
// log(1 + x) for x in [0, 1]; within a few ulp of log1p and much cheaper.
inline double log1p_unit(double x) {
  const double u = 1.0 + x;
  if (u == 1.0) return x;
  return std::log(u) * (x / (u - 1.0));
}
inline double cumulant_unchecked(FamilyKind kind, double m) {
  switch (kind) {
    case FamilyKind::Gaussian:
      return 0.5 * m * m;
    case FamilyKind::Bernoulli:
      return (m > 0 ? m : 0.0) + log1p_unit(std::exp(-std::abs(m)));
    case FamilyKind::Poisson:
      return std::exp(m);
  }
  return 0;
}
inline double mean_unchecked(FamilyKind kind, double m) {
  switch (kind) {
    case FamilyKind::Gaussian:
      return m;
    case FamilyKind::Bernoulli:
      if (m >= 0) return 1.0 / (1.0 + std::exp(-m));
      {
        const double e = std::exp(m);
        return e / (1.0 + e);
      }
    case FamilyKind::Poisson:
      return std::exp(m);
  }
  return 0;
}
}  // namespace detail

// Observation matrix with its observation mask. Unobserved cells are stored
// as 0 and never read through the public accessors' consumers.
class ResponseData {
 public:
  using Mask = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

  ResponseData() = default;
  // Fully observed.
  explicit ResponseData(Matrix values);
  ResponseData(Matrix values, Mask mask);
  // NaN cells become unobserved.
  static ResponseData from_nan_missing(const Matrix& values);

  Eigen::Index rows() const { return values_.rows(); }
  Eigen::Index cols() const { return values_.cols(); }
  const Matrix& values() const { return values_; }
  const Mask& mask() const { return mask_; }
  // J x N copies so that person rows are contiguous.
  const Matrix& values_t() const { return values_t_; }
  const Mask& mask_t() const { return mask_t_; }
  bool observed(Eigen::Index i, Eigen::Index j) const { return mask_(i, j) != 0; }
  std::size_t observed_count() const;
  double observed_fraction() const;

  // Throws ErrorKind::Domain if an observed value is outside the family's
  // support.
  void validate(const ModelFamily& family) const;

 private:
  Matrix values_;
  Mask mask_;
  Matrix values_t_;
  Mask mask_t_;
};

// Sum over observed cells of y*m - b(m), with m = theta * loadings^T. Rows are
// reduced with a pairwise sum, then row totals with another pairwise sum.
double log_likelihood(const ResponseData& data, const FactorScores& theta,
                      const Loadings& loadings, const ModelFamily& family,
                      int threads = 1);

struct GradientOptions {
  // If set, loading gradients are zeroed where q_jk = 0.
  const DesignMatrix* design = nullptr;
  // Pins the first person coordinate (its gradient is zeroed).
  bool intercept = false;
};

struct Gradients {
  Matrix theta;     // N x K
  Matrix loadings;  // J x K
};

Gradients gradients(const ResponseData& data, const FactorScores& theta,
                    const Loadings& loadings, const ModelFamily& family,
                    const GradientOptions& options = {});

// One draw from the family at natural parameter m.
double sample(const ModelFamily& family, double m, Rng& rng);

// Draws a full response matrix for natural parameters theta * loadings^T.
Matrix sample_responses(const ModelFamily& family, const FactorScores& theta,
                        const Loadings& loadings, Rng& rng);

}  // namespace slfa
