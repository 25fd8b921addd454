#include "slfa/model.hpp"

#include <sstream>
#include <vector>

#include "slfa/design.hpp"
#include "slfa/error.hpp"
#include "slfa/parallel.hpp"
#include "slfa/summation.hpp"

namespace slfa {

std::string_view to_string(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::Gaussian:
      return "gaussian";
    case FamilyKind::Bernoulli:
      return "bernoulli";
    case FamilyKind::Poisson:
      return "poisson";
  }
  return "unknown";
}

FamilyKind parse_family(std::string_view name) {
  if (name == "gaussian" || name == "linear") return FamilyKind::Gaussian;
  if (name == "bernoulli" || name == "mirt" || name == "logit")
    return FamilyKind::Bernoulli;
  if (name == "poisson") return FamilyKind::Poisson;
  fail(ErrorKind::InvalidArgument,
       "unknown family '" + std::string(name) +
           "' (expected gaussian, bernoulli or poisson)");
}

ModelFamily ModelFamily::gaussian(double variance) {
  if (!(variance > 0) || !std::isfinite(variance))
    fail(ErrorKind::InvalidArgument, "gaussian dispersion must be positive");
  return ModelFamily(FamilyKind::Gaussian, variance);
}

ModelFamily ModelFamily::bernoulli() { return ModelFamily(FamilyKind::Bernoulli, 1.0); }

ModelFamily ModelFamily::poisson() { return ModelFamily(FamilyKind::Poisson, 1.0); }

ModelFamily ModelFamily::make(FamilyKind kind, double dispersion) {
  switch (kind) {
    case FamilyKind::Gaussian:
      return gaussian(dispersion);
    case FamilyKind::Bernoulli:
    case FamilyKind::Poisson:
      if (dispersion != 1.0)
        fail(ErrorKind::InvalidArgument,
             std::string(to_string(kind)) + " dispersion is fixed at 1");
      return kind == FamilyKind::Bernoulli ? bernoulli() : poisson();
  }
  fail(ErrorKind::InvalidArgument, "unknown family kind");
}

namespace {

void require_finite(double m) {
  if (!std::isfinite(m)) fail(ErrorKind::Domain, "natural parameter is not finite");
}

}  // namespace

double cumulant(const ModelFamily& family, double m) {
  require_finite(m);
  return detail::cumulant_unchecked(family.kind(), m);
}

double mean(const ModelFamily& family, double m) {
  require_finite(m);
  return detail::mean_unchecked(family.kind(), m);
}

double variance_function(const ModelFamily& family, double m) {
  require_finite(m);
  switch (family.kind()) {
    case FamilyKind::Gaussian:
      return 1.0;
    case FamilyKind::Bernoulli: {
      const double p = detail::mean_unchecked(FamilyKind::Bernoulli, m);
      return p * (1.0 - p);
    }
    case FamilyKind::Poisson:
      return std::exp(m);
  }
  return 0;
}

ResponseData::ResponseData(Matrix values)
    : ResponseData(std::move(values), Mask()) {}

ResponseData::ResponseData(Matrix values, Mask mask)
    : values_(std::move(values)), mask_(std::move(mask)) {
  if (mask_.size() == 0) mask_ = Mask::Ones(values_.rows(), values_.cols());
  if (mask_.rows() != values_.rows() || mask_.cols() != values_.cols())
    fail(ErrorKind::Shape, "mask shape does not match the response matrix");
  for (Eigen::Index j = 0; j < values_.cols(); ++j)
    for (Eigen::Index i = 0; i < values_.rows(); ++i) {
      if (mask_(i, j) > 1) fail(ErrorKind::InvalidArgument, "mask entries must be 0 or 1");
      if (mask_(i, j) == 0) values_(i, j) = 0.0;
    }
  values_t_ = values_.transpose();
  mask_t_ = mask_.transpose();
}

ResponseData ResponseData::from_nan_missing(const Matrix& values) {
  Mask mask(values.rows(), values.cols());
  for (Eigen::Index j = 0; j < values.cols(); ++j)
    for (Eigen::Index i = 0; i < values.rows(); ++i)
      mask(i, j) = std::isnan(values(i, j)) ? 0 : 1;
  return ResponseData(values, std::move(mask));
}

std::size_t ResponseData::observed_count() const {
  std::size_t n = 0;
  for (Eigen::Index j = 0; j < mask_.cols(); ++j)
    for (Eigen::Index i = 0; i < mask_.rows(); ++i) n += mask_(i, j);
  return n;
}

double ResponseData::observed_fraction() const {
  const double total = static_cast<double>(values_.size());
  return total == 0 ? 0.0 : static_cast<double>(observed_count()) / total;
}

void ResponseData::validate(const ModelFamily& family) const {
  for (Eigen::Index j = 0; j < values_.cols(); ++j) {
    for (Eigen::Index i = 0; i < values_.rows(); ++i) {
      if (!mask_(i, j)) continue;
      const double y = values_(i, j);
      bool ok = std::isfinite(y);
      if (ok && family.kind() == FamilyKind::Bernoulli) ok = (y == 0.0 || y == 1.0);
      if (ok && family.kind() == FamilyKind::Poisson) ok = (y >= 0 && y == std::floor(y));
      if (!ok) {
        std::ostringstream value;
        value << y;
        fail(ErrorKind::Domain, "value " + value.str() + " at row " +
                                    std::to_string(i + 1) + ", column " +
                                    std::to_string(j + 1) + " is outside the " +
                                    std::string(to_string(family.kind())) + " support");
      }
    }
  }
}

namespace {

void check_shapes(const ResponseData& data, const FactorScores& theta,
                  const Loadings& loadings) {
  if (theta.rows() != data.rows() || loadings.rows() != data.cols() ||
      theta.cols() != loadings.cols())
    fail(ErrorKind::Shape, "shape mismatch: data " + std::to_string(data.rows()) + "x" +
                               std::to_string(data.cols()) + ", theta " +
                               std::to_string(theta.rows()) + "x" +
                               std::to_string(theta.cols()) + ", loadings " +
                               std::to_string(loadings.rows()) + "x" +
                               std::to_string(loadings.cols()));
}

}  // namespace

double log_likelihood(const ResponseData& data, const FactorScores& theta,
                      const Loadings& loadings, const ModelFamily& family,
                      int threads) {
  check_shapes(data, theta, loadings);
  const auto n = static_cast<std::size_t>(data.rows());
  const auto J = data.cols();
  const FamilyKind kind = family.kind();
  std::vector<double> row_totals(n, 0.0);
  parallel_for(n, threads, [&](std::size_t i) {
    const Vector m = loadings * theta.row(static_cast<Eigen::Index>(i)).transpose();
    std::vector<double> terms(static_cast<std::size_t>(J), 0.0);
    const auto y = data.values_t().col(static_cast<Eigen::Index>(i));
    const auto w = data.mask_t().col(static_cast<Eigen::Index>(i));
    for (Eigen::Index j = 0; j < J; ++j)
      if (w(j)) terms[j] = y(j) * m(j) - detail::cumulant_unchecked(kind, m(j));
    row_totals[i] = pairwise_sum(std::span<const double>(terms));
  });
  return pairwise_sum(std::span<const double>(row_totals));
}

Gradients gradients(const ResponseData& data, const FactorScores& theta,
                    const Loadings& loadings, const ModelFamily& family,
                    const GradientOptions& options) {
  check_shapes(data, theta, loadings);
  const FamilyKind kind = family.kind();
  const Matrix m = theta * loadings.transpose();
  Matrix residual(data.rows(), data.cols());
  for (Eigen::Index j = 0; j < data.cols(); ++j)
    for (Eigen::Index i = 0; i < data.rows(); ++i)
      residual(i, j) = data.observed(i, j)
                           ? data.values()(i, j) - detail::mean_unchecked(kind, m(i, j))
                           : 0.0;
  Gradients g{residual * loadings, residual.transpose() * theta};
  if (options.intercept && g.theta.cols() > 0) g.theta.col(0).setZero();
  if (options.design != nullptr) {
    const DesignMatrix& q = *options.design;
    if (static_cast<Eigen::Index>(q.items()) != loadings.rows() ||
        static_cast<Eigen::Index>(q.factors()) != loadings.cols())
      fail(ErrorKind::Shape, "design shape does not match loadings");
    for (Eigen::Index j = 0; j < g.loadings.rows(); ++j)
      for (Eigen::Index k = 0; k < g.loadings.cols(); ++k)
        if (!q(static_cast<std::size_t>(j), static_cast<std::size_t>(k))) g.loadings(j, k) = 0.0;
  }
  return g;
}

double sample(const ModelFamily& family, double m, Rng& rng) {
  require_finite(m);
  switch (family.kind()) {
    case FamilyKind::Gaussian: {
      std::normal_distribution<double> dist(m, std::sqrt(family.dispersion()));
      return dist(rng);
    }
    case FamilyKind::Bernoulli: {
      std::bernoulli_distribution dist(detail::mean_unchecked(FamilyKind::Bernoulli, m));
      return dist(rng) ? 1.0 : 0.0;
    }
    case FamilyKind::Poisson: {
      const double rate = std::exp(m);
      // Beyond ~2^53 the integer draw is no longer representable.
      if (!std::isfinite(rate) || rate > 9.0e15)
        fail(ErrorKind::Domain, "poisson rate exp(m) overflows");
      std::poisson_distribution<long long> dist(rate);
      return static_cast<double>(dist(rng));
    }
  }
  return 0;
}

Matrix sample_responses(const ModelFamily& family, const FactorScores& theta,
                        const Loadings& loadings, Rng& rng) {
  const Matrix m = theta * loadings.transpose();
  Matrix y(m.rows(), m.cols());
  // Row-major draw order so the stream does not depend on storage layout.
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) y(i, j) = sample(family, m(i, j), rng);
  return y;
}

}  // namespace slfa
