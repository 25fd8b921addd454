#include "slfa/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

#include "slfa/error.hpp"
#include "slfa/parallel.hpp"
#include "slfa/summation.hpp"

namespace slfa {

void FitConfig::validate() const {
  if (!(c_prime > 0) || !std::isfinite(c_prime))
    fail(ErrorKind::Config, "c_prime must be positive");
  if (!(tol_rel_obj > 0)) fail(ErrorKind::Config, "tol_rel_obj must be positive");
  if (!(line_search.backtrack > 0 && line_search.backtrack < 1))
    fail(ErrorKind::Config, "line-search backtracking factor must lie in (0, 1)");
  if (!(line_search.initial_step > 0)) fail(ErrorKind::Config, "initial step must be positive");
  if (line_search.max_halvings < 0) fail(ErrorKind::Config, "max_halvings must be >= 0");
  if (!(line_search.armijo > 0 && line_search.armijo < 1))
    fail(ErrorKind::Config, "armijo parameter must lie in (0, 1)");
  if (max_outer_iters < 1) fail(ErrorKind::Config, "max_outer_iters must be >= 1");
  if (inner_steps < 1) fail(ErrorKind::Config, "inner_steps must be >= 1");
  if (intercept_mode && c_prime < 1.0)
    fail(ErrorKind::Config, "intercept mode needs c_prime >= 1 so that theta_1 = 1 is feasible");
}

Vector project_ball(const Vector& x, double radius) {
  const double n = x.norm();
  if (n <= radius) return x;
  return x * (radius / n);
}

Vector project_loading(const Vector& a, FactorSet allowed, double radius) {
  Vector out = a;
  for (Eigen::Index k = 0; k < out.size(); ++k)
    if (!contains(allowed, static_cast<std::size_t>(k))) out(k) = 0.0;
  return project_ball(out, radius);
}

namespace {

// Row-wise piece of the intercept feasible set: theta_1 = 1, ||theta|| <= r.
void project_intercept_rows(FactorScores& theta, double radius) {
  const double rest = std::sqrt(std::max(radius * radius - 1.0, 0.0));
  for (Eigen::Index i = 0; i < theta.rows(); ++i) {
    theta(i, 0) = 1.0;
    auto tail = theta.row(i).tail(theta.cols() - 1);
    const double n = tail.norm();
    if (n > rest) tail *= (n > 0 ? rest / n : 0.0);
  }
}

void center_columns(FactorScores& theta) {
  for (Eigen::Index k = 1; k < theta.cols(); ++k)
    theta.col(k).array() -= theta.col(k).mean();
}

double max_column_sum(const FactorScores& theta) {
  double worst = 0.0;
  for (Eigen::Index k = 1; k < theta.cols(); ++k)
    worst = std::max(worst, std::abs(theta.col(k).sum()));
  return worst;
}

double max_row_excess(const FactorScores& theta, double radius) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < theta.rows(); ++i)
    worst = std::max(worst, theta.row(i).norm() - radius);
  return worst;
}

}  // namespace

FactorScores project_intercept_scores(const FactorScores& theta, double radius) {
  if (theta.cols() == 0) return theta;
  // Dykstra: x <- P_rows(y + p), p <- y + p - x; y <- P_center(x + q), q <- x + q - y.
  FactorScores y = theta;
  FactorScores p = FactorScores::Zero(theta.rows(), theta.cols());
  FactorScores q = FactorScores::Zero(theta.rows(), theta.cols());
  for (int iter = 0; iter < 10000; ++iter) {
    FactorScores x = y + p;
    project_intercept_rows(x, radius);
    p = y + p - x;
    FactorScores next = x + q;
    center_columns(next);
    q = x + q - next;
    const double change = (next - y).cwiseAbs().maxCoeff();
    y = std::move(next);
    if (max_row_excess(y, radius) <= 1e-12 && change <= 1e-14) break;
  }
  y.col(0).setOnes();
  return y;
}

namespace {

// y*m - b(m) and the residual y - b'(m) for one observed cell, sharing the
// exponential between the two.
template <FamilyKind Kind>
inline void cell_terms(double y, double m, double& term, double& resid) {
  if constexpr (Kind == FamilyKind::Gaussian) {
    term = y * m - 0.5 * m * m;
    resid = y - m;
  } else if constexpr (Kind == FamilyKind::Bernoulli) {
    const double e = std::exp(-std::abs(m));
    const double b = (m > 0 ? m : 0.0) + detail::log1p_unit(e);
    const double p = m >= 0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
    term = y * m - b;
    resid = y - p;
  } else {
    const double e = std::exp(m);
    term = y * m - e;
    resid = y - e;
  }
}

template <FamilyKind Kind>
void fill_cells(std::span<const double> y, std::span<const std::uint8_t> w, const Vector& m,
                std::vector<double>& terms, Vector& resid) {
  for (std::size_t j = 0; j < y.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    if (w[j]) {
      cell_terms<Kind>(y[j], m(jj), terms[j], resid(jj));
    } else {
      terms[j] = 0.0;
      resid(jj) = 0.0;
    }
  }
}

// Likelihood restricted to one person row (or one item column): the design
// matrix X is A (or Theta), y and w the matching slice of data and mask.
class SliceProblem {
 public:
  SliceProblem(const Matrix& x, std::span<const double> y, std::span<const std::uint8_t> w,
               FamilyKind kind)
      : x_(x), y_(y), w_(w), kind_(kind), terms_(y.size(), 0.0) {}

  // Returns the slice log-likelihood and fills the masked residual.
  double evaluate(const Vector& param, Vector& m, Vector& resid) {
    m.noalias() = x_ * param;
    resid.resize(m.size());
    switch (kind_) {
      case FamilyKind::Gaussian:
        fill_cells<FamilyKind::Gaussian>(y_, w_, m, terms_, resid);
        break;
      case FamilyKind::Bernoulli:
        fill_cells<FamilyKind::Bernoulli>(y_, w_, m, terms_, resid);
        break;
      case FamilyKind::Poisson:
        fill_cells<FamilyKind::Poisson>(y_, w_, m, terms_, resid);
        break;
    }
    return pairwise_sum(std::span<const double>(terms_));
  }

  Vector gradient(const Vector& resid) const { return x_.transpose() * resid; }

 private:
  const Matrix& x_;
  std::span<const double> y_;
  std::span<const std::uint8_t> w_;
  FamilyKind kind_;
  std::vector<double> terms_;
};

struct SliceOutcome {
  bool stalled = false;
  double start = 0.0;
};

// Projected gradient ascent with Armijo backtracking on one slice.
template <typename Project, typename FreeMask>
SliceOutcome ascend(SliceProblem& problem, Vector& param, double& step_memory,
                    const FitConfig& config, Project&& project, FreeMask&& kill_pinned) {
  const LineSearchConfig& ls = config.line_search;
  Vector m, resid, m_new, resid_new;
  double f = problem.evaluate(param, m, resid);
  SliceOutcome out;
  out.start = f;
  if (!std::isfinite(f)) return out;
  for (int s = 0; s < config.inner_steps; ++s) {
    Vector g = problem.gradient(resid);
    kill_pinned(g);
    if (g.squaredNorm() == 0.0) break;
    double t = ls.initial_step;
    if (ls.remember_steps && step_memory > 0)
      t = std::min(ls.initial_step, step_memory / ls.backtrack);
    bool accepted = false;
    bool stationary = false;
    for (int h = 0; h <= ls.max_halvings; ++h, t *= ls.backtrack) {
      Vector candidate = project(Vector(param + t * g));
      const Vector d = candidate - param;
      if (d.squaredNorm() == 0.0) {
        stationary = true;
        break;
      }
      const double f_new = problem.evaluate(candidate, m_new, resid_new);
      if (std::isfinite(f_new) && f_new > f && f_new >= f + ls.armijo * g.dot(d)) {
        param = std::move(candidate);
        f = f_new;
        std::swap(resid, resid_new);
        std::swap(m, m_new);
        step_memory = t;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      out.stalled = !stationary;
      break;
    }
  }
  return out;
}

void check_inputs(const ResponseData& data, const DesignMatrix& q, const ModelFamily& family) {
  if (static_cast<Eigen::Index>(q.items()) != data.cols())
    fail(ErrorKind::Shape, "response matrix has " + std::to_string(data.cols()) +
                               " columns but the design has " + std::to_string(q.items()) +
                               " items");
  if (q.factors() == 0) fail(ErrorKind::Shape, "design has no factors");
  data.validate(family);
}

FactorScores intercept_theta_block(const ResponseData& data, const Loadings& a,
                                   const FactorScores& theta, const ModelFamily& family,
                                   const FitConfig& config, BlockSteps* steps,
                                   BlockStats* stats) {
  const auto n = static_cast<std::size_t>(data.rows());
  const LineSearchConfig& ls = config.line_search;
  const FamilyKind kind = family.kind();
  FactorScores current = theta;

  auto evaluate = [&](const FactorScores& th, std::vector<double>& row_f, Matrix& grad) {
    grad.resize(th.rows(), th.cols());
    parallel_for(n, config.threads, [&](std::size_t i) {
      const auto ii = static_cast<Eigen::Index>(i);
      SliceProblem problem(a, {data.values_t().col(ii).data(), static_cast<std::size_t>(data.cols())},
                           {data.mask_t().col(ii).data(), static_cast<std::size_t>(data.cols())},
                           kind);
      Vector m, resid;
      row_f[i] = problem.evaluate(th.row(ii).transpose(), m, resid);
      grad.row(ii) = problem.gradient(resid).transpose();
      grad(ii, 0) = 0.0;
    });
    return pairwise_sum(std::span<const double>(row_f));
  };

  std::vector<double> row_f(n), row_f_new(n);
  Matrix grad, grad_new;
  double f = evaluate(current, row_f, grad);
  if (stats) stats->start_loglik = f;
  if (current.cols() <= 1) return current;
  double memory = steps ? steps->theta_global : 0.0;
  for (int s = 0; s < config.inner_steps; ++s) {
    if (grad.squaredNorm() == 0.0) break;
    double t = ls.initial_step;
    if (ls.remember_steps && memory > 0) t = std::min(ls.initial_step, memory / ls.backtrack);
    bool accepted = false;
    bool stationary = false;
    for (int h = 0; h <= ls.max_halvings; ++h, t *= ls.backtrack) {
      FactorScores candidate = project_intercept_scores(current + t * grad, config.c_prime);
      const Matrix d = candidate - current;
      if (d.squaredNorm() == 0.0) {
        stationary = true;
        break;
      }
      const double f_new = evaluate(candidate, row_f_new, grad_new);
      if (std::isfinite(f_new) && f_new > f && f_new >= f + ls.armijo * (grad.cwiseProduct(d)).sum()) {
        current = std::move(candidate);
        f = f_new;
        std::swap(grad, grad_new);
        memory = t;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (!stationary && stats) ++stats->stalled;
      break;
    }
  }
  if (steps) steps->theta_global = memory;
  return current;
}

}  // namespace

FactorScores update_theta_block(const ResponseData& data, const Loadings& a_fixed,
                                const FactorScores& theta, const ModelFamily& family,
                                const FitConfig& config, BlockSteps* steps, BlockStats* stats) {
  if (theta.rows() != data.rows() || a_fixed.rows() != data.cols() ||
      theta.cols() != a_fixed.cols())
    fail(ErrorKind::Shape, "update_theta_block: shape mismatch");
  if (config.intercept_mode)
    return intercept_theta_block(data, a_fixed, theta, family, config, steps, stats);

  const auto n = static_cast<std::size_t>(data.rows());
  const auto J = static_cast<std::size_t>(data.cols());
  const double radius = config.c_prime;
  std::vector<double> local_memory;
  std::vector<double>& memory = steps ? steps->theta : local_memory;
  memory.resize(n, 0.0);
  std::vector<std::uint8_t> stalled(n, 0);
  std::vector<double> start(n, 0.0);
  FactorScores out = theta;
  parallel_for(n, config.threads, [&](std::size_t i) {
    const auto ii = static_cast<Eigen::Index>(i);
    SliceProblem problem(a_fixed, {data.values_t().col(ii).data(), J},
                         {data.mask_t().col(ii).data(), J}, family.kind());
    Vector param = out.row(ii).transpose();
    const SliceOutcome r = ascend(
        problem, param, memory[i], config,
        [radius](const Vector& v) { return project_ball(v, radius); }, [](Vector&) {});
    out.row(ii) = param.transpose();
    stalled[i] = r.stalled ? 1 : 0;
    start[i] = r.start;
  });
  if (stats) {
    for (auto s : stalled) stats->stalled += s;
    stats->start_loglik = pairwise_sum(std::span<const double>(start));
  }
  return out;
}

Loadings update_a_block(const ResponseData& data, const FactorScores& theta_fixed,
                        const Loadings& a, const DesignMatrix& q, const ModelFamily& family,
                        const FitConfig& config, BlockSteps* steps, BlockStats* stats) {
  if (theta_fixed.rows() != data.rows() || a.rows() != data.cols() ||
      theta_fixed.cols() != a.cols() || static_cast<Eigen::Index>(q.items()) != a.rows() ||
      static_cast<Eigen::Index>(q.factors()) != a.cols())
    fail(ErrorKind::Shape, "update_a_block: shape mismatch");
  const auto n = static_cast<std::size_t>(data.rows());
  const auto J = static_cast<std::size_t>(data.cols());
  const double radius = config.c_prime;
  std::vector<double> local_memory;
  std::vector<double>& memory = steps ? steps->loadings : local_memory;
  memory.resize(J, 0.0);
  std::vector<std::uint8_t> stalled(J, 0);
  Loadings out = a;
  parallel_for(J, config.threads, [&](std::size_t j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const FactorSet allowed = q.row_set(j);
    Vector param = project_loading(out.row(jj).transpose(), allowed, radius);
    if (allowed != 0) {
      SliceProblem problem(theta_fixed, {data.values().col(jj).data(), n},
                           {data.mask().col(jj).data(), n}, family.kind());
      const SliceOutcome r = ascend(
          problem, param, memory[j], config,
          [allowed, radius](const Vector& v) { return project_loading(v, allowed, radius); },
          [allowed](Vector& g) {
            for (Eigen::Index k = 0; k < g.size(); ++k)
              if (!contains(allowed, static_cast<std::size_t>(k))) g(k) = 0.0;
          });
      stalled[j] = r.stalled ? 1 : 0;
    }
    out.row(jj) = param.transpose();
  });
  if (stats)
    for (auto s : stalled) stats->stalled += s;
  return out;
}

namespace {

void initialize(const ResponseData& data, const DesignMatrix& q, const FitConfig& config,
                FactorScores& theta, Loadings& a) {
  const auto N = data.rows();
  const auto J = data.cols();
  const auto K = static_cast<Eigen::Index>(q.factors());
  Rng rng(config.seed);
  std::uniform_real_distribution<double> unif(-0.5, 0.5);
  if (config.theta_init) {
    theta = *config.theta_init;
    if (theta.rows() != N || theta.cols() != K)
      fail(ErrorKind::Shape, "theta_init has the wrong shape");
  } else {
    theta.resize(N, K);
    for (Eigen::Index i = 0; i < N; ++i)
      for (Eigen::Index k = 0; k < K; ++k) theta(i, k) = unif(rng);
  }
  if (config.a_init) {
    a = *config.a_init;
    if (a.rows() != J || a.cols() != K) fail(ErrorKind::Shape, "a_init has the wrong shape");
  } else {
    a.resize(J, K);
    for (Eigen::Index j = 0; j < J; ++j)
      for (Eigen::Index k = 0; k < K; ++k) a(j, k) = unif(rng);
  }
  for (Eigen::Index j = 0; j < J; ++j)
    a.row(j) = project_loading(a.row(j).transpose(), q.row_set(static_cast<std::size_t>(j)),
                               config.c_prime)
                   .transpose();
  if (config.intercept_mode) {
    theta = project_intercept_scores(theta, config.c_prime);
  } else {
    for (Eigen::Index i = 0; i < N; ++i)
      theta.row(i) = project_ball(theta.row(i).transpose(), config.c_prime).transpose();
  }
}

FitResult run_alternating(const ResponseData& data, const DesignMatrix& q,
                          const ModelFamily& family, const FitConfig& config) {
  config.validate();
  check_inputs(data, q, family);
  FitResult result;
  initialize(data, q, config, result.theta_hat, result.a_hat);

  BlockSteps steps;
  BlockStats stats;
  // The theta block evaluates every row at its starting point, which is the
  // objective after the previous iteration; the last theta pass only serves
  // to close the trace and is discarded.
  double prev = 0.0;
  for (int it = 0;; ++it) {
    const std::size_t stalled_before = stats.stalled;
    FactorScores next =
        update_theta_block(data, result.a_hat, result.theta_hat, family, config, &steps, &stats);
    const double f = -stats.start_loglik;
    if (!std::isfinite(f))
      fail(ErrorKind::Diverged,
           "objective became non-finite at outer iteration " + std::to_string(it));
    result.objective_trace.push_back(f);
    if (it > 0) {
      result.iters_used = it;
      const double rel = (prev - f) / std::max(std::abs(prev), 1.0);
      if (rel < config.tol_rel_obj) {
        result.converged = true;
        stats.stalled = stalled_before;
        break;
      }
    }
    if (it == config.max_outer_iters) {
      stats.stalled = stalled_before;
      break;
    }
    prev = f;
    result.theta_hat = std::move(next);
    if (config.intercept_mode)
      result.centering_drift = std::max(result.centering_drift, max_column_sum(result.theta_hat));
    result.a_hat =
        update_a_block(data, result.theta_hat, result.a_hat, q, family, config, &steps, &stats);
  }
  result.stalled_updates = stats.stalled;
  return result;
}

}  // namespace

FitResult fit(const ResponseData& data, const DesignMatrix& q, const ModelFamily& family,
              const FitConfig& config) {
  if (config.intercept_mode) return fit_with_intercept(data, q, family, config);
  return run_alternating(data, q, family, config);
}

FitResult fit_with_intercept(const ResponseData& data, const DesignMatrix& q,
                             const ModelFamily& family, const FitConfig& config) {
  for (std::size_t j = 0; j < q.items(); ++j)
    if (q.factors() == 0 || !q(j, 0))
      fail(ErrorKind::Design, "intercept mode requires q_j1 = 1 for every item; row " +
                                  std::to_string(j + 1) + " has q_j1 = 0");
  FitConfig c = config;
  c.intercept_mode = true;
  return run_alternating(data, q, family, c);
}

}  // namespace slfa
