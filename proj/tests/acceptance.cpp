// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "slfa/design.hpp"
#include "slfa/estimator.hpp"
#include "slfa/io.hpp"
#include "slfa/linalg.hpp"
#include "slfa/metrics.hpp"
#include "slfa/model.hpp"
#include "slfa/simulation.hpp"

using namespace slfa;

namespace {

// Pinned tolerances and time limits.
constexpr double kTraceSlack = 1e-10;
constexpr double kHalfChordTol = 1e-12;
constexpr double kBoundSlack = 1e-9;
constexpr double kGradientRelTol = 1e-6;
constexpr double kNoiselessLoss = 1e-3;
constexpr double kNoiselessSine = 1e-2;
constexpr double kUnidentifiedFloor = 0.3;
constexpr double kIdentifiedCeiling = 0.2;
constexpr double kWassersteinTol = 1e-9;

const std::string kSource = SLFA_SOURCE_DIR;

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

std::string join(const std::vector<double>& xs) {
  std::string out;
  for (double x : xs) out += (out.empty() ? "" : " > ") + fmt(x);
  return out;
}

bool strictly_decreasing(const std::vector<double>& xs) {
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (!(xs[i] < xs[i - 1])) return false;
  return !xs.empty();
}

Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = u(rng);
  return m;
}

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

double worst_rise(const std::vector<double>& trace) {
  double worst = 0;
  for (std::size_t t = 1; t < trace.size(); ++t) worst = std::max(worst, trace[t] - trace[t - 1]);
  return worst;
}

// Running record for criterion 5: every fit made by this binary reports here.
struct TraceAudit {
  std::size_t fits = 0;
  double worst = 0;
  void add(double rise) {
    ++fits;
    worst = std::max(worst, rise);
  }
} g_trace;

FitResult audited_fit(const ResponseData& d, const DesignMatrix& q, const ModelFamily& fam,
                      const FitConfig& c) {
  FitResult r = fit(d, q, fam, c);
  g_trace.add(worst_rise(r.objective_trace));
  return r;
}

std::vector<ReplicationRecord> audited_study(const StudyConfig& c, int threads) {
  auto records = run_study(c, threads);
  for (const auto& r : records)
    if (r.ok) g_trace.add(r.trace_rise);
  return records;
}

// ---- oracles ---------------------------------------------------------------

// Factor k is identifiable when the sets of all items touching k intersect in
// exactly {k}.
bool identifiable_oracle(const DesignMatrix& q, std::size_t k) {
  std::uint64_t cap = ~std::uint64_t{0};
  bool any = false;
  for (std::size_t j = 0; j < q.items(); ++j) {
    if (!q(j, k)) continue;
    std::uint64_t row = 0;
    for (std::size_t f = 0; f < q.factors(); ++f)
      if (q(j, f)) row |= std::uint64_t{1} << f;
    cap &= row;
    any = true;
  }
  return any && cap == (std::uint64_t{1} << k);
}

bool has_singleton(const DesignMatrix& q, std::size_t k) {
  for (std::size_t j = 0; j < q.items(); ++j) {
    bool only = q(j, k);
    for (std::size_t f = 0; f < q.factors() && only; ++f)
      if (f != k && q(j, f)) only = false;
    if (only) return true;
  }
  return false;
}

Matrix orth(const Matrix& a) {
  if (a.cols() == 0) return Matrix(a.rows(), 0);
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  Eigen::Index r = 0;
  while (r < s.size() && s(r) > 1e-12 * std::max(1.0, s(0))) ++r;
  return svd.matrixU().leftCols(r);
}

Vector svals(const Matrix& a) {
  if (a.size() == 0) return Vector(0);
  return Eigen::JacobiSVD<Matrix>(a).singularValues();
}

// Principal angles from paired cosines and sines, ascending.
std::vector<double> angles_oracle(const Matrix& bl, const Matrix& bm) {
  const Matrix& small = bl.cols() <= bm.cols() ? bl : bm;
  const Matrix& big = bl.cols() <= bm.cols() ? bm : bl;
  const Eigen::Index d = small.cols();
  if (d == 0) return {};
  Vector c = svals(big.transpose() * small);
  const Matrix resid = small - big * (big.transpose() * small);
  Vector s = svals(resid);
  std::vector<double> cs(c.data(), c.data() + c.size()), ss(s.data(), s.data() + s.size());
  cs.resize(d, 0.0);
  ss.resize(d, 0.0);
  std::sort(cs.rbegin(), cs.rend());
  std::sort(ss.begin(), ss.end());
  std::vector<double> out(d);
  for (Eigen::Index i = 0; i < d; ++i)
    out[i] = std::atan2(std::clamp(ss[i], 0.0, 1.0), std::clamp(cs[i], 0.0, 1.0));
  std::sort(out.begin(), out.end());
  return out;
}

double theta_min_plus_oracle(const Matrix& bl, const Matrix& bm) {
  for (double a : angles_oracle(bl, bm))
    if (a > 1e-8) return a;
  return 0.0;
}

Matrix projector(const Matrix& b) { return b * b.transpose(); }

double spectral_sym(const Matrix& s) {
  if (s.size() == 0) return 0.0;
  return Eigen::SelfAdjointEigenSolver<Matrix>(s).eigenvalues().cwiseAbs().maxCoeff();
}

// Orthonormal basis of the common null space of (I - P_L) and (I - P_M).
Matrix intersection_oracle(const Matrix& bl, const Matrix& bm) {
  const Eigen::Index n = bl.rows();
  const Matrix id = Matrix::Identity(n, n);
  Matrix stacked(2 * n, n);
  stacked << id - projector(bl), id - projector(bm);
  Eigen::JacobiSVD<Matrix> svd(stacked, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < n; ++i)
    if (s(i) < 1e-8) keep.push_back(i);
  Matrix out(n, static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) out.col(c) = svd.matrixV().col(keep[c]);
  return out;
}

double alpha_oracle(double theta) {
  const double c = std::cos(theta);
  return 2.0 * (1.0 + c) / std::pow(1.0 - c, 3);
}

double cumulant_oracle(FamilyKind kind, double m) {
  switch (kind) {
    case FamilyKind::Gaussian:
      return m * m / 2;
    case FamilyKind::Bernoulli:
      return m > 0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m));
    case FamilyKind::Poisson:
      return std::exp(m);
  }
  return 0;
}

long double loglik_oracle(const Matrix& y, const ResponseData::Mask& mask, const Matrix& theta,
                          const Matrix& a, const ModelFamily& fam) {
  long double total = 0;
  for (Eigen::Index i = 0; i < y.rows(); ++i)
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
      if (!mask(i, j)) continue;
      const double m = theta.row(i).dot(a.row(j));
      total += y(i, j) * m - cumulant_oracle(fam.kind(), m);  // no 1/dispersion factor
    }
  return total;
}

double matching_oracle(const Vector& v, const Vector& w) {
  std::vector<int> perm(static_cast<std::size_t>(v.size()));
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    double cost = 0;
    for (Eigen::Index i = 0; i < v.size(); ++i) cost += std::abs(v(i) - w(perm[i]));
    best = std::min(best, cost / static_cast<double>(v.size()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

std::uint64_t discordant_oracle(const Vector& v, const Vector& w) {
  std::uint64_t count = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    for (Eigen::Index j = i + 1; j < v.size(); ++j)
      if ((v(i) - v(j)) * (w(i) - w(j)) < 0) ++count;
  return count;
}

// ---- criteria --------------------------------------------------------------

Outcome identifiability_verdicts() {
  Outcome o;
  const auto table1 = identifiability_report(read_design_csv(kSource + "/data/table1_q.csv"), false);
  if (table1.verdicts.size() != 3 || !table1.all_identifiable()) {
    o.pass = false;
    o.detail += "table-1 design not fully identifiable; ";
  }
  const auto two = identifiability_report(gen_design(DesignKind::StudyII, 200, 2).q, false);
  if (!two.verdicts[0].identifiable || two.verdicts[1].identifiable) {
    o.pass = false;
    o.detail += "study-II verdicts wrong; ";
  }
  Rng rng(20240601);
  int mismatches = 0, implication = 0;
  for (int t = 0; t < 500; ++t) {
    const std::size_t k_max = static_cast<std::size_t>(uniform_int(rng, 1, 6));
    const std::size_t items = static_cast<std::size_t>(uniform_int(rng, 3, 60));
    const double density = std::uniform_real_distribution<double>(0.15, 0.7)(rng);
    DesignMatrix q(items, k_max);
    std::bernoulli_distribution on(density);
    for (std::size_t j = 0; j < items; ++j)
      for (std::size_t k = 0; k < k_max; ++k) q.set(j, k, on(rng));
    const auto partition = type_partition(q);
    for (std::size_t k = 0; k < k_max; ++k) {
      const bool got = check_identifiability(partition, k, false).identifiable;
      if (got != identifiable_oracle(q, k)) ++mismatches;
      if (partition.proportion(singleton(k)) > 0 && !got) ++implication;
      if (has_singleton(q, k) != (partition.proportion(singleton(k)) > 0)) ++mismatches;
    }
  }
  if (mismatches || implication) {
    o.pass = false;
    o.detail += std::to_string(mismatches) + " oracle mismatches, " + std::to_string(implication) +
                " singleton implications broken; ";
  }
  o.detail += "500 random designs";
  return o;
}

Outcome lemma2_identity() {
  Rng rng(20240602);
  double worst = 0, largest_cos = 0;
  int over = 0;
  for (int t = 0; t < 10000; ++t) {
    const Eigen::Index n = uniform_int(rng, 2, 100);
    const Vector w = normal_matrix(n, 1, rng).col(0);
    Vector w2 = normal_matrix(n, 1, rng).col(0);
    if (t % 4 == 0) w2 = (t % 8 == 0 ? -1.0 : 1.0) * w + 1e-3 * w2;  // near (anti)parallel
    const double c = w.dot(w2) >= 0 ? 1.0 : -1.0;
    const double lhs = (w / w.norm() - c * w2 / w2.norm()).squaredNorm();
    const double s = sin_angle_vec(w, w2);
    const double rhs = 2.0 - 2.0 * std::sqrt(1.0 - s * s);
    const double gap = std::abs(lhs - rhs);
    worst = std::max(worst, gap);
    if (gap > kHalfChordTol) {
      ++over;
      largest_cos = std::max(largest_cos, std::abs(w.dot(w2)) / (w.norm() * w2.norm()));
    }
  }
  std::string detail = "worst |lhs - rhs| " + fmt(worst) + " over 10000 pairs";
  if (over)
    detail += "; " + std::to_string(over) + " pairs over tolerance, all with |cos| <= " +
              fmt(largest_cos);
  return {worst <= kHalfChordTol, detail};
}

Outcome perturbation_bounds() {
  Outcome o;
  Rng rng(20240603);
  int checked = 0, violations = 0, disagreements = 0, attempts = 0;
  while (checked < 1000 && attempts < 50000) {
    ++attempts;
    const Eigen::Index n = uniform_int(rng, 6, 12);
    const Eigen::Index shared = uniform_int(rng, 0, 2);
    const Eigen::Index extra_l = uniform_int(rng, 1, 3), extra_m = uniform_int(rng, 1, 3);
    const double eps = std::pow(10.0, std::uniform_real_distribution<double>(-4, -1)(rng));
    const Matrix c = normal_matrix(n, shared, rng);
    const Matrix c2 = c + eps * normal_matrix(n, shared, rng);
    const Matrix xl = normal_matrix(n, extra_l, rng), xm = normal_matrix(n, extra_m, rng);
    Matrix gl(n, shared + extra_l), gm(n, shared + extra_m);
    Matrix gl2(n, shared + extra_l), gm2(n, shared + extra_m);
    gl << c, xl;
    gm << c, xm;
    gl2 << c2, xl + eps * normal_matrix(n, extra_l, rng);
    gm2 << c2, xm + eps * normal_matrix(n, extra_m, rng);
    const Matrix bl = orth(gl), bm = orth(gm), bl2 = orth(gl2), bm2 = orth(gm2);
    const double t1 = theta_min_plus_oracle(bl, bm), t2 = theta_min_plus_oracle(bl2, bm2);
    if (t1 < 0.05 || t2 < 0.05) continue;
    ++checked;
    const double lhs = spectral_sym(projector(intersection_oracle(bl2, bm2)) -
                                    projector(intersection_oracle(bl, bm)));
    const double pert = spectral_sym(projector(bl) - projector(bl2)) +
                        spectral_sym(projector(bm) - projector(bm2));
    const double rhs = 8.0 * std::max(alpha_oracle(t1), alpha_oracle(t2)) * pert;
    if (lhs > rhs + kBoundSlack) ++violations;
    const auto lib = verify_perturbation_bound(SubspaceBasis::span(gl), SubspaceBasis::span(gm),
                                               SubspaceBasis::span(gl2), SubspaceBasis::span(gm2));
    if (!lib.holds || std::abs(lib.lhs - lhs) > 1e-8 ||
        std::abs(lib.rhs - rhs) > 1e-8 * std::max(1.0, rhs))
      ++disagreements;
  }
  if (checked < 1000 || violations || disagreements) o.pass = false;
  o.detail = "intersection bound: " + std::to_string(checked) + " quadruples, " +
             std::to_string(violations) + " violations, " + std::to_string(disagreements) +
             " library disagreements";

  int tri_violations = 0, tri_disagreements = 0;
  for (int t = 0; t < 1000; ++t) {
    const Eigen::Index k = uniform_int(rng, 2, 6);
    const Eigen::Index n = uniform_int(rng, 2, 30);
    Matrix w = normal_matrix(n, k, rng);
    if (t % 5 == 0) w.col(k - 1) = w.col(0) - 0.5 * w.col(1);  // rank deficient
    std::vector<std::size_t> s1, s2;
    do {
      s1.clear();
      s2.clear();
      for (Eigen::Index f = 0; f < k; ++f) {
        const int r = uniform_int(rng, 0, 3);
        if (r == 1 || r == 3) s1.push_back(f);
        if (r == 2 || r == 3) s2.push_back(f);
      }
    } while (std::none_of(s1.begin(), s1.end(), [&](auto f) { return std::count(s2.begin(), s2.end(), f) == 0; }) ||
             std::none_of(s2.begin(), s2.end(), [&](auto f) { return std::count(s1.begin(), s1.end(), f) == 0; }));
    auto cols = [&](const std::vector<std::size_t>& s) {
      Matrix out(n, static_cast<Eigen::Index>(s.size()));
      for (std::size_t i = 0; i < s.size(); ++i) out.col(i) = w.col(s[i]);
      return out;
    };
    std::vector<std::size_t> both(s1);
    for (auto f : s2)
      if (std::count(both.begin(), both.end(), f) == 0) both.push_back(f);
    const double lhs = std::cos(theta_min_plus_oracle(orth(cols(s1)), orth(cols(s2))));
    const Vector su = svals(cols(both));
    const double sigma = n >= static_cast<Eigen::Index>(both.size()) ? su(su.size() - 1) : 0.0;
    const double top = svals(w)(0);
    const double rhs = 1.0 - sigma * sigma / (top * top);
    if (lhs > rhs + kBoundSlack) ++tri_violations;
    const auto lib = angle_lower_bound_check(w, s1, s2);
    if (!lib.holds || std::abs(lib.lhs - lhs) > 1e-8 || std::abs(lib.rhs - rhs) > 1e-10)
      ++tri_disagreements;
  }
  if (tri_violations || tri_disagreements) o.pass = false;
  o.detail += "; angle bound: 1000 triples, " + std::to_string(tri_violations) + " violations, " +
              std::to_string(tri_disagreements) + " library disagreements";
  return o;
}

Outcome gradient_check() {
  Rng rng(20240604);
  const double h = 1e-5;
  double worst = 0;
  for (int t = 0; t < 30; ++t) {
    const ModelFamily fam = t % 3 == 0   ? ModelFamily::gaussian(0.5 + t % 4)
                            : t % 3 == 1 ? ModelFamily::bernoulli()
                                         : ModelFamily::poisson();
    const Eigen::Index n = uniform_int(rng, 3, 12), j = uniform_int(rng, 3, 10),
                       k = uniform_int(rng, 1, 4);
    const Matrix theta = uniform_matrix(n, k, rng, -1, 1);
    const Matrix a = uniform_matrix(j, k, rng, -1, 1);
    const Matrix y = sample_responses(fam, theta, a, rng);
    ResponseData::Mask mask(n, j);
    std::bernoulli_distribution keep(0.8);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index c = 0; c < j; ++c) mask(i, c) = keep(rng) ? 1 : 0;
    const ResponseData d(y, mask);
    const Gradients g = gradients(d, theta, a, fam);
    auto rel = [](double x, double ref) { return std::abs(x - ref) / std::max(1.0, std::abs(ref)); };
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index c = 0; c < k; ++c) {
        Matrix tp = theta, tm = theta;
        tp(i, c) += h;
        tm(i, c) -= h;
        const double fd = static_cast<double>(
            (loglik_oracle(y, mask, tp, a, fam) - loglik_oracle(y, mask, tm, a, fam)) / (2 * h));
        worst = std::max(worst, rel(g.theta(i, c), fd));
      }
    for (Eigen::Index r = 0; r < j; ++r)
      for (Eigen::Index c = 0; c < k; ++c) {
        Matrix ap = a, am = a;
        ap(r, c) += h;
        am(r, c) -= h;
        const double fd = static_cast<double>(
            (loglik_oracle(y, mask, theta, ap, fam) - loglik_oracle(y, mask, theta, am, fam)) /
            (2 * h));
        worst = std::max(worst, rel(g.loadings(r, c), fd));
      }
  }
  return {worst < kGradientRelTol, "worst relative error " + fmt(worst) + " over 30 instances"};
}

Outcome noiseless_recovery() {
  Rng rng(20240605);
  const std::size_t n = 40, j = 40, k = 2;
  const double radius = 2.0;
  const auto q = gen_design(DesignKind::Simple, j, k).q;
  const Matrix theta = sample_ball(n, k, radius, rng);
  const Matrix a = apply_design(sample_ball(j, k, radius, rng), q);
  const Matrix m = theta * a.transpose();
  FitConfig c;
  c.c_prime = 1.2 * radius;
  c.max_outer_iters = 500;
  c.tol_rel_obj = 1e-14;
  const FitResult r = audited_fit(ResponseData(m), q, ModelFamily::gaussian(), c);
  const double loss = frobenius_scaled(r.theta_hat * r.a_hat.transpose(), m);
  double sine = 0;
  for (Eigen::Index f = 0; f < 2; ++f) sine = std::max(sine, sin_angle_factor(theta, r.theta_hat, f));
  return {loss < kNoiselessLoss && sine < kNoiselessSine && r.iters_used <= 500,
          "loss " + fmt(loss) + ", worst sine " + fmt(sine) + ", " + std::to_string(r.iters_used) +
              " iterations"};
}

struct StudyITrend {
  std::string label;
  std::vector<ReplicationRecord> records;
};

std::vector<StudyITrend> g_study_one;

std::vector<double> medians(const std::vector<ReplicationRecord>& r, const std::string& metric) {
  return median_by_j(r, metric);
}

std::size_t failures(const std::vector<ReplicationRecord>& records) {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [](const auto& r) { return !r.ok; }));
}

Outcome study_one_trend() {
  const StudyConfig base = StudyConfig::from_json_file(kSource + "/configs/studyI_desk.json");
  Outcome o;
  for (const auto& [family, fname] :
       {std::pair{ModelFamily::gaussian(), "gaussian"}, std::pair{ModelFamily::bernoulli(), "bernoulli"}})
    for (const auto& [design, dname] :
         {std::pair{DesignKind::Simple, "simple"}, std::pair{DesignKind::Mixed, "mixed"}}) {
      StudyConfig c = base;
      c.family = family;
      c.design = design;
      c.name = std::string(fname) + "-" + dname;
      const auto t0 = Clock::now();
      auto records = audited_study(c, 0);
      const auto frob = medians(records, "frobenius"), sine = medians(records, "sin_factor_1");
      const bool ok = failures(records) == 0 && strictly_decreasing(frob) && strictly_decreasing(sine);
      o.pass = o.pass && ok;
      o.detail += "\n    " + c.name + (ok ? "" : " [FAIL]") + ": frobenius " + join(frob) +
                  "; sine " + join(sine) + " (" + fmt(seconds_since(t0)) + " s)";
      g_study_one.push_back({c.name, std::move(records)});
    }
  return o;
}

Outcome study_two() {
  const StudyConfig c = StudyConfig::from_json_file(kSource + "/configs/studyII_desk.json");
  const auto records = audited_study(c, 0);
  const double s1 = medians(records, "sin_factor_1").front();
  const double s2 = medians(records, "sin_factor_2").front();
  return {failures(records) == 0 && s2 > kUnidentifiedFloor && s1 < kIdentifiedCeiling,
          "median sine: identifiable factor " + fmt(s1) + ", unidentifiable factor " + fmt(s2)};
}

Outcome metric_oracles() {
  Rng rng(20240606);
  double worst = 0;
  int pairs = 0;
  for (Eigen::Index n = 1; n <= 6; ++n)
    for (int t = 0; t < 200; ++t) {
      Vector v = normal_matrix(n, 1, rng).col(0), w = normal_matrix(n, 1, rng).col(0);
      if (t % 3 == 0) w = w.array().round();  // ties
      worst = std::max(worst, std::abs(wasserstein_empirical(v, w) - matching_oracle(v, w)));
      ++pairs;
    }
  int kendall_mismatch = 0;
  for (int t = 0; t < 100; ++t) {
    const Eigen::Index n = uniform_int(rng, 1, 200);
    Vector v = normal_matrix(n, 1, rng).col(0), w = normal_matrix(n, 1, rng).col(0);
    if (t % 2 == 0) {
      v = (v * 2).array().round();
      w = (w * 2).array().round();
    }
    if (kendall_tau_distance(v, w) != discordant_oracle(v, w)) ++kendall_mismatch;
  }
  return {worst <= kWassersteinTol && kendall_mismatch == 0,
          "wasserstein worst " + fmt(worst) + " over " + std::to_string(pairs) + " pairs; " +
              std::to_string(kendall_mismatch) + " kendall mismatches over 100 pairs"};
}

Outcome missing_data() {
  StudyConfig half = StudyConfig::from_json_file(kSource + "/configs/missing_desk.json");
  StudyConfig full = half;
  full.observed_fraction = 1.0;
  const double at_full = medians(audited_study(full, 0), "frobenius").front();
  const auto half_records = audited_study(half, 0);
  const double at_half = medians(half_records, "frobenius").front();
  return {failures(half_records) == 0 && at_half > at_full,
          "median frobenius at observed fraction 1.0: " + fmt(at_full) + ", at 0.5: " + fmt(at_half)};
}

Outcome ranking_decay() {
  Outcome o;
  if (g_study_one.empty()) return {false, "study-I records unavailable"};
  for (const auto& s : g_study_one) {
    const auto tau = medians(s.records, "kendall"), cls = medians(s.records, "classification");
    const bool ok = strictly_decreasing(tau) && strictly_decreasing(cls);
    o.pass = o.pass && ok;
    o.detail += "\n    " + s.label + (ok ? "" : " [FAIL]") + ": kendall " + join(tau) +
                "; classification " + join(cls);
  }
  return o;
}

Outcome determinism() {
  StudyConfig c;
  c.name = "determinism";
  c.family = ModelFamily::bernoulli();
  c.factors = 5;
  c.design = DesignKind::Mixed;
  c.j_grid = {15, 30};
  c.n_multiplier = 4;
  c.replications = 4;
  c.seed = 77;
  c.observed_fraction = 0.7;
  c.max_outer_iters = 80;
  const std::string one = records_csv(audited_study(c, 1));
  bool same = true;
  for (int threads : {2, 4}) same = same && records_csv(audited_study(c, threads)) == one;
  StudyConfig g = StudyConfig::from_json_file(kSource + "/configs/studyI_desk.json");
  g.j_grid = {20};
  g.replications = 3;
  const std::string g1 = records_csv(audited_study(g, 1));
  same = same && records_csv(audited_study(g, 3)) == g1;
  return {same, std::string(same ? "identical" : "different") + " records at threads 1, 2, 3, 4"};
}

Outcome trace_monotone() {
  // Extra fits across families, designs, missing data and intercept mode.
  Rng rng(20240607);
  for (int t = 0; t < 12; ++t) {
    const ModelFamily fam = t % 3 == 0   ? ModelFamily::gaussian()
                            : t % 3 == 1 ? ModelFamily::bernoulli()
                                         : ModelFamily::poisson();
    const std::size_t k = t % 2 ? 5 : 2, j = 30, n = 60;
    const bool intercept = t >= 6;
    DesignMatrix q = gen_design(t % 2 ? DesignKind::Mixed : DesignKind::StudyII, j, k).q;
    if (intercept)
      for (std::size_t r = 0; r < j; ++r) q.set(r, 0, true);
    Matrix theta = sample_ball(n, k, 1.0, rng);
    if (intercept) {
      theta.col(0).setOnes();
      for (Eigen::Index c = 1; c < theta.cols(); ++c)
        theta.col(c).array() -= theta.col(c).mean();
      theta *= 0.5;
      theta.col(0).setOnes();
    }
    const Matrix a = apply_design(sample_ball(j, k, 1.0, rng), q);
    const Matrix y = sample_responses(fam, theta, a, rng);
    FitConfig c;
    c.c_prime = 2.0;
    c.max_outer_iters = 150;
    c.intercept_mode = intercept;
    c.seed = static_cast<std::uint64_t>(t);
    ResponseData d(y);
    if (t % 4 == 3) d = ResponseData(y, gen_mask(0.6 * n * j, n, j, rng));
    audited_fit(d, q, fam, c);
  }
  return {g_trace.worst <= kTraceSlack,
          std::to_string(g_trace.fits) + " fits, largest objective rise " + fmt(g_trace.worst)};
}

struct Criterion {
  int id;
  std::string name;
  double limit_seconds;  // 0: no separate limit
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  // Criterion 5 audits every fit made above it, so it runs last.
  const std::vector<Criterion> criteria = {
      {1, "identifiability verdicts", 1, identifiability_verdicts},
      {2, "half-chord sine identity", 1, lemma2_identity},
      {3, "subspace perturbation and angle bounds", 10, perturbation_bounds},
      {4, "analytic gradients vs finite differences", 5, gradient_check},
      {6, "noiseless gaussian recovery", 30, noiseless_recovery},
      {7, "study I trend along J", 600, study_one_trend},
      {8, "study II unidentifiable factor", 180, study_two},
      {9, "metric oracles", 10, metric_oracles},
      {10, "missing data raises loss", 180, missing_data},
      {11, "ranking and classification decay", 0, ranking_decay},
      {12, "thread-count determinism", 60, determinism},
      {5, "non-increasing objective traces", 0, trace_monotone},
  };
  // Optional arguments select criteria by number; the default runs all.
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  int failed = 0, ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    ++ran;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = seconds_since(t0);
    if (c.limit_seconds > 0 && secs > c.limit_seconds) {
      o.pass = false;
      o.detail += "; took " + fmt(secs) + " s, limit " + fmt(c.limit_seconds) + " s";
    }
    if (!o.pass) ++failed;
    std::printf("%s criterion %d (%s): %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", c.id,
                c.name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %d criteria failed\n", failed, ran);
  return failed ? 1 : 0;
}
