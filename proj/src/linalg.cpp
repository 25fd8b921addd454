#include "slfa/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "slfa/error.hpp"

namespace slfa {

namespace {

double clamp_unit(double x) { return std::clamp(x, -1.0, 1.0); }

void require_same_ambient(const SubspaceBasis& a, const SubspaceBasis& b) {
  if (a.ambient() != b.ambient())
    fail(ErrorKind::Shape, "subspaces live in different ambient dimensions (" +
                               std::to_string(a.ambient()) + " vs " +
                               std::to_string(b.ambient()) + ")");
}

Vector singular_values(const Matrix& x) {
  if (x.size() == 0) return Vector();
  Eigen::JacobiSVD<Matrix> svd(x);
  return svd.singularValues();
}

}  // namespace

SubspaceBasis SubspaceBasis::span(const Matrix& columns, double rank_tol) {
  SubspaceBasis out(columns.rows());
  if (columns.cols() == 0 || columns.rows() == 0) return out;
  Eigen::JacobiSVD<Matrix> svd(columns, Eigen::ComputeThinU);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return out;
  Eigen::Index rank = 0;
  while (rank < s.size() && s(rank) > rank_tol * s(0)) ++rank;
  out.basis_ = svd.matrixU().leftCols(rank);
  return out;
}

SubspaceBasis SubspaceBasis::from_orthonormal(Matrix columns) {
  const Matrix gram = columns.transpose() * columns;
  if (gram.size() > 0 &&
      (gram - Matrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() > 1e-10)
    fail(ErrorKind::InvalidArgument, "basis columns are not orthonormal");
  SubspaceBasis out;
  out.basis_ = std::move(columns);
  return out;
}

double sin_angle_vec(const Vector& u, const Vector& v) {
  if (u.size() != v.size()) fail(ErrorKind::Shape, "sin_angle_vec: length mismatch");
  const double uu = u.squaredNorm();
  const double vv = v.squaredNorm();
  if (uu == 0.0 || vv == 0.0) fail(ErrorKind::Domain, "sin_angle_vec: zero vector");
  const double uv = u.dot(v);
  const double c2 = (uv * uv) / (uu * vv);
  return std::sqrt(std::clamp(1.0 - c2, 0.0, 1.0));
}

std::vector<double> principal_angles(const SubspaceBasis& l, const SubspaceBasis& m) {
  require_same_ambient(l, m);
  const SubspaceBasis& big = l.dim() >= m.dim() ? l : m;
  const SubspaceBasis& small = l.dim() >= m.dim() ? m : l;
  const Eigen::Index d = small.dim();
  std::vector<double> angles;
  if (d == 0) return angles;

  const Matrix cross = big.basis().transpose() * small.basis();
  const Vector cosines = singular_values(cross);  // descending -> angles ascending
  const Matrix residual = small.basis() - big.basis() * cross;
  const Vector sines = singular_values(residual);  // descending -> angles descending

  angles.resize(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < d; ++i) {
    const double from_cos = std::acos(clamp_unit(cosines(i)));
    const double from_sin = std::asin(std::clamp(sines(d - 1 - i), 0.0, 1.0));
    // acos loses precision near 0, asin near pi/2.
    angles[static_cast<std::size_t>(d - 1 - i)] =
        from_cos < std::numbers::pi / 4 ? from_sin : from_cos;
  }
  std::sort(angles.begin(), angles.end(), std::greater<>());
  return angles;
}

double sin_largest_principal(const SubspaceBasis& l, const SubspaceBasis& m) {
  require_same_ambient(l, m);
  if (m.dim() == 0) return 0.0;
  if (l.dim() == 0) return 1.0;
  const Matrix residual = m.basis() - l.basis() * (l.basis().transpose() * m.basis());
  return std::clamp(singular_values(residual)(0), 0.0, 1.0);
}

double theta_min_plus(const SubspaceBasis& l, const SubspaceBasis& m, double tol) {
  double best = 0.0;
  for (double a : principal_angles(l, m))
    if (a > tol && (best == 0.0 || a < best)) best = a;
  return best;
}

double alpha(double theta) {
  const double c = std::cos(theta);
  const double denom = 1.0 - c;
  if (theta == 0.0 || denom <= 0.0) return std::numeric_limits<double>::infinity();
  return 2.0 * (1.0 + c) / (denom * denom * denom);
}

SubspaceBasis intersect(const SubspaceBasis& l, const SubspaceBasis& m, double tol) {
  require_same_ambient(l, m);
  SubspaceBasis empty(l.ambient());
  if (l.dim() == 0 || m.dim() == 0) return empty;
  const Matrix residual = l.basis() - m.basis() * (m.basis().transpose() * l.basis());
  Eigen::JacobiSVD<Matrix> svd(residual, Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (std::asin(std::clamp(s(i), 0.0, 1.0)) < tol) keep.push_back(i);
  if (keep.empty()) return empty;
  Matrix coeffs(l.dim(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c)
    coeffs.col(static_cast<Eigen::Index>(c)) = svd.matrixV().col(keep[c]);
  return SubspaceBasis::span(l.basis() * coeffs);
}

double spectral_norm_symmetric(const Matrix& s) {
  if (s.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(s, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

BoundCheck verify_perturbation_bound(const SubspaceBasis& l, const SubspaceBasis& m,
                                     const SubspaceBasis& l2, const SubspaceBasis& m2) {
  require_same_ambient(l, m);
  require_same_ambient(l, l2);
  require_same_ambient(l, m2);
  BoundCheck r;
  const SubspaceBasis cap = intersect(l, m);
  const SubspaceBasis cap2 = intersect(l2, m2);
  r.lhs = spectral_norm_symmetric(cap2.projector() - cap.projector());
  const double perturbation = spectral_norm_symmetric(l.projector() - l2.projector()) +
                              spectral_norm_symmetric(m.projector() - m2.projector());
  const double a = std::max(alpha(theta_min_plus(l, m)), alpha(theta_min_plus(l2, m2)));
  r.rhs = perturbation == 0.0 ? 0.0 : 8.0 * a * perturbation;
  r.holds = r.lhs <= r.rhs + 1e-9;
  return r;
}

namespace {

Matrix select_columns(const Matrix& w, const std::vector<std::size_t>& cols) {
  Matrix out(w.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (cols[c] >= static_cast<std::size_t>(w.cols()))
      fail(ErrorKind::InvalidArgument, "column index out of range");
    out.col(static_cast<Eigen::Index>(c)) = w.col(static_cast<Eigen::Index>(cols[c]));
  }
  return out;
}

bool has_outside(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  return std::any_of(a.begin(), a.end(), [&](std::size_t x) {
    return std::find(b.begin(), b.end(), x) == b.end();
  });
}

}  // namespace

BoundCheck angle_lower_bound_check(const Matrix& w, const std::vector<std::size_t>& s1,
                                   const std::vector<std::size_t>& s2) {
  if (!has_outside(s1, s2) || !has_outside(s2, s1))
    fail(ErrorKind::InvalidArgument,
         "angle bound requires S1 \\ S2 and S2 \\ S1 to be nonempty");
  const Vector all = singular_values(w);
  if (all.size() == 0 || all(0) == 0.0) fail(ErrorKind::InvalidArgument, "W must be nonzero");

  std::vector<std::size_t> both(s1);
  both.insert(both.end(), s2.begin(), s2.end());
  std::sort(both.begin(), both.end());
  both.erase(std::unique(both.begin(), both.end()), both.end());

  const SubspaceBasis l = SubspaceBasis::span(select_columns(w, s1));
  const SubspaceBasis m = SubspaceBasis::span(select_columns(w, s2));
  BoundCheck r;
  r.lhs = std::cos(theta_min_plus(l, m));
  double sigma_min = 0.0;
  if (w.rows() >= static_cast<Eigen::Index>(both.size())) {
    const Vector s = singular_values(select_columns(w, both));
    sigma_min = s(s.size() - 1);
  }
  r.rhs = 1.0 - (sigma_min * sigma_min) / (all(0) * all(0));
  r.holds = r.lhs <= r.rhs + 1e-9;
  return r;
}

}  // namespace slfa
