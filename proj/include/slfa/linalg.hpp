#pragma once

#include <vector>

#include "slfa/model.hpp"

namespace slfa {

inline constexpr double kAngleTolerance = 1e-8;

// Orthonormal basis of a linear subspace of R^m. May be empty (dimension 0).
class SubspaceBasis {
 public:
  SubspaceBasis() = default;
  explicit SubspaceBasis(Eigen::Index ambient) : basis_(ambient, 0) {}

  // Orthonormal basis of the column space of `columns`; singular values below
  // rank_tol * sigma_max are dropped.
  static SubspaceBasis span(const Matrix& columns, double rank_tol = 1e-12);
  // Adopts columns that are already orthonormal (checked to 1e-10).
  static SubspaceBasis from_orthonormal(Matrix columns);

  Eigen::Index ambient() const { return basis_.rows(); }
  Eigen::Index dim() const { return basis_.cols(); }
  const Matrix& basis() const { return basis_; }
  Matrix projector() const { return basis_ * basis_.transpose(); }

 private:
  Matrix basis_;
};

// Sine of the angle between two nonzero vectors.
double sin_angle_vec(const Vector& u, const Vector& v);

// Principal angles in descending order; min(dim L, dim M) of them.
std::vector<double> principal_angles(const SubspaceBasis& l, const SubspaceBasis& m);

// max over u in M of min over v in L of sin(u, v). Equals 1 whenever M has a
// direction orthogonal to L (in particular when dim M > dim L).
double sin_largest_principal(const SubspaceBasis& l, const SubspaceBasis& m);

// Smallest principal angle above `tol`, or 0 if there is none.
double theta_min_plus(const SubspaceBasis& l, const SubspaceBasis& m,
                      double tol = kAngleTolerance);

// 2(1 + cos t) / (1 - cos t)^3; +inf at t = 0.
double alpha(double theta);

// Basis of L intersect M built from the principal directions of L whose angle
// to M is below tol.
SubspaceBasis intersect(const SubspaceBasis& l, const SubspaceBasis& m,
                        double tol = kAngleTolerance);

// Spectral norm of a symmetric matrix.
double spectral_norm_symmetric(const Matrix& s);

struct BoundCheck {
  double lhs = 0;
  double rhs = 0;
  bool holds = false;
};

// ||P_{L'^M'} - P_{L^M}||_2 against
// 8 max{alpha(theta+(L,M)), alpha(theta+(L',M'))} (||P_L - P_L'||_2 + ||P_M - P_M'||_2).
BoundCheck verify_perturbation_bound(const SubspaceBasis& l, const SubspaceBasis& m,
                                     const SubspaceBasis& l2, const SubspaceBasis& m2);

// cos theta+(R(W_S1), R(W_S2)) against 1 - sigma_{|S1 u S2|}(W_{S1 u S2})^2 / ||W||_2^2.
// Column subsets are 0-based index lists; both set differences must be
// nonempty.
BoundCheck angle_lower_bound_check(const Matrix& w, const std::vector<std::size_t>& s1,
                                   const std::vector<std::size_t>& s2);

}  // namespace slfa
