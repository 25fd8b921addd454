#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "slfa/error.hpp"
#include "slfa/linalg.hpp"
#include "support.hpp"

using namespace slfa;
using std::numbers::pi;

namespace {

Vector unit(Eigen::Index n, Eigen::Index i) { return Vector::Unit(n, i); }

SubspaceBasis span_of(std::initializer_list<Vector> cols) {
  Matrix m(cols.begin()->size(), static_cast<Eigen::Index>(cols.size()));
  Eigen::Index c = 0;
  for (const auto& v : cols) m.col(c++) = v;
  return SubspaceBasis::span(m);
}

ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an slfa::Error");
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST_CASE("sine between vectors") {
  Vector a(2), b(2);
  a << 3, 4;
  CHECK(sin_angle_vec(a, a) == doctest::Approx(0.0));
  CHECK(sin_angle_vec(unit(2, 0), unit(2, 1)) == 1.0);
  b << 1, 1;
  CHECK(sin_angle_vec(unit(2, 0), b) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
  CHECK(kind_of([&] { sin_angle_vec(Vector::Zero(2), a); }) == ErrorKind::Domain);
  CHECK(kind_of([&] { sin_angle_vec(Vector::Ones(3), a); }) == ErrorKind::Shape);
}

TEST_CASE("principal angle examples") {
  const auto e1 = unit(3, 0), e2 = unit(3, 1), e3 = unit(3, 2);
  const auto plane = span_of({e1, e2});
  for (double t : principal_angles(plane, plane)) CHECK(t == doctest::Approx(0.0));
  const auto a = principal_angles(span_of({e1}), span_of({e2}));
  REQUIRE(a.size() == 1);
  CHECK(a[0] == doctest::Approx(pi / 2));
  const auto tilted = span_of({e1, (e2 + e3) / std::sqrt(2.0)});
  const auto b = principal_angles(plane, tilted);
  REQUIRE(b.size() == 2);
  CHECK(b[0] == doctest::Approx(pi / 4).epsilon(1e-12));
  CHECK(b[1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(kind_of([&] { principal_angles(plane, span_of({unit(4, 0)})); }) == ErrorKind::Shape);
}

TEST_CASE("largest principal sine") {
  const auto e1 = unit(3, 0), e2 = unit(3, 1), e3 = unit(3, 2);
  const auto plane = span_of({e1, e2});
  CHECK(sin_largest_principal(plane, plane) == doctest::Approx(0.0));
  CHECK(sin_largest_principal(span_of({e1}), span_of({e2})) == doctest::Approx(1.0));
  CHECK(sin_largest_principal(plane, span_of({e1, (e2 + e3) / std::sqrt(2.0)})) ==
        doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  // The display is asymmetric: a bigger M always has a direction outside L.
  CHECK(sin_largest_principal(span_of({e1}), plane) == doctest::Approx(1.0));
  CHECK(sin_largest_principal(plane, span_of({e1})) == doctest::Approx(0.0));
}

TEST_CASE("smallest positive angle") {
  const auto e1 = unit(3, 0), e2 = unit(3, 1), e3 = unit(3, 2);
  const auto plane = span_of({e1, e2});
  CHECK(theta_min_plus(plane, plane) == 0.0);
  CHECK(theta_min_plus(plane, span_of({e1, (e2 + e3) / std::sqrt(2.0)})) ==
        doctest::Approx(pi / 4).epsilon(1e-12));
  CHECK(theta_min_plus(span_of({e1}), span_of({e2})) == doctest::Approx(pi / 2));
}

TEST_CASE("alpha values") {
  CHECK(alpha(pi / 2) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(alpha(pi) == doctest::Approx(0.0));
  CHECK(alpha(pi / 3) == doctest::Approx(24.0).epsilon(1e-12));
  CHECK(std::isinf(alpha(0.0)));
}

TEST_CASE("subspace intersection") {
  const auto e1 = unit(3, 0), e2 = unit(3, 1), e3 = unit(3, 2);
  const auto plane = span_of({e1, e2});
  CHECK(intersect(plane, plane).dim() == 2);
  CHECK(intersect(span_of({e1}), span_of({e2})).dim() == 0);
  const auto cap = intersect(plane, span_of({e2, e3}));
  REQUIRE(cap.dim() == 1);
  CHECK(std::abs(cap.basis().col(0).dot(e2)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("subspace bases") {
  Rng rng(3);
  Matrix m = test::normal_matrix(6, 3, rng);
  m.col(2) = m.col(0) - 2 * m.col(1);
  const auto s = SubspaceBasis::span(m);
  CHECK(s.dim() == 2);
  CHECK((s.basis().transpose() * s.basis() - Matrix::Identity(2, 2)).norm() < 1e-10);
  CHECK(kind_of([&] { SubspaceBasis::from_orthonormal(m); }) == ErrorKind::InvalidArgument);
  CHECK(SubspaceBasis::from_orthonormal(s.basis()).dim() == 2);
  CHECK(SubspaceBasis::span(Matrix::Zero(4, 2)).dim() == 0);
}

TEST_CASE("perturbation bound examples") {
  const auto e1 = unit(3, 0), e2 = unit(3, 1), e3 = unit(3, 2);
  const auto l = span_of({e1, e2});
  const auto m = span_of({e2, e3});
  const auto same = verify_perturbation_bound(l, m, l, m);
  CHECK(same.lhs == doctest::Approx(0.0));
  CHECK(same.holds);

  // Two lines at a right angle, each turned by 0.01 rad.
  const double d = 0.01;
  const auto l1 = span_of({e1});
  const auto m1 = span_of({e2});
  const auto l2 = span_of({std::cos(d) * e1 + std::sin(d) * e3});
  const auto m2 = span_of({std::cos(d) * e2 + std::sin(d) * e3});
  const auto r = verify_perturbation_bound(l1, m1, l2, m2);
  const double dp = std::sin(d);  // ||P - P'||_2 for lines at angle d
  const double a = std::max(alpha(pi / 2), alpha(theta_min_plus(l2, m2)));
  CHECK(r.rhs == doctest::Approx(8 * a * 2 * dp).epsilon(1e-10));
  CHECK(r.rhs == doctest::Approx(8 * 2 * 2 * dp).epsilon(1e-3));
  CHECK(r.lhs == doctest::Approx(0.0));
  CHECK(r.holds);
}

TEST_CASE("angle lower bound examples") {
  Matrix w = Matrix::Identity(5, 3);
  const auto r = angle_lower_bound_check(w, {0}, {1});
  CHECK(r.lhs == doctest::Approx(0.0));
  CHECK(r.holds);
  Matrix deficient(4, 3);
  deficient << 1, 2, 3, 0, 1, 1, 2, 0, 2, 1, 1, 2;  // col 2 = col 0 + col 1
  const auto r2 = angle_lower_bound_check(deficient, {0, 2}, {1, 2});
  CHECK(r2.rhs == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r2.holds);
  CHECK(kind_of([&] { angle_lower_bound_check(w, {0, 1}, {1}); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([&] { angle_lower_bound_check(Matrix::Zero(3, 2), {0}, {1}); }) ==
        ErrorKind::InvalidArgument);
}

TEST_CASE("principal angles are symmetric for equal dimensions") {
  Rng rng(19);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index n = 4 + trial % 6, d = 1 + trial % 3;
    const auto l = SubspaceBasis::span(test::normal_matrix(n, d, rng));
    const auto m = SubspaceBasis::span(test::normal_matrix(n, d, rng));
    const auto a = principal_angles(l, m), b = principal_angles(m, l);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-10);
    CHECK(std::is_sorted(a.rbegin(), a.rend()));
  }
}

TEST_CASE("largest sine is 0 exactly for contained subspaces") {
  Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix big = test::normal_matrix(7, 3, rng);
    const auto l = SubspaceBasis::span(big);
    const Matrix inside = big * test::normal_matrix(3, 2, rng);
    const auto m_in = SubspaceBasis::span(inside);
    CHECK(sin_largest_principal(l, m_in) < 1e-8);
    const auto m_out = SubspaceBasis::span(test::normal_matrix(7, 2, rng));
    const double s = sin_largest_principal(l, m_out);
    CHECK(s > 1e-8);
    CHECK(s <= 1.0);
  }
}

TEST_CASE("intersection lies in both subspaces") {
  Rng rng(29);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index n = 6 + trial % 5;
    const Matrix shared = test::normal_matrix(n, 1 + trial % 2, rng);
    Matrix lc(n, shared.cols() + 1), mc(n, shared.cols() + 2);
    lc << shared, test::normal_matrix(n, 1, rng);
    mc << shared, test::normal_matrix(n, 2, rng);
    const auto l = SubspaceBasis::span(lc), m = SubspaceBasis::span(mc);
    const auto cap = intersect(l, m);
    CHECK(cap.dim() == shared.cols());
    const Matrix pl = l.projector(), pm = m.projector();
    for (Eigen::Index c = 0; c < cap.dim(); ++c) {
      const Vector v = cap.basis().col(c);
      CHECK((pl * v - v).norm() < 1e-8);
      CHECK((pm * v - v).norm() < 1e-8);
    }
  }
}

TEST_CASE("unit-vector distance after sign alignment") {
  Rng rng(31);
  for (int trial = 0; trial < 2000; ++trial) {
    const Eigen::Index n = 2 + trial % 99;
    const Vector w = test::normal_matrix(n, 1, rng).col(0);
    const Vector w2 = test::normal_matrix(n, 1, rng).col(0);
    const double c = w.dot(w2) > 0 ? 1.0 : -1.0;
    const double lhs = (w / w.norm() - c * w2 / w2.norm()).squaredNorm();
    const double s = sin_angle_vec(w, w2);
    const double gap = std::abs(lhs - (2 - 2 * std::sqrt(1 - s * s)));
    // Near s = 1 the right side moves 2 s / |cos| per unit of s, so one ulp
    // of s already costs more than 1e-12 once |cos| drops below ~2e-4.
    const double cosine = std::abs(w.dot(w2)) / (w.norm() * w2.norm());
    if (cosine >= 1e-3) CHECK(gap < 1e-12);
    CHECK(gap < 1e-12 + 8 * std::numeric_limits<double>::epsilon() / cosine);
  }
}
