#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "qclimit/spectral.hpp"
#include "support.hpp"

using namespace qclimit;
using testing_support::random_cvector;

namespace {

LinearOperator diagonal(const RVector& d) {
  return {d.size(), [d](const CVector& in, CVector& out) { out = d.cast<cplx>().cwiseProduct(in); }};
}

LinearOperator shifted(const LinearOperator& op, double c) {
  return {op.dim, [op, c](const CVector& in, CVector& out) {
            op.apply(in, out);
            out += c * in;
          }};
}

}  // namespace

TEST_CASE("diagonal operator, dense and Krylov paths") {
  for (int K : {50, 1000}) {
    RVector d = RVector::LinSpaced(K, 1.0, K);
    SpectralReport r = lowest_eigs(diagonal(d), 4, 1e-10);
    REQUIRE(r.eigenvalues.size() == 4);
    for (int i = 0; i < 4; ++i) {
      CHECK(r.eigenvalues[i] == doctest::Approx(i + 1.0).epsilon(1e-9));
      CHECK(r.residuals[i] <= 1e-10 * (i + 2.0));
    }
    CHECK(r.iterations > 0);
  }
  CHECK_THROWS_AS(lowest_eigs(diagonal(RVector::Ones(3)), 0, 1e-8), InvalidArgument);
}

TEST_CASE("degenerate levels are all found") {
  RVector d(600);
  for (int i = 0; i < 600; ++i) d[i] = 1.0 + i / 3;  // triplets
  SpectralReport r = lowest_eigs(diagonal(d), 6, 1e-9);
  for (int i = 0; i < 6; ++i) CHECK(r.eigenvalues[i] == doctest::Approx(1.0 + i / 3).epsilon(1e-8));
}

TEST_CASE("non-convergence reports the best residuals") {
  RVector d = RVector::LinSpaced(2000, 1.0, 1.0001);
  EigenOptions opt;
  opt.max_restarts = 1;
  opt.max_basis = 12;
  CHECK_THROWS_AS(lowest_eigs(diagonal(d), 5, 1e-14, opt), NumericalError);
}

TEST_CASE("shift-invert and plain Krylov agree on a sparse operator") {
  ParticleGrid g(2, 1, 1, 1.0, 24);
  MSOOperator lap = dirichlet_laplacian(g);
  EigenOptions plain;
  plain.shift_invert = false;
  auto a = lowest_eigs(lap, 3, 1e-9).eigenvalues;
  auto b = lowest_eigs(lap, 3, 1e-9, plain).eigenvalues;
  for (int i = 0; i < 3; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-7));
  nlohmann::json j = lowest_eigs(lap, 2, 1e-9).to_json();
  CHECK(j.at("eigenvalues").size() == 2);
}

TEST_CASE("resolvent examples") {
  RVector d(2);
  d << 1.0, 2.0;
  CVector v = CVector::Ones(2);
  CVector u = apply_resolvent(diagonal(d), 1.0, v, 1e-14, 1.0);
  CHECK(std::abs(u[0] - 0.5) < 1e-14);
  CHECK(std::abs(u[1] - 1.0 / 3.0) < 1e-14);
  CHECK_THROWS_AS(apply_resolvent(diagonal(d), 0.5, v, 1e-12, -1.0), InvalidArgument);
  CHECK_THROWS_AS(apply_resolvent(diagonal(d), -1.0, v, 1e-12, 1.0), InvalidArgument);

  ParticleGrid g(2, 1, 1, 1.0, 16);
  MSOOperator lap = dirichlet_laplacian(g);
  std::mt19937_64 rng(3);
  CVector w = random_cvector(static_cast<int>(lap.dim()), rng);
  CVector x = apply_resolvent(lap, 2.0, w, 1e-12);
  CHECK((lap.apply(x) + 2.0 * x - w).norm() <= 1e-11 * w.norm());
}

TEST_CASE("second resolvent identity") {
  ParticleGrid g(2, 1, 1, 1.0, 12);
  MSOOperator lap = dirichlet_laplacian(g);
  LinearOperator a = lap.linear();
  double c = 3.0, xi = 2.0, tol = 1e-12;
  LinearOperator b = shifted(a, c);
  std::mt19937_64 rng(4);
  CVector v = random_cvector(static_cast<int>(a.dim), rng);
  CVector lhs = apply_resolvent(a, xi, v, tol, 0.0) - apply_resolvent(b, xi, v, tol, c);
  // R_A (B - A) R_B v = c R_A R_B v
  CVector rhs = c * apply_resolvent(a, xi, apply_resolvent(b, xi, v, tol, c), tol, 0.0);
  CHECK((lhs - rhs).norm() <= 10 * tol * v.norm());
}

TEST_CASE("resolvent gap") {
  ParticleGrid g(2, 1, 1, 1.0, 12);
  MSOOperator lap = dirichlet_laplacian(g);
  double l0 = lowest_eigs(lap, 1, 1e-12).eigenvalues[0];
  double xi = 1.0, c = 0.5;
  CHECK(resolvent_gap(lap, lap, xi, 2, 1e-12) <= 1e-12);

  SparseMatrix I(lap.dim(), lap.dim());
  I.setIdentity();
  MSOOperator sh(g, lap.matrix() + c * I, {});
  double expect = c / ((l0 + xi) * (l0 + c + xi));
  CHECK(resolvent_gap(lap, sh, xi, 2, 1e-12) == doctest::Approx(expect).epsilon(1e-6));

  // matrix-free path agrees with the factored one
  GapOptions opt;
  opt.lowest_a = l0;
  opt.lowest_b = l0 + c;
  CHECK(resolvent_gap(lap.linear(), sh.linear(), xi, 1, 1e-12, opt) ==
        doctest::Approx(expect).epsilon(1e-6));

  CHECK(default_xi(-3.0) == 5.0);
  CHECK(default_xi(1.0) == 2.0);
  CHECK_THROWS_AS(resolvent_gap(lap, sh, -1.0, 1, 1e-12), InvalidArgument);
}
