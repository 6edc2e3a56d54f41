#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numbers>

#include "qclimit/field_model.hpp"

using namespace qclimit;

namespace {

double frame_error(const ModeSet& ms) {
  double worst = 0.0;
  const int d = ms.dimension();
  for (int m = 0; m < ms.size(); ++m) {
    Point kh = ms.node(m).normalized();
    Eigen::Matrix3d P = kh * kh.transpose();
    for (int g = 0; g < ms.polarizations(); ++g) {
      const Point& e = ms.polarization(m, g);
      worst = std::max(worst, std::abs(e.norm() - 1.0));
      worst = std::max(worst, std::abs(e.dot(kh)));
      P += e * e.transpose();
    }
    Eigen::Matrix3d I = Eigen::Matrix3d::Zero();
    I.topLeftCorner(d, d).setIdentity();
    worst = std::max(worst, (P - I).cwiseAbs().maxCoeff());
  }
  return worst;
}

// ∫ e^{-|k|²} over R^d against the quadrature, d = 2: π; d = 3: π^{3/2}.
double gaussian_quadrature_error(int d, int res) {
  std::vector<double> r;
  for (int i = 0; i < 40; ++i) r.push_back((i + 0.5) * 0.125);
  ModeSet ms = build_mode_set(d, r, res, DispersionRule::massless());
  double s = 0.0;
  for (int m = 0; m < ms.size(); ++m) {
    const Point& k = ms.node(m);
    // anisotropic test function so angular resolution matters
    double f = std::exp(-k.squaredNorm()) * (1.0 + 0.5 * std::pow(k.x() / k.norm(), 4));
    s += ms.weight(m) * f;
  }
  double exact = d == 2 ? std::numbers::pi * (1.0 + 0.5 * 3.0 / 8.0)
                        : std::pow(std::numbers::pi, 1.5) * (1.0 + 0.5 / 5.0);
  return std::abs(s - exact);
}

}  // namespace

TEST_CASE("single 2D node, massless") {
  ModeSet ms = ModeSet::from_nodes(2, {Point(0, 1, 0)}, {1.0}, DispersionRule::massless());
  CHECK(ms.omega(0) == doctest::Approx(1.0));
  const Point& e = ms.polarization(0, 0);
  CHECK(std::abs(e.x()) == doctest::Approx(1.0));
  CHECK(std::abs(e.y()) < 1e-15);
  CHECK(ms.field_modes() == 1);
}

TEST_CASE("3D node on the pole uses the x fallback") {
  ModeSet ms = ModeSet::from_nodes(3, {Point(0, 0, 2)}, {1.0}, DispersionRule::massless());
  CHECK(ms.omega(0) == doctest::Approx(2.0));
  CHECK(std::abs(ms.polarization(0, 0).dot(ms.polarization(0, 1))) < 1e-15);
  CHECK(std::abs(ms.polarization(0, 0).z()) < 1e-15);
  CHECK(std::abs(ms.polarization(0, 1).z()) < 1e-15);
  CHECK(frame_error(ms) < 1e-12);
}

TEST_CASE("annulus weights match direct integration of a constant") {
  std::vector<double> r{0.5, 1.0};
  ModeSet ms = build_mode_set(2, r, 4, DispersionRule::massless());
  CHECK(ms.size() == 8);
  // cells [0.25, 0.75] and [0.75, 1.25]
  double exact = std::numbers::pi * (1.25 * 1.25 - 0.25 * 0.25);
  CHECK(std::abs(ms.total_weight() - exact) < 1e-10);
  // ordering: radius first, then angle
  CHECK(ms.node(0).norm() == doctest::Approx(0.5));
  CHECK(ms.node(4).norm() == doctest::Approx(1.0));
  CHECK(frame_error(ms) < 1e-12);
}

TEST_CASE("3D shells carry the ball volume") {
  std::vector<double> r{1.0, 2.0};
  ModeSet ms = build_mode_set(3, r, 3, DispersionRule::massive(0.5));
  double exact = 4.0 / 3.0 * std::numbers::pi * (std::pow(2.5, 3) - std::pow(0.5, 3));
  CHECK(std::abs(ms.total_weight() - exact) < 1e-10);
  CHECK(ms.omega(0) == doctest::Approx(std::sqrt(1.25)));
  CHECK(frame_error(ms) < 1e-12);
}

TEST_CASE("angular refinement reduces quadrature error") {
  for (int d : {2, 3}) {
    double e1 = gaussian_quadrature_error(d, 2);
    double e2 = gaussian_quadrature_error(d, 4);
    double e3 = gaussian_quadrature_error(d, 8);
    CHECK(e2 <= e1);
    CHECK(e3 <= e2);
  }
}

TEST_CASE("rejections") {
  std::vector<double> bad{0.0, 1.0};
  CHECK_THROWS_AS(build_mode_set(2, bad, 4, DispersionRule::massless()), InvalidArgument);
  CHECK_THROWS_AS(DispersionRule::massive(-1.0), InvalidArgument);
  std::vector<double> ok{1.0};
  CHECK_THROWS_AS(build_mode_set(4, ok, 4, DispersionRule::massless()), InvalidArgument);
  CHECK_THROWS_AS(build_mode_set(2, ok, 0, DispersionRule::massless()), InvalidArgument);
}

TEST_CASE("custom dispersion table from CSV") {
  std::string path = "dispersion_test.csv";
  {
    std::ofstream out(path);
    out << "k,omega\n0.0,1.0\n2.0,3.0\n";
  }
  DispersionRule rule = DispersionRule::from_csv(path);
  CHECK(rule(1.0) == doctest::Approx(2.0));
  CHECK_THROWS_AS(rule(3.0), InvalidArgument);
  std::remove(path.c_str());
}

TEST_CASE("gauge residual") {
  std::vector<double> r{0.5, 1.0};
  ModeSet ms = build_mode_set(2, r, 6, DispersionRule::massless());
  std::vector<Point> xs{Point(0.2, 0.3, 0), Point(0.7, 0.1, 0), Point(0.5, 0.9, 0)};
  FormFactor pw = gaussian_charge(1, 1.0, 1.0, Point(0.5, 0.5, 0));
  CHECK(gauge_residual(ms, pw, xs) <= 1e-8);
  CHECK(gauge_residual(ms, constant_coupling(1, 1.0), xs) == 0.0);

  // λ(x;k) = x·e_1(k) has directional derivative e_1·e_1 = 1
  FormFactor bad;
  bad.plane_wave = false;
  bad.lambda.push_back([](const Point& x, const Point& k, double) {
    Point e = polarization_frame(2, k)[0];
    return cplx(x.dot(e), 0.0);
  });
  CHECK(gauge_residual(ms, bad, xs) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("gauge residual is invariant under frame rotation about k (3D)") {
  std::vector<double> r{1.0};
  ModeSet ms = build_mode_set(3, r, 2, DispersionRule::massless());
  std::vector<Point> xs{Point(0.2, 0.3, 0.4)};
  // λ = x·v for fixed v: residual is max |v·e_γ|, rotation-invariant only as a set over γ pairs,
  // so compare the frame-independent quantity sqrt(Σ_γ (v·e_γ)²) through two frames.
  Point v(0.3, -0.2, 0.5);
  FormFactor ff;
  ff.lambda.push_back([v](const Point& x, const Point&, double) { return cplx(x.dot(v), 0.0); });
  double res = gauge_residual(ms, ff, xs);
  double expected = 0.0;
  for (int m = 0; m < ms.size(); ++m)
    for (int g = 0; g < 2; ++g) expected = std::max(expected, std::abs(v.dot(ms.polarization(m, g))));
  CHECK(res == doctest::Approx(expected).epsilon(1e-8));
  // plane-wave form factor: zero in any frame
  FormFactor pw = gaussian_charge(1, 1.0, 1.0, Point::Zero());
  CHECK(gauge_residual(ms, pw, xs) <= 1e-8);
}

TEST_CASE("coupling vector") {
  Domain dom{2, 1.0};
  ModeSet one = ModeSet::from_nodes(2, {Point(1, 0, 0)}, {1.0}, DispersionRule::massless());
  FormFactor unit = constant_coupling(1, 1.0);
  CouplingVector cv = coupling_vector(one, unit, 0, Point(0.5, 0.5, 0), dom);
  REQUIRE(cv.size() == 1);
  CHECK(cv.amplitude[0] == cplx(1.0, 0.0));
  CHECK(std::abs(cv.direction[0].y()) == doctest::Approx(1.0));

  FormFactor zero = constant_coupling(1, 0.0);
  CHECK(coupling_norm2(coupling_vector(one, zero, 0, Point(0.1, 0.1, 0), dom)) == 0.0);

  // λ_A(k) = |k|^{-1/2} e^{-|k|²/2} at |k| = 1, weight w
  ModeSet w4 = ModeSet::from_nodes(2, {Point(0, 1, 0)}, {4.0}, DispersionRule::massless());
  FormFactor ga = gaussian_charge(1, 1.0, 1.0, Point(0.5, 0.5, 0));
  cplx a = coupling_vector(w4, ga, 0, Point(0.5, 0.5, 0), dom).amplitude[0];
  CHECK(std::abs(a) == doctest::Approx(0.60653065971263342 * 2.0).epsilon(1e-12));

  CHECK_THROWS_AS(coupling_vector(one, unit, 0, Point(1.5, 0.5, 0), dom), InvalidArgument);
}

TEST_CASE("mode set hash is stable and sensitive") {
  std::vector<double> r{0.5, 1.0};
  ModeSet a = build_mode_set(2, r, 4, DispersionRule::massless());
  ModeSet b = build_mode_set(2, r, 4, DispersionRule::massless());
  ModeSet c = build_mode_set(2, r, 5, DispersionRule::massless());
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() != c.hash());
}
