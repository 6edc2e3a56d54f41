#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "qclimit/measures.hpp"
#include "support.hpp"

using namespace qclimit;
using testing_support::random_cvector;

namespace {

ModeSet single_mode() {
  return ModeSet::from_nodes(2, {Point(0, 1, 0)}, {1.0}, DispersionRule::massless());
}

ModeSet small_modes() {
  std::vector<double> r{0.6, 1.2};
  return build_mode_set(2, r, 3, DispersionRule::massless());
}

}  // namespace

TEST_CASE("bare potential examples") {
  ModeSet ms = single_mode();
  FormFactor ff = constant_coupling(1, 1.0);
  Domain dom{2, 1.0};
  Point x(0.5, 0.5, 0);
  CVector z = CVector::Zero(1);
  CHECK(bare_potential(z, ff, ms, std::span<const Point>(&x, 1), dom).norm() == 0.0);
  z[0] = 0.3;
  RVector b = bare_potential(z, ff, ms, std::span<const Point>(&x, 1), dom);
  // e_1 for k = (0,1) is (-1, 0) in our frame; magnitude 0.6 along x
  CHECK(std::abs(b[0]) == doctest::Approx(0.6));
  CHECK(b[1] == doctest::Approx(0.0));
  z[0] = cplx(0, 0.3);
  CHECK(bare_potential(z, ff, ms, std::span<const Point>(&x, 1), dom).norm() < 1e-16);
}

TEST_CASE("measure-provenance fields") {
  ModeSet ms = small_modes();
  FormFactor ff = gaussian_charge(1, 1.0, 0.7, Point(0.5, 0.5, 0));
  ParticleGrid grid(2, 1, 1, 1.0, 6);
  std::mt19937_64 rng(3);
  CVector z = random_cvector(ms.field_modes(), rng, 0.4);

  EffectiveFields pm = effective_fields_mu(WignerMeasure::point_mass(z), ff, ms, grid);
  CHECK(pm.W[0].cwiseAbs().maxCoeff() <= 1e-14);

  WignerMeasure sym{{0.5, 0.5}, {z, CVector(-z)}};
  EffectiveFields two = effective_fields_mu(sym, ff, ms, grid);
  CHECK(two.A[0].cwiseAbs().maxCoeff() <= 1e-14);
  for (Index p = 0; p < grid.points(); ++p) {
    Point x = grid.point(p);
    RVector b = bare_potential(z, ff, ms, std::span<const Point>(&x, 1), grid.domain());
    CHECK(two.W[0][p] == doctest::Approx(b.squaredNorm()).epsilon(1e-12));
    // W = phi2 - |A|² identically for measure provenance
    CHECK(std::abs(pm.W[0][p] - (pm.phi2[0][p] - pm.A[0].row(p).squaredNorm())) <=
          1e-12 * std::max(1.0, pm.phi2[0][p]));
  }

  ModeSet one = single_mode();
  FormFactor unit = constant_coupling(1, 1.0);
  CVector r = CVector::Constant(1, 0.8);
  EffectiveFields circ = effective_fields_mu(WignerMeasure::circle(r, 12), unit, one, grid);
  CHECK(circ.A[0].cwiseAbs().maxCoeff() <= 1e-14);
  CHECK(circ.W[0].minCoeff() == doctest::Approx(2 * 0.64));
  CHECK(circ.W[0].maxCoeff() == doctest::Approx(2 * 0.64));
}

TEST_CASE("field energy examples") {
  ModeSet unitw = ModeSet::from_nodes(2, {Point(1, 0, 0)}, {1.0}, DispersionRule::massless());
  CVector z = CVector::Ones(1);
  CHECK(field_energy(WignerMeasure::point_mass(z), unitw) == doctest::Approx(1.0));
  CHECK(field_energy(WignerMeasure::point_mass(CVector::Zero(1)), unitw) == 0.0);
  ModeSet two = ModeSet::from_nodes(2, {Point(2, 0, 0)}, {1.0}, DispersionRule::massless());
  WignerMeasure mu{{0.5, 0.5}, {z, CVector(2.0 * z)}};
  CHECK(field_energy(mu, two) == doctest::Approx(5.0));
}

TEST_CASE("vacuum: zero A and the pure reordering term") {
  ModeSet ms = small_modes();
  FormFactor ff = gaussian_charge(1, 1.0, 0.7, Point(0.5, 0.5, 0));
  ParticleGrid grid(2, 1, 1, 1.0, 5);
  double eps = 0.125;
  auto fs = FockSpace::create(ms.field_modes(), 2, eps);
  CVector vac = number_state(*fs, std::vector<int>(ms.field_modes(), 0));
  EffectiveFields f = effective_fields_eps(vac, *fs, ff, ms, grid);
  CHECK(f.A[0].cwiseAbs().maxCoeff() == 0.0);
  for (Index p = 0; p < grid.points(); ++p) {
    CouplingVector cv = coupling_vector(ms, ff, 0, grid.point(p), grid.domain());
    double expect = 0.0;
    for (int m = 0; m < ms.size(); ++m) {
      double wl = std::norm(ff.lambda[0](grid.point(p), ms.node(m), ms.omega(m)));
      expect += (ms.dimension() - 1) * ms.weight(m) * wl;
    }
    CHECK(f.phi2[0][p] == doctest::Approx(eps * expect).epsilon(1e-12));
    CHECK(coupling_norm2(cv) == doctest::Approx(expect).epsilon(1e-12));
  }

  // cross-check against φ·φ as a matrix
  Point x = grid.point(3);
  auto phi = field_operator(fs, coupling_vector(ms, ff, 0, x, grid.domain()), 2);
  double direct = 0.0;
  for (const auto& c : phi) direct += (c * c).expectation(vac).real();
  CHECK(direct == doctest::Approx(f.phi2[0][3]).epsilon(1e-12));
}

TEST_CASE("number state: A = 0 and phi2 = 2 + ε") {
  ModeSet ms = single_mode();
  FormFactor ff = constant_coupling(1, 1.0);
  ParticleGrid grid(2, 1, 1, 1.0, 4);
  for (int n : {4, 8, 16, 32}) {
    double eps = 1.0 / n;
    auto fs = FockSpace::create(1, n + 2, eps);
    CVector v = number_state(*fs, std::vector<int>{n});
    EffectiveFields f = effective_fields_eps(v, *fs, ff, ms, grid);
    CHECK(f.A[0].cwiseAbs().maxCoeff() == 0.0);
    for (Index p = 0; p < grid.points(); ++p) {
      CHECK(std::abs(f.phi2[0][p] - (2.0 + eps)) <= 1e-10);
      CHECK(f.W[0][p] >= 2.0);
    }
  }
}

TEST_CASE("coherent states reproduce the point-mass fields") {
  ModeSet ms = small_modes();
  FormFactor ff = gaussian_charge(1, 1.0, 0.7, Point(0.5, 0.5, 0), 0.4);
  ParticleGrid grid(2, 1, 2, 1.0, 5);
  std::mt19937_64 rng(8);
  CVector z = random_cvector(ms.field_modes(), rng, 0.1);
  EffectiveFields mu = effective_fields_mu(WignerMeasure::point_mass(z), ff, ms, grid);
  for (double eps : {0.5, 0.25}) {
    int nmax = required_n_max(z.squaredNorm() / eps, 1e-12);
    auto fs = FockSpace::create(ms.field_modes(), nmax, eps);
    CVector xi = coherent_state(*fs, {z}, 1e-12);
    EffectiveFields st = effective_fields_eps(xi, *fs, ff, ms, grid);
    CHECK((st.A[0] - mu.A[0]).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((st.B[0] - mu.B[0]).cwiseAbs().maxCoeff() <= 1e-9);
    EffectiveFields ex = effective_fields_moments(coherent_moments(z, eps), ff, ms, grid);
    CHECK((ex.A[0] - mu.A[0]).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK((ex.phi2[0] - st.phi2[0]).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("coherent variance is linear in ε") {
  ModeSet ms = small_modes();
  FormFactor ff = gaussian_charge(1, 1.0, 0.7, Point(0.5, 0.5, 0));
  ParticleGrid grid(2, 1, 1, 1.0, 4);
  std::mt19937_64 rng(10);
  CVector z = random_cvector(ms.field_modes(), rng, 0.5);
  Index p = 4;
  double slope = coupling_norm2(coupling_vector(ms, ff, 0, grid.point(p), grid.domain()));
  for (double eps : {0.25, 0.125, 0.0625, 1.0 / 64}) {
    EffectiveFields f = effective_fields_moments(coherent_moments(z, eps), ff, ms, grid);
    double var = f.phi2[0][p] - f.A[0].row(p).squaredNorm();
    CHECK(var / eps == doctest::Approx(slope).epsilon(1e-10));
  }
}

TEST_CASE("W is nonnegative for random measures") {
  ModeSet ms = small_modes();
  FormFactor ff = gaussian_charge(1, 1.3, 0.5, Point(0.3, 0.6, 0));
  ParticleGrid grid(2, 1, 1, 1.0, 6);
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    WignerMeasure mu;
    int k = 1 + t % 5;
    double total = 0.0;
    for (int l = 0; l < k; ++l) {
      mu.weights.push_back(u(rng));
      total += mu.weights.back();
      mu.points.push_back(random_cvector(ms.field_modes(), rng, 2.0));
    }
    for (auto& a : mu.weights) a /= total;
    CHECK(effective_fields_mu(mu, ff, ms, grid).min_W() >= -1e-12);
  }
}

TEST_CASE("spin fields vanish without b couplings and are rejected for s = 1") {
  ModeSet ms = small_modes();
  ParticleGrid scalar(2, 1, 1, 1.0, 4);
  std::mt19937_64 rng(4);
  CVector z = random_cvector(ms.field_modes(), rng);
  FormFactor nospin = gaussian_charge(1, 1.0, 0.7, Point(0.5, 0.5, 0));
  CHECK(effective_fields_mu(WignerMeasure::point_mass(z), nospin, ms, scalar).B[0].norm() == 0.0);
  FormFactor spin = gaussian_charge(1, 1.0, 0.7, Point(0.5, 0.5, 0), 0.5);
  CHECK_THROWS_AS(effective_fields_mu(WignerMeasure::point_mass(z), spin, ms, scalar),
                  InvalidArgument);
}

TEST_CASE("measure JSON round trip and field CSV") {
  std::mt19937_64 rng(6);
  WignerMeasure mu{{0.3, 0.7}, {random_cvector(3, rng), random_cvector(3, rng)}};
  WignerMeasure back = measure_from_json(measure_to_json(mu));
  REQUIRE(back.size() == 2);
  for (int l = 0; l < 2; ++l) {
    CHECK(back.weights[l] == mu.weights[l]);
    CHECK((back.points[l] - mu.points[l]).norm() == 0.0);
  }
  CHECK_THROWS_AS(measure_from_json(nlohmann::json::parse(R"({"points":[{"weight":0.5,"re":[1]}]})")),
                  InvalidArgument);

  ModeSet ms = small_modes();
  ParticleGrid grid(2, 1, 1, 1.0, 3);
  EffectiveFields f = effective_fields_mu(WignerMeasure::point_mass(random_cvector(ms.field_modes(), rng)),
                                          constant_coupling(1, 1.0), ms, grid);
  write_fields_csv("fields_test.csv", f, grid);
  std::ifstream in("fields_test.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "x0,x1,A0_0,A0_1,B0_0,B0_1,W0,phi2_0");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == grid.points());
  std::remove("fields_test.csv");
}
