#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "qclimit/common.hpp"
#include "qclimit/field_model.hpp"
#include "qclimit/fock.hpp"
#include "qclimit/grid.hpp"
#include "qclimit/wick.hpp"

namespace qclimit {

enum class Provenance { measure, state };

// Per-particle fields on the single-particle grid.
struct EffectiveFields {
  int d = 2;
  int particles = 1;
  Index points = 0;
  Provenance provenance = Provenance::measure;
  double eps = 0.0;  // zero for measure provenance
  bool has_spin = false;
  std::vector<Eigen::MatrixXd> A;  // points x d
  std::vector<Eigen::MatrixXd> B;  // points x d
  std::vector<RVector> W;
  std::vector<RVector> phi2;

  static EffectiveFields zeros(const ParticleGrid& grid, Provenance prov);
  double min_W() const;
};

// The fields at one point for one particle.
struct PointFields {
  Point A = Point::Zero();
  Point B = Point::Zero();
  double W = 0.0;
  double phi2 = 0.0;
};

RVector bare_potential(const CVector& z, const FormFactor& ff, const ModeSet& ms,
                       std::span<const Point> X, const Domain& domain);

PointFields fields_at(const WignerMeasure& mu, const FormFactor& ff, const ModeSet& ms, int j,
                      const Point& x, const Domain& domain);
PointFields fields_at(const FieldMoments& mom, const FormFactor& ff, const ModeSet& ms, int j,
                      const Point& x, const Domain& domain);

EffectiveFields effective_fields_mu(const WignerMeasure& mu, const FormFactor& ff,
                                    const ModeSet& ms, const ParticleGrid& grid);
double field_energy(const WignerMeasure& mu, const ModeSet& ms);
EffectiveFields effective_fields_eps(const CVector& state, const FockSpace& fs,
                                     const FormFactor& ff, const ModeSet& ms,
                                     const ParticleGrid& grid);
// Same as effective_fields_eps but from precomputed (possibly exact coherent) moments.
EffectiveFields effective_fields_moments(const FieldMoments& mom, const FormFactor& ff,
                                         const ModeSet& ms, const ParticleGrid& grid);

// Symbol |√ω z|² whose classical expectation is c(μ).
PolySymbol field_energy_symbol(const ModeSet& ms);

nlohmann::json measure_to_json(const WignerMeasure& mu);
WignerMeasure measure_from_json(const nlohmann::json& j);
void write_fields_csv(const std::string& path, const EffectiveFields& f, const ParticleGrid& grid);

}  // namespace qclimit
