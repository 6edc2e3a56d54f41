#pragma once

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qclimit/common.hpp"

namespace qclimit {

enum class DispersionKind { massless, massive, table };

struct DispersionRule {
  DispersionKind kind = DispersionKind::massless;
  double mass = 0.0;
  // (|k|, ω) pairs sorted by |k|; linear interpolation, no extrapolation.
  std::vector<std::pair<double, double>> table;

  static DispersionRule massless();
  static DispersionRule massive(double mass);
  static DispersionRule from_table(std::vector<std::pair<double, double>> rows);
  static DispersionRule from_csv(const std::string& path);

  double operator()(double k) const;
};

// Particle box [0, L]^d.
struct Domain {
  int d = 2;
  double length = 1.0;
  bool contains(const Point& x, double slack = 1e-12) const;
};

class ModeSet {
 public:
  static ModeSet from_nodes(int d, std::vector<Point> nodes, std::vector<double> weights,
                            const DispersionRule& rule);

  int dimension() const { return d_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  int polarizations() const { return d_ - 1; }
  // M' = M (d-1); flat index mu = m (d-1) + gamma.
  int field_modes() const { return size() * polarizations(); }

  const Point& node(int m) const { return nodes_[m]; }
  double weight(int m) const { return weights_[m]; }
  double omega(int m) const { return omegas_[m]; }
  const Point& polarization(int m, int gamma) const { return frames_[m * (d_ - 1) + gamma]; }

  int mode_of(int mu) const { return mu / (d_ - 1); }
  const Point& direction(int mu) const { return frames_[mu]; }
  // ω per flat field mode, the natural argument for dΓ(ω).
  RVector field_omegas() const;
  double total_weight() const;

  std::uint64_t hash() const;

 private:
  int d_ = 2;
  std::vector<Point> nodes_;
  std::vector<double> weights_;
  std::vector<double> omegas_;
  std::vector<Point> frames_;
};

// Transverse orthonormal frame for k; d-1 vectors.
std::vector<Point> polarization_frame(int d, const Point& k);

ModeSet build_mode_set(int d, std::span<const double> radial_nodes, int angular_resolution,
                       const DispersionRule& rule);

struct FormFactor {
  using Evaluator = std::function<cplx(const Point& x, const Point& k, double omega)>;

  std::vector<Evaluator> lambda;  // one per particle
  std::vector<Evaluator> spin;    // empty, or one per particle
  bool plane_wave = true;
  std::string label;

  int particles() const { return static_cast<int>(lambda.size()); }
  bool has_spin() const { return !spin.empty(); }
};

// ρ(k) = charge e^{-|k|²σ²/2}; λ = ρ ω^{-1/2} e^{-ik·(x-c)}.
FormFactor gaussian_charge(int particles, double charge, double sigma, const Point& center,
                           double spin_coupling = 0.0);
// x-independent λ = charge ω^{-1/2} (no phase).
FormFactor constant_coupling(int particles, double charge, double spin_coupling = 0.0);
// ρ tabulated against |k|, plane-wave phase about center.
FormFactor tabulated_charge(int particles, std::vector<std::pair<double, double>> rho,
                            const Point& center, double spin_coupling = 0.0);

double gauge_residual(const ModeSet& ms, const FormFactor& ff, std::span<const Point> xs,
                      double step = 1e-5);

enum class CouplingKind { charge, spin };

struct CouplingVector {
  std::vector<cplx> amplitude;   // √w_m λ_j(x; k_m), repeated over γ
  std::vector<Point> direction;  // e_γ(k_m)
  int size() const { return static_cast<int>(amplitude.size()); }
  // Component i as a one-photon vector F_i with (F_i)_mu = amp_mu (e_mu)_i.
  CVector component(int i) const;
};

CouplingVector coupling_vector(const ModeSet& ms, const FormFactor& ff, int j, const Point& x,
                               const Domain& domain, CouplingKind kind = CouplingKind::charge);

// Σ_mu |amp_mu|² = (d-1) Σ_m w_m |λ_j(x;k_m)|².
double coupling_norm2(const CouplingVector& cv);

}  // namespace qclimit
