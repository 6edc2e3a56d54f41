#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "qclimit/common.hpp"
#include "qclimit/field_model.hpp"

namespace qclimit {

// Interior points of [0, L]^d with spacing h = L / cells; Dirichlet outside.
class ParticleGrid {
 public:
  ParticleGrid(int d, int particles, int spin, double length, int cells);

  int dimension() const { return d_; }
  int particles() const { return particles_; }
  int spin() const { return spin_; }
  double length() const { return length_; }
  int cells() const { return cells_; }
  double h() const { return h_; }
  int interior() const { return cells_ - 1; }
  // Single-particle grid size n^d.
  Index points() const { return points_; }
  // Product grid size (n^d)^N.
  Index configurations() const { return configs_; }
  Index dim() const { return configs_ * spin_; }
  Domain domain() const { return {d_, length_}; }

  Point point(Index p) const;
  std::array<int, 3> coords(Index p) const;
  // Neighbor along axis in direction ±1, or -1 at the Dirichlet boundary.
  Index neighbor(Index p, int axis, int dir) const;
  Index nearest(const Point& x) const;

  // Single-particle indices of a product configuration (particle 0 slowest).
  std::vector<Index> split(Index config) const;

  // sigma(j)[i]: s x s matrix for particle j, component i < d.
  const std::vector<CMatrix>& sigma(int j) const { return sigma_[j]; }
  void set_spin_matrices(std::vector<std::vector<CMatrix>> sigma);
  double sigma_norm(int j) const;

 private:
  int d_, particles_, spin_;
  double length_;
  int cells_;
  double h_;
  Index points_, configs_;
  std::vector<std::vector<CMatrix>> sigma_;
};

// Pauli set, first min(d, 3) components.
std::vector<CMatrix> pauli_matrices(int d);

struct Potential {
  std::function<double(std::span<const Point>)> eval;
  std::string description = "zero";

  static Potential zero();
  static Potential harmonic(double strength, const Point& center);
  // strength / sqrt(|x1 - x2|² + a²) between the first two particles
  static Potential soft_coulomb(double strength, double softening);
  double operator()(std::span<const Point> xs) const { return eval ? eval(xs) : 0.0; }
};

}  // namespace qclimit
