#include "qclimit/grid.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace qclimit {

ParticleGrid::ParticleGrid(int d, int particles, int spin, double length, int cells)
    : d_(d), particles_(particles), spin_(spin), length_(length), cells_(cells) {
  if (d != 2 && d != 3) throw InvalidArgument("grid dimension must be 2 or 3");
  if (particles < 1) throw InvalidArgument("grid needs at least one particle");
  if (spin < 1) throw InvalidArgument("spin multiplicity must be >= 1");
  if (!(length > 0.0)) throw InvalidArgument("box length must be positive");
  if (cells < 2) throw InvalidArgument("grid needs at least two cells per side");
  h_ = length / cells;
  points_ = 1;
  for (int i = 0; i < d; ++i) points_ *= (cells - 1);
  configs_ = 1;
  for (int j = 0; j < particles; ++j) configs_ *= points_;
  if (spin == 2) {
    sigma_.assign(particles, pauli_matrices(d));
  } else if (spin > 2) {
    // no default spin representation beyond s = 2; zero until configured
    sigma_.assign(particles, std::vector<CMatrix>(d, CMatrix::Zero(spin, spin)));
  }
}

Point ParticleGrid::point(Index p) const {
  auto c = coords(p);
  Point x = Point::Zero();
  for (int i = 0; i < d_; ++i) x[i] = (c[i] + 1) * h_;
  return x;
}

std::array<int, 3> ParticleGrid::coords(Index p) const {
  std::array<int, 3> c{0, 0, 0};
  const int n = interior();
  for (int i = d_ - 1; i >= 0; --i) {
    c[i] = static_cast<int>(p % n);
    p /= n;
  }
  return c;
}

Index ParticleGrid::neighbor(Index p, int axis, int dir) const {
  auto c = coords(p);
  int v = c[axis] + dir;
  if (v < 0 || v >= interior()) return -1;
  Index stride = 1;
  for (int i = d_ - 1; i > axis; --i) stride *= interior();
  return p + dir * stride;
}

Index ParticleGrid::nearest(const Point& x) const {
  Index p = 0;
  for (int i = 0; i < d_; ++i) {
    int c = static_cast<int>(std::lround(x[i] / h_)) - 1;
    c = std::clamp(c, 0, interior() - 1);
    p = p * interior() + c;
  }
  return p;
}

std::vector<Index> ParticleGrid::split(Index config) const {
  std::vector<Index> out(particles_);
  for (int j = particles_ - 1; j >= 0; --j) {
    out[j] = config % points_;
    config /= points_;
  }
  return out;
}

void ParticleGrid::set_spin_matrices(std::vector<std::vector<CMatrix>> sigma) {
  if (spin_ == 1) {
    if (!sigma.empty()) throw InvalidArgument("spin matrices given for s = 1");
    return;
  }
  if (static_cast<int>(sigma.size()) != particles_) throw InvalidArgument("need spin matrices per particle");
  for (const auto& per : sigma) {
    if (static_cast<int>(per.size()) != d_) throw InvalidArgument("need d spin matrices per particle");
    for (const auto& m : per) {
      if (m.rows() != spin_ || m.cols() != spin_) throw InvalidArgument("spin matrix has wrong size");
      if ((m - m.adjoint()).norm() > 1e-13 * std::max(1.0, m.norm()))
        throw InvalidArgument("spin matrix is not hermitian");
    }
  }
  sigma_ = std::move(sigma);
}

double ParticleGrid::sigma_norm(int j) const {
  if (spin_ == 1) return 0.0;
  // |σ·B| <= sqrt(Σ_i |σ_i|²) |B| by Cauchy-Schwarz
  double s = 0.0;
  for (const auto& m : sigma_[j]) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(m);
    double n = es.eigenvalues().cwiseAbs().maxCoeff();
    s += n * n;
  }
  return std::sqrt(s);
}

std::vector<CMatrix> pauli_matrices(int d) {
  CMatrix sx(2, 2), sy(2, 2), sz(2, 2);
  sx << 0, 1, 1, 0;
  sy << 0, cplx(0, -1), cplx(0, 1), 0;
  sz << 1, 0, 0, -1;
  std::vector<CMatrix> all{sx, sy, sz};
  all.resize(std::min(d, 3));
  return all;
}

Potential Potential::zero() { return {}; }

Potential Potential::harmonic(double strength, const Point& center) {
  Potential v;
  v.description = "harmonic";
  v.eval = [strength, center](std::span<const Point> xs) {
    double s = 0.0;
    for (const Point& x : xs) s += strength * (x - center).squaredNorm();
    return s;
  };
  return v;
}

Potential Potential::soft_coulomb(double strength, double softening) {
  Potential v;
  v.description = "soft-coulomb";
  v.eval = [strength, softening](std::span<const Point> xs) {
    if (xs.size() < 2) return 0.0;
    return strength / std::sqrt((xs[0] - xs[1]).squaredNorm() + softening * softening);
  };
  return v;
}

}  // namespace qclimit
