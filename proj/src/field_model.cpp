#include <Eigen/Geometry>
#include "qclimit/field_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numbers>
#include <sstream>

namespace qclimit {

DispersionRule DispersionRule::massless() { return {}; }

DispersionRule DispersionRule::massive(double mass) {
  if (!(mass >= 0.0)) throw InvalidArgument("massive dispersion needs a nonnegative mass");
  DispersionRule r;
  r.kind = DispersionKind::massive;
  r.mass = mass;
  return r;
}

DispersionRule DispersionRule::from_table(std::vector<std::pair<double, double>> rows) {
  if (rows.size() < 2) throw InvalidArgument("dispersion table needs at least two rows");
  std::sort(rows.begin(), rows.end());
  for (auto& [k, w] : rows)
    if (!(k >= 0.0) || !(w > 0.0)) throw InvalidArgument("dispersion table: need k >= 0, ω > 0");
  DispersionRule r;
  r.kind = DispersionKind::table;
  r.table = std::move(rows);
  return r;
}

DispersionRule DispersionRule::from_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dispersion table " + path);
  std::vector<std::pair<double, double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double k, w;
    if (!(ls >> k >> w)) continue;  // header
    rows.emplace_back(k, w);
  }
  return from_table(std::move(rows));
}

double DispersionRule::operator()(double k) const {
  switch (kind) {
    case DispersionKind::massless:
      return k;
    case DispersionKind::massive:
      return std::sqrt(k * k + mass * mass);
    case DispersionKind::table: {
      if (k < table.front().first || k > table.back().first)
        throw InvalidArgument("|k| outside dispersion table range");
      auto it = std::lower_bound(table.begin(), table.end(), std::make_pair(k, -1.0));
      if (it == table.begin()) return it->second;
      auto lo = std::prev(it);
      double t = (k - lo->first) / (it->first - lo->first);
      return lo->second + t * (it->second - lo->second);
    }
  }
  return 0.0;
}

bool Domain::contains(const Point& x, double slack) const {
  for (int i = 0; i < 3; ++i) {
    if (i < d) {
      if (x[i] < -slack || x[i] > length + slack) return false;
    } else if (x[i] != 0.0) {
      return false;
    }
  }
  return true;
}

std::vector<Point> polarization_frame(int d, const Point& k) {
  double kn = k.norm();
  if (kn == 0.0) throw InvalidArgument("polarization frame undefined at k = 0");
  Point kh = k / kn;
  if (d == 2) return {Point(-kh.y(), kh.x(), 0.0)};
  Point e1 = kh.cross(Point::UnitZ());
  if (e1.norm() < 1e-12)
    e1 = Point::UnitX();
  else
    e1.normalize();
  Point e2 = kh.cross(e1);
  return {e1, e2.normalized()};
}

ModeSet ModeSet::from_nodes(int d, std::vector<Point> nodes, std::vector<double> weights,
                            const DispersionRule& rule) {
  if (d != 2 && d != 3) throw InvalidArgument("mode set dimension must be 2 or 3");
  if (nodes.empty()) throw InvalidArgument("mode set needs at least one node");
  if (nodes.size() != weights.size()) throw InvalidArgument("nodes and weights differ in length");
  ModeSet ms;
  ms.d_ = d;
  for (std::size_t m = 0; m < nodes.size(); ++m) {
    Point k = nodes[m];
    if (d == 2 && k.z() != 0.0) throw InvalidArgument("2D node with a z component");
    if (k.norm() == 0.0) throw InvalidArgument("zero-radius node (infrared singular)");
    if (!(weights[m] > 0.0)) throw InvalidArgument("quadrature weights must be positive");
    double w = rule(k.norm());
    if (!(w > 0.0)) throw InvalidArgument("dispersion must be positive at every node");
    ms.omegas_.push_back(w);
    for (const Point& e : polarization_frame(d, k)) ms.frames_.push_back(e);
  }
  ms.nodes_ = std::move(nodes);
  ms.weights_ = std::move(weights);
  return ms;
}

RVector ModeSet::field_omegas() const {
  RVector out(field_modes());
  for (int mu = 0; mu < field_modes(); ++mu) out[mu] = omegas_[mode_of(mu)];
  return out;
}

double ModeSet::total_weight() const {
  double s = 0.0;
  for (double w : weights_) s += w;
  return s;
}

std::uint64_t ModeSet::hash() const {
  std::uint64_t h = fnv1a(&d_, sizeof d_);
  for (int m = 0; m < size(); ++m) {
    h = fnv1a(nodes_[m].data(), 3 * sizeof(double), h);
    h = fnv1a(&weights_[m], sizeof(double), h);
    h = fnv1a(&omegas_[m], sizeof(double), h);
  }
  return h;
}

namespace {

// Cell boundaries around sorted radial nodes: midpoints inside, half spacing at the ends.
std::vector<double> radial_bounds(const std::vector<double>& r) {
  std::size_t n = r.size();
  std::vector<double> b(n + 1);
  if (n == 1) {
    b[0] = 0.5 * r[0];
    b[1] = 1.5 * r[0];
    return b;
  }
  for (std::size_t i = 1; i < n; ++i) b[i] = 0.5 * (r[i - 1] + r[i]);
  b[0] = std::max(0.0, r[0] - 0.5 * (r[1] - r[0]));
  b[n] = r[n - 1] + 0.5 * (r[n - 1] - r[n - 2]);
  return b;
}

}  // namespace

ModeSet build_mode_set(int d, std::span<const double> radial_nodes, int angular_resolution,
                       const DispersionRule& rule) {
  if (d != 2 && d != 3) throw InvalidArgument("mode set dimension must be 2 or 3");
  if (angular_resolution < 1) throw InvalidArgument("angular_resolution must be >= 1");
  if (radial_nodes.empty()) throw InvalidArgument("need at least one radial node");
  std::vector<double> r(radial_nodes.begin(), radial_nodes.end());
  for (double v : r)
    if (!(v > 0.0)) throw InvalidArgument("zero-radius node (infrared singular)");
  std::sort(r.begin(), r.end());
  if (std::adjacent_find(r.begin(), r.end()) != r.end())
    throw InvalidArgument("duplicate radial node");
  auto b = radial_bounds(r);
  const double pi = std::numbers::pi;

  std::vector<Point> nodes;
  std::vector<double> weights;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (d == 2) {
      double shell = pi * (b[i + 1] * b[i + 1] - b[i] * b[i]);
      for (int a = 0; a < angular_resolution; ++a) {
        double th = 2.0 * pi * a / angular_resolution;
        nodes.emplace_back(r[i] * std::cos(th), r[i] * std::sin(th), 0.0);
        weights.push_back(shell / angular_resolution);
      }
    } else {
      double shell = 4.0 / 3.0 * pi * (std::pow(b[i + 1], 3) - std::pow(b[i], 3));
      int nt = angular_resolution, np = 2 * angular_resolution;
      for (int t = 0; t < nt; ++t) {
        // midpoint rule in cos θ gives equal solid angles
        double ct = 1.0 - (2.0 * t + 1.0) / nt;
        double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
        for (int p = 0; p < np; ++p) {
          double ph = 2.0 * pi * p / np;
          nodes.emplace_back(r[i] * st * std::cos(ph), r[i] * st * std::sin(ph), r[i] * ct);
          weights.push_back(shell / (nt * np));
        }
      }
    }
  }
  return ModeSet::from_nodes(d, std::move(nodes), std::move(weights), rule);
}

FormFactor gaussian_charge(int particles, double charge, double sigma, const Point& center,
                           double spin_coupling) {
  if (particles < 1) throw InvalidArgument("need at least one particle");
  FormFactor ff;
  ff.label = "gaussian-charge";
  auto lam = [charge, sigma, center](const Point& x, const Point& k, double omega) {
    double rho = charge * std::exp(-0.5 * k.squaredNorm() * sigma * sigma);
    return rho / std::sqrt(omega) * std::polar(1.0, -k.dot(x - center));
  };
  ff.lambda.assign(particles, lam);
  if (spin_coupling != 0.0) {
    auto b = [lam, spin_coupling](const Point& x, const Point& k, double omega) {
      return spin_coupling * lam(x, k, omega);
    };
    ff.spin.assign(particles, b);
  }
  return ff;
}

FormFactor constant_coupling(int particles, double charge, double spin_coupling) {
  if (particles < 1) throw InvalidArgument("need at least one particle");
  FormFactor ff;
  ff.label = "constant";
  ff.plane_wave = false;
  ff.lambda.assign(particles, [charge](const Point&, const Point&, double omega) {
    return cplx(charge / std::sqrt(omega), 0.0);
  });
  if (spin_coupling != 0.0)
    ff.spin.assign(particles, [charge, spin_coupling](const Point&, const Point&, double omega) {
      return cplx(spin_coupling * charge / std::sqrt(omega), 0.0);
    });
  return ff;
}

FormFactor tabulated_charge(int particles, std::vector<std::pair<double, double>> rho,
                            const Point& center, double spin_coupling) {
  if (particles < 1) throw InvalidArgument("need at least one particle");
  // Reuse the dispersion interpolator for ρ(|k|); it enforces sorted, positive rows.
  auto table = std::make_shared<DispersionRule>(DispersionRule::from_table(std::move(rho)));
  FormFactor ff;
  ff.label = "custom-table";
  auto lam = [table, center](const Point& x, const Point& k, double omega) {
    return (*table)(k.norm()) / std::sqrt(omega) * std::polar(1.0, -k.dot(x - center));
  };
  ff.lambda.assign(particles, lam);
  if (spin_coupling != 0.0)
    ff.spin.assign(particles, [lam, spin_coupling](const Point& x, const Point& k, double w) {
      return spin_coupling * lam(x, k, w);
    });
  return ff;
}

double gauge_residual(const ModeSet& ms, const FormFactor& ff, std::span<const Point> xs,
                      double step) {
  const int d = ms.dimension();
  double worst = 0.0;
  for (int j = 0; j < ff.particles(); ++j) {
    const auto& lam = ff.lambda[j];
    for (const Point& x : xs) {
      for (int m = 0; m < ms.size(); ++m) {
        const Point& k = ms.node(m);
        double w = ms.omega(m);
        Eigen::Vector3cd grad = Eigen::Vector3cd::Zero();
        for (int i = 0; i < d; ++i) {
          Point xp = x, xm = x;
          xp[i] += step;
          xm[i] -= step;
          grad[i] = (lam(xp, k, w) - lam(xm, k, w)) / (2.0 * step);
        }
        for (int g = 0; g < ms.polarizations(); ++g) {
          Eigen::Vector3cd e = ms.polarization(m, g).cast<cplx>();
          worst = std::max(worst, std::abs(grad.dot(e)));
        }
      }
    }
  }
  return worst;
}

CVector CouplingVector::component(int i) const {
  CVector f(size());
  for (int mu = 0; mu < size(); ++mu) f[mu] = amplitude[mu] * direction[mu][i];
  return f;
}

CouplingVector coupling_vector(const ModeSet& ms, const FormFactor& ff, int j, const Point& x,
                               const Domain& domain, CouplingKind kind) {
  if (j < 0 || j >= ff.particles()) throw InvalidArgument("particle index out of range");
  if (!domain.contains(x)) throw InvalidArgument("point outside the particle domain");
  CouplingVector cv;
  const int P = ms.polarizations();
  cv.amplitude.resize(ms.field_modes());
  cv.direction.resize(ms.field_modes());
  const FormFactor::Evaluator* ev = nullptr;
  if (kind == CouplingKind::charge)
    ev = &ff.lambda[j];
  else if (ff.has_spin())
    ev = &ff.spin[j];
  for (int m = 0; m < ms.size(); ++m) {
    cplx a = ev ? std::sqrt(ms.weight(m)) * (*ev)(x, ms.node(m), ms.omega(m)) : cplx(0.0);
    for (int g = 0; g < P; ++g) {
      cv.amplitude[m * P + g] = a;
      cv.direction[m * P + g] = ms.polarization(m, g);
    }
  }
  return cv;
}

double coupling_norm2(const CouplingVector& cv) {
  double s = 0.0;
  for (const cplx& a : cv.amplitude) s += std::norm(a);
  return s;
}

}  // namespace qclimit
