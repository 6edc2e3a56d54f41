#include "qclimit/measures.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>

namespace qclimit {

namespace {

// 2 Re <v, F_i> for each spatial component i.
Point real_projection(const CVector& v, const CouplingVector& cv, int d) {
  Point out = Point::Zero();
  for (int mu = 0; mu < cv.size(); ++mu) {
    double re = 2.0 * (std::conj(v[mu]) * cv.amplitude[mu]).real();
    for (int i = 0; i < d; ++i) out[i] += re * cv.direction[mu][i];
  }
  return out;
}

void check_modes(const ModeSet& ms, Index n) {
  if (n != ms.field_modes()) throw InvalidArgument("field vector does not match the mode set");
}

}  // namespace

EffectiveFields EffectiveFields::zeros(const ParticleGrid& grid, Provenance prov) {
  EffectiveFields f;
  f.d = grid.dimension();
  f.particles = grid.particles();
  f.points = grid.points();
  f.provenance = prov;
  f.A.assign(f.particles, Eigen::MatrixXd::Zero(f.points, f.d));
  f.B.assign(f.particles, Eigen::MatrixXd::Zero(f.points, f.d));
  f.W.assign(f.particles, RVector::Zero(f.points));
  f.phi2.assign(f.particles, RVector::Zero(f.points));
  return f;
}

double EffectiveFields::min_W() const {
  double m = 0.0;
  bool first = true;
  for (const auto& w : W) {
    if (w.size() == 0) continue;
    double v = w.minCoeff();
    m = first ? v : std::min(m, v);
    first = false;
  }
  return m;
}

RVector bare_potential(const CVector& z, const FormFactor& ff, const ModeSet& ms,
                       std::span<const Point> X, const Domain& domain) {
  check_modes(ms, z.size());
  const int d = ms.dimension();
  if (static_cast<int>(X.size()) != ff.particles())
    throw InvalidArgument("configuration size does not match the particle count");
  RVector out(d * ff.particles());
  for (int j = 0; j < ff.particles(); ++j) {
    Point b = real_projection(z, coupling_vector(ms, ff, j, X[j], domain), d);
    out.segment(j * d, d) = b.head(d);
  }
  return out;
}

PointFields fields_at(const WignerMeasure& mu, const FormFactor& ff, const ModeSet& ms, int j,
                      const Point& x, const Domain& domain) {
  mu.validate();
  check_modes(ms, mu.points.front().size());
  const int d = ms.dimension();
  CouplingVector cv = coupling_vector(ms, ff, j, x, domain);
  std::vector<Point> bare(mu.size());
  PointFields pf;
  for (int l = 0; l < mu.size(); ++l) {
    bare[l] = real_projection(mu.points[l], cv, d);
    pf.A += mu.weights[l] * bare[l];
    pf.phi2 += mu.weights[l] * bare[l].squaredNorm();
  }
  // centered form keeps W >= 0 without cancellation
  for (int l = 0; l < mu.size(); ++l) pf.W += mu.weights[l] * (bare[l] - pf.A).squaredNorm();
  if (ff.has_spin()) {
    CouplingVector sv = coupling_vector(ms, ff, j, x, domain, CouplingKind::spin);
    for (int l = 0; l < mu.size(); ++l) pf.B += mu.weights[l] * real_projection(mu.points[l], sv, d);
  }
  return pf;
}

PointFields fields_at(const FieldMoments& mom, const FormFactor& ff, const ModeSet& ms, int j,
                      const Point& x, const Domain& domain) {
  check_modes(ms, mom.mean.size());
  const int d = ms.dimension();
  CouplingVector cv = coupling_vector(ms, ff, j, x, domain);
  PointFields pf;
  pf.A = real_projection(mom.mean, cv, d);
  double ccr = mom.eps * coupling_norm2(cv);
  if (mom.coherent) {
    pf.W = ccr;
    pf.phi2 = pf.A.squaredNorm() + ccr;
  } else {
    for (int i = 0; i < d; ++i) {
      CVector f = cv.component(i);
      CVector fc = f.conjugate();
      cplx aa = fc.transpose() * mom.P * fc;
      cplx ada = f.transpose() * mom.N * fc;
      pf.phi2 += 2.0 * aa.real() + 2.0 * ada.real();
    }
    pf.phi2 += ccr;
    pf.W = pf.phi2 - pf.A.squaredNorm();
  }
  if (ff.has_spin()) {
    CouplingVector sv = coupling_vector(ms, ff, j, x, domain, CouplingKind::spin);
    pf.B = real_projection(mom.mean, sv, d);
  }
  return pf;
}

namespace {

template <class Source>
EffectiveFields sample(const Source& src, const FormFactor& ff, const ModeSet& ms,
                       const ParticleGrid& grid, Provenance prov) {
  if (ff.particles() != grid.particles())
    throw InvalidArgument("form factor and grid disagree on the particle count");
  if (ms.dimension() != grid.dimension()) throw InvalidArgument("mode set and grid dimension differ");
  if (ff.has_spin() && grid.spin() == 1)
    throw InvalidArgument("spin couplings given but the grid has s = 1");
  EffectiveFields f = EffectiveFields::zeros(grid, prov);
  f.has_spin = ff.has_spin();
  const int d = grid.dimension();
  const Domain dom = grid.domain();
  for (int j = 0; j < grid.particles(); ++j) {
    for (Index p = 0; p < grid.points(); ++p) {
      PointFields pf = fields_at(src, ff, ms, j, grid.point(p), dom);
      f.A[j].row(p) = pf.A.head(d).transpose();
      f.B[j].row(p) = pf.B.head(d).transpose();
      f.W[j][p] = pf.W;
      f.phi2[j][p] = pf.phi2;
    }
  }
  return f;
}

}  // namespace

EffectiveFields effective_fields_mu(const WignerMeasure& mu, const FormFactor& ff,
                                    const ModeSet& ms, const ParticleGrid& grid) {
  mu.validate();
  return sample(mu, ff, ms, grid, Provenance::measure);
}

double field_energy(const WignerMeasure& mu, const ModeSet& ms) {
  mu.validate();
  check_modes(ms, mu.points.front().size());
  RVector w = ms.field_omegas();
  double c = 0.0;
  for (int l = 0; l < mu.size(); ++l)
    c += mu.weights[l] * (w.array() * mu.points[l].array().abs2()).sum();
  return c;
}

EffectiveFields effective_fields_eps(const CVector& state, const FockSpace& fs,
                                     const FormFactor& ff, const ModeSet& ms,
                                     const ParticleGrid& grid) {
  if (std::abs(state.norm() - 1.0) > 1e-10) throw InvalidArgument("state is not normalized");
  check_modes(ms, fs.modes());
  return effective_fields_moments(state_moments(fs, state), ff, ms, grid);
}

EffectiveFields effective_fields_moments(const FieldMoments& mom, const FormFactor& ff,
                                         const ModeSet& ms, const ParticleGrid& grid) {
  EffectiveFields f = sample(mom, ff, ms, grid, Provenance::state);
  f.eps = mom.eps;
  return f;
}

PolySymbol field_energy_symbol(const ModeSet& ms) {
  CMatrix t = ms.field_omegas().cast<cplx>().asDiagonal();
  return PolySymbol::quadratic(t, "field-energy");
}

nlohmann::json measure_to_json(const WignerMeasure& mu) {
  nlohmann::json pts = nlohmann::json::array();
  for (int l = 0; l < mu.size(); ++l) {
    std::vector<double> re(mu.points[l].size()), im(mu.points[l].size());
    for (Index i = 0; i < mu.points[l].size(); ++i) {
      re[i] = mu.points[l][i].real();
      im[i] = mu.points[l][i].imag();
    }
    pts.push_back({{"weight", mu.weights[l]}, {"re", re}, {"im", im}});
  }
  return {{"points", pts}};
}

WignerMeasure measure_from_json(const nlohmann::json& j) {
  WignerMeasure mu;
  try {
    for (const auto& p : j.at("points")) {
      auto re = p.at("re").get<std::vector<double>>();
      auto im = p.value("im", std::vector<double>(re.size(), 0.0));
      if (re.size() != im.size()) throw InvalidArgument("measure point re/im lengths differ");
      CVector z(re.size());
      for (std::size_t i = 0; i < re.size(); ++i) z[i] = cplx(re[i], im[i]);
      mu.points.push_back(z);
      mu.weights.push_back(p.at("weight").get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("bad measure JSON: ") + e.what());
  }
  mu.validate();
  return mu;
}

void write_fields_csv(const std::string& path, const EffectiveFields& f, const ParticleGrid& grid) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  const int d = f.d;
  std::string header;
  for (int i = 0; i < d; ++i) header += fmt::format("{}x{}", i ? "," : "", i);
  for (int j = 0; j < f.particles; ++j) {
    for (int i = 0; i < d; ++i) header += fmt::format(",A{}_{}", j, i);
    for (int i = 0; i < d; ++i) header += fmt::format(",B{}_{}", j, i);
    header += fmt::format(",W{},phi2_{}", j, j);
  }
  out << header << '\n';
  for (Index p = 0; p < f.points; ++p) {
    Point x = grid.point(p);
    std::string row;
    for (int i = 0; i < d; ++i) row += fmt::format("{}{:.17g}", i ? "," : "", x[i]);
    for (int j = 0; j < f.particles; ++j) {
      for (int i = 0; i < d; ++i) row += fmt::format(",{:.17g}", f.A[j](p, i));
      for (int i = 0; i < d; ++i) row += fmt::format(",{:.17g}", f.B[j](p, i));
      row += fmt::format(",{:.17g},{:.17g}", f.W[j][p], f.phi2[j][p]);
    }
    out << row << '\n';
  }
  if (!out) throw IoError("short write to " + path);
}

}  // namespace qclimit
