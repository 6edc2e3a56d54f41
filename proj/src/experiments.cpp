#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <random>
#include <thread>

#include <fmt/format.h>
#include <Eigen/Eigenvalues>
#include <gsl/gsl_multimin.h>

#include "qclimit/experiments.hpp"
#include "qclimit/spectral.hpp"

namespace qclimit {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t row_seed(std::uint64_t seed, std::size_t row) { return splitmix(seed ^ splitmix(row + 1)); }

int resolve_threads(int requested, std::size_t jobs) {
  int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  int t = requested > 0 ? requested : hw;
  return std::max(1, std::min<int>(t, static_cast<int>(jobs)));
}

// Runs fn(i) for i < n on a small pool. Results must be stored by index; the exception of
// the lowest failing index is rethrown so failures do not depend on scheduling.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  if (n == 0) return;
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  int t = resolve_threads(threads, n);
  if (t == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int k = 0; k < t; ++k) pool.emplace_back(work);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

Point box_center(const GridSpec& g) {
  Point c = Point::Zero();
  for (int i = 0; i < g.dimension; ++i) c[i] = 0.5 * g.length;
  return c;
}

// 5 x 5 lattice in the plane through the center.
std::vector<Point> probe_lattice(const Point& center, double half_width) {
  std::vector<Point> out;
  for (int a = 0; a < 5; ++a)
    for (int b = 0; b < 5; ++b) {
      Point p = center;
      p[0] += half_width * (a - 2) / 2.0;
      p[1] += half_width * (b - 2) / 2.0;
      out.push_back(p);
    }
  return out;
}

double min_potential(const Potential& V, const ParticleGrid& grid) {
  double m = std::numeric_limits<double>::infinity();
  std::vector<Point> xs(grid.particles());
  for (Index c = 0; c < grid.configurations(); ++c) {
    auto idx = grid.split(c);
    for (int j = 0; j < grid.particles(); ++j) xs[j] = grid.point(idx[j]);
    m = std::min(m, V(xs));
  }
  return m;
}

// Σ_j Σ_i ||σ_{j,i}|| sup_x ||ω^{-1/2} G_{j,i}(x)||: |<σ·B>| <= 2 S sqrt(c) for any state.
double spin_coupling_scale(const ModeSet& ms, const FormFactor& ff, const ParticleGrid& grid) {
  if (!ff.has_spin()) return 0.0;
  const int d = grid.dimension();
  RVector w = ms.field_omegas();
  double s = 0.0;
  for (int j = 0; j < grid.particles(); ++j) {
    for (int i = 0; i < d; ++i) {
      double sup = 0.0;
      for (Index p = 0; p < grid.points(); ++p) {
        CouplingVector g = coupling_vector(ms, ff, j, grid.point(p), grid.domain(), CouplingKind::spin);
        double n2 = 0.0;
        for (int mu = 0; mu < g.size(); ++mu) n2 += std::norm(g.amplitude[mu] * g.direction[mu][i]) / w[mu];
        sup = std::max(sup, std::sqrt(n2));
      }
      double sn = grid.sigma(j)[i].operatorNorm();
      s += sn * sup;
    }
  }
  return s;
}

double field_energy_of(const FieldMoments& m, const ModeSet& ms) {
  RVector w = ms.field_omegas();
  if (m.coherent) return (w.array() * m.mean.array().abs2()).sum();
  double c = 0.0;
  for (int mu = 0; mu < w.size(); ++mu) c += w[mu] * m.N(mu, mu).real();
  return c;
}

bool has_key(const json& raw, const char* table, const char* key) {
  return raw.contains(table) && raw[table].is_object() && raw[table].contains(key);
}

// ---- convergence -------------------------------------------------------------------------

struct Family {
  WignerMeasure limit;
  CVector z;                     // coherent
  std::vector<BranchSpec> branches;  // superposition
};

Family make_family(const ExperimentConfig& cfg, const ModeSet& ms) {
  const int M = ms.field_modes();
  const auto& st = cfg.state;
  Family f;
  if (st.family == "coherent") {
    if (st.z) {
      if (st.z->size() != M)
        throw ConfigError(fmt::format("state.z has {} entries, the mode set has {} field modes",
                                      st.z->size(), M));
      f.z = *st.z;
    } else {
      std::mt19937_64 rng(row_seed(cfg.seed, 0xC0));
      std::normal_distribution<double> g(0.0, st.z_scale);
      f.z.resize(M);
      for (int mu = 0; mu < M; ++mu) f.z[mu] = {g(rng), g(rng)};
    }
    f.limit = WignerMeasure::point_mass(f.z);
  } else if (st.family == "number") {
    if (st.mode < 0 || st.mode >= M)
      throw ConfigError(fmt::format("state.mode must lie in [0, {})", M));
    CVector z0 = CVector::Zero(M);
    z0[st.mode] = std::sqrt(st.product);
    f.limit = WignerMeasure::circle(z0, st.circle_points);
  } else {
    double total = 0.0;
    for (const auto& b : st.branches) {
      if (b.z.size() != M) throw ConfigError("a superposition branch does not match the mode set");
      total += std::norm(b.zeta);
    }
    if (!(total > 0.0)) throw ConfigError("superposition amplitudes are all zero");
    for (std::size_t a = 0; a < st.branches.size(); ++a)
      for (std::size_t b = 0; b < a; ++b)
        if ((st.branches[a].z - st.branches[b].z).norm() == 0.0)
          throw ConfigError("superposition branches must have distinct z");
    f.branches = st.branches;
    for (const auto& b : st.branches) {
      f.limit.weights.push_back(std::norm(b.zeta) / total);
      f.limit.points.push_back(b.z);
    }
  }
  return f;
}

struct RowPlan {
  int n_max = 0;
  Index fock_dim = -1;  // -1 when the truncation overflows
  bool fock = false;
};

int family_n_max(const ExperimentConfig& cfg, const Family& f, double eps) {
  const auto& st = cfg.state;
  if (st.family == "coherent") return required_n_max(f.z.squaredNorm() / eps, st.tail_tol);
  if (st.family == "number") return static_cast<int>(std::lround(st.product / eps));
  int n = 0;
  for (const auto& b : f.branches) n = std::max(n, required_n_max(b.z.squaredNorm() / eps, st.tail_tol));
  return n;
}

RowPlan plan_row(const ExperimentConfig& cfg, const Family& f, int modes, double eps) {
  RowPlan p;
  p.n_max = family_n_max(cfg, f, eps);
  p.fock_dim = FockSpace::dimension_for(modes, p.n_max);
  bool fits = p.fock_dim >= 0 && p.fock_dim <= cfg.solver.max_fock_dim;
  const auto& rep = cfg.state.representation;
  p.fock = rep == "fock" || (rep == "auto" && fits);
  if (rep == "fock" && !fits) {
    // the dimension shrinks monotonically with ε; bisect for the feasibility edge
    auto ok = [&](double e) {
      Index dim = FockSpace::dimension_for(modes, family_n_max(cfg, f, e));
      return dim >= 0 && dim <= cfg.solver.max_fock_dim;
    };
    std::string hint = "no ε below 1 fits the budget";
    if (ok(0.999)) {
      double lo = eps, hi = 0.999;
      for (int it = 0; it < 60; ++it) {
        double mid = std::sqrt(lo * hi);
        (ok(mid) ? hi : lo) = mid;
      }
      std::string in_schedule = "none";
      for (double e : cfg.eps)
        if (ok(e)) in_schedule = fmt::format("{:.6g}", e);
      hint = fmt::format("smallest feasible ε is {:.6g} (smallest feasible in the schedule: {})", hi,
                         in_schedule);
    }
    throw TruncationError(
        fmt::format("Fock truncation N_max = {} at ε = {:.6g} exceeds max_fock_dim = {}; {}", p.n_max,
                    eps, cfg.solver.max_fock_dim, hint),
        p.n_max);
  }
  return p;
}

FieldMoments row_moments(const ExperimentConfig& cfg, const Family& f, int modes, double eps,
                         const RowPlan& plan) {
  const auto& st = cfg.state;
  if (plan.fock) {
    auto fs = FockSpace::create(modes, plan.n_max, eps);
    CVector psi;
    if (st.family == "coherent") {
      psi = coherent_state(*fs, {f.z}, st.tail_tol);
    } else if (st.family == "number") {
      std::vector<int> occ(modes, 0);
      occ[st.mode] = plan.n_max;
      psi = number_state(*fs, occ);
    } else {
      psi = CVector::Zero(fs->dim());
      for (const auto& b : f.branches) psi += b.zeta * coherent_state(*fs, {b.z}, st.tail_tol);
      psi.normalize();
    }
    return state_moments(*fs, psi);
  }
  if (st.family == "coherent") return coherent_moments(f.z, eps);
  FieldMoments m;
  m.eps = eps;
  m.mean = CVector::Zero(modes);
  m.N = CMatrix::Zero(modes, modes);
  m.P = CMatrix::Zero(modes, modes);
  if (st.family == "number") {
    m.N(st.mode, st.mode) = eps * plan.n_max;
    return m;
  }
  // superposition Σ ζ_j Ξ(z_j): every moment is a double sum over branch pairs
  cplx norm = 0.0;
  for (const auto& bj : f.branches)
    for (const auto& bk : f.branches) {
      cplx w = std::conj(bj.zeta) * bk.zeta * coherent_overlap(bj.z, bk.z, eps);
      norm += w;
      m.mean += w * bk.z;
      m.N += w * bj.z.conjugate() * bk.z.transpose();
      m.P += w * bk.z * bk.z.transpose();
    }
  m.mean /= norm;
  m.N /= norm;
  m.P /= norm;
  return m;
}

}  // namespace

RunResult run_convergence(const ExperimentConfig& cfg) {
  auto t0 = Clock::now();
  ModeSet ms = make_mode_set(cfg.modes);
  FormFactor ff = make_form_factor(cfg.form_factor, cfg.grid);
  ParticleGrid grid = make_grid(cfg.grid);
  Potential V = make_potential(cfg.potential, cfg.grid);
  const int M = ms.field_modes();
  const int k = cfg.solver.eig_count;
  const Domain dom = grid.domain();

  Family fam = make_family(cfg, ms);
  std::vector<RowPlan> plans;
  for (double e : cfg.eps) plans.push_back(plan_row(cfg, fam, M, e));

  EffectiveFields limit_fields = effective_fields_mu(fam.limit, ff, ms, grid);
  MSOOperator heff = assemble_effective(limit_fields, V, grid);
  EigenOptions eopt;
  eopt.seed = row_seed(cfg.seed, 0xEF);
  SpectralReport limit_spec = lowest_eigs(heff, k, cfg.solver.eig_tol, eopt);
  const double xi_fixed = cfg.solver.xi.value_or(default_xi(limit_spec.eigenvalues[0]));

  Point c = box_center(cfg.grid);
  std::vector<Point> probes;
  for (int a = 0; a < 5; ++a)
    for (int b = 0; b < 5; ++b) {
      Point p = c;
      p[0] = (a + 1) / 6.0 * cfg.grid.length;
      p[1] = (b + 1) / 6.0 * cfg.grid.length;
      probes.push_back(p);
    }
  std::vector<std::vector<PointFields>> limit_probe(grid.particles());
  for (int j = 0; j < grid.particles(); ++j)
    for (const auto& x : probes) limit_probe[j].push_back(fields_at(fam.limit, ff, ms, j, x, dom));
  const double coupling_probe = coupling_norm2(coupling_vector(ms, ff, 0, probes[0], dom));

  std::vector<std::string> cols{"eps", "n_max", "fock_dim", "c_eps"};
  for (int i = 0; i < k; ++i) cols.push_back(fmt::format("lambda_{}", i));
  for (auto s : {"xi", "resolvent_gap", "A_err", "B_err", "phi2_err", "W_probe", "coupling_norm2_probe"})
    cols.push_back(s);

  const std::size_t n = cfg.eps.size();
  std::vector<std::vector<double>> rows(n);
  std::vector<double> row_secs(n);
  parallel_for(n, cfg.solver.threads, [&](std::size_t r) {
    auto tr = Clock::now();
    const double eps = cfg.eps[r];
    FieldMoments mom = row_moments(cfg, fam, M, eps, plans[r]);
    MSOOperator heps = assemble_Heps(mom, ff, ms, V, grid);
    EigenOptions o;
    o.seed = row_seed(cfg.seed, 2 * r);
    SpectralReport sp = lowest_eigs(heps, k, cfg.solver.eig_tol, o);
    GapOptions g;
    g.max_iterations = cfg.solver.gap_iterations;
    g.seed = row_seed(cfg.seed, 2 * r + 1);
    double xi = std::max(xi_fixed, default_xi(sp.eigenvalues[0]));
    double gap = resolvent_gap(heps, heff, xi, cfg.solver.probes, cfg.solver.resolvent_tol, g);

    double aerr = 0.0, berr = 0.0, perr = 0.0, wprobe = 0.0;
    for (int j = 0; j < grid.particles(); ++j)
      for (std::size_t q = 0; q < probes.size(); ++q) {
        PointFields pe = fields_at(mom, ff, ms, j, probes[q], dom);
        const PointFields& pl = limit_probe[j][q];
        aerr = std::max(aerr, (pe.A - pl.A).norm());
        berr = std::max(berr, (pe.B - pl.B).norm());
        perr = std::max(perr, std::abs(pe.phi2 - pl.phi2));
        if (j == 0 && q == 0) wprobe = pe.W;
      }
    std::vector<double> row{eps, double(plans[r].n_max), plans[r].fock ? double(plans[r].fock_dim) : 0.0,
                            field_energy_of(mom, ms)};
    for (double e : sp.eigenvalues) row.push_back(e);
    for (double v : {xi, gap, aerr, berr, perr, wprobe, coupling_probe}) row.push_back(v);
    rows[r] = std::move(row);
    row_secs[r] = seconds_since(tr);
  });

  Report rep;
  rep.kind = "convergence";
  rep.columns = cols;
  rep.rows = rows;
  std::vector<double> limit_row{0.0, 0.0, 0.0, field_energy(fam.limit, ms)};
  for (double e : limit_spec.eigenvalues) limit_row.push_back(e);
  for (double v : {xi_fixed, 0.0, 0.0, 0.0, 0.0, limit_probe[0][0].W, coupling_probe})
    limit_row.push_back(v);
  rep.rows.push_back(limit_row);

  // fits over the finite-ε rows
  std::vector<double> le, lg, ev, wv, pv;
  double cmax = field_energy(fam.limit, ms), lmin = limit_spec.eigenvalues[0];
  for (const auto& row : rows) {
    double eps = row[0], gap = row[rep.column("resolvent_gap")];
    if (gap > 0.0) {
      le.push_back(std::log(eps));
      lg.push_back(std::log(gap));
    }
    ev.push_back(eps);
    wv.push_back(row[rep.column("W_probe")]);
    pv.push_back(row[rep.column("phi2_err")]);
    cmax = std::max(cmax, row[3]);
    lmin = std::min(lmin, row[4]);
  }
  json s;
  s["family"] = cfg.state.family;
  s["field_modes"] = M;
  s["grid_cells"] = cfg.grid.cells;
  if (le.size() >= 2) {
    LinearFit f = fit_line(le, lg);
    s["gap_fit"] = {{"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r2}};
  }
  std::vector<double> ratios;
  for (std::size_t r = 1; r < rows.size(); ++r)
    ratios.push_back(rows[r][rep.column("resolvent_gap")] / rows[r - 1][rep.column("resolvent_gap")]);
  s["gap_ratios"] = ratios;
  if (ev.size() >= 2) {
    LinearFit fw = fit_line(ev, wv);
    s["variance_fit"] = {{"slope", fw.slope},
                         {"intercept", fw.intercept},
                         {"r2", fw.r2},
                         {"expected_slope", coupling_probe},
                         {"relative_slope_error", std::abs(fw.slope - coupling_probe) / coupling_probe}};
    LinearFit fp = fit_line(ev, pv);
    s["phi2_discrepancy_fit"] = {{"slope", fp.slope}, {"intercept", fp.intercept}, {"r2", fp.r2}};
  }
  const double S = spin_coupling_scale(ms, ff, grid);
  const double C = 2.0 * S * std::sqrt(cmax) + std::max(0.0, -min_potential(V, grid));
  s["lower_bound"] = {{"C", C}, {"spin_scale", S}, {"c_eps_max", cmax}, {"min_lambda_0", lmin},
                      {"holds", lmin >= -C}};
  s["limit_c"] = field_energy(fam.limit, ms);
  rep.summary = s;

  RunResult out{rep, {}};
  out.meta.command = "convergence";
  out.meta.config_hash = cfg.hash;
  out.meta.row_seconds = row_secs;
  out.meta.threads = resolve_threads(cfg.solver.threads, n);
  out.meta.seconds = seconds_since(t0);
  return out;
}

// ---- uniform field -------------------------------------------------------------------------

RunResult run_uniform_field(const ExperimentConfig& cfg) {
  auto t0 = Clock::now();
  const auto& uf = cfg.uniform_field;
  GridSpec gs = cfg.grid;
  if (!has_key(cfg.raw, "grid", "length")) gs.length = 12.0;
  if (!has_key(cfg.raw, "grid", "cells")) gs.cells = 96;
  if (gs.dimension != 2)
    throw ConfigError("uniform-field runs in the plane only (grid.dimension = 2)");
  if (gs.particles != 1) throw ConfigError("uniform-field needs a single particle");
  ParticleGrid grid = make_grid(gs);
  FormFactor ff = make_form_factor(cfg.form_factor, gs);
  if (!ff.plane_wave)
    throw ConfigError("uniform-field needs a plane-wave form factor (gaussian-charge or custom-table)");
  Potential V = make_potential(cfg.potential, gs);
  const Point c = box_center(gs);
  const double B = uf.field;
  const Domain dom = grid.domain();
  const int k = cfg.solver.eig_count;

  auto exact_A = [c, B](const Point& x) {
    Point r = x - c;
    return Point(-0.5 * B * r.y(), 0.5 * B * r.x(), 0.0);
  };
  MSOOperator exact = assemble_effective(fields_from_potential(grid, exact_A), V, grid);
  EigenOptions eo;
  eo.seed = row_seed(cfg.seed, 0xA5);
  SpectralReport landau = lowest_eigs(exact, std::max(k, uf.landau_count), cfg.solver.eig_tol, eo);
  std::vector<double> levels = distinct_levels(landau.eigenvalues, uf.cluster_gap, uf.cluster_min);

  std::vector<Point> probes = probe_lattice(c, 0.25 * gs.length);
  DispersionRule rule = cfg.modes.dispersion == "massive" ? DispersionRule::massive(cfg.modes.mass)
                        : cfg.modes.dispersion == "table" ? DispersionRule::from_csv(cfg.modes.table_path)
                                                          : DispersionRule::massless();

  std::vector<std::string> cols{"eps", "width", "field_modes", "c_eps", "A_err_mollified", "A_err"};
  for (int i = 0; i < k; ++i) cols.push_back(fmt::format("lambda_syn_{}", i));
  for (int i = 0; i < k; ++i) cols.push_back(fmt::format("lambda_heps_{}", i));
  for (int i = 0; i < k; ++i) cols.push_back(fmt::format("lambda_exact_{}", i));
  cols.push_back("rel_gap");
  cols.push_back("rel_gap_heps");

  const std::size_t n = cfg.eps.size();
  std::vector<std::vector<double>> rows(n);
  std::vector<double> row_secs(n);
  parallel_for(n, cfg.solver.threads, [&](std::size_t r) {
    auto tr = Clock::now();
    const double eps = cfg.eps[r];
    const double w = uf.width_factor * eps;
    const double dk = uf.cutoff * w / uf.radial_nodes;
    std::vector<double> radial(uf.radial_nodes);
    for (int i = 0; i < uf.radial_nodes; ++i) radial[i] = (i + 0.5) * dk;
    ModeSet ms = build_mode_set(2, radial, uf.angular_resolution, rule);

    // ½ r⊥ e^{-w²r²/2} = ∫ d²k (-i G(|k|)) k̂⊥ e^{ik·r}, G = κ e^{-κ²/(2w²)} / (4π w⁴)
    CVector z(ms.field_modes());
    for (int m = 0; m < ms.size(); ++m) {
      const Point& km = ms.node(m);
      double kap = km.norm();
      cplx lam = ff.lambda[0](c, km, ms.omega(m));
      if (!(std::abs(lam) > 1e-300) || !std::isfinite(std::abs(lam)))
        throw InvalidArgument(fmt::format("λ_A vanishes at mode node |k| = {:.6g}; cannot invert", kap));
      double G = kap * std::exp(-0.5 * kap * kap / (w * w)) / (4.0 * std::numbers::pi * std::pow(w, 4));
      Point perp(-km.y() / kap, km.x() / kap, 0.0);
      double orient = perp.dot(ms.polarization(m, 0));
      z[m] = cplx(0.0, -1.0) * B * orient * G * std::sqrt(ms.weight(m)) / (2.0 * std::conj(lam));
    }
    FieldMoments mom = coherent_moments(z, eps);

    double amol = 0.0, aex = 0.0;
    for (const auto& x : probes) {
      Point a = fields_at(mom, ff, ms, 0, x, dom).A;
      Point target = exact_A(x);
      double r2 = (x - c).squaredNorm();
      amol = std::max(amol, (a - target * std::exp(-0.5 * w * w * r2)).norm());
      aex = std::max(aex, (a - target).norm());
    }
    // the magnetic operator of A_ε alone, and the full partial trace with W_ε = ε|F|²
    EffectiveFields fields = effective_fields_moments(mom, ff, ms, grid);
    MSOOperator heps = assemble_effective(fields, V, grid);
    fields.provenance = Provenance::measure;
    for (auto& wj : fields.W) wj.setZero();
    MSOOperator syn = assemble_effective(fields, V, grid);
    EigenOptions o;
    o.seed = row_seed(cfg.seed, r);
    SpectralReport sp = lowest_eigs(syn, k, cfg.solver.eig_tol, o);
    SpectralReport sph = lowest_eigs(heps, k, cfg.solver.eig_tol, o);
    double rel = 0.0, relh = 0.0;
    for (int i = 0; i < k; ++i) {
      double ex = std::abs(landau.eigenvalues[i]);
      rel = std::max(rel, std::abs(sp.eigenvalues[i] - landau.eigenvalues[i]) / ex);
      relh = std::max(relh, std::abs(sph.eigenvalues[i] - landau.eigenvalues[i]) / ex);
    }
    std::vector<double> row{eps, w, double(ms.field_modes()), field_energy_of(mom, ms), amol, aex};
    for (double e : sp.eigenvalues) row.push_back(e);
    for (double e : sph.eigenvalues) row.push_back(e);
    for (int i = 0; i < k; ++i) row.push_back(landau.eigenvalues[i]);
    row.push_back(rel);
    row.push_back(relh);
    rows[r] = std::move(row);
    row_secs[r] = seconds_since(tr);
  });

  Report rep;
  rep.kind = "uniform-field";
  rep.columns = cols;
  rep.rows = rows;
  std::vector<double> limit{0.0, 0.0, 0.0, kNaN, 0.0, 0.0};
  for (int i = 0; i < 3 * k; ++i) limit.push_back(landau.eigenvalues[i % k]);
  limit.push_back(0.0);
  limit.push_back(0.0);
  rep.rows.push_back(limit);

  json s;
  s["field"] = B;
  s["box_length"] = gs.length;
  s["cells"] = gs.cells;
  s["landau_eigenvalues"] = landau.eigenvalues;
  s["landau_levels"] = levels;
  s["landau_oracle"] = {B, 3.0 * B};
  if (levels.size() >= 2) {
    double gap = levels[1] - levels[0];
    s["landau_gap"] = gap;
    s["landau_gap_rel_err"] = std::abs(gap - 2.0 * B) / (2.0 * B);
  } else {
    rep.flags.push_back("landau_levels_unresolved");
  }
  s["lambda0_exact_rel_err"] = std::abs(landau.eigenvalues[0] - B) / B;
  s["finest_rel_gap"] = rows.back()[rep.column("rel_gap")];
  s["finest_rel_gap_heps"] = rows.back()[rep.column("rel_gap_heps")];

  std::vector<double> lw, la;
  bool growing = true;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r][5] > 0.0) {
      lw.push_back(std::log(rows[r][1]));
      la.push_back(std::log(rows[r][5]));
    }
    if (r > 0 && !(rows[r][3] > rows[r - 1][3])) growing = false;
  }
  if (lw.size() >= 2) {
    LinearFit f = fit_line(lw, la);
    s["A_err_fit"] = {{"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r2}};
  }
  // rough fields may carry unbounded field energy along the family
  if (rows.size() >= 2 && growing && rows.back()[3] > 2.0 * rows.front()[3]) {
    rep.flags.push_back("c_eps_diverges");
    s["c_eps_diverges"] = true;
  } else {
    s["c_eps_diverges"] = false;
  }
  rep.summary = s;

  RunResult out{rep, {}};
  out.meta.command = "uniform-field";
  out.meta.config_hash = cfg.hash;
  out.meta.row_seconds = row_secs;
  out.meta.threads = resolve_threads(cfg.solver.threads, n);
  out.meta.seconds = seconds_since(t0);
  return out;
}

// ---- ground state -------------------------------------------------------------------------

namespace {

struct Landscape {
  const ModeSet& ms;
  const FormFactor& ff;
  const ParticleGrid& grid;
  const Potential& V;
  double tol;
  std::uint64_t seed;

  CVector point(const double* x) const {
    CVector z(ms.field_modes());
    for (int mu = 0; mu < z.size(); ++mu) z[mu] = {x[2 * mu], x[2 * mu + 1]};
    return z;
  }
  double energy(const WignerMeasure& mu) const {
    MSOOperator h = assemble_effective(effective_fields_mu(mu, ff, ms, grid), V, grid);
    EigenOptions o;
    o.seed = seed;
    return lowest_eigs(h, 1, tol, o).eigenvalues[0] + field_energy(mu, ms);
  }
  double energy(const CVector& z) const { return energy(WignerMeasure::point_mass(z)); }
};

double landscape_f(const gsl_vector* v, void* params) {
  auto* L = static_cast<const Landscape*>(params);
  return L->energy(L->point(v->data));
}

struct Refined {
  std::vector<double> x;
  double value;
  int iterations;
};

Refined nelder_mead(const Landscape& L, std::vector<double> x0, double step, int max_iter) {
  const std::size_t n = x0.size();
  gsl_multimin_function fn{&landscape_f, n, const_cast<Landscape*>(&L)};
  gsl_vector* x = gsl_vector_alloc(n);
  gsl_vector* ss = gsl_vector_alloc(n);
  for (std::size_t i = 0; i < n; ++i) gsl_vector_set(x, i, x0[i]);
  gsl_vector_set_all(ss, step);
  gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
  gsl_multimin_fminimizer_set(s, &fn, x, ss);
  int it = 0;
  for (; it < max_iter; ++it) {
    if (gsl_multimin_fminimizer_iterate(s)) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), 1e-7) == GSL_SUCCESS) break;
  }
  Refined r{std::vector<double>(s->x->data, s->x->data + n), s->fval, it};
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(ss);
  gsl_vector_free(x);
  return r;
}

}  // namespace

RunResult run_ground_state(const ExperimentConfig& cfg) {
  auto t0 = Clock::now();
  const auto& gc = cfg.ground_state;
  if (cfg.grid.particles != 1) throw ConfigError("ground-state needs a single particle");
  ModeSet ms = make_mode_set(cfg.modes);
  FormFactor ff = make_form_factor(cfg.form_factor, cfg.grid);
  ParticleGrid grid = make_grid(cfg.grid);
  Potential V = make_potential(cfg.potential, cfg.grid);
  const int M = ms.field_modes();
  const int dims = 2 * M;
  const double tol = cfg.solver.eig_tol;
  const int threads = cfg.solver.threads;

  double total_scan = std::pow(double(gc.scan_points), dims);
  if (total_scan > 2e5)
    throw ConfigError(fmt::format("scan of {}^{} points is too large; lower ground_state.scan_points "
                                  "or the mode count",
                                  gc.scan_points, dims));

  Landscape L{ms, ff, grid, V, tol, row_seed(cfg.seed, 0x65)};
  const double E0 = L.energy(CVector::Zero(M));
  const double C0 = std::max(0.0, -min_potential(V, grid));
  const double S = spin_coupling_scale(ms, ff, grid);
  const double wmin = ms.field_omegas().minCoeff();
  // c(δ_z) - 2 S sqrt(c) <= E0 + C0 at the minimizer, and |Re z|, |Im z| <= sqrt(c / ω_min)
  const double Z = gc.box.value_or((S + std::sqrt(S * S + E0 + C0)) / std::sqrt(wmin));

  const std::size_t P = gc.scan_points;
  const std::size_t nscan = static_cast<std::size_t>(total_scan);
  auto scan_coord = [&](std::size_t idx) {
    std::vector<double> x(dims);
    for (int a = 0; a < dims; ++a) {
      x[a] = -Z + 2.0 * Z * static_cast<double>(idx % P) / static_cast<double>(P - 1);
      idx /= P;
    }
    return x;
  };
  std::vector<double> scan(nscan);
  parallel_for(nscan, threads, [&](std::size_t i) { scan[i] = L.energy(L.point(scan_coord(i).data())); });
  std::vector<std::size_t> order(nscan);
  for (std::size_t i = 0; i < nscan; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scan[a] < scan[b]; });

  Refined best = nelder_mead(L, scan_coord(order[0]), Z / double(P - 1), gc.refine_iterations);
  if (scan[order[0]] < best.value) best = {scan_coord(order[0]), scan[order[0]], 0};
  const double right = best.value;
  const CVector zopt = L.point(best.x.data());

  double edge = 0.0;
  for (double v : best.x) edge = std::max(edge, std::abs(v));
  bool boundary = edge >= Z * (1.0 - 1e-6);
  std::vector<double> scan_best = scan_coord(order[0]);
  for (double v : scan_best)
    if (std::abs(v) >= Z * (1.0 - 1e-12) && P > 2) boundary = true;

  // two-point mixtures among the best candidates
  std::vector<CVector> cand{zopt};
  for (std::size_t i = 0; i < nscan && static_cast<int>(cand.size()) <= gc.mixture_candidates; ++i) {
    CVector zc = L.point(scan_coord(order[i]).data());
    bool dup = false;
    for (const auto& e : cand) dup = dup || (e - zc).norm() < 1e-12;
    if (!dup) cand.push_back(zc);
  }
  struct Mix {
    std::size_t a, b;
    double alpha;
  };
  std::vector<Mix> mixes;
  for (std::size_t a = 0; a < cand.size(); ++a)
    for (std::size_t b = a + 1; b < cand.size(); ++b)
      for (double al : gc.mixture_weights) mixes.push_back({a, b, al});
  std::vector<double> mix_val(mixes.size());
  parallel_for(mixes.size(), threads, [&](std::size_t i) {
    WignerMeasure mu{{mixes[i].alpha, 1.0 - mixes[i].alpha}, {cand[mixes[i].a], cand[mixes[i].b]}};
    mix_val[i] = L.energy(mu);
  });
  double best_mix = mix_val.empty() ? kNaN : *std::min_element(mix_val.begin(), mix_val.end());

  MSOOperator hopt =
      assemble_effective(effective_fields_mu(WignerMeasure::point_mass(zopt), ff, ms, grid), V, grid);
  auto gap_ev = lowest_eigs(hopt, 2, tol).eigenvalues;
  const double spectral_gap = gap_ev[1] - gap_ev[0];

  const std::size_t n = cfg.eps.size();
  std::vector<std::vector<double>> rows(n);
  std::vector<double> row_secs(n);
  PFBudget budget;
  budget.max_fock_dim = cfg.solver.max_fock_dim;
  parallel_for(n, threads, [&](std::size_t r) {
    auto tr = Clock::now();
    double eps = cfg.eps[r];
    auto fs = FockSpace::create(M, gc.n_max, eps);
    PFOperator pf(grid, fs, ms, ff, V, budget);
    EigenOptions o;
    o.seed = row_seed(cfg.seed, r);
    double left = lowest_eigs(pf, 1, tol, o).eigenvalues[0];
    rows[r] = {eps, double(gc.n_max), double(fs->dim()), left, right, left - right,
               std::abs(left - right) / spectral_gap};
    row_secs[r] = seconds_since(tr);
  });

  Report rep;
  rep.kind = "ground-state";
  rep.columns = {"eps", "n_max", "fock_dim", "left", "right", "left_minus_right", "rel_to_spectral_gap"};
  rep.rows = rows;
  if (boundary) rep.flags.push_back("boundary");

  bool decreasing = true;
  for (std::size_t r = 1; r < n; ++r) decreasing = decreasing && rows[r][6] < rows[r - 1][6];
  std::vector<double> zr(M), zi(M);
  for (int mu = 0; mu < M; ++mu) {
    zr[mu] = zopt[mu].real();
    zi[mu] = zopt[mu].imag();
  }
  json s;
  s["right"] = right;
  s["z_opt"] = {{"re", zr}, {"im", zi}};
  s["c_opt"] = field_energy(WignerMeasure::point_mass(zopt), ms);
  s["energy_at_zero"] = E0;
  s["box"] = Z;
  s["boundary"] = boundary;
  s["scan_points"] = nscan;
  s["scan_best"] = scan[order[0]];
  s["refine_iterations"] = best.iterations;
  s["spectral_gap"] = spectral_gap;
  s["mixture"] = {{"candidates", cand.size()},
                  {"evaluations", mixes.size()},
                  {"best", best_mix},
                  {"margin", best_mix - right},
                  {"ok", mix_val.empty() || best_mix >= right - 1e-10}};
  s["gap_decreasing"] = decreasing;
  rep.summary = s;

  RunResult out{rep, {}};
  out.meta.command = "ground-state";
  out.meta.config_hash = cfg.hash;
  out.meta.row_seconds = row_secs;
  out.meta.threads = resolve_threads(threads, std::max(n, nscan));
  out.meta.seconds = seconds_since(t0);
  return out;
}

}  // namespace qclimit
