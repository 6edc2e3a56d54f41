#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "qclimit/experiments.hpp"

namespace qclimit {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(fmt::format("'{}' must be a table", where));
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ConfigError(fmt::format("unknown key '{}' in '{}'", k, where));
}

template <class T>
T get(const json& j, const char* key, const std::string& where, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(fmt::format("'{}.{}' has the wrong type", where, key));
  }
}

Point get_point(const json& v, const std::string& what) {
  if (!v.is_array() || v.size() < 1 || v.size() > 3)
    throw ConfigError(fmt::format("'{}' must be an array of 2 or 3 numbers", what));
  Point p = Point::Zero();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ConfigError(fmt::format("'{}' must hold numbers", what));
    p[i] = v[i].get<double>();
  }
  return p;
}

CVector get_cvector(const json& v, const std::string& what) {
  if (!v.is_object() || !v.contains("re"))
    throw ConfigError(fmt::format("'{}' must be a table with 're' and optional 'im'", what));
  std::vector<double> re, im;
  try {
    re = v.at("re").get<std::vector<double>>();
    im = v.value("im", std::vector<double>(re.size(), 0.0));
  } catch (const json::exception&) {
    throw ConfigError(fmt::format("'{}' must hold numeric arrays", what));
  }
  if (re.size() != im.size()) throw ConfigError(fmt::format("'{}': re and im differ in length", what));
  CVector z(re.size());
  for (std::size_t i = 0; i < re.size(); ++i) z[i] = cplx(re[i], im[i]);
  return z;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace

json parse_config_text(const std::string& text, const std::string& format_hint) {
  auto as_toml = [&]() -> json {
    try {
      toml::table tbl = toml::parse(text);
      std::ostringstream ss;
      ss << toml::json_formatter{tbl};
      return json::parse(ss.str());
    } catch (const toml::parse_error& e) {
      throw ConfigError(fmt::format("TOML parse error at line {}: {}", e.source().begin.line,
                                    e.description()));
    }
  };
  auto as_json = [&]() -> json {
    try {
      return json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("JSON parse error: ") + e.what());
    }
  };
  if (format_hint == "toml") return as_toml();
  if (format_hint == "json") return as_json();
  auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') return as_json();
  return as_toml();
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  std::string hint;
  auto dot = path.rfind('.');
  if (dot != std::string::npos) {
    std::string ext = path.substr(dot + 1);
    if (ext == "toml" || ext == "json") hint = ext;
  }
  return parse_config(parse_config_text(ss.str(), hint));
}

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig c;
  check_keys(j, "config",
             {"seed", "output_dir", "modes", "form_factor", "state", "eps", "schedule", "grid",
              "potential", "solver", "uniform_field", "ground_state"});
  c.raw = j;
  c.hash = fmt::format("{:016x}", [&] {
    std::string s = j.dump();
    return fnv1a(s.data(), s.size());
  }());
  c.seed = get<std::uint64_t>(j, "seed", "config", 1);
  c.output_dir = get<std::string>(j, "output_dir", "config", "out");

  if (j.contains("grid")) {
    const json& g = j["grid"];
    check_keys(g, "grid", {"dimension", "particles", "spin", "length", "cells"});
    c.grid.dimension = get<int>(g, "dimension", "grid", 2);
    c.grid.particles = get<int>(g, "particles", "grid", 1);
    c.grid.spin = get<int>(g, "spin", "grid", 1);
    c.grid.length = get<double>(g, "length", "grid", 1.0);
    c.grid.cells = get<int>(g, "cells", "grid", 32);
  }
  require(c.grid.dimension == 2 || c.grid.dimension == 3, "grid.dimension must be 2 or 3");
  require(c.grid.particles >= 1 && c.grid.particles <= 2, "grid.particles must be 1 or 2");
  require(c.grid.spin >= 1, "grid.spin must be >= 1");
  require(c.grid.length > 0.0, "grid.length must be positive");
  require(c.grid.cells >= 2, "grid.cells must be >= 2");

  c.modes.dimension = c.grid.dimension;
  if (j.contains("modes")) {
    const json& m = j["modes"];
    check_keys(m, "modes",
               {"dimension", "nodes", "weights", "radial_nodes", "angular_resolution", "dispersion",
                "mass", "table"});
    c.modes.dimension = get<int>(m, "dimension", "modes", c.grid.dimension);
    if (m.contains("nodes")) {
      require(m["nodes"].is_array(), "modes.nodes must be an array of points");
      for (const auto& p : m["nodes"]) c.modes.nodes.push_back(get_point(p, "modes.nodes"));
      c.modes.weights = get<std::vector<double>>(m, "weights", "modes",
                                                 std::vector<double>(c.modes.nodes.size(), 1.0));
      require(c.modes.weights.size() == c.modes.nodes.size(),
              "modes.weights must match modes.nodes in length");
    }
    c.modes.radial_nodes = get<std::vector<double>>(m, "radial_nodes", "modes", {});
    c.modes.angular_resolution = get<int>(m, "angular_resolution", "modes", 4);
    c.modes.dispersion = get<std::string>(m, "dispersion", "modes", "massless");
    c.modes.mass = get<double>(m, "mass", "modes", 0.0);
    c.modes.table_path = get<std::string>(m, "table", "modes", "");
  }
  require(c.modes.dimension == c.grid.dimension, "modes.dimension must equal grid.dimension");
  require(c.modes.nodes.empty() || c.modes.radial_nodes.empty(),
          "give either modes.nodes or modes.radial_nodes, not both");
  if (c.modes.nodes.empty() && c.modes.radial_nodes.empty()) c.modes.radial_nodes = {0.5, 1.0};
  for (double r : c.modes.radial_nodes) require(r > 0.0, "modes.radial_nodes must be positive");
  require(c.modes.angular_resolution >= 1, "modes.angular_resolution must be >= 1");
  require(c.modes.dispersion == "massless" || c.modes.dispersion == "massive" ||
              c.modes.dispersion == "table",
          "modes.dispersion must be massless, massive or table");
  require(c.modes.mass >= 0.0, "modes.mass must be nonnegative");
  require(c.modes.dispersion != "table" || !c.modes.table_path.empty(),
          "modes.table is required for the table dispersion");

  if (j.contains("form_factor")) {
    const json& f = j["form_factor"];
    check_keys(f, "form_factor", {"preset", "charge", "sigma", "center", "spin_coupling", "table"});
    c.form_factor.preset = get<std::string>(f, "preset", "form_factor", "gaussian-charge");
    c.form_factor.charge = get<double>(f, "charge", "form_factor", 1.0);
    c.form_factor.sigma = get<double>(f, "sigma", "form_factor", 1.0);
    if (f.contains("center")) c.form_factor.center = get_point(f["center"], "form_factor.center");
    c.form_factor.spin_coupling = get<double>(f, "spin_coupling", "form_factor", 0.0);
    if (f.contains("table")) {
      require(f["table"].is_array(), "form_factor.table must be an array of [k, rho] pairs");
      for (const auto& row : f["table"]) {
        require(row.is_array() && row.size() == 2 && row[0].is_number() && row[1].is_number(),
                "form_factor.table rows must be [k, rho]");
        c.form_factor.table.emplace_back(row[0].get<double>(), row[1].get<double>());
      }
    }
  }
  const auto& pre = c.form_factor.preset;
  require(pre == "gaussian-charge" || pre == "constant" || pre == "custom-table",
          fmt::format("unknown form_factor.preset '{}'", pre));
  require(pre != "custom-table" || c.form_factor.table.size() >= 2,
          "form_factor.table needs at least two rows for custom-table");
  require(c.form_factor.sigma > 0.0, "form_factor.sigma must be positive");
  require(c.form_factor.spin_coupling == 0.0 || c.grid.spin > 1,
          "form_factor.spin_coupling needs grid.spin > 1");

  if (j.contains("state")) {
    const json& s = j["state"];
    check_keys(s, "state",
               {"family", "z", "z_scale", "mode", "product", "circle_points", "branches",
                "representation", "tail_tol"});
    c.state.family = get<std::string>(s, "family", "state", "coherent");
    if (s.contains("z")) c.state.z = get_cvector(s["z"], "state.z");
    c.state.z_scale = get<double>(s, "z_scale", "state", 0.3);
    c.state.mode = get<int>(s, "mode", "state", 0);
    c.state.product = get<double>(s, "product", "state", 1.0);
    c.state.circle_points = get<int>(s, "circle_points", "state", 16);
    c.state.representation = get<std::string>(s, "representation", "state", "auto");
    c.state.tail_tol = get<double>(s, "tail_tol", "state", 1e-10);
    if (s.contains("branches")) {
      require(s["branches"].is_array(), "state.branches must be an array");
      for (const auto& b : s["branches"]) {
        require(b.is_object() && b.contains("z"), "each branch needs a z table");
        check_keys(b, "state.branches[]", {"z", "zeta_re", "zeta_im"});
        BranchSpec br;
        br.z = get_cvector(b["z"], "state.branches[].z");
        br.zeta = cplx(get<double>(b, "zeta_re", "state.branches[]", 1.0),
                       get<double>(b, "zeta_im", "state.branches[]", 0.0));
        c.state.branches.push_back(br);
      }
    }
  }
  const auto& fam = c.state.family;
  require(fam == "coherent" || fam == "number" || fam == "superposition",
          fmt::format("unknown state.family '{}'", fam));
  require(fam != "superposition" || c.state.branches.size() >= 1,
          "state.branches is required for the superposition family");
  require(c.state.representation == "auto" || c.state.representation == "fock" ||
              c.state.representation == "closed-form",
          "state.representation must be auto, fock or closed-form");
  require(c.state.tail_tol > 0.0 && c.state.tail_tol < 1.0, "state.tail_tol must lie in (0, 1)");
  require(c.state.product > 0.0, "state.product must be positive");
  require(c.state.circle_points >= 3, "state.circle_points must be >= 3");
  require(c.state.z_scale >= 0.0, "state.z_scale must be nonnegative");

  if (j.contains("eps") && j.contains("schedule"))
    throw ConfigError("give either eps or schedule, not both");
  if (j.contains("eps")) {
    c.eps = get<std::vector<double>>(j, "eps", "config", {});
  } else if (j.contains("schedule")) {
    const json& s = j["schedule"];
    check_keys(s, "schedule", {"start", "factor", "count"});
    double start = get<double>(s, "start", "schedule", 0.25);
    double factor = get<double>(s, "factor", "schedule", 0.5);
    int count = get<int>(s, "count", "schedule", 5);
    require(count >= 1 && factor > 0.0 && factor < 1.0, "schedule needs count >= 1, factor in (0,1)");
    c.eps.clear();
    for (int i = 0; i < count; ++i) c.eps.push_back(start * std::pow(factor, i));
  }
  require(!c.eps.empty(), "the ε schedule is empty");
  for (std::size_t i = 0; i < c.eps.size(); ++i) {
    require(c.eps[i] > 0.0 && c.eps[i] < 1.0, "ε values must lie in (0, 1)");
    require(i == 0 || c.eps[i] < c.eps[i - 1], "ε values must be strictly decreasing");
  }

  if (j.contains("potential")) {
    const json& p = j["potential"];
    check_keys(p, "potential", {"kind", "strength", "center", "softening"});
    c.potential.kind = get<std::string>(p, "kind", "potential", "zero");
    c.potential.strength = get<double>(p, "strength", "potential", 0.0);
    if (p.contains("center")) c.potential.center = get_point(p["center"], "potential.center");
    c.potential.softening = get<double>(p, "softening", "potential", 0.1);
  }
  require(c.potential.kind == "zero" || c.potential.kind == "harmonic" ||
              c.potential.kind == "soft-coulomb",
          fmt::format("unknown potential.kind '{}'", c.potential.kind));
  require(c.potential.kind != "soft-coulomb" || c.grid.particles == 2,
          "soft-coulomb needs two particles");
  require(c.potential.softening > 0.0, "potential.softening must be positive");

  if (j.contains("solver")) {
    const json& s = j["solver"];
    check_keys(s, "solver",
               {"eig_count", "eig_tol", "resolvent_tol", "probes", "gap_iterations", "xi",
                "max_fock_dim", "threads"});
    c.solver.eig_count = get<int>(s, "eig_count", "solver", 3);
    c.solver.eig_tol = get<double>(s, "eig_tol", "solver", 1e-9);
    c.solver.resolvent_tol = get<double>(s, "resolvent_tol", "solver", 1e-10);
    c.solver.probes = get<int>(s, "probes", "solver", 2);
    c.solver.gap_iterations = get<int>(s, "gap_iterations", "solver", 200);
    if (s.contains("xi")) c.solver.xi = get<double>(s, "xi", "solver", 0.0);
    c.solver.max_fock_dim = get<Index>(s, "max_fock_dim", "solver", 50'000);
    c.solver.threads = get<int>(s, "threads", "solver", 0);
  }
  require(c.solver.eig_count >= 1, "solver.eig_count must be >= 1");
  require(c.solver.eig_tol > 0.0 && c.solver.resolvent_tol > 0.0, "solver tolerances must be positive");
  require(c.solver.probes >= 1 && c.solver.gap_iterations >= 1, "solver.probes and gap_iterations must be >= 1");
  require(!c.solver.xi || *c.solver.xi > 0.0, "solver.xi must be positive");
  require(c.solver.max_fock_dim >= 1 && c.solver.threads >= 0, "bad solver budget");

  if (j.contains("uniform_field")) {
    const json& u = j["uniform_field"];
    check_keys(u, "uniform_field",
               {"field", "width_factor", "radial_nodes", "angular_resolution", "cutoff",
                "landau_count", "cluster_gap", "cluster_min"});
    auto& uf = c.uniform_field;
    uf.field = get<double>(u, "field", "uniform_field", 1.0);
    uf.width_factor = get<double>(u, "width_factor", "uniform_field", 2.0);
    uf.radial_nodes = get<int>(u, "radial_nodes", "uniform_field", 48);
    uf.angular_resolution = get<int>(u, "angular_resolution", "uniform_field", 32);
    uf.cutoff = get<double>(u, "cutoff", "uniform_field", 6.0);
    uf.landau_count = get<int>(u, "landau_count", "uniform_field", 40);
    uf.cluster_gap = get<double>(u, "cluster_gap", "uniform_field", 0.01);
    uf.cluster_min = get<int>(u, "cluster_min", "uniform_field", 3);
    require(uf.field > 0.0 && uf.width_factor > 0.0 && uf.cutoff > 0.0,
            "uniform_field.field, width_factor and cutoff must be positive");
    require(uf.radial_nodes >= 1 && uf.angular_resolution >= 1 && uf.landau_count >= 2,
            "uniform_field resolutions must be positive and landau_count >= 2");
  }

  if (j.contains("ground_state")) {
    const json& g = j["ground_state"];
    check_keys(g, "ground_state",
               {"n_max", "scan_points", "box", "refine_iterations", "mixture_candidates",
                "mixture_weights"});
    auto& gs = c.ground_state;
    gs.n_max = get<int>(g, "n_max", "ground_state", 8);
    gs.scan_points = get<int>(g, "scan_points", "ground_state", 9);
    if (g.contains("box")) gs.box = get<double>(g, "box", "ground_state", 1.0);
    gs.refine_iterations = get<int>(g, "refine_iterations", "ground_state", 200);
    gs.mixture_candidates = get<int>(g, "mixture_candidates", "ground_state", 6);
    gs.mixture_weights =
        get<std::vector<double>>(g, "mixture_weights", "ground_state", {0.25, 0.5, 0.75});
    require(gs.n_max >= 1 && gs.scan_points >= 2, "ground_state.n_max >= 1 and scan_points >= 2");
    require(!gs.box || *gs.box > 0.0, "ground_state.box must be positive");
    for (double a : gs.mixture_weights)
      require(a > 0.0 && a < 1.0, "ground_state.mixture_weights must lie in (0, 1)");
  }
  return c;
}

ModeSet make_mode_set(const ModeSpec& spec) {
  DispersionRule rule = spec.dispersion == "massive" ? DispersionRule::massive(spec.mass)
                        : spec.dispersion == "table" ? DispersionRule::from_csv(spec.table_path)
                                                     : DispersionRule::massless();
  if (!spec.nodes.empty()) return ModeSet::from_nodes(spec.dimension, spec.nodes, spec.weights, rule);
  return build_mode_set(spec.dimension, spec.radial_nodes, spec.angular_resolution, rule);
}

FormFactor make_form_factor(const FormFactorSpec& spec, const GridSpec& grid) {
  Point center = spec.center.value_or(Point::Zero());
  if (!spec.center)
    for (int i = 0; i < grid.dimension; ++i) center[i] = 0.5 * grid.length;
  double b = spec.spin_coupling;
  if (spec.preset == "constant") return constant_coupling(grid.particles, spec.charge, b);
  if (spec.preset == "custom-table") {
    auto rows = spec.table;
    for (auto& r : rows) r.second *= spec.charge;
    return tabulated_charge(grid.particles, rows, center, b);
  }
  return gaussian_charge(grid.particles, spec.charge, spec.sigma, center, b);
}

ParticleGrid make_grid(const GridSpec& spec) {
  return ParticleGrid(spec.dimension, spec.particles, spec.spin, spec.length, spec.cells);
}

Potential make_potential(const PotentialSpec& spec, const GridSpec& grid) {
  Point center = spec.center.value_or(Point::Zero());
  if (!spec.center)
    for (int i = 0; i < grid.dimension; ++i) center[i] = 0.5 * grid.length;
  if (spec.kind == "harmonic") return Potential::harmonic(spec.strength, center);
  if (spec.kind == "soft-coulomb") return Potential::soft_coulomb(spec.strength, spec.softening);
  return Potential::zero();
}

}  // namespace qclimit
