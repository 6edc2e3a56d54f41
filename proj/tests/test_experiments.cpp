#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qclimit/experiments.hpp"
#include "qclimit/spectral.hpp"

using namespace qclimit;
using nlohmann::json;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("qclimit_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

json small_coherent() {
  return json::parse(R"({
    "seed": 9,
    "grid": {"cells": 12},
    "modes": {"nodes": [[2.0, 1.0], [-1.0, 1.5]], "weights": [0.7, 0.5]},
    "form_factor": {"preset": "gaussian-charge", "sigma": 0.4},
    "state": {"family": "coherent", "z": {"re": [0.3, -0.1], "im": [0.2, 0.1]}},
    "eps": [0.25, 0.125, 0.0625],
    "solver": {"eig_count": 2, "threads": 1}
  })");
}

}  // namespace

TEST_CASE("TOML and JSON configs parse to the same values") {
  std::string toml = R"(
seed = 4
eps = [0.5, 0.25]
[grid]
cells = 10
length = 2.0
[state]
family = "number"
product = 2.0
)";
  std::string js = R"({"seed": 4, "eps": [0.5, 0.25], "grid": {"cells": 10, "length": 2.0},
                      "state": {"family": "number", "product": 2.0}})";
  ExperimentConfig a = parse_config(parse_config_text(toml, "toml"));
  ExperimentConfig b = parse_config(parse_config_text(js));
  CHECK(a.seed == 4);
  CHECK(a.grid.cells == b.grid.cells);
  CHECK(a.grid.length == 2.0);
  CHECK(a.state.family == "number");
  CHECK(a.state.product == b.state.product);
  CHECK(a.eps == b.eps);
  CHECK(a.hash == b.hash);
  CHECK(a.hash.size() == 16);

  ExperimentConfig s = parse_config(json::parse(R"({"schedule": {"start": 0.5, "factor": 0.5, "count": 3}})"));
  CHECK(s.eps == std::vector<double>{0.5, 0.25, 0.125});
}

TEST_CASE("config rejections") {
  auto bad = [](const char* text) { return parse_config(json::parse(text)); };
  CHECK_THROWS_AS(bad(R"({"eps": [0.1, 0.2]})"), ConfigError);
  CHECK_THROWS_AS(bad(R"({"eps": [1.5]})"), ConfigError);
  CHECK_THROWS_AS(bad(R"({"eps": []})"), ConfigError);
  CHECK_THROWS_AS(bad(R"({"form_factor": {"preset": "mystery"}})"), ConfigError);
  CHECK_THROWS_AS(bad(R"({"state": {"family": "squeezed"}})"), ConfigError);
  CHECK_THROWS_AS(bad(R"({"grid": {"colls": 3}})"), ConfigError);
  CHECK_THROWS_AS(bad(R"({"form_factor": {"spin_coupling": 1.0}})"), ConfigError);
  CHECK_THROWS_AS(bad(R"({"grid": {"cells": "many"}})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[grid\ncells = 3", "toml"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("{\"a\": ", "json"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/qclimit.toml"), IoError);
}

TEST_CASE("report CSV and JSON") {
  Report empty;
  empty.kind = "convergence";
  empty.columns = {"eps", "gap"};
  CHECK(empty.to_csv() == "eps,gap\n");

  Report r;
  r.kind = "x";
  r.columns = {"a", "b"};
  r.rows = {{0.1, 1.0 / 3.0}, {2.0, std::nan("")}};
  r.summary["k"] = 1.5;
  r.flags = {"boundary"};
  CHECK(r.to_csv() == "a,b\n0.10000000000000001,0.33333333333333331\n2,nan\n");
  Report back = Report::from_json(json::parse(r.to_json().dump()));
  CHECK(back.columns == r.columns);
  CHECK(back.rows[0] == r.rows[0]);
  CHECK(std::isnan(back.rows[1][1]));
  CHECK(back.summary == r.summary);
  CHECK(back.flags == r.flags);
  CHECK(back.to_csv() == r.to_csv());
  CHECK(r.at(0, "b") == 1.0 / 3.0);
  CHECK_THROWS_AS(r.column("c"), InvalidArgument);
  CHECK_THROWS_AS(Report::from_json(json::parse("{}")), InvalidArgument);
}

TEST_CASE("write_outputs") {
  auto dir = scratch("out");
  Report r;
  r.kind = "x";
  r.columns = {"a"};
  r.rows = {{1.0}};
  RunMeta m{"convergence", "abc", 1.25, {0.5}, 2};
  write_outputs(dir.string(), r, m);
  CHECK(slurp(dir / "report.csv") == "a\n1\n");
  json meta = json::parse(slurp(dir / "meta.json"));
  CHECK(meta["config_hash"] == "abc");
  CHECK(meta["versions"].contains("eigen"));
  CHECK(meta["timings"]["total_seconds"] == 1.25);
  CHECK(Report::from_json(json::parse(slurp(dir / "report.json"))).rows == r.rows);
  std::filesystem::remove_all(dir);

  // a regular file where the directory should go
  auto blocker = scratch("blocker");
  std::ofstream(blocker) << "x";
  CHECK_THROWS_AS(write_outputs((blocker / "sub").string(), r, m), IoError);
  std::filesystem::remove(blocker);
}

TEST_CASE("fit_line and distinct_levels") {
  LinearFit f = fit_line({1, 2, 3}, {3, 5, 7});
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
  CHECK(f.r2 == doctest::Approx(1.0));
  CHECK_THROWS_AS(fit_line({1}, {1}), InvalidArgument);
  CHECK_THROWS_AS(fit_line({1, 1}, {1, 2}), InvalidArgument);

  std::vector<double> ev{1.0, 1.001, 1.002, 1.003, 1.5, 3.0, 3.0005, 3.001, 4.0};
  auto lv = distinct_levels(ev, 0.01, 3);
  REQUIRE(lv.size() == 2);
  CHECK(lv[0] == doctest::Approx(1.0015));
  CHECK(lv[1] == doctest::Approx(3.0005));
}

TEST_CASE("convergence run: coherent family") {
  ExperimentConfig cfg = parse_config(small_coherent());
  RunResult r = run_convergence(cfg);
  const Report& rep = r.report;
  REQUIRE(rep.rows.size() == 4);
  for (std::size_t i = 0; i + 1 < rep.rows.size(); ++i) {
    CHECK(rep.at(i, "eps") > rep.at(i + 1, "eps"));
    CHECK(rep.at(i, "A_err") <= 1e-9);
    CHECK(rep.at(i, "fock_dim") > 0);
  }
  CHECK(rep.at(3, "eps") == 0.0);
  // the limit row comes from the measure fields themselves
  CHECK(rep.at(3, "A_err") == 0.0);
  double slope = rep.summary["gap_fit"]["slope"].get<double>();
  CHECK(slope == doctest::Approx(1.0).epsilon(0.05));
  CHECK(rep.summary["variance_fit"]["relative_slope_error"].get<double>() < 1e-6);
  CHECK(rep.summary["lower_bound"]["holds"].get<bool>());
  CHECK(r.meta.row_seconds.size() == 3);

  // the closed-form moments give the same operator up to the truncation tail
  json j = small_coherent();
  j["state"]["representation"] = "closed-form";
  RunResult rc = run_convergence(parse_config(j));
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(rc.report.at(i, "fock_dim") == 0.0);
    CHECK(rc.report.at(i, "lambda_0") == doctest::Approx(rep.at(i, "lambda_0")).epsilon(1e-9));
  }
}

TEST_CASE("convergence run: number and superposition families") {
  json j = json::parse(R"({
    "grid": {"cells": 10},
    "modes": {"nodes": [[0.0, 1.0]], "weights": [1.0]},
    "form_factor": {"preset": "constant"},
    "state": {"family": "number", "product": 1.0},
    "eps": [0.25, 0.125, 0.0625],
    "solver": {"eig_count": 1, "threads": 2}
  })");
  Report rep = run_convergence(parse_config(j)).report;
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(rep.at(i, "A_err") <= 1e-12);
    CHECK(rep.at(i, "W_probe") == doctest::Approx(2.0 + rep.at(i, "eps")).epsilon(1e-12));
    CHECK(rep.at(i, "phi2_err") == doctest::Approx(rep.at(i, "eps")).epsilon(1e-12));
  }
  CHECK(rep.summary["phi2_discrepancy_fit"]["slope"].get<double>() == doctest::Approx(1.0).epsilon(1e-9));

  j["state"] = json::parse(R"({"family": "superposition", "branches": [
      {"z": {"re": [0.8]}, "zeta_re": 1.0},
      {"z": {"re": [-0.8]}, "zeta_re": 1.0}]})");
  Report fock = run_convergence(parse_config(j)).report;
  j["state"]["representation"] = "closed-form";
  Report closed = run_convergence(parse_config(j)).report;
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(closed.at(i, "lambda_0") == doctest::Approx(fock.at(i, "lambda_0")).epsilon(1e-9));
  // branches separate as ε shrinks, so the field errors fall
  CHECK(fock.at(2, "phi2_err") < fock.at(0, "phi2_err"));
}

TEST_CASE("truncation over budget names the feasible ε") {
  json j = small_coherent();
  j["state"]["representation"] = "fock";
  j["solver"]["max_fock_dim"] = 100;
  try {
    run_convergence(parse_config(j));
    FAIL("expected a truncation error");
  } catch (const TruncationError& e) {
    CHECK(std::string(e.what()).find("smallest feasible") != std::string::npos);
    CHECK(e.required_n_max() > 0);
  }
}

TEST_CASE("determinism across runs and thread counts") {
  json j = small_coherent();
  j["state"].erase("z");  // random z from the seed
  std::string a = run_convergence(parse_config(j)).report.to_csv();
  std::string b = run_convergence(parse_config(j)).report.to_csv();
  j["solver"]["threads"] = 3;
  std::string c = run_convergence(parse_config(j)).report.to_csv();
  CHECK(a == b);
  CHECK(a == c);
  j["seed"] = 10;
  CHECK(run_convergence(parse_config(j)).report.to_csv() != a);
}

TEST_CASE("ground state: scan oracle and mixture check") {
  json j = json::parse(R"({
    "grid": {"cells": 10},
    "modes": {"nodes": [[0.0, 1.0]], "weights": [1.0]},
    "form_factor": {"preset": "constant", "charge": 1.5},
    "eps": [0.25, 0.125],
    "ground_state": {"n_max": 6, "scan_points": 7},
    "solver": {"threads": 1}
  })");
  ExperimentConfig cfg = parse_config(j);
  RunResult r = run_ground_state(cfg);
  double right = r.report.summary["right"].get<double>();
  CHECK(r.report.summary["mixture"]["ok"].get<bool>());
  CHECK_FALSE(r.report.summary["boundary"].get<bool>());

  // dense scan of Re z with Im z = 0 and of Im z with Re z = 0
  ModeSet ms = make_mode_set(cfg.modes);
  FormFactor ff = make_form_factor(cfg.form_factor, cfg.grid);
  ParticleGrid g = make_grid(cfg.grid);
  double box = r.report.summary["box"].get<double>();
  double dense = 1e300;
  for (int axis = 0; axis < 2; ++axis)
    for (int i = 0; i <= 200; ++i) {
      double t = -box + 2.0 * box * i / 200.0;
      CVector z(1);
      z[0] = axis == 0 ? cplx(t, 0.0) : cplx(0.0, t);
      WignerMeasure mu = WignerMeasure::point_mass(z);
      MSOOperator h = assemble_effective(effective_fields_mu(mu, ff, ms, g), Potential::zero(), g);
      dense = std::min(dense, lowest_eigs(h, 1, 1e-10).eigenvalues[0] + field_energy(mu, ms));
    }
  CHECK(right <= dense + 1e-8);
  CHECK(right >= dense - 1e-6);

  // with a Zeeman term the minimizer moves off zero; the derived box still contains it
  j["grid"]["spin"] = 2;
  j["form_factor"] = json::parse(R"({"preset": "gaussian-charge", "sigma": 0.3, "spin_coupling": 4.0})");
  RunResult spin = run_ground_state(parse_config(j));
  CHECK_FALSE(spin.report.summary["boundary"].get<bool>());
  CHECK(spin.report.summary["c_opt"].get<double>() > 1e-3);
  CHECK(spin.report.summary["mixture"]["ok"].get<bool>());
  j["ground_state"]["box"] = 1e-3;
  RunResult pinned = run_ground_state(parse_config(j));
  CHECK(pinned.report.summary["boundary"].get<bool>());
  CHECK(pinned.report.flags == std::vector<std::string>{"boundary"});

  j["grid"]["particles"] = 2;
  CHECK_THROWS_AS(run_ground_state(parse_config(j)), ConfigError);
}

TEST_CASE("decoupled ground state: both sides equal the Dirichlet ground energy") {
  json j = json::parse(R"({
    "grid": {"cells": 10},
    "modes": {"nodes": [[0.0, 1.0]], "weights": [1.0]},
    "form_factor": {"preset": "constant", "charge": 0.0},
    "eps": [0.25, 0.125],
    "ground_state": {"n_max": 3, "scan_points": 5},
    "solver": {"threads": 1}
  })");
  Report rep = run_ground_state(parse_config(j)).report;
  double lap = lowest_eigs(dirichlet_laplacian(ParticleGrid(2, 1, 1, 1.0, 10)), 1, 1e-10).eigenvalues[0];
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(rep.at(i, "left") == doctest::Approx(lap).epsilon(1e-9));
    CHECK(rep.at(i, "right") == doctest::Approx(lap).epsilon(1e-9));
  }
  CHECK(std::abs(rep.summary["z_opt"]["re"][0].get<double>()) < 1e-4);
}

TEST_CASE("uniform field run on a small box") {
  json j = json::parse(R"({
    "grid": {"length": 8.0, "cells": 40},
    "eps": [0.125, 0.0625],
    "uniform_field": {"radial_nodes": 24, "angular_resolution": 16, "landau_count": 12},
    "solver": {"eig_count": 2, "threads": 1}
  })");
  Report rep = run_uniform_field(parse_config(j)).report;
  REQUIRE(rep.rows.size() == 3);
  CHECK(rep.at(1, "A_err_mollified") < 1e-4);
  CHECK(rep.at(1, "A_err") < rep.at(0, "A_err"));
  CHECK(rep.at(1, "c_eps") > rep.at(0, "c_eps"));
  CHECK(rep.at(1, "rel_gap") < rep.at(0, "rel_gap"));

  j["grid"]["dimension"] = 3;
  CHECK_THROWS_AS(run_uniform_field(parse_config(j)), ConfigError);
  j["grid"]["dimension"] = 2;
  j["form_factor"] = json::parse(R"({"preset": "constant"})");
  CHECK_THROWS_AS(run_uniform_field(parse_config(j)), ConfigError);
}
