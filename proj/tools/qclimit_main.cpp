#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "qclimit/experiments.hpp"
#include "qclimit/fock.hpp"
#include "qclimit/spectral.hpp"

using namespace qclimit;

namespace {

enum Exit { kOk = 0, kNumerical = 1, kIo = 2, kConfig = 3 };

int run_experiment(const std::string& command, const std::string& config_path,
                   const std::string& output_override, int threads) {
  ExperimentConfig cfg = load_config(config_path);
  if (threads >= 0) cfg.solver.threads = threads;
  RunResult r = command == "convergence"     ? run_convergence(cfg)
                : command == "uniform-field" ? run_uniform_field(cfg)
                                             : run_ground_state(cfg);
  std::string dir = output_override.empty() ? cfg.output_dir : output_override;
  write_outputs(dir, r.report, r.meta);
  fmt::print("{}: {} rows written to {} in {:.2f} s\n", command, r.report.rows.size(), dir,
             r.meta.seconds);
  for (const auto& f : r.report.flags) fmt::print("flag: {}\n", f);
  fmt::print("{}\n", r.report.summary.dump(2));
  return kOk;
}

// Quick smoke checks of the core identities, a few seconds in total.
int selftest() {
  int failures = 0;
  auto check = [&](const char* name, bool ok, const std::string& detail) {
    fmt::print("{} {} ({})\n", ok ? "PASS" : "FAIL", name, detail);
    failures += ok ? 0 : 1;
  };

  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  auto fs = FockSpace::create(3, 6, 0.125);
  CVector f(3), h(3), v(fs->dim());
  for (int i = 0; i < 3; ++i) f[i] = {g(rng), g(rng)}, h[i] = {g(rng), g(rng)};
  for (Index i = 0; i < fs->dim(); ++i) v[i] = fs->total(i) < 6 ? cplx(g(rng), g(rng)) : 0.0;
  FockOperator a = annihilation(fs, f), ad = creation(fs, h);
  CVector comm = a.apply(ad.apply(v)) - ad.apply(a.apply(v)) - 0.125 * f.dot(h) * v;
  check("ccr", comm.norm() <= 1e-12 * v.norm(), fmt::format("residual {:.2e}", comm.norm()));

  CVector z1(3), z2(3);
  for (int i = 0; i < 3; ++i) z1[i] = {0.3 * g(rng), 0.3 * g(rng)}, z2[i] = {0.3 * g(rng), 0.3 * g(rng)};
  auto big = FockSpace::create(3, 40, 0.125);
  cplx brute = coherent_state(*big, {z1}, 1e-12).dot(coherent_state(*big, {z2}, 1e-12));
  double err = std::abs(brute - coherent_overlap(z1, z2, 0.125));
  check("coherent-overlap", err <= 1e-10, fmt::format("error {:.2e}", err));

  ExperimentConfig cfg = parse_config(nlohmann::json::parse(R"({
    "grid": {"cells": 16},
    "modes": {"radial_nodes": [1.0], "angular_resolution": 3},
    "state": {"family": "coherent", "z_scale": 0.3},
    "eps": [0.25, 0.125, 0.0625],
    "solver": {"eig_count": 1, "threads": 1}
  })"));
  RunResult r = run_convergence(cfg);
  double aerr = 0.0;
  for (std::size_t i = 0; i < 3; ++i) aerr = std::max(aerr, r.report.at(i, "A_err"));
  check("coherent-exactness", aerr <= 1e-9, fmt::format("max A error {:.2e}", aerr));
  double slope = r.report.summary["gap_fit"]["slope"].get<double>();
  check("resolvent-rate", std::abs(slope - 1.0) < 0.2, fmt::format("log-log slope {:.3f}", slope));
  return failures == 0 ? kOk : kNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quasi-classical limit laboratory for Pauli-Fierz type models"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string config, output;
  int threads = -1;
  std::string chosen;
  for (const char* name : {"convergence", "uniform-field", "ground-state"}) {
    auto* sub = app.add_subcommand(name, fmt::format("run the {} experiment", name));
    sub->add_option("--config", config, "TOML or JSON config file")->required();
    sub->add_option("--output", output, "output directory (overrides output_dir)");
    sub->add_option("--threads", threads, "worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
    sub->callback([&chosen, name] { chosen = name; });
  }
  app.add_subcommand("selftest", "quick internal consistency checks")->callback([&] { chosen = "selftest"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (chosen == "selftest") return selftest();
    return run_experiment(chosen, config, output, threads);
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kConfig;
  } catch (const IoError& e) {
    fmt::print(stderr, "I/O error: {}\n", e.what());
    return kIo;
  } catch (const TruncationError& e) {
    fmt::print(stderr, "truncation error: {}\n", e.what());
    return kNumerical;
  } catch (const Error& e) {
    fmt::print(stderr, "numerical failure: {}\n", e.what());
    return kNumerical;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kNumerical;
  }
}
