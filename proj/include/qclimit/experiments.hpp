#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qclimit/common.hpp"
#include "qclimit/field_model.hpp"
#include "qclimit/grid.hpp"
#include "qclimit/measures.hpp"

namespace qclimit {

inline constexpr const char* kVersion = "0.1.0";

struct ModeSpec {
  int dimension = 2;
  // Either an explicit node list or radial nodes × angular resolution.
  std::vector<Point> nodes;
  std::vector<double> weights;
  std::vector<double> radial_nodes;
  int angular_resolution = 4;
  std::string dispersion = "massless";  // massless | massive | table
  double mass = 0.0;
  std::string table_path;
};

struct FormFactorSpec {
  std::string preset = "gaussian-charge";  // gaussian-charge | constant | custom-table
  double charge = 1.0;
  double sigma = 1.0;
  std::optional<Point> center;  // defaults to the box center
  double spin_coupling = 0.0;
  std::vector<std::pair<double, double>> table;
};

struct BranchSpec {
  cplx zeta = 1.0;
  CVector z;
};

struct StateSpec {
  std::string family = "coherent";  // coherent | number | superposition
  std::optional<CVector> z;         // coherent; random when absent
  double z_scale = 0.3;
  int mode = 0;                     // number family: occupied field mode
  double product = 1.0;             // number family: ε n held fixed
  int circle_points = 16;           // number family limit measure resolution
  std::vector<BranchSpec> branches;
  std::string representation = "auto";  // auto | fock | closed-form
  double tail_tol = 1e-10;
};

struct GridSpec {
  int dimension = 2;
  int particles = 1;
  int spin = 1;
  double length = 1.0;
  int cells = 32;
};

struct PotentialSpec {
  std::string kind = "zero";  // zero | harmonic | soft-coulomb
  double strength = 0.0;
  std::optional<Point> center;
  double softening = 0.1;
};

struct SolverSpec {
  int eig_count = 3;
  double eig_tol = 1e-9;
  double resolvent_tol = 1e-10;
  int probes = 2;
  int gap_iterations = 200;
  std::optional<double> xi;
  Index max_fock_dim = 50'000;
  int threads = 0;  // 0: hardware concurrency
};

struct UniformFieldSpec {
  double field = 1.0;
  double width_factor = 2.0;  // mollifier width w = width_factor · ε
  int radial_nodes = 48;
  int angular_resolution = 32;
  double cutoff = 6.0;         // radial extent in units of w
  int landau_count = 40;
  double cluster_gap = 0.01;
  int cluster_min = 3;
};

struct GroundStateSpec {
  int n_max = 8;
  int scan_points = 9;
  std::optional<double> box;  // scan half-width; derived from the energy bound when absent
  int refine_iterations = 200;
  int mixture_candidates = 6;
  std::vector<double> mixture_weights{0.25, 0.5, 0.75};
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  ModeSpec modes;
  FormFactorSpec form_factor;
  StateSpec state;
  std::vector<double> eps{0.25, 0.125, 0.0625, 0.03125, 0.015625};
  GridSpec grid;
  PotentialSpec potential;
  SolverSpec solver;
  UniformFieldSpec uniform_field;
  GroundStateSpec ground_state;

  nlohmann::json raw;
  std::string hash;  // hex fingerprint of the canonical config
};

// JSON or TOML text; format from the extension, else sniffed.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const nlohmann::json& j);
nlohmann::json parse_config_text(const std::string& text, const std::string& format_hint = "");

ModeSet make_mode_set(const ModeSpec& spec);
FormFactor make_form_factor(const FormFactorSpec& spec, const GridSpec& grid);
ParticleGrid make_grid(const GridSpec& spec);
Potential make_potential(const PotentialSpec& spec, const GridSpec& grid);

struct Report {
  std::string kind;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  nlohmann::json summary = nlohmann::json::object();
  std::vector<std::string> flags;

  std::string to_csv() const;
  nlohmann::json to_json() const;
  static Report from_json(const nlohmann::json& j);
  double at(std::size_t row, const std::string& column) const;
  std::size_t column(const std::string& name) const;
};

struct RunMeta {
  std::string command;
  std::string config_hash;
  double seconds = 0.0;
  std::vector<double> row_seconds;
  int threads = 1;
};

// report.csv, report.json and meta.json under dir; IoError when unwritable.
void write_outputs(const std::string& dir, const Report& report, const RunMeta& meta);

struct RunResult {
  Report report;
  RunMeta meta;
};

RunResult run_convergence(const ExperimentConfig& cfg);
RunResult run_uniform_field(const ExperimentConfig& cfg);
RunResult run_ground_state(const ExperimentConfig& cfg);

// Least squares fit y = a + b x; returns {b, a, R²}.
struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

// Groups an ascending spectrum into chains with consecutive spacing below gap; returns the
// median of every chain with at least min_size members.
std::vector<double> distinct_levels(const std::vector<double>& ev, double gap, int min_size);

}  // namespace qclimit
