#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "qclimit/common.hpp"
#include "qclimit/schrodinger.hpp"

namespace qclimit {

struct SpectralReport {
  std::vector<double> eigenvalues;  // ascending
  std::vector<double> residuals;    // |Op v - θ v|
  int iterations = 0;               // operator applications
  int restarts = 0;
  double seconds = 0.0;
  CMatrix vectors;  // dim x count, filled when requested

  nlohmann::json to_json() const;
};

struct EigenOptions {
  int max_basis = 0;  // 0 picks from count
  int max_restarts = 300;
  int block = 0;     // 0: one starting vector per wanted eigenvalue
  std::uint64_t seed = 0x5eed;
  bool keep_vectors = false;
  bool shift_invert = true;  // sparse operators only
  Index dense_threshold = 300;
};

SpectralReport lowest_eigs(const LinearOperator& op, int count, double tol,
                           const EigenOptions& opt = {});
SpectralReport lowest_eigs(const MSOOperator& op, int count, double tol,
                           const EigenOptions& opt = {});
SpectralReport lowest_eigs(const PFOperator& op, int count, double tol,
                           const EigenOptions& opt = {});

struct SolveStats {
  int iterations = 0;
  double residual = 0.0;
};

// (Op + ξ) u = v by conjugate gradients; lowest is a known bound for the spectrum bottom.
CVector apply_resolvent(const LinearOperator& op, double xi, const CVector& v, double tol,
                        std::optional<double> lowest = std::nullopt, SolveStats* stats = nullptr);
CVector apply_resolvent(const MSOOperator& op, double xi, const CVector& v, double tol,
                        std::optional<double> lowest = std::nullopt);

struct GapOptions {
  int max_iterations = 200;
  double rel_change = 1e-8;
  std::uint64_t seed = 0x9a9;
  std::optional<double> lowest_a, lowest_b;
};

double resolvent_gap(const LinearOperator& a, const LinearOperator& b, double xi, int probes,
                     double tol, const GapOptions& opt = {});
double resolvent_gap(const MSOOperator& a, const MSOOperator& b, double xi, int probes,
                     double tol, GapOptions opt = {});

// ξ = 1 + max(0, −λ₀) + 1
inline double default_xi(double lowest) { return 2.0 + std::max(0.0, -lowest); }

}  // namespace qclimit
