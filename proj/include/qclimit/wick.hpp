#pragma once

#include <string>
#include <vector>

#include "qclimit/common.hpp"
#include "qclimit/fock.hpp"

namespace qclimit {

// s(z) = <z^{⊗q}, K z^{⊗p}>; K has M'^q rows (output slots) and M'^p columns (input slots),
// multi-indices flattened with the first slot most significant.
class PolySymbol {
 public:
  PolySymbol(int modes, int p, int q, CMatrix kernel, std::string label = {});

  static PolySymbol zero(int modes, int p, int q);
  // Π_k <z, eta_k> Π_l <xi_l, z>: q creation-side vectors eta, p annihilation-side vectors xi.
  static PolySymbol product(int modes, const std::vector<CVector>& eta,
                            const std::vector<CVector>& xi, std::string label = {});
  // <z, T z>
  static PolySymbol quadratic(const CMatrix& t, std::string label = {});

  int modes() const { return modes_; }
  int p() const { return p_; }
  int q() const { return q_; }
  const CMatrix& kernel() const { return kernel_; }
  const std::string& label() const { return label_; }

  // Symbol with kernel K^H and degrees swapped.
  PolySymbol conjugate() const;
  PolySymbol symmetrized() const;
  PolySymbol operator+(const PolySymbol& o) const;
  PolySymbol scaled(cplx c) const;
  double symmetry_defect() const;

 private:
  int modes_;
  int p_;
  int q_;
  CMatrix kernel_;
  std::string label_;
};

struct WignerMeasure {
  std::vector<double> weights;
  std::vector<CVector> points;

  static WignerMeasure point_mass(const CVector& z);
  // K equi-phase points e^{iθ_k} z0.
  static WignerMeasure circle(const CVector& z0, int points);

  int size() const { return static_cast<int>(points.size()); }
  int modes() const { return points.empty() ? 0 : static_cast<int>(points.front().size()); }
  void validate() const;
};

cplx evaluate(const PolySymbol& sym, const CVector& z);

struct WickOptions {
  int max_degree = 2;
};

FockOperator quantize(const FockSpacePtr& fs, const PolySymbol& sym, const WickOptions& opt = {});

cplx classical_expectation(const WignerMeasure& mu, const PolySymbol& sym);

struct GapRow {
  double eps;
  double gap;
};

std::vector<GapRow> semiclassical_gap(const std::vector<FockSpacePtr>& spaces,
                                      const std::vector<CVector>& states, const WignerMeasure& mu,
                                      const PolySymbol& sym, const WickOptions& opt = {});

}  // namespace qclimit
