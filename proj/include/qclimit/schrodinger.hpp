#pragma once

#include <functional>
#include <string>
#include <vector>

#include "qclimit/common.hpp"
#include "qclimit/field_model.hpp"
#include "qclimit/fock.hpp"
#include "qclimit/grid.hpp"
#include "qclimit/measures.hpp"

namespace qclimit {

struct LinearOperator {
  Index dim = 0;
  std::function<void(const CVector&, CVector&)> apply;
};

struct OperatorMeta {
  std::string provenance = "kinetic";
  std::string potential = "zero";
  std::string scheme = "centered-link-midpoint";
  double eps = 0.0;
};

// Sparse hermitian operator on grid ⊗ spin; row index = configuration * s + spin.
class MSOOperator {
 public:
  MSOOperator(ParticleGrid grid, SparseMatrix matrix, OperatorMeta meta);

  const ParticleGrid& grid() const { return grid_; }
  const SparseMatrix& matrix() const { return matrix_; }
  const OperatorMeta& meta() const { return meta_; }
  Index dim() const { return matrix_.rows(); }
  Index nnz() const { return matrix_.nonZeros(); }
  double hermiticity_defect() const;
  CVector apply(const CVector& v) const { return matrix_ * v; }
  // A view: the operator must outlive it.
  LinearOperator linear() const;
  // Lower end of the Gershgorin disc union.
  double gershgorin_lower() const;

 private:
  ParticleGrid grid_;
  SparseMatrix matrix_;
  OperatorMeta meta_;
};

MSOOperator dirichlet_laplacian(const ParticleGrid& grid);
// (−i∇−A)² − σ·B + W + V; the diagonal field term is |A|²+W for measure fields and
// ⟨φ²⟩ for state fields.
MSOOperator assemble_effective(const EffectiveFields& fields, const Potential& V,
                               const ParticleGrid& grid);
MSOOperator assemble_Heps(const CVector& state, const FockSpace& fs, const FormFactor& ff,
                          const ModeSet& ms, const Potential& V, const ParticleGrid& grid);
MSOOperator assemble_Heps(const FieldMoments& mom, const FormFactor& ff, const ModeSet& ms,
                          const Potential& V, const ParticleGrid& grid);

// Fields of a prescribed vector potential (W = 0, no Zeeman term).
EffectiveFields fields_from_potential(const ParticleGrid& grid,
                                      const std::function<Point(const Point&)>& A);

struct PFBudget {
  Index max_dim = 4'000'000;
  int max_grid_side = 32;
  Index max_fock_dim = 50'000;
};

// Full operator on grid ⊗ spin ⊗ Fock, applied matrix-free; layout ((p s + σ) dimF + f).
class PFOperator {
 public:
  PFOperator(const ParticleGrid& grid, FockSpacePtr fs, const ModeSet& ms, const FormFactor& ff,
             const Potential& V, const PFBudget& budget = {});

  Index dim() const { return dim_; }
  const ParticleGrid& grid() const { return grid_; }
  const FockSpacePtr& fock() const { return fs_; }
  void apply(const CVector& in, CVector& out) const;
  CVector apply(const CVector& in) const;
  LinearOperator linear() const;
  // Product vector ψ ⊗ χ in the operator layout.
  CVector product_state(const CVector& psi, const CVector& chi) const;

 private:
  void phi(const CMatrix& F, Index row, const CVector& x, CVector& out, CVector& tmp) const;

  ParticleGrid grid_;
  FockSpacePtr fs_;
  Index dimF_, dim_;
  int d_;
  RVector diag_;        // kinetic diagonal + V + ε|F|² per point
  RVector dgam_;        // ε Σ ω n per Fock state
  std::vector<CMatrix> F_;       // per component, points x M'
  std::vector<CMatrix> G_;       // spin couplings, same layout
  std::vector<CMatrix> Flink_;   // per axis, component = axis, points x M'
};

struct Branch {
  cplx zeta;
  CVector z;
  CVector psi;  // grid ⊗ spin vector
};

struct SuperpositionValue {
  double energy;
  std::vector<cplx> zeta;  // rescaled amplitudes that normalize the superposition
};

// Closed-form ⟨Φ, H Φ⟩ for Φ = Σ ζ_j ψ_j ⊗ Ξ_ε(z_j) with the same discretization as PFOperator.
SuperpositionValue coherent_superposition_expectation(const std::vector<Branch>& branches,
                                                      double eps, const FormFactor& ff,
                                                      const ModeSet& ms, const Potential& V,
                                                      const ParticleGrid& grid);

}  // namespace qclimit
