#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "qclimit/common.hpp"
#include "qclimit/field_model.hpp"

namespace qclimit {

// Bosonic Fock space over M' modes, truncated at total occupation N_max, with [a, a†] = ε.
class FockSpace {
 public:
  FockSpace(int modes, int n_max, double eps);

  static std::shared_ptr<const FockSpace> create(int modes, int n_max, double eps) {
    return std::make_shared<const FockSpace>(modes, n_max, eps);
  }
  static Index dimension_for(int modes, int n_max);

  int modes() const { return modes_; }
  int n_max() const { return n_max_; }
  double eps() const { return eps_; }
  Index dim() const { return dim_; }

  std::span<const int> occupation(Index i) const {
    return {occ_.data() + i * modes_, static_cast<std::size_t>(modes_)};
  }
  int total(Index i) const { return totals_[i]; }
  // Rank of an occupation vector in graded lexicographic order; -1 if above N_max.
  Index index_of(std::span<const int> n) const;

  // Single-mode ladder matrices: a_mu |n> = sqrt(ε n_mu) |n - e_mu>.
  const SparseMatrix& lowering(int mu) const { return lower_[mu]; }
  const SparseMatrix& raising(int mu) const { return raise_[mu]; }

  // a(f) v = Σ f*_mu a_mu v and a†(f) v = Σ f_mu a†_mu v, matrix-free.
  void apply_annihilation(const CVector& f, const CVector& v, CVector& out) const;
  void apply_creation(const CVector& f, const CVector& v, CVector& out) const;

 private:
  Index count(int positions, int sum) const;

  int modes_;
  int n_max_;
  double eps_;
  Index dim_;
  std::vector<std::vector<Index>> binom_;
  std::vector<Index> sector_offset_;
  std::vector<int> occ_;
  std::vector<int> totals_;
  std::vector<SparseMatrix> lower_;
  std::vector<SparseMatrix> raise_;
};

using FockSpacePtr = std::shared_ptr<const FockSpace>;

class FockOperator {
 public:
  FockOperator(FockSpacePtr space, SparseMatrix matrix, bool hermitian);

  const FockSpacePtr& space() const { return space_; }
  const SparseMatrix& matrix() const { return matrix_; }
  bool hermitian() const { return hermitian_; }
  // Set when a Wick quantization dropped contributions beyond N_max.
  bool truncated() const { return truncated_; }
  void mark_truncated() { truncated_ = true; }

  CVector apply(const CVector& v) const;
  cplx expectation(const CVector& v) const;
  FockOperator adjoint() const;
  double hermiticity_defect() const;

  FockOperator operator+(const FockOperator& o) const;
  FockOperator operator-(const FockOperator& o) const;
  FockOperator operator*(const FockOperator& o) const;
  FockOperator scaled(cplx c) const;

 private:
  void check_same(const FockOperator& o) const;

  FockSpacePtr space_;
  SparseMatrix matrix_;
  bool hermitian_;
  bool truncated_ = false;
};

FockOperator annihilation(const FockSpacePtr& fs, const CVector& f);
FockOperator creation(const FockSpacePtr& fs, const CVector& f);
// One hermitian operator per spatial component of φ(F).
std::vector<FockOperator> field_operator(const FockSpacePtr& fs, const CouplingVector& coupling,
                                         int d);
FockOperator dgamma(const FockSpacePtr& fs, const RVector& t);
FockOperator total_number(const FockSpacePtr& fs);

struct CoherentSpec {
  CVector z;
};

// Smallest N with Poisson(nu) mass above N below tol.
int required_n_max(double nu, double tol);

CVector coherent_state(const FockSpace& fs, const CoherentSpec& cs, double tail_tol = 1e-10);
CVector number_state(const FockSpace& fs, std::span<const int> n);
// Closed form <Ξ(z1), Ξ(z2)> = exp(i Im<z1,z2>/ε - |z1-z2|²/(2ε)).
cplx coherent_overlap(const CVector& z1, const CVector& z2, double eps);

// First and second moments of the ladder operators in a state.
struct FieldMoments {
  double eps = 0.0;
  CVector mean;  // <a_mu>
  CMatrix N;     // <a†_mu a_nu>
  CMatrix P;     // <a_mu a_nu>
  // Coherent moments are rank one in mean; N and P are left empty.
  bool coherent = false;
};

FieldMoments state_moments(const FockSpace& fs, const CVector& psi);
// Exact (untruncated) moments of Ξ_ε(z).
FieldMoments coherent_moments(const CVector& z, double eps);

void save_state(const std::string& path, const CVector& psi, const FockSpace& fs,
                std::uint64_t mode_hash);
struct LoadedState {
  CVector psi;
  double eps;
  int n_max;
  int modes;
  std::uint64_t mode_hash;
};
LoadedState load_state(const std::string& path);

}  // namespace qclimit
