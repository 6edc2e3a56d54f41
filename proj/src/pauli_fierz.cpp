#include <cmath>

#include <fmt/format.h>

#include "qclimit/schrodinger.hpp"

namespace qclimit {

namespace {

struct CouplingTables {
  std::vector<CMatrix> F, G, Flink;  // Flink[k] holds component k averaged over the +k link
  RVector norm2;                     // |F(p)|² summed over components
  bool spin = false;
};

CouplingTables tabulate(const ParticleGrid& grid, const ModeSet& ms, const FormFactor& ff) {
  const int d = grid.dimension();
  const int M = ms.field_modes();
  const Index npts = grid.points();
  const Domain dom = grid.domain();
  CouplingTables t;
  t.spin = ff.has_spin();
  t.F.assign(d, CMatrix::Zero(npts, M));
  if (t.spin) t.G.assign(d, CMatrix::Zero(npts, M));
  t.norm2 = RVector::Zero(npts);
  for (Index p = 0; p < npts; ++p) {
    Point x = grid.point(p);
    CouplingVector cv = coupling_vector(ms, ff, 0, x, dom);
    t.norm2[p] = coupling_norm2(cv);
    for (int i = 0; i < d; ++i) t.F[i].row(p) = cv.component(i).transpose();
    if (t.spin) {
      CouplingVector sv = coupling_vector(ms, ff, 0, x, dom, CouplingKind::spin);
      for (int i = 0; i < d; ++i) t.G[i].row(p) = sv.component(i).transpose();
    }
  }
  t.Flink.assign(d, CMatrix::Zero(npts, M));
  for (int k = 0; k < d; ++k)
    for (Index p = 0; p < npts; ++p) {
      Index q = grid.neighbor(p, k, +1);
      if (q >= 0) t.Flink[k].row(p) = 0.5 * (t.F[k].row(p) + t.F[k].row(q));
    }
  return t;
}

}  // namespace

PFOperator::PFOperator(const ParticleGrid& grid, FockSpacePtr fs, const ModeSet& ms,
                       const FormFactor& ff, const Potential& V, const PFBudget& budget)
    : grid_(grid), fs_(std::move(fs)), d_(grid.dimension()) {
  if (grid.particles() != 1) throw InvalidArgument("full Pauli-Fierz operator supports N = 1 only");
  if (ff.particles() != 1) throw InvalidArgument("form factor must describe one particle");
  if (fs_->modes() != ms.field_modes()) throw InvalidArgument("Fock space and mode set disagree");
  if (ff.has_spin() && grid.spin() == 1) throw InvalidArgument("spin couplings given but s = 1");
  if (grid.interior() > budget.max_grid_side)
    throw InvalidArgument(fmt::format("grid side {} exceeds the full-operator budget {}",
                                      grid.interior(), budget.max_grid_side));
  dimF_ = fs_->dim();
  dim_ = grid.dim() * dimF_;
  if (dimF_ > budget.max_fock_dim || dim_ > budget.max_dim) {
    double mib = static_cast<double>(dim_) * sizeof(cplx) * 100.0 / (1024.0 * 1024.0);
    throw InvalidArgument(fmt::format(
        "full operator dimension {} (Fock {}) over budget; Krylov storage would need ~{:.0f} MiB",
        dim_, dimF_, mib));
  }
  CouplingTables t = tabulate(grid, ms, ff);
  F_ = std::move(t.F);
  G_ = std::move(t.G);
  Flink_ = std::move(t.Flink);
  const double h2 = grid.h() * grid.h();
  diag_.resize(grid.points());
  for (Index p = 0; p < grid.points(); ++p) {
    Point x = grid.point(p);
    double v = V(std::span<const Point>(&x, 1));
    if (!std::isfinite(v)) throw InvalidArgument("potential is not finite at a grid point");
    diag_[p] = 2.0 * d_ / h2 + v + fs_->eps() * t.norm2[p];
  }
  dgam_ = dgamma(fs_, ms.field_omegas()).matrix().diagonal().real();
}

void PFOperator::phi(const CMatrix& F, Index row, const CVector& x, CVector& out,
                     CVector& tmp) const {
  CVector f = F.row(row).transpose();
  fs_->apply_creation(f, x, out);
  fs_->apply_annihilation(f, x, tmp);
  out += tmp;
}

void PFOperator::apply(const CVector& in, CVector& out) const {
  if (in.size() != dim_) throw InvalidArgument("vector dimension mismatch");
  out.setZero(dim_);
  const int s = grid_.spin();
  const double h = grid_.h(), h2 = h * h;
  const cplx ih(0.0, 1.0 / h);
  auto blk = [&](const CVector& v, Index p, int a) { return v.segment((p * s + a) * dimF_, dimF_); };
  CVector x, o, u, w, t1, t2, y;
  for (Index p = 0; p < grid_.points(); ++p) {
    for (int a = 0; a < s; ++a) {
      x = blk(in, p, a);
      o = diag_[p] * x + dgam_.cwiseProduct(x);
      for (int i = 0; i < d_; ++i) {
        CVector f = F_[i].row(p).transpose();
        if (f.squaredNorm() == 0.0) continue;
        // normal-ordered φ_i² = a†a† + aa + 2a†a; the ε|F|² part sits in diag_
        fs_->apply_annihilation(f, x, u);
        fs_->apply_creation(f, x, w);
        fs_->apply_annihilation(f, u, t1);
        o += t1;
        fs_->apply_creation(f, w, t1);
        o += t1;
        fs_->apply_creation(f, u, t1);
        o += 2.0 * t1;
      }
      for (int k = 0; k < d_; ++k) {
        Index qp = grid_.neighbor(p, k, +1), qm = grid_.neighbor(p, k, -1);
        if (qp >= 0) {
          y = blk(in, qp, a);
          o -= y / h2;
          phi(Flink_[k], p, y, t1, t2);
          o += ih * t1;
        }
        if (qm >= 0) {
          y = blk(in, qm, a);
          o -= y / h2;
          phi(Flink_[k], qm, y, t1, t2);
          o -= ih * t1;
        }
      }
      out.segment((p * s + a) * dimF_, dimF_) += o;
    }
    if (!G_.empty()) {
      for (int i = 0; i < d_; ++i) {
        const CMatrix& sig = grid_.sigma(0)[i];
        for (int b = 0; b < s; ++b) {
          if (sig.col(b).cwiseAbs().maxCoeff() == 0.0) continue;
          phi(G_[i], p, blk(in, p, b), t1, t2);
          for (int a = 0; a < s; ++a)
            if (sig(a, b) != cplx(0.0)) out.segment((p * s + a) * dimF_, dimF_) -= sig(a, b) * t1;
        }
      }
    }
  }
}

CVector PFOperator::apply(const CVector& in) const {
  CVector out;
  apply(in, out);
  return out;
}

LinearOperator PFOperator::linear() const {
  return {dim_, [this](const CVector& in, CVector& out) { apply(in, out); }};
}

CVector PFOperator::product_state(const CVector& psi, const CVector& chi) const {
  if (psi.size() != grid_.dim() || chi.size() != dimF_)
    throw InvalidArgument("product state factors have the wrong dimension");
  CVector out(dim_);
  for (Index r = 0; r < psi.size(); ++r) out.segment(r * dimF_, dimF_) = psi[r] * chi;
  return out;
}

SuperpositionValue coherent_superposition_expectation(const std::vector<Branch>& branches,
                                                      double eps, const FormFactor& ff,
                                                      const ModeSet& ms, const Potential& V,
                                                      const ParticleGrid& grid) {
  if (branches.empty()) throw InvalidArgument("need at least one branch");
  if (grid.particles() != 1 || ff.particles() != 1)
    throw InvalidArgument("superposition formula implemented for N = 1");
  if (!(eps > 0.0)) throw InvalidArgument("ε must be positive");
  const int M = ms.field_modes();
  const std::size_t nb = branches.size();
  for (const auto& b : branches) {
    if (b.z.size() != M) throw InvalidArgument("branch z does not match the mode set");
    if (b.psi.size() != grid.dim()) throw InvalidArgument("branch ψ does not match the grid");
    if (std::abs(b.psi.norm() - 1.0) > 1e-10) throw InvalidArgument("branch ψ is not normalized");
  }
  for (std::size_t a = 0; a < nb; ++a)
    for (std::size_t b = a + 1; b < nb; ++b)
      if ((branches[a].z - branches[b].z).norm() == 0.0)
        throw InvalidArgument("coincident coherent branches");

  const int d = grid.dimension(), s = grid.spin();
  const double h = grid.h(), h2 = h * h;
  const cplx ih(0.0, 1.0 / h);
  CouplingTables t = tabulate(grid, ms, ff);
  RVector om = ms.field_omegas();
  const Index npts = grid.points();
  RVector base(npts);
  for (Index p = 0; p < npts; ++p) {
    Point x = grid.point(p);
    double v = V(std::span<const Point>(&x, 1));
    if (!std::isfinite(v)) throw InvalidArgument("potential is not finite at a grid point");
    base[p] = 2.0 * d / h2 + v + eps * t.norm2[p];
  }

  cplx energy = 0.0, norm = 0.0;
  for (std::size_t j = 0; j < nb; ++j) {
    for (std::size_t k = 0; k < nb; ++k) {
      const CVector &zj = branches[j].z, &zk = branches[k].z;
      const CVector &pj = branches[j].psi, &pk = branches[k].psi;
      cplx ov = coherent_overlap(zj, zk, eps);
      cplx w = std::conj(branches[j].zeta) * branches[k].zeta * ov;
      // a† -> <z_j, ·>, a -> <·, z_k>
      auto beta = [&](const CMatrix& F, Index p) {
        CVector f = F.row(p).transpose();
        return zj.dot(f) + f.dot(zk);
      };
      cplx c = 0.0;
      for (int mu = 0; mu < M; ++mu) c += om[mu] * std::conj(zj[mu]) * zk[mu];
      CVector hp = CVector::Zero(grid.dim());
      for (Index p = 0; p < npts; ++p) {
        cplx dv = base[p] + c;
        for (int i = 0; i < d; ++i) {
          cplx b = beta(t.F[i], p);
          dv += b * b;
        }
        CMatrix zee = CMatrix::Zero(s, s);
        if (t.spin)
          for (int i = 0; i < d; ++i) zee -= beta(t.G[i], p) * grid.sigma(0)[i];
        for (int a = 0; a < s; ++a) {
          cplx acc = dv * pk[p * s + a];
          for (int b = 0; b < s; ++b) acc += zee(a, b) * pk[p * s + b];
          for (int kk = 0; kk < d; ++kk) {
            Index qp = grid.neighbor(p, kk, +1), qm = grid.neighbor(p, kk, -1);
            if (qp >= 0) acc += (-1.0 / h2 + ih * beta(t.Flink[kk], p)) * pk[qp * s + a];
            if (qm >= 0) acc += (-1.0 / h2 - ih * beta(t.Flink[kk], qm)) * pk[qm * s + a];
          }
          hp[p * s + a] = acc;
        }
      }
      energy += w * pj.dot(hp);
      norm += w * pj.dot(pk);
    }
  }
  if (!(norm.real() > 0.0)) throw NumericalError("superposition has zero norm");
  SuperpositionValue out;
  out.energy = energy.real() / norm.real();
  for (const auto& b : branches) out.zeta.push_back(b.zeta / std::sqrt(norm.real()));
  return out;
}

}  // namespace qclimit
