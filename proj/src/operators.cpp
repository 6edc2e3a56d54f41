#include <cmath>

#include "qclimit/schrodinger.hpp"

namespace qclimit {

MSOOperator::MSOOperator(ParticleGrid grid, SparseMatrix matrix, OperatorMeta meta)
    : grid_(std::move(grid)), matrix_(std::move(matrix)), meta_(std::move(meta)) {
  if (matrix_.rows() != grid_.dim() || matrix_.cols() != grid_.dim())
    throw InvalidArgument("operator matrix does not match the grid");
  matrix_.makeCompressed();
}

double MSOOperator::hermiticity_defect() const {
  SparseMatrix diff = matrix_ - SparseMatrix(matrix_.adjoint());
  double scale = matrix_.norm();
  return scale == 0.0 ? diff.norm() : diff.norm() / scale;
}

LinearOperator MSOOperator::linear() const {
  const SparseMatrix* m = &matrix_;
  return {dim(), [m](const CVector& in, CVector& out) { out = (*m) * in; }};
}

double MSOOperator::gershgorin_lower() const {
  RVector diag = RVector::Zero(dim()), off = RVector::Zero(dim());
  for (Index c = 0; c < matrix_.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(matrix_, c); it; ++it) {
      if (it.row() == it.col())
        diag[it.row()] += it.value().real();
      else
        off[it.row()] += std::abs(it.value());
    }
  return (diag - off).minCoeff();
}

namespace {

enum class DiagTerm { none, split, phi2 };

MSOOperator assemble(const ParticleGrid& grid, const EffectiveFields* fields, DiagTerm diag_term,
                     const Potential& V, OperatorMeta meta) {
  const int d = grid.dimension(), N = grid.particles(), s = grid.spin();
  const double h = grid.h(), h2 = h * h;
  const Index npts = grid.points();
  if (fields) {
    if (fields->particles != N || fields->points != npts || fields->d != d)
      throw InvalidArgument("fields were not sampled on this grid");
  }
  const bool zeeman = fields && fields->has_spin && s > 1;

  std::vector<Index> stride(N, 1);
  for (int j = N - 2; j >= 0; --j) stride[j] = stride[j + 1] * npts;

  std::vector<Eigen::Triplet<cplx>> trip;
  trip.reserve(static_cast<std::size_t>(grid.dim() * (1 + 2 * d * N + (zeeman ? s : 0))));
  std::vector<Point> xs(N);
  for (Index C = 0; C < grid.configurations(); ++C) {
    auto ps = grid.split(C);
    for (int j = 0; j < N; ++j) xs[j] = grid.point(ps[j]);
    double v = V(xs);
    if (!std::isfinite(v)) throw InvalidArgument("potential is not finite at a grid point");
    double dval = 2.0 * d * N / h2 + v;
    if (fields) {
      for (int j = 0; j < N; ++j) {
        if (diag_term == DiagTerm::split)
          dval += fields->A[j].row(ps[j]).squaredNorm() + fields->W[j][ps[j]];
        else if (diag_term == DiagTerm::phi2)
          dval += fields->phi2[j][ps[j]];
      }
    }
    for (int a = 0; a < s; ++a) trip.emplace_back(C * s + a, C * s + a, dval);

    if (zeeman) {
      for (int j = 0; j < N; ++j) {
        CMatrix blk = CMatrix::Zero(s, s);
        for (int i = 0; i < d; ++i) blk -= fields->B[j](ps[j], i) * grid.sigma(j)[i];
        for (int a = 0; a < s; ++a)
          for (int b = 0; b < s; ++b)
            if (blk(a, b) != cplx(0.0)) trip.emplace_back(C * s + a, C * s + b, blk(a, b));
      }
    }

    for (int j = 0; j < N; ++j) {
      for (int k = 0; k < d; ++k) {
        Index q = grid.neighbor(ps[j], k, +1);
        if (q < 0) continue;
        Index C2 = C + (q - ps[j]) * stride[j];
        double abar = 0.0;
        if (fields) abar = 0.5 * (fields->A[j](ps[j], k) + fields->A[j](q, k));
        cplx val(-1.0 / h2, abar / h);
        for (int a = 0; a < s; ++a) {
          trip.emplace_back(C * s + a, C2 * s + a, val);
          trip.emplace_back(C2 * s + a, C * s + a, std::conj(val));
        }
      }
    }
  }
  SparseMatrix m(grid.dim(), grid.dim());
  m.setFromTriplets(trip.begin(), trip.end());
  meta.potential = V.description;
  MSOOperator op(grid, std::move(m), std::move(meta));
  if (op.hermiticity_defect() > 1e-12) throw NumericalError("assembled operator is not hermitian");
  return op;
}

}  // namespace

MSOOperator dirichlet_laplacian(const ParticleGrid& grid) {
  return assemble(grid, nullptr, DiagTerm::none, Potential::zero(), {});
}

MSOOperator assemble_effective(const EffectiveFields& fields, const Potential& V,
                               const ParticleGrid& grid) {
  OperatorMeta meta;
  meta.provenance = fields.provenance == Provenance::measure ? "measure" : "state";
  meta.eps = fields.eps;
  DiagTerm t = fields.provenance == Provenance::measure ? DiagTerm::split : DiagTerm::phi2;
  return assemble(grid, &fields, t, V, meta);
}

MSOOperator assemble_Heps(const CVector& state, const FockSpace& fs, const FormFactor& ff,
                          const ModeSet& ms, const Potential& V, const ParticleGrid& grid) {
  return assemble_effective(effective_fields_eps(state, fs, ff, ms, grid), V, grid);
}

MSOOperator assemble_Heps(const FieldMoments& mom, const FormFactor& ff, const ModeSet& ms,
                          const Potential& V, const ParticleGrid& grid) {
  return assemble_effective(effective_fields_moments(mom, ff, ms, grid), V, grid);
}

EffectiveFields fields_from_potential(const ParticleGrid& grid,
                                      const std::function<Point(const Point&)>& A) {
  EffectiveFields f = EffectiveFields::zeros(grid, Provenance::measure);
  for (int j = 0; j < grid.particles(); ++j)
    for (Index p = 0; p < grid.points(); ++p) {
      Point a = A(grid.point(p));
      f.A[j].row(p) = a.head(grid.dimension()).transpose();
      f.phi2[j][p] = a.head(grid.dimension()).squaredNorm();
    }
  return f;
}

}  // namespace qclimit
