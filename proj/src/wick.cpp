#include "qclimit/wick.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <numbers>

namespace qclimit {

namespace {

Index ipow(int base, int e) {
  Index r = 1;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

void unflatten(Index flat, int modes, int slots, std::vector<int>& out) {
  out.resize(slots);
  for (int s = slots - 1; s >= 0; --s) {
    out[s] = static_cast<int>(flat % modes);
    flat /= modes;
  }
}

Index flatten(const std::vector<int>& idx, int modes) {
  Index f = 0;
  for (int v : idx) f = f * modes + v;
  return f;
}

CVector tensor_power(const CVector& z, int p) {
  CVector out = CVector::Ones(1);
  for (int k = 0; k < p; ++k) {
    CVector next(out.size() * z.size());
    for (Index a = 0; a < out.size(); ++a) next.segment(a * z.size(), z.size()) = out[a] * z;
    out = std::move(next);
  }
  return out;
}

// Index permutation tables for all reorderings of `slots` slots.
std::vector<std::vector<Index>> slot_permutations(int modes, int slots) {
  std::vector<int> perm(slots);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::vector<Index>> maps;
  Index n = ipow(modes, slots);
  std::vector<int> idx, moved(slots);
  do {
    std::vector<Index> map(n);
    for (Index f = 0; f < n; ++f) {
      unflatten(f, modes, slots, idx);
      for (int s = 0; s < slots; ++s) moved[s] = idx[perm[s]];
      map[f] = flatten(moved, modes);
    }
    maps.push_back(std::move(map));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return maps;
}

}  // namespace

PolySymbol::PolySymbol(int modes, int p, int q, CMatrix kernel, std::string label)
    : modes_(modes), p_(p), q_(q), kernel_(std::move(kernel)), label_(std::move(label)) {
  if (modes < 1 || p < 0 || q < 0) throw InvalidArgument("bad symbol degrees");
  if (kernel_.rows() != ipow(modes, q) || kernel_.cols() != ipow(modes, p))
    throw InvalidArgument("symbol kernel shape does not match (p, q)");
  if (!kernel_.allFinite()) throw InvalidArgument("symbol kernel is not finite");
}

PolySymbol PolySymbol::zero(int modes, int p, int q) {
  return PolySymbol(modes, p, q, CMatrix::Zero(ipow(modes, q), ipow(modes, p)), "zero");
}

PolySymbol PolySymbol::product(int modes, const std::vector<CVector>& eta,
                               const std::vector<CVector>& xi, std::string label) {
  CVector out = CVector::Ones(1), in = CVector::Ones(1);
  auto kron = [](const CVector& a, const CVector& b) {
    CVector r(a.size() * b.size());
    for (Index i = 0; i < a.size(); ++i) r.segment(i * b.size(), b.size()) = a[i] * b;
    return r;
  };
  for (const auto& e : eta) {
    if (e.size() != modes) throw InvalidArgument("symbol factor length mismatch");
    out = kron(out, e);
  }
  for (const auto& x : xi) {
    if (x.size() != modes) throw InvalidArgument("symbol factor length mismatch");
    in = kron(in, x.conjugate());
  }
  PolySymbol s(modes, static_cast<int>(xi.size()), static_cast<int>(eta.size()),
               out * in.transpose(), std::move(label));
  return s.symmetrized();
}

PolySymbol PolySymbol::quadratic(const CMatrix& t, std::string label) {
  if (t.rows() != t.cols()) throw InvalidArgument("quadratic symbol needs a square kernel");
  return PolySymbol(static_cast<int>(t.rows()), 1, 1, t, std::move(label));
}

PolySymbol PolySymbol::conjugate() const {
  return PolySymbol(modes_, q_, p_, kernel_.adjoint(), label_.empty() ? "" : label_ + "*");
}

PolySymbol PolySymbol::symmetrized() const {
  if (p_ <= 1 && q_ <= 1) return *this;
  auto rows = slot_permutations(modes_, q_);
  auto cols = slot_permutations(modes_, p_);
  CMatrix acc = CMatrix::Zero(kernel_.rows(), kernel_.cols());
  for (const auto& rm : rows)
    for (const auto& cm : cols)
      for (Index c = 0; c < kernel_.cols(); ++c)
        for (Index r = 0; r < kernel_.rows(); ++r) acc(r, c) += kernel_(rm[r], cm[c]);
  acc /= static_cast<double>(rows.size() * cols.size());
  return PolySymbol(modes_, p_, q_, std::move(acc), label_);
}

PolySymbol PolySymbol::operator+(const PolySymbol& o) const {
  if (o.modes_ != modes_ || o.p_ != p_ || o.q_ != q_)
    throw InvalidArgument("adding symbols of different shape");
  return PolySymbol(modes_, p_, q_, kernel_ + o.kernel_, label_);
}

PolySymbol PolySymbol::scaled(cplx c) const {
  return PolySymbol(modes_, p_, q_, c * kernel_, label_);
}

double PolySymbol::symmetry_defect() const {
  double scale = std::max(kernel_.norm(), 1e-300);
  return (symmetrized().kernel_ - kernel_).norm() / scale;
}

WignerMeasure WignerMeasure::point_mass(const CVector& z) { return {{1.0}, {z}}; }

WignerMeasure WignerMeasure::circle(const CVector& z0, int points) {
  if (points < 1) throw InvalidArgument("circle measure needs at least one point");
  WignerMeasure mu;
  for (int k = 0; k < points; ++k) {
    mu.weights.push_back(1.0 / points);
    mu.points.push_back(std::polar(1.0, 2.0 * std::numbers::pi * k / points) * z0);
  }
  return mu;
}

void WignerMeasure::validate() const {
  if (points.empty() || points.size() != weights.size())
    throw InvalidArgument("measure needs matching, nonempty weights and points");
  double total = 0.0;
  for (double a : weights) {
    if (!(a >= 0.0)) throw InvalidArgument("measure weights must be nonnegative");
    total += a;
  }
  if (std::abs(total - 1.0) > 1e-12) throw InvalidArgument("measure weights must sum to 1");
  for (const auto& z : points)
    if (z.size() != points.front().size()) throw InvalidArgument("measure points differ in length");
}

cplx evaluate(const PolySymbol& sym, const CVector& z) {
  if (z.size() != sym.modes()) throw InvalidArgument("evaluate: mode count mismatch");
  CVector in = tensor_power(z, sym.p());
  CVector out = tensor_power(z, sym.q());
  return out.dot(sym.kernel() * in);
}

FockOperator quantize(const FockSpacePtr& fs, const PolySymbol& sym, const WickOptions& opt) {
  if (sym.modes() != fs->modes()) throw InvalidArgument("quantize: mode count mismatch");
  if (sym.p() + sym.q() > opt.max_degree)
    throw InvalidArgument("symbol degree exceeds the configured maximum");
  const int M = fs->modes();
  const double eps = fs->eps();
  const CMatrix& K = sym.kernel();
  const Index nin = K.cols(), nout = K.rows();

  std::vector<bool> live(nin, false);
  for (Index c = 0; c < nin; ++c) live[c] = K.col(c).cwiseAbs().maxCoeff() != 0.0;

  std::vector<Eigen::Triplet<cplx>> trip;
  bool dropped = false;
  std::vector<int> n(M), in_idx, out_idx;
  for (Index col = 0; col < fs->dim(); ++col) {
    auto occ = fs->occupation(col);
    for (Index ci = 0; ci < nin; ++ci) {
      if (!live[ci]) continue;
      std::copy(occ.begin(), occ.end(), n.begin());
      unflatten(ci, M, sym.p(), in_idx);
      double coef = 1.0;
      for (int mu : in_idx) {
        if (n[mu] == 0) {
          coef = 0.0;
          break;
        }
        coef *= std::sqrt(eps * n[mu]);
        --n[mu];
      }
      if (coef == 0.0) continue;
      std::vector<int> base = n;
      for (Index ro = 0; ro < nout; ++ro) {
        cplx k = K(ro, ci);
        if (k == cplx(0.0)) continue;
        n = base;
        unflatten(ro, M, sym.q(), out_idx);
        double c2 = coef;
        for (int mu : out_idx) {
          ++n[mu];
          c2 *= std::sqrt(eps * n[mu]);
        }
        Index row = fs->index_of(n);
        if (row < 0) {
          dropped = true;
          continue;
        }
        trip.emplace_back(row, col, k * c2);
      }
    }
  }
  SparseMatrix m(fs->dim(), fs->dim());
  m.setFromTriplets(trip.begin(), trip.end());
  bool herm = sym.p() == sym.q() && (K - K.adjoint()).norm() <= 1e-13 * std::max(K.norm(), 1e-300);
  FockOperator op(fs, std::move(m), herm);
  if (dropped) op.mark_truncated();
  return op;
}

cplx classical_expectation(const WignerMeasure& mu, const PolySymbol& sym) {
  mu.validate();
  cplx s = 0.0;
  for (int l = 0; l < mu.size(); ++l) s += mu.weights[l] * evaluate(sym, mu.points[l]);
  return s;
}

std::vector<GapRow> semiclassical_gap(const std::vector<FockSpacePtr>& spaces,
                                      const std::vector<CVector>& states, const WignerMeasure& mu,
                                      const PolySymbol& sym, const WickOptions& opt) {
  if (spaces.size() != states.size()) throw InvalidArgument("one state per Fock space required");
  cplx limit = classical_expectation(mu, sym);
  std::vector<GapRow> rows;
  for (std::size_t i = 0; i < spaces.size(); ++i) {
    if (std::abs(states[i].norm() - 1.0) > 1e-10) throw InvalidArgument("state is not normalized");
    FockOperator op = quantize(spaces[i], sym, opt);
    rows.push_back({spaces[i]->eps(), std::abs(op.expectation(states[i]) - limit)});
  }
  std::sort(rows.begin(), rows.end(), [](const GapRow& a, const GapRow& b) { return a.eps > b.eps; });
  return rows;
}

}  // namespace qclimit
