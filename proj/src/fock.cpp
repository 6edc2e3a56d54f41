#include "qclimit/fock.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <limits>

#include <json.hpp>

namespace qclimit {

namespace {

constexpr Index kMaxFockDim = Index(1) << 32;

void check_space(const FockSpace& fs, Index n, const char* what) {
  if (n != fs.modes()) throw InvalidArgument(std::string(what) + ": mode count mismatch");
}

}  // namespace

Index FockSpace::dimension_for(int modes, int n_max) {
  // C(M' + N, N) accumulated exactly; each partial product is itself a binomial.
  long double c = 1.0L;
  for (int k = 1; k <= n_max; ++k) {
    c = c * (modes + k) / k;
    if (c > static_cast<long double>(kMaxFockDim)) return -1;
  }
  return static_cast<Index>(std::llround(static_cast<double>(c)));
}

FockSpace::FockSpace(int modes, int n_max, double eps) : modes_(modes), n_max_(n_max), eps_(eps) {
  if (modes < 1) throw InvalidArgument("Fock space needs at least one mode");
  if (n_max < 0) throw InvalidArgument("N_max must be nonnegative");
  if (!(eps > 0.0)) throw InvalidArgument("ε must be positive");
  dim_ = dimension_for(modes, n_max);
  if (dim_ < 0) throw InvalidArgument("Fock dimension overflows the supported range");

  int top = modes + n_max;
  binom_.assign(top + 1, std::vector<Index>(top + 1, 0));
  for (int n = 0; n <= top; ++n) {
    binom_[n][0] = 1;
    for (int k = 1; k <= n; ++k) binom_[n][k] = binom_[n - 1][k - 1] + (k <= n - 1 ? binom_[n - 1][k] : 0);
  }
  sector_offset_.assign(n_max + 2, 0);
  for (int n = 0; n <= n_max; ++n) sector_offset_[n + 1] = sector_offset_[n] + count(modes, n);

  occ_.reserve(static_cast<std::size_t>(dim_ * modes));
  totals_.reserve(static_cast<std::size_t>(dim_));
  std::vector<int> cur(modes, 0);
  // Lexicographically increasing compositions of each sector total.
  std::function<void(int, int, int)> fill = [&](int pos, int rem, int total) {
    if (pos == modes - 1) {
      cur[pos] = rem;
      occ_.insert(occ_.end(), cur.begin(), cur.end());
      totals_.push_back(total);
      return;
    }
    for (int v = 0; v <= rem; ++v) {
      cur[pos] = v;
      fill(pos + 1, rem - v, total);
    }
  };
  for (int n = 0; n <= n_max; ++n) fill(0, n, n);

  lower_.resize(modes);
  raise_.resize(modes);
  std::vector<int> tmp(modes);
  for (int mu = 0; mu < modes; ++mu) {
    std::vector<Eigen::Triplet<cplx>> trip;
    trip.reserve(static_cast<std::size_t>(dim_));
    for (Index i = 0; i < dim_; ++i) {
      auto n = occupation(i);
      if (n[mu] == 0) continue;
      std::copy(n.begin(), n.end(), tmp.begin());
      tmp[mu] -= 1;
      trip.emplace_back(index_of(tmp), i, std::sqrt(eps * n[mu]));
    }
    lower_[mu].resize(dim_, dim_);
    lower_[mu].setFromTriplets(trip.begin(), trip.end());
    lower_[mu].makeCompressed();
    raise_[mu] = lower_[mu].adjoint();
    raise_[mu].makeCompressed();
  }
}

Index FockSpace::count(int positions, int sum) const {
  if (positions == 0) return sum == 0 ? 1 : 0;
  return binom_[sum + positions - 1][positions - 1];
}

Index FockSpace::index_of(std::span<const int> n) const {
  if (static_cast<int>(n.size()) != modes_) throw InvalidArgument("occupation length mismatch");
  int total = 0;
  for (int v : n) {
    if (v < 0) return -1;
    total += v;
  }
  if (total > n_max_) return -1;
  Index rank = sector_offset_[total];
  int rem = total;
  for (int i = 0; i < modes_ - 1; ++i) {
    for (int v = 0; v < n[i]; ++v) rank += count(modes_ - i - 1, rem - v);
    rem -= n[i];
  }
  return rank;
}

void FockSpace::apply_annihilation(const CVector& f, const CVector& v, CVector& out) const {
  check_space(*this, f.size(), "annihilation");
  out.setZero(dim_);
  for (int mu = 0; mu < modes_; ++mu)
    if (f[mu] != cplx(0.0)) out += std::conj(f[mu]) * (lower_[mu] * v);
}

void FockSpace::apply_creation(const CVector& f, const CVector& v, CVector& out) const {
  check_space(*this, f.size(), "creation");
  out.setZero(dim_);
  for (int mu = 0; mu < modes_; ++mu)
    if (f[mu] != cplx(0.0)) out += f[mu] * (raise_[mu] * v);
}

FockOperator::FockOperator(FockSpacePtr space, SparseMatrix matrix, bool hermitian)
    : space_(std::move(space)), matrix_(std::move(matrix)), hermitian_(hermitian) {
  if (!space_) throw InvalidArgument("Fock operator without a space");
  if (matrix_.rows() != space_->dim() || matrix_.cols() != space_->dim())
    throw InvalidArgument("Fock operator matrix does not match the space dimension");
  matrix_.makeCompressed();
}

CVector FockOperator::apply(const CVector& v) const {
  if (v.size() != space_->dim()) throw InvalidArgument("state dimension mismatch");
  return matrix_ * v;
}

cplx FockOperator::expectation(const CVector& v) const { return v.dot(apply(v)); }

FockOperator FockOperator::adjoint() const {
  SparseMatrix a = matrix_.adjoint();
  FockOperator out(space_, std::move(a), hermitian_);
  out.truncated_ = truncated_;
  return out;
}

double FockOperator::hermiticity_defect() const {
  SparseMatrix diff = matrix_ - SparseMatrix(matrix_.adjoint());
  double scale = matrix_.norm();
  return scale == 0.0 ? diff.norm() : diff.norm() / scale;
}

void FockOperator::check_same(const FockOperator& o) const {
  if (space_ == o.space_) return;
  const FockSpace &a = *space_, &b = *o.space_;
  if (a.eps() != b.eps()) throw InvalidArgument("mixing Fock operators with different ε");
  if (a.modes() != b.modes() || a.n_max() != b.n_max())
    throw InvalidArgument("mixing Fock operators from different spaces");
}

FockOperator FockOperator::operator+(const FockOperator& o) const {
  check_same(o);
  FockOperator r(space_, matrix_ + o.matrix_, hermitian_ && o.hermitian_);
  r.truncated_ = truncated_ || o.truncated_;
  return r;
}

FockOperator FockOperator::operator-(const FockOperator& o) const {
  check_same(o);
  FockOperator r(space_, matrix_ - o.matrix_, hermitian_ && o.hermitian_);
  r.truncated_ = truncated_ || o.truncated_;
  return r;
}

FockOperator FockOperator::operator*(const FockOperator& o) const {
  check_same(o);
  SparseMatrix p = (matrix_ * o.matrix_).pruned();
  FockOperator r(space_, std::move(p), false);
  r.truncated_ = truncated_ || o.truncated_;
  return r;
}

FockOperator FockOperator::scaled(cplx c) const {
  FockOperator r(space_, SparseMatrix(c * matrix_), hermitian_ && c.imag() == 0.0);
  r.truncated_ = truncated_;
  return r;
}

FockOperator annihilation(const FockSpacePtr& fs, const CVector& f) {
  check_space(*fs, f.size(), "annihilation");
  SparseMatrix m(fs->dim(), fs->dim());
  for (int mu = 0; mu < fs->modes(); ++mu)
    if (f[mu] != cplx(0.0)) m += std::conj(f[mu]) * fs->lowering(mu);
  return FockOperator(fs, std::move(m), false);
}

FockOperator creation(const FockSpacePtr& fs, const CVector& f) {
  check_space(*fs, f.size(), "creation");
  SparseMatrix m(fs->dim(), fs->dim());
  for (int mu = 0; mu < fs->modes(); ++mu)
    if (f[mu] != cplx(0.0)) m += f[mu] * fs->raising(mu);
  return FockOperator(fs, std::move(m), false);
}

std::vector<FockOperator> field_operator(const FockSpacePtr& fs, const CouplingVector& coupling,
                                         int d) {
  check_space(*fs, coupling.size(), "field_operator");
  std::vector<FockOperator> out;
  for (int i = 0; i < d; ++i) {
    CVector f = coupling.component(i);
    SparseMatrix m = creation(fs, f).matrix() + annihilation(fs, f).matrix();
    out.emplace_back(fs, std::move(m), true);
  }
  return out;
}

FockOperator dgamma(const FockSpacePtr& fs, const RVector& t) {
  check_space(*fs, t.size(), "dgamma");
  for (Index i = 0; i < t.size(); ++i)
    if (!(t[i] >= 0.0)) throw InvalidArgument("dΓ needs a nonnegative one-particle operator");
  std::vector<Eigen::Triplet<cplx>> trip;
  for (Index i = 0; i < fs->dim(); ++i) {
    auto n = fs->occupation(i);
    double e = 0.0;
    for (int mu = 0; mu < fs->modes(); ++mu) e += t[mu] * n[mu];
    if (e != 0.0) trip.emplace_back(i, i, fs->eps() * e);
  }
  SparseMatrix m(fs->dim(), fs->dim());
  m.setFromTriplets(trip.begin(), trip.end());
  return FockOperator(fs, std::move(m), true);
}

FockOperator total_number(const FockSpacePtr& fs) {
  return dgamma(fs, RVector::Ones(fs->modes()));
}

int required_n_max(double nu, double tol) {
  if (nu <= 0.0) return 0;
  int kmax = static_cast<int>(nu + 40.0 * std::sqrt(nu) + 60.0);
  std::vector<double> pmf(kmax + 1);
  for (int k = 0; k <= kmax; ++k)
    pmf[k] = std::exp(-nu + k * std::log(nu) - std::lgamma(k + 1.0));
  double tail = 0.0;
  // tail after N accumulated from the top; smallest N whose tail is under tol
  int best = kmax;
  for (int n = kmax; n >= 0; --n) {
    if (tail >= tol) break;
    best = n;
    tail += pmf[n];
  }
  return best;
}

CVector coherent_state(const FockSpace& fs, const CoherentSpec& cs, double tail_tol) {
  check_space(fs, cs.z.size(), "coherent_state");
  const double eps = fs.eps();
  double nu = cs.z.squaredNorm() / eps;
  int need = required_n_max(nu, tail_tol);
  if (need > fs.n_max())
    throw TruncationError("coherent state tail exceeds tolerance; need N_max >= " +
                              std::to_string(need),
                          need);
  CVector psi = CVector::Zero(fs.dim());
  CVector v = CVector::Zero(fs.dim());
  v[0] = std::exp(-0.5 * nu);
  psi += v;
  CVector next;
  for (int k = 1; k <= fs.n_max(); ++k) {
    fs.apply_creation(cs.z, v, next);
    v = next / (eps * k);
    psi += v;
  }
  double norm = psi.norm();
  double tail = 1.0 - norm * norm;
  // 1 - |ψ|² carries rounding of a few ulps
  if (tail > tail_tol + 64 * std::numeric_limits<double>::epsilon())
    throw TruncationError("coherent state tail mass " + std::to_string(tail) + " above tolerance",
                          need + 1);
  return psi / norm;
}

CVector number_state(const FockSpace& fs, std::span<const int> n) {
  Index i = fs.index_of(n);
  if (i < 0) throw InvalidArgument("occupation exceeds the truncation");
  CVector psi = CVector::Zero(fs.dim());
  psi[i] = 1.0;
  return psi;
}

cplx coherent_overlap(const CVector& z1, const CVector& z2, double eps) {
  if (z1.size() != z2.size()) throw InvalidArgument("overlap: mode count mismatch");
  cplx ip = z1.dot(z2);
  return std::exp(cplx(-(z1 - z2).squaredNorm() / (2.0 * eps), ip.imag() / eps));
}

FieldMoments state_moments(const FockSpace& fs, const CVector& psi) {
  if (psi.size() != fs.dim()) throw InvalidArgument("state dimension mismatch");
  const int M = fs.modes();
  FieldMoments out;
  out.eps = fs.eps();
  out.mean.resize(M);
  out.N.resize(M, M);
  out.P.resize(M, M);
  std::vector<CVector> u(M);
  for (int mu = 0; mu < M; ++mu) {
    u[mu] = fs.lowering(mu) * psi;
    out.mean[mu] = psi.dot(u[mu]);
  }
  for (int mu = 0; mu < M; ++mu) {
    CVector up = fs.raising(mu) * psi;  // <ψ, a_mu a_nu ψ> = <a†_mu ψ, a_nu ψ>
    for (int nu = 0; nu < M; ++nu) {
      out.N(mu, nu) = u[mu].dot(u[nu]);
      out.P(mu, nu) = up.dot(u[nu]);
    }
  }
  return out;
}

FieldMoments coherent_moments(const CVector& z, double eps) {
  FieldMoments out;
  out.eps = eps;
  out.mean = z;
  out.coherent = true;
  return out;
}

void save_state(const std::string& path, const CVector& psi, const FockSpace& fs,
                std::uint64_t mode_hash) {
  if (psi.size() != fs.dim()) throw InvalidArgument("state dimension mismatch");
  std::ofstream bin(path, std::ios::binary);
  if (!bin) throw IoError("cannot write " + path);
  bin.write(reinterpret_cast<const char*>(psi.data()),
            static_cast<std::streamsize>(psi.size() * sizeof(cplx)));
  if (!bin) throw IoError("short write to " + path);
  nlohmann::json side = {{"eps", fs.eps()},
                         {"n_max", fs.n_max()},
                         {"modes", fs.modes()},
                         {"dim", fs.dim()},
                         {"mode_set_hash", mode_hash}};
  std::ofstream js(path + ".json");
  if (!js) throw IoError("cannot write " + path + ".json");
  js << side.dump(2) << '\n';
}

LoadedState load_state(const std::string& path) {
  std::ifstream js(path + ".json");
  if (!js) throw IoError("missing sidecar " + path + ".json");
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(js);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad sidecar: ") + e.what());
  }
  LoadedState out;
  out.eps = side.at("eps").get<double>();
  out.n_max = side.at("n_max").get<int>();
  out.modes = side.at("modes").get<int>();
  out.mode_hash = side.at("mode_set_hash").get<std::uint64_t>();
  Index dim = side.at("dim").get<Index>();
  std::ifstream bin(path, std::ios::binary);
  if (!bin) throw IoError("cannot read " + path);
  out.psi.resize(dim);
  bin.read(reinterpret_cast<char*>(out.psi.data()), static_cast<std::streamsize>(dim * sizeof(cplx)));
  if (bin.gcount() != static_cast<std::streamsize>(dim * sizeof(cplx)))
    throw IoError("truncated state file " + path);
  return out;
}

}  // namespace qclimit
