#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace qclimit {

using cplx = std::complex<double>;
using Index = Eigen::Index;
// Points and directions always carry three components; unused ones are zero in 2D.
using Point = Eigen::Vector3d;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using SparseMatrix = Eigen::SparseMatrix<cplx>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Raised when a Fock truncation cannot hold a state to the requested tail mass.
class TruncationError : public Error {
 public:
  TruncationError(const std::string& what, int required_n_max)
      : Error(what), required_n_max_(required_n_max) {}
  int required_n_max() const { return required_n_max_; }

 private:
  int required_n_max_;
};

// FNV-1a over raw bytes, used for mode-set and config fingerprints.
inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = 1469598103934665603ull) {
  auto p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace qclimit
