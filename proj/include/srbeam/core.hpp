#pragma once

// Core value types shared by every module: dense complex matrices, the
// validated system configuration, channel/phase containers, error types,
// and the seeded random stream.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace srbeam {

using Cx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

// Thrown when an iterative kernel breaks down or an input violates a
// numerical precondition (non-PD determinant argument, etc.).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown on shape mismatches and malformed arguments.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Thrown by the experiment config parser; carries line context in the text.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// ComplexMatrix: dense row-major complex double matrix with the handful of
// operations this project needs. Sizes are desk scale (<= 64), so no blocking
// or expression templates.

class ComplexMatrix {
 public:
  ComplexMatrix() = default;
  ComplexMatrix(int rows, int cols)
      : rows_(rows), cols_(cols), d_(static_cast<size_t>(rows) * cols) {
    if (rows < 0 || cols < 0) throw DimensionError("negative matrix size");
  }

  static ComplexMatrix zeros(int r, int c) { return ComplexMatrix(r, c); }
  static ComplexMatrix identity(int n) {
    ComplexMatrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool empty() const { return d_.empty(); }

  Cx& operator()(int i, int j) { return d_[static_cast<size_t>(i) * cols_ + j]; }
  const Cx& operator()(int i, int j) const {
    return d_[static_cast<size_t>(i) * cols_ + j];
  }

  std::vector<Cx>& data() { return d_; }
  const std::vector<Cx>& data() const { return d_; }

  bool all_finite() const {
    for (const Cx& v : d_)
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    return true;
  }

  void require_finite(const char* what) const {
    if (!all_finite()) throw NumericalError(std::string(what) + ": non-finite entry");
  }

  double max_abs() const {
    double m = 0.0;
    for (const Cx& v : d_) m = std::max(m, std::abs(v));
    return m;
  }

  double frobenius() const {
    double s = 0.0;
    for (const Cx& v : d_) s += std::norm(v);
    return std::sqrt(s);
  }

 private:
  int rows_ = 0, cols_ = 0;
  std::vector<Cx> d_;
};

inline ComplexMatrix operator+(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError("matrix add: shape mismatch");
  ComplexMatrix r(a.rows(), a.cols());
  for (size_t i = 0; i < r.data().size(); ++i) r.data()[i] = a.data()[i] + b.data()[i];
  return r;
}

inline ComplexMatrix operator-(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError("matrix sub: shape mismatch");
  ComplexMatrix r(a.rows(), a.cols());
  for (size_t i = 0; i < r.data().size(); ++i) r.data()[i] = a.data()[i] - b.data()[i];
  return r;
}

inline ComplexMatrix operator*(Cx s, const ComplexMatrix& a) {
  ComplexMatrix r(a.rows(), a.cols());
  for (size_t i = 0; i < r.data().size(); ++i) r.data()[i] = s * a.data()[i];
  return r;
}
inline ComplexMatrix operator*(double s, const ComplexMatrix& a) { return Cx(s, 0.0) * a; }

inline ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.cols() != b.rows()) throw DimensionError("matmul: inner dimension mismatch");
  ComplexMatrix r(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int k = 0; k < a.cols(); ++k) {
      const Cx aik = a(i, k);
      if (aik == Cx(0.0, 0.0)) continue;
      for (int j = 0; j < b.cols(); ++j) r(i, j) += aik * b(k, j);
    }
  return r;
}

inline ComplexMatrix adjoint(const ComplexMatrix& a) {
  ComplexMatrix r(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) r(j, i) = std::conj(a(i, j));
  return r;
}

inline Cx trace(const ComplexMatrix& a) {
  if (a.rows() != a.cols()) throw DimensionError("trace: not square");
  Cx t = 0.0;
  for (int i = 0; i < a.rows(); ++i) t += a(i, i);
  return t;
}

// Hadamard (entrywise) product.
inline ComplexMatrix hadamard(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError("hadamard: shape mismatch");
  ComplexMatrix r(a.rows(), a.cols());
  for (size_t i = 0; i < r.data().size(); ++i) r.data()[i] = a.data()[i] * b.data()[i];
  return r;
}

inline ComplexMatrix conj(const ComplexMatrix& a) {
  ComplexMatrix r(a.rows(), a.cols());
  for (size_t i = 0; i < r.data().size(); ++i) r.data()[i] = std::conj(a.data()[i]);
  return r;
}

// Column j as an rows()-vector (rows x 1 matrix).
inline ComplexMatrix column(const ComplexMatrix& a, int j) {
  ComplexMatrix c(a.rows(), 1);
  for (int i = 0; i < a.rows(); ++i) c(i, 0) = a(i, j);
  return c;
}

inline Cx dot(const ComplexMatrix& x, const ComplexMatrix& y) {  // x^H y
  if (x.cols() != 1 || y.cols() != 1 || x.rows() != y.rows())
    throw DimensionError("dot: expects equal-length column vectors");
  Cx s = 0.0;
  for (int i = 0; i < x.rows(); ++i) s += std::conj(x(i, 0)) * y(i, 0);
  return s;
}

// ---------------------------------------------------------------------------
// System configuration (antenna counts, targets, noise).

struct SystemConfig {
  int pt_antennas = 3;    // M
  int pr_antennas = 3;    // N1
  int sr_antennas = 3;    // N2
  int ris_elements = 16;  // K
  int symbol_ratio = 50;  // L, secondary-to-primary symbol-period ratio
  double reflect_efficiency = 1.0;  // alpha in (0,1]
  double noise_power_w = 1e-12;     // sigma^2, watts
  double rate_target = 5.0;         // R_s, bps/Hz
  double snr_target = 1.0;          // gamma

  // Number of primary data streams. Derived, never stored; N2 >= streams()
  // holds by construction of the min.
  int streams() const {
    return std::min(pt_antennas, std::min(pr_antennas, sr_antennas));
  }

  void validate() const {
    if (pt_antennas < 1 || pr_antennas < 1 || sr_antennas < 1)
      throw DimensionError("antenna counts must be positive");
    if (ris_elements < 1) throw DimensionError("ris_elements must be positive");
    if (symbol_ratio < 1) throw DimensionError("symbol_ratio must be positive");
    if (!(reflect_efficiency > 0.0) || reflect_efficiency > 1.0)
      throw DimensionError("reflect_efficiency must lie in (0,1]");
    if (!(noise_power_w > 0.0)) throw DimensionError("noise_power_w must be positive");
    if (rate_target < 0.0 || snr_target < 0.0)
      throw DimensionError("targets must be nonnegative");
  }
};

// ---------------------------------------------------------------------------
// The five baseband channel matrices.

struct ChannelSet {
  ComplexMatrix pt_to_pr;   // H1, N1 x M
  ComplexMatrix pt_to_sr;   // H2, N2 x M
  ComplexMatrix pt_to_ris;  // H3, K x M
  ComplexMatrix ris_to_pr;  // G1, N1 x K
  ComplexMatrix ris_to_sr;  // G2, N2 x K

  void validate(const SystemConfig& cfg) const {
    auto check = [](const ComplexMatrix& m, int r, int c, const char* name) {
      if (m.rows() != r || m.cols() != c)
        throw DimensionError(std::string(name) + ": unexpected shape");
      m.require_finite(name);
    };
    check(pt_to_pr, cfg.pr_antennas, cfg.pt_antennas, "pt_to_pr");
    check(pt_to_sr, cfg.sr_antennas, cfg.pt_antennas, "pt_to_sr");
    check(pt_to_ris, cfg.ris_elements, cfg.pt_antennas, "pt_to_ris");
    check(ris_to_pr, cfg.pr_antennas, cfg.ris_elements, "ris_to_pr");
    check(ris_to_sr, cfg.sr_antennas, cfg.ris_elements, "ris_to_sr");
  }
};

// ---------------------------------------------------------------------------
// Unit-modulus reflecting phases. The feasible set is the complex unit
// circle per element; the BPSK symbol c is *not* stored here, callers pass
// it where it matters.

class PhaseVector {
 public:
  PhaseVector() = default;
  explicit PhaseVector(std::vector<Cx> phi) : phi_(std::move(phi)) {
    for (const Cx& p : phi_)
      if (std::abs(std::abs(p) - 1.0) > 1e-12)
        throw DimensionError("PhaseVector: entry modulus deviates from 1");
  }
  static PhaseVector ones(int k) { return PhaseVector(std::vector<Cx>(k, Cx(1.0, 0.0))); }
  static PhaseVector from_angles(const std::vector<double>& theta) {
    std::vector<Cx> p(theta.size());
    for (size_t i = 0; i < theta.size(); ++i) p[i] = std::polar(1.0, theta[i]);
    return PhaseVector(std::move(p));
  }

  int size() const { return static_cast<int>(phi_.size()); }
  const Cx& operator[](int k) const { return phi_[k]; }
  const std::vector<Cx>& entries() const { return phi_; }

  // Replace one element; value is re-projected to exact unit modulus.
  void set(int k, Cx v) {
    phi_[k] = (v == Cx(0.0, 0.0)) ? Cx(1.0, 0.0) : std::polar(1.0, std::arg(v));
  }

  ComplexMatrix as_diagonal() const {
    ComplexMatrix d(size(), size());
    for (int i = 0; i < size(); ++i) d(i, i) = phi_[i];
    return d;
  }

 private:
  std::vector<Cx> phi_;
};

// ---------------------------------------------------------------------------
// Seeded random stream: xoshiro256++ seeded through SplitMix64, normals by
// Box-Muller. Identical seed => identical stream within a build; the
// generator and mapping are fixed here so cross-platform runs agree wherever
// libm's log/cos/sin do.

class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed) {
    uint64_t x = seed;
    for (auto& si : s_) si = splitmix(x);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1]; used where log() must not see zero.
  double uniform_pos() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  // Standard normal, Box-Muller with one cached mate.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform_pos()));
    const double a = 2.0 * kPi * uniform();
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // CN(0,1): real and imaginary parts N(0, 1/2), from one Box-Muller pair.
  Cx cnormal() {
    const double r = std::sqrt(-std::log(uniform_pos()));
    const double a = 2.0 * kPi * uniform();
    return {r * std::cos(a), r * std::sin(a)};
  }

  double uniform_angle() { return 2.0 * kPi * uniform(); }

  // Child stream derived from the *construction seed* and a tag, so the
  // child is independent of how many draws the parent has made.
  Rng fork(uint64_t tag) const {
    uint64_t x = seed_ ^ (0x9e3779b97f4a7c15ULL * (tag + 1));
    x = splitmix(x);
    return Rng(x);
  }

  uint64_t seed() const { return seed_; }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  static uint64_t splitmix(uint64_t& x) {
    uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  uint64_t seed_;
  uint64_t s_[4];
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace srbeam
