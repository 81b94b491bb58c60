#pragma once

// Dense complex Hermitian/general factorizations at desk scale (n <= 64):
// validated Hermitian container, cyclic Jacobi eigensolver, one-sided Jacobi
// SVD, and a tolerant PSD Cholesky. Jacobi is chosen over tridiagonalization
// because it keeps tiny singular values at full absolute accuracy, which the
// numerical-rank rule (count sigma_i > 1e-8 * sigma_max) depends on.

#include <optional>
#include <utility>

#include "srbeam/core.hpp"

namespace srbeam {

// Numerical rank rule used throughout (Table-I reproduction etc.).
inline int numerical_rank(const std::vector<double>& singular_values) {
  if (singular_values.empty()) return 0;
  const double cut = 1e-8 * singular_values.front();
  int r = 0;
  for (double s : singular_values)
    if (s > cut) ++r;
  return r;
}

// ---------------------------------------------------------------------------
// HermitianMatrix: square complex matrix validated against Hermitian drift
// and symmetrized via (X + X^H)/2 on construction.

class HermitianMatrix {
 public:
  HermitianMatrix() = default;

  explicit HermitianMatrix(const ComplexMatrix& x) {
    if (x.rows() != x.cols()) throw DimensionError("HermitianMatrix: not square");
    x.require_finite("HermitianMatrix");
    const double scale = 1.0 + x.max_abs();
    double drift = 0.0;
    for (int i = 0; i < x.rows(); ++i)
      for (int j = i; j < x.cols(); ++j)
        drift = std::max(drift, std::abs(x(i, j) - std::conj(x(j, i))));
    if (drift > 1e-10 * scale)
      throw DimensionError("HermitianMatrix: asymmetry exceeds tolerance");
    m_ = ComplexMatrix(x.rows(), x.cols());
    for (int i = 0; i < x.rows(); ++i) {
      m_(i, i) = Cx(x(i, i).real(), 0.0);
      for (int j = i + 1; j < x.cols(); ++j) {
        const Cx v = 0.5 * (x(i, j) + std::conj(x(j, i)));
        m_(i, j) = v;
        m_(j, i) = std::conj(v);
      }
    }
  }

  static HermitianMatrix identity(int n) {
    return HermitianMatrix(ComplexMatrix::identity(n));
  }
  static HermitianMatrix zeros(int n) {
    return HermitianMatrix(ComplexMatrix::zeros(n, n));
  }

  int dim() const { return m_.rows(); }
  const ComplexMatrix& matrix() const { return m_; }
  const Cx& operator()(int i, int j) const { return m_(i, j); }

 private:
  ComplexMatrix m_;
};

// ---------------------------------------------------------------------------
// Hermitian eigendecomposition, X = U diag(lambda) U^H, eigenvalues sorted
// descending. Cyclic complex Jacobi; throws NumericalError if the off-diagonal
// mass fails to vanish.

struct EigResult {
  std::vector<double> eigenvalues;  // descending
  ComplexMatrix eigenvectors;       // columns
};

inline EigResult hermitian_eig(const HermitianMatrix& x) {
  const int n = x.dim();
  ComplexMatrix a = x.matrix();
  ComplexMatrix u = ComplexMatrix::identity(n);
  if (n == 0) return {{}, u};

  const double norm = std::max(a.frobenius(), 1e-300);
  const int max_sweeps = 60;
  bool converged = false;
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += std::norm(a(p, q));
    if (std::sqrt(2.0 * off) <= 1e-15 * norm) {
      converged = true;
      break;
    }
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const Cx apq = a(p, q);
        const double abs_apq = std::abs(apq);
        if (abs_apq <= 1e-18 * norm) continue;
        // Phase-rotate so the 2x2 pivot block is real symmetric, then apply
        // the classical Jacobi rotation. Combined column transform:
        //   col_p <- c*col_p + s*e^{i th}*col_q
        //   col_q <- -s*col_p + c*e^{i th}*col_q
        const double app = a(p, p).real();
        const double aqq = a(q, q).real();
        const Cx phase = apq / abs_apq;  // e^{i theta}
        const double tau = (aqq - app) / (2.0 * abs_apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        // G = [[c, s], [-s e^{-i th}, c e^{-i th}]]; G^H A G zeroes (p,q).
        const Cx se = s * std::conj(phase);
        const Cx ce = c * std::conj(phase);

        for (int k = 0; k < n; ++k) {  // A <- A G
          const Cx akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - se * akq;
          a(k, q) = s * akp + ce * akq;
        }
        for (int k = 0; k < n; ++k) {  // A <- G^H A
          const Cx apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - std::conj(se) * aqk;
          a(q, k) = s * apk + std::conj(ce) * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        a(p, p) = Cx(a(p, p).real(), 0.0);
        a(q, q) = Cx(a(q, q).real(), 0.0);
        for (int k = 0; k < n; ++k) {  // U <- U G
          const Cx ukp = u(k, p), ukq = u(k, q);
          u(k, p) = c * ukp - se * ukq;
          u(k, q) = s * ukp + ce * ukq;
        }
      }
    }
  }
  if (!converged) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += std::norm(a(p, q));
    if (std::sqrt(2.0 * off) > 1e-12 * norm)
      throw NumericalError("hermitian_eig: Jacobi sweep limit reached");
  }

  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](int i, int j) { return a(i, i).real() > a(j, j).real(); });
  EigResult r;
  r.eigenvalues.resize(n);
  r.eigenvectors = ComplexMatrix(n, n);
  for (int j = 0; j < n; ++j) {
    r.eigenvalues[j] = a(order[j], order[j]).real();
    for (int i = 0; i < n; ++i) r.eigenvectors(i, j) = u(i, order[j]);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Thin SVD, X = U Sigma V^H with r = min(rows, cols) retained columns and
// singular values sorted descending. One-sided Jacobi on the taller of
// X / X^H; zero columns are completed to an orthonormal U (or V) basis.

struct SvdResult {
  ComplexMatrix u;                     // rows x r
  std::vector<double> singular_values; // length r, descending
  ComplexMatrix v;                     // cols x r
};

namespace detail {

// Orthonormal completion for columns whose singular value vanished.
inline void complete_basis(ComplexMatrix& u, const std::vector<int>& dead) {
  const int m = u.rows(), r = u.cols();
  int next = 0;
  for (int j : dead) {
    bool filled = false;
    for (int attempt = 0; attempt < m && !filled; ++attempt) {
      ComplexMatrix cand(m, 1);
      cand(next % m, 0) = 1.0;
      ++next;
      for (int pass = 0; pass < 2; ++pass)
        for (int k = 0; k < r; ++k) {
          if (k == j) continue;
          Cx proj = 0.0;
          for (int i = 0; i < m; ++i) proj += std::conj(u(i, k)) * cand(i, 0);
          for (int i = 0; i < m; ++i) cand(i, 0) -= proj * u(i, k);
        }
      double nrm = 0.0;
      for (int i = 0; i < m; ++i) nrm += std::norm(cand(i, 0));
      nrm = std::sqrt(nrm);
      if (nrm > 1e-6) {
        for (int i = 0; i < m; ++i) u(i, j) = cand(i, 0) / nrm;
        filled = true;
      }
    }
  }
}

inline SvdResult svd_tall(const ComplexMatrix& x) {
  const int m = x.rows(), n = x.cols();
  ComplexMatrix w = x;
  ComplexMatrix v = ComplexMatrix::identity(n);
  const double norm = std::max(x.frobenius(), 1e-300);

  const int max_sweeps = 60;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        Cx cpq = 0.0;
        double app = 0.0, aqq = 0.0;
        for (int i = 0; i < m; ++i) {
          cpq += std::conj(w(i, p)) * w(i, q);
          app += std::norm(w(i, p));
          aqq += std::norm(w(i, q));
        }
        const double abs_c = std::abs(cpq);
        if (abs_c <= 1e-15 * std::sqrt(app * aqq) + 1e-300 * norm) continue;
        rotated = true;
        // Same plane rotation as the eigensolver, applied to the column Gram
        // [[app, cpq], [conj(cpq), aqq]].
        const Cx phase = cpq / abs_c;
        const double tau = (aqq - app) / (2.0 * abs_c);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        const Cx se = s * std::conj(phase);
        const Cx ce = c * std::conj(phase);
        for (int i = 0; i < m; ++i) {
          const Cx wip = w(i, p), wiq = w(i, q);
          w(i, p) = c * wip - se * wiq;
          w(i, q) = s * wip + ce * wiq;
        }
        for (int i = 0; i < n; ++i) {
          const Cx vip = v(i, p), viq = v(i, q);
          v(i, p) = c * vip - se * viq;
          v(i, q) = s * vip + ce * viq;
        }
      }
    }
    if (!rotated) break;
    if (sweep == max_sweeps - 1)
      throw NumericalError("svd: Jacobi sweep limit reached");
  }

  std::vector<double> sigma(n);
  ComplexMatrix u(m, n);
  for (int j = 0; j < n; ++j) {
    double nrm = 0.0;
    for (int i = 0; i < m; ++i) nrm += std::norm(w(i, j));
    sigma[j] = std::sqrt(nrm);
  }
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return sigma[a] > sigma[b]; });

  SvdResult r;
  r.singular_values.resize(n);
  r.v = ComplexMatrix(n, n);
  std::vector<int> dead;
  const double smax = sigma[order[0]];
  for (int j = 0; j < n; ++j) {
    const int src = order[j];
    r.singular_values[j] = sigma[src];
    for (int i = 0; i < n; ++i) r.v(i, j) = v(i, src);
    if (sigma[src] > smax * 1e-280 && sigma[src] > 0.0) {
      for (int i = 0; i < m; ++i) u(i, j) = w(i, src) / sigma[src];
    } else {
      r.singular_values[j] = 0.0;
      dead.push_back(j);
    }
  }
  r.u = std::move(u);
  detail::complete_basis(r.u, dead);
  return r;
}

}  // namespace detail

inline SvdResult svd(const ComplexMatrix& x) {
  x.require_finite("svd");
  if (x.rows() == 0 || x.cols() == 0) throw DimensionError("svd: empty matrix");
  if (x.rows() >= x.cols()) return detail::svd_tall(x);
  SvdResult t = detail::svd_tall(adjoint(x));
  SvdResult r;
  r.u = std::move(t.v);
  r.v = std::move(t.u);
  r.singular_values = std::move(t.singular_values);
  return r;
}

inline int numerical_rank(const ComplexMatrix& x) {
  return numerical_rank(svd(x).singular_values);
}

// ---------------------------------------------------------------------------
// PSD Cholesky: returns the lower factor L with L L^H = X, or nullopt when a
// pivot falls below -tol * scale (NotPSD signal). Pivots inside the tolerance
// band are clamped to zero so consistent singular PSD inputs factor cleanly.

inline std::optional<ComplexMatrix> cholesky_psd(const HermitianMatrix& x,
                                                 double tol = 1e-9) {
  const int n = x.dim();
  ComplexMatrix l(n, n);
  double scale = 1.0;
  for (int i = 0; i < n; ++i) scale = std::max(scale, std::abs(x(i, i).real()));
  for (int j = 0; j < n; ++j) {
    double d = x(j, j).real();
    for (int k = 0; k < j; ++k) d -= std::norm(l(j, k));
    if (d < -tol * scale) return std::nullopt;
    if (d <= tol * scale * 1e-6 && d < 1e-300) d = 0.0;
    const double ljj = std::sqrt(std::max(d, 0.0));
    l(j, j) = ljj;
    if (ljj == 0.0) {
      // Consistent PSD input has (numerically) zero column below a zero pivot.
      continue;
    }
    for (int i = j + 1; i < n; ++i) {
      Cx v = x(i, j);
      for (int k = 0; k < j; ++k) v -= l(i, k) * std::conj(l(j, k));
      l(i, j) = v / ljj;
    }
  }
  return l;
}

// Strict positive-definiteness probe used by barrier line searches: plain
// Cholesky on the raw matrix, failing on any non-positive pivot.
inline bool is_positive_definite(const ComplexMatrix& a) {
  const int n = a.rows();
  if (n != a.cols()) return false;
  ComplexMatrix l(n, n);
  for (int j = 0; j < n; ++j) {
    double d = a(j, j).real();
    for (int k = 0; k < j; ++k) d -= std::norm(l(j, k));
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (int i = j + 1; i < n; ++i) {
      Cx v = a(i, j);
      for (int k = 0; k < j; ++k) v -= l(i, k) * std::conj(l(j, k));
      l(i, j) = v / ljj;
    }
  }
  return true;
}

// ln det of a Hermitian positive-definite matrix via Cholesky; nullopt when
// the matrix is not PD. Natural log; callers convert to bits.
inline std::optional<double> logdet_pd(const ComplexMatrix& a) {
  const int n = a.rows();
  if (n != a.cols()) throw DimensionError("logdet_pd: not square");
  ComplexMatrix l(n, n);
  double acc = 0.0;
  for (int j = 0; j < n; ++j) {
    double d = a(j, j).real();
    for (int k = 0; k < j; ++k) d -= std::norm(l(j, k));
    if (!(d > 0.0) || !std::isfinite(d)) return std::nullopt;
    const double ljj = std::sqrt(d);
    acc += std::log(d);
    l(j, j) = ljj;
    for (int i = j + 1; i < n; ++i) {
      Cx v = a(i, j);
      for (int k = 0; k < j; ++k) v -= l(i, k) * std::conj(l(j, k));
      l(i, j) = v / ljj;
    }
  }
  return acc;  // det(A) = prod of squared pivots
}

// Solve A X = B for Hermitian PD A via Cholesky. Throws on non-PD input.
inline ComplexMatrix solve_pd(const ComplexMatrix& a, const ComplexMatrix& b) {
  const int n = a.rows();
  if (n != a.cols() || b.rows() != n) throw DimensionError("solve_pd: shape mismatch");
  ComplexMatrix l(n, n);
  for (int j = 0; j < n; ++j) {
    double d = a(j, j).real();
    for (int k = 0; k < j; ++k) d -= std::norm(l(j, k));
    if (!(d > 0.0) || !std::isfinite(d))
      throw NumericalError("solve_pd: matrix not positive definite");
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (int i = j + 1; i < n; ++i) {
      Cx v = a(i, j);
      for (int k = 0; k < j; ++k) v -= l(i, k) * std::conj(l(j, k));
      l(i, j) = v / ljj;
    }
  }
  ComplexMatrix x = b;
  const int nrhs = b.cols();
  for (int c = 0; c < nrhs; ++c) {
    for (int i = 0; i < n; ++i) {  // L y = b
      Cx v = x(i, c);
      for (int k = 0; k < i; ++k) v -= l(i, k) * x(k, c);
      x(i, c) = v / l(i, i);
    }
    for (int i = n - 1; i >= 0; --i) {  // L^H x = y
      Cx v = x(i, c);
      for (int k = i + 1; k < n; ++k) v -= std::conj(l(k, i)) * x(k, c);
      x(i, c) = v / l(i, i);
    }
  }
  return x;
}

// Hermitian inverse square root via eigendecomposition (A must be PD).
inline ComplexMatrix inv_sqrt_pd(const HermitianMatrix& a) {
  EigResult e = hermitian_eig(a);
  const int n = a.dim();
  for (double lam : e.eigenvalues)
    if (!(lam > 0.0)) throw NumericalError("inv_sqrt_pd: matrix not positive definite");
  ComplexMatrix r(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Cx s = 0.0;
      for (int k = 0; k < n; ++k)
        s += e.eigenvectors(i, k) * std::conj(e.eigenvectors(j, k)) /
             std::sqrt(e.eigenvalues[k]);
      r(i, j) = s;
    }
  return r;
}

// PSD square root via eigendecomposition; negative eigenvalues within the
// PSD tolerance are clamped to zero.
inline ComplexMatrix sqrt_psd(const HermitianMatrix& a) {
  EigResult e = hermitian_eig(a);
  const int n = a.dim();
  const double lmax = n ? std::max(e.eigenvalues.front(), 0.0) : 0.0;
  for (double lam : e.eigenvalues)
    if (lam < -1e-9 * (1.0 + lmax))
      throw NumericalError("sqrt_psd: matrix not positive semidefinite");
  ComplexMatrix r(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Cx s = 0.0;
      for (int k = 0; k < n; ++k)
        s += e.eigenvectors(i, k) * std::conj(e.eigenvectors(j, k)) *
             std::sqrt(std::max(e.eigenvalues[k], 0.0));
      r(i, j) = s;
    }
  return r;
}

// Validates the PSD tolerance rule (smallest eig >= -1e-9 * (1 + largest)).
inline bool is_psd(const HermitianMatrix& a) {
  EigResult e = hermitian_eig(a);
  if (e.eigenvalues.empty()) return true;
  return e.eigenvalues.back() >= -1e-9 * (1.0 + std::max(e.eigenvalues.front(), 0.0));
}

}  // namespace srbeam
