#pragma once

// In-repo convex solver for the two determinant-constrained programs the
// pipeline needs: transmit-covariance power minimization at fixed phases,
// and the max-min semidefinite relaxation over the reflecting matrix.
//
// Method: log-barrier path following over the real parametrization of a
// Hermitian variable (n^2 coordinates, fixed-diagonal coordinates
// eliminated), exact Newton with backtracking that rejects any step leaving
// the PD cone or a constraint domain, mu-fold barrier updates until the
// duality measure nu/tau drops below tol. Phase-I minimizes a slack added to
// every constraint from a strictly interior start rho*I. An optional scalar
// variable (coupled linearly into constraints and objective) carries both the
// phase-I slack and the max-min objective t of the reflecting-matrix SDR.
//
// The duality bound objective(x_tau) - p* <= nu/tau follows from evaluating
// the Lagrange dual at lambda_i = 1/(tau s_i), Z = X^{-1}/tau, so Optimal
// results carry a certified gap and a KKT residual.

#include <functional>
#include <optional>

#include "srbeam/core.hpp"
#include "srbeam/linalg.hpp"
#include "srbeam/metrics.hpp"

namespace srbeam {

enum class SolveStatus { Optimal, Infeasible, MaxIterations, NumericalFailure };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::MaxIterations: return "max_iterations";
    case SolveStatus::NumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

// Hermitian-affine image X -> base + sum_f L_f X L_f^H (m x m).
struct AffineImage {
  ComplexMatrix base;                  // m x m Hermitian
  std::vector<ComplexMatrix> factors;  // each m x n
};

// sum_images ln det(image(X)) - slack_coeff * v >= rhs_ln   (natural log)
struct LogDetConstraint {
  std::vector<AffineImage> images;
  double rhs_ln = 0.0;
  double slack_coeff = 0.0;
};

// re tr(coeff * X) - slack_coeff * v >= rhs
struct LinearConstraint {
  ComplexMatrix coeff;  // n x n Hermitian
  double rhs = 0.0;
  double slack_coeff = 0.0;
};

struct DetmaxProblem {
  int dim = 0;
  ComplexMatrix objective;        // Hermitian C; minimize re tr(C X) (+ slack term)
  bool has_slack = false;         // scalar variable v
  double slack_objective = 0.0;   // objective += slack_objective * v
  std::vector<LogDetConstraint> logdet_constraints;
  std::vector<LinearConstraint> linear_constraints;
  std::vector<double> diagonal_fixed;  // empty, or length dim: X[k][k] pinned
  bool psd = true;
  std::optional<ComplexMatrix> start;  // optional strictly feasible start
  double start_slack = 0.0;
};

struct SolveSettings {
  double barrier_mu = 10.0;  // barrier parameter multiplier, > 1
  double tol = 1e-7;         // duality-measure target nu/tau
  int max_newton = 200;      // Newton-step budget per phase
  double linesearch_beta = 0.5;
  // Called after each completed barrier stage with (tau, objective).
  std::function<void(double, double)> stage_observer;
};

struct SolveResult {
  HermitianMatrix x;
  double objective = 0.0;  // re tr(C X*) + slack_objective * v*
  double slack = 0.0;      // v* (phase-I slack or the max-min t)
  SolveStatus status = SolveStatus::NumericalFailure;
  int newton_iters = 0;
  double kkt_residual = 0.0;
  double duality_gap = 0.0;
};

namespace detail_ipm {

enum class CoordKind { Diag, Re, Im };
struct Coord {
  CoordKind kind;
  int i, j;
};

inline std::vector<Coord> enumerate_coords(int n, bool diag_free) {
  std::vector<Coord> c;
  c.reserve(static_cast<size_t>(n) * n);
  if (diag_free)
    for (int i = 0; i < n; ++i) c.push_back({CoordKind::Diag, i, i});
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      c.push_back({CoordKind::Re, i, j});
      c.push_back({CoordKind::Im, i, j});
    }
  return c;
}

// Gradient of a real functional with Hermitian gradient matrix G, expressed
// in the coordinate basis: Diag -> G_ii, Re -> 2 Re G_ij, Im -> 2 Im G_ij.
inline void add_matrix_coords(const ComplexMatrix& g, const std::vector<Coord>& coords,
                              double w, std::vector<double>& out) {
  for (size_t p = 0; p < coords.size(); ++p) {
    const Coord& c = coords[p];
    double v = 0.0;
    switch (c.kind) {
      case CoordKind::Diag: v = g(c.i, c.i).real(); break;
      case CoordKind::Re: v = 2.0 * g(c.i, c.j).real(); break;
      case CoordKind::Im: v = 2.0 * g(c.i, c.j).imag(); break;
    }
    out[p] += w * v;
  }
}

// Symmetric dense storage (row-major full square, lower triangle used).
struct SymMatrix {
  int n = 0;
  std::vector<double> a;
  void reset(int dim) {
    n = dim;
    a.assign(static_cast<size_t>(dim) * dim, 0.0);
  }
  double& at(int i, int j) { return a[static_cast<size_t>(i) * n + j]; }  // i >= j
};

// In-place lower Cholesky; false on breakdown.
inline bool chol_in_place(SymMatrix& h) {
  const int n = h.n;
  for (int j = 0; j < n; ++j) {
    double d = h.at(j, j);
    const double* rowj = &h.a[static_cast<size_t>(j) * n];
    for (int k = 0; k < j; ++k) d -= rowj[k] * rowj[k];
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    const double ljj = std::sqrt(d);
    h.at(j, j) = ljj;
    for (int i = j + 1; i < n; ++i) {
      double* rowi = &h.a[static_cast<size_t>(i) * n];
      double v = rowi[j];
      double acc = 0.0;
      for (int k = 0; k < j; ++k) acc += rowi[k] * rowj[k];
      rowi[j] = (v - acc) / ljj;
    }
  }
  return true;
}

inline void chol_solve(const SymMatrix& l, std::vector<double>& x) {
  const int n = l.n;
  for (int i = 0; i < n; ++i) {
    double v = x[i];
    const double* rowi = &l.a[static_cast<size_t>(i) * n];
    for (int k = 0; k < i; ++k) v -= rowi[k] * x[k];
    x[i] = v / rowi[i];
  }
  for (int i = n - 1; i >= 0; --i) {
    double v = x[i];
    for (int k = i + 1; k < n; ++k) v -= l.a[static_cast<size_t>(k) * n + i] * x[k];
    x[i] = v / l.a[static_cast<size_t>(i) * n + i];
  }
}

struct Evaluation {
  bool in_domain = false;
  double objective = 0.0;
  double barrier = 0.0;  // -sum ln s_i - lndet X (when psd)
  std::vector<double> slacks;
};

class BarrierEngine {
 public:
  BarrierEngine(const DetmaxProblem& prob, const SolveSettings& st)
      : prob_(prob), st_(st) {
    coords_ = enumerate_coords(prob.dim, prob.diagonal_fixed.empty());
    nu_ = static_cast<double>(prob.logdet_constraints.size() +
                              prob.linear_constraints.size()) +
          (prob.psd ? prob.dim : 0);
    obj_coords_.assign(dim_total(), 0.0);
    std::vector<double> tmp(coords_.size(), 0.0);
    add_matrix_coords(prob.objective, coords_, 1.0, tmp);
    for (size_t p = 0; p < coords_.size(); ++p) obj_coords_[p] = tmp[p];
    if (prob.has_slack) obj_coords_.back() = prob.slack_objective;
  }

  int dim_total() const {
    return static_cast<int>(coords_.size()) + (prob_.has_slack ? 1 : 0);
  }
  double nu() const { return nu_; }
  const std::vector<Coord>& coords() const { return coords_; }

  // full = keep scanning past the first violation (start scoring needs every
  // slack); the line-search fast path bails out early.
  Evaluation evaluate(const ComplexMatrix& x, double v, bool full = false) const {
    Evaluation e;
    e.objective = objective_value(x, v);
    e.slacks.reserve(prob_.logdet_constraints.size() + prob_.linear_constraints.size());
    double barrier = 0.0;
    bool ok = true;
    for (const LogDetConstraint& c : prob_.logdet_constraints) {
      double h = 0.0;
      bool image_pd = true;
      for (const AffineImage& img : c.images) {
        const auto ld = logdet_pd(image_of(img, x));
        if (!ld) {
          image_pd = false;
          break;
        }
        h += *ld;
      }
      if (!image_pd) {
        e.slacks.push_back(-1e300);
        ok = false;
        if (!full) return e;
        continue;
      }
      const double s = h - c.slack_coeff * v - c.rhs_ln;
      e.slacks.push_back(s);
      if (!(s > 0.0)) {
        ok = false;
        if (!full) return e;
        continue;
      }
      barrier -= std::log(s);
    }
    for (const LinearConstraint& c : prob_.linear_constraints) {
      const double s = real_trace_product(c.coeff, x) - c.slack_coeff * v - c.rhs;
      e.slacks.push_back(s);
      if (!(s > 0.0)) {
        ok = false;
        if (!full) return e;
        continue;
      }
      barrier -= std::log(s);
    }
    if (prob_.psd) {
      const auto ld = logdet_pd(x);
      if (!ld) {
        ok = false;
        if (!full) return e;
      } else {
        barrier -= *ld;
      }
    }
    e.barrier = barrier;
    e.in_domain = ok;
    return e;
  }

  double objective_value(const ComplexMatrix& x, double v) const {
    double o = real_trace_product(prob_.objective, x);
    if (prob_.has_slack) o += prob_.slack_objective * v;
    return o;
  }

  enum class CenterOutcome { Centered, EarlyStop, BudgetExhausted, Failure };

  // One centering run at fixed tau. early_stop aborts (successfully) once the
  // scalar variable drops below the given value (phase-I shortcut).
  // decrement_out reports the final squared Newton decrement, the
  // affine-invariant stationarity measure of the barrier subproblem.
  CenterOutcome center(ComplexMatrix& x, double& v, double tau, int& iter_budget,
                       std::optional<double> early_stop, double ctol,
                       double& decrement_out) {
    const int nd = dim_total();
    std::vector<double> grad(nd), step(nd);
    SymMatrix hess;
    decrement_out = std::numeric_limits<double>::infinity();
    for (;;) {
      if (iter_budget <= 0) return CenterOutcome::BudgetExhausted;
      --iter_budget;
      if (!assemble(x, v, tau, grad, hess)) return CenterOutcome::Failure;

      step = grad;
      SymMatrix factor = hess;
      if (!chol_in_place(factor)) {
        double scale = 0.0;
        for (int i = 0; i < nd; ++i) scale = std::max(scale, std::abs(hess.at(i, i)));
        factor = hess;
        const double jitter = 1e-10 * std::max(1.0, scale);
        for (int i = 0; i < nd; ++i) factor.at(i, i) += jitter;
        if (!chol_in_place(factor)) return CenterOutcome::Failure;
      }
      chol_solve(factor, step);
      double decrement_sq = 0.0;
      for (int i = 0; i < nd; ++i) decrement_sq += grad[i] * step[i];
      if (!(decrement_sq >= 0.0) || !std::isfinite(decrement_sq))
        return CenterOutcome::Failure;
      decrement_out = decrement_sq;
      if (0.5 * decrement_sq <= ctol) return CenterOutcome::Centered;

      // Backtracking on psi with domain rejection. The decrease test works on
      // differences: the objective is linear, so its change along the step is
      // exact, and barrier terms are O(1) logs; comparing absolute psi values
      // (~tau * objective) would drown the required decrease in rounding at
      // large tau. Inside the quadratic-convergence region (lambda <= 0.1)
      // the predicted decrease falls below what doubles can certify at all,
      // so any in-domain step is taken undamped.
      const bool quadratic_phase = decrement_sq <= 1e-2;
      const Evaluation here = evaluate(x, v);
      if (!here.in_domain) return CenterOutcome::Failure;
      double step_dot_obj = 0.0;
      for (int i = 0; i < nd; ++i) step_dot_obj += obj_coords_[i] * step[i];
      double t = 1.0;
      bool moved = false;
      while (t > 1e-14) {
        ComplexMatrix xt = x;
        apply_step(xt, step, -t);
        const double vt = v - t * (prob_.has_slack ? step[nd - 1] : 0.0);
        const Evaluation trial = evaluate(xt, vt);
        if (trial.in_domain) {
          const double dpsi =
              -t * tau * step_dot_obj + (trial.barrier - here.barrier);
          if (quadratic_phase || dpsi <= -0.1 * t * decrement_sq) {
            x = std::move(xt);
            v = vt;
            moved = true;
            break;
          }
        }
        t *= st_.linesearch_beta;
      }
      if (!moved) {
        // Stalled line search: accept if already essentially centered.
        return 0.5 * decrement_sq <= 1e-5 ? CenterOutcome::Centered
                                          : CenterOutcome::Failure;
      }
      if (early_stop && v < *early_stop) return CenterOutcome::EarlyStop;
    }
  }

  // psi = tau*(objective) + barrier; gradient and Hessian in coordinates.
  bool assemble(const ComplexMatrix& x, double v, double tau,
                std::vector<double>& grad, SymMatrix& hess) {
    const int nd = dim_total();
    const size_t nc = coords_.size();
    grad.assign(nd, 0.0);
    hess.reset(nd);
    for (int p = 0; p < nd; ++p) grad[p] = tau * obj_coords_[p];

    std::vector<double> gc(nc, 0.0);  // per-constraint gradient coords
    std::vector<double> tvec;         // stacked curvature factors
    for (const LogDetConstraint& c : prob_.logdet_constraints) {
      double h = 0.0;
      ComplexMatrix gmat(prob_.dim, prob_.dim);
      size_t stride = 0;
      for (const AffineImage& img : c.images) stride += 2u * img.base.rows() * img.base.rows();
      tvec.assign(nc * stride, 0.0);

      size_t offset = 0;
      for (const AffineImage& img : c.images) {
        const ComplexMatrix a = image_of(img, x);
        const auto ld = logdet_pd(a);
        if (!ld) return false;
        h += *ld;
        const ComplexMatrix asqi = inv_sqrt_pd(HermitianMatrix(a));
        const int m = a.rows();
        std::vector<ComplexMatrix> lt;
        lt.reserve(img.factors.size());
        for (const ComplexMatrix& f : img.factors) lt.push_back(asqi * f);
        for (const ComplexMatrix& f : lt) gmat = gmat + adjoint(f) * f;
        // T_p entries for each free coordinate, flattened Re/Im.
        std::vector<Cx> tp(static_cast<size_t>(m) * m);
        for (size_t p = 0; p < nc; ++p) {
          std::fill(tp.begin(), tp.end(), Cx(0.0, 0.0));
          const Coord& co = coords_[p];
          for (const ComplexMatrix& f : lt) {
            if (co.kind == CoordKind::Diag) {
              for (int a1 = 0; a1 < m; ++a1)
                for (int b1 = 0; b1 < m; ++b1)
                  tp[static_cast<size_t>(a1) * m + b1] +=
                      f(a1, co.i) * std::conj(f(b1, co.i));
            } else {
              const Cx unit = (co.kind == CoordKind::Re) ? Cx(1.0, 0.0) : Cx(0.0, 1.0);
              for (int a1 = 0; a1 < m; ++a1)
                for (int b1 = 0; b1 < m; ++b1) {
                  const Cx t1 = unit * f(a1, co.i) * std::conj(f(b1, co.j));
                  tp[static_cast<size_t>(a1) * m + b1] += t1;
                  tp[static_cast<size_t>(b1) * m + a1] += std::conj(t1);
                }
            }
          }
          double* dst = &tvec[p * stride + offset];
          for (size_t e = 0; e < tp.size(); ++e) {
            dst[2 * e] = tp[e].real();
            dst[2 * e + 1] = tp[e].imag();
          }
        }
        offset += 2u * m * m;
      }
      const double s = h - c.slack_coeff * v - c.rhs_ln;
      if (!(s > 0.0)) return false;

      std::fill(gc.begin(), gc.end(), 0.0);
      add_matrix_coords(gmat, coords_, 1.0, gc);
      accumulate_constraint(gc, -c.slack_coeff, s, grad, hess);
      // Curvature part: (1/s) * Gram of T_p factors.
      const double ws = 1.0 / s;
      for (size_t p = 0; p < nc; ++p) {
        const double* rp = &tvec[p * stride];
        for (size_t q = 0; q <= p; ++q) {
          const double* rq = &tvec[q * stride];
          double acc = 0.0;
          for (size_t e = 0; e < stride; ++e) acc += rp[e] * rq[e];
          hess.at(static_cast<int>(p), static_cast<int>(q)) += ws * acc;
        }
      }
    }

    for (const LinearConstraint& c : prob_.linear_constraints) {
      const double s = real_trace_product(c.coeff, x) - c.slack_coeff * v - c.rhs;
      if (!(s > 0.0)) return false;
      std::fill(gc.begin(), gc.end(), 0.0);
      add_matrix_coords(c.coeff, coords_, 1.0, gc);
      accumulate_constraint(gc, -c.slack_coeff, s, grad, hess);
    }

    if (prob_.psd) {
      ComplexMatrix w;
      try {
        w = solve_pd(x, ComplexMatrix::identity(prob_.dim));
      } catch (const NumericalError&) {
        return false;
      }
      // -lndet X: gradient -W, Hessian tr(W E_p W E_q).
      std::fill(gc.begin(), gc.end(), 0.0);
      add_matrix_coords(w, coords_, 1.0, gc);
      for (size_t p = 0; p < nc; ++p) grad[p] -= gc[p];
      add_logdet_inverse_hessian(w, hess);
    }
    return true;
  }

  void apply_step(ComplexMatrix& x, const std::vector<double>& step, double scale) const {
    for (size_t p = 0; p < coords_.size(); ++p) {
      const Coord& c = coords_[p];
      const double d = scale * step[p];
      switch (c.kind) {
        case CoordKind::Diag:
          x(c.i, c.i) += d;
          break;
        case CoordKind::Re:
          x(c.i, c.j) += d;
          x(c.j, c.i) += d;
          break;
        case CoordKind::Im:
          x(c.i, c.j) += Cx(0.0, d);
          x(c.j, c.i) += Cx(0.0, -d);
          break;
      }
    }
  }

  static ComplexMatrix image_of(const AffineImage& img, const ComplexMatrix& x) {
    ComplexMatrix a = img.base;
    for (const ComplexMatrix& f : img.factors) a = a + f * x * adjoint(f);
    return a;
  }

  static double real_trace_product(const ComplexMatrix& t, const ComplexMatrix& x) {
    Cx s = 0.0;
    for (int i = 0; i < t.rows(); ++i)
      for (int j = 0; j < t.cols(); ++j) s += t(i, j) * x(j, i);
    return s.real();
  }

 private:
  // Shared barrier pieces for one scalar constraint with slack s, gradient
  // coords g (X part) and d(slack)/dv = dv_coeff:
  //   grad -= g/s (X), grad += -dv_coeff/s (v)
  //   hess += (1/s^2) * [g; dv_coeff] [g; dv_coeff]^T
  void accumulate_constraint(const std::vector<double>& g, double dv_coeff, double s,
                             std::vector<double>& grad, SymMatrix& hess) const {
    const size_t nc = coords_.size();
    const double inv_s = 1.0 / s;
    const double inv_s2 = inv_s * inv_s;
    for (size_t p = 0; p < nc; ++p) grad[p] -= g[p] * inv_s;
    for (size_t p = 0; p < nc; ++p) {
      const double gp = g[p] * inv_s2;
      if (gp == 0.0) continue;
      for (size_t q = 0; q <= p; ++q)
        hess.at(static_cast<int>(p), static_cast<int>(q)) += gp * g[q];
    }
    if (prob_.has_slack) {
      const int last = dim_total() - 1;
      grad[last] -= dv_coeff * inv_s;
      for (size_t q = 0; q < nc; ++q)
        hess.at(last, static_cast<int>(q)) += dv_coeff * inv_s2 * g[q];
      hess.at(last, last) += dv_coeff * dv_coeff * inv_s2;
    }
  }

  // Hessian of -lndet X in coordinates, W = X^{-1}:
  // entries tr(W E_p W E_q) expanded per basis-kind pair.
  void add_logdet_inverse_hessian(const ComplexMatrix& w, SymMatrix& hess) const {
    const size_t nc = coords_.size();
    for (size_t p = 0; p < nc; ++p) {
      const Coord& cp = coords_[p];
      for (size_t q = 0; q <= p; ++q) {
        const Coord& cq = coords_[q];
        double val = 0.0;
        if (cp.kind == CoordKind::Diag && cq.kind == CoordKind::Diag) {
          val = std::norm(w(cp.i, cq.i));
        } else if (cp.kind == CoordKind::Diag || cq.kind == CoordKind::Diag) {
          const Coord& d = (cp.kind == CoordKind::Diag) ? cp : cq;
          const Coord& o = (cp.kind == CoordKind::Diag) ? cq : cp;
          const Cx z = w(d.i, o.i) * w(o.j, d.i);
          val = (o.kind == CoordKind::Re) ? 2.0 * z.real() : -2.0 * z.imag();
        } else {
          const int i = cp.i, j = cp.j, k = cq.i, l = cq.j;
          const Cx z1 = w(j, k) * w(l, i);
          const Cx z2 = w(j, l) * w(k, i);
          if (cp.kind == CoordKind::Re && cq.kind == CoordKind::Re)
            val = 2.0 * z1.real() + 2.0 * z2.real();
          else if (cp.kind == CoordKind::Im && cq.kind == CoordKind::Im)
            val = -2.0 * z1.real() + 2.0 * z2.real();
          else if (cp.kind == CoordKind::Re && cq.kind == CoordKind::Im)
            val = -2.0 * z1.imag() + 2.0 * z2.imag();
          else  // (Im, Re): tr is symmetric in (p,q); reuse with roles swapped
            val = -2.0 * (w(l, i) * w(j, k)).imag() + 2.0 * (w(l, j) * w(i, k)).imag();
        }
        hess.at(static_cast<int>(p), static_cast<int>(q)) += val;
      }
    }
  }

  const DetmaxProblem& prob_;
  const SolveSettings& st_;
  std::vector<Coord> coords_;
  std::vector<double> obj_coords_;
  double nu_ = 0.0;
};

}  // namespace detail_ipm

// ---------------------------------------------------------------------------

namespace detail_ipm {

inline void validate_problem(const DetmaxProblem& p) {
  if (p.dim < 1) throw DimensionError("detmax: dim must be >= 1");
  if (p.objective.rows() != p.dim || p.objective.cols() != p.dim)
    throw DimensionError("detmax: objective shape mismatch");
  if (!p.diagonal_fixed.empty() && static_cast<int>(p.diagonal_fixed.size()) != p.dim)
    throw DimensionError("detmax: diagonal_fixed length mismatch");
  for (const LogDetConstraint& c : p.logdet_constraints) {
    if (c.images.empty()) throw DimensionError("detmax: constraint without images");
    for (const AffineImage& img : c.images) {
      const int m = img.base.rows();
      if (img.base.cols() != m) throw DimensionError("detmax: image base not square");
      for (const ComplexMatrix& f : img.factors)
        if (f.rows() != m || f.cols() != p.dim)
          throw DimensionError("detmax: factor shape mismatch");
    }
  }
  for (const LinearConstraint& c : p.linear_constraints) {
    if (c.coeff.rows() != p.dim || c.coeff.cols() != p.dim)
      throw DimensionError("detmax: linear coefficient shape mismatch");
    double drift = 0.0;
    for (int i = 0; i < p.dim; ++i)
      for (int j = i; j < p.dim; ++j)
        drift = std::max(drift, std::abs(c.coeff(i, j) - std::conj(c.coeff(j, i))));
    if (drift > 1e-8 * (1.0 + c.coeff.max_abs()))
      throw DimensionError("detmax: linear coefficient is not Hermitian");
  }

  // Hermitian-structure probe on a random Hermitian argument.
  Rng rng(0x5eedULL);
  ComplexMatrix probe(p.dim, p.dim);
  for (int i = 0; i < p.dim; ++i) {
    probe(i, i) = rng.normal();
    for (int j = i + 1; j < p.dim; ++j) {
      const Cx z = rng.cnormal();
      probe(i, j) = z;
      probe(j, i) = std::conj(z);
    }
  }
  for (const LogDetConstraint& c : p.logdet_constraints)
    for (const AffineImage& img : c.images) {
      const ComplexMatrix a = BarrierEngine::image_of(img, probe);
      double drift = 0.0;
      for (int i = 0; i < a.rows(); ++i)
        for (int j = i; j < a.cols(); ++j)
          drift = std::max(drift, std::abs(a(i, j) - std::conj(a(j, i))));
      if (drift > 1e-8 * (1.0 + a.max_abs()))
        throw DimensionError("detmax: affine image is not Hermitian-preserving");
    }
}

inline ComplexMatrix start_matrix(const DetmaxProblem& p) {
  if (!p.diagonal_fixed.empty()) {
    ComplexMatrix x(p.dim, p.dim);
    for (int i = 0; i < p.dim; ++i) x(i, i) = p.diagonal_fixed[i];
    return x;
  }
  return ComplexMatrix::identity(p.dim);
}

}  // namespace detail_ipm

inline SolveResult barrier_solve(const DetmaxProblem& prob, const SolveSettings& settings) {
  using namespace detail_ipm;
  if (!(settings.barrier_mu > 1.0)) throw DimensionError("barrier_mu must exceed 1");
  if (!(settings.tol > 0.0)) throw DimensionError("tol must be positive");
  validate_problem(prob);

  SolveResult res;
  res.newton_iters = 0;

  // --- Find a strictly interior start. -------------------------------------
  ComplexMatrix x0;
  double v0 = prob.start_slack;
  bool have_start = false;
  {
    BarrierEngine probe_engine(prob, settings);
    auto min_slack_of = [&](const ComplexMatrix& cand) {
      const Evaluation e = probe_engine.evaluate(cand, prob.has_slack ? v0 : 0.0, true);
      double ms = e.in_domain ? 1e300 : -1e300;
      for (double s : e.slacks) ms = std::min(ms, s);
      if (!e.in_domain) ms = std::min(ms, -1.0);  // PSD/domain failure dominates
      return ms;
    };
    if (prob.start) {
      x0 = *prob.start;
      const Evaluation e = probe_engine.evaluate(x0, v0, true);
      if (!e.in_domain)
        throw DimensionError("detmax: provided start is not strictly feasible");
      have_start = true;
    } else if (!prob.has_slack) {
      if (!prob.diagonal_fixed.empty()) {
        x0 = start_matrix(prob);
        have_start = min_slack_of(x0) > 1e-6;
      } else {
        // rho-scan over scaled identities; the constraint families this
        // solver serves are monotone in the scale of X, so some rho*I is
        // strictly feasible whenever the problem has an interior.
        double fallback_rho = 1.0, fallback_ms = -1e300;
        for (double rho = 1e-12; rho <= 1e9; rho *= 10.0) {
          ComplexMatrix cand = ComplexMatrix::identity(prob.dim);
          for (int i = 0; i < prob.dim; ++i) cand(i, i) = rho;
          const double ms = min_slack_of(cand);
          if (ms > 1e-6) {
            x0 = cand;
            have_start = true;
            break;
          }
          if (ms > fallback_ms) {
            fallback_ms = ms;
            fallback_rho = rho;
          }
        }
        if (!have_start) {
          x0 = ComplexMatrix::identity(prob.dim);
          for (int i = 0; i < prob.dim; ++i) x0(i, i) = fallback_rho;
        }
      }
    }
  }

  // --- Phase I: minimize a slack added to every constraint. ----------------
  if (!have_start) {
    if (prob.has_slack)
      throw DimensionError("detmax: slack problems must supply a strictly feasible start");
    DetmaxProblem ph1 = prob;
    ph1.objective = ComplexMatrix::zeros(prob.dim, prob.dim);
    ph1.has_slack = true;
    ph1.slack_objective = 1.0;
    for (LogDetConstraint& c : ph1.logdet_constraints) c.slack_coeff = -1.0;
    for (LinearConstraint& c : ph1.linear_constraints) c.slack_coeff = -1.0;
    ph1.start.reset();
    {
      // tr(X) <= R_big keeps the phase-I barrier bounded (min v alone does
      // not pin X, and -lndet X rewards unbounded growth).
      LinearConstraint cap;
      cap.coeff = -1.0 * ComplexMatrix::identity(prob.dim);
      cap.rhs = -1e12 * prob.dim;
      ph1.linear_constraints.push_back(std::move(cap));
    }

    BarrierEngine eng(ph1, settings);
    ComplexMatrix x = x0;
    const Evaluation e0 = eng.evaluate(x, 0.0, true);
    double worst = 0.0;
    for (double s : e0.slacks) worst = std::max(worst, -s);
    double v = worst + 1.0;

    int budget = settings.max_newton;
    double tau = 1.0;
    double grad_inf = 0.0;
    bool feasible_found = false;
    SolveStatus st = SolveStatus::Optimal;
    for (;;) {
      int stage_budget = std::min(budget, 60);
      const int before = stage_budget;
      const auto out = eng.center(x, v, tau, stage_budget, -1e-4, 1e-8, grad_inf);
      budget -= before - stage_budget;
      if (out == BarrierEngine::CenterOutcome::Failure) {
        st = SolveStatus::NumericalFailure;
        break;
      }
      if (out == BarrierEngine::CenterOutcome::EarlyStop || v < -1e-4) {
        feasible_found = true;
        break;
      }
      if (out == BarrierEngine::CenterOutcome::BudgetExhausted && budget <= 0) {
        st = SolveStatus::MaxIterations;
        break;
      }
      if (eng.nu() / tau < std::min(settings.tol, 1e-9)) {
        feasible_found = v < -1e-12;
        break;
      }
      tau *= settings.barrier_mu;
    }
    res.newton_iters = settings.max_newton - budget;
    if (st != SolveStatus::Optimal) {
      res.status = st;
      return res;
    }
    if (!feasible_found) {
      res.status = SolveStatus::Infeasible;
      res.slack = v;
      return res;
    }
    x0 = x;
  }

  // --- Phase II: path following. -------------------------------------------
  // The gap target scales with the objective: nu/tau < tol * max(1, |obj|).
  // Chasing an absolute gap far below the objective's own rounding floor
  // pushes tau into the regime where double precision cannot center.
  BarrierEngine eng(prob, settings);
  ComplexMatrix x = x0;
  double v = prob.has_slack ? v0 : 0.0;
  int budget = settings.max_newton;
  double tau = 1.0;
  double decrement_sq = std::numeric_limits<double>::infinity();
  SolveStatus status = SolveStatus::Optimal;
  bool have_center = false;        // a completed stage exists
  ComplexMatrix x_good;            // last centered iterate
  double v_good = 0.0, tau_good = 1.0, dec_good = 0.0;
  auto gap_target = [&](const ComplexMatrix& xc, double vc) {
    return settings.tol * std::max(1.0, std::abs(eng.objective_value(xc, vc)));
  };
  for (;;) {
    const double ctol =
        eng.nu() / tau < gap_target(x, v) * settings.barrier_mu ? 1e-11 : 1e-7;
    int stage_budget = std::min(budget, 60);
    const int before = stage_budget;
    const auto out = eng.center(x, v, tau, stage_budget, std::nullopt, ctol, decrement_sq);
    budget -= before - stage_budget;
    if (out == BarrierEngine::CenterOutcome::Failure) {
      if (have_center && tau_good >= 1e4) {
        // Numerical ceiling: fall back to the last certified center.
        x = x_good;
        v = v_good;
        tau = tau_good;
        decrement_sq = dec_good;
        status = eng.nu() / tau <= gap_target(x, v) ? SolveStatus::Optimal
                                                    : SolveStatus::MaxIterations;
      } else {
        status = SolveStatus::NumericalFailure;
      }
      break;
    }
    if (out == BarrierEngine::CenterOutcome::BudgetExhausted && budget <= 0) {
      status = SolveStatus::MaxIterations;
      break;
    }
    have_center = true;
    x_good = x;
    v_good = v;
    tau_good = tau;
    dec_good = decrement_sq;
    if (settings.stage_observer) settings.stage_observer(tau, eng.objective_value(x, v));
    if (eng.nu() / tau < gap_target(x, v)) break;
    tau *= settings.barrier_mu;
  }
  res.newton_iters += settings.max_newton - budget;
  res.x = HermitianMatrix(x);
  res.slack = v;
  res.objective = eng.objective_value(x, v);
  res.duality_gap = eng.nu() / tau;
  res.kkt_residual =
      std::max(std::isfinite(decrement_sq) ? std::sqrt(std::max(decrement_sq, 0.0))
                                           : 1.0,
               1.0 / tau);
  res.status = status;
  return res;
}

// ---------------------------------------------------------------------------
// Power minimization: minimize tr(Q) over PSD Q subject to the primary/secondary rate and
// backscatter SNR constraints at a fixed phase vector.

struct PrimaryProblemOptions {
  bool secondary_rate = true;  // keep R_bs >= R_s
  bool snr = true;             // keep gamma_bc >= gamma
  bool bpsk_average = true;    // two-branch rates; false = c fixed to +1
};

inline DetmaxProblem build_min_power_problem(const ChannelSet& ch, const PhaseVector& phi,
                                       const SystemConfig& cfg,
                                       const PrimaryProblemOptions& opts = {}) {
  const EffectiveChannels eff = effective_channels(ch, phi, cfg.reflect_efficiency);
  const double inv_sig = 1.0 / std::sqrt(cfg.noise_power_w);
  const double ln2 = std::log(2.0);

  DetmaxProblem p;
  p.dim = cfg.pt_antennas;
  p.objective = ComplexMatrix::identity(p.dim);
  p.psd = true;

  auto rate_constraint = [&](const ComplexMatrix& h, const ComplexMatrix& f, int n_rx) {
    LogDetConstraint c;
    if (opts.bpsk_average) {
      for (double sign : {+1.0, -1.0}) {
        AffineImage img;
        img.base = ComplexMatrix::identity(n_rx);
        img.factors.push_back(inv_sig * (h + sign * f));
        c.images.push_back(std::move(img));
      }
      c.rhs_ln = 2.0 * cfg.rate_target * ln2;
    } else {
      AffineImage img;
      img.base = ComplexMatrix::identity(n_rx);
      img.factors.push_back(inv_sig * (h + f));
      c.images.push_back(std::move(img));
      c.rhs_ln = cfg.rate_target * ln2;
    }
    return c;
  };

  if (cfg.rate_target > 0.0) {
    p.logdet_constraints.push_back(rate_constraint(ch.pt_to_pr, eff.to_pr, cfg.pr_antennas));
    if (opts.secondary_rate)
      p.logdet_constraints.push_back(
          rate_constraint(ch.pt_to_sr, eff.to_sr, cfg.sr_antennas));
  }
  if (opts.snr && cfg.snr_target > 0.0) {
    // (L / (sigma^2 gamma)) F2^H F2, so the normalized constraint reads >= 1.
    LinearConstraint c;
    c.coeff = (static_cast<double>(cfg.symbol_ratio) /
               (cfg.noise_power_w * cfg.snr_target)) *
              (adjoint(eff.to_sr) * eff.to_sr);
    c.rhs = 1.0;
    p.linear_constraints.push_back(std::move(c));
  }
  return p;
}

inline SolveResult solve_min_power(const ChannelSet& ch, const PhaseVector& phi,
                             const SystemConfig& cfg, const SolveSettings& settings,
                             const PrimaryProblemOptions& opts = {}) {
  cfg.validate();
  ch.validate(cfg);
  if (phi.size() != cfg.ris_elements)
    throw DimensionError("solve_min_power: phase count != RIS elements");

  DetmaxProblem p = build_min_power_problem(ch, phi, cfg, opts);
  if (p.logdet_constraints.empty() && p.linear_constraints.empty()) {
    SolveResult r;  // unconstrained: zero transmit power
    r.x = HermitianMatrix::zeros(cfg.pt_antennas);
    r.objective = 0.0;
    r.status = SolveStatus::Optimal;
    return r;
  }
  return barrier_solve(p, settings);
}

// ---------------------------------------------------------------------------
// Backscatter-enhancement SDR: max-min over the unit-diagonal PSD reflecting matrix Phi, the
// rank-one constraint dropped. Objective value is the slack t* in the mixed
// units the formulation uses (rates in bps/Hz, SNR dimensionless).

inline SolveResult solve_reflect_sdr(const ChannelSet& ch, const HermitianMatrix& q0,
                               const SystemConfig& cfg, const SolveSettings& settings) {
  cfg.validate();
  ch.validate(cfg);
  if (q0.dim() != cfg.pt_antennas)
    throw DimensionError("solve_reflect_sdr: Q dimension != transmit antennas");

  const int k = cfg.ris_elements;
  const int m = cfg.pt_antennas;
  const double ln2 = std::log(2.0);
  const double alpha = cfg.reflect_efficiency;
  const double sigma2 = cfg.noise_power_w;

  // H3 Q H3^H = P P^H with P = H3 Q^{1/2}; the Hadamard-form constraint
  // images become I + sum_m L_m Phi L_m^H with L_m = (sqrt(alpha)/sigma) G diag(P col m).
  const ComplexMatrix p_fact = ch.pt_to_ris * sqrt_psd(q0);  // K x M
  const ComplexMatrix m_mat = p_fact * adjoint(p_fact);      // H3 Q H3^H

  auto images_for = [&](const ComplexMatrix& g) {
    AffineImage img;
    img.base = ComplexMatrix::identity(g.rows());
    const double w = std::sqrt(alpha) / std::sqrt(sigma2);
    for (int col = 0; col < m; ++col) {
      ComplexMatrix l(g.rows(), k);
      for (int i = 0; i < g.rows(); ++i)
        for (int j = 0; j < k; ++j) l(i, j) = w * g(i, j) * p_fact(j, col);
      img.factors.push_back(std::move(l));
    }
    return img;
  };

  DetmaxProblem p;
  p.dim = k;
  p.objective = ComplexMatrix::zeros(k, k);
  p.has_slack = true;
  p.slack_objective = -1.0;  // maximize t
  p.psd = true;
  p.diagonal_fixed.assign(k, 1.0);

  for (const ComplexMatrix* g : {&ch.ris_to_pr, &ch.ris_to_sr}) {
    LogDetConstraint c;
    c.images.push_back(images_for(*g));
    c.rhs_ln = 0.0;
    c.slack_coeff = ln2;  // log2-units slack
    p.logdet_constraints.push_back(std::move(c));
  }
  {
    LinearConstraint c;
    const ComplexMatrix gram = adjoint(ch.ris_to_sr) * ch.ris_to_sr;
    c.coeff = (alpha * cfg.symbol_ratio / sigma2) * hadamard(gram, srbeam::conj(m_mat));
    c.rhs = 0.0;
    c.slack_coeff = 1.0;
    p.linear_constraints.push_back(std::move(c));
  }

  // Phi = I is strictly interior for the unit-diagonal PSD set; start t below
  // the smallest constraint value there.
  ComplexMatrix phi0 = ComplexMatrix::identity(k);
  double t0 = 1e300;
  for (const LogDetConstraint& c : p.logdet_constraints) {
    double h = 0.0;
    for (const AffineImage& img : c.images)
      h += logdet_pd(detail_ipm::BarrierEngine::image_of(img, phi0)).value_or(0.0);
    t0 = std::min(t0, (h - c.rhs_ln) / c.slack_coeff);
  }
  for (const LinearConstraint& c : p.linear_constraints)
    t0 = std::min(t0,
                  detail_ipm::BarrierEngine::real_trace_product(c.coeff, phi0) - c.rhs);
  p.start = phi0;
  p.start_slack = t0 - std::max(1.0, 0.1 * std::abs(t0));

  SolveResult r = barrier_solve(p, settings);
  if (r.status == SolveStatus::Optimal) r.objective = r.slack;  // report t*
  return r;
}

}  // namespace srbeam
