#pragma once

// Per-element reflecting-parameter subproblem: closed forms for the four
// branch rates f_{m,n}(phi_k) and the SNR term f_3(phi_k) with every other
// element held fixed, plus the max-min slack maximization over the unit disk
// with projection back to the unit circle.
//
// For one element the log-det argument is A + phi B + conj(phi) B^H with B =
// g y^H rank one, which collapses to
//   f(phi) = log2 det(A) + log2(1 + |lambda|^2 - kappa + 2 Re(phi lambda)),
// lambda = y^H A^{-1} g, kappa = (g^H A^{-1} g)(y^H A^{-1} y). The rank-zero
// (B ~ 0) and nilpotent (lambda ~ 0) branches are the degenerate cases of the
// same expression.

#include <functional>

#include "srbeam/core.hpp"
#include "srbeam/detmax.hpp"
#include "srbeam/linalg.hpp"

namespace srbeam {

enum class ElementBranch { RankZero, Nilpotent, Generic };

struct ElementBranchData {
  ComplexMatrix a;        // A_{m,n,k}, Hermitian PD
  ComplexMatrix b;        // B_{m,n,k} = g y^H
  ElementBranch branch = ElementBranch::RankZero;
  double logdet_a_bits = 0.0;
  Cx lambda{0.0, 0.0};    // nonzero eigenvalue of A^{-1} B (Generic)
  double kappa = 0.0;     // (g^H A^{-1} g)(y^H A^{-1} y) = |lambda|^2 vt v
  double v = 0.0;         // first element of (U^H A U)^{-1} (Generic only)
  double vtilde = 0.0;    // first element of U^H A U (Generic only)

  // f_{m,n}(phi) in bits; -inf when phi leaves the function's domain (only
  // possible strictly inside the disk).
  double value_bits(Cx phi) const {
    const double inner =
        1.0 + std::norm(lambda) - kappa + 2.0 * (phi * lambda).real();
    if (!(inner > 0.0)) return -std::numeric_limits<double>::infinity();
    return logdet_a_bits + std::log2(inner);
  }
};

struct ElementSubproblemData {
  int element = 0;
  ElementBranchData rate[2][2];  // [m-1][n-1], n = 1 minus-branch, n = 2 plus
  double f3_const = 0.0;         // A_k >= 0
  Cx f3_linear{0.0, 0.0};        // B_k
  double f3_scale = 0.0;         // alpha L / sigma^2

  double f3_value(Cx phi) const {
    return f3_scale * (f3_const + 2.0 * (phi * f3_linear).real());
  }
  // f_{m,1} + f_{m,2} in bits for receiver m (1 or 2).
  double rate_pair_bits(int m, Cx phi) const {
    return rate[m - 1][0].value_bits(phi) + rate[m - 1][1].value_bits(phi);
  }
};

namespace detail_element {

inline ComplexMatrix h3_column(const ChannelSet& ch, int k) {
  // k-th column of H3^H (an M-vector).
  const int m = ch.pt_to_ris.cols();
  ComplexMatrix h(m, 1);
  for (int j = 0; j < m; ++j) h(j, 0) = std::conj(ch.pt_to_ris(k, j));
  return h;
}

}  // namespace detail_element

inline ElementSubproblemData element_subproblem_data(const ChannelSet& ch,
                                                     const HermitianMatrix& q,
                                                     const PhaseVector& phi, int k,
                                                     const SystemConfig& cfg) {
  if (k < 0 || k >= cfg.ris_elements)
    throw DimensionError("element_subproblem_data: element index out of range");
  const double alpha = cfg.reflect_efficiency;
  const double sigma2 = cfg.noise_power_w;
  const double sqrt_alpha = std::sqrt(alpha);
  const int n_ris = cfg.ris_elements;
  const int m_tx = cfg.pt_antennas;

  // Psi H3 with element k removed (rows scaled by phi_i, row k zeroed).
  ComplexMatrix psih3(n_ris, m_tx);
  for (int i = 0; i < n_ris; ++i) {
    if (i == k) continue;
    for (int j = 0; j < m_tx; ++j) psih3(i, j) = phi[i] * ch.pt_to_ris(i, j);
  }

  const ComplexMatrix h_k = detail_element::h3_column(ch, k);
  const ComplexMatrix qh_k = q.matrix() * h_k;
  const double hqh = dot(h_k, qh_k).real();  // h_k^H Q h_k >= 0

  ElementSubproblemData data;
  data.element = k;
  data.f3_scale = alpha * cfg.symbol_ratio / sigma2;

  for (int m = 1; m <= 2; ++m) {
    const ComplexMatrix& h_direct = (m == 1) ? ch.pt_to_pr : ch.pt_to_sr;
    const ComplexMatrix& g_mat = (m == 1) ? ch.ris_to_pr : ch.ris_to_sr;
    const int n_rx = h_direct.rows();
    const ComplexMatrix c_m = g_mat * psih3;  // sum_{i != k} phi_i g_i h_i^H
    const ComplexMatrix g_k = column(g_mat, k);

    const ComplexMatrix hqh_direct = h_direct * q.matrix() * adjoint(h_direct);
    const ComplexMatrix cqc = c_m * q.matrix() * adjoint(c_m);
    const ComplexMatrix cross = c_m * q.matrix() * adjoint(h_direct);
    const ComplexMatrix cqh_k = c_m * qh_k;   // C (Q h_k)
    const ComplexMatrix hq_hk = h_direct * qh_k;

    for (int n = 1; n <= 2; ++n) {
      const double sign = (n == 2) ? 1.0 : -1.0;  // (-1)^n
      ComplexMatrix a = ComplexMatrix::identity(n_rx) +
                        (1.0 / sigma2) * hqh_direct + (alpha / sigma2) * cqc +
                        (alpha / sigma2 * hqh) * (g_k * adjoint(g_k)) +
                        (sign * sqrt_alpha / sigma2) * (cross + adjoint(cross));
      ElementBranchData& br = data.rate[m - 1][n - 1];
      br.a = a;
      const auto ld = logdet_pd(a);
      if (!ld)
        throw NumericalError("element subproblem: A matrix not positive definite");
      br.logdet_a_bits = *ld / std::log(2.0);

      const ComplexMatrix y =
          (sign * sqrt_alpha / sigma2) * hq_hk + (alpha / sigma2) * cqh_k;
      br.b = g_k * adjoint(y);

      // lambda = y^H A^{-1} g, kappa = (g^H A^{-1} g)(y^H A^{-1} y).
      const ComplexMatrix a_inv_g = solve_pd(a, g_k);
      const ComplexMatrix a_inv_y = solve_pd(a, y);
      const Cx lambda = dot(y, a_inv_g);
      const double g_aig = dot(g_k, a_inv_g).real();
      const double y_aiy = dot(y, a_inv_y).real();
      const double kappa = g_aig * y_aiy;

      // Branch classification per the A^{-1}B = (A^{-1}g) y^H factorization.
      const double n_max = std::sqrt(g_aig * y_aiy);  // ~ sigma_1(A^{-1}B) scale
      double ainv_max = 0.0, b_max = 0.0;
      {
        const ComplexMatrix a_inv = solve_pd(a, ComplexMatrix::identity(n_rx));
        ainv_max = a_inv.max_abs();
        b_max = br.b.max_abs();
      }
      const ComplexMatrix a_inv_b = a_inv_g * adjoint(y);
      if (a_inv_b.max_abs() <= 1e-10 * (1.0 + ainv_max * b_max)) {
        br.branch = ElementBranch::RankZero;
        br.lambda = 0.0;
        br.kappa = 0.0;
      } else if (std::abs(lambda) <= 1e-10 * (1.0 + n_max)) {
        br.branch = ElementBranch::Nilpotent;
        br.lambda = 0.0;
        br.kappa = kappa;
      } else {
        br.branch = ElementBranch::Generic;
        br.lambda = lambda;
        br.kappa = kappa;
        // Eigendecomposition A^{-1}B = U diag(lambda,0,..) U^{-1} with first
        // column u/||u|| and first row of U^{-1} proportional to y^H:
        const double u_norm2 = [&] {
          double s = 0.0;
          for (int i = 0; i < n_rx; ++i) s += std::norm(a_inv_g(i, 0));
          return s;
        }();
        double u_a_u = 0.0;  // u^H A u with u = A^{-1} g: equals g^H A^{-1} g
        u_a_u = g_aig;
        br.vtilde = u_a_u / u_norm2;
        br.v = u_norm2 * y_aiy / std::norm(lambda);
      }
    }

    if (m == 2) {
      const double g_norm2 = dot(g_k, g_k).real();
      data.f3_const = g_norm2 * hqh + trace(cqc).real();
      data.f3_linear = dot(cqh_k, g_k);  // (C Q h_k)^H g_k
    }
  }
  return data;
}

// ---------------------------------------------------------------------------
// Max-min slack subproblem over one element.

enum class ElementMethod { MaxMinAnalytic, GridSearch };

struct ElementSolveSettings {
  ElementMethod method = ElementMethod::MaxMinAnalytic;
  double grid_resolution_rad = 0.005;
  double level_tol = 1e-9;  // relative precision of the disk max-min level
};

struct ElementSolveResult {
  Cx phi_star{1.0, 0.0};  // unit modulus
  double slack = 0.0;     // min normalized constraint at phi_star
  double slack_current = 0.0;  // same metric at the incumbent phi_k
  bool feasible = false;  // all normalized constraints >= 1 - 1e-9 at phi_star
  bool phi_dependent = true;
};

namespace detail_element {

// One normalized constraint as a function of phi on the disk. Rates are sums
// of log2 of affine-in-phi arguments (concave, domain-limited); the SNR is
// affine. Gradients/Hessians are with respect to (Re phi, Im phi).
struct Ratio {
  std::function<double(Cx)> value;  // exact; -inf outside the log domain
  std::function<void(Cx, double*, double*)> derivatives;  // grad[2], hess[3]
};

inline std::vector<Ratio> build_ratios(const ElementSubproblemData& d,
                                       const SystemConfig& cfg,
                                       const PrimaryProblemOptions& opts) {
  std::vector<Ratio> ratios;
  const double rs = cfg.rate_target;
  const double ln2 = std::log(2.0);
  if (rs > 0.0) {
    auto add_rate = [&](int m) {
      Ratio r;
      const int n_lo = opts.bpsk_average ? 0 : 1;  // single-branch: n = 2 only
      const double denom = opts.bpsk_average ? 2.0 * rs : rs;
      r.value = [&d, m, n_lo, denom](Cx p) {
        double v = 0.0;
        for (int n = n_lo; n < 2; ++n) v += d.rate[m - 1][n].value_bits(p);
        return v / denom;
      };
      r.derivatives = [&d, m, n_lo, denom, ln2](Cx p, double* grad, double* hess) {
        grad[0] = grad[1] = hess[0] = hess[1] = hess[2] = 0.0;
        for (int n = n_lo; n < 2; ++n) {
          const ElementBranchData& br = d.rate[m - 1][n];
          const double inner =
              1.0 + std::norm(br.lambda) - br.kappa + 2.0 * (p * br.lambda).real();
          if (!(inner > 0.0)) continue;  // caller keeps iterates in-domain
          const double vx = 2.0 * br.lambda.real();
          const double vy = -2.0 * br.lambda.imag();
          const double w = 1.0 / (inner * ln2 * denom);
          grad[0] += w * vx;
          grad[1] += w * vy;
          const double c = -1.0 / (inner * inner * ln2 * denom);
          hess[0] += c * vx * vx;
          hess[1] += c * vx * vy;
          hess[2] += c * vy * vy;
        }
      };
      ratios.push_back(std::move(r));
    };
    add_rate(1);
    if (opts.secondary_rate) add_rate(2);
  }
  if (opts.snr && cfg.snr_target > 0.0) {
    Ratio r;
    const double g = cfg.snr_target;
    r.value = [&d, g](Cx p) { return d.f3_value(p) / g; };
    r.derivatives = [&d, g](Cx, double* grad, double* hess) {
      const double w = 2.0 * d.f3_scale / g;
      grad[0] = w * d.f3_linear.real();
      grad[1] = w * -d.f3_linear.imag();
      hess[0] = hess[1] = hess[2] = 0.0;
    };
    ratios.push_back(std::move(r));
  }
  return ratios;
}

inline double min_ratio(const std::vector<Ratio>& ratios, Cx p) {
  double v = std::numeric_limits<double>::infinity();
  for (const Ratio& r : ratios) v = std::min(v, r.value(p));
  return v;
}

// Exact solve of the disk relaxation max_{|phi|<=1} min_i r_i(phi) as the
// 3-variable program max t s.t. r_i >= t, |phi|^2 <= 1, by a log-barrier
// Newton method. The log domains of the rates are enforced for free: r_i
// recedes to -inf at the domain edge, so the constraint barrier rejects it.
struct DiskOptimum {
  Cx point{1.0, 0.0};
  double level = -std::numeric_limits<double>::infinity();
};

inline DiskOptimum maximize_on_disk(const std::vector<Ratio>& ratios,
                                    const std::vector<Cx>& seeds, double level_tol) {
  // Strictly interior, fully in-domain start: best exact value over shrunken
  // seed candidates.
  DiskOptimum best;
  double sx = 0.0, sy = 0.0;
  double v_start = -std::numeric_limits<double>::infinity();
  for (const double shrink : {1.0 - 1e-6, 0.97, 0.8, 0.4, 0.0}) {
    for (const Cx& seed : seeds) {
      const Cx p = shrink * seed;
      const double v = min_ratio(ratios, p);
      if (std::isfinite(v) && v > v_start) {
        v_start = v;
        sx = p.real();
        sy = p.imag();
      }
    }
  }
  if (!std::isfinite(v_start)) return best;  // no usable interior point

  const int m = static_cast<int>(ratios.size());
  double x = sx, y = sy;
  double t = v_start - std::max(1.0, 0.1 * std::abs(v_start));
  const double nu = m + 1.0;

  auto barrier = [&](double xx, double yy, double tt) -> double {
    const double disk = 1.0 - xx * xx - yy * yy;
    if (!(disk > 0.0)) return std::numeric_limits<double>::infinity();
    double b = -std::log(disk);
    for (const Ratio& r : ratios) {
      const double s = r.value(Cx(xx, yy)) - tt;
      if (!(s > 0.0) || !std::isfinite(s)) return std::numeric_limits<double>::infinity();
      b -= std::log(s);
    }
    return b;
  };

  for (double tau = 1.0; nu / tau >= level_tol * (1.0 + std::abs(t)); tau *= 10.0) {
    for (int it = 0; it < 40; ++it) {
      // assemble grad/hess of tau*(-t) + barrier over u = (x, y, t)
      double g[3] = {0.0, 0.0, -tau};
      double h[6] = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0};  // xx, xy, yy, xt, yt, tt
      const double disk = 1.0 - x * x - y * y;
      g[0] += 2.0 * x / disk;
      g[1] += 2.0 * y / disk;
      h[0] += 2.0 / disk + 4.0 * x * x / (disk * disk);
      h[1] += 4.0 * x * y / (disk * disk);
      h[2] += 2.0 / disk + 4.0 * y * y / (disk * disk);
      for (const Ratio& r : ratios) {
        const double s = r.value(Cx(x, y)) - t;
        double rg[2], rh[3];
        r.derivatives(Cx(x, y), rg, rh);
        const double inv_s = 1.0 / s;
        const double inv_s2 = inv_s * inv_s;
        g[0] -= rg[0] * inv_s;
        g[1] -= rg[1] * inv_s;
        g[2] += inv_s;  // d s / d t = -1
        h[0] += rg[0] * rg[0] * inv_s2 - rh[0] * inv_s;
        h[1] += rg[0] * rg[1] * inv_s2 - rh[1] * inv_s;
        h[2] += rg[1] * rg[1] * inv_s2 - rh[2] * inv_s;
        h[3] += -rg[0] * inv_s2;
        h[4] += -rg[1] * inv_s2;
        h[5] += inv_s2;
      }
      // 3x3 Cholesky solve for the Newton step
      double a11 = h[0], a21 = h[1], a22 = h[2], a31 = h[3], a32 = h[4], a33 = h[5];
      const double jitter = 1e-12 * (1.0 + std::abs(a11) + std::abs(a22) + std::abs(a33));
      a11 += jitter;
      a22 += jitter;
      a33 += jitter;
      const double l11 = std::sqrt(a11);
      const double l21 = a21 / l11;
      const double l31 = a31 / l11;
      const double l22 = std::sqrt(std::max(a22 - l21 * l21, 1e-300));
      const double l32 = (a32 - l31 * l21) / l22;
      const double l33 =
          std::sqrt(std::max(a33 - l31 * l31 - l32 * l32, 1e-300));
      double z1 = g[0] / l11;
      double z2 = (g[1] - l21 * z1) / l22;
      double z3 = (g[2] - l31 * z1 - l32 * z2) / l33;
      double d3 = z3 / l33;
      double d2 = (z2 - l32 * d3) / l22;
      double d1 = (z1 - l21 * d2 - l31 * d3) / l11;
      const double decrement = g[0] * d1 + g[1] * d2 + g[2] * d3;
      if (!(decrement >= 0.0) || !std::isfinite(decrement)) break;
      if (0.5 * decrement <= 1e-12) break;
      // Armijo on differences; the objective part is linear in the step.
      const double bar0 = barrier(x, y, t);
      double step = 1.0;
      bool moved = false;
      while (step > 1e-14) {
        const double xn = x - step * d1, yn = y - step * d2, tn = t - step * d3;
        const double dpsi = tau * step * d3 + (barrier(xn, yn, tn) - bar0);
        if (dpsi <= -0.1 * step * decrement) {
          x = xn;
          y = yn;
          t = tn;
          moved = true;
          break;
        }
        step *= 0.5;
      }
      if (!moved) break;
    }
  }
  best.point = Cx(x, y);
  best.level = t;
  return best;
}

}  // namespace detail_element

inline ElementSolveResult solve_element(const ElementSubproblemData& data,
                                        const SystemConfig& cfg,
                                        const PhaseVector& phi,
                                        const ElementSolveSettings& settings,
                                        const PrimaryProblemOptions& opts = {}) {
  using namespace detail_element;
  const Cx current = phi[data.element];
  ElementSolveResult out;

  const std::vector<Ratio> ratios = build_ratios(data, cfg, opts);
  if (ratios.empty()) {  // both targets vacuous
    out.phi_star = current;
    out.slack = out.slack_current = std::numeric_limits<double>::infinity();
    out.feasible = true;
    out.phi_dependent = false;
    return out;
  }
  out.slack_current = min_ratio(ratios, current);

  // Flat objective: every branch degenerate and the SNR term constant.
  bool flat = std::abs(data.f3_linear) <= 1e-14 * (1.0 + data.f3_const);
  for (int m = 0; m < 2 && flat; ++m)
    for (int n = 0; n < 2 && flat; ++n)
      flat = data.rate[m][n].branch != ElementBranch::Generic;
  if (flat) {
    out.phi_star = current;
    out.slack = out.slack_current;
    out.feasible = out.slack >= 1.0 - 1e-9;
    out.phi_dependent = false;
    return out;
  }

  Cx best_point = current;
  if (settings.method == ElementMethod::GridSearch) {
    double best = -std::numeric_limits<double>::infinity();
    for (double theta = 0.0; theta < 2.0 * kPi; theta += settings.grid_resolution_rad) {
      const Cx p = std::polar(1.0, theta);
      const double v = min_ratio(ratios, p);
      if (v > best) {
        best = v;
        best_point = p;
      }
    }
  } else {
    // Disk relaxation solved exactly; seeds cover the incumbent, the disk
    // center, and each ratio's own circle maximizer (which dominate when a
    // single constraint is active).
    std::vector<Cx> seeds = {current, Cx(0.0, 0.0)};
    for (int m = 0; m < 2; ++m)
      for (int n = 0; n < 2; ++n) {
        const Cx lam = data.rate[m][n].lambda;
        if (std::abs(lam) > 0.0) seeds.push_back(std::conj(lam) / std::abs(lam));
      }
    if (std::abs(data.f3_linear) > 0.0)
      seeds.push_back(std::conj(data.f3_linear) / std::abs(data.f3_linear));

    const DiskOptimum opt = maximize_on_disk(ratios, seeds, settings.level_tol);
    best_point = opt.point;
    // Projection loses value when the relaxed maximizer sits inside the
    // disk; keep whichever circle point (projection or analytic seed)
    // evaluates best, then refine locally along the circle.
    Cx proj = (best_point == Cx(0.0, 0.0)) ? Cx(1.0, 0.0)
                                           : std::polar(1.0, std::arg(best_point));
    double proj_val = min_ratio(ratios, proj);
    for (const Cx& seed : seeds) {
      if (std::abs(std::abs(seed) - 1.0) > 1e-12) continue;
      const double v = min_ratio(ratios, seed);
      if (v > proj_val) {
        proj_val = v;
        proj = seed;
      }
    }
    double theta = std::arg(proj);
    for (const double window : {0.6, 0.02}) {
      const int half = 30;
      double best_theta = theta;
      for (int i = -half; i <= half; ++i) {
        const double th = theta + window * i / half;
        const double v = min_ratio(ratios, std::polar(1.0, th));
        if (v > proj_val) {
          proj_val = v;
          best_theta = th;
        }
      }
      theta = best_theta;
    }
    out.phi_star = std::polar(1.0, theta);
    out.slack = proj_val;
    out.feasible = out.slack >= 1.0 - 1e-9;
    return out;
  }

  // Grid path: projection onto the unit circle (arg(0) -> phase 1).
  out.phi_star = (best_point == Cx(0.0, 0.0))
                     ? Cx(1.0, 0.0)
                     : std::polar(1.0, std::arg(best_point));
  out.slack = min_ratio(ratios, out.phi_star);
  out.feasible = out.slack >= 1.0 - 1e-9;
  return out;
}

}  // namespace srbeam
