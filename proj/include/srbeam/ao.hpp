#pragma once

// Alternating optimization for the joint beamforming problem: eigenmode
// phase initialization, covariance solves at fixed phases, closed-form
// per-element phase updates in ascending element order with an
// accept-only-feasible rule, convergence on relative power change, and
// beamformer recovery from the final covariance.
//
// Per-iteration cost: one covariance solve (path-following SDP, dominated by
// M^2-coordinate Newton systems) plus K element subproblems at
// O(N1^3 + N2^3) each for the matrix assembly.

#include <chrono>

#include "srbeam/channel.hpp"
#include "srbeam/detmax.hpp"
#include "srbeam/element.hpp"
#include "srbeam/metrics.hpp"

namespace srbeam {

struct BeamformerSolution {
  HermitianMatrix q;   // M x M PSD covariance
  ComplexMatrix w;     // M x S beamformer
  PhaseVector phi;     // reflecting phases
  double power_w = 0.0;
  double rate_primary = 0.0;    // bps/Hz
  double rate_secondary = 0.0;  // bps/Hz
  double snr_c = 0.0;
  SolveStatus status = SolveStatus::NumericalFailure;
  int iterations = 0;
};

struct ElementTrace {
  int element = 0;
  double slack = 1.0;  // running max-min slack after this element's update
  bool accepted = false;
};

struct OuterTrace {
  double power_w = 0.0;
  std::vector<ElementTrace> elements;
  double wall_ms = 0.0;
};

struct IterationTrace {
  std::vector<OuterTrace> outer;
  double min_slack(size_t i) const {
    double m = std::numeric_limits<double>::infinity();
    for (const ElementTrace& e : outer[i].elements) m = std::min(m, e.slack);
    return m;
  }
};

enum class PhaseInit { Eigenmode, RandomPhases };

struct AOSettings {
  int max_outer = 30;
  double power_rel_tol = 1e-4;
  ElementSolveSettings element;
  bool accept_only_feasible = true;
  PhaseInit init = PhaseInit::Eigenmode;
  int retry_random_init = 0;  // extra random starts if the first solve is infeasible
  SolveSettings solver = [] {
    SolveSettings s;
    s.tol = 1e-9;  // per-solve gap well under the 1e-7 monotonicity allowance
    return s;
  }();
  PrimaryProblemOptions constraints;  // full problem by default
};

// ---------------------------------------------------------------------------
// Eigenmode initialization: x, y are the strongest singular vectors of
// H1 + sqrt(alpha) G1 H3; the cascade terms are aligned with each other and
// put in quadrature to the direct term so both BPSK branches gain.

inline PhaseVector initialize_phi(const ChannelSet& ch, const SystemConfig& cfg) {
  const double sqrt_alpha = std::sqrt(cfg.reflect_efficiency);
  const ComplexMatrix combined =
      ch.pt_to_pr + sqrt_alpha * (ch.ris_to_pr * ch.pt_to_ris);
  const SvdResult s = svd(combined);
  const ComplexMatrix x = column(s.u, 0);
  const ComplexMatrix y = column(s.v, 0);

  const Cx direct = dot(x, ch.pt_to_pr * y);              // x^H H1 y
  const ComplexMatrix xg = adjoint(ch.ris_to_pr) * x;     // (x^H G1)^H
  const ComplexMatrix h3y = ch.pt_to_ris * y;             // H3 y
  std::vector<Cx> phases(cfg.ris_elements);
  const double base = kPi / 2.0 + std::arg(direct);
  for (int k = 0; k < cfg.ris_elements; ++k) {
    const Cx w = std::conj(xg(k, 0)) * h3y(k, 0);   // (x^H G1)_k (H3 y)_k
    const double argw = (w == Cx(0.0, 0.0)) ? 0.0 : std::arg(w);
    phases[k] = std::polar(1.0, base - argw);
  }
  return PhaseVector(std::move(phases));
}

inline PhaseVector random_phases(int k, Rng& rng) {
  std::vector<double> ang(k);
  for (double& a : ang) a = rng.uniform_angle();
  return PhaseVector::from_angles(ang);
}

// ---------------------------------------------------------------------------
// W recovery: spectral factor of Q truncated to S streams; when truncation
// loses rank, the smallest zeta in [1, 10] restoring the constraints scales
// the factor.

inline ComplexMatrix recover_w(const HermitianMatrix& q, const ChannelSet& ch,
                               const PhaseVector& phi, const SystemConfig& cfg,
                               const PrimaryProblemOptions& opts = {}) {
  const int m = cfg.pt_antennas;
  const int s_dim = cfg.streams();
  if (q.dim() != m) throw DimensionError("recover_w: covariance dimension mismatch");
  const EigResult e = hermitian_eig(q);
  if (!e.eigenvalues.empty() &&
      e.eigenvalues.back() < -1e-9 * (1.0 + std::max(e.eigenvalues.front(), 0.0)))
    throw NumericalError("recover_w: covariance not PSD");

  ComplexMatrix w(m, s_dim);
  for (int j = 0; j < s_dim; ++j) {
    const double lam = std::max(e.eigenvalues[j], 0.0);
    const double root = std::sqrt(lam);
    for (int i = 0; i < m; ++i) w(i, j) = root * e.eigenvectors(i, j);
  }
  if (s_dim == m) return w;

  const double lam_max = std::max(e.eigenvalues.front(), 0.0);
  double truncated = 0.0;
  for (int j = s_dim; j < m; ++j) truncated = std::max(truncated, e.eigenvalues[j]);
  if (truncated <= 1e-12 * (1.0 + lam_max)) return w;  // lossless truncation

  const EffectiveChannels eff = effective_channels(ch, phi, cfg.reflect_efficiency);
  auto feasible = [&](double zeta) {
    const HermitianMatrix qz(zeta * zeta * (w * adjoint(w)));
    if (cfg.rate_target > 0.0) {
      double rp;
      if (opts.bpsk_average) {
        rp = primary_rate(qz, eff, ch, cfg.noise_power_w);
      } else {  // c fixed to +1
        const ComplexMatrix heff = ch.pt_to_pr + eff.to_pr;
        const ComplexMatrix arg =
            ComplexMatrix::identity(heff.rows()) +
            (1.0 / cfg.noise_power_w) * (heff * qz.matrix() * adjoint(heff));
        rp = logdet_pd(arg).value_or(0.0) / std::log(2.0);
      }
      if (rp < cfg.rate_target - 1e-6) return false;
      if (opts.secondary_rate &&
          secondary_rate(qz, eff, ch, cfg.noise_power_w) < cfg.rate_target - 1e-6)
        return false;
    }
    if (opts.snr && cfg.snr_target > 0.0 &&
        backscatter_snr(qz, eff, cfg.noise_power_w, cfg.symbol_ratio) <
            cfg.snr_target * (1.0 - 1e-6))
      return false;
    return true;
  };

  if (feasible(1.0)) return w;
  double lo = 1.0, hi = 10.0;
  if (!feasible(hi))
    throw NumericalError("recover_w: no zeta <= 10 restores the constraints");
  while (hi - lo > 1e-6) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) ? hi : lo) = mid;
  }
  return hi * w;
}

// ---------------------------------------------------------------------------

namespace detail_ao {

inline BeamformerSolution finish_solution(const HermitianMatrix& q,
                                          const ChannelSet& ch, const PhaseVector& phi,
                                          const SystemConfig& cfg,
                                          const PrimaryProblemOptions& opts,
                                          int iterations) {
  BeamformerSolution sol;
  sol.q = q;
  sol.phi = phi;
  sol.w = recover_w(q, ch, phi, cfg, opts);
  const HermitianMatrix qw(sol.w * adjoint(sol.w));
  const EffectiveChannels eff = effective_channels(ch, phi, cfg.reflect_efficiency);
  sol.power_w = trace(qw.matrix()).real();
  sol.rate_primary = primary_rate(qw, eff, ch, cfg.noise_power_w);
  sol.rate_secondary = secondary_rate(qw, eff, ch, cfg.noise_power_w);
  sol.snr_c = backscatter_snr(qw, eff, cfg.noise_power_w, cfg.symbol_ratio);
  sol.status = SolveStatus::Optimal;
  sol.iterations = iterations;
  return sol;
}

}  // namespace detail_ao

// Algorithm: initialize phases; repeat { covariance solve; ascending-k
// element updates with in-place phases } until the power change is below
// power_rel_tol; recover W.
inline std::pair<BeamformerSolution, IterationTrace> run_ao(const ChannelSet& ch,
                                                            const SystemConfig& cfg,
                                                            const AOSettings& settings,
                                                            Rng& rng) {
  cfg.validate();
  ch.validate(cfg);
  IterationTrace trace;
  BeamformerSolution failed;

  PhaseVector phi = (settings.init == PhaseInit::RandomPhases)
                        ? random_phases(cfg.ris_elements, rng)
                        : initialize_phi(ch, cfg);

  // Optional random restarts if the problem is infeasible at the initial phases.
  SolveResult qsol = solve_min_power(ch, phi, cfg, settings.solver, settings.constraints);
  for (int retry = 0;
       qsol.status == SolveStatus::Infeasible && retry < settings.retry_random_init;
       ++retry) {
    phi = random_phases(cfg.ris_elements, rng);
    qsol = solve_min_power(ch, phi, cfg, settings.solver, settings.constraints);
  }
  if (qsol.status != SolveStatus::Optimal) {
    failed.status = qsol.status;
    failed.phi = phi;
    return {failed, trace};
  }

  double prev_power = std::numeric_limits<double>::infinity();
  int outer = 0;
  HermitianMatrix q = qsol.x;
  for (outer = 1; outer <= settings.max_outer; ++outer) {
    const auto t0 = std::chrono::steady_clock::now();
    if (outer > 1) {
      qsol = solve_min_power(ch, phi, cfg, settings.solver, settings.constraints);
      if (qsol.status != SolveStatus::Optimal) {
        failed.status = qsol.status;
        failed.phi = phi;
        return {failed, trace};
      }
      q = qsol.x;
    }
    OuterTrace ot;
    ot.power_w = qsol.objective;

    const double rel_change = std::abs(prev_power - qsol.objective) /
                              std::max(prev_power, 1e-300);
    prev_power = qsol.objective;
    if (outer > 1 && rel_change < settings.power_rel_tol) {
      trace.outer.push_back(std::move(ot));
      break;
    }

    for (int k = 0; k < cfg.ris_elements; ++k) {
      const ElementSubproblemData data = element_subproblem_data(ch, q, phi, k, cfg);
      const ElementSolveResult r =
          solve_element(data, cfg, phi, settings.element, settings.constraints);
      ElementTrace et;
      et.element = k;
      if (r.feasible || !settings.accept_only_feasible) {
        phi.set(k, r.phi_star);
        et.accepted = true;
        et.slack = r.slack;
      } else {
        et.accepted = false;
        et.slack = r.slack_current;
      }
      ot.elements.push_back(et);
    }
    ot.wall_ms = std::chrono::duration<double, std::milli>(
                     std::chrono::steady_clock::now() - t0)
                     .count();
    trace.outer.push_back(std::move(ot));
  }

  try {
    BeamformerSolution sol = detail_ao::finish_solution(
        q, ch, phi, cfg, settings.constraints,
        static_cast<int>(trace.outer.size()));
    return {sol, trace};
  } catch (const NumericalError&) {
    failed.status = SolveStatus::NumericalFailure;
    failed.phi = phi;
    failed.q = q;
    return {failed, trace};
  }
}

}  // namespace srbeam
