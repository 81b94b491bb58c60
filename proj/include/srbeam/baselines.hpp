#pragma once

// Benchmark policies: random reflecting phases, water-filling without the
// RIS, randomly initialized AO, one-dimensional (grid) search AO, and the
// purely-assisting variant that drops the secondary constraints.

#include "srbeam/ao.hpp"

namespace srbeam {

// Random unit-modulus phases, one covariance solve, W recovery.
inline BeamformerSolution random_beamforming(const ChannelSet& ch,
                                             const SystemConfig& cfg,
                                             const SolveSettings& solver, Rng& rng) {
  cfg.validate();
  ch.validate(cfg);
  const PhaseVector phi = random_phases(cfg.ris_elements, rng);
  const SolveResult qsol = solve_min_power(ch, phi, cfg, solver);
  if (qsol.status != SolveStatus::Optimal) {
    BeamformerSolution sol;
    sol.status = qsol.status;
    sol.phi = phi;
    return sol;
  }
  try {
    BeamformerSolution sol = detail_ao::finish_solution(qsol.x, ch, phi, cfg, {}, 1);
    return sol;
  } catch (const NumericalError&) {
    BeamformerSolution sol;
    sol.status = SolveStatus::NumericalFailure;
    sol.phi = phi;
    return sol;
  }
}

// P-W: water-filling over the eigenmodes of H1, water level chosen so the
// rate constraint holds with equality.
inline BeamformerSolution water_filling_no_ris(const ComplexMatrix& h1,
                                               const SystemConfig& cfg) {
  cfg.validate();
  BeamformerSolution sol;
  sol.phi = PhaseVector::ones(cfg.ris_elements);
  const double rs = cfg.rate_target;
  const int m = h1.cols();

  const SvdResult s = svd(h1);
  std::vector<double> gains;  // sigma_i^2 / noise
  for (double sv : s.singular_values)
    if (sv > 1e-14 * (s.singular_values.front() + 1e-300))
      gains.push_back(sv * sv / cfg.noise_power_w);

  if (gains.empty()) {
    if (rs > 0.0) {
      sol.status = SolveStatus::Infeasible;
      return sol;
    }
    sol.q = HermitianMatrix::zeros(m);
    sol.w = ComplexMatrix::zeros(m, cfg.streams());
    sol.status = SolveStatus::Optimal;
    return sol;
  }

  auto rate_at = [&](double mu) {
    double r = 0.0;
    for (double g : gains)
      if (mu * g > 1.0) r += std::log2(mu * g);
    return r;
  };
  double lo = 1.0 / gains.front();  // rate 0
  double hi = lo;
  while (rate_at(hi) < rs) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (rate_at(mid) < rs ? lo : hi) = mid;
  }
  const double mu = hi;

  const int n_modes = static_cast<int>(gains.size());
  ComplexMatrix q(m, m);
  double power = 0.0;
  for (int i = 0; i < n_modes; ++i) {
    const double p = std::max(0.0, mu - 1.0 / gains[i]);
    if (p == 0.0) continue;
    power += p;
    const ComplexMatrix v = column(s.v, i);
    q = q + p * (v * adjoint(v));
  }
  sol.q = HermitianMatrix(q);

  // W straight from the allocation; active modes never exceed min(M, N1),
  // so the S-column beamformer loses nothing in the M = N1 = N2 settings and
  // is zeta-rescaled on the rate constraint otherwise.
  const int s_dim = cfg.streams();
  ComplexMatrix w(m, s_dim);
  int used = 0;
  for (int i = 0; i < n_modes && used < s_dim; ++i) {
    const double p = std::max(0.0, mu - 1.0 / gains[i]);
    if (p == 0.0) continue;
    for (int r = 0; r < m; ++r) w(r, used) = std::sqrt(p) * s.v(r, i);
    ++used;
  }
  {
    const HermitianMatrix qw(w * adjoint(w));
    const ComplexMatrix arg =
        ComplexMatrix::identity(h1.rows()) +
        (1.0 / cfg.noise_power_w) * (h1 * qw.matrix() * adjoint(h1));
    double rate_w = logdet_pd(arg).value_or(0.0) / std::log(2.0);
    if (rate_w < rs - 1e-6) {
      double zlo = 1.0, zhi = 10.0;
      auto ok = [&](double z) {
        const HermitianMatrix qz(z * z * (w * adjoint(w)));
        const ComplexMatrix a =
            ComplexMatrix::identity(h1.rows()) +
            (1.0 / cfg.noise_power_w) * (h1 * qz.matrix() * adjoint(h1));
        return logdet_pd(a).value_or(0.0) / std::log(2.0) >= rs - 1e-6;
      };
      if (!ok(zhi)) {
        sol.status = SolveStatus::NumericalFailure;
        return sol;
      }
      while (zhi - zlo > 1e-6) {
        const double mid = 0.5 * (zlo + zhi);
        (ok(mid) ? zhi : zlo) = mid;
      }
      w = zhi * w;
    }
  }
  sol.w = w;
  const HermitianMatrix qw(w * adjoint(w));
  sol.power_w = trace(qw.matrix()).real();

  const ComplexMatrix arg =
      ComplexMatrix::identity(h1.rows()) +
      (1.0 / cfg.noise_power_w) * (h1 * qw.matrix() * adjoint(h1));
  sol.rate_primary = logdet_pd(arg).value_or(0.0) / std::log(2.0);
  sol.rate_secondary = 0.0;
  sol.snr_c = 0.0;
  sol.status = SolveStatus::Optimal;
  sol.iterations = 1;
  return sol;
}

// One-dimensional search policy: the AO loop with grid-searched phases.
inline std::pair<BeamformerSolution, IterationTrace> one_dimensional_search_ao(
    const ChannelSet& ch, const SystemConfig& cfg, AOSettings settings) {
  settings.element.method = ElementMethod::GridSearch;
  settings.init = PhaseInit::Eigenmode;
  Rng unused(0);  // the grid policy draws nothing
  return run_ao(ch, cfg, settings, unused);
}

// Random-initialization policy: the AO loop from uniform random phases.
inline std::pair<BeamformerSolution, IterationTrace> random_initialization_ao(
    const ChannelSet& ch, const SystemConfig& cfg, AOSettings settings, Rng& rng) {
  settings.init = PhaseInit::RandomPhases;
  return run_ao(ch, cfg, settings, rng);
}

// Purely-assisting policy: c fixed to +1 and the secondary rate/SNR
// constraints dropped; the AO machinery otherwise unchanged.
inline std::pair<BeamformerSolution, IterationTrace> pure_assist_ao(
    const ChannelSet& ch, const SystemConfig& cfg, AOSettings settings, Rng& rng) {
  settings.constraints.secondary_rate = false;
  settings.constraints.snr = false;
  settings.constraints.bpsk_average = false;
  return run_ao(ch, cfg, settings, rng);
}

}  // namespace srbeam
