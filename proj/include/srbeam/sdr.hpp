#pragma once

// Iteration-free design: eigenmode initialization, one covariance solve, the
// backscatter-link-enhancement SDR, Gaussian randomization back to the unit
// circle, a final covariance solve, W recovery. No alternation between the
// phases and the covariance.

#include "srbeam/ao.hpp"

namespace srbeam {

struct RandomizationSettings {
  int num_candidates = 200;
  uint64_t rng_seed = 1;
};

// Draw z ~ CN(0, Phi) via the PSD Cholesky factor (1e-9 jitter retry), map
// each coordinate to its phase, score with the supplied functional, keep the
// best. Deterministic under the seed.
inline PhaseVector gaussian_randomize(const HermitianMatrix& phi_mat,
                                      const std::function<double(const PhaseVector&)>& metric,
                                      const RandomizationSettings& settings,
                                      double* best_score = nullptr,
                                      double* worst_score = nullptr) {
  if (settings.num_candidates < 1)
    throw DimensionError("gaussian_randomize: need at least one candidate");
  const int k = phi_mat.dim();
  auto l = cholesky_psd(phi_mat);
  if (!l) {
    const HermitianMatrix jittered(phi_mat.matrix() +
                                   1e-9 * ComplexMatrix::identity(k));
    l = cholesky_psd(jittered);
    if (!l) throw NumericalError("gaussian_randomize: covariance not PSD");
  }

  Rng rng(settings.rng_seed);
  PhaseVector best;
  double best_val = -std::numeric_limits<double>::infinity();
  double worst_val = std::numeric_limits<double>::infinity();
  std::vector<Cx> z(k);
  for (int cand = 0; cand < settings.num_candidates; ++cand) {
    std::vector<Cx> noise(k);
    for (Cx& v : noise) v = rng.cnormal();
    std::vector<Cx> phases(k);
    for (int i = 0; i < k; ++i) {
      Cx zi = 0.0;
      for (int j = 0; j <= i; ++j) zi += (*l)(i, j) * noise[j];
      phases[i] = (zi == Cx(0.0, 0.0)) ? Cx(1.0, 0.0)
                                       : std::polar(1.0, std::arg(zi));
    }
    PhaseVector cand_phi(std::move(phases));
    const double val = metric(cand_phi);
    worst_val = std::min(worst_val, val);
    if (val > best_val) {
      best_val = val;
      best = std::move(cand_phi);
    }
  }
  if (best_score) *best_score = best_val;
  if (worst_score) *worst_score = worst_val;
  return best;
}

struct LowComplexityReport {
  double t_sdr = 0.0;             // relaxation optimum
  double t_best_candidate = 0.0;  // best randomized rank-one objective
  double power_w = 0.0;
  bool relaxation_bound_ok = true;  // t_sdr >= every candidate objective
};

// The backscatter-enhancement min{.} objective at fixed covariance; mixed units
// (rates in bps/Hz, SNR dimensionless).
inline std::function<double(const PhaseVector&)> backscatter_enhancement_metric(
    const ChannelSet& ch, const HermitianMatrix& q, const SystemConfig& cfg) {
  return [ch, q, cfg](const PhaseVector& phi) {
    const EffectiveChannels eff = effective_channels(ch, phi, cfg.reflect_efficiency);
    auto cascade_rate = [&](const ComplexMatrix& f) {
      const ComplexMatrix arg =
          ComplexMatrix::identity(f.rows()) +
          (1.0 / cfg.noise_power_w) * (f * q.matrix() * adjoint(f));
      return logdet_pd(arg).value_or(-1e300) / std::log(2.0);
    };
    const double r1 = cascade_rate(eff.to_pr);
    const double r2 = cascade_rate(eff.to_sr);
    const double s = backscatter_snr(q, eff, cfg.noise_power_w, cfg.symbol_ratio);
    return std::min({r1, r2, s});
  };
}

inline std::pair<BeamformerSolution, LowComplexityReport> run_low_complexity(
    const ChannelSet& ch, const SystemConfig& cfg, const SolveSettings& solver,
    const RandomizationSettings& rand_settings) {
  cfg.validate();
  ch.validate(cfg);
  BeamformerSolution failed;
  LowComplexityReport report;

  const PhaseVector phi0 = initialize_phi(ch, cfg);
  const SolveResult q0 = solve_min_power(ch, phi0, cfg, solver);
  if (q0.status != SolveStatus::Optimal) {
    failed.status = q0.status;
    failed.phi = phi0;
    return {failed, report};
  }

  const SolveResult sdr_res = solve_reflect_sdr(ch, q0.x, cfg, solver);
  if (sdr_res.status != SolveStatus::Optimal) {
    failed.status = sdr_res.status;
    failed.phi = phi0;
    return {failed, report};
  }
  report.t_sdr = sdr_res.objective;

  double best = 0.0, worst = 0.0;
  const PhaseVector phi = gaussian_randomize(
      sdr_res.x, backscatter_enhancement_metric(ch, q0.x, cfg), rand_settings, &best,
      &worst);
  report.t_best_candidate = best;
  report.relaxation_bound_ok = best <= report.t_sdr + 1e-6 * (1.0 + std::abs(report.t_sdr));

  const SolveResult qf = solve_min_power(ch, phi, cfg, solver);
  if (qf.status != SolveStatus::Optimal) {
    failed.status = qf.status;
    failed.phi = phi;
    return {failed, report};
  }
  try {
    BeamformerSolution sol = detail_ao::finish_solution(qf.x, ch, phi, cfg, {}, 1);
    report.power_w = sol.power_w;
    return {sol, report};
  } catch (const NumericalError&) {
    failed.status = SolveStatus::NumericalFailure;
    failed.phi = phi;
    return {failed, report};
  }
}

}  // namespace srbeam
