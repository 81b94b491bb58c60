#pragma once

// Theoretical-analysis computations: effective-channel rank, condition
// number / strongest eigenchannel gain (both on E_c[H_eff] = H1 and on the
// c = +1 channel), and the Marchenko-Pastur asymptotic rates for the
// Rayleigh direct link.

#include "srbeam/channel.hpp"
#include "srbeam/linalg.hpp"
#include "srbeam/metrics.hpp"

namespace srbeam {

inline ComplexMatrix effective_channel(const ChannelSet& ch, const PhaseVector& phi,
                                       double alpha, int c) {
  if (c != 1 && c != -1) throw DimensionError("effective_channel: c must be +-1");
  const int k = phi.size();
  ComplexMatrix psih3(k, ch.pt_to_ris.cols());
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < ch.pt_to_ris.cols(); ++j)
      psih3(i, j) = phi[i] * ch.pt_to_ris(i, j);
  return ch.pt_to_pr +
         (static_cast<double>(c) * std::sqrt(alpha)) * (ch.ris_to_pr * psih3);
}

// Numerical rank of H1 + sqrt(alpha) c G1 Psi H3 (threshold 1e-8 sigma_max).
inline int effective_rank(const ChannelSet& ch, const PhaseVector& phi, double alpha,
                          int c) {
  return numerical_rank(effective_channel(ch, phi, alpha, c));
}

struct ConditionReport {
  // On E_c[H_eff] = H1 (the BPSK branches cancel in expectation).
  double condition_mean = 0.0;
  double eigengain_mean = 0.0;
  // On H_eff(c = +1), the convention the optimized-channel sweep plots.
  double condition_plus = 0.0;
  double eigengain_plus = 0.0;
};

inline ConditionReport condition_and_eigengain(const ChannelSet& ch,
                                               const PhaseVector& phi, double alpha) {
  auto stats = [](const ComplexMatrix& h, double& cond, double& gain) {
    const SvdResult s = svd(h);
    const double smax = s.singular_values.front();
    const double smin = s.singular_values.back();
    gain = smax * smax;
    cond = (smin < 1e-12 * smax) ? std::numeric_limits<double>::infinity()
                                 : smax / smin;
  };
  ConditionReport r;
  stats(ch.pt_to_pr, r.condition_mean, r.eigengain_mean);
  stats(effective_channel(ch, phi, alpha, +1), r.condition_plus, r.eigengain_plus);
  return r;
}

// ---------------------------------------------------------------------------
// Marchenko-Pastur asymptotics: the large-K Rayleigh-limit primary rates with
// and without the cascade, Q = P I. The spectral integral uses the
// substitution x = a + (b-a)(1-cos th)/2, which removes the square-root
// endpoint singularities; the beta > 1 point mass at zero lies outside [a, b]
// and contributes nothing to log2(1 + coeff x).

struct MpRates {
  double rate_with = 0.0;
  double rate_without = 0.0;
};

namespace detail_mp {

// integral over [a, b] of f_beta(x) g(x) dx for the MP density of ratio beta.
inline double mp_integral(double beta, int quad_points,
                          const std::function<double(double)>& g) {
  const double sb = std::sqrt(beta);
  const double a = (1.0 - sb) * (1.0 - sb);
  const double b = (1.0 + sb) * (1.0 + sb);
  const double w = (b - a) / 2.0;
  // x(th) = a + w (1 - cos th), dx = w sin th dth,
  // sqrt((x-a)(b-x)) = w sin th  =>  integrand smooth in th.
  double acc = 0.0;
  const int n = quad_points;
  for (int i = 0; i < n; ++i) {
    const double th = kPi * (i + 0.5) / n;  // midpoint rule
    const double x = a + w * (1.0 - std::cos(th));
    const double sin_th = std::sin(th);
    acc += (w * sin_th) * (w * sin_th) / (2.0 * kPi * beta * x) * g(x);
  }
  return acc * kPi / n;
}

}  // namespace detail_mp

inline double mp_density_mass(double beta, int quad_points) {
  return detail_mp::mp_integral(beta, quad_points, [](double) { return 1.0; });
}

inline MpRates mp_asymptotic_rates(int m_tx, int n_rx, double power_w, double sigma2,
                                   double eta_direct, double eta_cascade_k,
                                   int quad_points) {
  if (m_tx < 1 || n_rx < 1) throw DimensionError("mp rates: antenna counts");
  if (quad_points < 100) throw DimensionError("mp rates: need >= 100 quad points");
  const double beta = static_cast<double>(m_tx) / n_rx;
  if (!(beta > 0.0)) throw DimensionError("mp rates: beta must be positive");

  const double coeff_with = power_w * (eta_direct + eta_cascade_k) * n_rx / sigma2;
  const double coeff_without = power_w * eta_direct * n_rx / sigma2;
  auto rate_for = [&](double coeff) {
    return m_tx * detail_mp::mp_integral(beta, quad_points, [&](double x) {
             return std::log2(1.0 + coeff * x);
           });
  };
  MpRates r;
  r.rate_with = rate_for(coeff_with);
  r.rate_without = rate_for(coeff_without);
  return r;
}

}  // namespace srbeam
