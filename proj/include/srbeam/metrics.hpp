#pragma once

// Closed-form link metrics: effective cascaded channels F1/F2, the
// BPSK-averaged primary and secondary rates, the backscatter SNR, and the
// finite-L Monte Carlo estimate the SNR approximation is checked against.
//
// Conventions: F_m = sqrt(alpha) G_m Psi H3, i.e. the reflection efficiency
// is folded into F once; the SNR is (L/sigma^2) tr(F2 Q F2^H). Rates are
// exact two-point averages over the BPSK symbol c, never sampled.

#include "srbeam/core.hpp"
#include "srbeam/linalg.hpp"

namespace srbeam {

struct EffectiveChannels {
  ComplexMatrix to_pr;  // F1 = sqrt(alpha) G1 Psi H3, N1 x M
  ComplexMatrix to_sr;  // F2 = sqrt(alpha) G2 Psi H3, N2 x M
};

inline EffectiveChannels effective_channels(const ChannelSet& ch, const PhaseVector& phi,
                                            double alpha) {
  if (phi.size() != ch.pt_to_ris.rows())
    throw DimensionError("effective_channels: phase count != RIS elements");
  const int k = phi.size();
  const int m = ch.pt_to_ris.cols();
  const double amp = std::sqrt(alpha);
  // Psi H3 scales row k of H3 by phi_k; one pass, no K x K diagonal product.
  ComplexMatrix psih3(k, m);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < m; ++j) psih3(i, j) = phi[i] * ch.pt_to_ris(i, j);
  EffectiveChannels eff;
  eff.to_pr = amp * (ch.ris_to_pr * psih3);
  eff.to_sr = amp * (ch.ris_to_sr * psih3);
  return eff;
}

namespace detail {

// log2 det(I + (H + c F) Q (H + c F)^H / sigma^2) for one BPSK branch.
inline double branch_rate_bits(const ComplexMatrix& h, const ComplexMatrix& f,
                               double c, const ComplexMatrix& q, double sigma2) {
  ComplexMatrix eff = h;
  if (!f.empty()) eff = h + c * f;
  const ComplexMatrix arg =
      ComplexMatrix::identity(eff.rows()) + (1.0 / sigma2) * (eff * q * adjoint(eff));
  const auto ld = logdet_pd(arg);
  if (!ld) throw NumericalError("rate: determinant argument not positive definite");
  return *ld / std::log(2.0);
}

}  // namespace detail

// Signal-plus-noise covariance (1/sigma^2)(H1 + c F1) Q (H1 + c F1)^H.
inline HermitianMatrix signal_covariance(const HermitianMatrix& q,
                                         const EffectiveChannels& eff,
                                         const ComplexMatrix& h1, double sigma2, int c) {
  if (c != 1 && c != -1) throw DimensionError("signal_covariance: c must be +-1");
  const ComplexMatrix heff = h1 + static_cast<double>(c) * eff.to_pr;
  return HermitianMatrix((1.0 / sigma2) * (heff * q.matrix() * adjoint(heff)));
}

// Primary rate, exact BPSK average of the two branch log-dets.
inline double primary_rate(const HermitianMatrix& q, const EffectiveChannels& eff,
                           const ChannelSet& ch, double sigma2) {
  return 0.5 * detail::branch_rate_bits(ch.pt_to_pr, eff.to_pr, +1.0, q.matrix(), sigma2) +
         0.5 * detail::branch_rate_bits(ch.pt_to_pr, eff.to_pr, -1.0, q.matrix(), sigma2);
}

// Secondary (PTx -> SRx) rate under joint decoding, same two-branch form.
inline double secondary_rate(const HermitianMatrix& q, const EffectiveChannels& eff,
                             const ChannelSet& ch, double sigma2) {
  return 0.5 * detail::branch_rate_bits(ch.pt_to_sr, eff.to_sr, +1.0, q.matrix(), sigma2) +
         0.5 * detail::branch_rate_bits(ch.pt_to_sr, eff.to_sr, -1.0, q.matrix(), sigma2);
}

// SNR for decoding the secondary symbol: (L / sigma^2) tr(F2 Q F2^H).
inline double backscatter_snr(const HermitianMatrix& q, const EffectiveChannels& eff,
                              double sigma2, int symbol_ratio) {
  const ComplexMatrix f2qf2 = eff.to_sr * q.matrix() * adjoint(eff.to_sr);
  return static_cast<double>(symbol_ratio) / sigma2 * trace(f2qf2).real();
}

// Finite-L pre-approximation SNR: mean over trials of
// (1/sigma^2) sum_{l=1}^{L} ||F2 W s(l)||^2 with s(l) iid CN(0, I_S).
// This is the independent oracle for backscatter_snr's L >> 1 approximation.
inline double snr_c_monte_carlo(const ComplexMatrix& w, const EffectiveChannels& eff,
                                double sigma2, int symbol_ratio, int num_trials,
                                Rng& rng) {
  if (symbol_ratio < 1) throw DimensionError("snr_c_monte_carlo: L must be >= 1");
  if (num_trials < 1) throw DimensionError("snr_c_monte_carlo: trials must be >= 1");
  const ComplexMatrix f2w = eff.to_sr * w;  // N2 x S
  const int n2 = f2w.rows(), s_dim = f2w.cols();
  double acc = 0.0;
  std::vector<Cx> s(s_dim);
  for (int trial = 0; trial < num_trials; ++trial) {
    double sum_l = 0.0;
    for (int l = 0; l < symbol_ratio; ++l) {
      for (int k = 0; k < s_dim; ++k) s[k] = rng.cnormal();
      for (int i = 0; i < n2; ++i) {
        Cx v = 0.0;
        for (int k = 0; k < s_dim; ++k) v += f2w(i, k) * s[k];
        sum_l += std::norm(v);
      }
    }
    acc += sum_l / sigma2;
  }
  return acc / num_trials;
}

// Weak-direct-link primary rate log2 det(I + F1 Q F1^H / sigma^2); equals
// primary_rate when H1 = 0 (the two BPSK branches coincide).
inline double blocked_direct_link_rate(const HermitianMatrix& q,
                                       const EffectiveChannels& eff, double sigma2) {
  const ComplexMatrix zero_h(eff.to_pr.rows(), eff.to_pr.cols());
  return detail::branch_rate_bits(zero_h, eff.to_pr, 1.0, q.matrix(), sigma2);
}

}  // namespace srbeam
