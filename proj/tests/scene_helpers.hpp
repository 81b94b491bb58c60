#pragma once

// Shared test fixtures: unit-scale random scenes for algebra checks and
// benchmark-default physical scenes for end-to-end runs.

#include "srbeam/channel.hpp"
#include "srbeam/linalg.hpp"

namespace srbeam_test {

using namespace srbeam;

inline ComplexMatrix random_matrix(int r, int c, Rng& rng) {
  ComplexMatrix m(r, c);
  for (auto& v : m.data()) v = rng.cnormal();
  return m;
}

inline HermitianMatrix random_psd(int n, Rng& rng, double ridge = 0.0) {
  const ComplexMatrix a = random_matrix(n, n, rng);
  return HermitianMatrix(adjoint(a) * a + ridge * ComplexMatrix::identity(n));
}

struct Scene {
  SystemConfig cfg;
  ChannelSet ch;
  PhaseVector phi;
};

inline Scene unit_scene(Rng& rng, int m = 3, int n1 = 3, int n2 = 3, int k = 8,
                        double rate = 3.0, double snr = 2.0) {
  Scene s;
  s.cfg.pt_antennas = m;
  s.cfg.pr_antennas = n1;
  s.cfg.sr_antennas = n2;
  s.cfg.ris_elements = k;
  s.cfg.noise_power_w = 1.0;
  s.cfg.rate_target = rate;
  s.cfg.snr_target = snr;
  s.ch.pt_to_pr = random_matrix(n1, m, rng);
  s.ch.pt_to_sr = random_matrix(n2, m, rng);
  s.ch.pt_to_ris = random_matrix(k, m, rng);
  s.ch.ris_to_pr = random_matrix(n1, k, rng);
  s.ch.ris_to_sr = random_matrix(n2, k, rng);
  std::vector<double> ang(k);
  for (double& a : ang) a = rng.uniform_angle();
  s.phi = PhaseVector::from_angles(ang);
  return s;
}

// Reference benchmark geometry and physical noise floor.
inline Scene benchmark_scene(uint64_t seed, int k = 16, double rate = 5.0,
                         double snr = 1.0, int m = 3, int n1 = 3, int n2 = 3) {
  Scene s;
  s.cfg.pt_antennas = m;
  s.cfg.pr_antennas = n1;
  s.cfg.sr_antennas = n2;
  s.cfg.ris_elements = k;
  s.cfg.rate_target = rate;
  s.cfg.snr_target = snr;
  s.cfg.noise_power_w = 1e-12;  // -90 dBm
  s.cfg.symbol_ratio = 50;
  LinkGeometry geom;
  Rng rng(seed);
  s.ch = generate_channels(s.cfg, geom, rng);
  s.phi = PhaseVector::ones(k);
  return s;
}

}  // namespace srbeam_test
