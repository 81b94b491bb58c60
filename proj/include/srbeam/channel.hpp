#pragma once

// Rician channel generation from link geometry: large-scale path loss,
// steering-vector LoS components, iid CN(0,1) NLoS components. Also the
// plain-text matrix exchange format used for golden-file tests.

#include <fstream>
#include <sstream>

#include "srbeam/core.hpp"

namespace srbeam {

// Per-link geometry. kappa may be +infinity, which selects the pure-LoS
// branch exactly (no large-float arithmetic).
struct LinkParams {
  double distance_m = 1.0;
  double rician_kappa = 1.0;
  double aoa_rad = 0.0;
  double aod_rad = 0.0;
};

struct LinkGeometry {
  LinkParams pt_to_pr{1000.0, 1.0, 0.8 * kPi, 0.6 * kPi};
  LinkParams pt_to_sr{200.0, 1.0, 0.6 * kPi, 0.8 * kPi};
  LinkParams pt_to_ris{2.0, 1.0, 0.8 * kPi, 1.2 * kPi};
  LinkParams ris_to_pr{999.0, 1.0, 1.2 * kPi, 0.4 * kPi};
  LinkParams ris_to_sr{199.0, 1.0, 1.4 * kPi, 0.5 * kPi};
  double beta_db = 40.0;       // path loss at 1 m
  double gamma_e = 2.0;        // path loss exponent
  double spacing_ratio = 0.5;  // antenna spacing over wavelength
  // Draw fresh uniform AoA/AoD per realization instead of the fixed angles
  // above (robustness studies; the angles above stay the default).
  bool randomize_angles = false;

  void validate() const {
    for (const LinkParams* l :
         {&pt_to_pr, &pt_to_sr, &pt_to_ris, &ris_to_pr, &ris_to_sr}) {
      if (!(l->distance_m > 0.0)) throw DimensionError("link distance must be positive");
      if (l->rician_kappa < 0.0) throw DimensionError("rician kappa must be >= 0");
    }
    if (!(spacing_ratio > 0.0)) throw DimensionError("spacing_ratio must be positive");
  }
};

// eta(d) = 10^(-beta_db/10) * d^(-gamma_e)
inline double path_loss(double distance_m, double beta_db, double gamma_e) {
  if (!(distance_m > 0.0)) throw DimensionError("path_loss: distance must be positive");
  return std::pow(10.0, -beta_db / 10.0) * std::pow(distance_m, -gamma_e);
}

// Uniform linear array steering vector a_X(theta), entry x = e^{j 2 pi (d/l) x sin theta}.
inline ComplexMatrix steering_vector(int length, double theta_rad, double spacing_ratio) {
  if (length < 1) throw DimensionError("steering_vector: length must be >= 1");
  ComplexMatrix a(length, 1);
  const double step = 2.0 * kPi * spacing_ratio * std::sin(theta_rad);
  for (int x = 0; x < length; ++x) a(x, 0) = std::polar(1.0, step * x);
  return a;
}

// sqrt(eta) * ( sqrt(k/(k+1)) LoS + sqrt(1/(k+1)) NLoS ), LoS = a_r(aoa) a_c^H(aod),
// NLoS entries iid CN(0,1) drawn row-major. kappa = inf gives the LoS term only,
// kappa = 0 the Rayleigh case.
inline ComplexMatrix rician_channel(int rows, int cols, double eta, double kappa,
                                    double theta_aoa, double theta_aod,
                                    double spacing_ratio, Rng& rng) {
  if (eta < 0.0) throw DimensionError("rician_channel: eta must be >= 0");
  if (!(kappa >= 0.0)) throw DimensionError("rician_channel: kappa must be >= 0");
  ComplexMatrix h(rows, cols);
  const double amp = std::sqrt(eta);

  double los_w = 0.0, nlos_w = 0.0;
  if (std::isinf(kappa)) {
    los_w = amp;
  } else {
    los_w = amp * std::sqrt(kappa / (kappa + 1.0));
    nlos_w = amp * std::sqrt(1.0 / (kappa + 1.0));
  }

  if (los_w > 0.0) {
    const ComplexMatrix ar = steering_vector(rows, theta_aoa, spacing_ratio);
    const ComplexMatrix ac = steering_vector(cols, theta_aod, spacing_ratio);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) h(i, j) = los_w * ar(i, 0) * std::conj(ac(j, 0));
  }
  if (nlos_w > 0.0) {
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) h(i, j) += nlos_w * rng.cnormal();
  }
  return h;
}

// Five channel draws from one master stream. Each link forks its own
// substream, so H1/H2 realizations for a given seed do not depend on K
// (common random numbers across RIS sizes).
inline ChannelSet generate_channels(const SystemConfig& cfg, const LinkGeometry& geom,
                                    const Rng& rng) {
  cfg.validate();
  geom.validate();
  auto gen = [&](const LinkParams& link, int rows, int cols, uint64_t tag) {
    Rng sub = rng.fork(tag);
    const double eta = path_loss(link.distance_m, geom.beta_db, geom.gamma_e);
    double aoa = link.aoa_rad, aod = link.aod_rad;
    if (geom.randomize_angles) {
      aoa = sub.uniform_angle();
      aod = sub.uniform_angle();
    }
    return rician_channel(rows, cols, eta, link.rician_kappa, aoa, aod,
                          geom.spacing_ratio, sub);
  };
  ChannelSet cs;
  cs.pt_to_pr = gen(geom.pt_to_pr, cfg.pr_antennas, cfg.pt_antennas, 1);
  cs.pt_to_sr = gen(geom.pt_to_sr, cfg.sr_antennas, cfg.pt_antennas, 2);
  cs.pt_to_ris = gen(geom.pt_to_ris, cfg.ris_elements, cfg.pt_antennas, 3);
  cs.ris_to_pr = gen(geom.ris_to_pr, cfg.pr_antennas, cfg.ris_elements, 4);
  cs.ris_to_sr = gen(geom.ris_to_sr, cfg.sr_antennas, cfg.ris_elements, 5);
  cs.validate(cfg);
  return cs;
}

// ---------------------------------------------------------------------------
// Text exchange format: header line "rows cols", then one line per row of
// "re im" pairs, full double precision.

inline void write_matrix(std::ostream& os, const ComplexMatrix& m) {
  os << m.rows() << ' ' << m.cols() << '\n';
  char buf[64];
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g %.17g", m(i, j).real(), m(i, j).imag());
      if (j) os << ' ';
      os << buf;
    }
    os << '\n';
  }
}

inline void write_matrix_file(const std::string& path, const ComplexMatrix& m) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot open for writing: " + path);
  write_matrix(f, m);
}

inline ComplexMatrix read_matrix(std::istream& is) {
  int rows = 0, cols = 0;
  if (!(is >> rows >> cols) || rows < 1 || cols < 1)
    throw ConfigError("matrix text: bad header");
  ComplexMatrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      double re, im;
      if (!(is >> re >> im)) throw ConfigError("matrix text: truncated data");
      m(i, j) = Cx(re, im);
    }
  m.require_finite("read_matrix");
  return m;
}

inline ComplexMatrix read_matrix_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open: " + path);
  return read_matrix(f);
}

}  // namespace srbeam
