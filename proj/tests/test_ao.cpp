#include "doctest.h"
#include "scene_helpers.hpp"
#include "srbeam/ao.hpp"

using namespace srbeam;
using namespace srbeam_test;

TEST_CASE("initialize_phi: zero cascade gives a constant phase vector") {
  Rng rng(201);
  Scene s = unit_scene(rng, 3, 3, 3, 5);
  s.ch.ris_to_pr = ComplexMatrix::zeros(3, 5);
  const PhaseVector phi = initialize_phi(s.ch, s.cfg);
  for (int k = 1; k < 5; ++k) CHECK(std::abs(phi[k] - phi[0]) < 1e-12);
}

TEST_CASE("initialize_phi: scalar positive channels give the quadrature phase") {
  SystemConfig cfg;
  cfg.pt_antennas = cfg.pr_antennas = cfg.sr_antennas = 1;
  cfg.ris_elements = 1;
  ChannelSet ch;
  ch.pt_to_pr = ComplexMatrix::identity(1);
  ch.pt_to_sr = ComplexMatrix::identity(1);
  ch.pt_to_ris = ComplexMatrix::identity(1);
  ch.ris_to_pr = ComplexMatrix::identity(1);
  ch.ris_to_sr = ComplexMatrix::identity(1);
  const PhaseVector phi = initialize_phi(ch, cfg);
  CHECK(phi[0].real() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(phi[0].imag() == doctest::Approx(1.0));
}

TEST_CASE("initialize_phi: unit modulus and reproducible") {
  Rng rng(202);
  const Scene s = unit_scene(rng);
  const PhaseVector a = initialize_phi(s.ch, s.cfg);
  const PhaseVector b = initialize_phi(s.ch, s.cfg);
  for (int k = 0; k < a.size(); ++k) {
    CHECK(std::abs(std::abs(a[k]) - 1.0) < 1e-12);
    CHECK(a[k] == b[k]);
  }
}

TEST_CASE("recover_w: identity covariance with S = M") {
  SystemConfig cfg;
  cfg.pt_antennas = cfg.pr_antennas = cfg.sr_antennas = 3;
  cfg.ris_elements = 2;
  Rng rng(203);
  const Scene s = unit_scene(rng, 3, 3, 3, 2);
  const ComplexMatrix w =
      recover_w(HermitianMatrix::identity(3), s.ch, s.phi, cfg);
  CHECK((w - ComplexMatrix::identity(3)).max_abs() < 1e-12);
}

TEST_CASE("recover_w: lossless when rank(Q) <= S") {
  Rng rng(204);
  Scene s = unit_scene(rng, 3, 2, 2, 4);  // S = 2
  const ComplexMatrix w0 = random_matrix(3, 2, rng);
  const HermitianMatrix q(w0 * adjoint(w0));
  const ComplexMatrix w = recover_w(q, s.ch, s.phi, s.cfg);
  CHECK(w.cols() == 2);
  CHECK((w * adjoint(w) - q.matrix()).max_abs() < 1e-9 * (1.0 + q.matrix().max_abs()));
  CHECK(trace(w * adjoint(w)).real() ==
        doctest::Approx(trace(q.matrix()).real()).epsilon(1e-10));
}

TEST_CASE("recover_w: rank overflow is rescaled onto the constraints") {
  Rng rng(205);
  Scene s = unit_scene(rng, 3, 2, 2, 4);  // S = 2 < M = 3
  const HermitianMatrix q = random_psd(3, rng, 0.3);
  // Make the covariance itself satisfy the constraints so zeta <= 10 exists.
  const EffectiveChannels eff = effective_channels(s.ch, s.phi, 1.0);
  s.cfg.rate_target =
      0.8 * std::min(primary_rate(q, eff, s.ch, 1.0), secondary_rate(q, eff, s.ch, 1.0));
  s.cfg.snr_target = 0.8 * backscatter_snr(q, eff, 1.0, s.cfg.symbol_ratio);
  const ComplexMatrix w = recover_w(q, s.ch, s.phi, s.cfg);
  const HermitianMatrix qw(w * adjoint(w));
  CHECK(primary_rate(qw, eff, s.ch, 1.0) >= s.cfg.rate_target - 1e-6);
  CHECK(secondary_rate(qw, eff, s.ch, 1.0) >= s.cfg.rate_target - 1e-6);
  CHECK(backscatter_snr(qw, eff, 1.0, s.cfg.symbol_ratio) >=
        s.cfg.snr_target * (1.0 - 1e-6));
  // power >= trace of the truncated factor (zeta >= 1)
  const EigResult e = hermitian_eig(q);
  const double truncated = e.eigenvalues[0] + e.eigenvalues[1];
  CHECK(trace(qw.matrix()).real() >= truncated - 1e-9);
}

TEST_CASE("run_ao: monotone descent and feasible finish on benchmark scenes") {
  for (uint64_t seed : {11ull, 12ull, 13ull}) {
    const Scene s = benchmark_scene(seed, 8);
    AOSettings settings;
    Rng rng(seed);
    const auto [sol, tr] = run_ao(s.ch, s.cfg, settings, rng);
    REQUIRE(sol.status == SolveStatus::Optimal);
    REQUIRE(tr.outer.size() >= 1);
    for (size_t i = 1; i < tr.outer.size(); ++i)
      CHECK(tr.outer[i].power_w <=
            tr.outer[i - 1].power_w * (1.0 + 1e-7));
    // acceptance safety: stored phases are feasible after every sweep
    for (size_t i = 0; i < tr.outer.size(); ++i)
      for (const ElementTrace& e : tr.outer[i].elements)
        CHECK(e.slack >= 1.0 - 1e-9);
    // final solution re-evaluates feasible through link-metrics
    CHECK(sol.rate_primary >= s.cfg.rate_target - 1e-5);
    CHECK(sol.rate_secondary >= s.cfg.rate_target - 1e-5);
    CHECK(sol.snr_c >= s.cfg.snr_target * (1.0 - 1e-5));
    CHECK(sol.power_w == doctest::Approx(trace(sol.w * adjoint(sol.w)).real())
                             .epsilon(1e-8));
  }
}

TEST_CASE("run_ao: infeasible at the initial phases is reported") {
  Rng rng(207);
  Scene s = unit_scene(rng, 2, 2, 2, 3, 1.0, 1.0);
  s.ch.ris_to_sr = ComplexMatrix::zeros(2, 3);  // F2 = 0 with gamma > 0
  AOSettings settings;
  Rng arng(1);
  const auto [sol, tr] = run_ao(s.ch, s.cfg, settings, arng);
  CHECK(sol.status == SolveStatus::Infeasible);
  CHECK(tr.outer.empty());
}

TEST_CASE("run_ao: converges within the iteration budget on benchmark scenes") {
  const Scene s = benchmark_scene(21, 8);
  AOSettings settings;
  Rng rng(21);
  const auto [sol, tr] = run_ao(s.ch, s.cfg, settings, rng);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(static_cast<int>(tr.outer.size()) <= settings.max_outer);
  // relative power change between the last two covariance solves is small
  const size_t n = tr.outer.size();
  if (n >= 2) {
    const double a = tr.outer[n - 2].power_w;
    const double b = tr.outer[n - 1].power_w;
    CHECK(std::abs(a - b) / std::max(a, 1e-300) < settings.power_rel_tol);
  }
}
