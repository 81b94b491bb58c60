#include "doctest.h"
#include "scene_helpers.hpp"
#include "srbeam/baselines.hpp"
#include "srbeam/sdr.hpp"

using namespace srbeam;
using namespace srbeam_test;

TEST_CASE("gaussian_randomize: rank-one covariance recovers the phases") {
  Rng rng(301);
  const int k = 6;
  std::vector<double> ang(k);
  for (double& a : ang) a = rng.uniform_angle();
  const PhaseVector target = PhaseVector::from_angles(ang);
  ComplexMatrix outer(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) outer(i, j) = target[i] * std::conj(target[j]);

  // Score: squared magnitude of the inner product with the planted phases,
  // invariant to a global rotation.
  auto metric = [&](const PhaseVector& p) {
    Cx acc = 0.0;
    for (int i = 0; i < k; ++i) acc += std::conj(target[i]) * p[i];
    return std::abs(acc);
  };
  RandomizationSettings rs;
  rs.num_candidates = 8;
  rs.rng_seed = 5;
  const PhaseVector got = gaussian_randomize(HermitianMatrix(outer), metric, rs);
  CHECK(metric(got) == doctest::Approx(static_cast<double>(k)).epsilon(1e-9));
}

TEST_CASE("gaussian_randomize: identity covariance gives iid-looking phases") {
  RandomizationSettings rs;
  rs.num_candidates = 1;
  rs.rng_seed = 7;
  int distinct = 0;
  const PhaseVector p = gaussian_randomize(
      HermitianMatrix::identity(16), [](const PhaseVector&) { return 0.0; }, rs);
  for (int i = 1; i < 16; ++i)
    if (std::abs(p[i] - p[0]) > 1e-3) ++distinct;
  CHECK(distinct > 10);  // not collapsed to a constant
}

TEST_CASE("gaussian_randomize: deterministic under the seed") {
  Rng rng(302);
  const HermitianMatrix phi_mat = random_psd(5, rng, 0.5);
  // normalize diagonal to 1
  ComplexMatrix m = phi_mat.matrix();
  for (int i = 0; i < 5; ++i) {
    const double d = std::sqrt(m(i, i).real());
    for (int j = 0; j < 5; ++j) {
      m(i, j) /= d;
      m(j, i) /= d;
    }
  }
  const HermitianMatrix unit_diag(m);
  auto metric = [](const PhaseVector& p) { return p[0].real() + p[1].imag(); };
  RandomizationSettings rs;
  rs.num_candidates = 32;
  rs.rng_seed = 99;
  const PhaseVector a = gaussian_randomize(unit_diag, metric, rs);
  const PhaseVector b = gaussian_randomize(unit_diag, metric, rs);
  for (int i = 0; i < 5; ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("run_low_complexity: pipeline on a benchmark scene") {
  const Scene s = benchmark_scene(41, 8);
  SolveSettings solver;
  RandomizationSettings rs;
  rs.num_candidates = 100;
  rs.rng_seed = 41;
  const auto [sol, report] = run_low_complexity(s.ch, s.cfg, solver, rs);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.rate_primary >= s.cfg.rate_target - 1e-5);
  CHECK(sol.rate_secondary >= s.cfg.rate_target - 1e-5);
  CHECK(sol.snr_c >= s.cfg.snr_target * (1.0 - 1e-5));
  CHECK(report.relaxation_bound_ok);
  CHECK(report.t_best_candidate <= report.t_sdr + 1e-6 * (1.0 + report.t_sdr));
  CHECK(report.power_w == doctest::Approx(sol.power_w));
}

TEST_CASE("run_low_complexity: K = 1 collapses to a single fixed phase") {
  const Scene s = benchmark_scene(42, 1);
  SolveSettings solver;
  RandomizationSettings rs;
  rs.num_candidates = 4;
  rs.rng_seed = 3;
  const auto [sol, report] = run_low_complexity(s.ch, s.cfg, solver, rs);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.phi.size() == 1);
  CHECK(report.t_sdr >= report.t_best_candidate - 1e-6 * (1.0 + report.t_sdr));
}

TEST_CASE("run_low_complexity: deterministic under fixed seeds") {
  const Scene s = benchmark_scene(43, 6);
  SolveSettings solver;
  RandomizationSettings rs;
  rs.num_candidates = 50;
  rs.rng_seed = 17;
  const auto [sol1, rep1] = run_low_complexity(s.ch, s.cfg, solver, rs);
  const auto [sol2, rep2] = run_low_complexity(s.ch, s.cfg, solver, rs);
  REQUIRE(sol1.status == SolveStatus::Optimal);
  CHECK(sol1.power_w == sol2.power_w);
  CHECK(rep1.t_best_candidate == rep2.t_best_candidate);
  for (int i = 0; i < 6; ++i) CHECK(sol1.phi[i] == sol2.phi[i]);
}

TEST_CASE("low complexity equals water filling when the cascade is dead") {
  Rng rng(304);
  SystemConfig cfg;
  cfg.noise_power_w = 1.0;
  cfg.rate_target = 3.0;
  cfg.snr_target = 0.0;
  cfg.ris_elements = 4;
  ChannelSet ch;
  ch.pt_to_pr = random_matrix(3, 3, rng);
  ch.pt_to_sr = ch.pt_to_pr;
  ch.pt_to_ris = random_matrix(4, 3, rng);
  ch.ris_to_pr = ComplexMatrix::zeros(3, 4);
  ch.ris_to_sr = ComplexMatrix::zeros(3, 4);
  SolveSettings solver;
  RandomizationSettings rs;
  rs.num_candidates = 8;
  rs.rng_seed = 1;
  const auto [sol, rep] = run_low_complexity(ch, cfg, solver, rs);
  REQUIRE(sol.status == SolveStatus::Optimal);
  const BeamformerSolution wf = water_filling_no_ris(ch.pt_to_pr, cfg);
  CHECK(sol.power_w == doctest::Approx(wf.power_w).epsilon(1e-4));
}

TEST_CASE("planted rank-one-dominant instance: randomization lands within 5%") {
  // Aligned cascade: H3 rows identical, G columns equal up to per-element
  // phases. Every enhancement metric is monotone in |sum_k e^{i th_k} phi_k|^2, so
  // the SDR optimum is the planted rank-one point.
  Rng rng(303);
  const int k = 8, m = 3, n = 3;
  SystemConfig cfg;
  cfg.pt_antennas = m;
  cfg.pr_antennas = cfg.sr_antennas = n;
  cfg.ris_elements = k;
  cfg.noise_power_w = 1.0;
  cfg.rate_target = 2.0;
  cfg.snr_target = 1.0;

  ChannelSet ch;
  ch.pt_to_pr = random_matrix(n, m, rng);
  ch.pt_to_sr = random_matrix(n, m, rng);
  const ComplexMatrix h_row = random_matrix(1, m, rng);
  ComplexMatrix h3(k, m);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < m; ++j) h3(i, j) = h_row(0, j);
  ch.pt_to_ris = h3;
  const ComplexMatrix g1 = random_matrix(n, 1, rng);
  const ComplexMatrix g2 = random_matrix(n, 1, rng);
  std::vector<double> planted(k);
  for (double& a : planted) a = rng.uniform_angle();
  ComplexMatrix g1m(n, k), g2m(n, k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) {
      const Cx rot = std::polar(1.0, planted[j]);
      g1m(i, j) = g1(i, 0) * rot;
      g2m(i, j) = g2(i, 0) * rot;
    }
  ch.ris_to_pr = g1m;
  ch.ris_to_sr = g2m;

  const HermitianMatrix q0 = random_psd(m, rng, 0.2);
  SolveSettings solver;
  const SolveResult sdr_res = solve_reflect_sdr(ch, q0, cfg, solver);
  REQUIRE(sdr_res.status == SolveStatus::Optimal);

  RandomizationSettings rs;
  rs.num_candidates = 200;
  rs.rng_seed = 11;
  double best = 0.0;
  gaussian_randomize(sdr_res.x, backscatter_enhancement_metric(ch, q0, cfg), rs, &best);
  CHECK(best >= sdr_res.objective * 0.95 - 1e-9);
  CHECK(best <= sdr_res.objective + 1e-6 * (1.0 + std::abs(sdr_res.objective)));
}
