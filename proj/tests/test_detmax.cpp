#include "doctest.h"
#include "srbeam/channel.hpp"
#include "srbeam/detmax.hpp"

using namespace srbeam;

namespace {

ComplexMatrix random_matrix(int r, int c, Rng& rng) {
  ComplexMatrix m(r, c);
  for (auto& v : m.data()) v = rng.cnormal();
  return m;
}

HermitianMatrix random_psd(int n, Rng& rng, double ridge = 0.0) {
  const ComplexMatrix a = random_matrix(n, n, rng);
  return HermitianMatrix(adjoint(a) * a + ridge * ComplexMatrix::identity(n));
}

struct Scene {
  SystemConfig cfg;
  ChannelSet ch;
  PhaseVector phi;
};

// Unit-noise random scene, channel entries O(1).
Scene random_scene(Rng& rng, int m, int n1, int n2, int k, double rate, double snr) {
  Scene s;
  s.cfg.pt_antennas = m;
  s.cfg.pr_antennas = n1;
  s.cfg.sr_antennas = n2;
  s.cfg.ris_elements = k;
  s.cfg.noise_power_w = 1.0;
  s.cfg.rate_target = rate;
  s.cfg.snr_target = snr;
  s.cfg.symbol_ratio = 50;
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

// ---------------------------------------------------------------------------
// Independent reference for the power minimization: bisection on total power, feasibility at a
// fixed trace checked by projected supergradient ascent of the worst
// normalized constraint margin over {Q >= 0, tr Q = t}. First-order and
// projection-based, sharing nothing with the barrier solver.

struct RefConstraints {
  std::vector<ComplexMatrix> rate_factors_pr;  // (H1 +- F1)/sigma
  std::vector<ComplexMatrix> rate_factors_sr;
  ComplexMatrix snr_coeff;  // (L/sigma^2) F2^H F2
  double rate_target, snr_target;
};

RefConstraints make_ref(const Scene& s) {
  RefConstraints rc;
  const EffectiveChannels eff =
      effective_channels(s.ch, s.phi, s.cfg.reflect_efficiency);
  const double inv_sig = 1.0 / std::sqrt(s.cfg.noise_power_w);
  rc.rate_factors_pr = {inv_sig * (s.ch.pt_to_pr + eff.to_pr),
                        inv_sig * (s.ch.pt_to_pr - eff.to_pr)};
  rc.rate_factors_sr = {inv_sig * (s.ch.pt_to_sr + eff.to_sr),
                        inv_sig * (s.ch.pt_to_sr - eff.to_sr)};
  rc.snr_coeff = (s.cfg.symbol_ratio / s.cfg.noise_power_w) *
                 (adjoint(eff.to_sr) * eff.to_sr);
  rc.rate_target = s.cfg.rate_target;
  rc.snr_target = s.cfg.snr_target;
  return rc;
}

double ref_rate(const std::vector<ComplexMatrix>& factors, const ComplexMatrix& q) {
  double r = 0.0;
  for (const ComplexMatrix& l : factors) {
    const ComplexMatrix arg =
        ComplexMatrix::identity(l.rows()) + l * q * adjoint(l);
    r += 0.5 * logdet_pd(arg).value() / std::log(2.0);
  }
  return r;
}

ComplexMatrix ref_rate_grad(const std::vector<ComplexMatrix>& factors,
                            const ComplexMatrix& q) {
  ComplexMatrix g(q.rows(), q.cols());
  for (const ComplexMatrix& l : factors) {
    const ComplexMatrix arg =
        ComplexMatrix::identity(l.rows()) + l * q * adjoint(l);
    const ComplexMatrix inv = solve_pd(arg, ComplexMatrix::identity(l.rows()));
    g = g + (0.5 / std::log(2.0)) * (adjoint(l) * inv * l);
  }
  return g;
}

// Project eigenvalues onto {lam >= 0, sum lam = t}.
ComplexMatrix project_trace_simplex(const ComplexMatrix& q, double t) {
  const EigResult e = hermitian_eig(HermitianMatrix(0.5 * (q + adjoint(q))));
  std::vector<double> lam = e.eigenvalues;
  double lo = -1e9, hi = 1e9;
  for (int it = 0; it < 200; ++it) {
    const double theta = 0.5 * (lo + hi);
    double sum = 0.0;
    for (double l : lam) sum += std::max(0.0, l - theta);
    (sum > t ? lo : hi) = theta;
  }
  const double theta = 0.5 * (lo + hi);
  const int n = q.rows();
  ComplexMatrix out(n, n);
  for (int k = 0; k < n; ++k) {
    const double lk = std::max(0.0, lam[k] - theta);
    if (lk == 0.0) continue;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        out(i, j) += lk * e.eigenvectors(i, k) * std::conj(e.eigenvectors(j, k));
  }
  return out;
}

double ref_worst_margin(const RefConstraints& rc, const ComplexMatrix& q,
                        int* which = nullptr) {
  double worst = 1e300;
  int idx = -1;
  const double r1 = (ref_rate(rc.rate_factors_pr, q) - rc.rate_target) /
                    std::max(1.0, rc.rate_target);
  if (r1 < worst) worst = r1, idx = 0;
  const double r2 = (ref_rate(rc.rate_factors_sr, q) - rc.rate_target) /
                    std::max(1.0, rc.rate_target);
  if (r2 < worst) worst = r2, idx = 1;
  if (rc.snr_target > 0.0) {
    Cx tr = 0.0;
    for (int i = 0; i < q.rows(); ++i)
      for (int j = 0; j < q.cols(); ++j) tr += rc.snr_coeff(i, j) * q(j, i);
    const double r3 = (tr.real() - rc.snr_target) / std::max(1.0, rc.snr_target);
    if (r3 < worst) worst = r3, idx = 2;
  }
  if (which) *which = idx;
  return worst;
}

bool ref_feasible_at_trace(const RefConstraints& rc, int m, double t, int steps) {
  ComplexMatrix q = (t / m) * ComplexMatrix::identity(m);
  double best = -1e300;
  for (int s = 0; s < steps; ++s) {
    int idx = -1;
    const double val = ref_worst_margin(rc, q, &idx);
    best = std::max(best, val);
    if (best > 1e-6) return true;
    ComplexMatrix g;
    if (idx == 0)
      g = (1.0 / std::max(1.0, rc.rate_target)) * ref_rate_grad(rc.rate_factors_pr, q);
    else if (idx == 1)
      g = (1.0 / std::max(1.0, rc.rate_target)) * ref_rate_grad(rc.rate_factors_sr, q);
    else
      g = (1.0 / std::max(1.0, rc.snr_target)) * rc.snr_coeff;
    const double gn = g.frobenius();
    if (gn < 1e-14) break;
    const double alpha = 0.5 * t / (gn * std::sqrt(s + 1.0));
    q = project_trace_simplex(q + alpha * g, t);
  }
  return best > 1e-6;
}

double ref_min_power(const RefConstraints& rc, int m, int steps = 2500) {
  double hi = 1e-6;
  while (!ref_feasible_at_trace(rc, m, hi, steps)) {
    hi *= 2.0;
    REQUIRE(hi < 1e12);
  }
  double lo = hi / 2.0;
  if (hi <= 2e-6) lo = 0.0;
  for (int it = 0; it < 30; ++it) {
    const double mid = 0.5 * (lo + hi);
    (ref_feasible_at_trace(rc, m, mid, steps) ? hi : lo) = mid;
    if (hi - lo < 1e-4 * hi) break;
  }
  return hi;
}

}  // namespace

TEST_CASE("barrier: min trace with logdet floor forces identity") {
  DetmaxProblem p;
  p.dim = 2;
  p.objective = ComplexMatrix::identity(2);
  p.psd = true;
  LogDetConstraint c;
  AffineImage img;
  img.base = ComplexMatrix::zeros(2, 2);
  img.factors.push_back(ComplexMatrix::identity(2));
  c.images.push_back(img);
  c.rhs_ln = 0.0;  // log2 det X >= 0
  p.logdet_constraints.push_back(c);

  SolveSettings st;
  st.tol = 1e-9;
  const SolveResult r = barrier_solve(p, st);
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(r.objective == doctest::Approx(2.0).epsilon(1e-6));
  CHECK((r.x.matrix() - ComplexMatrix::identity(2)).max_abs() < 1e-4);
}

TEST_CASE("barrier: rank-one linear constraint aligns the solution") {
  Rng rng(8);
  ComplexMatrix a = random_matrix(3, 1, rng);
  const double a2 = std::norm(a(0, 0)) + std::norm(a(1, 0)) + std::norm(a(2, 0));
  DetmaxProblem p;
  p.dim = 3;
  p.objective = ComplexMatrix::identity(3);
  p.psd = true;
  LinearConstraint c;
  c.coeff = a * adjoint(a);
  c.rhs = 1.0;
  p.linear_constraints.push_back(c);

  SolveSettings st;
  st.tol = 1e-9;
  const SolveResult r = barrier_solve(p, st);
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(r.objective == doctest::Approx(1.0 / a2).epsilon(1e-5));
  const ComplexMatrix expect = (1.0 / (a2 * a2)) * (a * adjoint(a));
  CHECK((r.x.matrix() - expect).max_abs() < 1e-4 * (1.0 / a2));
}

TEST_CASE("barrier: monotone objective along the central path") {
  Rng rng(12);
  const Scene s = random_scene(rng, 3, 3, 3, 4, 3.0, 2.0);
  SolveSettings st;
  std::vector<double> objs;
  st.stage_observer = [&](double, double o) { objs.push_back(o); };
  const SolveResult r = solve_min_power(s.ch, s.phi, s.cfg, st);
  REQUIRE(r.status == SolveStatus::Optimal);
  REQUIRE(objs.size() > 3);
  for (size_t i = 1; i < objs.size(); ++i)
    CHECK(objs[i] <= objs[i - 1] + 1e-9 * (1.0 + std::abs(objs[i - 1])));
}

TEST_CASE("barrier: argmin invariant under doubling the objective") {
  Rng rng(13);
  const Scene s = random_scene(rng, 2, 2, 2, 3, 2.0, 1.0);
  SolveSettings st;
  st.tol = 1e-9;
  DetmaxProblem p = build_min_power_problem(s.ch, s.phi, s.cfg);
  const SolveResult r1 = barrier_solve(p, st);
  p.objective = 2.0 * ComplexMatrix::identity(2);
  const SolveResult r2 = barrier_solve(p, st);
  REQUIRE(r1.status == SolveStatus::Optimal);
  REQUIRE(r2.status == SolveStatus::Optimal);
  CHECK((r1.x.matrix() - r2.x.matrix()).max_abs() < 1e-6 * (1.0 + r1.x.matrix().max_abs()));
}

TEST_CASE("barrier: kkt residual small on random problems") {
  Rng rng(14);
  for (int trial = 0; trial < 5; ++trial) {
    const Scene s = random_scene(rng, 2 + trial % 2, 2, 2, 3, 2.5, 1.5);
    SolveSettings st;
    const SolveResult r = solve_min_power(s.ch, s.phi, s.cfg, st);
    REQUIRE(r.status == SolveStatus::Optimal);
    CHECK(r.kkt_residual <= 1e-5);
    CHECK(r.duality_gap <= st.tol);
  }
}

TEST_CASE("solve_min_power: scalar closed form 2^Rs - 1") {
  SystemConfig cfg;
  cfg.pt_antennas = cfg.pr_antennas = cfg.sr_antennas = 1;
  cfg.ris_elements = 1;
  cfg.noise_power_w = 1.0;
  cfg.rate_target = 3.0;
  cfg.snr_target = 0.0;
  ChannelSet ch;
  ch.pt_to_pr = ComplexMatrix::identity(1);
  ch.pt_to_sr = ComplexMatrix::identity(1);
  ch.pt_to_ris = ComplexMatrix::zeros(1, 1);
  ch.ris_to_pr = ComplexMatrix::zeros(1, 1);
  ch.ris_to_sr = ComplexMatrix::zeros(1, 1);
  SolveSettings st;
  st.tol = 1e-9;
  const SolveResult r = solve_min_power(ch, PhaseVector::ones(1), cfg, st);
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(r.objective == doctest::Approx(7.0).epsilon(1e-6));
}

TEST_CASE("solve_min_power: infeasible when the cascade is dead but snr required") {
  Rng rng(15);
  Scene s = random_scene(rng, 2, 2, 2, 3, 1.0, 1.0);
  s.ch.ris_to_sr = ComplexMatrix::zeros(2, 3);  // F2 = 0, gamma > 0
  SolveSettings st;
  const SolveResult r = solve_min_power(s.ch, s.phi, s.cfg, st);
  CHECK(r.status == SolveStatus::Infeasible);
}

TEST_CASE("solve_min_power: active constraint at the optimum") {
  Rng rng(16);
  const Scene s = random_scene(rng, 3, 3, 3, 4, 3.0, 2.0);
  SolveSettings st;
  const SolveResult r = solve_min_power(s.ch, s.phi, s.cfg, st);
  REQUIRE(r.status == SolveStatus::Optimal);
  const EffectiveChannels eff = effective_channels(s.ch, s.phi, 1.0);
  const double rp = primary_rate(r.x, eff, s.ch, 1.0);
  const double rb = secondary_rate(r.x, eff, s.ch, 1.0);
  const double sn = backscatter_snr(r.x, eff, 1.0, s.cfg.symbol_ratio);
  CHECK(rp >= s.cfg.rate_target - 1e-6);
  CHECK(rb >= s.cfg.rate_target - 1e-6);
  CHECK(sn >= s.cfg.snr_target * (1.0 - 1e-6));
  const double slack_min =
      std::min({(rp - s.cfg.rate_target) / std::max(1.0, s.cfg.rate_target),
                (rb - s.cfg.rate_target) / std::max(1.0, s.cfg.rate_target),
                (sn - s.cfg.snr_target) / std::max(1.0, s.cfg.snr_target)});
  CHECK(slack_min <= 1e-4);  // at least one constraint active
}

TEST_CASE("solve_min_power matches an independent first-order reference") {
  Rng rng(18);
  for (int trial = 0; trial < 2; ++trial) {
    const Scene s = random_scene(rng, 2, 2, 2, 4, 2.0, 1.0);
    SolveSettings st;
    st.tol = 1e-9;
    const SolveResult r = solve_min_power(s.ch, s.phi, s.cfg, st);
    REQUIRE(r.status == SolveStatus::Optimal);
    const double ref = ref_min_power(make_ref(s), 2);
    CHECK(r.objective == doctest::Approx(ref).epsilon(2e-3));
    CHECK(r.objective <= ref + 1e-6);  // reference upper-bounds the optimum
  }
}

TEST_CASE("hadamard identity links the two sdr constraint forms") {
  Rng rng(19);
  const Scene s = random_scene(rng, 3, 3, 3, 4, 2.0, 1.0);
  const HermitianMatrix q = random_psd(3, rng, 0.1);
  const EffectiveChannels eff = effective_channels(s.ch, s.phi, 1.0);
  const ComplexMatrix m_mat =
      s.ch.pt_to_ris * q.matrix() * adjoint(s.ch.pt_to_ris);
  ComplexMatrix phi_outer(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) phi_outer(i, j) = s.phi[i] * std::conj(s.phi[j]);

  // log-det form
  const ComplexMatrix inner = hadamard(m_mat, phi_outer);
  const ComplexMatrix lhs = ComplexMatrix::identity(3) +
                            s.ch.ris_to_pr * inner * adjoint(s.ch.ris_to_pr);
  const ComplexMatrix f1 = eff.to_pr;
  const ComplexMatrix rhs =
      ComplexMatrix::identity(3) + f1 * q.matrix() * adjoint(f1);
  CHECK((lhs - rhs).max_abs() < 1e-10 * (1.0 + rhs.max_abs()));

  // trace form
  const double t1 = trace(s.ch.ris_to_sr * hadamard(m_mat, phi_outer) *
                          adjoint(s.ch.ris_to_sr))
                        .real();
  const double t2 = trace(eff.to_sr * q.matrix() * adjoint(eff.to_sr)).real();
  CHECK(t1 == doctest::Approx(t2).epsilon(1e-10));
}

TEST_CASE("appendix-style concavity of the hadamard logdet constraint") {
  Rng rng(20);
  int tested = 0;
  while (tested < 25) {
    const ComplexMatrix b = random_matrix(4, 3, rng);
    const HermitianMatrix a = random_psd(4, rng, 0.1);
    const HermitianMatrix z = random_psd(4, rng, 0.5);
    const ComplexMatrix vraw = random_matrix(4, 4, rng);
    const ComplexMatrix v = 0.5 * (vraw + adjoint(vraw));
    auto g = [&](double t) -> std::optional<double> {
      const ComplexMatrix x = z.matrix() + t * v;
      const ComplexMatrix arg = ComplexMatrix::identity(3) +
                                adjoint(b) * hadamard(a.matrix(), x) * b;
      return logdet_pd(arg);
    };
    const double t1 = -0.3 + 0.6 * rng.uniform();
    const double t2 = -0.3 + 0.6 * rng.uniform();
    const auto g1 = g(t1), g2 = g(t2), gm = g(0.5 * (t1 + t2));
    if (!g1 || !g2 || !gm) continue;  // outside the PD domain
    ++tested;
    CHECK(*gm >= 0.5 * (*g1 + *g2) - 1e-9);
  }
}

TEST_CASE("solve_reflect_sdr: K = 1 pins the matrix, closed-form slack") {
  Rng rng(22);
  const Scene s = random_scene(rng, 2, 2, 2, 1, 2.0, 1.0);
  const HermitianMatrix q0 = random_psd(2, rng, 0.2);
  SolveSettings st;
  const SolveResult r = solve_reflect_sdr(s.ch, q0, s.cfg, st);
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(r.x.dim() == 1);
  CHECK(r.x(0, 0).real() == doctest::Approx(1.0).epsilon(1e-8));

  const EffectiveChannels eff = effective_channels(s.ch, PhaseVector::ones(1), 1.0);
  const double m1 =
      logdet_pd(ComplexMatrix::identity(2) +
                eff.to_pr * q0.matrix() * adjoint(eff.to_pr))
          .value() /
      std::log(2.0);
  const double m2 =
      logdet_pd(ComplexMatrix::identity(2) +
                eff.to_sr * q0.matrix() * adjoint(eff.to_sr))
          .value() /
      std::log(2.0);
  const double m3 = backscatter_snr(q0, eff, 1.0, s.cfg.symbol_ratio);
  CHECK(r.objective == doctest::Approx(std::min({m1, m2, m3})).epsilon(1e-6));
}

TEST_CASE("solve_reflect_sdr: unit diagonal, psd, and relaxation bound") {
  Rng rng(23);
  const Scene s = random_scene(rng, 3, 3, 3, 5, 2.0, 1.0);
  const HermitianMatrix q0 = random_psd(3, rng, 0.2);
  SolveSettings st;
  const SolveResult r = solve_reflect_sdr(s.ch, q0, s.cfg, st);
  REQUIRE(r.status == SolveStatus::Optimal);
  for (int i = 0; i < 5; ++i)
    CHECK(r.x(i, i).real() == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(is_psd(r.x));

  // Any rank-one unit-modulus candidate is dominated by the relaxation.
  auto objective_at = [&](const PhaseVector& phi) {
    const EffectiveChannels eff = effective_channels(s.ch, phi, 1.0);
    const double m1 = logdet_pd(ComplexMatrix::identity(3) +
                                eff.to_pr * q0.matrix() * adjoint(eff.to_pr))
                          .value() /
                      std::log(2.0);
    const double m2 = logdet_pd(ComplexMatrix::identity(3) +
                                eff.to_sr * q0.matrix() * adjoint(eff.to_sr))
                          .value() /
                      std::log(2.0);
    const double m3 = backscatter_snr(q0, eff, 1.0, s.cfg.symbol_ratio);
    return std::min({m1, m2, m3});
  };
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> ang(5);
    for (double& a : ang) a = rng.uniform_angle();
    CHECK(objective_at(PhaseVector::from_angles(ang)) <= r.objective + 1e-6);
  }
}
