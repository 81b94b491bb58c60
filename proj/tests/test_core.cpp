#include "doctest.h"
#include "srbeam/core.hpp"

using namespace srbeam;

TEST_CASE("matrix arithmetic basics") {
  ComplexMatrix a(2, 3);
  a(0, 0) = {1, 1};
  a(1, 2) = {0, -2};
  const ComplexMatrix at = adjoint(a);
  CHECK(at.rows() == 3);
  CHECK(at(0, 0) == Cx(1, -1));
  CHECK(at(2, 1) == Cx(0, 2));

  const ComplexMatrix i2 = ComplexMatrix::identity(2);
  const ComplexMatrix p = i2 * a;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) CHECK(p(i, j) == a(i, j));
  CHECK(trace(i2).real() == doctest::Approx(2.0));
}

TEST_CASE("system config invariants") {
  SystemConfig cfg;
  cfg.validate();
  CHECK(cfg.streams() == 3);
  cfg.sr_antennas = 2;
  CHECK(cfg.streams() == 2);          // S = min(M, N1, N2)
  CHECK(cfg.sr_antennas >= cfg.streams());  // N2 >= S by construction

  SystemConfig bad = cfg;
  bad.reflect_efficiency = 0.0;
  CHECK_THROWS_AS(bad.validate(), DimensionError);
  bad = cfg;
  bad.noise_power_w = -1.0;
  CHECK_THROWS_AS(bad.validate(), DimensionError);
  bad = cfg;
  bad.ris_elements = 0;  // a zero-element surface is not a configuration
  CHECK_THROWS_AS(bad.validate(), DimensionError);
}

TEST_CASE("phase vector enforces unit modulus") {
  CHECK_THROWS_AS(PhaseVector({Cx(0.5, 0.0)}), DimensionError);
  PhaseVector p = PhaseVector::ones(4);
  p.set(1, Cx(3.0, 4.0));
  CHECK(std::abs(p[1]) == doctest::Approx(1.0).epsilon(1e-14));
  p.set(2, Cx(0.0, 0.0));  // arg(0) := 0 convention
  CHECK(p[2] == Cx(1.0, 0.0));
}

TEST_CASE("rng determinism and moments") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng r(7);
  double mean = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) mean += r.normal();
  mean /= n;
  CHECK(std::abs(mean) < 0.01);  // law of large numbers

  Rng u(9);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }

  // Forked streams depend on the seed and tag only, not on parent draws.
  Rng p1(5), p2(5);
  p2.next_u64();
  Rng c1 = p1.fork(3), c2 = p2.fork(3);
  CHECK(c1.next_u64() == c2.next_u64());
}

TEST_CASE("complex normal has unit variance") {
  Rng r(11);
  double var = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) var += std::norm(r.cnormal());
  var /= n;
  CHECK(var == doctest::Approx(1.0).epsilon(0.01));
}
