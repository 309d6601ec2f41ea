#include <algorithm>
#include <vector>

#include "doctest.h"
#include "latlab/pruning.hpp"
#include "latlab/rng.hpp"

using namespace latlab;

TEST_CASE("chunk cost is the fixed overhead at zero tokens") {
  CostModel m;
  CHECK(m.ChunkCost(0) == doctest::Approx(m.c0));
}

TEST_CASE("chunk cost variable part is linear") {
  CostModel m;
  const double one = m.ChunkCost(10000) - m.c0;
  const double two = m.ChunkCost(20000) - m.c0;
  CHECK(two == doctest::Approx(2.0 * one));
  CHECK(m.ChunkCost(10000) == doctest::Approx(m.c0 + m.c1 * 10000));
}

TEST_CASE("chunk cost rejects negative counts") {
  CostModel m;
  CHECK_THROWS_AS(m.ChunkCost(-1), std::invalid_argument);
}

TEST_CASE("slow chunk narrows the beam multiplicatively") {
  PruneController ctl(PruneConfig{12.0, 4.0, 0.7});
  CHECK(ctl.UpdateBeam(1.3, false) == doctest::Approx(8.4));
}

TEST_CASE("catching up resets the beam regardless of history") {
  PruneController ctl(PruneConfig{12.0, 4.0, 0.7});
  ctl.UpdateBeam(2.0, false);
  ctl.UpdateBeam(2.0, false);
  CHECK(ctl.beam() < 12.0);
  CHECK(ctl.UpdateBeam(0.5, true) == doctest::Approx(12.0));
}

TEST_CASE("repeated slow chunks clamp at the minimum beam") {
  PruneController ctl(PruneConfig{12.0, 4.0, 0.7});
  for (int i = 0; i < 50; ++i) ctl.UpdateBeam(3.0, false);
  CHECK(ctl.beam() == doctest::Approx(4.0));
}

TEST_CASE("fast chunk without catch-up leaves the beam unchanged") {
  PruneController ctl(PruneConfig{12.0, 4.0, 0.7});
  ctl.UpdateBeam(1.5, false);
  const double narrowed = ctl.beam();
  CHECK(ctl.UpdateBeam(0.8, false) == doctest::Approx(narrowed));
}

TEST_CASE("backlog update follows the max-plus recursion") {
  PruneController ctl(PruneConfig{});
  CHECK(ctl.UpdateBacklog(0.4, 0.2) == doctest::Approx(0.0));
  CHECK(ctl.UpdateBacklog(0.4, 0.9) == doctest::Approx(0.5));
}

TEST_CASE("backlog matches an independent recomputation on random sequences") {
  Rng rng(31);
  PruneController ctl(PruneConfig{});
  double oracle = 0.0;
  for (int i = 0; i < 5000; ++i) {
    const double audio = rng.Uniform(0.0, 0.5);
    const double cost = rng.Uniform(0.0, 0.8);
    oracle = std::max(0.0, oracle + cost - audio);
    CHECK(ctl.UpdateBacklog(audio, cost) == doctest::Approx(oracle));
  }
}

TEST_CASE("backlog and beam reject negative inputs") {
  PruneController ctl(PruneConfig{});
  CHECK_THROWS_AS(ctl.UpdateBeam(-0.1, false), std::invalid_argument);
  CHECK_THROWS_AS(ctl.UpdateBacklog(-0.1, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(ctl.UpdateBacklog(0.0, -0.1), std::invalid_argument);
}

TEST_CASE("beam never leaves its configured range under random traffic") {
  Rng rng(47);
  PruneConfig cfg{12.0, 4.0, 0.7};
  PruneController ctl(cfg);
  for (int i = 0; i < 10000; ++i) {
    const double rtf = rng.Uniform(0.0, 3.0);
    ctl.UpdateBacklog(0.4, rtf * 0.4);
    ctl.UpdateBeam(rtf, ctl.backlog() == 0.0);
    CHECK(ctl.beam() >= cfg.min_beam);
    CHECK(ctl.beam() <= cfg.nominal_beam);
    CHECK(ctl.backlog() >= 0.0);
  }
}
