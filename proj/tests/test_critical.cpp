#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rtip/critical.hpp"

using namespace rtip;

namespace {

// Shared across the suite: construction refines the edge eigenpair and the
// refinement below is the expensive tight-tolerance root find.
const CriticalSolver& solver() {
  static const CriticalSolver s{ModelParams{}};
  return s;
}

const HeteroclinicSolution& het() {
  static const HeteroclinicSolution h =
      solver().refine_heteroclinic(ModelParams{}, 0.9934);
  return h;
}

const CriticalRateResult& bisected() {
  static const CriticalRateResult b =
      solver().bisect_rc(ModelParams{}, 0.99, 1.00, 1e-3);
  return b;
}

ModelParams with_r(double r) {
  ModelParams p;
  p.r = r;
  return p;
}

}  // namespace

TEST_CASE("edge eigenvalue matches the reference spectrum") {
  CHECK(solver().edge_eigenvalue() == doctest::Approx(0.026).epsilon(0.1));
  CHECK(solver().edge_eigenvalue() > 0.02);
}

TEST_CASE("miss function changes sign across the critical rate") {
  // Coarse (pipeline-tolerance) evaluations; the root sits near 0.9934 at
  // this tolerance, so +-0.01 offsets are far outside the jitter band.
  const double above = solver().miss(with_r(0.9834));
  const double below = solver().miss(with_r(1.0034));
  CHECK(above > 0.0);
  CHECK(below < 0.0);
  // Away from the root the normalized split saturates.
  CHECK(std::abs(above) > 0.1);
  CHECK(std::abs(below) > 0.1);
}

TEST_CASE("miss rejects mismatched field parameters") {
  ModelParams q;
  q.beta = 0.2;
  CHECK_THROWS_AS(solver().miss(q), InvalidParameter);
}

TEST_CASE("refinement lands on the tight-tolerance connection") {
  const HeteroclinicSolution& h = het();
  CHECK(h.r_c == doctest::Approx(0.9942574).epsilon(2e-4));
  CHECK(std::abs(h.miss) < 1e-8);
  CHECK(h.miss_slope < 0.0);
  CHECK(h.t_match == CriticalSolver::kMissTime);
}

TEST_CASE("connection satisfies its endpoint and origin invariants") {
  const HeteroclinicSolution& h = het();
  CHECK(h.residual_minus < 1e-4);
  CHECK(h.residual_plus < 1e-3);
  CHECK(h.gamma0_residual < 1e-8);
  CHECK(h.T >= 50.0 / h.r_c);
  CHECK(h.trajectory.t_end() >= h.T);
  CHECK(h.trajectory.t_begin() < 0.0);
  CHECK_NOTHROW(h.validate());
}

TEST_CASE("refinement agrees with bisection") {
  CHECK(std::abs(het().r_c - bisected().r_c) < 1e-3);
}

TEST_CASE("bisection keeps its bracket invariant") {
  const CriticalRateResult& b = bisected();
  CHECK(b.method == CriticalRateResult::Method::bisection);
  CHECK(b.r_hi - b.r_lo <= 1e-3);
  CHECK(b.r_lo < b.r_c);
  CHECK(b.r_c < b.r_hi);
  CHECK(b.r_c == doctest::Approx(0.9934).epsilon(2e-3));
  REQUIRE(b.history.size() >= 2);
  CHECK(b.history[0].first == 0.99);
  CHECK(b.history[0].second == Classification::tracking);
  CHECK(b.history[1].first == 1.00);
  CHECK(b.history[1].second == Classification::extinct);
  // Every tracking rate must sit below every extinction rate.
  double max_track = 0.0, min_ext = 1e30;
  for (const auto& [r, c] : b.history) {
    if (c == Classification::tracking) max_track = std::max(max_track, r);
    if (c == Classification::extinct) min_ext = std::min(min_ext, r);
  }
  CHECK(max_track < min_ext);
}

TEST_CASE("bisection rejects a non-bracketing interval") {
  CHECK_THROWS_AS(solver().bisect_rc(ModelParams{}, 0.2, 0.4, 1e-2),
                  BracketError);
}

TEST_CASE("bisection rejects malformed arguments") {
  CHECK_THROWS_AS(solver().bisect_rc(ModelParams{}, 1.0, 0.9, 1e-3),
                  InvalidParameter);
  CHECK_THROWS_AS(solver().bisect_rc(ModelParams{}, 0.9, 1.0, 0.0),
                  InvalidParameter);
  CHECK_THROWS_AS(solver().bisect_rc(ModelParams{}, -1.0, 1.0, 1e-3),
                  InvalidParameter);
}

TEST_CASE("transversality certificate is negative and matches the slope") {
  const double tv = solver().transversality(het(), ModelParams{});
  CHECK(tv < 0.0);
  CHECK(tv * het().miss_slope > 0.0);
  // Default window is the matching epoch; value pinned by measurement.
  CHECK(tv == doctest::Approx(-9.33e-3).epsilon(0.3));
}

TEST_CASE("transversality is linear in the parameter perturbation") {
  const double tv0 = solver().transversality(het(), ModelParams{}, 0.0, 0.0);
  CHECK(tv0 == 0.0);
  const double tv1 = solver().transversality(het(), ModelParams{});
  const double tv2 = solver().transversality(het(), ModelParams{}, 0.0, 2.0);
  CHECK(tv2 == doctest::Approx(tv1).epsilon(1e-4));
}

TEST_CASE("transversality rejects a window outside the trajectory") {
  CHECK_THROWS_AS(solver().transversality(het(), ModelParams{}, 1e9),
                  InvalidParameter);
  CHECK_THROWS_AS(solver().transversality(het(), ModelParams{}, -1e9),
                  InvalidParameter);
}

TEST_CASE("free refinement guards the warm-start run") {
  PullbackRun run;
  run.params = with_r(0.95);
  CHECK_THROWS_AS(refine_heteroclinic(ModelParams{}, 0.9934, &run),
                  InvalidParameter);
}

TEST_CASE("sweep rejects malformed grids") {
  CHECK_THROWS_AS(solver().sweep_diagram({}, 50.0, 1e-3), InvalidParameter);
  CHECK_THROWS_AS(solver().sweep_diagram({32.0, 32.0}, 50.0, 1e-3),
                  InvalidParameter);
  CHECK_THROWS_AS(solver().sweep_diagram({32.0}, 1e-3, 1e-3),
                  InvalidParameter);
  CHECK_THROWS_AS(solver().sweep_diagram({32.0}, 50.0, -1.0),
                  InvalidParameter);
}

TEST_CASE("single-displacement sweep brackets the critical rate") {
  // d = 31.3 reproduces the default habitat; the probe walk short-circuits
  // at the first extinction, so only the low part of the grid is visited.
  const TippingDiagram diag =
      solver().sweep_diagram({31.3}, 50.0, 5e-3, 1);
  CHECK(diag.r_max == 50.0);
  CHECK(diag.tol_r == 5e-3);
  REQUIRE(diag.entries.size() == 1);
  const DiagramEntry& e = diag.entries[0];
  CHECK(e.d == 31.3);
  CHECK(e.error.empty());
  REQUIRE(e.tipping);
  CHECK(e.result.d == 31.3);
  CHECK(e.result.r_hi - e.result.r_lo <= 5e-3);
  CHECK(e.result.r_c == doctest::Approx(0.9934).epsilon(6e-3));
  CHECK(e.result.history.size() >= 8);
  double max_track = 0.0, min_ext = 1e30;
  for (const auto& [r, c] : e.result.history) {
    if (c == Classification::tracking) max_track = std::max(max_track, r);
    if (c == Classification::extinct) min_ext = std::min(min_ext, r);
  }
  CHECK(max_track < min_ext);
}
