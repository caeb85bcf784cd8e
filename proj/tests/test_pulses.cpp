#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rtip/pulses.hpp"

using namespace rtip;

namespace {
const PulseProfile& stable_pulse() {
  static const PulseProfile p = compute_pulse(PulseKind::stable, ModelParams{});
  return p;
}
const PulseProfile& unstable_pulse() {
  static const PulseProfile p =
      compute_pulse(PulseKind::unstable, ModelParams{});
  return p;
}
}  // namespace

TEST_CASE("stable pulse peak") {
  const auto& p = stable_pulse();
  CHECK(std::abs(p.u.maxCoeff() - 0.5588) < 2e-3);
  CHECK(std::abs(p.xi - p.u.maxCoeff()) < 1e-12);
  CHECK(p.eval_u(0.0) == doctest::Approx(p.xi).epsilon(1e-12));
}

TEST_CASE("unstable pulse peak") {
  const auto& p = unstable_pulse();
  CHECK(std::abs(p.u.maxCoeff() - 0.0657) < 2e-3);
  CHECK(std::abs(p.xi - p.u.maxCoeff()) < 1e-12);
}

TEST_CASE("profiles are positive, decaying and even") {
  for (const PulseProfile* pp : {&stable_pulse(), &unstable_pulse()}) {
    const auto& p = *pp;
    CHECK(p.u.minCoeff() >= 0.0);
    CHECK(p.u[0] < 1e-6);
    CHECK(p.u[p.u.size() - 1] < 1e-6);
    const int n = static_cast<int>(p.z.size());
    for (int i = 0; i < n; ++i) {
      const double zm = -p.z[i];
      CHECK(std::abs(p.u[i] - p.eval_u(zm)) < 1e-8);
    }
    // Mesh symmetric about 0 by construction.
    for (int i = 0; i < n; ++i)
      CHECK(p.z[i] == doctest::Approx(-p.z[n - 1 - i]).epsilon(1e-14));
  }
}

TEST_CASE("tail slope matches the linear decay rate") {
  const ModelParams mp;
  for (const PulseProfile* pp : {&stable_pulse(), &unstable_pulse()}) {
    const auto& p = *pp;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (double z = mp.Z - 40.0; z <= mp.Z - 10.0; z += 1.0) {
      const double u = p.eval_u(z);
      REQUIRE(u > 0.0);
      sx += z;
      sy += std::log(u);
      sxx += z * z;
      sxy += z * std::log(u);
      ++n;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    CHECK(std::abs(slope + mp.beta) < 0.05 * mp.beta);
  }
}

TEST_CASE("derivative vanishes at the peak and profile is C1 there") {
  for (const PulseProfile* pp : {&stable_pulse(), &unstable_pulse()}) {
    const auto& p = *pp;
    CHECK(std::abs(p.eval_v(0.0)) < 1e-8);
    const double d = 1e-5;
    const double fd = (p.eval_u(d) - p.eval_u(-d)) / (2.0 * d);
    CHECK(std::abs(fd - p.eval_v(0.0)) < 1e-6);
  }
}

TEST_CASE("static residual is small on the returned profile") {
  // u'' + f(u, H) evaluated by centered differences on the profile's own mesh.
  const ModelParams mp;
  for (const PulseProfile* pp : {&stable_pulse(), &unstable_pulse()}) {
    const auto& p = *pp;
    double worst = 0.0;
    for (int i = 1; i + 1 < p.z.size(); ++i) {
      const double hl = p.z[i] - p.z[i - 1], hr = p.z[i + 1] - p.z[i];
      if (hl > 0.3 || hr > 0.3) continue;  // skip the coarse far tail
      const double upp = 2.0 * (hl * p.u[i + 1] + hr * p.u[i - 1] -
                                (hl + hr) * p.u[i]) /
                         (hl * hr * (hl + hr));
      const double res = upp + reaction(p.u[i], habitat(p.z[i], mp.L), mp);
      worst = std::max(worst, std::abs(res));
    }
    // Second differences are only O(h) at mesh-grading junctions; the strict
    // bound lives with the dedicated differentiation matrices.
    CHECK(worst < 5e-3);
  }
}

TEST_CASE("truncation at Z = 150 is converged") {
  ModelParams wide;
  wide.Z = 300.0;
  const auto far = compute_pulse(PulseKind::stable, wide);
  CHECK(std::abs(far.xi - stable_pulse().xi) < 1e-8);
}

TEST_CASE("pulses are strictly ordered") {
  const auto rec = pointwise_order(stable_pulse(), unstable_pulse());
  CHECK(rec.verdict);
  CHECK(rec.min_gap > 0.0);
  CHECK(stable_pulse().eval_u(0.0) - unstable_pulse().eval_u(0.0) > 0.4);

  const auto trivial =
      trivial_profile(unstable_pulse().z, ModelParams{});
  const auto above_zero = pointwise_order(unstable_pulse(), trivial);
  CHECK(above_zero.verdict);
  CHECK(above_zero.interior_min_gap > 0.0);

  const auto swapped = pointwise_order(unstable_pulse(), stable_pulse());
  CHECK_FALSE(swapped.verdict);
}

TEST_CASE("small-amplitude start collapses onto the trivial branch") {
  // Forcing the solver to start essentially at zero must be reported as a
  // wrong branch, not returned as a pulse.
  ModelParams mp;
  mp.lambda_r = 0.3;  // below the saddle-node: only the trivial state exists
  CHECK_THROWS_AS(compute_pulse(PulseKind::stable, mp), WrongBranch);
}

TEST_CASE("trivial kind is not a BVP") {
  CHECK_THROWS_AS(compute_pulse(PulseKind::trivial, ModelParams{}),
                  InvalidParameter);
}
