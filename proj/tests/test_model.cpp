#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "rtip/model.hpp"

using namespace rtip;

namespace {
ModelParams default_params() { return ModelParams{}; }
}

TEST_CASE("habitat peak, midpoints, symmetry") {
  CHECK(habitat(0.0, 25.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(habitat(12.5, 25.0) - 0.5) < 1e-6);
  CHECK(std::abs(habitat(-12.5, 25.0) - 0.5) < 1e-6);
  for (double x : {0.3, 1.7, 5.0, 12.5, 20.0, 44.0, 120.0})
    CHECK(habitat(x, 25.0) ==
          doctest::Approx(habitat(-x, 25.0)).epsilon(1e-14));
  // Peak approaches 1 for wide patches.
  CHECK(std::abs(habitat(0.0, 60.0) - 1.0) < 1e-12);
}

TEST_CASE("habitat decreases away from the center") {
  double prev = habitat(0.0, 25.0);
  for (double x = 0.5; x <= 40.0; x += 0.5) {
    const double h = habitat(x, 25.0);
    CHECK(h < prev + 1e-15);
    CHECK(h > 0.0);
    prev = h;
  }
}

TEST_CASE("habitat tail decays like exp(-2|x|)") {
  // Least-squares slope of log H over [L/2 + 5, L/2 + 15].
  std::vector<double> xs, ys;
  for (double x = 17.5; x <= 27.5; x += 0.5) {
    xs.push_back(x);
    ys.push_back(std::log(habitat(x, 25.0)));
  }
  const int n = static_cast<int>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(std::abs(slope + 2.0) < 1e-4);
}

TEST_CASE("reaction pinned values") {
  const ModelParams p = default_params();
  CHECK(std::abs(reaction(0.5, 1.0, p) - 0.01375) < 1e-12);
  CHECK(std::abs(reaction_du(0.5, 1.0, p) + 0.1725) < 1e-12);
  for (double h : {0.0, 0.25, 0.5, 1.0})
    CHECK(reaction_du(0.0, h, p) == -p.beta * p.beta);
  CHECK(reaction(0.0, 0.7, p) == 0.0);
}

TEST_CASE("reaction has the strong Allee sign for small u") {
  const ModelParams p = default_params();
  const double u_small = p.beta * p.beta / (2.0 * p.lambda_r);
  for (int i = 1; i <= 40; ++i) {
    const double u = u_small * i / 40.0;
    for (double h : {0.0, 0.3, 0.6, 1.0}) CHECK(reaction(u, h, p) < 0.0);
  }
}

TEST_CASE("reaction_du matches finite differences") {
  const ModelParams p = default_params();
  for (double u : {0.0, 0.05, 0.3, 0.5588, 1.2}) {
    for (double h : {0.0, 0.5, 1.0}) {
      const double d = 1e-6 * (1.0 + std::abs(u));
      const double fd =
          (reaction(u + d, h, p) - reaction(u - d, h, p)) / (2.0 * d);
      CHECK(std::abs(fd - reaction_du(u, h, p)) < 1e-6);
    }
  }
}

TEST_CASE("shift velocity vanishes exactly at the rest points") {
  const double a = 15.65;
  CHECK(shift_velocity(a, a) == 0.0);
  CHECK(shift_velocity(-a, a) == 0.0);
  CHECK(shift_velocity(0.0, a) == a);
  for (double g = -a + 0.01; g < a; g += 0.5)
    CHECK(shift_velocity(g, a) > 0.0);
  CHECK_THROWS_AS(shift_velocity(a * 1.0001, a), DomainError);
  CHECK_THROWS_AS(shift_velocity(-a - 1.0, a), DomainError);
}

TEST_CASE("shift velocity derivative at gamma = -a is +2") {
  const double a = 15.65;
  const double h = 1e-7;
  const double fd = (shift_velocity(-a + h, a) - shift_velocity(-a, a)) / h;
  CHECK(std::abs(fd - 2.0) < 1e-5);
}

TEST_CASE("ramp solves the shift ODE") {
  const double a = 15.65, r = 0.8;
  CHECK(ramp(0.0, r, a) == 0.0);
  double prev = ramp(-30.0, r, a);
  for (double t : {-5.0, -1.0, -0.3, 0.4, 2.0, 7.0}) {
    const double g = ramp(t, r, a);
    CHECK(std::abs(g) < a);
    CHECK(g > prev);
    prev = g;
    const double d = 1e-6;
    const double fd = (ramp(t + d, r, a) - ramp(t - d, r, a)) / (2.0 * d);
    CHECK(std::abs(fd - r * shift_velocity(g, a)) < 1e-6);
  }
}

TEST_CASE("parameter validation") {
  ModelParams p = default_params();
  CHECK_NOTHROW(p.validate());
  p.beta = -0.1;
  CHECK_THROWS_AS(p.validate(), InvalidParameter);
  p = default_params();
  p.L = 0.0;
  CHECK_THROWS_AS(p.validate(), InvalidParameter);
  p = default_params();
  p.r = 0.0;
  CHECK_THROWS_AS(p.validate(), InvalidParameter);
  p = default_params();
  p.tol_bvp = -1e-8;
  CHECK_THROWS_AS(p.validate(), InvalidParameter);
  CHECK_THROWS_AS(habitat(1.0, -2.0), InvalidParameter);
}
