#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rtip/mol.hpp"

using namespace rtip;

namespace {

const SemidiscreteSystem& default_system() {
  static const SemidiscreteSystem sys = make_default_system(ModelParams{});
  return sys;
}

const PulseProfile& stable_pulse() {
  static const PulseProfile p = compute_pulse(PulseKind::stable, ModelParams{});
  return p;
}

const PulseProfile& unstable_pulse() {
  static const PulseProfile p =
      compute_pulse(PulseKind::unstable, ModelParams{});
  return p;
}

VectorXd interp_profile(const PulseProfile& prof, const VectorXd& mesh) {
  VectorXd v(mesh.size());
  for (int j = 0; j < mesh.size(); ++j) v[j] = prof.eval_u(mesh[j]);
  return v;
}

VectorXd pack_state(const VectorXd& V, double gamma) {
  VectorXd y(V.size() + 1);
  y.head(V.size()) = V;
  y[V.size()] = gamma;
  return y;
}

// Only the rate enters the semidiscrete operator through params (the fixed
// points sit at g = 0 and are rate-independent), so reuse the cached system.
SemidiscreteSystem build_tracking_system(const ModelParams& p) {
  SemidiscreteSystem sys = default_system();
  sys.params = p;
  return sys;
}

}  // namespace

TEST_CASE("differentiation matrices annihilate constants") {
  const auto& sys = default_system();
  const VectorXd ones = VectorXd::Ones(sys.N());
  CHECK(sys.D1.apply(ones).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("differentiation matrices are exact on quartics") {
  const auto& sys = default_system();
  for (int k = 0; k <= 4; ++k) {
    VectorXd f(sys.N()), d1(sys.N()), d2(sys.N());
    double scale1 = 1.0, scale2 = 1.0;
    for (int j = 0; j < sys.N(); ++j) {
      const double z = sys.mesh[j];
      f[j] = std::pow(z, k);
      d1[j] = k == 0 ? 0.0 : k * std::pow(z, k - 1);
      d2[j] = k <= 1 ? 0.0 : k * (k - 1) * std::pow(z, k - 2);
      scale1 = std::max(scale1, std::abs(d1[j]));
      scale2 = std::max(scale2, std::abs(d2[j]));
    }
    CHECK((sys.D1.apply(f) - d1).lpNorm<Eigen::Infinity>() / scale1 < 1e-9);
    CHECK((sys.D2.apply(f) - d2).lpNorm<Eigen::Infinity>() / scale2 < 1e-9);
  }
}

TEST_CASE("first derivative of sin on the finely meshed core") {
  const auto& sys = default_system();
  VectorXd f(sys.N());
  for (int j = 0; j < sys.N(); ++j) f[j] = std::sin(sys.mesh[j]);
  const VectorXd df = sys.D1.apply(f);
  double worst = 0.0;
  for (int j = 2; j < sys.N() - 2; ++j) {
    if (std::abs(sys.mesh[j]) > 30.0) continue;
    worst = std::max(worst, std::abs(df[j] - std::cos(sys.mesh[j])));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("mesh validation") {
  const ModelParams p;
  VectorXd tiny(10);
  for (int i = 0; i < 10; ++i) tiny[i] = i;
  CHECK_THROWS_AS(build_system(tiny, p), InvalidParameter);
  VectorXd dup(60);
  for (int i = 0; i < 60; ++i) dup[i] = i;
  dup[30] = dup[29];
  CHECK_THROWS_AS(build_system(dup, p), InvalidParameter);
}

TEST_CASE("rhs vanishes at the cached fixed points") {
  const auto& sys = default_system();
  const ModelParams p;
  VectorXd f;
  rhs(sys, pack_state(sys.V_s, -p.a), f);
  CHECK(f.lpNorm<Eigen::Infinity>() < 1e-9);
  rhs(sys, pack_state(sys.V_u, p.a), f);
  CHECK(f.lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("rhs on the interpolated continuum pulse is small") {
  const auto& sys = default_system();
  const ModelParams p;
  const VectorXd V = interp_profile(stable_pulse(), sys.mesh);
  VectorXd f;
  rhs(sys, pack_state(V, -p.a), f);
  CHECK(f.head(sys.N()).lpNorm<Eigen::Infinity>() < 1e-4);
  CHECK(f[sys.N()] == 0.0);  // g(-a) = 0 exactly
}

TEST_CASE("rhs of the zero field is zero for any shift") {
  const auto& sys = default_system();
  const VectorXd zero = VectorXd::Zero(sys.N());
  for (double gamma : {-15.65, -3.0, 0.0, 7.7, 15.65}) {
    VectorXd f;
    rhs(sys, pack_state(zero, gamma), f);
    CHECK(f.head(sys.N()).lpNorm<Eigen::Infinity>() == 0.0);
  }
  VectorXd f;
  rhs(sys, pack_state(zero, 0.0), f);
  CHECK(f[sys.N()] == doctest::Approx(sys.params.r * sys.params.a).epsilon(1e-14));
}

TEST_CASE("rhs rejects shifts outside the ramp range") {
  const auto& sys = default_system();
  VectorXd f;
  CHECK_THROWS_AS(rhs(sys, pack_state(sys.V_s, 1.1 * sys.params.a), f),
                  DomainError);
}

TEST_CASE("jacobian matches finite differences") {
  const auto& sys = default_system();
  const int N = sys.N();
  // A state well off equilibrium: deformed pulse, mid-ramp shift.
  VectorXd V = interp_profile(stable_pulse(), sys.mesh);
  for (int j = 0; j < N; ++j) V[j] *= 1.0 + 0.2 * std::sin(0.3 * sys.mesh[j]);
  const VectorXd y = pack_state(V, 3.7);

  const MolJacobian J = jacobian(sys, y);
  VectorXd yp = y, ym = y, fp(N + 1), fm(N + 1);
  double worst = 0.0;
  for (int c = 0; c <= N; ++c) {
    const double h = 1e-7 * (1.0 + std::abs(y[c]));
    yp[c] = y[c] + h;
    ym[c] = y[c] - h;
    rhs(sys, yp, fp);
    rhs(sys, ym, fm);
    yp[c] = y[c];
    ym[c] = y[c];
    for (int rr = 0; rr <= N; ++rr) {
      const double fd = (fp[rr] - fm[rr]) / (2.0 * h);
      double an;
      if (rr < N && c < N)
        an = J.A(rr, c);
      else if (rr < N)
        an = J.dV_dgamma[rr];
      else if (c < N)
        an = 0.0;
      else
        an = J.dgamma_dgamma;
      worst = std::max(worst, std::abs(fd - an) / (1.0 + std::abs(an)));
    }
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("gamma column vanishes at gamma = 0 and corner is 2r at -a") {
  const auto& sys = default_system();
  const ModelParams p;
  const VectorXd V = interp_profile(stable_pulse(), sys.mesh);
  const MolJacobian at0 = jacobian(sys, pack_state(V, 0.0));
  CHECK(at0.dV_dgamma.lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(at0.dgamma_dgamma == 0.0);
  const MolJacobian atm = jacobian(sys, pack_state(sys.V_s, -p.a));
  CHECK(atm.dgamma_dgamma == doctest::Approx(2.0 * p.r).epsilon(1e-14));
}

TEST_CASE("fixed-point Newton from the interpolated pulses") {
  const auto& sys = default_system();
  const ModelParams p;
  const VectorXd gs = interp_profile(stable_pulse(), sys.mesh);
  const auto rs = find_fixed_point(sys, gs, -p.a);
  CHECK(rs.iterations <= 5);
  CHECK(rs.residual < 1e-10);
  CHECK((rs.V - gs).lpNorm<Eigen::Infinity>() < 1e-6);

  const VectorXd gu = interp_profile(unstable_pulse(), sys.mesh);
  const auto ru = find_fixed_point(sys, gu, p.a);
  CHECK(std::abs(ru.V.maxCoeff() - 0.0657) < 2e-3);

  const auto r0 = find_fixed_point(sys, VectorXd::Zero(sys.N()), p.a);
  CHECK(r0.V.lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(r0.iterations == 0);
}

TEST_CASE("fixed-point Newton reports branch escapes") {
  const auto& sys = default_system();
  const ModelParams p;
  // A guess between the branches converges somewhere far from its own peak.
  const VectorXd mid = 4.0 * interp_profile(unstable_pulse(), sys.mesh);
  CHECK_THROWS_AS(find_fixed_point(sys, mid, p.a), WrongBranch);
  CHECK_THROWS_AS(find_fixed_point(sys, sys.V_s, 0.5 * p.a), InvalidParameter);
}

TEST_CASE("equilibrium is preserved over a long window") {
  const auto& sys = default_system();
  const ModelParams p;
  const VectorXd y0 = pack_state(sys.V_s, -p.a);
  const auto traj = integrate(sys, y0, 0.0, 100.0);
  CHECK((traj.final_state() - y0).lpNorm<Eigen::Infinity>() < 1e-6);
  // gamma stays put when started exactly at the rest value.
  CHECK(std::abs(traj.final_state()[sys.N()] + p.a) < 1e-9);
}

TEST_CASE("ramped integration keeps gamma monotone and the norm bounded") {
  const auto& sys = default_system();
  const ModelParams p;
  const double norm_s = sys.norm(sys.V_s);
  const VectorXd y0 = pack_state(sys.V_s, -p.a * (1.0 - 1e-9));
  const auto traj = integrate(sys, y0, 0.0, 200.0);
  double prev = -p.a;
  for (int i = 1; i < traj.size(); ++i) {
    const double g = traj.state(i)[sys.N()];
    CHECK(g >= prev - 1e-12);
    CHECK(std::abs(g) <= p.a * (1.0 + 1e-9));
    prev = g;
    CHECK(sys.norm(traj.state(i).head(sys.N())) < 1.05 * norm_s);
    // The detached pulse is advected across the graded tail; small
    // dispersive undershoots are the price of the coarse far field.
    CHECK(traj.state(i).head(sys.N()).minCoeff() > -1e-4);
  }
  // r = 1 exceeds the critical rate: by the end of the window the field has
  // detached and is decaying, not restabilizing.
  CHECK(std::abs(traj.final_state()[sys.N()] - p.a) < 1e-6);
  CHECK(sys.norm(traj.final_state().head(sys.N())) < 0.2 * norm_s);
}

TEST_CASE("subcritical ramp returns the field to the stable pulse") {
  const auto& sys = default_system();
  ModelParams p;
  p.r = 0.5;
  const auto slow = build_tracking_system(p);
  const VectorXd y0 = pack_state(slow.V_s, -p.a * (1.0 - 1e-9));
  const auto traj = integrate(slow, y0, 0.0, 600.0);
  CHECK(std::abs(traj.final_state()[slow.N()] - p.a) < 1e-6);
  CHECK((traj.final_state().head(slow.N()) - slow.V_s)
            .lpNorm<Eigen::Infinity>() < 1e-5);
  // Tracking runs stay nonnegative everywhere.
  for (int i = 0; i < traj.size(); ++i)
    CHECK(traj.state(i).head(slow.N()).minCoeff() >= -1e-8);
}
