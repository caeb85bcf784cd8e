#include "rtip/pullback.hpp"

#include <algorithm>
#include <cmath>

#include "rtip/spectrum.hpp"

namespace rtip {

Classification classify(const PullbackDiagnostics& d, double delta1,
                        double delta2) {
  const bool tracks = d.dist_end < delta1;
  const bool extinct = d.norm_end < delta2;
  if (tracks && extinct)
    throw StructureError("pullback: classification thresholds overlap");
  if (tracks) return Classification::tracking;
  if (extinct) return Classification::extinct;
  return Classification::undetermined;
}

PullbackEngine::PullbackEngine(const ModelParams& base,
                               const EngineOptions& opt)
    : sys_(make_default_system(base)), opt_(opt) {
  const double norm_s = sys_.norm(sys_.V_s);
  delta1_ = 0.1 * norm_s;
  // The extinction ball must exclude the edge state, whose norm is already
  // close to 0.1 * ||V_s||; a tracking-sized threshold would classify a
  // trajectory parked near the edge as extinct instead of undetermined.
  delta2_ = 0.03 * norm_s;

  if (opt_.dense_check) {
    VectorXd rest(sys_.N() + 1);
    rest.head(sys_.N()) = sys_.V_s;
    rest[sys_.N()] = -base.a;
    const Eigenpair pair = unstable_eigenpair(jacobian(sys_, rest));
    if (std::abs(pair.value - 2.0 * base.r) >
        1e-6 * std::max(1.0, 2.0 * base.r))
      throw InconsistencyError(
          "pullback: unstable eigenvalue at the rest state is not the ramp "
          "escape rate");
    const VectorXd X = manifold_direction(base.r);
    if ((X - pair.vector).norm() > 1e-6)
      throw InconsistencyError(
          "pullback: bordered manifold direction disagrees with the dense "
          "eigenvector");
  }
}

VectorXd PullbackEngine::manifold_direction(double r) const {
  if (!(r > 0.0)) throw InvalidParameter("pullback: rate must be positive");
  const int N = sys_.N();
  VectorXd rest(N + 1);
  rest.head(N) = sys_.V_s;
  rest[N] = -sys_.params.a;
  SemidiscreteSystem probe = sys_;
  probe.params.r = r;
  const MolJacobian J = jacobian(probe, rest);
  // Eigenvector (w, 1) for the eigenvalue 2r of the bordered Jacobian:
  // (2r I - A) w = dV/dgamma.
  BandedMatrix M = J.A.scaled(-1.0);
  M.add_scalar_diagonal(2.0 * r);
  const BandedSolver lu(M);
  if (!lu.ok())
    throw StructureError(
        "pullback: ramp escape rate resonates with the field spectrum");
  VectorXd X(N + 1);
  X.head(N) = lu.solve(J.dV_dgamma);
  X[N] = 1.0;
  X /= X.norm();
  int imax = 0;
  X.cwiseAbs().maxCoeff(&imax);
  if (X[imax] < 0.0) X = -X;
  if (X[N] <= 0.0)
    throw StructureError("pullback: manifold direction lost the ramp branch");
  return X;
}

PullbackRun PullbackEngine::run(const ModelParams& p, double t_end) const {
  p.validate();
  if (t_end < 1000.0)
    throw InvalidParameter("pullback: classification horizon must be >= 1000");
  // The cached fixed points are exact for any rate and ramp amplitude (the
  // shift is frozen at its rest values, where g vanishes identically), but
  // not across changes to the field itself.
  const ModelParams& b = sys_.params;
  if (p.beta != b.beta || p.lambda_r != b.lambda_r || p.L != b.L ||
      p.Z != b.Z)
    throw InvalidParameter(
        "pullback: engine was built for different field parameters");

  SemidiscreteSystem sys = sys_;
  sys.params = p;
  const int N = sys.N();
  const double T_L = std::min(-30.0 / p.r, -50.0);
  const VectorXd X = manifold_direction(p.r);
  VectorXd y0(N + 1);
  y0.head(N) = sys.V_s + opt_.eps * X.head(N);
  y0[N] = -p.a + opt_.eps * X[N];

  IntegratorOptions iopt;
  iopt.rtol = p.tol_ode;
  iopt.atol = 1e-2 * p.tol_ode;

  PullbackRun out;
  out.params = p;
  out.T_L = T_L;
  out.delta1 = delta1_;
  out.delta2 = delta2_;

  double horizon = t_end;
  for (;;) {
    out.trajectory = integrate(sys, y0, T_L, horizon, iopt);
    const VectorXd& yf = out.trajectory.final_state();
    out.diagnostics.dist_end = sys.norm(yf.head(N) - sys.V_s);
    out.diagnostics.norm_end = sys.norm(yf.head(N));
    out.diagnostics.sup_error = 0.0;
    for (int i = 0; i < out.trajectory.size(); ++i) {
      const double dev = (out.trajectory.state(i).head(N) - sys.V_s)
                             .lpNorm<Eigen::Infinity>();
      if (dev > out.diagnostics.sup_error) {
        out.diagnostics.sup_error = dev;
        out.diagnostics.sup_error_time = out.trajectory.times()[i];
      }
    }
    out.t_end = horizon;
    out.classification = classify(out.diagnostics, delta1_, delta2_);
    if (out.classification != Classification::undetermined ||
        horizon >= 16000.0)
      return out;
    horizon = std::min(2.0 * horizon, 16000.0);
  }
}

double PullbackEngine::tracking_error(const ModelParams& p,
                                      double t_end) const {
  const PullbackRun run_out = run(p, t_end);
  if (run_out.classification != Classification::tracking)
    throw InvalidParameter(
        "pullback: tracking_error requires a run that classifies as "
        "Tracking");
  return run_out.diagnostics.sup_error;
}

PullbackRun compute_pullback(const ModelParams& p, double t_end) {
  return PullbackEngine(p).run(p, t_end);
}

double tracking_error(const ModelParams& p, double t_end) {
  return PullbackEngine(p).tracking_error(p, t_end);
}

}  // namespace rtip
