#include "rtip/mol.hpp"

#include <cmath>
#include <limits>

namespace rtip {

namespace {

// Width of the tolerance band past |gamma| = a inside which the polynomial
// shift field is evaluated as-is (implicit stages may graze the rest point).
constexpr double kGammaSlack = 1e-6;

double shift_field(const SemidiscreteSystem& sys, double gamma) {
  const double a = sys.params.a;
  if (std::abs(gamma) > a * (1.0 + kGammaSlack))
    throw DomainError("mol: |gamma| > a is outside the ramp range");
  return (a - gamma) * (a + gamma) / a;
}

// Banded Newton matrix of the static V-equation at a rest value of gamma.
BandedMatrix static_jacobian(const SemidiscreteSystem& sys,
                             const VectorXd& V) {
  BandedMatrix A = sys.D2;
  VectorXd fu(sys.N());
  for (int j = 0; j < sys.N(); ++j)
    fu[j] = reaction_du(V[j], sys.hvals[j], sys.params);
  A.add_diagonal(fu);
  return A;
}

VectorXd static_residual(const SemidiscreteSystem& sys, const VectorXd& V) {
  VectorXd R = sys.D2.apply(V);
  for (int j = 0; j < sys.N(); ++j)
    R[j] += reaction(V[j], sys.hvals[j], sys.params);
  return R;
}

}  // namespace

SemidiscreteSystem build_system(const VectorXd& pulse_mesh,
                                const ModelParams& p) {
  p.validate();
  const int n = static_cast<int>(pulse_mesh.size());
  if (n < 50) throw InvalidParameter("mol: mesh needs at least 50 nodes");
  for (int i = 1; i < n; ++i)
    if (!(pulse_mesh[i] > pulse_mesh[i - 1]))
      throw InvalidParameter("mol: mesh must be strictly increasing");

  SemidiscreteSystem sys;
  sys.params = p;
  sys.mesh = pulse_mesh;
  sys.hvals.resize(n);
  for (int j = 0; j < n; ++j) sys.hvals[j] = habitat(pulse_mesh[j], p.L);
  sys.weights = trapezoid_weights(pulse_mesh);
  sys.D1 = BandedMatrix(n, 4, 4);
  sys.D2 = BandedMatrix(n, 4, 4);

  for (int j = 0; j < n; ++j) {
    // Greedily grow the window towards the nearer neighbour: the five
    // closest nodes on a sorted mesh are contiguous and contain j.
    int lo = j, hi = j;
    while (hi - lo < 4) {
      const bool can_left = lo > 0;
      const bool can_right = hi < n - 1;
      if (can_left && can_right) {
        if (pulse_mesh[j] - pulse_mesh[lo - 1] <=
            pulse_mesh[hi + 1] - pulse_mesh[j])
          --lo;
        else
          ++hi;
      } else if (can_left) {
        --lo;
      } else {
        ++hi;
      }
    }
    const VectorXd nodes = pulse_mesh.segment(lo, 5);
    const MatrixXd w = fd_weights(pulse_mesh[j], nodes, 2);
    for (int k = 0; k < 5; ++k) {
      sys.D1.at(j, lo + k) = w(1, k);
      sys.D2.at(j, lo + k) = w(2, k);
    }
  }
  return sys;
}

void attach_fixed_points(SemidiscreteSystem& sys, const PulseProfile& stable,
                         const PulseProfile& unstable) {
  const double a = sys.params.a;
  VectorXd gs(sys.N()), gu(sys.N());
  for (int j = 0; j < sys.N(); ++j) {
    gs[j] = stable.eval_u(sys.mesh[j]);
    gu[j] = unstable.eval_u(sys.mesh[j]);
  }
  sys.V_s = find_fixed_point(sys, gs, -a).V;
  sys.V_u = find_fixed_point(sys, gu, a).V;
}

SemidiscreteSystem make_default_system(const ModelParams& p) {
  const PulseProfile stable = compute_pulse(PulseKind::stable, p);
  const PulseProfile unstable = compute_pulse(PulseKind::unstable, p);
  SemidiscreteSystem sys = build_system(stable.z, p);
  attach_fixed_points(sys, stable, unstable);
  return sys;
}

void rhs(const SemidiscreteSystem& sys, const VectorXd& y, VectorXd& dydt) {
  const int N = sys.N();
  if (y.size() != N + 1)
    throw InvalidParameter("mol: state has wrong dimension");
  const double gamma = y[N];
  const double g = shift_field(sys, gamma);
  const double r = sys.params.r;

  dydt.resize(N + 1);
  const auto V = y.head(N);
  dydt.head(N) = sys.D2.apply(V) + (r * g) * sys.D1.apply(V);
  for (int j = 0; j < N; ++j)
    dydt[j] += reaction(V[j], sys.hvals[j], sys.params);
  dydt[N] = r * g;
}

MolJacobian jacobian(const SemidiscreteSystem& sys, const VectorXd& y) {
  const int N = sys.N();
  if (y.size() != N + 1)
    throw InvalidParameter("mol: state has wrong dimension");
  const double gamma = y[N];
  const double g = shift_field(sys, gamma);
  const double r = sys.params.r;
  const double gprime = -2.0 * gamma / sys.params.a;  // d g / d gamma

  MolJacobian J;
  J.A = sys.D2;
  J.A.axpy(r * g, sys.D1);
  VectorXd fu(N);
  const auto V = y.head(N);
  for (int j = 0; j < N; ++j)
    fu[j] = reaction_du(V[j], sys.hvals[j], sys.params);
  J.A.add_diagonal(fu);
  J.dV_dgamma = (r * gprime) * sys.D1.apply(V);
  J.dgamma_dgamma = r * gprime;
  return J;
}

FixedPointResult find_fixed_point(const SemidiscreteSystem& sys,
                                  const VectorXd& V_guess, double gamma) {
  const double a = sys.params.a;
  if (std::abs(std::abs(gamma) - a) > 1e-12 * a)
    throw InvalidParameter("mol: fixed points exist only at gamma = +-a");
  if (V_guess.size() != sys.N())
    throw InvalidParameter("mol: guess has wrong dimension");

  const double guess_peak = V_guess.maxCoeff();
  FixedPointResult out;
  out.V = V_guess;
  for (int it = 0; it <= 25; ++it) {
    const VectorXd R = static_residual(sys, out.V);
    out.residual = R.lpNorm<Eigen::Infinity>();
    out.iterations = it;
    if (out.residual < 1e-10) {
      if (std::abs(out.V.maxCoeff() - guess_peak) > 0.1)
        throw WrongBranch("mol: fixed point left the guess branch");
      return out;
    }
    BandedSolver lu(static_jacobian(sys, out.V));
    if (!lu.ok())
      throw ConvergenceError("mol: singular Jacobian in fixed-point Newton");
    out.V -= lu.solve(R);
  }
  throw ConvergenceError("mol: fixed-point Newton did not converge");
}

void MolOdeSystem::eval(double, const VectorXd& y, VectorXd& f) const {
  rhs(*sys_, y, f);
}

void MolOdeSystem::factor(double, const VectorXd& y, double alpha) {
  const MolJacobian J = jacobian(*sys_, y);
  BandedMatrix W = J.A.scaled(-alpha);
  W.add_scalar_diagonal(1.0);
  lu_ = std::make_unique<BandedSolver>(W);
  if (!lu_->ok())
    throw ConvergenceError("mol: singular shifted operator");
  c_ = J.dV_dgamma;
  s_ = 1.0 - alpha * J.dgamma_dgamma;
  alpha_ = alpha;
}

void MolOdeSystem::solve(const VectorXd& b, VectorXd& x) const {
  // Block upper-triangular: the gamma equation is closed, then the V block.
  const int N = sys_->N();
  x.resize(N + 1);
  const double xg = b[N] / s_;
  x.head(N) = lu_->solve(b.head(N) + (alpha_ * xg) * c_);
  x[N] = xg;
}

bool MolOdeSystem::domain_ok(const VectorXd& y) const {
  return y.allFinite() &&
         std::abs(y[y.size() - 1]) <= sys_->params.a * (1.0 + kGammaSlack);
}

double MolOdeSystem::suggest_h_cap(double, const VectorXd& y) const {
  // Bound the step by the fastest locally growing mode so departures from
  // unstable states stay resolved: an L-stable pair parked on an unstable
  // state filters the departing mode out of its error estimate once the
  // step exceeds the e-folding time.  The gamma equation linearizes to the
  // rate -2*r*gamma/a.  A positive reaction mode can only hide this way
  // while the field sits near the edge state; elsewhere the V block is
  // either stable or moving fast enough for the estimator to see it, and
  // the reaction-slope bound would just throttle long tracking runs.
  const ModelParams& p = sys_->params;
  const int N = sys_->N();
  double rate = -2.0 * p.r * y[N] / p.a;
  if (sys_->V_u.size() == N &&
      (y.head(N) - sys_->V_u).lpNorm<Eigen::Infinity>() < 0.15) {
    for (int j = 0; j < N; ++j)
      rate = std::max(rate, reaction_du(y[j], sys_->hvals[j], p));
  }
  if (rate <= 0.0) return std::numeric_limits<double>::infinity();
  return 0.7 / rate;
}

Trajectory integrate(const SemidiscreteSystem& sys, const VectorXd& y0,
                     double t0, double t1, const IntegratorOptions& opt) {
  MolOdeSystem ode(sys);
  return integrate_trbdf2(ode, y0, t0, t1, opt);
}

}  // namespace rtip
