#include "rtip/critical.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <memory>
#include <sstream>
#include <thread>
#include <utility>

namespace rtip {

namespace {

BandedMatrix transpose_banded(const BandedMatrix& A) {
  const int n = A.rows();
  BandedMatrix T(n, A.upper(), A.lower());
  for (int i = 0; i < n; ++i) {
    const int j_lo = std::max(0, i - A.lower());
    const int j_hi = std::min(n - 1, i + A.upper());
    for (int j = j_lo; j <= j_hi; ++j) T.at(j, i) = A(i, j);
  }
  return T;
}

// Rayleigh-quotient iteration on the banded field block, seeded by (and
// cross-checked against) the dense eigenpair.  The projective re-injection
// in refine_heteroclinic removes the unstable component of a state hundreds
// of e-foldings before it would become visible, which takes eigenvectors far
// beyond dense-solve accuracy.
struct RefinedPair {
  double value = 0.0;
  VectorXd vector;
};

RefinedPair refine_eigenpair(const BandedMatrix& A, double nu0,
                             const VectorXd& v0) {
  RefinedPair out;
  out.value = nu0;
  out.vector = v0.normalized();
  for (int it = 0; it < 5; ++it) {
    BandedMatrix M = A;
    // tiny detuning keeps the shifted matrix factorable at convergence
    M.add_scalar_diagonal(-(out.value + 1e-13));
    BandedSolver lu(M);
    if (!lu.ok()) {
      out.value += 1e-10;
      continue;
    }
    VectorXd w = lu.solve(out.vector);
    out.vector = w.normalized();
    out.value = out.vector.dot(A.apply(out.vector));
  }
  int imax = 0;
  out.vector.cwiseAbs().maxCoeff(&imax);
  if (out.vector[imax] < 0.0) out.vector = -out.vector;
  const double res =
      (A.apply(out.vector) - out.value * out.vector).lpNorm<Eigen::Infinity>();
  if (!(res < 1e-8))
    throw ConvergenceError("critical: edge eigenpair refinement stalled");
  return out;
}

void check_field_params(const ModelParams& p, const ModelParams& base) {
  if (p.beta != base.beta || p.lambda_r != base.lambda_r || p.L != base.L ||
      p.Z != base.Z)
    throw InvalidParameter(
        "critical: solver was built for different field parameters");
}

// Zero crossing of the (monotone) shift component, bisected on the dense
// output.  The analytic ramp crossing is off by the accumulated shift error,
// and the phase condition is stated against the computed trajectory.
double gamma_crossing(const Trajectory& traj, int N) {
  int k = 1;
  while (k < traj.size() && traj.state(k)[N] < 0.0) ++k;
  if (k >= traj.size() || traj.state(k - 1)[N] >= 0.0)
    throw StructureError("critical: shift crossing not bracketed");
  double lo = traj.times()[k - 1], hi = traj.times()[k];
  VectorXd y(N + 1);
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    traj.eval(mid, y);
    (y[N] < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Variational system of the r-augmented equations along a frozen
// trajectory: w = (dV, dgamma) with the parameter perturbation dr entering
// as a constant forcing.  Coefficients are evaluated on the dense output
// (clamped to the rest state before the stored span).
class VariationalSystem final : public OdeSystem {
 public:
  VariationalSystem(const SemidiscreteSystem& sys, const Trajectory& base,
                    double dr0)
      : sys_(&sys), base_(&base), dr0_(dr0), ybar_(sys.dim()) {}

  int dim() const override { return sys_->dim(); }

  void eval(double t, const VectorXd& w, VectorXd& f) const override {
    const int N = sys_->N();
    frozen_state(t);
    const MolJacobian J = jacobian(*sys_, ybar_);
    const double g = shift_velocity(ybar_[N], sys_->params.a);
    f.resize(N + 1);
    f.head(N) = J.A.apply(w.head(N)) + w[N] * J.dV_dgamma +
                (dr0_ * g) * sys_->D1.apply(ybar_.head(N));
    f[N] = J.dgamma_dgamma * w[N] + dr0_ * g;
  }

  void factor(double /*t*/, const VectorXd& /*w*/, double alpha) override {
    // frozen_state was just called by eval at the same t; recompute anyway
    // to stay independent of call order
    const MolJacobian J = jacobian(*sys_, ybar_);
    BandedMatrix W = J.A.scaled(-alpha);
    W.add_scalar_diagonal(1.0);
    lu_ = std::make_unique<BandedSolver>(W);
    if (!lu_->ok())
      throw StructureError("critical: variational operator is singular");
    c_ = J.dV_dgamma;
    s_ = 1.0 - alpha * J.dgamma_dgamma;
    alpha_ = alpha;
  }

  void solve(const VectorXd& b, VectorXd& x) const override {
    const int N = sys_->N();
    x.resize(N + 1);
    const double xg = b[N] / s_;
    x.head(N) = lu_->solve(b.head(N) + (alpha_ * xg) * c_);
    x[N] = xg;
  }

  bool domain_ok(const VectorXd& w) const override { return w.allFinite(); }

 private:
  void frozen_state(double t) const {
    base_->eval(t, ybar_);
    const double a = sys_->params.a;
    ybar_[N_()] = std::clamp(ybar_[N_()], -a, a);
  }
  int N_() const { return sys_->N(); }

  const SemidiscreteSystem* sys_;
  const Trajectory* base_;
  double dr0_ = 0.0;
  mutable VectorXd ybar_;
  std::unique_ptr<BandedSolver> lu_;
  VectorXd c_;
  double s_ = 0.0;
  double alpha_ = 0.0;
};

std::vector<double> log_probe_grid(double r_max) {
  constexpr int kProbes = 12;
  std::vector<double> g(kProbes);
  const double lo = std::log(1e-2), hi = std::log(r_max);
  for (int k = 0; k < kProbes; ++k)
    g[k] = std::exp(lo + (hi - lo) * k / double(kProbes - 1));
  return g;
}

}  // namespace

void HeteroclinicSolution::validate() const {
  std::ostringstream os;
  if (!(residual_minus < 1e-4) || !(residual_plus < 1e-3)) {
    os << "heteroclinic endpoints out of bounds: |U(-T) - u2*| = "
       << residual_minus << ", |U(+T) - u1*| = " << residual_plus
       << " at T = " << T;
    throw TruncationError(os.str());
  }
  if (!(gamma0_residual < 1e-8)) {
    os << "heteroclinic phase condition violated: |gamma(0)| = "
       << gamma0_residual;
    throw TruncationError(os.str());
  }
}

CriticalSolver::CriticalSolver(const ModelParams& base,
                               const EngineOptions& opt)
    : eng_(base, opt), opt_(opt) {
  const SemidiscreteSystem& sys = eng_.system();
  const int N = sys.N();
  VectorXd y_edge(N + 1);
  y_edge.head(N) = sys.V_u;
  y_edge[N] = sys.params.a;
  const MolJacobian J = jacobian(sys, y_edge);

  // The dense solves double as the one-dimensionality check of the unstable
  // subspace at the edge state (they throw unless exactly one eigenvalue is
  // unstable); the engine's construction covers the base state.
  const Eigenpair right = unstable_eigenpair(J, EigSide::right);
  const Eigenpair left = unstable_eigenpair(J, EigSide::left);
  if (std::abs(right.vector[N]) > 1e-6)
    throw StructureError(
        "critical: edge eigenvector has a shift component; the shift mode "
        "should be decoupled at the rest value");

  // g vanishes at the rest shift, so the field block is rate-independent:
  // one refinement serves every r.  The left eigenvector's shift component
  // is restored analytically per rate in left_eigenvector_full.
  const RefinedPair vr =
      refine_eigenpair(J.A, right.value, right.vector.head(N));
  const RefinedPair vl = refine_eigenpair(transpose_banded(J.A), left.value,
                                          left.vector.head(N).normalized());
  if (std::abs(vr.value - right.value) > 1e-6 * std::max(1.0, right.value) ||
      std::abs(vr.value - vl.value) > 1e-9)
    throw InconsistencyError(
        "critical: banded and dense edge eigenvalues disagree");
  nu_ = vr.value;
  v_edge_ = vr.vector;
  l_edge_ = vl.vector;
  l_d1vu_ = l_edge_.dot(sys.D1.apply(sys.V_u));
}

VectorXd CriticalSolver::left_eigenvector_full(double r) const {
  // Left eigenvector of the full bordered Jacobian at (V_u, +a): the field
  // part solves the transposed block problem, and the shift entry balances
  // the shift column against the gap between nu and the shift eigenvalue
  // -2r.  That entry is what makes the functional blind to the whole stable
  // subspace, shift direction included.
  const int N = eng_.system().N();
  VectorXd l(N + 1);
  l.head(N) = l_edge_;
  l[N] = -2.0 * r * l_d1vu_ / (nu_ + 2.0 * r);
  l.normalize();
  int imax = 0;
  l.cwiseAbs().maxCoeff(&imax);
  if (l[imax] < 0.0) l = -l;
  return l;
}

CriticalSolver::Shot CriticalSolver::shoot(const ModelParams& p,
                                           double t_after, double rtol) const {
  p.validate();
  check_field_params(p, eng_.system().params);
  SemidiscreteSystem sys = eng_.system();
  sys.params = p;
  const int N = sys.N();

  const VectorXd X = eng_.manifold_direction(p.r);
  VectorXd y0(N + 1);
  y0.head(N) = sys.V_s;
  y0[N] = -p.a;
  y0 += opt_.eps * X;

  const double T_L = std::min(-30.0 / p.r, -50.0);
  // exact crossing time of the ramp through this initial shift offset
  const double delta = opt_.eps * X[N] / p.a;
  const double t0_ramp = T_L + std::atanh(1.0 - delta) / p.r;

  IntegratorOptions io;
  io.rtol = rtol > 0.0 ? rtol : p.tol_ode;
  io.atol = 1e-2 * io.rtol;

  Shot s;
  s.traj = integrate(sys, y0, T_L, t0_ramp + t_after + 0.5, io);
  s.t0 = gamma_crossing(s.traj, N);
  return s;
}

double CriticalSolver::miss_of(const Shot& s, double r, double a) const {
  const SemidiscreteSystem& base = eng_.system();
  const int N = base.N();
  VectorXd y(N + 1);
  s.traj.eval(s.t0 + kMissTime, y);
  VectorXd d(N + 1);
  d.head(N) = y.head(N) - base.V_u;
  d[N] = y[N] - a;
  const double nrm = d.norm();
  if (nrm == 0.0) return 0.0;
  return left_eigenvector_full(r).dot(d) / nrm;
}

double CriticalSolver::miss(const ModelParams& p, double rtol) const {
  const Shot s = shoot(p, kMissTime, rtol);
  return miss_of(s, p.r, p.a);
}

CriticalRateResult CriticalSolver::bisect_rc(const ModelParams& p, double r_lo,
                                             double r_hi, double tol_r) const {
  if (!(r_lo > 0.0) || !(r_hi > r_lo) || !(tol_r > 0.0))
    throw InvalidParameter("bisect_rc: need 0 < r_lo < r_hi and tol_r > 0");
  CriticalRateResult out;
  out.d = 2.0 * p.a;
  out.method = CriticalRateResult::Method::bisection;

  auto classify_at = [&](double r) {
    ModelParams q = p;
    q.r = r;
    // run() already extends the horizon internally before giving up
    const Classification c = eng_.run(q).classification;
    out.history.emplace_back(r, c);
    return c;
  };

  double lo = r_lo, hi = r_hi;
  const Classification c_lo = classify_at(lo);
  const Classification c_hi = classify_at(hi);
  if (c_lo == Classification::undetermined ||
      c_hi == Classification::undetermined)
    throw UnresolvedBracket(
        "bisect_rc: endpoint undetermined at the maximum horizon", lo, hi);
  if (c_lo != Classification::tracking)
    throw BracketError("bisect_rc: no tracking endpoint at r_lo");
  if (c_hi != Classification::extinct)
    throw BracketError("bisect_rc: no extinction endpoint at r_hi");

  while (hi - lo > tol_r) {
    const double mid = 0.5 * (lo + hi);
    const Classification c = classify_at(mid);
    if (c == Classification::undetermined)
      throw UnresolvedBracket(
          "bisect_rc: midpoint undetermined at the maximum horizon", lo, hi);
    (c == Classification::tracking ? lo : hi) = mid;
  }
  out.r_lo = lo;
  out.r_hi = hi;
  out.r_c = 0.5 * (lo + hi);
  return out;
}

HeteroclinicSolution CriticalSolver::refine_heteroclinic(const ModelParams& p,
                                                         double r_init) const {
  if (!(r_init > 0.0))
    throw InvalidParameter("refine_heteroclinic: r_init must be positive");
  const SemidiscreteSystem& base = eng_.system();
  const int N = base.N();

  auto miss_at = [&](double r, double rtol, Shot* keep) {
    ModelParams q = p;
    q.r = r;
    Shot s = shoot(q, kMissTime, rtol);
    const double m = miss_of(s, r, q.a);
    if (keep) *keep = std::move(s);
    return m;
  };

  // The residual target sits far below the step-controller jitter of the
  // pipeline tolerance (the integrated state is only piecewise smooth in r,
  // jumping by the local error whenever the accepted step sequence
  // changes), so the whole root-find runs two decades tighter; the shots
  // are short enough that this costs a few seconds per evaluation.
  const double rtol_tight = 1e-10;
  double r_best = r_init, m_best = std::numeric_limits<double>::infinity();
  Shot shot_best;
  auto miss_keep = [&](double r) {
    Shot s;
    const double m = miss_at(r, rtol_tight, &s);
    if (std::abs(m) < std::abs(m_best)) {
      r_best = r;
      m_best = m;
      shot_best = std::move(s);
    }
    return m;
  };

  // Bracket a sign change around r_init.  Away from the root the miss
  // function saturates at +-1 (the regrown unstable component dominates the
  // distance to the edge state), so the endpoint values carry nothing but
  // their sign.
  double h = 2e-3;
  double rl = std::max(r_init - h, 0.6 * r_init), rh = r_init + h;
  double ml = miss_keep(rl), mh = miss_keep(rh);
  while (ml * mh > 0.0 && h < 1.7e-2) {
    h *= 2.0;
    rl = std::max(r_init - h, 0.6 * r_init);
    rh = r_init + h;
    ml = miss_keep(rl);
    mh = miss_keep(rh);
  }
  if (!(ml * mh < 0.0))
    throw BracketError(
        "refine_heteroclinic: no sign change of the miss function within "
        "0.016 of r_init");

  // Bisect into the linear core, where a secant slope means something.
  while (rh - rl > 1e-5) {
    const double rm = 0.5 * (rl + rh);
    const double mm = miss_keep(rm);
    if ((mm > 0.0) == (ml > 0.0)) {
      rl = rm;
      ml = mm;
    } else {
      rh = rm;
      mh = mm;
    }
  }
  const double miss_slope = (mh - ml) / (rh - rl);

  // Secant, falling back to the midpoint whenever the step leaves the
  // bracket.
  double r0 = rl, m0 = ml, r1 = rh, m1 = mh;
  for (int it = 0; it < 12 && std::abs(m_best) >= 1e-8; ++it) {
    double cand = r1 - m1 * (r1 - r0) / (m1 - m0);
    if (!std::isfinite(cand) || !(cand > rl && cand < rh))
      cand = 0.5 * (rl + rh);
    const double mc = miss_keep(cand);
    if ((mc > 0.0) == (ml > 0.0)) {
      rl = cand;
      ml = mc;
    } else {
      rh = cand;
      mh = mc;
    }
    r0 = r1;
    m0 = m1;
    r1 = cand;
    m1 = mc;
  }
  if (!(std::abs(m_best) < 1e-8)) {
    std::ostringstream os;
    os << "refine_heteroclinic: miss residual stalled at " << m_best;
    throw ConvergenceError(os.str());
  }

  const double r_c = r_best;
  const double t0 = shot_best.t0;
  SemidiscreteSystem sys = base;
  sys.params = p;
  sys.params.r = r_c;

  // Projective re-injection along the tail: repeatedly remove the unstable
  // component so the trajectory can hug the edge state for the hundreds of
  // time units the endpoint bound needs.  A single projection is not
  // enough: the eigenvector only captures the unstable direction to linear
  // order, so each projection leaves a quadratic-order remnant that regrows
  // at rate nu; iterating as the stable part decays shrinks that remnant
  // geometrically.  Fresh integration noise regrows the same way, hence the
  // tight tail tolerance.
  const double t_match = kMissTime;
  const double proj_gap = 150.0;
  const int n_proj = 6;
  IntegratorOptions tail_opt;
  tail_opt.rtol = 1e-11;
  tail_opt.atol = 1e-13;
  const double t_tail_end = std::max(2400.0, 1.05 * 50.0 / r_c + t_match);

  auto project = [&](const VectorXd& y) {
    VectorXd dV = y.head(N) - base.V_u;
    dV -= v_edge_ * (l_edge_.dot(dV) / l_edge_.dot(v_edge_));
    VectorXd out(N + 1);
    out.head(N) = base.V_u + dV;
    out[N] = y[N];
    return out;
  };

  HeteroclinicSolution het;
  het.r_c = r_c;
  het.t_match = t_match;
  het.miss = m_best;
  het.miss_slope = miss_slope;
  Trajectory& full = het.trajectory;
  const Trajectory& head = shot_best.traj;
  for (int i = 0; i < head.size(); ++i) {
    const double t = head.times()[i] - t0;
    if (t >= t_match - 1e-9) break;
    full.force_append(t, head.state(i), head.derivative(i));
  }
  VectorXd state(N + 1);
  shot_best.traj.eval(t0 + t_match, state);
  double t_seg = t_match;
  for (int k = 1; k <= n_proj; ++k) {
    state = project(state);
    const bool last = (k == n_proj);
    const double t_next = last ? t_tail_end : t_match + proj_gap * k;
    const Trajectory seg = integrate(sys, state, t_seg, t_next, tail_opt);
    // the projected restart replaces the pre-projection sample at t_seg
    const int keep = last ? seg.size() : seg.size() - 1;
    for (int i = 0; i < keep; ++i)
      full.force_append(seg.times()[i], seg.state(i), seg.derivative(i));
    state = seg.final_state();
    t_seg = t_next;
  }

  // Beyond the stored span the shot sits on the initial manifold offset
  // (left) by construction, so endpoint queries clamp to the span edges.
  auto residuals_at = [&](double T, double& rm, double& rp) {
    VectorXd y(N + 1);
    full.eval(std::max(-T, full.t_begin()), y);
    VectorXd dd = y.head(N) - base.V_s;
    rm = sys.norm(dd);
    full.eval(std::min(T, full.t_end()), y);
    dd = y.head(N) - base.V_u;
    rp = sys.norm(dd);
  };

  // Smallest half-width satisfying both endpoint bounds, doubling from
  // 50/r.  The doubling ladder can straddle the admissible window (the
  // stable remnant still decaying at one rung, the regrown unstable noise
  // already dominant at the next), so fall back to a geometric scan; these
  // are dense-output evaluations, so the scan is cheap.
  const double T_floor = 50.0 / r_c;
  const double T_top = full.t_end();
  double T_sel = -1.0, rm_sel = 0.0, rp_sel = 0.0;
  for (double T = T_floor; T <= T_top + 1e-9; T *= 2.0) {
    const double Tc = std::min(T, T_top);
    double rm, rp;
    residuals_at(Tc, rm, rp);
    if (rm < 1e-4 && rp < 1e-3) {
      T_sel = Tc;
      rm_sel = rm;
      rp_sel = rp;
      break;
    }
  }
  if (T_sel < 0.0 && T_top > T_floor) {
    const int K = 240;
    double best_T = T_floor, best_score = std::numeric_limits<double>::max();
    for (int k = 0; k <= K; ++k) {
      const double T = T_floor * std::pow(T_top / T_floor, k / double(K));
      double rm, rp;
      residuals_at(T, rm, rp);
      if (rm < 1e-4 && rp < 1e-3) {
        T_sel = T;
        rm_sel = rm;
        rp_sel = rp;
        break;
      }
      const double score = std::max(rm / 1e-4, rp / 1e-3);
      if (score < best_score) {
        best_score = score;
        best_T = T;
      }
    }
    if (T_sel < 0.0) {
      T_sel = best_T;
      residuals_at(best_T, rm_sel, rp_sel);
    }
  } else if (T_sel < 0.0) {
    T_sel = T_top;
    residuals_at(T_sel, rm_sel, rp_sel);
  }

  het.T = T_sel;
  het.residual_minus = rm_sel;
  het.residual_plus = rp_sel;
  VectorXd y0v(N + 1);
  full.eval(0.0, y0v);
  het.gamma0_residual = std::abs(y0v[N]);
  het.validate();
  return het;
}

double CriticalSolver::transversality(const HeteroclinicSolution& het,
                                      const ModelParams& p, double t_var,
                                      double dr0) const {
  check_field_params(p, eng_.system().params);
  if (het.trajectory.size() < 2)
    throw InvalidParameter("transversality: heteroclinic has no samples");
  SemidiscreteSystem sys = eng_.system();
  sys.params = p;
  sys.params.r = het.r_c;

  // Default window: the matching epoch.  The certificate is the parameter
  // derivative of the same split the miss function measures, taken at the
  // same section; later windows only rescale it by the stable decay.
  if (t_var == 0.0) t_var = std::min(kMissTime, het.T);
  const double t_start = het.trajectory.t_begin();
  if (!(t_var > t_start) || !(t_var <= het.trajectory.t_end()))
    throw InvalidParameter("transversality: window outside the trajectory");

  const SemidiscreteSystem& base = eng_.system();
  const int N = base.N();
  VariationalSystem var(sys, het.trajectory, dr0);
  IntegratorOptions vo;
  vo.rtol = 1e-8;
  vo.atol = 1e-10;

  // The forward variational solution carries the same unstable mode as the
  // connection itself; left alone it swamps the bounded response by
  // exp(nu t) and pins the normalized product at +-1.  The certificate
  // concerns the bounded tangent -- the solution a projective boundary
  // condition at the far end would select -- so the growing component is
  // removed in stages once the connection is inside the edge neighborhood.
  // The direction removed is not the frozen eigenvector but a co-propagated
  // homogeneous solution seeded at it: the frozen direction alone leaves an
  // O(dist) transient remnant that the non-normal field block re-amplifies.
  // The left eigenfunctional diagnoses the coefficient; the final removal
  // happens at t_var itself, which is the projective condition.
  double t_p0 = t_var;
  {
    VectorXd dd(N);
    for (int i = 0; i < het.trajectory.size(); ++i) {
      if (het.trajectory.times()[i] < 0.0) continue;
      dd = het.trajectory.state(i).head(N) - base.V_u;
      if (sys.norm(dd) < 0.1) {
        t_p0 = het.trajectory.times()[i];
        break;
      }
    }
  }
  const double beta_r = -2.0 * het.r_c * l_d1vu_ / (nu_ + 2.0 * het.r_c);
  auto l_coord = [&](const VectorXd& x) {
    return l_edge_.dot(x.head(N)) + beta_r * x[N];
  };
  VariationalSystem hom(sys, het.trajectory, 0.0);
  VectorXd u_seed = VectorXd::Zero(sys.dim());
  u_seed.head(N) = v_edge_;

  VectorXd w = VectorXd::Zero(sys.dim());
  double t_cur = t_start;
  const double gap = 75.0;
  std::vector<double> stops;
  for (double tp = t_p0 + gap; tp < t_var; tp += gap) stops.push_back(tp);
  stops.push_back(t_var);
  bool aligned = false;  // subtraction only once the seed tracks the mode
  for (double stop : stops) {
    if (!(stop > t_cur)) continue;
    const Trajectory wseg = integrate_trbdf2(var, w, t_cur, stop, vo);
    w = wseg.final_state();
    if (aligned || t_cur >= t_p0) {
      const Trajectory useg = integrate_trbdf2(hom, u_seed, std::max(t_cur, t_p0), stop, vo);
      const VectorXd& u = useg.final_state();
      const double lu = l_coord(u);
      if (std::abs(lu) < 1e-12 * u.norm())
        throw StructureError("transversality: degenerate unstable direction");
      w -= (l_coord(w) / lu) * u;
      aligned = true;
    }
    t_cur = stop;
  }

  // Normalize the full augmented tangent, parameter component included.
  const double n = std::sqrt(w.squaredNorm() + dr0 * dr0);
  if (n == 0.0) return 0.0;
  return w.head(N).dot(v_edge_) / n;
}

TippingDiagram CriticalSolver::sweep_diagram(const std::vector<double>& d_values,
                                             double r_max, double tol_r,
                                             int workers) const {
  if (d_values.empty())
    throw InvalidParameter("sweep_diagram: empty displacement grid");
  for (std::size_t i = 0; i + 1 < d_values.size(); ++i)
    if (!(d_values[i] < d_values[i + 1]))
      throw InvalidParameter(
          "sweep_diagram: displacements must be strictly increasing");
  if (!(r_max > 1e-2) || !(tol_r > 0.0))
    throw InvalidParameter("sweep_diagram: need r_max > 0.01 and tol_r > 0");

  TippingDiagram diag;
  diag.r_max = r_max;
  diag.tol_r = tol_r;
  diag.entries.resize(d_values.size());
  const std::vector<double> grid = log_probe_grid(r_max);

  auto run_one = [&](double d, double warm_rc) {
    DiagramEntry e;
    e.d = d;
    try {
      ModelParams q = eng_.system().params;
      q.a = 0.5 * d;
      CriticalRateResult res;
      res.d = d;
      std::vector<double> probes = grid;
      if (warm_rc > grid.front() && warm_rc < r_max) {
        probes.push_back(warm_rc);
        std::sort(probes.begin(), probes.end());
      }
      double lo = -1.0, hi = -1.0;
      for (double r : probes) {
        q.r = r;
        const Classification c = eng_.run(q).classification;
        res.history.emplace_back(r, c);
        if (c == Classification::tracking) {
          lo = r;
        } else if (c == Classification::extinct) {
          hi = r;
          break;
        } else {
          throw UnresolvedBracket(
              "sweep_diagram: probe undetermined at the maximum horizon", r,
              r);
        }
      }
      if (hi < 0.0) {
        e.tipping = false;  // no extinction up to r_max
        e.result = res;
        return e;
      }
      if (lo < 0.0)
        throw BracketError(
            "sweep_diagram: extinct already at the smallest probe rate");
      while (hi - lo > tol_r) {
        const double mid = 0.5 * (lo + hi);
        q.r = mid;
        const Classification c = eng_.run(q).classification;
        res.history.emplace_back(mid, c);
        if (c == Classification::undetermined)
          throw UnresolvedBracket(
              "sweep_diagram: midpoint undetermined at the maximum horizon",
              lo, hi);
        (c == Classification::tracking ? lo : hi) = mid;
      }
      res.r_lo = lo;
      res.r_hi = hi;
      res.r_c = 0.5 * (lo + hi);
      e.tipping = true;
      e.result = res;
    } catch (const Error& err) {
      e.tipping = false;
      e.error = err.what();
    }
    return e;
  };

  int W = workers > 0 ? workers
                      : int(std::max(1u, std::thread::hardware_concurrency()));
  W = std::min<int>(W, int(d_values.size()));

  // Static round-robin shares: each worker walks its own subsequence in
  // order, warm-starting every bracket from the previous displacement it
  // owns.  Deterministic for a fixed worker count; one worker reproduces the
  // full warm-start chain.
  auto work_share = [&](int w0) {
    double warm = -1.0;
    for (std::size_t i = w0; i < d_values.size(); i += std::size_t(W)) {
      diag.entries[i] = run_one(d_values[i], warm);
      warm = diag.entries[i].tipping ? diag.entries[i].result.r_c : -1.0;
    }
  };
  if (W <= 1) {
    work_share(0);
  } else {
    std::vector<std::future<void>> shares;
    shares.reserve(W - 1);
    for (int w = 1; w < W; ++w)
      shares.push_back(std::async(std::launch::async, work_share, w));
    work_share(0);
    for (auto& f : shares) f.get();
  }
  return diag;
}

CriticalRateResult bisect_rc(const ModelParams& p, double r_lo, double r_hi,
                             double tol_r) {
  return CriticalSolver(p).bisect_rc(p, r_lo, r_hi, tol_r);
}

HeteroclinicSolution refine_heteroclinic(const ModelParams& p, double r_init,
                                         const PullbackRun* run_init) {
  if (run_init && std::abs(run_init->params.r - r_init) > 2e-2)
    throw InvalidParameter(
        "refine_heteroclinic: run_init rate is not near r_init");
  return CriticalSolver(p).refine_heteroclinic(p, r_init);
}

TippingDiagram sweep_diagram(const ModelParams& p_base,
                             const std::vector<double>& d_values, double r_max,
                             double tol_r) {
  return CriticalSolver(p_base).sweep_diagram(d_values, r_max, tol_r);
}

double transversality(const HeteroclinicSolution& het, const ModelParams& p) {
  return CriticalSolver(p).transversality(het, p);
}

}  // namespace rtip
