#include "rtip/pulses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace rtip {

namespace {

// Doubled formulation on [-Z, 0]: y = (u, v, w, x) with w(z) = u(-z) and
// x(z) = v(-z).  Matching at 0 plus saddle-direction decay rows at -Z close
// the system; the peak value enters as the free parameter.
BvpProblem pulse_problem(const ModelParams& p) {
  BvpProblem pb;
  pb.ny = 4;
  pb.np = 1;
  pb.z_lo = -p.Z;
  pb.z_hi = 0.0;
  pb.rhs = [p](double z, const VectorXd& y, const VectorXd&, VectorXd& f) {
    f[0] = y[1];
    f[1] = -reaction(y[0], habitat(z, p.L), p);
    f[2] = -y[3];
    f[3] = reaction(y[2], habitat(-z, p.L), p);
  };
  pb.rhs_jac = [p](double z, const VectorXd& y, const VectorXd&, MatrixXd& A,
                   MatrixXd& P) {
    A.setZero(4, 4);
    A(0, 1) = 1.0;
    A(1, 0) = -reaction_du(y[0], habitat(z, p.L), p);
    A(2, 3) = -1.0;
    A(3, 2) = reaction_du(y[2], habitat(-z, p.L), p);
    P.setZero(4, 1);
  };
  pb.conditions = [p](const MatrixXd& Y, const VectorXd& par, VectorXd& c) {
    c[0] = p.beta * Y(0, 0) - Y(1, 0);  // decay of u as z -> -inf
    c[1] = p.beta * Y(2, 0) + Y(3, 0);  // decay of the reflected branch
    c[2] = Y(0, 1) - Y(2, 1);           // u and w meet at 0
    c[3] = Y(1, 1) - Y(3, 1);           // derivatives match at 0
    c[4] = Y(0, 1) - par[0];            // peak pinning
  };
  pb.conditions_jac = [p](const MatrixXd&, const VectorXd&,
                          std::vector<MatrixXd>& Gy, MatrixXd& Gp) {
    Gy.assign(2, MatrixXd::Zero(5, 4));
    Gy[0](0, 0) = p.beta;
    Gy[0](0, 1) = -1.0;
    Gy[0](1, 2) = p.beta;
    Gy[0](1, 3) = 1.0;
    Gy[1](2, 0) = 1.0;
    Gy[1](2, 2) = -1.0;
    Gy[1](3, 1) = 1.0;
    Gy[1](3, 3) = -1.0;
    Gy[1](4, 0) = 1.0;
    Gp.setZero(5, 1);
    Gp(4, 0) = -1.0;
  };
  return pb;
}

VectorXd half_line_mesh(double Z) {
  // Fine across the habitat patch and core, geometrically graded into the
  // coarse far tail (abrupt spacing jumps make the differentiation matrices
  // built on this mesh badly non-normal).
  std::vector<double> nodes;
  nodes.push_back(0.0);
  double z = 0.0;
  double h = 0.1;
  while (z > -40.0 + 1e-9) {
    z -= h;
    nodes.push_back(z);
  }
  while (z > -Z) {
    h = std::min(1.3 * h, 2.5);
    z -= h;
    if (z - (-Z) < 0.4 * h) z = -Z;
    nodes.push_back(z);
  }
  std::reverse(nodes.begin(), nodes.end());
  VectorXd mesh(static_cast<int>(nodes.size()));
  for (int i = 0; i < mesh.size(); ++i) mesh[i] = nodes[i];
  return mesh;
}

BvpGuess pulse_guess(PulseKind kind, const ModelParams& p) {
  BvpGuess guess;
  guess.mesh = half_line_mesh(p.Z);
  const int n = static_cast<int>(guess.mesh.size());
  guess.y.resize(4, n);
  guess.p.resize(1);
  if (kind == PulseKind::unstable) {
    const double xi = 0.15;
    guess.p[0] = xi;
    for (int i = 0; i < n; ++i) {
      const double z = guess.mesh[i];
      const double s = 1.0 / std::cosh(z);
      guess.y(0, i) = xi * s;
      guess.y(1, i) = -xi * s * std::tanh(z);
      guess.y(2, i) = guess.y(0, i);
      guess.y(3, i) = -guess.y(1, i);
    }
  } else {
    const double xi = 0.56;
    guess.p[0] = xi;
    auto sech2 = [](double t) {
      const double c = std::cosh(t);
      return 1.0 / (c * c);
    };
    for (int i = 0; i < n; ++i) {
      const double z = guess.mesh[i];
      guess.y(0, i) =
          0.5 * xi * (std::tanh(z + 0.5 * p.L) - std::tanh(z - 0.5 * p.L));
      guess.y(1, i) = 0.5 * xi * (sech2(z + 0.5 * p.L) - sech2(z - 0.5 * p.L));
      guess.y(2, i) = guess.y(0, i);
      guess.y(3, i) = -guess.y(1, i);
    }
  }
  return guess;
}

}  // namespace

double PulseProfile::eval_u(double zq) const {
  if (kind == PulseKind::trivial) return 0.0;
  VectorXd y(4);
  half.eval(zq <= 0.0 ? zq : -zq, y);
  return zq <= 0.0 ? y[0] : y[2];
}

double PulseProfile::eval_v(double zq) const {
  if (kind == PulseKind::trivial) return 0.0;
  VectorXd y(4);
  half.eval(zq <= 0.0 ? zq : -zq, y);
  return zq <= 0.0 ? y[1] : y[3];
}

PulseProfile compute_pulse(PulseKind kind, const ModelParams& p) {
  p.validate();
  if (kind == PulseKind::trivial)
    throw InvalidParameter("pulses: use trivial_profile for the zero state");

  BvpOptions opt;
  opt.tol = p.tol_bvp;
  opt.newton_tol = p.tol_newton;
  const BvpProblem pb = pulse_problem(p);
  BvpSolution half = solve_bvp(pb, pulse_guess(kind, p), opt);

  if (std::abs(half.p[0]) < 1e-4)
    throw WrongBranch("pulses: Newton collapsed onto the trivial state");

  PulseProfile prof;
  prof.kind = kind;
  prof.params = p;
  prof.xi = half.p[0];
  prof.half = std::move(half);

  const int nh = prof.half.n();
  const int n = 2 * nh - 1;
  prof.z.resize(n);
  prof.u.resize(n);
  prof.v.resize(n);
  for (int i = 0; i < nh; ++i) {
    prof.z[i] = prof.half.mesh[i];
    prof.u[i] = prof.half.y(0, i);
    prof.v[i] = prof.half.y(1, i);
  }
  for (int i = 1; i < nh; ++i) {
    const int j = nh - 1 - i;  // mirror node in the half mesh
    prof.z[nh - 1 + i] = -prof.half.mesh[j];
    prof.u[nh - 1 + i] = prof.half.y(2, j);
    prof.v[nh - 1 + i] = prof.half.y(3, j);
  }
  return prof;
}

PulseProfile trivial_profile(const VectorXd& mesh, const ModelParams& p) {
  PulseProfile prof;
  prof.kind = PulseKind::trivial;
  prof.params = p;
  prof.z = mesh;
  prof.u = VectorXd::Zero(mesh.size());
  prof.v = VectorXd::Zero(mesh.size());
  prof.xi = 0.0;
  return prof;
}

PointwiseOrder pointwise_order(const PulseProfile& upper,
                               const PulseProfile& lower) {
  std::vector<double> zs(upper.z.data(), upper.z.data() + upper.z.size());
  zs.insert(zs.end(), lower.z.data(), lower.z.data() + lower.z.size());
  std::sort(zs.begin(), zs.end());
  zs.erase(std::unique(zs.begin(), zs.end()), zs.end());

  const double Z =
      std::min(std::abs(zs.front()), std::abs(zs.back()));
  PointwiseOrder rec;
  rec.min_gap = std::numeric_limits<double>::infinity();
  rec.interior_min_gap = rec.min_gap;
  for (double z : zs) {
    const double gap = upper.eval_u(z) - lower.eval_u(z);
    if (gap < rec.min_gap) {
      rec.min_gap = gap;
      rec.argmin_z = z;
    }
    if (std::abs(z) <= Z - 10.0)
      rec.interior_min_gap = std::min(rec.interior_min_gap, gap);
  }
  rec.verdict = rec.min_gap > 0.0;
  return rec;
}

}  // namespace rtip
