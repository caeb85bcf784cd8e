#include "rtip/spectrum.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <functional>
#include <future>
#include <thread>

#include <boost/numeric/odeint.hpp>

namespace rtip {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct AngleEndpoints {
  double theta0 = 0.0;   // start angle at z = -Z (already nudged)
  double theta_end = 0.0;  // unwrapped angle at z = +Z
};

// Integrates the angle equation across [-Z, Z]. The endpoint angles satisfy
// tan^2(theta) = lambda + beta^2; the start sits on the decaying direction,
// nudged off the equilibrium in the direction the flow rotates.
AngleEndpoints integrate_angle(double lambda, const PulseProfile& pulse,
                               AngleTrace* trace) {
  const ModelParams& p = pulse.params;
  const double b2 = p.beta * p.beta;
  if (!(lambda > -b2))
    throw DomainError("spectrum: lambda must lie right of -beta^2");

  using state_t = std::array<double, 1>;
  auto rhs = [&](const state_t& th, state_t& dth, double z) {
    const double q = reaction_du(pulse.eval_u(z), habitat(z, p.L), p);
    const double c = std::cos(th[0]);
    const double s = std::sin(th[0]);
    dth[0] = (lambda - q) * c * c - s * s;
  };

  AngleEndpoints out;
  out.theta0 = std::atan(std::sqrt(lambda + b2)) - 1e-8;
  state_t th{out.theta0};

  namespace ode = boost::numeric::odeint;
  auto stepper =
      ode::make_controlled(1e-12, 1e-10, ode::runge_kutta_dopri5<state_t>());
  try {
    if (trace) {
      auto observe = [&](const state_t& s, double z) {
        trace->z.push_back(z);
        trace->s.push_back(std::tanh(0.5 * z));
        trace->theta.push_back(s[0]);
      };
      ode::integrate_adaptive(stepper, rhs, th, -p.Z, p.Z, 0.05, observe);
    } else {
      ode::integrate_adaptive(stepper, rhs, th, -p.Z, p.Z, 0.05);
    }
  } catch (const std::exception& e) {
    throw ConvergenceError(std::string("spectrum: angle integration failed: ") +
                           e.what());
  }
  out.theta_end = th[0];
  return out;
}

// Match function whose pi-multiples are the eigenvalues: distance of the
// arrival angle from the repelling (decaying as z -> +inf) direction.
double match_value(double lambda, const PulseProfile& pulse) {
  const double b2 = pulse.params.beta * pulse.params.beta;
  const AngleEndpoints ends = integrate_angle(lambda, pulse, nullptr);
  return ends.theta_end + std::atan(std::sqrt(lambda + b2));
}

// Deterministic parallel map of fn over n grid indices.
std::vector<double> parallel_map(int n, const std::function<double(int)>& fn) {
  std::vector<double> out(n);
  const int workers = std::max(
      1, std::min(n, static_cast<int>(std::thread::hardware_concurrency())));
  std::vector<std::future<void>> futs;
  futs.reserve(workers);
  std::atomic<int> next{0};
  for (int w = 0; w < workers; ++w)
    futs.push_back(std::async(std::launch::async, [&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1))
        out[i] = fn(i);
    }));
  for (auto& f : futs) f.get();  // rethrows the first worker failure
  return out;
}

}  // namespace

double angle_rotation(double lambda_spec, const PulseProfile& pulse) {
  const AngleEndpoints ends = integrate_angle(lambda_spec, pulse, nullptr);
  // The start nudge can leave an O(1e-8) negative residue; rotation is
  // nonnegative by construction, so clamp it away.
  return std::max(0.0, ends.theta0 - ends.theta_end);
}

AngleTrace angle_trace(double lambda_spec, const PulseProfile& pulse) {
  AngleTrace trace;
  integrate_angle(lambda_spec, pulse, &trace);
  return trace;
}

SpectrumReport find_eigenvalues(const PulseProfile& pulse, double lambda_lo,
                                double lambda_hi, int n_scan,
                                bool cross_check) {
  const ModelParams& p = pulse.params;
  const double b2 = p.beta * p.beta;
  if (std::isnan(lambda_lo)) lambda_lo = -b2 + 1e-4;
  if (!(lambda_lo > -b2))
    throw InvalidParameter("spectrum: scan window must start right of -beta^2");
  if (!(lambda_hi > lambda_lo))
    throw InvalidParameter("spectrum: empty scan window");
  if (n_scan < 2) throw InvalidParameter("spectrum: need at least two scan points");

  SpectrumReport rep;
  rep.ess_boundary = -b2;
  rep.lambda_lo = lambda_lo;
  rep.lambda_hi = lambda_hi;
  rep.n_scan = n_scan;

  std::vector<double> grid(n_scan);
  for (int i = 0; i < n_scan; ++i)
    grid[i] = lambda_lo + (lambda_hi - lambda_lo) * i / (n_scan - 1);
  const std::vector<double> mvals =
      parallel_map(n_scan, [&](int i) { return match_value(grid[i], pulse); });

  // The match function increases with lambda; an eigenvalue of index j sits
  // where it crosses -j*pi. Collect every integer multiple crossed per cell.
  std::vector<std::pair<double, int>> found;  // (lambda, index)
  for (int i = 0; i + 1 < n_scan; ++i) {
    const double m_lo = mvals[i], m_hi = mvals[i + 1];
    const double lo = std::min(m_lo, m_hi), hi = std::max(m_lo, m_hi);
    for (int k = static_cast<int>(std::ceil(lo / kPi));
         k <= static_cast<int>(std::floor(hi / kPi)); ++k) {
      const double target = k * kPi;
      if (target <= lo || target > hi) continue;  // half-open: no duplicates
      double a = grid[i], b = grid[i + 1];
      double fa = m_lo - target;
      while (b - a > 1e-9) {
        const double mid = 0.5 * (a + b);
        const double fm = match_value(mid, pulse) - target;
        if ((fa <= 0.0) == (fm <= 0.0)) {
          a = mid;
          fa = fm;
        } else {
          b = mid;
        }
      }
      found.emplace_back(0.5 * (a + b), -k);
    }
  }
  std::sort(found.begin(), found.end(),
            [](const auto& x, const auto& y) { return x.first > y.first; });
  for (const auto& [lam, idx] : found) {
    rep.eigenvalues.push_back(lam);
    rep.indices.push_back(idx);
  }

  rep.h2 = rep.eigenvalues.empty();
  rep.h3 = std::count_if(rep.eigenvalues.begin(), rep.eigenvalues.end(),
                         [](double l) { return l > 0.0; }) == 1;
  rep.h4 = std::all_of(rep.eigenvalues.begin(), rep.eigenvalues.end(),
                       [](double l) { return l < 0.0; });

  if (cross_check) {
    for (const double lam : dense_oracle(pulse, 6001)) {
      if (lam < lambda_lo + 2e-3 || lam > lambda_hi - 2e-3) continue;
      const bool hit =
          std::any_of(rep.eigenvalues.begin(), rep.eigenvalues.end(),
                      [&](double l) { return std::abs(l - lam) <= 1e-3; });
      if (!hit)
        throw InconsistencyError(
            "spectrum: dense-oracle eigenvalue missed by the angle scan "
            "(grid too coarse)");
    }
  }
  return rep;
}

std::vector<double> dense_oracle(const PulseProfile& pulse, int n_grid) {
  if (n_grid < 500)
    throw InvalidParameter("spectrum: oracle grid must have >= 500 points");
  const ModelParams& p = pulse.params;
  const double b2 = p.beta * p.beta;
  const double h = 2.0 * p.Z / (n_grid + 1);
  VectorXd diag(n_grid), sub(n_grid - 1);
  for (int i = 0; i < n_grid; ++i) {
    const double z = -p.Z + (i + 1) * h;
    diag[i] = -2.0 / (h * h) + reaction_du(pulse.eval_u(z), habitat(z, p.L), p);
    if (i + 1 < n_grid) sub[i] = 1.0 / (h * h);
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw ConvergenceError("spectrum: tridiagonal eigensolver failed");
  std::vector<double> out;
  for (int i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()[i] > -b2 + 1e-4) out.push_back(es.eigenvalues()[i]);
  std::sort(out.begin(), out.end(), std::greater<double>());
  return out;
}

MatrixXd dense_jacobian(const MolJacobian& J) {
  const int N = J.A.rows();
  MatrixXd M = MatrixXd::Zero(N + 1, N + 1);
  M.topLeftCorner(N, N) = J.A.dense();
  M.topRightCorner(N, 1) = J.dV_dgamma;
  M(N, N) = J.dgamma_dgamma;
  return M;
}

namespace {

// The unique real eigenvalue with Re > 1e-10, verified against the complete
// dense spectrum.
double checked_unstable_value(const MatrixXd& M) {
  const Eigen::EigenSolver<MatrixXd> es(M, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success)
    throw ConvergenceError("spectrum: dense eigensolver failed");
  int count = 0;
  double re = 0.0, im = 0.0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    if (es.eigenvalues()[i].real() > 1e-10) {
      ++count;
      re = es.eigenvalues()[i].real();
      im = es.eigenvalues()[i].imag();
    }
  }
  if (count == 0)
    throw StructureError("spectrum: no unstable eigenvalue");
  if (count > 1)
    throw StructureError("spectrum: multiple unstable eigenvalues");
  if (std::abs(im) > 1e-10)
    throw StructureError("spectrum: unstable eigenvalue is not real");
  return re;
}

VectorXd inverse_iteration(const MatrixXd& M, double nu) {
  MatrixXd S = M;
  // Detune the shift so the factorization stays comfortably regular.
  S.diagonal().array() -= nu + 1e-10 * std::max(1.0, std::abs(nu));
  const Eigen::PartialPivLU<MatrixXd> lu(S);
  VectorXd x = VectorXd::Ones(M.rows()).normalized();
  for (int it = 0; it < 3; ++it) {
    x = lu.solve(x);
    const double n = x.norm();
    if (!(n > 0.0) || !x.allFinite())
      throw ConvergenceError("spectrum: inverse iteration broke down");
    x /= n;
  }
  int imax = 0;
  x.cwiseAbs().maxCoeff(&imax);
  if (x[imax] < 0.0) x = -x;
  return x;
}

}  // namespace

Eigenpair unstable_eigenpair(const MolJacobian& J, EigSide side) {
  MatrixXd M = dense_jacobian(J);
  const double nu = checked_unstable_value(M);
  if (side == EigSide::left) M.transposeInPlace();
  Eigenpair out;
  out.value = nu;
  out.vector = inverse_iteration(M, nu);
  const double scale =
      M.cwiseAbs().rowwise().sum().maxCoeff();  // inf-norm of M
  if ((M * out.vector - nu * out.vector).norm() > 1e-6 * scale)
    throw ConvergenceError("spectrum: unstable eigenpair residual too large");
  return out;
}

Rank1Projections rank1_projections(const MolJacobian& J) {
  const MatrixXd M = dense_jacobian(J);
  const double nu = checked_unstable_value(M);
  const VectorXd v = inverse_iteration(M, nu);
  const VectorXd l = inverse_iteration(M.transpose(), nu);
  const double denom = l.dot(v);
  if (std::abs(denom) < 1e-10)
    throw StructureError("spectrum: unstable eigenpair is numerically defective");
  Rank1Projections out;
  out.P_unstable = (v * l.transpose()) / denom;
  out.P_stable =
      MatrixXd::Identity(M.rows(), M.cols()) - out.P_unstable;
  return out;
}

}  // namespace rtip
