// Acceptance gate: measures every reference criterion end-to-end against the
// published values and prints one PASS/FAIL line per criterion.  Nonzero
// exit when any line fails; an exception inside a criterion fails that line
// without stopping the rest.
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "rtip/collocation.hpp"
#include "rtip/critical.hpp"
#include "rtip/pullback.hpp"
#include "rtip/spectrum.hpp"

using namespace rtip;

namespace {

int failures = 0;

double now_s() {
  using clock = std::chrono::steady_clock;
  static const clock::time_point t0 = clock::now();
  return std::chrono::duration<double>(clock::now() - t0).count();
}

void report(int idx, const char* name, bool pass, const std::string& detail,
            double seconds) {
  if (!pass) ++failures;
  std::printf("[%s] %d. %s: %s  (%.1f s)\n", pass ? "PASS" : "FAIL", idx, name,
              detail.c_str(), seconds);
  std::fflush(stdout);
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

template <typename Fn>
void criterion(int idx, const char* name, Fn body) {
  const double t = now_s();
  try {
    const Outcome o = body();
    report(idx, name, o.pass, o.detail, now_s() - t);
  } catch (const std::exception& e) {
    report(idx, name, false, std::string("exception: ") + e.what(),
           now_s() - t);
  }
}

}  // namespace

int main() {
  const ModelParams p;

  std::optional<PulseProfile> stable, unstable;
  criterion(1, "pulse maxima", [&]() -> Outcome {
    stable = compute_pulse(PulseKind::stable, p);
    unstable = compute_pulse(PulseKind::unstable, p);
    const double max2 = stable->u.maxCoeff(), max1 = unstable->u.maxCoeff();
    return {std::abs(max2 - 0.5588) <= 2e-3 && std::abs(max1 - 0.0657) <= 2e-3,
            fmt("max(u2*) = %.6f (ref 0.5588 +- 2e-3), max(u1*) = %.6f "
                "(ref 0.0657 +- 2e-3)",
                max2, max1)};
  });

  criterion(2, "edge and base spectra", [&]() -> Outcome {
    if (!stable || !unstable) return {false, "pulse computation failed"};
    const SpectrumReport edge = find_eigenvalues(*unstable);
    const SpectrumReport base = find_eigenvalues(*stable);
    const std::vector<double> dense = dense_oracle(*unstable, 4001);
    int positive = 0;
    for (double ev : edge.eigenvalues) positive += ev > 0.0;
    double dense_dev = 0.0;
    for (std::size_t i = 0; i < std::min(dense.size(), edge.eigenvalues.size());
         ++i)
      dense_dev = std::max(dense_dev, std::abs(dense[i] - edge.eigenvalues[i]));
    const bool pass = edge.eigenvalues.size() == 2 && positive == 1 &&
                      std::abs(edge.eigenvalues[0] - 0.026) <= 3e-3 &&
                      std::abs(edge.eigenvalues[1] + 6.8e-3) <= 2e-3 &&
                      edge.eigenvalues[1] > -p.beta * p.beta &&
                      base.eigenvalues.empty() &&
                      dense.size() == edge.eigenvalues.size() &&
                      dense_dev <= 1e-3;
    return {pass,
            fmt("edge = {%.6f, %.6f} (ref 0.026, -0.0068), %d positive, "
                "base count = %zu, dense deviation = %.2e",
                edge.eigenvalues.size() > 0 ? edge.eigenvalues[0] : 0.0,
                edge.eigenvalues.size() > 1 ? edge.eigenvalues[1] : 0.0,
                positive, base.eigenvalues.size(), dense_dev)};
  });

  // Shared by criteria 3-8: the solver owns the pullback engine.
  std::optional<CriticalSolver> solver;
  std::optional<CriticalRateResult> bis;
  std::optional<HeteroclinicSolution> het;
  criterion(3, "critical rate", [&]() -> Outcome {
    solver.emplace(p);
    bis = solver->bisect_rc(p, 0.9, 1.1, 1e-4);
    het = solver->refine_heteroclinic(p, bis->r_c);
    const bool ref_ok = std::abs(bis->r_c - 0.9670) <= 5e-3;
    const bool agree_ok = std::abs(het->r_c - bis->r_c) <= 1e-3;
    return {ref_ok && agree_ok,
            fmt("bisection r_c = %.6f vs published 0.9670 +- 0.005 (%s); "
                "refinement r_c = %.6f, |difference| = %.2e <= 1e-3 (%s)",
                bis->r_c, ref_ok ? "ok" : "OUTSIDE", het->r_c,
                std::abs(het->r_c - bis->r_c), agree_ok ? "ok" : "OUTSIDE")};
  });

  criterion(4, "bracketing classifications", [&]() -> Outcome {
    if (!solver || !bis) return {false, "critical rate unavailable"};
    ModelParams q = p;
    q.r = bis->r_c - 0.01;
    const Classification lo = solver->engine().run(q).classification;
    q.r = bis->r_c + 0.01;
    const Classification hi = solver->engine().run(q).classification;
    return {lo == Classification::tracking && hi == Classification::extinct,
            fmt("r_c - 0.01 -> %s, r_c + 0.01 -> %s",
                lo == Classification::tracking ? "tracking" : "NOT tracking",
                hi == Classification::extinct ? "extinct" : "NOT extinct")};
  });

  std::optional<TippingDiagram> diag;
  criterion(5, "tipping diagram", [&]() -> Outcome {
    if (!solver) return {false, "solver unavailable"};
    const std::vector<double> d_grid = {28.0, 32.0, 36.0, 40.0, 50.0, 60.0};
    diag = solver->sweep_diagram(d_grid, 50.0, 1e-3, 4);
    bool pass = diag->entries.size() == d_grid.size();
    std::string detail;
    double prev_rc = 1e30;
    for (const DiagramEntry& e : diag->entries) {
      if (!e.error.empty()) {
        pass = false;
        detail += fmt("d=%g ERROR(%s)  ", e.d, e.error.c_str());
        continue;
      }
      if (e.d < 30.0) {
        pass = pass && !e.tipping;
        detail += fmt("d=%g no tipping  ", e.d);
      } else {
        pass = pass && e.tipping && e.result.r_c > 0.0 &&
               e.result.r_c <= 50.0 && e.result.r_c <= prev_rc + 1e-9;
        detail += fmt("d=%g r_c=%.4f  ", e.d, e.result.r_c);
        prev_rc = e.result.r_c;
      }
    }
    return {pass, detail};
  });

  criterion(6, "transversality", [&]() -> Outcome {
    if (!solver || !het) return {false, "connection unavailable"};
    const double tv = solver->transversality(*het, p);
    const bool pass = tv < 0.0 && std::abs(tv) >= 0.0012 &&
                      std::abs(tv) <= 0.012 && tv * het->miss_slope > 0.0;
    return {pass,
            fmt("value = %+.4e (published -0.0037, band [0.0012, 0.012]), "
                "miss slope %+.3e, signs %s",
                tv, het->miss_slope,
                tv * het->miss_slope > 0.0 ? "match" : "DIFFER")};
  });

  criterion(7, "O(r) tracking error", [&]() -> Outcome {
    if (!solver) return {false, "engine unavailable"};
    double err[3];
    const double rates[3] = {0.005, 0.01, 0.02};
    for (int i = 0; i < 3; ++i) {
      ModelParams q = p;
      q.r = rates[i];
      err[i] = solver->engine().tracking_error(q);
    }
    const double q1 = err[1] / err[0], q2 = err[2] / err[1];
    return {q1 >= 1.5 && q1 <= 2.5 && q2 >= 1.5 && q2 <= 2.5,
            fmt("errors = {%.3e, %.3e, %.3e}, ratios = {%.2f, %.2f} "
                "(band [1.5, 2.5])",
                err[0], err[1], err[2], q1, q2)};
  });

  criterion(8, "property suite", [&]() -> Outcome {
    if (!solver) return {false, "system unavailable"};
    const SemidiscreteSystem& sys = solver->engine().system();
    const int N = sys.N();
    std::string detail;
    bool pass = true;

    // stencils exact on quartics (relative to the derivative scale)
    double stencil_err = 0.0;
    for (int k = 0; k <= 4; ++k) {
      VectorXd f(N), d1(N), d2(N);
      double s1 = 1.0, s2 = 1.0;
      for (int j = 0; j < N; ++j) {
        const double z = sys.mesh[j];
        f[j] = std::pow(z, k);
        d1[j] = k == 0 ? 0.0 : k * std::pow(z, k - 1);
        d2[j] = k <= 1 ? 0.0 : k * (k - 1) * std::pow(z, k - 2);
        s1 = std::max(s1, std::abs(d1[j]));
        s2 = std::max(s2, std::abs(d2[j]));
      }
      stencil_err = std::max(
          stencil_err, (sys.D1.apply(f) - d1).lpNorm<Eigen::Infinity>() / s1);
      stencil_err = std::max(
          stencil_err, (sys.D2.apply(f) - d2).lpNorm<Eigen::Infinity>() / s2);
    }
    pass = pass && stencil_err <= 1e-9;
    detail += fmt("stencil %.1e  ", stencil_err);

    // collocation order on a smooth reference problem
    {
      BvpProblem pb;
      pb.ny = 2;
      pb.z_lo = 0.0;
      pb.z_hi = 1.0;
      pb.rhs = [](double, const VectorXd& y, const VectorXd&, VectorXd& f) {
        f[0] = y[1];
        f[1] = -std::sin(y[0]);
      };
      pb.conditions = [](const MatrixXd& Y, const VectorXd&, VectorXd& c) {
        c[0] = Y(0, 0);
        c[1] = Y(0, 1) - 1.0;
      };
      auto uniform_guess = [&pb](int n) {
        BvpGuess g;
        g.mesh = VectorXd::LinSpaced(n, pb.z_lo, pb.z_hi);
        g.y = MatrixXd::Zero(2, n);
        for (int i = 0; i < n; ++i) g.y(0, i) = g.mesh[i];
        g.y.row(1).setOnes();
        g.p = VectorXd(0);
        return g;
      };
      BvpOptions ref_opt;
      ref_opt.tol = 1e-11;
      const BvpSolution ref = solve_bvp(pb, uniform_guess(513), ref_opt);
      BvpOptions fixed;
      fixed.max_refine_passes = 0;
      std::vector<double> errs;
      VectorXd v(2), w(2);
      for (int n : {9, 17, 33}) {
        const BvpSolution sol = solve_bvp(pb, uniform_guess(n), fixed);
        double e = 0.0;
        for (double z = 0.0; z <= 1.0; z += 1.0 / 64.0) {
          sol.eval(z, v);
          ref.eval(z, w);
          e = std::max(e, std::abs(v[0] - w[0]));
        }
        errs.push_back(e);
      }
      const double slope = 0.5 * (std::log2(errs[0] / errs[1]) +
                                  std::log2(errs[1] / errs[2]));
      pass = pass && std::abs(slope - 4.0) <= 0.3;
      detail += fmt("order %.2f  ", slope);
    }

    // Jacobian against finite differences at a generic interior state
    {
      VectorXd y(N + 1);
      for (int j = 0; j < N; ++j)
        y[j] = sys.V_s[j] + 0.01 * std::sin(0.1 * sys.mesh[j]);
      y[N] = 0.3 * p.a;
      const MatrixXd Jd = dense_jacobian(jacobian(sys, y));
      VectorXd fp(N + 1), fm(N + 1), yp = y, ym = y;
      double jac_err = 0.0;
      const double h = 1e-6;
      for (int j = 0; j <= N; ++j) {
        yp[j] += h;
        ym[j] -= h;
        rhs(sys, yp, fp);
        rhs(sys, ym, fm);
        jac_err = std::max(
            jac_err,
            (Jd.col(j) - (fp - fm) / (2 * h)).lpNorm<Eigen::Infinity>());
        yp[j] = y[j];
        ym[j] = y[j];
      }
      pass = pass && jac_err <= 1e-6;
      detail += fmt("jacobian %.1e  ", jac_err);
    }

    // equilibrium preservation over [0, 100]
    {
      VectorXd y0(N + 1);
      y0.head(N) = sys.V_s;
      y0[N] = -p.a;
      const Trajectory traj = integrate(sys, y0, 0.0, 100.0);
      const VectorXd& yT = traj.final_state();
      const double drift =
          std::max((yT.head(N) - sys.V_s).lpNorm<Eigen::Infinity>(),
                   std::abs(yT[N] + p.a));
      pass = pass && drift <= 1e-6;
      detail += fmt("equilibrium %.1e  ", drift);
    }

    // spectral projections idempotent
    {
      VectorXd y_edge(N + 1);
      y_edge.head(N) = sys.V_u;
      y_edge[N] = p.a;
      const Rank1Projections proj = rank1_projections(jacobian(sys, y_edge));
      const double idem = std::max(
          (proj.P_unstable * proj.P_unstable - proj.P_unstable)
              .lpNorm<Eigen::Infinity>(),
          (proj.P_stable * proj.P_stable - proj.P_stable)
              .lpNorm<Eigen::Infinity>());
      pass = pass && idem <= 1e-10;
      detail += fmt("projection %.1e  ", idem);
    }

    // bisection bracket invariant across the full diagram sweep
    if (diag) {
      bool invariant = true;
      for (const DiagramEntry& e : diag->entries) {
        double max_track = 0.0, min_ext = 1e30;
        for (const auto& [r, c] : e.result.history) {
          if (c == Classification::tracking)
            max_track = std::max(max_track, r);
          if (c == Classification::extinct) min_ext = std::min(min_ext, r);
        }
        invariant = invariant && max_track < min_ext;
      }
      pass = pass && invariant;
      detail += fmt("bracket invariant %s", invariant ? "held" : "VIOLATED");
    } else {
      pass = false;
      detail += "bracket invariant UNAVAILABLE (no sweep)";
    }

    return {pass, detail};
  });

  if (failures) std::printf("%d criterion(s) failed\n", failures);
  return failures ? 1 : 0;
}
