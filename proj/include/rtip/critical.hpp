#pragma once

#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "rtip/pullback.hpp"
#include "rtip/spectrum.hpp"

namespace rtip {

/// Outcome of locating the critical rate over one bracket.
struct CriticalRateResult {
  double d = 0.0;     // displacement 2a
  double r_lo = 0.0;  // final bracket: Tracking at r_lo,
  double r_hi = 0.0;  // Extinct at r_hi
  double r_c = 0.0;
  enum class Method { bisection, miss_function } method = Method::bisection;
  // Secant slope of the miss function at r_c; NaN for plain bisection.
  double miss_slope = std::numeric_limits<double>::quiet_NaN();
  // Every classified rate in evaluation order (endpoints first).
  std::vector<std::pair<double, Classification>> history;
};

/// Pulse-to-pulse connecting trajectory at the refined critical rate, in the
/// time origin where gamma crosses zero at t = 0.
struct HeteroclinicSolution {
  double r_c = 0.0;
  double T = 0.0;        // reported half-width of the connection window
  double t_match = 0.0;  // time of the projective re-injection
  double miss = 0.0;     // final miss-function residual
  double miss_slope = 0.0;
  double residual_minus = 0.0;   // ||U(-T) - stable pulse||
  double residual_plus = 0.0;    // ||U(+T) - edge pulse||
  double gamma0_residual = 0.0;  // |gamma(0)|
  Trajectory trajectory;
  /// TruncationError when the endpoint or phase residuals exceed their
  /// published bounds (1e-4 / 1e-3 / 1e-8).
  void validate() const;
};

struct DiagramEntry {
  double d = 0.0;
  bool tipping = false;
  CriticalRateResult result;  // meaningful when tipping
  std::string error;          // nonempty when this displacement failed
};

struct TippingDiagram {
  std::vector<DiagramEntry> entries;
  double r_max = 0.0;
  double tol_r = 0.0;
};

/// Critical-rate machinery sharing one pullback engine and one set of edge
/// eigenvectors across bisections, refinements, and diagram sweeps.  The cost
/// of construction (pulse solves plus a dense eigensolve at the edge state)
/// is paid once; everything downstream reuses it, which is what makes the
/// displacement sweep affordable.
class CriticalSolver {
 public:
  explicit CriticalSolver(const ModelParams& base,
                          const EngineOptions& opt = {});

  const PullbackEngine& engine() const { return eng_; }
  /// Positive eigenvalue of the edge state's frozen linearization.
  double edge_eigenvalue() const { return nu_; }

  /// Miss function at rate r: the component of the forward-shot unstable
  /// manifold along the edge state's unstable direction at time T_eval after
  /// the ramp midpoint, normalized by the distance to the edge state.  Its
  /// root in r is the critical rate.
  double miss(const ModelParams& p, double rtol = 0.0) const;

  CriticalRateResult bisect_rc(const ModelParams& p, double r_lo, double r_hi,
                               double tol_r) const;

  HeteroclinicSolution refine_heteroclinic(const ModelParams& p,
                                           double r_init) const;

  /// Inner product of the normalized r-variation along the connection with
  /// the edge state's unit unstable eigenvector.  t_var = 0 selects the
  /// matching epoch min(kMissTime, het.T); dr0 scales the initial parameter
  /// perturbation (the output is invariant under positive scaling and zero
  /// for dr0 = 0).
  double transversality(const HeteroclinicSolution& het, const ModelParams& p,
                        double t_var = 0.0, double dr0 = 1.0) const;

  TippingDiagram sweep_diagram(const std::vector<double>& d_values,
                               double r_max, double tol_r,
                               int workers = 0) const;

  /// Evaluation time (after the ramp midpoint) of the miss function.  Late
  /// enough that the unstable component dominates the stable remnant, early
  /// enough that the exponential amplification of r-roundoff has not yet
  /// saturated the miss function.
  static constexpr double kMissTime = 400.0;

 private:
  PullbackEngine eng_;
  EngineOptions opt_;
  double nu_ = 0.0;     // edge unstable eigenvalue
  VectorXd v_edge_;     // unit right eigenvector (field block)
  VectorXd l_edge_;     // unit left eigenvector (field block)
  double l_d1vu_ = 0.0; // cached l^T D1 V_u for the gamma border component

  struct Shot {
    Trajectory traj;
    double t0 = 0.0;  // time of the computed gamma zero-crossing
  };
  Shot shoot(const ModelParams& p, double t_after, double rtol) const;
  double miss_of(const Shot& s, double r, double a) const;
  VectorXd left_eigenvector_full(double r) const;
};

// Free functions mirroring the operation set, each building a solver.
CriticalRateResult bisect_rc(const ModelParams& p, double r_lo, double r_hi,
                             double tol_r);
HeteroclinicSolution refine_heteroclinic(const ModelParams& p, double r_init,
                                         const PullbackRun* run_init = nullptr);
TippingDiagram sweep_diagram(const ModelParams& p_base,
                             const std::vector<double>& d_values, double r_max,
                             double tol_r);
double transversality(const HeteroclinicSolution& het, const ModelParams& p);

}  // namespace rtip
