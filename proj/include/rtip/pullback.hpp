#pragma once

#include "rtip/integrator.hpp"
#include "rtip/mol.hpp"

namespace rtip {

enum class Classification { tracking, extinct, undetermined };

struct PullbackDiagnostics {
  double dist_end = 0.0;   // ||U(t_end) - u2*||, trapezoid-weighted L2
  double norm_end = 0.0;   // ||U(t_end)||, same norm
  double sup_error = 0.0;  // sup over samples of max-node |U - u2*|
  double sup_error_time = 0.0;
};

/// One pullback-attractor run: started on the unstable manifold of the
/// stable pulse at the pre-sweep rest value and integrated through the
/// habitat shift.
struct PullbackRun {
  ModelParams params;
  double T_L = 0.0;
  double t_end = 0.0;   // horizon actually used (after any doubling)
  double delta1 = 0.0;  // tracking threshold
  double delta2 = 0.0;  // extinction threshold
  Classification classification = Classification::undetermined;
  Trajectory trajectory;
  PullbackDiagnostics diagnostics;
};

/// Threshold classification; Undetermined is a value, not an error. Throws
/// StructureError if both balls claim the state (they are disjoint by
/// construction of the thresholds).
Classification classify(const PullbackDiagnostics& d, double delta1,
                        double delta2);

struct EngineOptions {
  double eps = 1e-8;        // manifold offset
  bool dense_check = true;  // verify the manifold direction against the
                            // dense unstable eigenpair at construction
};

/// Shared machinery for pullback runs: the semidiscrete system with both
/// fixed points attached, classification thresholds, and the unstable
/// manifold direction. One engine serves any (r, a): the fixed points and
/// the spatial operator at the rest values do not depend on either.
class PullbackEngine {
 public:
  explicit PullbackEngine(const ModelParams& base,
                          const EngineOptions& opt = {});

  const SemidiscreteSystem& system() const { return sys_; }
  double delta1() const { return delta1_; }
  double delta2() const { return delta2_; }

  /// Unit unstable eigenvector of the Jacobian at (V_s, -a), eigenvalue 2r,
  /// computed through the bordered structure: X = (w, 1)/|(w, 1)| with
  /// (2r I - A) w the gamma column. Largest component positive; the gamma
  /// component must come out positive (the branch that enters the ramp).
  VectorXd manifold_direction(double r) const;

  /// Full pipeline: initialize at (V_s, -a) + eps*X at T_L = min(-30/r, -50),
  /// integrate, classify; Undetermined doubles the horizon up to 16000.
  /// Requires t_end >= 1000.
  PullbackRun run(const ModelParams& p, double t_end = 1000.0) const;

  /// Sup-over-time max-node deviation from the stable pulse; requires the
  /// run to classify as Tracking.
  double tracking_error(const ModelParams& p, double t_end = 1000.0) const;

 private:
  SemidiscreteSystem sys_;
  EngineOptions opt_;
  double delta1_ = 0.0;
  double delta2_ = 0.0;
};

/// One-shot wrappers (each builds a fresh engine; use PullbackEngine for
/// sweeps).
PullbackRun compute_pullback(const ModelParams& p, double t_end = 1000.0);
double tracking_error(const ModelParams& p, double t_end = 1000.0);

}  // namespace rtip
