#pragma once

#include "rtip/collocation.hpp"
#include "rtip/model.hpp"

namespace rtip {

enum class PulseKind { trivial, unstable, stable };

/// Steady pulse of u'' + f(u, H(z)) = 0 on [-Z, Z], assembled from the doubled
/// half-line boundary value problem.  The half-line solution is kept so the
/// profile can be evaluated between nodes.
struct PulseProfile {
  PulseKind kind = PulseKind::trivial;
  ModelParams params;
  VectorXd z;  // full-line mesh, symmetric about 0
  VectorXd u;
  VectorXd v;      // u'
  double xi = 0.0;  // peak value u(0)
  BvpSolution half;  // 4-component doubled system on [-Z, 0]

  double eval_u(double zq) const;
  double eval_v(double zq) const;
};

/// Solves for the stable or unstable pulse.  Throws WrongBranch when Newton
/// collapses onto the trivial state, and propagates solver errors.
PulseProfile compute_pulse(PulseKind kind, const ModelParams& p);

/// Zero profile on the given mesh (the third steady state).
PulseProfile trivial_profile(const VectorXd& mesh, const ModelParams& p);

struct PointwiseOrder {
  double min_gap = 0.0;          // min over the mesh of (upper - lower)
  double argmin_z = 0.0;
  double interior_min_gap = 0.0;  // same, restricted to |z| <= Z - 10
  bool verdict = false;           // min_gap > 0
};

/// Verifies upper(z) > lower(z) pointwise on the union of both meshes.
PointwiseOrder pointwise_order(const PulseProfile& upper,
                               const PulseProfile& lower);

}  // namespace rtip
