#pragma once

#include <memory>

#include "rtip/integrator.hpp"
#include "rtip/model.hpp"
#include "rtip/pulses.hpp"

namespace rtip {

/// Method-of-lines discretization of the moving-frame equation on the
/// nonuniform pulse mesh.  State y = (V_0..V_{N-1}, gamma).
struct SemidiscreteSystem {
  ModelParams params;
  VectorXd mesh;     // N strictly increasing nodes
  VectorXd hvals;    // H(z_j)
  VectorXd weights;  // trapezoidal quadrature weights on the mesh
  BandedMatrix D1{1, 0, 0};
  BandedMatrix D2{1, 0, 0};

  // Fixed points at the rest values of the shift, filled by
  // attach_fixed_points: V_s approximates the stable pulse (relevant at
  // gamma = -a), V_u the edge pulse (relevant at gamma = +a).
  VectorXd V_s;
  VectorXd V_u;

  int N() const { return static_cast<int>(mesh.size()); }
  int dim() const { return N() + 1; }
  /// Trapezoid-weighted L2 norm of a nodal field.
  double norm(const VectorXd& V) const { return weighted_l2(V, weights); }
};

/// Five-point (degree-4) differentiation matrices on the given mesh.
SemidiscreteSystem build_system(const VectorXd& pulse_mesh,
                                const ModelParams& p);

/// Newton-refines the pulse profiles into semidiscrete fixed points and
/// caches them on the system.
void attach_fixed_points(SemidiscreteSystem& sys, const PulseProfile& stable,
                         const PulseProfile& unstable);

/// Pulses + mesh + matrices + fixed points for the given parameters.
SemidiscreteSystem make_default_system(const ModelParams& p);

/// dy/dt of the full state: V' = D2 V + r g(gamma) D1 V + f(V, H),
/// gamma' = r g(gamma).  Throws DomainError well outside |gamma| <= a.
void rhs(const SemidiscreteSystem& sys, const VectorXd& y, VectorXd& dydt);

/// Jacobian of rhs: banded V-block, dense gamma column, scalar corner.
struct MolJacobian {
  BandedMatrix A{1, 0, 0};   // d(V')/dV
  VectorXd dV_dgamma;        // d(V')/dgamma
  double dgamma_dgamma = 0;  // d(gamma')/dgamma
};
MolJacobian jacobian(const SemidiscreteSystem& sys, const VectorXd& y);

struct FixedPointResult {
  VectorXd V;
  int iterations = 0;
  double residual = 0.0;
};

/// Newton solve of the V-block at frozen gamma (must be a rest value of the
/// shift, i.e. +-a).  WrongBranch when the peak drifts from the guess branch.
FixedPointResult find_fixed_point(const SemidiscreteSystem& sys,
                                  const VectorXd& V_guess, double gamma);

/// OdeSystem adapter over a SemidiscreteSystem; the shifted operator solve
/// eliminates the gamma border first, then one banded solve for the V block.
class MolOdeSystem final : public OdeSystem {
 public:
  explicit MolOdeSystem(const SemidiscreteSystem& sys) : sys_(&sys) {}

  int dim() const override { return sys_->dim(); }
  void eval(double t, const VectorXd& y, VectorXd& f) const override;
  void factor(double t, const VectorXd& y, double alpha) override;
  void solve(const VectorXd& b, VectorXd& x) const override;
  bool domain_ok(const VectorXd& y) const override;
  double suggest_h_cap(double t, const VectorXd& y) const override;

 private:
  const SemidiscreteSystem* sys_;
  std::unique_ptr<BandedSolver> lu_;
  VectorXd c_;  // alpha-scaled gamma column of the factored state
  double s_ = 0.0;
  double alpha_ = 0.0;
};

/// Convenience wrapper around integrate_trbdf2 for the semidiscrete system.
Trajectory integrate(const SemidiscreteSystem& sys, const VectorXd& y0,
                     double t0, double t1, const IntegratorOptions& opt = {});

}  // namespace rtip
