#pragma once

#include <functional>
#include <vector>

#include "rtip/errors.hpp"
#include "rtip/linalg.hpp"

namespace rtip {

/// Two-point boundary value problem y' = f(z, y, p) with np unknown scalar
/// parameters and ny + np side conditions imposed at the endpoints and at
/// designated interior points.
///
/// The condition callback receives y sampled at the condition points packed
/// column-wise as [z_lo, interior points (ascending), z_hi] and must return
/// exactly ny + np residuals.
struct BvpProblem {
  int ny = 0;
  int np = 0;
  double z_lo = 0.0;
  double z_hi = 1.0;
  std::vector<double> interior_points;

  using Rhs =
      std::function<void(double, const VectorXd&, const VectorXd&, VectorXd&)>;
  /// A = df/dy (ny x ny), P = df/dp (ny x np).  Optional; finite differences
  /// are used when absent.
  using RhsJac = std::function<void(double, const VectorXd&, const VectorXd&,
                                    MatrixXd&, MatrixXd&)>;
  using Conditions =
      std::function<void(const MatrixXd&, const VectorXd&, VectorXd&)>;
  /// Gy[j] = dg/dy(point j) ((ny+np) x ny), Gp = dg/dp ((ny+np) x np).
  using ConditionsJac = std::function<void(
      const MatrixXd&, const VectorXd&, std::vector<MatrixXd>&, MatrixXd&)>;

  Rhs rhs;
  RhsJac rhs_jac;
  Conditions conditions;
  ConditionsJac conditions_jac;

  /// Throws InvalidParameter on structural problems (bad domain, interior
  /// points outside the open interval, missing callbacks).
  void validate() const;

  int n_condition_points() const {
    return 2 + static_cast<int>(interior_points.size());
  }
  /// Condition point abscissae in packed order.
  std::vector<double> condition_points() const;
};

struct BvpGuess {
  VectorXd mesh;  // strictly increasing, spans [z_lo, z_hi], >= 5 nodes
  MatrixXd y;     // ny x mesh.size()
  VectorXd p;     // np
};

struct BvpOptions {
  double tol = 1e-8;           // target max scaled collocation residual
  int max_iterations = 50;     // Newton iterations per mesh
  int max_halvings = 30;       // damping steps per Newton iteration
  int node_cap = 20000;        // refinement aborts beyond this
  int max_refine_passes = 12;  // 0 = single Newton solve, no refinement
  double newton_tol = 1e-11;   // relative step size declaring convergence
};

/// Converged collocation solution.  Self-contained: the two-piece cubic
/// Hermite interpolant (through the midpoint stage) evaluates without the
/// originating problem.
struct BvpSolution {
  VectorXd mesh;   // n nodes
  MatrixXd y;      // ny x n
  MatrixXd y_mid;  // ny x (n-1) collocation stages
  MatrixXd f;      // ny x n rhs at nodes
  MatrixXd f_mid;  // ny x (n-1) rhs at stages
  VectorXd p;

  double condition_residual = 0.0;  // max-norm of the side conditions
  double max_residual = 0.0;        // max scaled collocation residual estimate
  int newton_iterations = 0;

  int n() const { return static_cast<int>(mesh.size()); }
  void eval(double z, VectorXd& out) const;
  void deriv(double z, VectorXd& out) const;
  VectorXd operator()(double z) const;
};

/// Damped-Newton collocation solve (3-stage Lobatto IIIA) with residual-driven
/// mesh refinement until every subinterval's scaled residual is below tol.
BvpSolution solve_bvp(const BvpProblem& problem, const BvpGuess& guess,
                      const BvpOptions& options = {});

/// One refinement pass: returns the solution unchanged when every interval
/// already meets tol, otherwise splits the offending intervals and re-solves.
BvpSolution refine_mesh(const BvpProblem& problem, const BvpSolution& solution,
                        double tol, const BvpOptions& options = {});

}  // namespace rtip
