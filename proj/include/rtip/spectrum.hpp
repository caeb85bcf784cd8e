#pragma once

#include <limits>
#include <vector>

#include "rtip/mol.hpp"
#include "rtip/pulses.hpp"

namespace rtip {

/// Point spectrum of the linearization about a pulse, to the right of the
/// essential-spectrum boundary -beta^2, with the hypothesis checks evaluated
/// on it: h2 (no point spectrum at all, the extinction criterion), h3
/// (exactly one positive eigenvalue, the edge criterion), h4 (nothing at or
/// above zero, the base criterion). Only the verdict matching the pulse that
/// produced the report is meaningful.
struct SpectrumReport {
  double ess_boundary = 0.0;
  std::vector<double> eigenvalues;  // descending
  std::vector<int> indices;         // oscillation index, 0 = nodeless mode
  bool h2 = false;
  bool h3 = false;
  bool h4 = false;
  double lambda_lo = 0.0;
  double lambda_hi = 0.0;
  int n_scan = 0;
};

/// Total rotation theta(-Z) - theta(+Z) >= 0 accumulated by the angle
///
///   theta' = (lambda - f_u(u*(z), H(z))) cos^2 theta - sin^2 theta
///
/// started at the decaying-direction angle atan(sqrt(lambda + beta^2))
/// (nudged off the equilibrium by 1e-8 in the direction of rotation).
/// Requires lambda > -beta^2 so both endpoint saddles are hyperbolic.
double angle_rotation(double lambda_spec, const PulseProfile& pulse);

/// Sampled angle trajectory, with the compactified coordinate s = tanh(z/2)
/// alongside z for phase-portrait exports.
struct AngleTrace {
  std::vector<double> z;
  std::vector<double> s;
  std::vector<double> theta;
};
AngleTrace angle_trace(double lambda_spec, const PulseProfile& pulse);

/// Scans the angle match function on [lambda_lo, lambda_hi] (defaults:
/// -beta^2 + 1e-4 when lambda_lo is NaN, 0.5, 400 points), brackets the
/// pi-multiple crossings and bisects each eigenvalue to 1e-9. With
/// cross_check every dense-oracle eigenvalue inside the window must be
/// reproduced within 1e-3, else InconsistencyError.
SpectrumReport find_eigenvalues(
    const PulseProfile& pulse,
    double lambda_lo = std::numeric_limits<double>::quiet_NaN(),
    double lambda_hi = 0.5, int n_scan = 400, bool cross_check = true);

/// Symmetric second-order discretization of p -> p'' + f_u(u*, H) p on a
/// uniform grid with homogeneous far-field conditions; returns all
/// eigenvalues > -beta^2 + 1e-4, descending. Requires n_grid >= 500.
std::vector<double> dense_oracle(const PulseProfile& pulse, int n_grid);

/// Semidiscrete Jacobian assembled to a dense (N+1) x (N+1) matrix.
MatrixXd dense_jacobian(const MolJacobian& J);

enum class EigSide { right, left };

struct Eigenpair {
  double value = 0.0;
  VectorXd vector;  // unit length, largest-magnitude component positive
};

/// The unique eigenpair with Re(lambda) > 1e-10 (checked against the full
/// dense spectrum; zero, several, or a complex one -> StructureError).
Eigenpair unstable_eigenpair(const MolJacobian& J,
                             EigSide side = EigSide::right);

struct Rank1Projections {
  MatrixXd P_unstable;  // v l^T / (l^T v)
  MatrixXd P_stable;    // I - P_unstable
};
Rank1Projections rank1_projections(const MolJacobian& J);

}  // namespace rtip
