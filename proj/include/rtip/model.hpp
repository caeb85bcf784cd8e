#pragma once

#include "rtip/errors.hpp"

namespace rtip {

/// Parameters of the shifting-habitat reaction-diffusion model
///
///   u_t = u_zz + r g(gamma) u_z + f(u, H(z)),   gamma_t = r g(gamma)
///
/// in the frame attached to the habitat, together with the solver tolerances
/// shared across the pipeline. The habitat shifts by d = 2a in total.
struct ModelParams {
  double beta = 0.15;     // linear decay rate of small populations
  double lambda_r = 0.6;  // growth coefficient (defaults to 4*beta)
  double L = 25.0;        // habitat patch width
  double a = 15.65;       // half of the total shift distance d
  double r = 1.0;         // shift rate
  double Z = 150.0;       // half-width of the truncated spatial domain

  double tol_bvp = 1e-8;     // collocation residual target
  double tol_ode = 1e-6;     // relative ODE tolerance (absolute = 1e-2 * rel)
  double tol_newton = 1e-11; // Newton residual target

  void validate() const;
};

/// Habitat quality profile, normalized so H(+-L/2) = 1/2 and H(0) ~ 1.
double habitat(double x, double L);

/// Bistable reaction term f(u, h) = -beta^2 u + lambda_r h u^2 - u^3.
double reaction(double u, double h, const ModelParams& p);

/// Partial derivative f_u(u, h) = -beta^2 + 2 lambda_r h u - 3 u^2.
double reaction_du(double u, double h, const ModelParams& p);

/// Habitat shift velocity g(gamma) = a - gamma^2/a, evaluated so that
/// g(+-a) is exactly zero in floating point. Requires |gamma| <= a.
double shift_velocity(double gamma, double a);

/// Ramp solution gamma(t) = a tanh(r t) of gamma_t = r g(gamma).
double ramp(double t, double r, double a);

}  // namespace rtip
