#include "rtip/model.hpp"

#include <cmath>

namespace rtip {

void ModelParams::validate() const {
  auto need = [](bool ok, const char* msg) {
    if (!ok) throw InvalidParameter(std::string("model: ") + msg);
  };
  need(std::isfinite(beta) && beta > 0.0, "beta must be positive");
  need(std::isfinite(lambda_r) && lambda_r > 0.0, "lambda_r must be positive");
  need(std::isfinite(L) && L > 0.0, "L must be positive");
  need(std::isfinite(a) && a > 0.0, "a must be positive");
  need(std::isfinite(r) && r > 0.0, "r must be positive");
  need(std::isfinite(Z) && Z > 0.0, "Z must be positive");
  need(tol_bvp > 0.0 && tol_ode > 0.0 && tol_newton > 0.0,
       "tolerances must be positive");
}

namespace {
double sech(double t) {
  const double e = std::exp(-std::abs(t));
  return 2.0 * e / (1.0 + e * e);
}
}  // namespace

double habitat(double x, double L) {
  if (!(L > 0.0)) throw InvalidParameter("habitat: L must be positive");
  // Product form of (tanh(x+L/2) - tanh(x-L/2)) / (2 tanh(L/2)).  The tanh
  // difference cancels to zero once both arguments saturate, while this keeps
  // the exp(-2|x|) tail down to underflow.
  const double ch = std::cosh(0.5 * L);
  return (ch * sech(x + 0.5 * L)) * (ch * sech(x - 0.5 * L));
}

double reaction(double u, double h, const ModelParams& p) {
  return -p.beta * p.beta * u + p.lambda_r * h * u * u - u * u * u;
}

double reaction_du(double u, double h, const ModelParams& p) {
  return -p.beta * p.beta + 2.0 * p.lambda_r * h * u - 3.0 * u * u;
}

double shift_velocity(double gamma, double a) {
  if (!(a > 0.0)) throw InvalidParameter("shift_velocity: a must be positive");
  if (std::abs(gamma) > a)
    throw DomainError("shift_velocity: |gamma| > a is outside the ramp range");
  // Factored form: vanishes exactly at gamma = +-a, where a - gamma^2/a
  // would be off by one ulp and seed spurious growth along the unstable
  // gamma direction.
  return (a - gamma) * (a + gamma) / a;
}

double ramp(double t, double r, double a) {
  if (!(r > 0.0)) throw InvalidParameter("ramp: r must be positive");
  if (!(a > 0.0)) throw InvalidParameter("ramp: a must be positive");
  return a * std::tanh(r * t);
}

}  // namespace rtip
