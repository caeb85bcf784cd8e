#pragma once

#include <limits>
#include <vector>

#include "rtip/errors.hpp"
#include "rtip/linalg.hpp"

namespace rtip {

/// Implicitly integrated vector field.  The integrator asks for the right-hand
/// side and for solves with the shifted operator (I - alpha*J(t, y)); how the
/// Jacobian is formed and factored is the system's business.
class OdeSystem {
 public:
  virtual ~OdeSystem() = default;
  virtual int dim() const = 0;
  virtual void eval(double t, const VectorXd& y, VectorXd& f) const = 0;
  /// Factor (I - alpha*J) at the given state for subsequent solve() calls.
  virtual void factor(double t, const VectorXd& y, double alpha) = 0;
  virtual void solve(const VectorXd& b, VectorXd& x) const = 0;
  /// Newton iterates outside this region abort the step (retried smaller).
  virtual bool domain_ok(const VectorXd&) const { return true; }
  /// Upper bound on the next step size.  Systems with locally unstable modes
  /// should bound h by the reciprocal growth rate: the embedded error
  /// estimate cannot see a departing mode whose amplitude is still below the
  /// tolerance, and an L-stable scheme parks on the unstable state forever if
  /// the step leaves the exponential regime.
  virtual double suggest_h_cap(double /*t*/, const VectorXd& /*y*/) const {
    return std::numeric_limits<double>::infinity();
  }
};

struct IntegratorOptions {
  double rtol = 1e-6;
  double atol = 1e-8;
  VectorXd atol_vec;      // optional per-component absolute tolerance
  double h_init = 0.0;    // 0 = automatic
  double h_max = 0.0;     // 0 = half the span
  long max_steps = 2000000;
  int store_cap = 200000;  // sample thinning threshold
};

struct IntegratorStats {
  long steps = 0;
  long rejected = 0;
  long newton_iterations = 0;
  long factorizations = 0;
};

/// Accepted-step samples (t, y, y') with cubic-Hermite dense output.  Long
/// runs are thinned: past store_cap samples, every other sample is dropped
/// and the storage stride doubles.  The first and last samples are always
/// kept.
class Trajectory {
 public:
  int size() const { return static_cast<int>(t_.size()); }
  double t_begin() const { return t_.front(); }
  double t_end() const { return t_.back(); }
  const std::vector<double>& times() const { return t_; }
  const VectorXd& state(int i) const { return y_[i]; }
  const VectorXd& derivative(int i) const { return f_[i]; }
  const VectorXd& final_state() const { return y_.back(); }
  const IntegratorStats& stats() const { return stats_; }

  void eval(double t, VectorXd& out) const;
  VectorXd operator()(double t) const;

  // Assembly, used by the integrator.
  void append(double t, const VectorXd& y, const VectorXd& f, int cap);
  void force_append(double t, const VectorXd& y, const VectorXd& f);
  IntegratorStats& mutable_stats() { return stats_; }

 private:
  std::vector<double> t_;
  std::vector<VectorXd> y_, f_;
  long stride_ = 1;
  long appended_ = 0;
  IntegratorStats stats_;
};

/// Adaptive TR-BDF2 (L-stable one-step pair) from t0 to t1 > t0.
/// Throws StiffnessError on step-size underflow, carrying the failure time.
Trajectory integrate_trbdf2(OdeSystem& sys, const VectorXd& y0, double t0,
                            double t1, const IntegratorOptions& opt = {});

}  // namespace rtip
