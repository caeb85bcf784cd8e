#include "rtip/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rtip {

namespace {

// TR-BDF2 with gamma = 2 - sqrt(2); both implicit stages share the operator
// (I - d*h*J) with d = 1 - sqrt(2)/2.
const double kGamma = 2.0 - std::sqrt(2.0);
const double kD = 1.0 - std::sqrt(2.0) / 2.0;
const double kC1 = (std::sqrt(2.0) + 1.0) / 2.0;  // BDF2 weight of the stage
const double kC2 = (std::sqrt(2.0) - 1.0) / 2.0;  // BDF2 weight of y_n
// Difference b - bhat against the embedded first-alternative weights.
const double kE1 = std::sqrt(2.0) / 4.0 - (4.0 - std::sqrt(2.0)) / 12.0;
const double kE2 = -1.0 / 3.0;
const double kE3 = kD - kD / 3.0;

class Wrms {
 public:
  Wrms(const IntegratorOptions& opt, int n) : rtol_(opt.rtol) {
    if (opt.atol_vec.size() == static_cast<Eigen::Index>(n))
      atol_ = opt.atol_vec;
    else
      atol_ = VectorXd::Constant(n, opt.atol);
  }
  void set_scale(const VectorXd& y) {
    scale_ = atol_ + rtol_ * y.cwiseAbs();
  }
  void widen_scale(const VectorXd& y) {
    scale_ = scale_.cwiseMax(atol_ + rtol_ * y.cwiseAbs());
  }
  double norm(const VectorXd& v) const {
    return std::sqrt(v.cwiseQuotient(scale_).squaredNorm() / v.size());
  }

 private:
  double rtol_;
  VectorXd atol_;
  VectorXd scale_;
};

}  // namespace

void Trajectory::append(double t, const VectorXd& y, const VectorXd& f,
                        int cap) {
  ++appended_;
  if ((appended_ - 1) % stride_ != 0) return;
  t_.push_back(t);
  y_.push_back(y);
  f_.push_back(f);
  if (static_cast<int>(t_.size()) >= cap && cap > 3) {
    // Keep even indices (first sample survives); halve the density.
    size_t w = 0;
    for (size_t i = 0; i < t_.size(); i += 2, ++w) {
      t_[w] = t_[i];
      y_[w] = std::move(y_[i]);
      f_[w] = std::move(f_[i]);
    }
    t_.resize(w);
    y_.resize(w);
    f_.resize(w);
    stride_ *= 2;
  }
}

void Trajectory::force_append(double t, const VectorXd& y, const VectorXd& f) {
  if (!t_.empty() && t_.back() == t) return;
  t_.push_back(t);
  y_.push_back(y);
  f_.push_back(f);
}

void Trajectory::eval(double t, VectorXd& out) const {
  if (t_.empty()) throw InvalidParameter("trajectory: empty");
  const double span = t_.back() - t_.front();
  if (t < t_.front() - 1e-9 * span || t > t_.back() + 1e-9 * span)
    throw DomainError("trajectory: query time outside the sampled range");
  t = std::clamp(t, t_.front(), t_.back());
  const auto it = std::upper_bound(t_.begin(), t_.end(), t);
  int i = static_cast<int>(it - t_.begin()) - 1;
  i = std::clamp(i, 0, static_cast<int>(t_.size()) - 2);
  hermite_eval(t_[i], t_[i + 1], y_[i], f_[i], y_[i + 1], f_[i + 1], t, out);
}

VectorXd Trajectory::operator()(double t) const {
  VectorXd out(y_.empty() ? 0 : y_.front().size());
  eval(t, out);
  return out;
}

Trajectory integrate_trbdf2(OdeSystem& sys, const VectorXd& y0, double t0,
                            double t1, const IntegratorOptions& opt) {
  const int n = sys.dim();
  if (y0.size() != n)
    throw InvalidParameter("integrator: initial state has wrong dimension");
  if (!(t1 > t0)) throw InvalidParameter("integrator: need t1 > t0");
  if (!y0.allFinite())
    throw InvalidParameter("integrator: initial state not finite");
  const double span = t1 - t0;
  const double h_max = opt.h_max > 0.0 ? opt.h_max : 0.5 * span;

  Trajectory traj;
  IntegratorStats& st = traj.mutable_stats();
  Wrms wrms(opt, n);

  VectorXd y = y0, fn(n);
  sys.eval(t0, y, fn);
  traj.append(t0, y, fn, opt.store_cap);

  double t = t0;
  double h;
  if (opt.h_init > 0.0) {
    h = opt.h_init;
  } else {
    wrms.set_scale(y);
    const double rate = wrms.norm(fn);
    h = rate > 0.0 ? 0.01 / rate : 0.01 * span;
  }
  h = std::clamp(h, 1e-12 * span, h_max);

  bool have_fact = false;
  bool fresh_fact = false;
  double alpha_fact = 0.0;

  VectorXd yg(n), y1(n), fg(n), f1(n), rhs(n), resid(n), delta(n), err(n),
      err_f(n);

  // Simplified Newton for one implicit stage: solves x - d*h*f(ts, x) = b.
  auto stage = [&](double ts, const VectorXd& b, VectorXd& x,
                   const VectorXd& pred) -> bool {
    x = pred;
    double prev = 0.0;
    for (int it = 0; it < 8; ++it) {
      if (!x.allFinite() || !sys.domain_ok(x)) return false;
      sys.eval(ts, x, fg);
      resid = x - kD * h * fg - b;
      sys.solve(resid, delta);
      x -= delta;
      ++st.newton_iterations;
      const double nrm = wrms.norm(delta);
      if (!std::isfinite(nrm)) return false;
      if (nrm < 0.03) {
        if (!x.allFinite() || !sys.domain_ok(x)) return false;
        return true;
      }
      if (it > 0 && nrm > 0.9 * prev) return false;
      prev = nrm;
    }
    return false;
  };

  while (t < t1 - 1e-14 * span) {
    if (st.steps + st.rejected > opt.max_steps)
      throw StiffnessError("integrator: step budget exhausted", t);
    const double h_floor =
        std::max(1e-14 * span, 16.0 * std::numeric_limits<double>::epsilon() *
                                   std::max(std::abs(t), 1.0));
    if (h < h_floor)
      throw StiffnessError("integrator: step size underflow", t);
    h = std::min(h, sys.suggest_h_cap(t, y));
    h = std::min(h, t1 - t);

    wrms.set_scale(y);
    const double alpha = kD * h;
    if (!have_fact || std::abs(alpha / alpha_fact - 1.0) > 0.3) {
      sys.factor(t, y, alpha);
      alpha_fact = alpha;
      have_fact = true;
      fresh_fact = true;
      ++st.factorizations;
    }

    // Stage 1: trapezoidal to t + gamma*h.
    const double tg = t + kGamma * h;
    rhs = y + kD * h * fn;
    bool ok = stage(tg, rhs, yg, y + kGamma * h * fn);
    // Stage 2: BDF2 to t + h.
    if (ok) {
      rhs = kC1 * yg - kC2 * y;
      ok = stage(t + h, rhs, y1, yg + ((1.0 - kGamma) / kGamma) * (yg - y));
    }
    if (!ok) {
      if (!fresh_fact) {
        sys.factor(t, y, alpha);
        alpha_fact = alpha;
        fresh_fact = true;
        ++st.factorizations;
        continue;  // retry the same h with a fresh operator
      }
      ++st.rejected;
      h *= 0.3;
      continue;
    }

    sys.eval(t + h, y1, f1);
    sys.eval(tg, yg, fg);
    err = h * (kE1 * fn + kE2 * fg + kE3 * f1);
    sys.solve(err, err_f);  // stiffness filter (I - d h J)^{-1}
    wrms.widen_scale(y1);
    const double errn = wrms.norm(err_f);

    if (!std::isfinite(errn) || errn > 1.0) {
      ++st.rejected;
      const double fac = std::isfinite(errn)
                             ? std::clamp(0.9 * std::pow(errn, -1.0 / 3.0),
                                          0.2, 0.9)
                             : 0.2;
      h *= fac;
      fresh_fact = false;  // operator is stale relative to the new h
      continue;
    }

    t += h;
    y.swap(y1);
    fn.swap(f1);
    ++st.steps;
    traj.append(t, y, fn, opt.store_cap);
    fresh_fact = false;

    const double fac =
        std::clamp(0.9 * std::pow(std::max(errn, 1e-10), -1.0 / 3.0), 0.3,
                   2.5);
    h = std::min(h * fac, h_max);
  }
  traj.force_append(t, y, fn);
  return traj;
}

}  // namespace rtip
