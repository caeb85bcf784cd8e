#include "rtip/collocation.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace rtip {

namespace {

constexpr double kSqrtEps = 1.4901161193847656e-08;  // sqrt(machine epsilon)

void fd_rhs_jac(const BvpProblem& pb, double z, const VectorXd& y,
                const VectorXd& p, const VectorXd& f0, MatrixXd& A,
                MatrixXd& P) {
  A.resize(pb.ny, pb.ny);
  P.resize(pb.ny, pb.np);
  VectorXd yp = y, pp = p, f1(pb.ny);
  for (int k = 0; k < pb.ny; ++k) {
    const double h = kSqrtEps * (1.0 + std::abs(y[k]));
    yp[k] = y[k] + h;
    pb.rhs(z, yp, p, f1);
    A.col(k) = (f1 - f0) / h;
    yp[k] = y[k];
  }
  for (int k = 0; k < pb.np; ++k) {
    const double h = kSqrtEps * (1.0 + std::abs(p[k]));
    pp[k] = p[k] + h;
    pb.rhs(z, y, pp, f1);
    P.col(k) = (f1 - f0) / h;
    pp[k] = p[k];
  }
}

void fd_conditions_jac(const BvpProblem& pb, const MatrixXd& Y,
                       const VectorXd& p, const VectorXd& g0,
                       std::vector<MatrixXd>& Gy, MatrixXd& Gp) {
  const int nc = pb.ny + pb.np;
  const int m = static_cast<int>(Y.cols());
  Gy.assign(m, MatrixXd(nc, pb.ny));
  Gp.resize(nc, pb.np);
  MatrixXd Yp = Y;
  VectorXd pp = p, g1(nc);
  for (int j = 0; j < m; ++j)
    for (int k = 0; k < pb.ny; ++k) {
      const double h = kSqrtEps * (1.0 + std::abs(Y(k, j)));
      Yp(k, j) = Y(k, j) + h;
      pb.conditions(Yp, pp, g1);
      Gy[j].col(k) = (g1 - g0) / h;
      Yp(k, j) = Y(k, j);
    }
  for (int k = 0; k < pb.np; ++k) {
    const double h = kSqrtEps * (1.0 + std::abs(p[k]));
    pp[k] = p[k] + h;
    pb.conditions(Y, pp, g1);
    Gp.col(k) = (g1 - g0) / h;
    pp[k] = p[k];
  }
}

// Indices of the condition points within the mesh (must be nodes).
std::vector<int> condition_indices(const BvpProblem& pb, const VectorXd& mesh) {
  std::vector<int> idx;
  const double span = pb.z_hi - pb.z_lo;
  for (double zc : pb.condition_points()) {
    int best = 0;
    double dist = std::numeric_limits<double>::infinity();
    for (int i = 0; i < mesh.size(); ++i) {
      const double d = std::abs(mesh[i] - zc);
      if (d < dist) {
        dist = d;
        best = i;
      }
    }
    if (dist > 1e-10 * span)
      throw InvalidParameter("collocation: condition point is not a mesh node");
    idx.push_back(best);
  }
  return idx;
}

struct NewtonState {
  VectorXd mesh;
  MatrixXd y;
  VectorXd p;
};

class Collocator {
 public:
  Collocator(const BvpProblem& pb, const BvpOptions& opt) : pb_(pb), opt_(opt) {
    pb_.validate();
    if (opt_.tol <= 0.0 || opt_.newton_tol <= 0.0)
      throw InvalidParameter("collocation: tolerances must be positive");
  }

  BvpSolution run(const BvpGuess& guess) {
    NewtonState st;
    st.mesh = setup_mesh(guess.mesh);
    st.p = guess.p;
    if (st.p.size() != pb_.np)
      throw InvalidParameter("collocation: guess has wrong parameter count");
    st.y = interp_linear(guess.mesh, guess.y, st.mesh);

    BvpSolution sol = newton(st);
    for (int pass = 0;; ++pass) {
      const VectorXd est = interval_residuals(sol);
      sol.max_residual = est.size() ? est.maxCoeff() : 0.0;
      if (sol.max_residual <= opt_.tol || opt_.max_refine_passes == 0)
        return sol;
      if (pass >= opt_.max_refine_passes)
        throw ConvergenceError(
            "collocation: refinement passes exhausted before reaching "
            "tolerance");
      st = split(sol, est);
      sol = newton(st);
    }
  }

  // One refinement pass of an existing solution.
  BvpSolution refine_once(const BvpSolution& in, double tol) {
    BvpSolution sol = in;
    const VectorXd est = interval_residuals(sol);
    sol.max_residual = est.size() ? est.maxCoeff() : 0.0;
    if (sol.max_residual <= tol) return sol;
    NewtonState st = split(sol, est, tol);
    BvpSolution out = newton(st);
    out.max_residual = interval_residuals(out).maxCoeff();
    return out;
  }

  BvpSolution newton(const NewtonState& start) {
    const int n = static_cast<int>(start.mesh.size());
    const int ny = pb_.ny, np = pb_.np;
    const int nx = ny * n + np;
    const auto cidx = condition_indices(pb_, start.mesh);

    MatrixXd y = start.y;
    VectorXd p = start.p;
    VectorXd R(nx);
    residual(start.mesh, y, p, cidx, R);
    double rnorm = R.norm();

    Eigen::SparseMatrix<double> J(nx, nx);
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    int iter = 0;
    for (; iter < opt_.max_iterations; ++iter) {
      jacobian(start.mesh, y, p, cidx, J);
      lu.compute(J);
      if (lu.info() != Eigen::Success)
        throw ConvergenceError("collocation: singular Jacobian");
      const VectorXd dx = lu.solve(-R);

      MatrixXd y_new;
      VectorXd p_new, R_new(nx);
      double alpha = 1.0, rnorm_new = 0.0;
      bool accepted = false;
      for (int halve = 0; halve <= opt_.max_halvings; ++halve) {
        apply_step(y, p, dx, alpha, y_new, p_new);
        residual(start.mesh, y_new, p_new, cidx, R_new);
        rnorm_new = R_new.norm();
        if (std::isfinite(rnorm_new) &&
            rnorm_new <= (1.0 - 0.25 * alpha) * rnorm) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) {
        // A tiny non-descending step at an already tiny residual means we
        // are at numerical convergence, not failure.
        if (step_small(dx, y, p)) break;
        std::ostringstream msg;
        msg << "collocation: damped Newton stalled at residual " << rnorm
            << " after " << iter + 1 << " iterations";
        throw ConvergenceError(msg.str());
      }
      y.swap(y_new);
      p.swap(p_new);
      R.swap(R_new);
      rnorm = rnorm_new;
      if (alpha == 1.0 && step_small(dx, y, p)) {
        ++iter;
        break;
      }
    }
    if (iter >= opt_.max_iterations) {
      std::ostringstream msg;
      msg << "collocation: Newton did not converge in " << opt_.max_iterations
          << " iterations (residual " << rnorm << ")";
      throw ConvergenceError(msg.str());
    }
    return pack(start.mesh, y, p, cidx, iter);
  }

  // Scaled collocation residual per interval, sampled off the nodes.
  VectorXd interval_residuals(const BvpSolution& sol) const {
    const int n = sol.n();
    VectorXd est(n - 1);
    VectorXd s(pb_.ny), sp(pb_.ny), fval(pb_.ny);
    for (int i = 0; i < n - 1; ++i) {
      const double h = sol.mesh[i + 1] - sol.mesh[i];
      double worst = 0.0;
      for (double tau : {0.25, 0.75}) {
        const double z = sol.mesh[i] + tau * h;
        sol.eval(z, s);
        sol.deriv(z, sp);
        pb_.rhs(z, s, sol.p, fval);
        for (int k = 0; k < pb_.ny; ++k)
          worst = std::max(worst, std::abs(sp[k] - fval[k]) /
                                      (1.0 + std::abs(fval[k])));
      }
      est[i] = worst;
    }
    return est;
  }

 private:
  VectorXd setup_mesh(const VectorXd& guess_mesh) const {
    if (guess_mesh.size() < 5)
      throw InvalidParameter("collocation: guess mesh needs >= 5 nodes");
    const double span = pb_.z_hi - pb_.z_lo;
    std::vector<double> nodes(guess_mesh.data(),
                              guess_mesh.data() + guess_mesh.size());
    for (double zc : pb_.interior_points) nodes.push_back(zc);
    std::sort(nodes.begin(), nodes.end());
    if (std::abs(nodes.front() - pb_.z_lo) > 1e-10 * span ||
        std::abs(nodes.back() - pb_.z_hi) > 1e-10 * span)
      throw InvalidParameter("collocation: guess mesh must span the domain");
    nodes.front() = pb_.z_lo;
    nodes.back() = pb_.z_hi;
    std::vector<double> out;
    for (double z : nodes)
      if (out.empty() || z - out.back() > 1e-12 * span) out.push_back(z);
    VectorXd mesh(static_cast<int>(out.size()));
    for (int i = 0; i < mesh.size(); ++i) mesh[i] = out[i];
    return mesh;
  }

  static MatrixXd interp_linear(const VectorXd& from_mesh, const MatrixXd& yin,
                                const VectorXd& to_mesh) {
    if (yin.cols() != from_mesh.size())
      throw InvalidParameter("collocation: guess values do not match its mesh");
    MatrixXd out(yin.rows(), to_mesh.size());
    for (int i = 0; i < to_mesh.size(); ++i) {
      const int j = locate_interval(from_mesh, to_mesh[i]);
      const double t =
          (to_mesh[i] - from_mesh[j]) / (from_mesh[j + 1] - from_mesh[j]);
      out.col(i) = (1.0 - t) * yin.col(j) + t * yin.col(j + 1);
    }
    return out;
  }

  void stage(const VectorXd& mesh, const MatrixXd& y, const VectorXd& p, int i,
             VectorXd& fi, VectorXd& fip, VectorXd& ym, VectorXd& fm) const {
    const double h = mesh[i + 1] - mesh[i];
    pb_.rhs(mesh[i], y.col(i), p, fi);
    pb_.rhs(mesh[i + 1], y.col(i + 1), p, fip);
    ym = 0.5 * (y.col(i) + y.col(i + 1)) - (h / 8.0) * (fip - fi);
    pb_.rhs(mesh[i] + 0.5 * h, ym, p, fm);
  }

  void residual(const VectorXd& mesh, const MatrixXd& y, const VectorXd& p,
                const std::vector<int>& cidx, VectorXd& R) const {
    const int n = static_cast<int>(mesh.size());
    const int ny = pb_.ny, np = pb_.np;
    VectorXd fi(ny), fip(ny), ym(ny), fm(ny);
    for (int i = 0; i < n - 1; ++i) {
      const double h = mesh[i + 1] - mesh[i];
      stage(mesh, y, p, i, fi, fip, ym, fm);
      R.segment(i * ny, ny) =
          (y.col(i + 1) - y.col(i)) / h - (fi + 4.0 * fm + fip) / 6.0;
    }
    MatrixXd Y(ny, cidx.size());
    for (size_t j = 0; j < cidx.size(); ++j) Y.col(j) = y.col(cidx[j]);
    VectorXd g(ny + np);
    pb_.conditions(Y, p, g);
    if (g.size() != ny + np)
      throw InvalidParameter(
          "collocation: condition count must equal ny + np");
    R.segment((n - 1) * ny, ny + np) = g;
  }

  void jacobian(const VectorXd& mesh, const MatrixXd& y, const VectorXd& p,
                const std::vector<int>& cidx,
                Eigen::SparseMatrix<double>& J) const {
    const int n = static_cast<int>(mesh.size());
    const int ny = pb_.ny, np = pb_.np;
    const int pcol = ny * n;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<size_t>(n) * ny * (2 * ny + np + 2));

    VectorXd fi(ny), fip(ny), ym(ny), fm(ny);
    MatrixXd Ai, Aip, Am, Pi, Pip, Pm;
    auto eval_jac = [&](double z, const VectorXd& yy, const VectorXd& fv,
                        MatrixXd& A, MatrixXd& P) {
      if (pb_.rhs_jac)
        pb_.rhs_jac(z, yy, p, A, P);
      else
        fd_rhs_jac(pb_, z, yy, p, fv, A, P);
    };

    for (int i = 0; i < n - 1; ++i) {
      const double h = mesh[i + 1] - mesh[i];
      stage(mesh, y, p, i, fi, fip, ym, fm);
      eval_jac(mesh[i], y.col(i), fi, Ai, Pi);
      eval_jac(mesh[i + 1], y.col(i + 1), fip, Aip, Pip);
      eval_jac(mesh[i] + 0.5 * h, ym, fm, Am, Pm);

      const MatrixXd I = MatrixXd::Identity(ny, ny);
      const MatrixXd dym_dyi = 0.5 * I + (h / 8.0) * Ai;
      const MatrixXd dym_dyip = 0.5 * I - (h / 8.0) * Aip;
      const MatrixXd Bi = -I / h - (Ai + 4.0 * Am * dym_dyi) / 6.0;
      const MatrixXd Bip = I / h - (Aip + 4.0 * Am * dym_dyip) / 6.0;
      MatrixXd Bp;
      if (np > 0) {
        const MatrixXd dym_dp = -(h / 8.0) * (Pip - Pi);
        Bp = -(Pi + 4.0 * (Pm + Am * dym_dp) + Pip) / 6.0;
      }
      for (int rr = 0; rr < ny; ++rr)
        for (int cc = 0; cc < ny; ++cc) {
          trip.emplace_back(i * ny + rr, i * ny + cc, Bi(rr, cc));
          trip.emplace_back(i * ny + rr, (i + 1) * ny + cc, Bip(rr, cc));
        }
      for (int rr = 0; rr < ny; ++rr)
        for (int cc = 0; cc < np; ++cc)
          trip.emplace_back(i * ny + rr, pcol + cc, Bp(rr, cc));
    }

    MatrixXd Y(ny, cidx.size());
    for (size_t j = 0; j < cidx.size(); ++j) Y.col(j) = y.col(cidx[j]);
    std::vector<MatrixXd> Gy;
    MatrixXd Gp;
    if (pb_.conditions_jac) {
      pb_.conditions_jac(Y, p, Gy, Gp);
    } else {
      VectorXd g0(ny + np);
      pb_.conditions(Y, p, g0);
      fd_conditions_jac(pb_, Y, p, g0, Gy, Gp);
    }
    const int row0 = (n - 1) * ny;
    for (size_t j = 0; j < cidx.size(); ++j)
      for (int rr = 0; rr < ny + np; ++rr)
        for (int cc = 0; cc < ny; ++cc) {
          const double v = Gy[j](rr, cc);
          if (v != 0.0) trip.emplace_back(row0 + rr, cidx[j] * ny + cc, v);
        }
    for (int rr = 0; rr < ny + np; ++rr)
      for (int cc = 0; cc < np; ++cc) {
        const double v = Gp(rr, cc);
        if (v != 0.0) trip.emplace_back(row0 + rr, pcol + cc, v);
      }

    J.setFromTriplets(trip.begin(), trip.end());
    J.makeCompressed();
  }

  void apply_step(const MatrixXd& y, const VectorXd& p, const VectorXd& dx,
                  double alpha, MatrixXd& y_new, VectorXd& p_new) const {
    const int ny = pb_.ny;
    const int n = static_cast<int>(y.cols());
    y_new = y;
    for (int i = 0; i < n; ++i)
      y_new.col(i) += alpha * dx.segment(i * ny, ny);
    p_new = p + alpha * dx.tail(pb_.np);
  }

  bool step_small(const VectorXd& dx, const MatrixXd& y,
                  const VectorXd& p) const {
    double xscale = 1.0;
    xscale = std::max(xscale, y.cwiseAbs().maxCoeff());
    if (p.size()) xscale = std::max(xscale, p.cwiseAbs().maxCoeff());
    return dx.lpNorm<Eigen::Infinity>() <= opt_.newton_tol * xscale;
  }

  BvpSolution pack(const VectorXd& mesh, const MatrixXd& y, const VectorXd& p,
                   const std::vector<int>& cidx, int iters) const {
    const int n = static_cast<int>(mesh.size());
    const int ny = pb_.ny, np = pb_.np;
    BvpSolution sol;
    sol.mesh = mesh;
    sol.y = y;
    sol.p = p;
    sol.newton_iterations = iters;
    sol.f.resize(ny, n);
    sol.y_mid.resize(ny, n - 1);
    sol.f_mid.resize(ny, n - 1);
    VectorXd fi(ny), fip(ny), ym(ny), fm(ny);
    for (int i = 0; i < n - 1; ++i) {
      stage(mesh, y, p, i, fi, fip, ym, fm);
      if (i == 0) sol.f.col(0) = fi;
      sol.f.col(i + 1) = fip;
      sol.y_mid.col(i) = ym;
      sol.f_mid.col(i) = fm;
    }
    MatrixXd Y(ny, cidx.size());
    for (size_t j = 0; j < cidx.size(); ++j) Y.col(j) = y.col(cidx[j]);
    VectorXd g(ny + np);
    pb_.conditions(Y, p, g);
    sol.condition_residual = g.lpNorm<Eigen::Infinity>();
    return sol;
  }

  NewtonState split(const BvpSolution& sol, const VectorXd& est) const {
    return split(sol, est, opt_.tol);
  }

  NewtonState split(const BvpSolution& sol, const VectorXd& est,
                    double tol) const {
    const int n = sol.n();
    std::vector<double> nodes;
    nodes.reserve(n * 2);
    for (int i = 0; i < n - 1; ++i) {
      nodes.push_back(sol.mesh[i]);
      if (est[i] > tol) {
        const double ratio = est[i] / (0.5 * tol);
        int pieces = static_cast<int>(std::ceil(std::pow(ratio, 0.25)));
        pieces = std::clamp(pieces, 2, 4);
        const double h = (sol.mesh[i + 1] - sol.mesh[i]) / pieces;
        for (int k = 1; k < pieces; ++k)
          nodes.push_back(sol.mesh[i] + k * h);
      }
    }
    nodes.push_back(sol.mesh[n - 1]);
    if (static_cast<int>(nodes.size()) > opt_.node_cap)
      throw RefinementLimit("collocation: node cap exceeded during refinement");

    NewtonState st;
    st.mesh.resize(static_cast<int>(nodes.size()));
    for (int i = 0; i < st.mesh.size(); ++i) st.mesh[i] = nodes[i];
    st.y.resize(pb_.ny, st.mesh.size());
    VectorXd tmp(pb_.ny);
    for (int i = 0; i < st.mesh.size(); ++i) {
      sol.eval(st.mesh[i], tmp);
      st.y.col(i) = tmp;
    }
    st.p = sol.p;
    return st;
  }

  BvpProblem pb_;
  BvpOptions opt_;
};

}  // namespace

void BvpProblem::validate() const {
  if (ny <= 0) throw InvalidParameter("collocation: ny must be positive");
  if (np < 0) throw InvalidParameter("collocation: np must be >= 0");
  if (!(z_hi > z_lo))
    throw InvalidParameter("collocation: need z_hi > z_lo");
  if (!rhs) throw InvalidParameter("collocation: rhs callback missing");
  if (!conditions)
    throw InvalidParameter("collocation: conditions callback missing");
  for (double zc : interior_points)
    if (!(zc > z_lo && zc < z_hi))
      throw InvalidParameter(
          "collocation: interior condition points must lie strictly inside "
          "the domain");
}

std::vector<double> BvpProblem::condition_points() const {
  std::vector<double> pts;
  pts.push_back(z_lo);
  for (double zc : interior_points) pts.push_back(zc);
  std::sort(pts.begin() + 1, pts.end());
  pts.push_back(z_hi);
  return pts;
}

void BvpSolution::eval(double z, VectorXd& out) const {
  const int i = locate_interval(mesh, z);
  const double zm = 0.5 * (mesh[i] + mesh[i + 1]);
  if (z <= zm)
    hermite_eval(mesh[i], zm, y.col(i), f.col(i), y_mid.col(i), f_mid.col(i),
                 z, out);
  else
    hermite_eval(zm, mesh[i + 1], y_mid.col(i), f_mid.col(i), y.col(i + 1),
                 f.col(i + 1), z, out);
}

void BvpSolution::deriv(double z, VectorXd& out) const {
  const int i = locate_interval(mesh, z);
  const double zm = 0.5 * (mesh[i] + mesh[i + 1]);
  if (z <= zm)
    hermite_deriv(mesh[i], zm, y.col(i), f.col(i), y_mid.col(i), f_mid.col(i),
                  z, out);
  else
    hermite_deriv(zm, mesh[i + 1], y_mid.col(i), f_mid.col(i), y.col(i + 1),
                  f.col(i + 1), z, out);
}

VectorXd BvpSolution::operator()(double z) const {
  VectorXd out(y.rows());
  eval(z, out);
  return out;
}

BvpSolution solve_bvp(const BvpProblem& problem, const BvpGuess& guess,
                      const BvpOptions& options) {
  Collocator c(problem, options);
  return c.run(guess);
}

BvpSolution refine_mesh(const BvpProblem& problem, const BvpSolution& solution,
                        double tol, const BvpOptions& options) {
  if (tol <= 0.0)
    throw InvalidParameter("collocation: refinement tol must be positive");
  Collocator c(problem, options);
  return c.refine_once(solution, tol);
}

}  // namespace rtip
