#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "rtip/errors.hpp"

namespace rtip {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using SparseMat = Eigen::SparseMatrix<double>;

/// Square banded matrix with kl sub- and ku super-diagonals, stored by
/// diagonal offset. Entries outside the band read as zero.
class BandedMatrix {
 public:
  BandedMatrix() = default;
  BandedMatrix(int n, int kl, int ku);

  int rows() const { return n_; }
  int lower() const { return kl_; }
  int upper() const { return ku_; }

  double operator()(int i, int j) const;
  /// Mutable access; (i, j) must lie inside the band.
  double& at(int i, int j);

  void setZero();
  void add_diagonal(const VectorXd& d);
  void add_scalar_diagonal(double c);
  /// this += c * other; other's band must fit inside this band.
  void axpy(double c, const BandedMatrix& other);
  BandedMatrix scaled(double c) const;

  VectorXd apply(const VectorXd& x) const;
  SparseMat sparse() const;
  MatrixXd dense() const;

 private:
  int n_ = 0, kl_ = 0, ku_ = 0;
  MatrixXd data_;  // (kl+ku+1) x n; row (d + ku) holds diagonal offset d
};

/// LU factorization (via sparse LU) of a banded matrix; reusable solves.
class BandedSolver {
 public:
  explicit BandedSolver(const BandedMatrix& A);
  explicit BandedSolver(const SparseMat& A);
  VectorXd solve(const VectorXd& b) const;
  bool ok() const { return ok_; }

 private:
  Eigen::SparseLU<SparseMat> lu_;
  bool ok_ = false;
};

/// Finite-difference weights at x0 from the given nodes for derivatives
/// 0..max_order (Fornberg's recurrence). Row k holds the weights of the
/// k-th derivative.
MatrixXd fd_weights(double x0, const VectorXd& nodes, int max_order);

/// Trapezoidal quadrature weights for a strictly increasing mesh.
VectorXd trapezoid_weights(const VectorXd& mesh);

/// sqrt(sum_j w_j v_j^2)
double weighted_l2(const VectorXd& v, const VectorXd& w);

/// Cubic Hermite interpolation on [t0, t1] from endpoint values and slopes.
void hermite_eval(double t0, double t1, const VectorXd& y0, const VectorXd& f0,
                  const VectorXd& y1, const VectorXd& f1, double t,
                  VectorXd& out);
void hermite_deriv(double t0, double t1, const VectorXd& y0, const VectorXd& f0,
                   const VectorXd& y1, const VectorXd& f1, double t,
                   VectorXd& out);

/// Index of the last mesh node <= x (mesh strictly increasing); clamped to
/// [0, n-2] so it always names a valid interval.
int locate_interval(const VectorXd& mesh, double x);

}  // namespace rtip
