#include "rtip/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace rtip {

BandedMatrix::BandedMatrix(int n, int kl, int ku) : n_(n), kl_(kl), ku_(ku) {
  if (n <= 0 || kl < 0 || ku < 0)
    throw InvalidParameter("banded: bad dimensions");
  data_ = MatrixXd::Zero(kl + ku + 1, n);
}

double BandedMatrix::operator()(int i, int j) const {
  const int d = j - i;
  if (d < -kl_ || d > ku_) return 0.0;
  return data_(d + ku_, i);
}

double& BandedMatrix::at(int i, int j) {
  const int d = j - i;
  if (i < 0 || i >= n_ || j < 0 || j >= n_ || d < -kl_ || d > ku_)
    throw InvalidParameter("banded: entry outside band");
  return data_(d + ku_, i);
}

void BandedMatrix::setZero() { data_.setZero(); }

void BandedMatrix::add_diagonal(const VectorXd& d) {
  if (d.size() != n_) throw InvalidParameter("banded: diagonal size mismatch");
  data_.row(ku_) += d.transpose();
}

void BandedMatrix::add_scalar_diagonal(double c) {
  data_.row(ku_).array() += c;
}

void BandedMatrix::axpy(double c, const BandedMatrix& other) {
  if (other.n_ != n_ || other.kl_ > kl_ || other.ku_ > ku_)
    throw InvalidParameter("banded: axpy band mismatch");
  for (int d = -other.kl_; d <= other.ku_; ++d)
    data_.row(d + ku_) += c * other.data_.row(d + other.ku_);
}

BandedMatrix BandedMatrix::scaled(double c) const {
  BandedMatrix out = *this;
  out.data_ *= c;
  return out;
}

VectorXd BandedMatrix::apply(const VectorXd& x) const {
  if (x.size() != n_) throw InvalidParameter("banded: apply size mismatch");
  VectorXd y = VectorXd::Zero(n_);
  for (int i = 0; i < n_; ++i) {
    const int jlo = std::max(0, i - kl_);
    const int jhi = std::min(n_ - 1, i + ku_);
    double s = 0.0;
    for (int j = jlo; j <= jhi; ++j) s += data_(j - i + ku_, i) * x[j];
    y[i] = s;
  }
  return y;
}

SparseMat BandedMatrix::sparse() const {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(n_) * (kl_ + ku_ + 1));
  for (int i = 0; i < n_; ++i) {
    const int jlo = std::max(0, i - kl_);
    const int jhi = std::min(n_ - 1, i + ku_);
    for (int j = jlo; j <= jhi; ++j) {
      const double v = data_(j - i + ku_, i);
      if (v != 0.0) trip.emplace_back(i, j, v);
    }
  }
  SparseMat s(n_, n_);
  s.setFromTriplets(trip.begin(), trip.end());
  return s;
}

MatrixXd BandedMatrix::dense() const {
  MatrixXd m = MatrixXd::Zero(n_, n_);
  for (int i = 0; i < n_; ++i) {
    const int jlo = std::max(0, i - kl_);
    const int jhi = std::min(n_ - 1, i + ku_);
    for (int j = jlo; j <= jhi; ++j) m(i, j) = data_(j - i + ku_, i);
  }
  return m;
}

BandedSolver::BandedSolver(const BandedMatrix& A) : BandedSolver(A.sparse()) {}

BandedSolver::BandedSolver(const SparseMat& A) {
  SparseMat a = A;
  a.makeCompressed();
  lu_.compute(a);
  ok_ = (lu_.info() == Eigen::Success);
}

VectorXd BandedSolver::solve(const VectorXd& b) const {
  if (!ok_) throw ConvergenceError("banded: singular factorization");
  return lu_.solve(b);
}

MatrixXd fd_weights(double x0, const VectorXd& nodes, int max_order) {
  const int n = static_cast<int>(nodes.size());
  if (n < 1 || max_order < 0 || max_order >= n)
    throw InvalidParameter("fd_weights: need more nodes than derivative order");
  // Fornberg (1988) recurrence.
  MatrixXd c = MatrixXd::Zero(n, max_order + 1);
  double c1 = 1.0;
  double c4 = nodes[0] - x0;
  c(0, 0) = 1.0;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, max_order);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = nodes[i] - x0;
    for (int j = 0; j < i; ++j) {
      const double c3 = nodes[i] - nodes[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          c(i, k) = c1 * (k * c(i - 1, k - 1) - c5 * c(i - 1, k)) / c2;
        c(i, 0) = -c1 * c5 * c(i - 1, 0) / c2;
      }
      for (int k = mn; k >= 1; --k)
        c(j, k) = (c4 * c(j, k) - k * c(j, k - 1)) / c3;
      c(j, 0) = c4 * c(j, 0) / c3;
    }
    c1 = c2;
  }
  return c.transpose();  // (max_order+1) x n
}

VectorXd trapezoid_weights(const VectorXd& mesh) {
  const int n = static_cast<int>(mesh.size());
  if (n < 2) throw InvalidParameter("trapezoid_weights: need >= 2 nodes");
  VectorXd w = VectorXd::Zero(n);
  for (int i = 0; i + 1 < n; ++i) {
    const double h = mesh[i + 1] - mesh[i];
    if (!(h > 0.0))
      throw InvalidParameter("trapezoid_weights: mesh not increasing");
    w[i] += 0.5 * h;
    w[i + 1] += 0.5 * h;
  }
  return w;
}

double weighted_l2(const VectorXd& v, const VectorXd& w) {
  if (v.size() != w.size()) throw InvalidParameter("weighted_l2: size mismatch");
  return std::sqrt(w.cwiseProduct(v.cwiseProduct(v)).sum());
}

namespace {
inline void hermite_basis(double s, double& h00, double& h10, double& h01,
                          double& h11) {
  const double s2 = s * s, s3 = s2 * s;
  h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
  h10 = s3 - 2.0 * s2 + s;
  h01 = -2.0 * s3 + 3.0 * s2;
  h11 = s3 - s2;
}
}  // namespace

void hermite_eval(double t0, double t1, const VectorXd& y0, const VectorXd& f0,
                  const VectorXd& y1, const VectorXd& f1, double t,
                  VectorXd& out) {
  const double h = t1 - t0;
  const double s = (t - t0) / h;
  double h00, h10, h01, h11;
  hermite_basis(s, h00, h10, h01, h11);
  out = h00 * y0 + (h10 * h) * f0 + h01 * y1 + (h11 * h) * f1;
}

void hermite_deriv(double t0, double t1, const VectorXd& y0, const VectorXd& f0,
                   const VectorXd& y1, const VectorXd& f1, double t,
                   VectorXd& out) {
  const double h = t1 - t0;
  const double s = (t - t0) / h;
  const double s2 = s * s;
  const double d00 = (6.0 * s2 - 6.0 * s) / h;
  const double d10 = 3.0 * s2 - 4.0 * s + 1.0;
  const double d01 = (-6.0 * s2 + 6.0 * s) / h;
  const double d11 = 3.0 * s2 - 2.0 * s;
  out = d00 * y0 + d10 * f0 + d01 * y1 + d11 * f1;
}

int locate_interval(const VectorXd& mesh, double x) {
  const int n = static_cast<int>(mesh.size());
  const double* begin = mesh.data();
  int i = static_cast<int>(std::upper_bound(begin, begin + n, x) - begin) - 1;
  return std::clamp(i, 0, n - 2);
}

}  // namespace rtip
