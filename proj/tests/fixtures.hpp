#pragma once

#include "resonance/core.hpp"

#include <random>

namespace fixtures {

using resonance::cplx;
using resonance::Matrix;
using resonance::Vector;

inline Matrix diag(std::initializer_list<cplx> d) {
  Vector v(static_cast<Eigen::Index>(d.size()));
  Eigen::Index i = 0;
  for (cplx x : d) v(i++) = x;
  return v.asDiagonal();
}

inline Matrix offdiag() {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 1) = m(1, 0) = 1.0;
  return m;
}

inline Matrix unit_projector(int n, int i) {
  Matrix m = Matrix::Zero(n, n);
  m(i, i) = 1.0;
  return m;
}

inline Vector unit(int n, int i) {
  Vector v = Vector::Zero(n);
  v(i) = 1.0;
  return v;
}

// z0 = 1, N0 = diag(1,-1), W = offdiag: second-order pole, one Jordan block of size 2.
struct Branching {
  cplx z0{1.0};
  Matrix n0 = diag({1.0, -1.0});
  Matrix w = offdiag();
};

// z0 = 1, N0 = diag(1,2), W = e1 e1^T: simple pole.
struct RankOne {
  cplx z0{1.0};
  Matrix n0 = diag({1.0, 2.0});
  Matrix w = unit_projector(2, 0);
};

// z0 = 0, N0 = diag(0,1,-1): the first row/column coupling gives a path of order 3.
struct OrderThree {
  cplx z0{0.0};
  Matrix n0 = diag({0.0, 1.0, -1.0});
  Matrix w = [] {
    Matrix m = Matrix::Zero(3, 3);
    m(0, 1) = m(1, 0) = 1.0;
    m(0, 2) = m(2, 0) = 1.0;
    m(1, 1) = 1.0;
    return m;
  }();
};

// z0 = 1 double; the (e1,e3) block branches like Branching while e2 moves linearly.
struct TwoCycles {
  cplx z0{1.0};
  Matrix n0 = diag({1.0, 1.0, -1.0});
  Matrix w = [] {
    Matrix m = Matrix::Zero(3, 3);
    m(0, 2) = m(2, 0) = 1.0;
    m(1, 1) = 1.0;
    return m;
  }();
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double normal() { return nd_(gen_); }
  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(gen_); }
  int integer(int a, int b) { return std::uniform_int_distribution<int>(a, b)(gen_); }
  cplx cnormal() { return {normal(), normal()}; }

  Matrix hermitian(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m(i, j) = cnormal();
    return 0.5 * (m + m.adjoint());
  }
  Matrix general(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m(i, j) = cnormal();
    return m;
  }
  Vector vector(int n) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v(i) = cnormal();
    return v;
  }
  Matrix unitary(int n) {
    Eigen::HouseholderQR<Matrix> qr(general(n));
    return qr.householderQ() * Matrix::Identity(n, n);
  }

 private:
  std::mt19937_64 gen_;
  std::normal_distribution<double> nd_;
};

inline double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace fixtures
