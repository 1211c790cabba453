#pragma once

// Shared test fixtures: a two-state functional using every block of the
// general form, and smooth synthetic trajectories to evaluate it on.

#include "cbfal/functionals.hpp"

#include <cmath>
#include <span>

namespace cbfal::testing {

inline Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

inline RowVector row(std::initializer_list<double> values) {
  RowVector r(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) r[i++] = x;
  return r;
}

/// h = 1 - |x(t)|^2 - 0.5 |x(t - tau/2)|^2 - 0.25 |I1|^2 - 0.1 (sum I2)^2 with
///   I1 = (1/tau) int x(t + theta) dtheta,
///   I2 = int int e^(theta + chi) x(t + theta) o x(t + chi) dtheta dchi.
/// Pass omega_scale = 0 for the zero-kernel variant.
inline GeneralFunctionalSpec full_general_functional(double tau, double omega_scale = 1.0) {
  GeneralFunctionalSpec g;
  g.name = "double_integral";
  g.n = 2;
  g.max_lag = tau;
  g.point_lags = {tau / 2};
  g.outer = [](std::span<const Vector> a) {
    const double s = a[3].sum();
    return 1.0 - a[0].squaredNorm() - 0.5 * a[1].squaredNorm() - 0.25 * a[2].squaredNorm() -
           0.1 * s * s;
  };
  g.outer_gradient = [](std::span<const Vector> a, std::size_t j) -> RowVector {
    switch (j) {
      case 0: return -2.0 * a[0].transpose();
      case 1: return -1.0 * a[1].transpose();
      case 2: return -0.5 * a[2].transpose();
      default: return RowVector::Constant(a[3].size(), -0.2 * a[3].sum());
    }
  };
  SingleIntegralBlock single;
  single.sigma1 = tau;
  single.sigma2 = 0.0;
  single.density = [tau](double) { return Matrix(Matrix::Identity(2, 2) / tau); };
  single.density_derivative = [](double) { return Matrix(Matrix::Zero(2, 2)); };
  single.inner = [](const Vector& x) { return x; };
  single.inner_jacobian = [](const Vector&) { return Matrix(Matrix::Identity(2, 2)); };
  g.single = single;
  DoubleIntegralBlock dbl;
  auto omega = [omega_scale](double th, double ch) {
    return Matrix(omega_scale * std::exp(th + ch) * Matrix::Identity(2, 2));
  };
  dbl.density = omega;
  dbl.density_dtheta = omega;
  dbl.density_dchi = omega;
  dbl.left = [](const Vector& x) { return x; };
  dbl.right = [](const Vector& x) { return x; };
  dbl.left_jacobian = [](const Vector&) { return Matrix(Matrix::Identity(2, 2)); };
  dbl.right_jacobian = [](const Vector&) { return Matrix(Matrix::Identity(2, 2)); };
  g.dbl = dbl;
  return g;
}

/// x_k(t) = c_k + a_k sin(w_k t + p_k), with its exact derivative.
struct Sinusoid {
  Vector c, a, w, p;

  Vector x(double t) const {
    Vector v(c.size());
    for (int k = 0; k < c.size(); ++k) v[k] = c[k] + a[k] * std::sin(w[k] * t + p[k]);
    return v;
  }
  Vector xdot(double t) const {
    Vector v(c.size());
    for (int k = 0; k < c.size(); ++k) v[k] = a[k] * w[k] * std::cos(w[k] * t + p[k]);
    return v;
  }
};

}  // namespace cbfal::testing
