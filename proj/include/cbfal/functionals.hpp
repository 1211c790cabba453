#pragma once

#include "cbfal/history.hpp"
#include "cbfal/plant.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace cbfal {

/// Point lags tau_j and the distributed interval [-sigma1, -sigma2].
struct DelayStructure {
  std::vector<double> point_lags;
  std::optional<std::pair<double, double>> distributed;  // (sigma1, sigma2)
  double max_lag = 0.0;

  /// Throws std::invalid_argument when a lag leaves (0, max_lag], the
  /// interval is empty, or point lags repeat.
  void validate() const;
};

/// Extended class-K-infinity function alpha together with its derivative.
struct ClassKeFn {
  enum class Kind { linear, custom };

  std::function<double(double)> eval;
  std::function<double(double)> derivative;
  Kind kind = Kind::linear;
  double gamma = 1.0;  // slope for Kind::linear

  static ClassKeFn linear(double gamma);
  static ClassKeFn custom(std::function<double(double)> f, std::function<double(double)> df);

  double operator()(double r) const { return eval(r); }

  /// Samples 1001 points on [-10, 10]: alpha(0) = 0, strictly increasing,
  /// sign-preserving. Throws std::invalid_argument on violation.
  void validate() const;
};

using ScalarFunctional = std::function<double(const StateView&)>;
using RowFunctional = std::function<RowVector(const StateView&)>;
using KernelFunctional = std::function<RowVector(const StateView&, double theta)>;

struct PointWeight {
  double lag;
  RowFunctional weight;
};

/// w_d(x_t, theta) = factor(x_t, theta) * Jacobian(inner)(x_t(theta)).
///
/// With this factorisation the distributed part of the derivative integrates
/// by parts into
///   factor(-sigma2) inner(x(-sigma2)) - factor(-sigma1) inner(x(-sigma1))
///     - int factor'(theta) inner(x(theta)) dtheta,
/// which reads x_t only. An empty `inner` means the identity, in which case
/// factor is w_d itself and factor' is w_d'.
struct ByPartsForm {
  KernelFunctional factor;
  KernelFunctional factor_derivative;
  std::function<Vector(const Vector&)> inner;
};

struct DistributedWeight {
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  KernelFunctional weight;  // w_d
  std::optional<ByPartsForm> by_parts;
};

/// A control barrier functional H through its weight decomposition:
///   Hdot = w0 xdot(t) + sum_j w_j xdot(t - tau_j) + int w_d(theta) xdot(t + theta) dtheta.
///
/// Absent weights are declared identically zero and never evaluated.
struct CbfalSpec {
  std::string name;
  int n = 1;
  double max_lag = 1.0;
  ScalarFunctional value;
  std::optional<RowFunctional> w0;
  std::vector<PointWeight> point_weights;
  std::optional<DistributedWeight> distributed;
  /// Derivative contribution that depends on x_t only (double-integral blocks
  /// after integration by parts). Empty when absent.
  ScalarFunctional history_drift;
  /// L_F H as a functional in its own right, with its own weights. Required
  /// to extend H; it must have no input dependence of its own.
  std::shared_ptr<const CbfalSpec> lie_derivative;

  DelayStructure delays() const;
};

struct SplitDerivative {
  double lf = 0.0;  // L_F H
  RowVector lg;     // L_G H, 1 x m
};

double eval_value(const CbfalSpec& spec, const HistoryWindow& window, double t);

/// Everything in Hdot except w0 * xdot(t): delayed derivative terms, the
/// distributed term, and the history drift.
double memory_rate(const CbfalSpec& spec, const StateView& view);

/// (L_F H, L_G H) for the affine plant; for neutral plants F reads the
/// derivative history and the same assembly applies.
SplitDerivative eval_split_derivative(const CbfalSpec& spec, const ControlAffinePlant& plant,
                                      const StateView& view);
SplitDerivative eval_split_derivative(const CbfalSpec& spec, const ControlAffinePlant& plant,
                                      const HistoryWindow& window, double t);

/// Hdot along a recorded trajectory, given the present derivative.
double assembled_rate(const CbfalSpec& spec, const StateView& view, const Vector& xdot_now);

struct RateCheck {
  double assembled = 0.0;
  double finite_difference = 0.0;
  double abs_error = 0.0;
  double rel_error = 0.0;
};

/// Compares the assembled derivative at t with (H(t+h) - H(t-h)) / 2h on a
/// stored trajectory.
RateCheck check_rate(const CbfalSpec& spec, const HistoryWindow& window, double t, double h);

struct ByPartsCheck {
  double quadrature = 0.0;  // int w_d xdot dtheta
  double by_parts = 0.0;    // boundary terms minus int factor' inner
};

/// Evaluates both sides of the integration-by-parts identity for the
/// distributed weight. Throws std::invalid_argument without a by-parts form.
ByPartsCheck check_by_parts(const CbfalSpec& spec, const StateView& view);

enum class RelativeDegree { degree_one, degree_two_candidate, invalid_no_degree, unknown };

std::string to_string(RelativeDegree degree);

/// Random histories used to probe whether L_G H vanishes.
struct ProbeOptions {
  int count = 64;
  std::uint64_t seed = 0x5eedULL;
  const InitialHistory* extra = nullptr;  // typically the scenario's initial data
};

RelativeDegree classify_relative_degree(const CbfalSpec& spec, const ControlAffinePlant& plant,
                                        const ProbeOptions& probes = {});

/// He = L_F H + alpha(H) for a relative-degree-two functional.
class ExtendedSpec {
 public:
  ExtendedSpec(std::shared_ptr<const CbfalSpec> base, ClassKeFn alpha);

  const CbfalSpec& base() const { return *base_; }
  const CbfalSpec& lie() const { return *base_->lie_derivative; }
  const ClassKeFn& alpha() const { return alpha_; }

  double value(const StateView& view) const;

  /// (L_F^2 H + alpha'(H) L_F H, L_G L_F H).
  SplitDerivative split(const ControlAffinePlant& plant, const StateView& view) const;

 private:
  std::shared_ptr<const CbfalSpec> base_;
  ClassKeFn alpha_;
};

/// Builds the extended functional; throws NotExtendable unless
/// classify_relative_degree reports degree_two_candidate and L_F H carries a
/// weight decomposition.
ExtendedSpec extend(std::shared_ptr<const CbfalSpec> spec, const ControlAffinePlant& plant,
                    ClassKeFn alpha, const ProbeOptions& probes = {});

// ---------------------------------------------------------------------------
// Functionals of the form
//   H(x_t) = h(x(t), x(t - tau_1), ..., x(t - tau_l),
//              int rho(theta) kappa(x(t + theta)) dtheta,
//              int int omega(theta, chi) (mu(x(t + theta)) o nu(x(t + chi))) dtheta dchi)
// where either integral block may be absent.

struct SingleIntegralBlock {
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  std::function<Matrix(double)> density;             // rho
  std::function<Matrix(double)> density_derivative;  // rho'; empty -> quadrature against xdot
  std::function<Vector(const Vector&)> inner;        // kappa
  std::function<Matrix(const Vector&)> inner_jacobian;
};

/// Integrates over [-max_lag, 0]^2.
struct DoubleIntegralBlock {
  std::function<Matrix(double, double)> density;  // omega
  std::function<Matrix(double, double)> density_dtheta;
  std::function<Matrix(double, double)> density_dchi;
  std::function<Vector(const Vector&)> left;   // mu
  std::function<Vector(const Vector&)> right;  // nu
  std::function<Matrix(const Vector&)> left_jacobian;   // optional
  std::function<Matrix(const Vector&)> right_jacobian;  // optional
};

struct GeneralFunctionalSpec {
  std::string name = "general";
  int n = 1;
  double max_lag = 1.0;
  /// False when h ignores its first argument (w0 identically zero).
  bool uses_present_state = true;
  std::vector<double> point_lags;
  std::function<double(std::span<const Vector>)> outer;
  /// Gradient of h with respect to argument j, as a 1 x n row.
  std::function<RowVector(std::span<const Vector>, std::size_t)> outer_gradient;
  std::optional<SingleIntegralBlock> single;
  std::optional<DoubleIntegralBlock> dbl;

  std::size_t arity() const { return 1 + point_lags.size() + (single ? 1 : 0) + (dbl ? 1 : 0); }
};

/// Throws GradientMismatch when a supplied gradient or derivative disagrees
/// with central differences beyond 1e-5 relative on random inputs.
void check_gradients(const GeneralFunctionalSpec& g, std::uint64_t seed = 1);

CbfalSpec build_from_general(const GeneralFunctionalSpec& g);

}  // namespace cbfal
