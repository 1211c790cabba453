#pragma once

#include "cbfal/functionals.hpp"

#include <functional>
#include <memory>
#include <optional>

namespace cbfal {

enum class FilterMode { standard, extended };

using DesiredController = std::function<Vector(const StateView&)>;

struct FilterSpec {
  FilterMode mode = FilterMode::standard;
  std::shared_ptr<const CbfalSpec> cbfal;
  std::optional<ExtendedSpec> extended;  // present iff mode == extended
  ClassKeFn alpha = ClassKeFn::linear(1.0);
  std::optional<ClassKeFn> alpha_e;
  DesiredController k_des;  // empty: u_des = 0
  double epsilon_guard = 1e-10;

  static FilterSpec standard_filter(std::shared_ptr<const CbfalSpec> cbfal, ClassKeFn alpha);
  static FilterSpec extended_filter(ExtendedSpec extended, ClassKeFn alpha_e);

  /// Throws std::invalid_argument when the mode and its ingredients disagree.
  void validate() const;
};

/// phi and phi0 of the safety constraint phi + phi0 (u - u_des) >= 0, plus
/// the barrier values they came from.
struct ConstraintTerms {
  double phi = 0.0;
  RowVector phi0;
  Vector u_des;
  double barrier = 0.0;                    // H
  std::optional<double> extended_barrier;  // He in extended mode
};

struct FilterResult {
  Vector u;
  double phi = 0.0;
  RowVector phi0;
  bool active = false;   // phi < 0, u_des was modified
  bool guarded = false;  // |phi0| <= epsilon_guard
  double barrier = 0.0;
  std::optional<double> extended_barrier;
};

/// |phi0| vanished while the constraint was violated; the functional is not a
/// control barrier functional at this state.
class DegenerateConstraint : public Error {
 public:
  DegenerateConstraint(const std::string& what, double phi, double phi0_norm)
      : Error(what), phi_(phi), phi0_norm_(phi0_norm) {}
  double phi() const { return phi_; }
  double phi0_norm() const { return phi0_norm_; }

 private:
  double phi_;
  double phi0_norm_;
};

ConstraintTerms constraint_terms(const FilterSpec& spec, const ControlAffinePlant& plant,
                                 const StateView& view);

/// Closed-form minimum-norm solution of
///   min |u - u_des|^2  s.t.  phi + phi0 (u - u_des) >= 0.
/// Returns u_des when phi >= 0, otherwise u_des - phi phi0^T / (phi0 phi0^T).
FilterResult min_norm_correction(double phi, const RowVector& phi0, const Vector& u_des,
                                 double epsilon_guard = 1e-10);

FilterResult filter(const FilterSpec& spec, const ControlAffinePlant& plant, const StateView& view);
FilterResult filter(const FilterSpec& spec, const ControlAffinePlant& plant,
                    const HistoryWindow& window, double t);

/// Independent solution of the same program by projecting u_des onto the
/// half-space {u : phi0 u >= phi0 u_des - phi}; for m = 1 the projection is
/// additionally refined by a dense grid search over the feasible ray.
Vector brute_force_oracle(double phi, const RowVector& phi0, const Vector& u_des,
                          double epsilon_guard = 1e-10);

/// phi (standard) or phi_e (extended); its sign change marks controller
/// activation.
double switching_surface(const FilterSpec& spec, const ControlAffinePlant& plant,
                         const StateView& view);

}  // namespace cbfal
