#include "cbfal/safety_filter.hpp"

#include <Eigen/Geometry>
#include <fmt/format.h>

#include <cmath>
#include <stdexcept>

namespace cbfal {

FilterSpec FilterSpec::standard_filter(std::shared_ptr<const CbfalSpec> cbfal, ClassKeFn alpha) {
  FilterSpec spec;
  spec.mode = FilterMode::standard;
  spec.cbfal = std::move(cbfal);
  spec.alpha = std::move(alpha);
  return spec;
}

FilterSpec FilterSpec::extended_filter(ExtendedSpec extended, ClassKeFn alpha_e) {
  FilterSpec spec;
  spec.mode = FilterMode::extended;
  spec.alpha = extended.alpha();
  spec.cbfal = std::make_shared<const CbfalSpec>(extended.base());
  spec.extended = std::move(extended);
  spec.alpha_e = std::move(alpha_e);
  return spec;
}

void FilterSpec::validate() const {
  if (!cbfal) throw std::invalid_argument("filter needs a barrier functional");
  if (mode == FilterMode::extended && (!extended || !alpha_e)) {
    throw std::invalid_argument("extended filter needs an extended functional and alpha_e");
  }
  if (epsilon_guard < 0.0) throw std::invalid_argument("epsilon_guard must be non-negative");
}

ConstraintTerms constraint_terms(const FilterSpec& spec, const ControlAffinePlant& plant,
                                 const StateView& view) {
  ConstraintTerms terms;
  terms.u_des = spec.k_des ? spec.k_des(view) : Vector(Vector::Zero(plant.m));
  terms.barrier = spec.cbfal->value(view);
  if (spec.mode == FilterMode::standard) {
    const SplitDerivative d = eval_split_derivative(*spec.cbfal, plant, view);
    terms.phi = d.lf + d.lg.dot(terms.u_des) + spec.alpha(terms.barrier);
    terms.phi0 = d.lg;
  } else {
    const ExtendedSpec& ext = *spec.extended;
    // Same assembly as ExtendedSpec::value and ::split, reusing H and L_F H.
    const double rate = ext.lie().value(view);
    const double he = rate + ext.alpha()(terms.barrier);
    SplitDerivative d = eval_split_derivative(ext.lie(), plant, view);
    d.lf += ext.alpha().derivative(terms.barrier) * rate;
    terms.phi = d.lf + d.lg.dot(terms.u_des) + (*spec.alpha_e)(he);
    terms.phi0 = d.lg;
    terms.extended_barrier = he;
  }
  return terms;
}

FilterResult min_norm_correction(double phi, const RowVector& phi0, const Vector& u_des,
                                 double epsilon_guard) {
  FilterResult r;
  r.phi = phi;
  r.phi0 = phi0;
  const double norm = phi0.norm();
  r.guarded = norm <= epsilon_guard;
  if (phi >= 0.0) {
    r.u = u_des;
    return r;
  }
  if (r.guarded) {
    throw DegenerateConstraint(
        fmt::format("safety constraint degenerate: phi = {:.6g} < 0 with |phi0| = {:.3g}", phi, norm),
        phi, norm);
  }
  r.active = true;
  r.u = u_des - (phi / phi0.squaredNorm()) * phi0.transpose();
  return r;
}

FilterResult filter(const FilterSpec& spec, const ControlAffinePlant& plant, const StateView& view) {
  const ConstraintTerms terms = constraint_terms(spec, plant, view);
  FilterResult r;
  try {
    r = min_norm_correction(terms.phi, terms.phi0, terms.u_des, spec.epsilon_guard);
  } catch (const DegenerateConstraint& e) {
    throw DegenerateConstraint(fmt::format("t = {:.17g}: {}", view.time(), e.what()), e.phi(),
                               e.phi0_norm());
  }
  r.barrier = terms.barrier;
  r.extended_barrier = terms.extended_barrier;
  return r;
}

FilterResult filter(const FilterSpec& spec, const ControlAffinePlant& plant,
                    const HistoryWindow& window, double t) {
  return filter(spec, plant, StateView::committed(window, t));
}

double switching_surface(const FilterSpec& spec, const ControlAffinePlant& plant,
                         const StateView& view) {
  return constraint_terms(spec, plant, view).phi;
}

namespace {

/// Grid search over the scalar input, zooming in on the feasible point
/// closest to u_des.
double grid_search_scalar(double phi, double phi0, double u_des, double start) {
  auto feasible = [&](double u) { return phi + phi0 * (u - u_des) >= 0.0; };
  double radius = 2.0 * std::abs(start - u_des) + 1.0;
  double center = u_des;
  double best = start;
  constexpr int kPoints = 401;
  for (int round = 0; round < 80 && radius > 0.0; ++round) {
    bool found = false;
    const double step = 2.0 * radius / (kPoints - 1);
    for (int i = 0; i < kPoints; ++i) {
      const double u = center - radius + step * i;
      if (feasible(u) && (!found || std::abs(u - u_des) < std::abs(best - u_des))) {
        best = u;
        found = true;
      }
    }
    if (!found) break;
    center = best;
    radius = 2.0 * step;
  }
  return best;
}

}  // namespace

Vector brute_force_oracle(double phi, const RowVector& phi0, const Vector& u_des,
                          double epsilon_guard) {
  if (phi >= 0.0) return u_des;
  const double norm = phi0.norm();
  if (norm <= epsilon_guard) {
    throw DegenerateConstraint(fmt::format("oracle: phi = {:.6g} < 0 with |phi0| = {:.3g}", phi, norm),
                               phi, norm);
  }
  // Boundary plane phi0 u = phi0 u_des - phi in Hessian normal form.
  const Eigen::VectorXd normal = phi0.transpose().cast<double>() / norm;
  const double offset = -(phi0.dot(u_des) - phi) / norm;
  const Eigen::Hyperplane<double, Eigen::Dynamic> boundary(normal, offset);
  const Eigen::VectorXd projected = boundary.projection(Eigen::VectorXd(u_des));
  Vector u = projected;
  if (u.size() == 1) u[0] = grid_search_scalar(phi, phi0[0], u_des[0], projected[0]);
  return u;
}

}  // namespace cbfal
