#include "cbfal/functionals.hpp"

#include "cbfal/quadrature.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace cbfal {

void DelayStructure::validate() const {
  if (!(max_lag > 0.0)) throw std::invalid_argument("max_lag must be positive");
  for (std::size_t i = 0; i < point_lags.size(); ++i) {
    const double lag = point_lags[i];
    if (!(lag > 0.0) || lag > max_lag) {
      throw std::invalid_argument(fmt::format("point lag {} outside (0, {}]", lag, max_lag));
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (point_lags[j] == lag) throw std::invalid_argument(fmt::format("point lag {} repeated", lag));
    }
  }
  if (distributed) {
    const auto [sigma1, sigma2] = *distributed;
    if (!(sigma2 >= 0.0 && sigma2 < sigma1 && sigma1 <= max_lag)) {
      throw std::invalid_argument(
          fmt::format("distributed interval [-{}, -{}] invalid for max_lag {}", sigma1, sigma2, max_lag));
    }
  }
}

ClassKeFn ClassKeFn::linear(double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("linear class-K_e slope must be positive");
  return {[gamma](double r) { return gamma * r; }, [gamma](double) { return gamma; }, Kind::linear,
          gamma};
}

ClassKeFn ClassKeFn::custom(std::function<double(double)> f, std::function<double(double)> df) {
  ClassKeFn alpha{std::move(f), std::move(df), Kind::custom, 0.0};
  alpha.validate();
  return alpha;
}

void ClassKeFn::validate() const {
  if (!eval || !derivative) throw std::invalid_argument("class-K_e function needs value and derivative");
  if (eval(0.0) != 0.0) throw std::invalid_argument("class-K_e function must vanish at 0");
  constexpr int kPoints = 1001;
  double previous = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < kPoints; ++i) {
    const double r = -10.0 + 20.0 * i / (kPoints - 1);
    const double a = eval(r);
    if (!(a > previous)) {
      throw std::invalid_argument(fmt::format("class-K_e function not increasing at r={}", r));
    }
    if ((r > 0.0 && !(a > 0.0)) || (r < 0.0 && !(a < 0.0))) {
      throw std::invalid_argument(fmt::format("class-K_e function changes sign at r={}", r));
    }
    previous = a;
  }
}

DelayStructure CbfalSpec::delays() const {
  DelayStructure d;
  d.max_lag = max_lag;
  for (const PointWeight& p : point_weights) d.point_lags.push_back(p.lag);
  if (distributed) d.distributed = std::make_pair(distributed->sigma1, distributed->sigma2);
  return d;
}

// ---------------------------------------------------------------------------

double eval_value(const CbfalSpec& spec, const HistoryWindow& window, double t) {
  return spec.value(StateView::committed(window, t));
}

namespace {

Vector apply_inner(const ByPartsForm& form, const Vector& x) { return form.inner ? form.inner(x) : x; }

double distributed_by_parts(const DistributedWeight& d, const StateView& view) {
  const ByPartsForm& form = *d.by_parts;
  const double hi = -d.sigma2;
  const double lo = -d.sigma1;
  const double boundary = form.factor(view, hi).dot(apply_inner(form, view.x(hi))) -
                          form.factor(view, lo).dot(apply_inner(form, view.x(lo)));
  const double remainder = integrate(view, lo, hi, [&](const HistoryPoint& p) {
    return form.factor_derivative(view, p.theta).dot(apply_inner(form, p.x));
  });
  return boundary - remainder;
}

double distributed_quadrature(const DistributedWeight& d, const StateView& view) {
  return integrate(view, -d.sigma1, -d.sigma2,
                   [&](const HistoryPoint& p) { return d.weight(view, p.theta).dot(p.xdot); });
}

}  // namespace

double memory_rate(const CbfalSpec& spec, const StateView& view) {
  double rate = 0.0;
  for (const PointWeight& p : spec.point_weights) {
    rate += p.weight(view).dot(view.xdot(-p.lag));
  }
  if (spec.distributed) {
    rate += spec.distributed->by_parts ? distributed_by_parts(*spec.distributed, view)
                                       : distributed_quadrature(*spec.distributed, view);
  }
  if (spec.history_drift) rate += spec.history_drift(view);
  return rate;
}

SplitDerivative eval_split_derivative(const CbfalSpec& spec, const ControlAffinePlant& plant,
                                      const StateView& view) {
  SplitDerivative out;
  out.lf = memory_rate(spec, view);
  if (spec.w0) {
    const RowVector w0 = (*spec.w0)(view);
    out.lf += w0.dot(plant.drift(view));
    out.lg = w0 * plant.input(view);
  } else {
    out.lg = RowVector::Zero(plant.m);
  }
  return out;
}

SplitDerivative eval_split_derivative(const CbfalSpec& spec, const ControlAffinePlant& plant,
                                      const HistoryWindow& window, double t) {
  return eval_split_derivative(spec, plant, StateView::committed(window, t));
}

double assembled_rate(const CbfalSpec& spec, const StateView& view, const Vector& xdot_now) {
  double rate = memory_rate(spec, view);
  if (spec.w0) rate += (*spec.w0)(view).dot(xdot_now);
  return rate;
}

RateCheck check_rate(const CbfalSpec& spec, const HistoryWindow& window, double t, double h) {
  RateCheck out;
  const StateView view = StateView::committed(window, t);
  out.assembled = assembled_rate(spec, view, window.derivative_at(t));
  out.finite_difference = (eval_value(spec, window, t + h) - eval_value(spec, window, t - h)) / (2 * h);
  out.abs_error = std::abs(out.assembled - out.finite_difference);
  out.rel_error =
      out.finite_difference != 0.0 ? out.abs_error / std::abs(out.finite_difference) : out.abs_error;
  return out;
}

ByPartsCheck check_by_parts(const CbfalSpec& spec, const StateView& view) {
  if (!spec.distributed || !spec.distributed->by_parts) {
    throw std::invalid_argument(spec.name + ": no by-parts form for the distributed weight");
  }
  return {distributed_quadrature(*spec.distributed, view), distributed_by_parts(*spec.distributed, view)};
}

// ---------------------------------------------------------------------------

std::string to_string(RelativeDegree degree) {
  switch (degree) {
    case RelativeDegree::degree_one: return "degree_one";
    case RelativeDegree::degree_two_candidate: return "degree_two_candidate";
    case RelativeDegree::invalid_no_degree: return "invalid_no_degree";
    case RelativeDegree::unknown: return "unknown";
  }
  return "unknown";
}

namespace {

/// x(theta) = c + a sin(omega theta + phase) with |c| <= 0.6, |a| <= 0.4.
InitialHistory random_history(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto direction = [&](double radius) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = normal(rng);
    const double norm = v.norm();
    return norm > 0 ? Vector(v * (radius / norm)) : v;
  };
  const Vector c = direction(0.6 * unit(rng));
  const Vector a = direction(0.4 * unit(rng));
  const double omega = 0.5 + 4.0 * unit(rng);
  const double phase = 2 * std::numbers::pi * unit(rng);
  return {[=](double theta) { return Vector(c + std::sin(omega * theta + phase) * a); },
          [=](double theta) { return Vector(omega * std::cos(omega * theta + phase) * a); }};
}

}  // namespace

RelativeDegree classify_relative_degree(const CbfalSpec& spec, const ControlAffinePlant& plant,
                                        const ProbeOptions& probes) {
  const bool has_w0 = spec.w0.has_value();
  const bool has_points = !spec.point_weights.empty();
  if (!has_w0 && has_points) return RelativeDegree::invalid_no_degree;

  int zero = 0;
  int nonzero = 0;
  if (has_w0) {
    const double max_lag = std::max(spec.max_lag, plant.max_lag);
    const double dt = max_lag / 64.0;
    std::mt19937_64 rng(probes.seed);
    auto probe = [&](const InitialHistory& history) {
      const HistoryWindow window = window_from_initial(history, max_lag, dt);
      const StateView view = StateView::committed(window, 0.0);
      const RowVector lg = (*spec.w0)(view)*plant.input(view);
      (lg.lpNorm<Eigen::Infinity>() > 1e-12 ? nonzero : zero) += 1;
    };
    for (int i = 0; i < probes.count; ++i) probe(random_history(spec.n, rng));
    if (probes.extra) probe(*probes.extra);
  }
  const int total = zero + nonzero;

  if (has_w0 && total > 0 && nonzero == total) return RelativeDegree::degree_one;
  const bool lg_vanishes = !has_w0 || (total > 0 && zero == total);
  const bool lf_history_only = !has_points && (!spec.distributed || spec.distributed->by_parts) &&
                               !(has_w0 && plant.neutral);
  const bool depends_on_state = has_w0 || spec.distributed || spec.history_drift;
  if (lg_vanishes && lf_history_only && depends_on_state) return RelativeDegree::degree_two_candidate;
  return RelativeDegree::unknown;
}

// ---------------------------------------------------------------------------

ExtendedSpec::ExtendedSpec(std::shared_ptr<const CbfalSpec> base, ClassKeFn alpha)
    : base_(std::move(base)), alpha_(std::move(alpha)) {
  if (!base_ || !base_->lie_derivative) {
    throw NotExtendable("extended functional needs a weight decomposition of L_F H");
  }
}

double ExtendedSpec::value(const StateView& view) const {
  return lie().value(view) + alpha_(base_->value(view));
}

SplitDerivative ExtendedSpec::split(const ControlAffinePlant& plant, const StateView& view) const {
  SplitDerivative second = eval_split_derivative(lie(), plant, view);
  second.lf += alpha_.derivative(base_->value(view)) * lie().value(view);
  return second;
}

ExtendedSpec extend(std::shared_ptr<const CbfalSpec> spec, const ControlAffinePlant& plant,
                    ClassKeFn alpha, const ProbeOptions& probes) {
  if (!spec) throw std::invalid_argument("extend: null spec");
  const RelativeDegree degree = classify_relative_degree(*spec, plant, probes);
  if (degree != RelativeDegree::degree_two_candidate) {
    std::string detail;
    for (const PointWeight& p : spec->point_weights) {
      detail += fmt::format(" nonzero point weight at lag {}", p.lag);
    }
    if (spec->distributed && !spec->distributed->by_parts) {
      detail += " distributed weight without by-parts form";
    }
    throw NotExtendable(fmt::format("{}: classified {}, L_F H would depend on xdot_t or L_G H != 0;{}",
                                    spec->name, to_string(degree), detail));
  }
  if (!spec->lie_derivative) {
    throw NotExtendable(spec->name + ": no weight decomposition supplied for L_F H");
  }
  return ExtendedSpec(std::move(spec), std::move(alpha));
}

}  // namespace cbfal
