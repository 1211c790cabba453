#include "cbfal/functionals.hpp"
#include "cbfal/quadrature.hpp"

#include <fmt/format.h>

#include <atomic>
#include <cmath>
#include <memory>
#include <random>
#include <stdexcept>

namespace cbfal {

namespace {

constexpr double kFdStep = 1e-6;
constexpr double kGradientTolerance = 1e-5;

void compare(const std::string& what, double supplied, double numeric) {
  if (std::abs(supplied - numeric) > kGradientTolerance * std::max(1.0, std::abs(supplied))) {
    throw GradientMismatch(
        fmt::format("{}: supplied {:.10g}, central difference {:.10g}", what, supplied, numeric));
  }
}

void compare_jacobian(const std::string& what, const std::function<Vector(const Vector&)>& f,
                      const std::function<Matrix(const Vector&)>& jac, const Vector& x) {
  const Matrix supplied = jac(x);
  for (int k = 0; k < x.size(); ++k) {
    Vector plus = x, minus = x;
    plus[k] += kFdStep;
    minus[k] -= kFdStep;
    const Vector column = (f(plus) - f(minus)) / (2 * kFdStep);
    for (int i = 0; i < column.size(); ++i) {
      compare(fmt::format("{}[{},{}]", what, i, k), supplied(i, k), column[i]);
    }
  }
}

void compare_matrix_derivative(const std::string& what, const std::function<Matrix(double)>& f,
                               const std::function<Matrix(double)>& df, double s) {
  const Matrix numeric = (f(s + kFdStep) - f(s - kFdStep)) / (2 * kFdStep);
  const Matrix supplied = df(s);
  for (int i = 0; i < numeric.rows(); ++i) {
    for (int j = 0; j < numeric.cols(); ++j) compare(fmt::format("{}({},{})", what, i, j), supplied(i, j), numeric(i, j));
  }
}

/// Shared evaluation state for a general functional; held by the closures
/// of the built spec.
struct GeneralModel {
  GeneralFunctionalSpec g;
  std::uint64_t id = next_id();

  static std::uint64_t next_id() {
    static std::atomic<std::uint64_t> counter{0};
    return ++counter;
  }

  std::size_t single_index() const { return 1 + g.point_lags.size(); }
  std::size_t double_index() const { return single_index() + (g.single ? 1 : 0); }

  Vector single_integral(const StateView& view) const {
    const SingleIntegralBlock& s = *g.single;
    return integrate(view, -s.sigma1, -s.sigma2,
                     [&](const HistoryPoint& p) { return Vector(s.density(p.theta) * s.inner(p.x)); });
  }

  Vector double_integral(const StateView& view) const {
    const DoubleIntegralBlock& d = *g.dbl;
    const auto nodes = quadrature_nodes(view, -g.max_lag, 0.0);
    std::vector<Vector> mu, nu;
    visit_nodes(view, nodes, [&](const QuadNode&, const HistoryPoint& p) {
      mu.push_back(d.left(p.x));
      nu.push_back(d.right(p.x));
    });
    Vector total = Vector::Zero(g.n);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      for (std::size_t j = 0; j < nodes.size(); ++j) {
        total += (nodes[i].weight * nodes[j].weight) *
                 (d.density(nodes[i].theta, nodes[j].theta) * mu[i].cwiseProduct(nu[j]));
      }
    }
    return total;
  }

  /// Arguments of h at `view`. Every weight closure needs them, and the
  /// double integral is quadratic in the node count, so the last result is
  /// kept per thread and reused while the view and window are unchanged.
  const std::vector<Vector>& arguments(const StateView& view) const {
    struct Memo {
      std::uint64_t model = 0;
      const HistoryWindow* window = nullptr;
      std::size_t size = 0;
      double front = 0.0, t = 0.0;
      bool committed = false;
      Vector back_x, back_xdot, x_now;
      std::vector<Vector> args;
    };
    thread_local Memo memo;
    const HistoryWindow& w = view.window();
    const Vector x_now = view.x(0.0);
    const bool hit = memo.model == id && memo.window == &w && memo.size == w.size() &&
                     memo.front == w.front_time() && memo.t == view.time() &&
                     memo.committed == view.is_committed() && memo.back_x == w.back().x &&
                     memo.back_xdot == w.back().xdot && memo.x_now == x_now;
    if (!hit) {
      memo.args = compute_arguments(view);
      memo.model = id;
      memo.window = &w;
      memo.size = w.size();
      memo.front = w.front_time();
      memo.t = view.time();
      memo.committed = view.is_committed();
      memo.back_x = w.back().x;
      memo.back_xdot = w.back().xdot;
      memo.x_now = x_now;
    }
    return memo.args;
  }

  std::vector<Vector> compute_arguments(const StateView& view) const {
    std::vector<Vector> args;
    args.reserve(g.arity());
    args.push_back(view.x(0.0));
    for (double lag : g.point_lags) args.push_back(view.x(-lag));
    if (g.single) args.push_back(single_integral(view));
    if (g.dbl) args.push_back(double_integral(view));
    return args;
  }

  RowVector gradient(const StateView& view, std::size_t j) const {
    return g.outer_gradient(arguments(view), j);
  }

  /// Time derivative of the double integral with xdot eliminated by
  /// partial integration in both variables.
  Vector double_integral_rate(const StateView& view) const {
    const DoubleIntegralBlock& d = *g.dbl;
    const double tau = g.max_lag;
    const Vector x_now = view.x(0.0);
    const Vector x_old = view.x(-tau);
    const Vector mu_now = d.left(x_now), mu_old = d.left(x_old);
    const Vector nu_now = d.right(x_now), nu_old = d.right(x_old);

    const Vector boundary = integrate(view, -tau, 0.0, [&](const HistoryPoint& p) {
      const Vector mu = d.left(p.x);
      const Vector nu = d.right(p.x);
      return Vector(d.density(0.0, p.theta) * mu_now.cwiseProduct(nu) -
                    d.density(-tau, p.theta) * mu_old.cwiseProduct(nu) +
                    d.density(p.theta, 0.0) * mu.cwiseProduct(nu_now) -
                    d.density(p.theta, -tau) * mu.cwiseProduct(nu_old));
    });

    const auto nodes = quadrature_nodes(view, -tau, 0.0);
    std::vector<Vector> mu, nu;
    visit_nodes(view, nodes, [&](const QuadNode&, const HistoryPoint& p) {
      mu.push_back(d.left(p.x));
      nu.push_back(d.right(p.x));
    });
    Vector interior = Vector::Zero(g.n);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      for (std::size_t j = 0; j < nodes.size(); ++j) {
        const double th = nodes[i].theta, ch = nodes[j].theta;
        interior += (nodes[i].weight * nodes[j].weight) *
                    ((d.density_dtheta(th, ch) + d.density_dchi(th, ch)) * mu[i].cwiseProduct(nu[j]));
      }
    }
    return boundary - interior;
  }
};

}  // namespace

void check_gradients(const GeneralFunctionalSpec& g, std::uint64_t seed) {
  if (!g.outer || !g.outer_gradient) throw std::invalid_argument(g.name + ": outer function and gradient required");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  auto random_vector = [&] {
    Vector v(g.n);
    for (int i = 0; i < g.n; ++i) v[i] = unit(rng);
    return v;
  };
  constexpr int kTrials = 8;
  for (int trial = 0; trial < kTrials; ++trial) {
    std::vector<Vector> args;
    for (std::size_t j = 0; j < g.arity(); ++j) args.push_back(random_vector());
    for (std::size_t j = 0; j < g.arity(); ++j) {
      const RowVector supplied = g.outer_gradient(args, j);
      for (int k = 0; k < g.n; ++k) {
        auto plus = args, minus = args;
        plus[j][k] += kFdStep;
        minus[j][k] -= kFdStep;
        const double numeric = (g.outer(plus) - g.outer(minus)) / (2 * kFdStep);
        compare(fmt::format("{}: grad_{} h[{}]", g.name, j, k), supplied[k], numeric);
      }
    }
    const Vector x = random_vector();
    if (g.single) {
      const SingleIntegralBlock& s = *g.single;
      compare_jacobian(g.name + ": jacobian of kappa", s.inner, s.inner_jacobian, x);
      if (s.density_derivative) {
        const double theta = -s.sigma2 - (s.sigma1 - s.sigma2) * 0.5 * (unit(rng) + 1.0);
        compare_matrix_derivative(g.name + ": rho'", s.density, s.density_derivative, theta);
      }
    }
    if (g.dbl) {
      const DoubleIntegralBlock& d = *g.dbl;
      const double theta = -g.max_lag * 0.5 * (unit(rng) + 1.0);
      const double chi = -g.max_lag * 0.5 * (unit(rng) + 1.0);
      compare_matrix_derivative(
          g.name + ": d omega/d theta", [&](double s) { return d.density(s, chi); },
          [&](double s) { return d.density_dtheta(s, chi); }, theta);
      compare_matrix_derivative(
          g.name + ": d omega/d chi", [&](double s) { return d.density(theta, s); },
          [&](double s) { return d.density_dchi(theta, s); }, chi);
      if (d.left_jacobian) compare_jacobian(g.name + ": jacobian of mu", d.left, d.left_jacobian, x);
      if (d.right_jacobian) compare_jacobian(g.name + ": jacobian of nu", d.right, d.right_jacobian, x);
    }
  }
}

CbfalSpec build_from_general(const GeneralFunctionalSpec& g) {
  check_gradients(g);
  if (g.single) {
    const SingleIntegralBlock& s = *g.single;
    if (!s.density || !s.inner || !s.inner_jacobian) {
      throw std::invalid_argument(g.name + ": single-integral block incomplete");
    }
  }
  if (g.dbl) {
    const DoubleIntegralBlock& d = *g.dbl;
    if (!d.density || !d.density_dtheta || !d.density_dchi || !d.left || !d.right) {
      throw std::invalid_argument(g.name + ": double-integral block incomplete");
    }
  }
  auto model = std::make_shared<const GeneralModel>(GeneralModel{g});

  CbfalSpec spec;
  spec.name = g.name;
  spec.n = g.n;
  spec.max_lag = g.max_lag;
  spec.value = [model](const StateView& view) { return model->g.outer(model->arguments(view)); };
  if (g.uses_present_state) {
    spec.w0 = [model](const StateView& view) { return model->gradient(view, 0); };
  }
  for (std::size_t j = 0; j < g.point_lags.size(); ++j) {
    spec.point_weights.push_back(
        {g.point_lags[j], [model, j](const StateView& view) { return model->gradient(view, j + 1); }});
  }
  if (g.single) {
    DistributedWeight dist;
    dist.sigma1 = g.single->sigma1;
    dist.sigma2 = g.single->sigma2;
    dist.weight = [model](const StateView& view, double theta) {
      const SingleIntegralBlock& s = *model->g.single;
      const RowVector outer = model->gradient(view, model->single_index());
      return RowVector(outer * s.density(theta) * s.inner_jacobian(view.x(theta)));
    };
    if (g.single->density_derivative) {
      ByPartsForm form;
      form.factor = [model](const StateView& view, double theta) {
        return RowVector(model->gradient(view, model->single_index()) * model->g.single->density(theta));
      };
      form.factor_derivative = [model](const StateView& view, double theta) {
        return RowVector(model->gradient(view, model->single_index()) *
                         model->g.single->density_derivative(theta));
      };
      form.inner = g.single->inner;
      dist.by_parts = std::move(form);
    }
    spec.distributed = std::move(dist);
  }
  if (g.dbl) {
    spec.history_drift = [model](const StateView& view) {
      return model->gradient(view, model->double_index()).dot(model->double_integral_rate(view));
    };
  }
  spec.delays().validate();
  return spec;
}

}  // namespace cbfal
