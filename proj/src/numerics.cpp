#include "stormrisk/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "stormrisk/error.hpp"
#include "stormrisk/rng.hpp"

namespace stormrisk::numerics {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double safe_eval(const Objective& f, std::span<const double> x) {
  const double v = f(x);
  return std::isnan(v) ? kInf : v;
}

}  // namespace

SimplexResult nelder_mead(const Objective& f, std::span<const double> x0,
                          std::span<const double> step, const SimplexOptions& options) {
  const std::size_t n = x0.size();
  if (step.size() != n || n == 0) {
    throw InvalidArgument("nelder_mead: step size must match a non-empty start point");
  }
  std::vector<std::vector<double>> simplex(n + 1, std::vector<double>(x0.begin(), x0.end()));
  for (std::size_t i = 0; i < n; ++i) {
    simplex[i + 1][i] += step[i];
  }
  std::vector<double> values(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    values[i] = safe_eval(f, simplex[i]);
  }

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), trial(n), trial2(n);
  SimplexResult result;
  auto diameter = [&]() {
    double d = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        d = std::max(d, std::abs(simplex[i][j] - simplex[0][j]));
      }
    }
    return d;
  };
  auto eval_point = [&](double coef, std::vector<double>& out, const std::vector<double>& worst) {
    for (std::size_t j = 0; j < n; ++j) {
      out[j] = centroid[j] + coef * (worst[j] - centroid[j]);
    }
    return safe_eval(f, out);
  };

  int it = 0;
  for (; it < options.max_iterations; ++it) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
    {
      std::vector<std::vector<double>> s2(n + 1);
      std::vector<double> v2(n + 1);
      for (std::size_t i = 0; i <= n; ++i) {
        s2[i] = std::move(simplex[order[i]]);
        v2[i] = values[order[i]];
      }
      simplex = std::move(s2);
      values = std::move(v2);
    }
    if (!std::isfinite(values[0])) {
      break;  // nowhere feasible to move towards
    }
    if (values[n] - values[0] < options.value_tolerance) {
      result.converged = true;
      break;
    }

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        centroid[j] += simplex[i][j] / static_cast<double>(n);
      }
    }
    const auto& worst = simplex[n];
    const double fr = eval_point(-1.0, trial, worst);
    if (fr < values[0]) {
      const double fe = eval_point(-2.0, trial2, worst);
      if (fe < fr) {
        simplex[n] = trial2;
        values[n] = fe;
      } else {
        simplex[n] = trial;
        values[n] = fr;
      }
      continue;
    }
    if (fr < values[n - 1]) {
      simplex[n] = trial;
      values[n] = fr;
      continue;
    }
    const bool outside = fr < values[n];
    const double fc = outside ? eval_point(-0.5, trial2, worst) : eval_point(0.5, trial2, worst);
    if (fc < std::min(fr, values[n])) {
      simplex[n] = trial2;
      values[n] = fc;
      continue;
    }
    for (std::size_t i = 1; i <= n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        simplex[i][j] = simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]);
      }
      values[i] = safe_eval(f, simplex[i]);
    }
  }

  const auto best = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
  result.x = simplex[best];
  result.value = values[best];
  result.iterations = it;
  result.diameter = diameter();
  if (!result.converged && std::isfinite(result.value) && result.diameter < options.diameter_tolerance) {
    result.converged = true;
  }
  return result;
}

SimplexResult minimize_with_restarts(const Objective& f, std::span<const double> x0,
                                     std::span<const double> step, const SimplexOptions& options,
                                     int restarts, double jitter, std::uint64_t seed) {
  SimplexResult best = nelder_mead(f, x0, step, options);
  int total = best.iterations;
  const CounterRng base(seed);
  std::vector<double> start(x0.size());
  for (int r = 1; r <= restarts; ++r) {
    CounterRng rng = base.substream(static_cast<std::uint64_t>(r));
    for (std::size_t j = 0; j < start.size(); ++j) {
      start[j] = best.x[j] + jitter * step[j] * standard_normal(rng);
    }
    if (!std::isfinite(safe_eval(f, start))) {
      start = best.x;
    }
    SimplexResult candidate = nelder_mead(f, start, step, options);
    total += candidate.iterations;
    if (candidate.value < best.value || (!best.converged && candidate.converged &&
                                         candidate.value <= best.value + options.value_tolerance)) {
      best = std::move(candidate);
    }
  }
  best.iterations = total;
  return best;
}

Eigen::MatrixXd numeric_hessian(const Objective& f, std::span<const double> x) {
  const std::size_t n = x.size();
  Eigen::MatrixXd h(n, n);
  std::vector<double> p(x.begin(), x.end());
  std::vector<double> steps(n);
  for (std::size_t i = 0; i < n; ++i) {
    steps[i] = 1e-4 * (1.0 + std::abs(x[i]));
  }
  const double f0 = f(p);
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = x[i] + steps[i];
    const double fp = f(p);
    p[i] = x[i] - steps[i];
    const double fm = f(p);
    p[i] = x[i];
    h(i, i) = (fp - 2.0 * f0 + fm) / (steps[i] * steps[i]);
    for (std::size_t j = 0; j < i; ++j) {
      auto at = [&](double si, double sj) {
        p[i] = x[i] + si * steps[i];
        p[j] = x[j] + sj * steps[j];
        const double v = f(p);
        p[i] = x[i];
        p[j] = x[j];
        return v;
      };
      const double v = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * steps[i] * steps[j]);
      h(i, j) = v;
      h(j, i) = v;
    }
  }
  return h;
}

std::optional<Eigen::MatrixXd> spd_inverse(const Eigen::MatrixXd& m) {
  if (!m.allFinite()) {
    return std::nullopt;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    return std::nullopt;
  }
  Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
  if (!inv.allFinite() || (inv.diagonal().array() <= 0.0).any()) {
    return std::nullopt;
  }
  return inv;
}

double solve_increasing(const std::function<double(double)>& f, double start, double step,
                        int max_expansions) {
  if (!(step > 0.0) || !std::isfinite(start)) {
    throw InvalidArgument("solve_increasing: need a finite start and positive step");
  }
  double lo = start - step;
  double hi = start + step;
  double flo = f(lo);
  double fhi = f(hi);
  double grow = step;
  int expansions = 0;
  while (flo > 0.0 && expansions < max_expansions) {
    hi = lo;
    fhi = flo;
    grow *= 2.0;
    lo -= grow;
    flo = f(lo);
    ++expansions;
  }
  grow = step;
  while (fhi < 0.0 && expansions < max_expansions) {
    lo = hi;
    flo = fhi;
    grow *= 2.0;
    hi += grow;
    fhi = f(hi);
    ++expansions;
  }
  if (!(flo <= 0.0 && fhi >= 0.0)) {
    throw BracketFailure("no sign change for monotone root", lo, hi, flo, fhi);
  }
  if (flo == 0.0) {
    return lo;
  }
  if (fhi == 0.0) {
    return hi;
  }
  std::uintmax_t max_iter = 200;
  auto tol = [&](double a, double b) {
    return std::abs(b - a) <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(a), std::abs(b)) ||
           std::abs(b - a) <= std::numeric_limits<double>::min();
  };
  const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, max_iter);
  const double fa = f(a);
  const double fb = f(b);
  return std::abs(fa) <= std::abs(fb) ? a : b;
}

const GaussHermiteRule& gauss_hermite(int n) {
  static std::mutex mutex;
  static std::map<int, GaussHermiteRule> cache;
  if (n < 1) {
    throw InvalidArgument("gauss_hermite: need at least one node");
  }
  std::lock_guard lock(mutex);
  if (auto it = cache.find(n); it != cache.end()) {
    return it->second;
  }
  // Jacobi matrix of the probabilists' Hermite recurrence.
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    jacobi(k, k - 1) = std::sqrt(static_cast<double>(k));
    jacobi(k - 1, k) = jacobi(k, k - 1);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  GaussHermiteRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int k = 0; k < n; ++k) {
    rule.nodes[k] = eig.eigenvalues()(k);
    const double v0 = eig.eigenvectors()(0, k);
    rule.weights[k] = v0 * v0;
  }
  // Symmetrise away round-off so odd moments vanish exactly.
  for (int k = 0; k < n / 2; ++k) {
    const double x = 0.5 * (rule.nodes[n - 1 - k] - rule.nodes[k]);
    const double w = 0.5 * (rule.weights[k] + rule.weights[n - 1 - k]);
    rule.nodes[k] = -x;
    rule.nodes[n - 1 - k] = x;
    rule.weights[k] = w;
    rule.weights[n - 1 - k] = w;
  }
  if (n % 2 == 1) {
    rule.nodes[n / 2] = 0.0;
  }
  const double total = std::accumulate(rule.weights.begin(), rule.weights.end(), 0.0);
  for (auto& w : rule.weights) {
    w /= total;
  }
  return cache.emplace(n, std::move(rule)).first->second;
}

double trapezoid(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw InvalidArgument("trapezoid: abscissae and ordinates differ in length");
  }
  double acc = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    acc += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  }
  return acc;
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) {
    throw InvalidArgument("quantile of an empty sample");
  }
  if (!(q >= 0.0 && q <= 1.0)) {
    throw InvalidArgument("quantile probability outside [0, 1]");
  }
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace stormrisk::numerics
