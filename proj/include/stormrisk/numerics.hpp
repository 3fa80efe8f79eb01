#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace stormrisk::numerics {

using Objective = std::function<double(std::span<const double>)>;

struct SimplexOptions {
  int max_iterations = 20000;
  double value_tolerance = 1e-9;
  double diameter_tolerance = 1e-5;
};

struct SimplexResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
  double diameter = 0.0;
};

/// Nelder-Mead with standard coefficients. Non-finite objective values are
/// treated as +inf so the simplex retreats from infeasible regions.
SimplexResult nelder_mead(const Objective& f, std::span<const double> x0,
                          std::span<const double> step, const SimplexOptions& options);

/// Runs Nelder-Mead from x0, then `restarts` more times from the incumbent
/// perturbed by `jitter * step` (deterministic in `seed`), keeping the best.
SimplexResult minimize_with_restarts(const Objective& f, std::span<const double> x0,
                                     std::span<const double> step, const SimplexOptions& options,
                                     int restarts, double jitter, std::uint64_t seed);

/// Central-difference Hessian, step 1e-4 (1 + |x_i|) per coordinate.
Eigen::MatrixXd numeric_hessian(const Objective& f, std::span<const double> x);

/// Inverse of a symmetric positive-definite matrix, or nothing when the
/// Cholesky factorisation fails or any entry is non-finite.
std::optional<Eigen::MatrixXd> spd_inverse(const Eigen::MatrixXd& m);

/// Root of a non-decreasing function. The bracket is grown geometrically from
/// [start - step, start + step] and then refined with TOMS 748 until the
/// bracket collapses to a few ulps; the endpoint with the smaller residual wins.
/// Throws BracketFailure when no sign change is found within `max_expansions`.
double solve_increasing(const std::function<double(double)>& f, double start, double step,
                        int max_expansions = 200);

/// Gauss-Hermite rule for a standard normal weight: nodes x_k, weights summing to 1.
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Golub-Welsch construction; results are cached per node count.
const GaussHermiteRule& gauss_hermite(int n);

/// Trapezoid rule over (x, y) samples.
double trapezoid(std::span<const double> x, std::span<const double> y);

/// Empirical quantile with linear interpolation between order statistics
/// (h = (n - 1) q, the "type 7" definition). `sorted` must be ascending.
double quantile_sorted(std::span<const double> sorted, double q);

}  // namespace stormrisk::numerics
