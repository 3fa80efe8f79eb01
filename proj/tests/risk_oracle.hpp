#pragma once

#include <cmath>
#include <cstdint>

#include "stormrisk/evt.hpp"
#include "stormrisk/rng.hpp"
#include "stormrisk/simulation.hpp"

namespace stormrisk::oracle {

struct MonteCarloRisk {
  double numerator = 0.0;
  double numerator_se = 0.0;
  double denominator = 0.0;
  double denominator_se = 0.0;
  double R = 0.0;
  double R_se = 0.0;
  long in_bin = 0;
};

/// Simulates whole seasons: block parameters from `draw(rng)`, then the
/// maxima over [0, t] and (t, 1]. The conditional frequency uses seasons whose
/// first maximum falls within +/- half of bin_fraction * |z_T| of z_T.
template <class DrawParams>
MonteCarloRisk conditional_risk(DrawParams&& draw, double z_star, double z_T, double t, double bin_fraction,
                                long seasons, std::uint64_t seed) {
  CounterRng rng(seed);
  const double half = 0.5 * bin_fraction * std::abs(z_T);
  long exceed_all = 0;
  long exceed_bin = 0;
  long in_bin = 0;
  for (long k = 0; k < seasons; ++k) {
    const NhppParams p = draw(rng);
    const double first = simulate_window_maximum(p, t, rng);
    const double rest = simulate_window_maximum(p, 1.0 - t, rng);
    const bool exceed = rest > z_star;
    exceed_all += exceed ? 1 : 0;
    if (std::abs(first - z_T) <= half) {
      ++in_bin;
      exceed_bin += exceed ? 1 : 0;
    }
  }
  MonteCarloRisk out;
  out.in_bin = in_bin;
  out.denominator = static_cast<double>(exceed_all) / static_cast<double>(seasons);
  out.denominator_se = std::sqrt(out.denominator * (1.0 - out.denominator) / static_cast<double>(seasons));
  if (in_bin > 0) {
    out.numerator = static_cast<double>(exceed_bin) / static_cast<double>(in_bin);
    out.numerator_se = std::sqrt(out.numerator * (1.0 - out.numerator) / static_cast<double>(in_bin));
  }
  if (out.denominator > 0.0) {
    out.R = out.numerator / out.denominator;
    // Delta method for a ratio of independent-enough estimates.
    const double rel_n = out.numerator > 0.0 ? out.numerator_se / out.numerator : 0.0;
    const double rel_d = out.denominator_se / out.denominator;
    out.R_se = out.R * std::sqrt(rel_n * rel_n + rel_d * rel_d);
  }
  return out;
}

}  // namespace stormrisk::oracle
