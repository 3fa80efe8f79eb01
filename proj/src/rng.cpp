#include "stormrisk/rng.hpp"

#include <cmath>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>

#include "stormrisk/error.hpp"

namespace stormrisk {

double standard_normal(CounterRng& rng) {
  boost::random::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

std::uint64_t poisson(CounterRng& rng, double mean) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) {
    throw InvalidArgument("poisson: mean must be finite and non-negative");
  }
  if (mean == 0.0) {
    return 0;
  }
  boost::random::poisson_distribution<std::uint64_t, double> dist(mean);
  return dist(rng);
}

}  // namespace stormrisk
