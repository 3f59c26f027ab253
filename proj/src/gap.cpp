#include "pcmlab/gap.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "pcmlab/errors.hpp"
#include "pcmlab/stats.hpp"

namespace pcm {

namespace {

std::vector<double> dispersion_values(const LatticeSpec& lattice, const Dispersion& dispersion) {
  std::vector<double> out;
  for (const auto& p : momentum_grid(lattice).points) out.push_back(dispersion(p));
  return out;
}

double half_inverse_sum(const std::vector<double>& disp, double m, double volume) {
  CompensatedSum acc;
  for (double e : disp) acc.add(1.0 / (e + m));
  return acc.value() / (2.0 * volume);
}

}  // namespace

double t0_prime(const LatticeSpec& lattice, const Dispersion& dispersion, double m) {
  if (!(m > 0.0)) {
    std::ostringstream msg;
    msg << "t0_prime: m must be positive, got " << m;
    throw ValidationError(msg.str());
  }
  return half_inverse_sum(dispersion_values(lattice, dispersion), m, lattice.volume);
}

GapSolution solve_gap(const LatticeSpec& lattice, const Dispersion& dispersion, double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    std::ostringstream msg;
    msg << "solve_gap: lambda must be positive and finite, got " << lambda;
    throw ValidationError(msg.str());
  }
  const auto disp = dispersion_values(lattice, dispersion);
  const double cutoff2 = lattice.cutoff * lattice.cutoff;
  const double target = 1.0 / (2.0 * lambda);
  auto f = [&](double m) { return half_inverse_sum(disp, m, lattice.volume) - target; };

  double lo = 1e-12 * cutoff2;
  double hi = cutoff2;
  const double f_lo = f(lo);
  const double f_hi = f(hi);
  if (!(f_lo > 0.0 && f_hi < 0.0)) {
    // t0_prime is decreasing, so the bracket admits 1/(2 t0'(lo)) < lambda < 1/(2 t0'(hi)).
    const double lambda_min = 1.0 / (2.0 * (f_lo + target));
    const double lambda_max = 1.0 / (2.0 * (f_hi + target));
    std::ostringstream msg;
    msg << "solve_gap: lambda = " << lambda << " is outside the achievable window ("
        << lambda_min << ", " << lambda_max << ") for side " << lattice.side << ", volume "
        << lattice.volume;
    throw ValidationError(msg.str());
  }

  GapSolution sol;
  sol.lambda = lambda;
  const double tolerance = 1e-12 * target;
  double log_lo = std::log(lo);
  double log_hi = std::log(hi);
  double m = 0.0, r = 0.0;
  int it = 0;
  for (; it < 200; ++it) {
    const double log_mid = 0.5 * (log_lo + log_hi);
    m = std::exp(log_mid);
    r = f(m);
    if (std::abs(r) < tolerance) break;
    if (r > 0.0) {
      log_lo = log_mid;
    } else {
      log_hi = log_mid;
    }
  }
  if (!(std::abs(r) < tolerance)) {
    std::ostringstream msg;
    msg << "solve_gap: bisection stopped after " << it << " iterations with residual " << r;
    throw NumericalError(msg.str());
  }
  sol.m = m;
  sol.residual = r;
  sol.iterations = it + 1;
  sol.asymptotic_value = cutoff2 * std::exp(-4.0 * std::numbers::pi / lambda);
  sol.alt_asymptotic = 0.25 * sol.asymptotic_value;
  return sol;
}

std::pair<double, double> stationarity_residuals(const StationarityState& s) {
  const double d = s.t - s.t0;
  const double r1 = s.volume + s.a * d;
  const double r2 = -s.volume / (2.0 * s.lambda) + 0.5 * s.a_prime * d * d - s.a * d * s.t0_prime;
  return {r1, r2};
}

double free_partition_prediction(const LatticeSpec& lattice, const Dispersion& dispersion,
                                 double mu0, const SourceField& j) {
  if (!(mu0 > 0.0)) {
    std::ostringstream msg;
    msg << "free_partition_prediction: mu0 must be positive, got " << mu0;
    throw ValidationError(msg.str());
  }
  return -0.5 * averaged_j_prediction(lattice, dispersion, mu0, 0.0, j);
}

double dropped_term_ratio(const LatticeSpec& lattice, int n, double lambda, double mbar,
                          double m2bar) {
  if (!(lambda > 0.0)) throw ValidationError("dropped_term_ratio: lambda must be positive");
  const double h = 1e-4 * std::max(1.0, std::abs(mbar));
  auto a_inv = [&](double s) {
    return variance_prediction(lattice, n, mbar + s, m2bar + 2.0 * s * mbar + s * s);
  };
  const double derivative = (a_inv(h) - a_inv(-h)) / (2.0 * h);
  const double v = lattice.volume;
  return std::abs(v * v * derivative) / (v / (2.0 * lambda));
}

double dropped_term_at_solution(const LatticeSpec& lattice, int n, const GapSolution& solution,
                                const SpectrumEnsemble& spectrum) {
  const double variance = spectrum.mean_square() - spectrum.mean() * spectrum.mean();
  return dropped_term_ratio(lattice, n, solution.lambda, solution.m,
                            solution.m * solution.m + variance);
}

}  // namespace pcm
