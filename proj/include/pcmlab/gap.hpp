#pragma once

#include <utility>

#include "pcmlab/lattice.hpp"
#include "pcmlab/spectral.hpp"

namespace pcm {

/// (1/2V) sum_p 1/(disp(p) + m), the m-derivative of t0_closed_form.
double t0_prime(const LatticeSpec& lattice, const Dispersion& dispersion, double m);

struct GapSolution {
  double lambda = 0.0;
  double m = 0.0;           // mu + mbar
  double residual = 0.0;    // t0_prime(m) - 1/(2 lambda)
  int iterations = 0;
  double asymptotic_value = 0.0;  // cutoff^2 exp(-4 pi / lambda)
  double alt_asymptotic = 0.0;    // (cutoff^2 / 4) exp(-4 pi / lambda)
};

/// Bisection (in log m) for t0_prime(m) = 1/(2 lambda) on
/// (1e-12 cutoff^2, cutoff^2), stopping at |residual| < 1e-12/(2 lambda) or
/// 200 iterations. Throws ValidationError naming the achievable lambda
/// window when the root is not bracketed.
GapSolution solve_gap(const LatticeSpec& lattice, const Dispersion& dispersion, double lambda);

struct StationarityState {
  double t = 0.0;
  double t0 = 0.0;
  double t0_prime = 0.0;
  double a = 0.0;
  double a_prime = 0.0;
  double volume = 0.0;
  double lambda = 0.0;
};

/// r1 = V + A (t - t0)
/// r2 = -V/(2 lambda) + (A'/2)(t - t0)^2 - A (t - t0) t0'
std::pair<double, double> stationarity_residuals(const StationarityState& state);

/// -(1/2) sum_b J_b^T (-laplacian + mu0)^{-1} J_b, i.e. ln Z[J] of the free
/// massive theory up to a J-independent constant.
double free_partition_prediction(const LatticeSpec& lattice, const Dispersion& dispersion,
                                 double mu0, const SourceField& j);

/// |V^2 (A^{-1})'| / (V / 2 lambda) with A^{-1} from variance_prediction and
/// the derivative taken by central differences along a rigid shift of the
/// spectrum (mbar -> mbar + s, m2bar -> m2bar + 2 s mbar + s^2).
double dropped_term_ratio(const LatticeSpec& lattice, int n, double lambda, double mbar,
                          double m2bar);

/// dropped_term_ratio with the whole solved mass in the spectrum (mu = 0):
/// the spectrum is shifted rigidly so that its mean equals m, keeping its
/// variance. Reported next to the O(1)-spectrum value as a sensitivity check.
double dropped_term_at_solution(const LatticeSpec& lattice, int n, const GapSolution& solution,
                                const SpectrumEnsemble& spectrum);

}  // namespace pcm
