#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "pcmlab/lattice.hpp"
#include "pcmlab/orthogonal.hpp"
#include "pcmlab/spectral.hpp"

namespace pcm {

/// Sample moments with jackknife standard errors for the mean and the
/// variance. Skewness and excess kurtosis are plain sample estimates.
struct EmpiricalMoments {
  std::size_t sample_count = 0;
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double mean_error = 0.0;
  double variance_error = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  std::vector<double> samples;
};

/// Needs at least two samples. Constant data gives exactly zero variance,
/// skewness and kurtosis.
EmpiricalMoments empirical_moments(std::vector<double> samples);

struct SamplingOptions {
  std::uint64_t seed = 1;
  std::uint64_t point = 0;  // parameter-point index in the seed derivation
  unsigned workers = 1;
  LogDetRoute route = LogDetRoute::automatic;
};

/// t(O) for n_samples independent Haar fields. Sample s uses the stream
/// (seed, point, s), so results are independent of the worker count.
/// Requires n_samples >= 50.
EmpiricalMoments sample_t_distribution(const LatticeSpec& lattice, const Dispersion& dispersion,
                                       double mu, const SpectrumEnsemble& spectrum,
                                       std::size_t n_samples, const SamplingOptions& options);

/// j_functional for n_samples independent Haar fields at a fixed source.
EmpiricalMoments sample_j_distribution(const LatticeSpec& lattice, const Dispersion& dispersion,
                                       double mu, const SpectrumEnsemble& spectrum,
                                       const SourceField& source, std::size_t n_samples,
                                       const SamplingOptions& options);

struct MeanGap {
  double t0 = 0.0;
  double gap = 0.0;            // |mean - t0|
  double gap_in_stderr = 0.0;  // gap / mean_error (0 when both vanish)
  double relative_gap = 0.0;   // gap / |t0|
};

MeanGap mean_vs_t0(const EmpiricalMoments& moments, const LatticeSpec& lattice,
                   const Dispersion& dispersion, double mu, double mbar);

enum class ScalingAxis { n, side };
std::string_view to_string(ScalingAxis axis);

struct ScalingFit {
  ScalingAxis axis = ScalingAxis::n;
  std::vector<double> abscissae;
  std::vector<double> ordinates;
  std::vector<double> ordinate_errors;
  double exponent = 0.0;
  double exponent_error = 0.0;
  double intercept = 0.0;  // of log(variance) vs log(abscissa)
  double target = 0.0;     // -2 for N, -4 for side
};

/// Least squares of log(variance) against log(abscissa), weighted by the
/// jackknife errors when all are positive. Needs >= 3 runs and positive
/// variances.
ScalingFit variance_scaling_fit(const std::vector<std::pair<double, EmpiricalMoments>>& runs,
                                ScalingAxis axis);
ScalingFit variance_scaling_fit(std::span<const double> abscissae,
                                std::span<const double> variances,
                                std::span<const double> variance_errors, ScalingAxis axis);

struct GaussianityReport {
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  bool both_small = false;  // |skewness| < 0.2 and |excess kurtosis| < 0.5
};

/// Requires at least 500 samples.
GaussianityReport gaussianity_report(const EmpiricalMoments& moments);

}  // namespace pcm
