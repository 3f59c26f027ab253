#include "pcmlab/concentration.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "pcmlab/errors.hpp"
#include "pcmlab/parallel.hpp"
#include "pcmlab/stats.hpp"

namespace pcm {

EmpiricalMoments empirical_moments(std::vector<double> samples) {
  const std::size_t n = samples.size();
  if (n < 2) throw ValidationError("empirical_moments: need at least 2 samples");
  for (double v : samples) {
    if (!std::isfinite(v)) throw ValidationError("empirical_moments: non-finite sample");
  }

  // Shifting by the first sample keeps the power sums small and makes
  // constant data exactly degenerate.
  const double shift = samples.front();
  CompensatedSum s1, s2;
  for (double v : samples) {
    const double d = v - shift;
    s1.add(d);
    s2.add(d * d);
  }
  const double nd = static_cast<double>(n);
  const double mean_d = s1.value() / nd;

  EmpiricalMoments em;
  em.sample_count = n;
  em.mean = shift + mean_d;

  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : samples) {
    const double c = (v - shift) - mean_d;
    m2 += c * c;
    m3 += c * c * c;
    m4 += c * c * c * c;
  }
  m2 /= nd;
  m3 /= nd;
  m4 /= nd;
  em.variance = m2 * nd / (nd - 1.0);
  if (m2 > 0.0) {
    em.skewness = m3 / std::pow(m2, 1.5);
    em.excess_kurtosis = m4 / (m2 * m2) - 3.0;
  }

  std::vector<double> loo_mean(n), loo_var(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = samples[i] - shift;
    const double a = s1.value() - d;
    const double b = s2.value() - d * d;
    loo_mean[i] = a / (nd - 1.0);
    loo_var[i] = n > 2 ? std::max(0.0, (b - a * a / (nd - 1.0)) / (nd - 2.0)) : 0.0;
  }
  em.mean_error = jackknife_error(loo_mean);
  em.variance_error = em.variance > 0.0 ? jackknife_error(loo_var) : 0.0;
  em.samples = std::move(samples);
  return em;
}

namespace {

template <class Body>
EmpiricalMoments sample_campaign(std::size_t n_samples, const SamplingOptions& options,
                                 Body&& body) {
  if (n_samples < 50) {
    throw ValidationError("n_samples must be >= 50, got " + std::to_string(n_samples));
  }
  std::vector<double> values(n_samples);
  parallel_for(n_samples, options.workers, [&](std::size_t s) {
    Rng rng = make_stream(options.seed, options.point, s);
    values[s] = body(rng);
  });
  return empirical_moments(std::move(values));
}

}  // namespace

EmpiricalMoments sample_t_distribution(const LatticeSpec& lattice, const Dispersion& dispersion,
                                       double mu, const SpectrumEnsemble& spectrum,
                                       std::size_t n_samples, const SamplingOptions& options) {
  // Validate the guard once up front so the error is not wrapped per sample.
  assemble_K(lattice, dispersion, mu, identity_field(lattice, spectrum));
  return sample_campaign(n_samples, options, [&](Rng& rng) {
    const auto k = assemble_K(lattice, dispersion, mu, random_field(lattice, spectrum, rng));
    return t_of_O(k, options.route);
  });
}

EmpiricalMoments sample_j_distribution(const LatticeSpec& lattice, const Dispersion& dispersion,
                                       double mu, const SpectrumEnsemble& spectrum,
                                       const SourceField& source, std::size_t n_samples,
                                       const SamplingOptions& options) {
  assemble_K(lattice, dispersion, mu, identity_field(lattice, spectrum));
  if (source.n() != spectrum.size()) {
    throw ValidationError("sample_j_distribution: source N differs from spectrum N");
  }
  return sample_campaign(n_samples, options, [&](Rng& rng) {
    const auto k = assemble_K(lattice, dispersion, mu, random_field(lattice, spectrum, rng));
    return j_functional(k, source, options.route);
  });
}

MeanGap mean_vs_t0(const EmpiricalMoments& moments, const LatticeSpec& lattice,
                   const Dispersion& dispersion, double mu, double mbar) {
  MeanGap out;
  out.t0 = t0_closed_form(lattice, dispersion, mu, mbar);
  out.gap = std::abs(moments.mean - out.t0);
  if (moments.mean_error > 0.0) {
    out.gap_in_stderr = out.gap / moments.mean_error;
  } else {
    out.gap_in_stderr = out.gap == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  out.relative_gap = out.t0 != 0.0 ? out.gap / std::abs(out.t0) : out.gap;
  return out;
}

std::string_view to_string(ScalingAxis axis) { return axis == ScalingAxis::n ? "N" : "side"; }

ScalingFit variance_scaling_fit(std::span<const double> abscissae,
                                std::span<const double> variances,
                                std::span<const double> variance_errors, ScalingAxis axis) {
  const std::size_t n = abscissae.size();
  if (n < 3) throw ValidationError("variance_scaling_fit: need at least 3 runs");
  if (variances.size() != n) throw ValidationError("variance_scaling_fit: size mismatch");

  ScalingFit fit;
  fit.axis = axis;
  fit.target = axis == ScalingAxis::n ? -2.0 : -4.0;
  std::vector<double> lx(n), ly(n), sigma(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(variances[i] > 0.0)) {
      std::ostringstream msg;
      msg << "variance_scaling_fit: non-positive variance " << variances[i] << " at "
          << to_string(axis) << " = " << abscissae[i];
      throw ValidationError(msg.str());
    }
    if (!(abscissae[i] > 0.0)) throw ValidationError("variance_scaling_fit: abscissa must be > 0");
    lx[i] = std::log(abscissae[i]);
    ly[i] = std::log(variances[i]);
    if (variance_errors.size() == n) sigma[i] = variance_errors[i] / variances[i];
  }
  const LinearFit lf = linear_fit(lx, ly, sigma);
  fit.abscissae.assign(abscissae.begin(), abscissae.end());
  fit.ordinates.assign(variances.begin(), variances.end());
  if (variance_errors.size() == n) {
    fit.ordinate_errors.assign(variance_errors.begin(), variance_errors.end());
  }
  fit.exponent = lf.slope;
  fit.exponent_error = lf.slope_error;
  fit.intercept = lf.intercept;
  return fit;
}

ScalingFit variance_scaling_fit(const std::vector<std::pair<double, EmpiricalMoments>>& runs,
                                ScalingAxis axis) {
  std::vector<double> x, v, e;
  for (const auto& [abscissa, em] : runs) {
    x.push_back(abscissa);
    v.push_back(em.variance);
    e.push_back(em.variance_error);
  }
  return variance_scaling_fit(x, v, e, axis);
}

GaussianityReport gaussianity_report(const EmpiricalMoments& moments) {
  if (moments.sample_count < 500) {
    throw ValidationError("gaussianity_report: need at least 500 samples, got " +
                          std::to_string(moments.sample_count));
  }
  GaussianityReport r;
  r.skewness = moments.skewness;
  r.excess_kurtosis = moments.excess_kurtosis;
  r.both_small = std::abs(r.skewness) < 0.2 && std::abs(r.excess_kurtosis) < 0.5;
  return r;
}

}  // namespace pcm
