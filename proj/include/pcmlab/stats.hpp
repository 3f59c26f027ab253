#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pcm {

/// Neumaier-compensated accumulator; result does not depend on magnitude
/// ordering to first order, which keeps long momentum sums stable.
class CompensatedSum {
 public:
  void add(double value);
  double value() const { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

double compensated_sum(std::span<const double> values);

/// Standard error from leave-one-out (or leave-one-bin-out) estimates.
double jackknife_error(std::span<const double> leave_one_out);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_error = 0.0;
  double intercept_error = 0.0;
  double chi2 = 0.0;
};

/// Least squares y = intercept + slope*x. With all sigma > 0 the fit is
/// weighted and the errors are the formal ones; otherwise the fit is
/// unweighted and errors come from the residual scatter.
LinearFit linear_fit(std::span<const double> x, std::span<const double> y,
                     std::span<const double> sigma = {});

/// Integrated autocorrelation time with Sokal's self-consistent window
/// (W >= c*tau). Returns 0.5 for an uncorrelated series.
double integrated_autocorrelation_time(std::span<const double> series,
                                       double window_factor = 6.0);

/// Averages consecutive blocks of `bin_size` entries; a trailing partial
/// block is dropped.
std::vector<double> bin_series(std::span<const double> series, std::size_t bin_size);

/// Two-sample Kolmogorov-Smirnov statistic sup|F1 - F2|.
double ks_statistic(std::vector<double> a, std::vector<double> b);

}  // namespace pcm
