#include "pcmlab/stats.hpp"

#include <algorithm>
#include <cmath>

#include "pcmlab/errors.hpp"

namespace pcm {

void CompensatedSum::add(double value) {
  const double t = sum_ + value;
  if (std::abs(sum_) >= std::abs(value)) {
    compensation_ += (sum_ - t) + value;
  } else {
    compensation_ += (value - t) + sum_;
  }
  sum_ = t;
}

double compensated_sum(std::span<const double> values) {
  CompensatedSum acc;
  for (double v : values) acc.add(v);
  return acc.value();
}

double jackknife_error(std::span<const double> leave_one_out) {
  const std::size_t n = leave_one_out.size();
  if (n < 2) return 0.0;
  const double mean = compensated_sum(leave_one_out) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : leave_one_out) ss += (v - mean) * (v - mean);
  return std::sqrt(static_cast<double>(n - 1) / static_cast<double>(n) * ss);
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y,
                     std::span<const double> sigma) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 2) throw ValidationError("linear_fit: need >= 2 matching points");
  const bool weighted =
      sigma.size() == n && std::all_of(sigma.begin(), sigma.end(), [](double s) { return s > 0; });

  double s = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weighted ? 1.0 / (sigma[i] * sigma[i]) : 1.0;
    s += w;
    sx += w * x[i];
    sy += w * y[i];
  }
  const double xbar = sx / s;
  const double ybar = sy / s;
  double stt = 0, sty = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weighted ? 1.0 / (sigma[i] * sigma[i]) : 1.0;
    const double t = x[i] - xbar;
    stt += w * t * t;
    sty += w * t * (y[i] - ybar);
  }
  if (stt <= 0) throw ValidationError("linear_fit: abscissae are all equal");

  LinearFit fit;
  fit.slope = sty / stt;
  fit.intercept = ybar - fit.slope * xbar;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weighted ? 1.0 / (sigma[i] * sigma[i]) : 1.0;
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    fit.chi2 += w * r * r;
  }
  // Unweighted: scale the unit-weight covariance by the residual variance.
  const double scale = weighted ? 1.0 : (n > 2 ? fit.chi2 / static_cast<double>(n - 2) : 0.0);
  fit.slope_error = std::sqrt(scale / stt);
  fit.intercept_error = std::sqrt(scale * (1.0 / s + xbar * xbar / stt));
  return fit;
}

double integrated_autocorrelation_time(std::span<const double> series, double window_factor) {
  const std::size_t n = series.size();
  if (n < 4) return 0.5;
  const double mean = compensated_sum(series) / static_cast<double>(n);
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = series[i] - mean;

  auto autocov = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) acc += d[i] * d[i + lag];
    return acc / static_cast<double>(n - lag);
  };
  const double c0 = autocov(0);
  if (c0 <= 0.0) return 0.5;

  double tau = 0.5;
  for (std::size_t w = 1; w < n / 2; ++w) {
    tau += autocov(w) / c0;
    if (static_cast<double>(w) >= window_factor * tau) break;
  }
  return std::max(tau, 0.5);
}

std::vector<double> bin_series(std::span<const double> series, std::size_t bin_size) {
  if (bin_size == 0) throw ValidationError("bin_series: bin_size must be positive");
  std::vector<double> bins;
  for (std::size_t start = 0; start + bin_size <= series.size(); start += bin_size) {
    double acc = 0.0;
    for (std::size_t i = start; i < start + bin_size; ++i) acc += series[i];
    bins.push_back(acc / static_cast<double>(bin_size));
  }
  return bins;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ValidationError("ks_statistic: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

}  // namespace pcm
