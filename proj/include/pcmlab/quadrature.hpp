#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <queue>
#include <tuple>
#include <utility>
#include <vector>

namespace pcm {

struct QuadratureOptions {
  double abs_tol = 1e-10;
  double rel_tol = 0.0;
  std::size_t max_evaluations = 1'000'000;
};

template <class T>
struct QuadratureResult {
  T value{};
  double error = 0.0;
  std::size_t evaluations = 0;
  bool converged = false;
};

namespace detail {

inline double magnitude(double v) { return std::abs(v); }
inline double magnitude(const std::complex<double>& v) { return std::abs(v); }

// 15-point Kronrod rule with embedded 7-point Gauss rule (QUADPACK qk15).
inline constexpr double kKronrodNodes[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr double kKronrodWeights[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double kGaussWeights[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class T>
struct Panel {
  double a, b;
  T value;
  double error;
  bool operator<(const Panel& other) const { return error < other.error; }
};

template <class T, class F>
Panel<T> gauss_kronrod_15(F& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const T fc = f(center);
  T kronrod = fc * kKronrodWeights[7];
  T gauss = fc * kGaussWeights[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kKronrodNodes[j];
    const T sum = f(center - dx) + f(center + dx);
    kronrod += sum * kKronrodWeights[j];
    if (j % 2 == 1) gauss += sum * kGaussWeights[j / 2];
  }
  kronrod *= half;
  gauss *= half;
  return {a, b, kronrod, magnitude(kronrod - gauss)};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod (G7/K15) integration of f over [a, b].
/// The panel with the largest error estimate is bisected until the summed
/// estimate drops below max(abs_tol, rel_tol*|I|) or the evaluation budget
/// runs out. T is double or std::complex<double>.
template <class T, class F>
QuadratureResult<T> integrate_adaptive(F&& f, double a, double b,
                                       const QuadratureOptions& options = {}) {
  QuadratureResult<T> result;
  if (a == b) {
    result.converged = true;
    return result;
  }

  std::priority_queue<detail::Panel<T>> panels;
  // Panels that can no longer be split in floating point.
  T frozen_value{};
  double frozen_error = 0.0;

  panels.push(detail::gauss_kronrod_15<T>(f, a, b));
  result.evaluations = 15;

  auto totals = [&] {
    // Rebuilding from the heap keeps the sum free of add/subtract drift.
    T value = frozen_value;
    double error = frozen_error;
    auto copy = panels;
    while (!copy.empty()) {
      value += copy.top().value;
      error += copy.top().error;
      copy.pop();
    }
    return std::pair<T, double>{value, error};
  };

  T running_value = panels.top().value;
  double running_error = panels.top().error;
  for (;;) {
    const double target =
        std::max(options.abs_tol, options.rel_tol * detail::magnitude(running_value));
    if (running_error <= target) {
      result.converged = true;
      break;
    }
    if (panels.empty() || result.evaluations + 30 > options.max_evaluations) break;

    const detail::Panel<T> worst = panels.top();
    panels.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b) ||
        (worst.b - worst.a) <= 1e-14 * std::max(std::abs(worst.a), std::abs(worst.b))) {
      frozen_value += worst.value;
      frozen_error += worst.error;
      continue;
    }
    const auto left = detail::gauss_kronrod_15<T>(f, worst.a, mid);
    const auto right = detail::gauss_kronrod_15<T>(f, mid, worst.b);
    result.evaluations += 30;
    running_error += left.error + right.error - worst.error;
    running_value += left.value + right.value - worst.value;
    panels.push(left);
    panels.push(right);
    if (panels.size() % 256 == 0) std::tie(running_value, running_error) = totals();
  }

  const auto [value, error] = totals();
  result.value = value;
  result.error = error;
  if (!result.converged) {
    result.converged =
        error <= std::max(options.abs_tol, options.rel_tol * detail::magnitude(value));
  }
  return result;
}

}  // namespace pcm
