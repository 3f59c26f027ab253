#pragma once

#include <complex>
#include <string>
#include <utility>
#include <vector>

namespace pcm {

/// f(z) = z^s / prod_j (z^2 + i c_j)^{k_j} with every c_j > 0, so all poles
/// sit in the second and fourth quadrants and f is analytic in the first and
/// third. Integrability of f(x)|x| needs 2K - s > 2, K = sum k_j.
struct CatalogFunction {
  std::string name;
  int power = 0;                              // s
  std::vector<std::pair<double, int>> poles;  // (c_j, k_j)

  std::complex<double> operator()(std::complex<double> z) const;
  int degree() const;  // K
  /// Bound on int_{|x|>R} |f(x)| |x| dx (and the same on the imaginary axis):
  /// 2 R^{2+s-2K} / ((2K-s-2) prod_j (1 - c_j/R^2)^{k_j}), valid for
  /// R^2 > max c_j.
  double tail_bound(double radius) const;
};

const std::vector<CatalogFunction>& contour_catalog();
/// Throws ValidationError for unknown names.
const CatalogFunction& catalog_entry(const std::string& name);

inline constexpr double kDefaultContourRadius = 1e5;

/// sum_t coefficient_t f_t over catalog entries.
struct ContourTestCase {
  std::vector<std::pair<std::complex<double>, std::string>> terms;
  double radius = kDefaultContourRadius;
  double tolerance = 1e-6;

  static ContourTestCase single(const std::string& name, double radius = kDefaultContourRadius,
                                double tolerance = 1e-6);
};

struct RotationResult {
  std::complex<double> lhs;  // int_{-R}^{R} f(x)|x| dx
  std::complex<double> rhs;  // i^2 int_{-R}^{R} f(it)|t| dt
  double tail_bound = 0.0;   // truncation bound, both integrals
  double quadrature_error = 0.0;
  double gap = 0.0;          // |lhs - rhs| + tail_bound
};

/// Each half-line [0, R] and [-R, 0] is integrated separately by adaptive
/// Gauss-Kronrod (absolute tolerance 1e-12 per piece). Refuses with a
/// ValidationError naming the required radius when the tail bound exceeds
/// the tolerance; NumericalError if quadrature does not converge.
RotationResult verify_rotation(const ContourTestCase& test_case);

/// Smallest power-of-two multiple of `radius` whose tail bound is below tol.
double required_radius(const ContourTestCase& test_case);

}  // namespace pcm
