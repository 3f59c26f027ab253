#include "pcmlab/contour.hpp"

#include <cmath>
#include <sstream>

#include "pcmlab/errors.hpp"
#include "pcmlab/quadrature.hpp"

namespace pcm {

namespace {

constexpr std::complex<double> kI{0.0, 1.0};

double case_tail(const ContourTestCase& c, double radius) {
  double total = 0.0;
  for (const auto& [coef, name] : c.terms) total += std::abs(coef) * catalog_entry(name).tail_bound(radius);
  // Two truncated integrals (real and imaginary axis).
  return 2.0 * total;
}

}  // namespace

std::complex<double> CatalogFunction::operator()(std::complex<double> z) const {
  std::complex<double> den = 1.0;
  for (const auto& [c, k] : poles) {
    const std::complex<double> factor = z * z + kI * c;
    for (int i = 0; i < k; ++i) den *= factor;
  }
  std::complex<double> num = 1.0;
  for (int i = 0; i < power; ++i) num *= z;
  return num / den;
}

int CatalogFunction::degree() const {
  int k = 0;
  for (const auto& pole : poles) k += pole.second;
  return k;
}

double CatalogFunction::tail_bound(double radius) const {
  const int decay = 2 * degree() - power - 2;
  double denom = static_cast<double>(decay);
  const double r2 = radius * radius;
  for (const auto& [c, k] : poles) {
    if (!(r2 > c)) return INFINITY;
    denom *= std::pow(1.0 - c / r2, k);
  }
  return 2.0 * std::pow(radius, -decay) / denom;
}

const std::vector<CatalogFunction>& contour_catalog() {
  static const std::vector<CatalogFunction> catalog = {
      {"inv_sq", 0, {{1.0, 2}}},              // 1/(z^2+i)^2
      {"inv_pair", 0, {{1.0, 1}, {2.0, 1}}},  // 1/((z^2+i)(z^2+2i))
      {"odd_cube", 1, {{1.0, 3}}},            // z/(z^2+i)^3
      {"inv_cube", 0, {{3.0, 3}}},            // 1/(z^2+3i)^3
      {"even_sq_cube", 2, {{0.5, 1}, {1.0, 2}}},  // z^2/((z^2+i/2)(z^2+i)^2)
  };
  return catalog;
}

const CatalogFunction& catalog_entry(const std::string& name) {
  for (const auto& f : contour_catalog()) {
    if (f.name == name) return f;
  }
  std::string known;
  for (const auto& f : contour_catalog()) known += (known.empty() ? "" : ", ") + f.name;
  throw ValidationError("contour catalog: unknown function '" + name + "' (known: " + known + ")");
}

ContourTestCase ContourTestCase::single(const std::string& name, double radius,
                                        double tolerance) {
  ContourTestCase c;
  c.terms.emplace_back(1.0, name);
  c.radius = radius;
  c.tolerance = tolerance;
  return c;
}

double required_radius(const ContourTestCase& test_case) {
  double r = test_case.radius;
  for (int i = 0; i < 200 && !(case_tail(test_case, r) < test_case.tolerance); ++i) r *= 2.0;
  return r;
}

RotationResult verify_rotation(const ContourTestCase& test_case) {
  if (test_case.terms.empty()) throw ValidationError("verify_rotation: empty test case");
  if (!(test_case.radius > 0.0)) throw ValidationError("verify_rotation: radius must be positive");
  if (!(test_case.tolerance > 0.0)) {
    throw ValidationError("verify_rotation: tolerance must be positive");
  }
  for (const auto& term : test_case.terms) catalog_entry(term.second);

  RotationResult out;
  out.tail_bound = case_tail(test_case, test_case.radius);
  if (!(out.tail_bound < test_case.tolerance)) {
    std::ostringstream msg;
    msg << "verify_rotation: tail bound " << out.tail_bound << " at R = " << test_case.radius
        << " exceeds tolerance " << test_case.tolerance << "; required R >= "
        << required_radius(test_case);
    throw ValidationError(msg.str());
  }

  auto f = [&](std::complex<double> z) {
    std::complex<double> acc = 0.0;
    for (const auto& [coef, name] : test_case.terms) acc += coef * catalog_entry(name)(z);
    return acc;
  };

  QuadratureOptions options;
  options.abs_tol = 1e-12;
  options.max_evaluations = 2'000'000;
  const double r = test_case.radius;
  auto piece = [&](auto&& g, double a, double b) {
    const auto q = integrate_adaptive<std::complex<double>>(g, a, b, options);
    if (!q.converged) {
      std::ostringstream msg;
      msg << "verify_rotation: quadrature on [" << a << ", " << b
          << "] did not converge (error estimate " << q.error << ")";
      throw NumericalError(msg.str());
    }
    out.quadrature_error += q.error;
    return q.value;
  };
  auto real_axis = [&](double x) { return f(x) * std::abs(x); };
  auto imag_axis = [&](double t) { return f(kI * t) * std::abs(t); };
  out.lhs = piece(real_axis, -r, 0.0) + piece(real_axis, 0.0, r);
  out.rhs = -(piece(imag_axis, -r, 0.0) + piece(imag_axis, 0.0, r));
  out.gap = std::abs(out.lhs - out.rhs) + out.tail_bound;
  return out;
}

}  // namespace pcm
