#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "pcmlab/concentration.hpp"
#include "pcmlab/errors.hpp"

using namespace pcm;

TEST_CASE("empirical_moments on small data") {
  const auto m = empirical_moments({1.0, 2.0, 3.0, 4.0});
  CHECK(m.mean == doctest::Approx(2.5));
  CHECK(m.variance == doctest::Approx(5.0 / 3.0));
  // The jackknife error of a sample mean is s / sqrt(n).
  CHECK(m.mean_error == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
  CHECK(m.skewness == doctest::Approx(0.0));

  const auto c = empirical_moments(std::vector<double>(10, 3.25));
  CHECK(c.mean == 3.25);
  CHECK(c.variance == 0.0);
  CHECK(c.skewness == 0.0);
  CHECK(c.excess_kurtosis == 0.0);
  CHECK_THROWS_AS(empirical_moments({1.0}), ValidationError);
}

TEST_CASE("gaussianity_report separates normal from exponential data") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> normal;
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> a(4000), b(4000);
  for (auto& v : a) v = normal(rng);
  for (auto& v : b) v = expo(rng);
  CHECK(gaussianity_report(empirical_moments(a)).both_small);
  const auto e = gaussianity_report(empirical_moments(b));
  CHECK_FALSE(e.both_small);
  CHECK(e.skewness == doctest::Approx(2.0).epsilon(0.2));
  CHECK_THROWS_AS(gaussianity_report(empirical_moments(std::vector<double>(a.begin(), a.begin() + 499)))
                  , ValidationError);
}

TEST_CASE("variance_scaling_fit recovers a synthetic power law") {
  const std::vector<double> ns{8, 16, 32, 64};
  std::vector<double> var, err;
  for (double n : ns) {
    var.push_back(3.0 * std::pow(n, -2.0));
    err.push_back(0.05 * var.back());
  }
  const auto fit = variance_scaling_fit(ns, var, err, ScalingAxis::n);
  CHECK(fit.exponent == doctest::Approx(-2.0));
  CHECK(fit.intercept == doctest::Approx(std::log(3.0)));
  CHECK(fit.target == -2.0);
  CHECK(fit.exponent_error > 0.0);

  const std::vector<double> sides{4, 6, 8};
  std::vector<double> sv{1.0, std::pow(1.5, -4.0), std::pow(2.0, -4.0)};
  const std::vector<double> zeros(3, 0.0);
  const auto side_fit = variance_scaling_fit(sides, sv, zeros, ScalingAxis::side);
  CHECK(side_fit.exponent == doctest::Approx(-4.0));
  CHECK(side_fit.target == -4.0);

  const std::vector<double> two{1.0, 2.0};
  CHECK_THROWS_AS(variance_scaling_fit(two, two, two, ScalingAxis::n), ValidationError);
  const std::vector<double> bad{1.0, 0.0, 1.0};
  CHECK_THROWS_AS(variance_scaling_fit(sides, bad, zeros, ScalingAxis::side), ValidationError);
}

TEST_CASE("degenerate spectrum gives zero variance at the closed form") {
  const auto lattice = build_lattice(4, 1.0);
  const auto disp = make_dispersion(lattice);
  const auto spectrum = spectrum_ensemble(std::vector<double>(4, 0.7));
  const auto m = sample_t_distribution(lattice, disp, 0.5, spectrum, 60, {});
  CHECK(m.variance < 1e-24);
  const auto gap = mean_vs_t0(m, lattice, disp, 0.5, 0.7);
  CHECK(gap.relative_gap < 1e-12);
  CHECK(gap.gap_in_stderr < 1e3);

  Rng rng = make_stream(1, 0, 0);
  const auto source = random_source(lattice, 4, rng);
  const auto j = sample_j_distribution(lattice, disp, 0.5, spectrum, source, 60, {});
  CHECK(std::abs(j.mean - averaged_j_prediction(lattice, disp, 0.5, 0.7, source)) <
        1e-10 * std::abs(j.mean));
}

TEST_CASE("sampling is independent of the worker count") {
  const auto lattice = build_lattice(4, 1.0);
  const auto disp = make_dispersion(lattice);
  const auto spectrum = two_point_spectrum(0.0, 1.0, 4);
  SamplingOptions one{.seed = 77, .point = 3, .workers = 1};
  SamplingOptions many = one;
  many.workers = 4;
  const auto a = sample_t_distribution(lattice, disp, 0.5, spectrum, 64, one);
  const auto b = sample_t_distribution(lattice, disp, 0.5, spectrum, 64, many);
  CHECK(a.samples == b.samples);
  CHECK_THROWS_AS(sample_t_distribution(lattice, disp, 0.5, spectrum, 49, one), ValidationError);
  SamplingOptions other = one;
  other.point = 4;
  CHECK(sample_t_distribution(lattice, disp, 0.5, spectrum, 64, other).samples != a.samples);
}

TEST_CASE("sample mean of t agrees with a brute-force Haar average") {
  // Side 2, N 2, spectrum {0, 1}: the multiplier at a site depends only on
  // the rotation angle, so the Haar average is a 4-dimensional periodic
  // integral, evaluated with the trapezoid rule.
  const auto lattice = build_lattice(2, 1.0);
  const auto disp = make_dispersion(lattice);
  const auto spectrum = spectrum_ensemble({0.0, 1.0});
  const double mu = 0.5;
  const int grid = 12;
  double total = 0.0;
  std::vector<Eigen::MatrixXd> rot(4);
  for (int i = 0; i < grid * grid * grid * grid; ++i) {
    int code = i;
    for (int s = 0; s < 4; ++s) {
      const double th = 2.0 * std::numbers::pi * (code % grid) / grid;
      code /= grid;
      rot[s].resize(2, 2);
      rot[s] << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    }
    total += t_of_O(assemble_K(lattice, disp, mu, make_field(lattice, spectrum, rot)),
                    LogDetRoute::dense);
  }
  const double exact = total / std::pow(grid, 4);
  const auto m = sample_t_distribution(lattice, disp, mu, spectrum, 2000, {.seed = 5});
  CHECK(std::abs(m.mean - exact) < 4.0 * m.mean_error);
  CHECK(exact < t0_closed_form(lattice, disp, mu, 0.5));  // Jensen: log det is concave
}

TEST_CASE("sample mean at side 2 against a high-statistics run") {
  const auto lattice = build_lattice(2, 1.0);
  const auto disp = make_dispersion(lattice);
  const auto spectrum = spectrum_ensemble({0.0, 1.0});
  const auto a = sample_t_distribution(lattice, disp, 0.5, spectrum, 10000, {.seed = 41});
  const auto b = sample_t_distribution(lattice, disp, 0.5, spectrum, 100000, {.seed = 42});
  CHECK(std::abs(a.mean - b.mean) < 4.0 * std::hypot(a.mean_error, b.mean_error));
}

TEST_CASE("variance falls like N^-2") {
  // Side 4 rather than 8 keeps the N=64 operator at dimension 1024.
  const auto lattice = build_lattice(4, 1.0);
  const auto disp = make_dispersion(lattice);
  const auto v8 = sample_t_distribution(lattice, disp, 1.0, two_point_spectrum(0.0, 1.0, 8), 100,
                                        {.seed = 51});
  const auto v64 = sample_t_distribution(lattice, disp, 1.0, two_point_spectrum(0.0, 1.0, 64), 100,
                                         {.seed = 52});
  const double ratio = v64.variance / v8.variance;
  CHECK(ratio > 0.5 / 64.0);
  CHECK(ratio < 2.0 / 64.0);
}

TEST_CASE("mean gap per lattice mode shrinks with side at fixed volume") {
  const auto spectrum = two_point_spectrum(0.0, 1.0, 32);
  double previous = std::numeric_limits<double>::infinity();
  for (int side : {4, 8}) {
    const auto lattice = build_lattice(side, 1.0);
    const auto disp = make_dispersion(lattice);
    const auto em = sample_t_distribution(lattice, disp, 1.0, spectrum, 60, {.seed = 61});
    const double per_mode = mean_vs_t0(em, lattice, disp, 1.0, spectrum.mean()).gap / lattice.sites();
    CHECK(per_mode < previous);
    previous = per_mode;
  }
}
