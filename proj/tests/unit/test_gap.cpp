#include <doctest.h>

#include <cmath>
#include <numbers>

#include "pcmlab/errors.hpp"
#include "pcmlab/gap.hpp"

using namespace pcm;

TEST_CASE("t0_prime frozen value and derivative of t0") {
  const auto lattice = build_lattice(64, 1.0);
  const auto disp = make_dispersion(lattice);
  // (1/2) sum_p 1/(p^2 + 1) at side 64, V = 1, summed in 25-digit arithmetic.
  CHECK(t0_prime(lattice, disp, 1.0) == doctest::Approx(0.8153829522546795).epsilon(1e-13));

  const auto small = build_lattice(8, 2.0);
  const auto d8 = make_dispersion(small);
  const double m = 0.9, h = 1e-5;
  const double fd = (t0_closed_form(small, d8, m + h, 0.0) - t0_closed_form(small, d8, m - h, 0.0)) /
                    (2.0 * h);
  CHECK(fd == doctest::Approx(t0_prime(small, d8, m)).epsilon(1e-8));
  CHECK(t0_prime(small, d8, 2.0) < t0_prime(small, d8, 1.0));
}

TEST_CASE("solve_gap frozen value and residual") {
  const auto lattice = build_lattice(64, 1.0);
  const auto disp = make_dispersion(lattice);
  const auto sol = solve_gap(lattice, disp, 2.0);
  // Root of t0_prime(m) = 1/4 found with an independent 25-digit solver.
  CHECK(sol.m == doctest::Approx(94.247862925082074).epsilon(1e-11));
  CHECK(std::abs(sol.residual) < 1e-12 / 4.0);
  CHECK(sol.iterations <= 200);
  CHECK(sol.asymptotic_value ==
        doctest::Approx(lattice.cutoff * lattice.cutoff * std::exp(-2.0 * std::numbers::pi)));
  CHECK(sol.alt_asymptotic == doctest::Approx(sol.asymptotic_value / 4.0));
}

TEST_CASE("solve_gap is monotone in lambda and rejects unbracketed lambda") {
  const auto lattice = build_lattice(16, 1.0);
  const auto disp = make_dispersion(lattice);
  double previous = 0.0;
  for (double lambda : {0.5, 1.0, 2.0, 4.0, 8.0}) {
    const auto sol = solve_gap(lattice, disp, lambda);
    CHECK(sol.m > previous);
    CHECK(std::abs(sol.residual) < 1e-12 / (2.0 * lambda));
    previous = sol.m;
  }
  CHECK_THROWS_AS(solve_gap(lattice, disp, 1e6), ValidationError);
  CHECK_THROWS_AS(solve_gap(lattice, disp, -1.0), ValidationError);
}

TEST_CASE("stationarity residuals") {
  StationarityState s{.t = 2.0, .t0 = 2.0, .t0_prime = 0.3, .a = 5.0, .a_prime = 1.0,
                      .volume = 3.0, .lambda = 1.5};
  auto [r1, r2] = stationarity_residuals(s);
  CHECK(r1 == doctest::Approx(3.0));
  CHECK(r2 == doctest::Approx(-1.0));

  s.t = 2.5;
  std::tie(r1, r2) = stationarity_residuals(s);
  CHECK(r1 == doctest::Approx(3.0 + 2.5));
  CHECK(r2 == doctest::Approx(-1.0 + 0.5 * 0.25 - 5.0 * 0.5 * 0.3));
}

TEST_CASE("free_partition_prediction equals minus half the propagator form") {
  const auto lattice = build_lattice(4, 2.0);
  const auto disp = make_dispersion(lattice);
  Eigen::MatrixXd v(2, 2);
  v << 1.0, 0.5, -0.5, 2.0;
  const auto j = single_site_source(lattice, 5, v);
  const double g = propagator(lattice, disp, 1.3, site_at(lattice, 5), site_at(lattice, 5));
  CHECK(free_partition_prediction(lattice, disp, 1.3, j) ==
        doctest::Approx(-0.5 * g * (v.transpose() * v).trace()));
}

TEST_CASE("dropped_term_ratio") {
  const auto lattice = build_lattice(8, 1.0);
  // Along the shift, d/ds (4 m2 mbar^4 + m2^2) = 28 at mbar = m2 = 1, so the
  // ratio is 2 lambda V^2 * 28 / (N^2 side^4).
  CHECK(dropped_term_ratio(lattice, 4, 1.0, 1.0, 1.0) ==
        doctest::Approx(56.0 / (16.0 * 4096.0)).epsilon(1e-6));
  CHECK(dropped_term_ratio(lattice, 4, 1.0, 0.0, 1.0) < 1e-12);
  CHECK(dropped_term_ratio(build_lattice(16, 1.0), 4, 1.0, 1.0, 1.0) <
        dropped_term_ratio(lattice, 4, 1.0, 1.0, 1.0));
}

TEST_CASE("dropped_term_at_solution shifts the spectrum to the solved mass") {
  const auto lattice = build_lattice(16, 1.0);
  const auto sol = solve_gap(lattice, make_dispersion(lattice), 1.0);
  const auto spectrum = two_point_spectrum(0.0, 1.0, 8);
  CHECK(dropped_term_at_solution(lattice, 8, sol, spectrum) ==
        doctest::Approx(dropped_term_ratio(lattice, 8, 1.0, sol.m, sol.m * sol.m + 0.25)));
  // Dominated by the m^5 growth of the derivative: larger lambda, larger ratio.
  const auto sol2 = solve_gap(lattice, make_dispersion(lattice), 2.0);
  CHECK(dropped_term_at_solution(lattice, 8, sol2, spectrum) >
        dropped_term_at_solution(lattice, 8, sol, spectrum));
}

TEST_CASE("t0_prime large-m limit and derivative at m = 1") {
  const auto lattice = build_lattice(8, 1.0);
  const auto disp = make_dispersion(lattice);
  const double m = 1e9;
  CHECK(t0_prime(lattice, disp, m) ==
        doctest::Approx(lattice.sites() / (2.0 * lattice.volume * m)).epsilon(1e-4));
  const double h = 1e-5;
  const double fd =
      (t0_closed_form(lattice, disp, 1.0 + h, 0.0) - t0_closed_form(lattice, disp, 1.0 - h, 0.0)) /
      (2.0 * h);
  CHECK(std::abs(fd - t0_prime(lattice, disp, 1.0)) < 1e-6);
  CHECK_THROWS_AS(t0_prime(lattice, disp, 0.0), ValidationError);
}

TEST_CASE("log offset of the gap solution settles as side grows") {
  // At lambda = 2 the solved mass sits well above the first nonzero mode, so
  // ln m + 4 pi / lambda - ln(cutoff^2) converges quickly.
  std::vector<double> offsets;
  for (int side : {32, 64, 128}) {
    const auto lattice = build_lattice(side, 1.0);
    const auto sol = solve_gap(lattice, make_dispersion(lattice), 2.0);
    offsets.push_back(std::log(sol.m) + 2.0 * std::numbers::pi -
                      std::log(lattice.cutoff * lattice.cutoff));
  }
  CHECK(std::abs(offsets[2] - offsets[1]) < std::abs(offsets[1] - offsets[0]));
  CHECK(std::abs(offsets[2] - offsets[1]) < 1e-3);
  CHECK(std::abs(offsets[2]) < 1.5);
}

TEST_CASE("stationarity identities") {
  StationarityState s{.t = 0.0, .t0 = 3.0, .t0_prime = 0.25, .a = 4.0, .a_prime = 0.0,
                      .volume = 2.0, .lambda = 2.0};
  s.t = s.t0 - s.volume / s.a;
  auto [r1, r2] = stationarity_residuals(s);
  CHECK(r1 == 0.0);
  CHECK(std::abs(r2) < 1e-15);  // t0' = 1/(2 lambda), A' = 0

  // Independent re-evaluation at a generic state.
  const StationarityState g{.t = 1.7, .t0 = 1.2, .t0_prime = 0.4, .a = 3.5, .a_prime = -0.8,
                            .volume = 2.5, .lambda = 1.25};
  std::tie(r1, r2) = stationarity_residuals(g);
  CHECK(r1 == doctest::Approx(2.5 + 3.5 * 0.5));
  CHECK(r2 == doctest::Approx(-1.0 - 0.4 * 0.25 - 3.5 * 0.5 * 0.4));
}

TEST_CASE("free_partition_prediction identities") {
  const auto lattice = build_lattice(4, 1.0);
  const auto disp = make_dispersion(lattice);
  CHECK(free_partition_prediction(lattice, disp, 2.0, zero_source(lattice, 3)) == 0.0);
  Rng rng = make_stream(4, 0, 0);
  auto j = random_source(lattice, 3, rng);
  const double v = free_partition_prediction(lattice, disp, 2.0, j);
  for (auto& m : j.values) m = -m;
  CHECK(free_partition_prediction(lattice, disp, 2.0, j) == doctest::Approx(v).epsilon(1e-14));

  Eigen::MatrixXd unit = Eigen::MatrixXd::Zero(3, 3);
  unit(0, 1) = 1.0;
  const double mu0 = 1e8;
  CHECK(free_partition_prediction(lattice, disp, mu0, single_site_source(lattice, 0, unit)) ==
        doctest::Approx(-0.5 / mu0).epsilon(1e-4));
}
