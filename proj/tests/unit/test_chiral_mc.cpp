#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>

#include "pcmlab/chiral_mc.hpp"
#include "pcmlab/errors.hpp"
#include "pcmlab/orthogonal.hpp"
#include "pcmlab/stats.hpp"

using namespace pcm;

namespace {

// Independent double loop over sites and both forward directions.
double reference_action(const FieldConfig& c, double lambda) {
  const auto& lat = c.lattice();
  const int n = c.n();
  double s = 0.0;
  for (int y = 0; y < lat.side; ++y)
    for (int x = 0; x < lat.side; ++x) {
      const Eigen::MatrixXd& here = c[site_index(lat, {x, y})];
      const Eigen::MatrixXd& right = c[site_index(lat, {(x + 1) % lat.side, y})];
      const Eigen::MatrixXd& up = c[site_index(lat, {x, (y + 1) % lat.side})];
      s += n - (here.transpose() * right).trace();
      s += n - (here.transpose() * up).trace();
    }
  return n / lambda * s;
}

struct MeanWithError {
  double mean;
  double error;
};

MeanWithError binned_mean(const std::vector<double>& series, std::size_t bin) {
  const auto bins = bin_series(series, bin);
  double mean = 0.0;
  for (double b : bins) mean += b;
  mean /= bins.size();
  double var = 0.0;
  for (double b : bins) var += (b - mean) * (b - mean);
  var /= (bins.size() - 1.0);
  return {mean, std::sqrt(var / bins.size())};
}

McParams small_params(int n, double lambda, int side) {
  McParams p;
  p.n = n;
  p.lambda = lambda;
  p.lattice = build_lattice(side, 1.0);
  p.thermalization = 500;
  p.sweeps = 20000;
  return p;
}

}  // namespace

TEST_CASE("action on cold and hot configurations") {
  const auto lat = build_lattice(4, 1.0);
  const auto cold = FieldConfig::cold(lat, 3);
  CHECK(action(cold, 1.0) == 0.0);
  CHECK(link_energy(cold) == 0.0);
  Rng rng = make_stream(1, 0, 0);
  const auto hot = FieldConfig::hot(lat, 3, rng);
  CHECK(action(hot, 0.7) == doctest::Approx(reference_action(hot, 0.7)).epsilon(1e-12));
  CHECK(action(hot, std::numeric_limits<double>::infinity()) == 0.0);
  const double e = link_energy(hot);
  CHECK(e > 0.0);
  CHECK(e < 2.0);
  CHECK(action(hot, 2.0) == doctest::Approx(3.0 / 2.0 * 2.0 * 16 * 3 * e));
}

TEST_CASE("N=1 sign field reduces to the Ising energy") {
  const auto lat = build_lattice(4, 1.0);
  Rng rng = make_stream(5, 0, 0);
  std::vector<Eigen::MatrixXd> phi(16, Eigen::MatrixXd::Ones(1, 1));
  std::vector<int> spin(16, 1);
  for (int s = 0; s < 16; ++s)
    if (rng() & 1) {
      phi[s](0, 0) = -1.0;
      spin[s] = -1;
    }
  const FieldConfig config(lat, phi);
  double ising = 0.0;
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      const int here = spin[site_index(lat, {x, y})];
      ising += 1 - here * spin[site_index(lat, {(x + 1) % 4, y})];
      ising += 1 - here * spin[site_index(lat, {x, (y + 1) % 4})];
    }
  CHECK(action(config, 0.5) == doctest::Approx(ising / 0.5).epsilon(1e-14));
}

TEST_CASE("N=2 action matches the double loop") {
  const auto lat = build_lattice(4, 1.0);
  Rng rng = make_stream(8, 0, 0);
  const auto config = FieldConfig::hot(lat, 2, rng);
  CHECK(std::abs(action(config, 1.7) - reference_action(config, 1.7)) < 1e-10);
}

TEST_CASE("action is invariant under a global left rotation") {
  const auto lat = build_lattice(4, 1.0);
  Rng rng = make_stream(2, 0, 0);
  auto config = FieldConfig::hot(lat, 4, rng);
  const double before = action(config, 1.3);
  config.left_multiply(sample_haar(4, rng).matrix());
  CHECK(action(config, 1.3) == doctest::Approx(before).epsilon(1e-12));
  CHECK(config.max_defect() < 1e-12);
}

TEST_CASE("FieldConfig rejects non-orthogonal input") {
  const auto lat = build_lattice(2, 1.0);
  std::vector<Eigen::MatrixXd> phi(4, Eigen::MatrixXd::Identity(2, 2));
  phi[1](0, 0) = 1.0 + 1e-6;
  CHECK_THROWS_AS(FieldConfig(lat, phi), ValidationError);
}

TEST_CASE("cold configuration measurement") {
  const auto m = measure(FieldConfig::cold(build_lattice(6, 1.0), 2));
  CHECK(m.energy == 0.0);
  CHECK(m.correlator.size() == 4);
  for (double c : m.correlator) CHECK(c == doctest::Approx(1.0));
  CHECK((m.magnetization - Eigen::MatrixXd::Identity(2, 2)).norm() < 1e-15);
}

TEST_CASE("N=1 on side 2 reproduces the exact Boltzmann distribution") {
  // 4 Ising-like sites, 16 states, enumerated exactly.
  const auto lat = build_lattice(2, 1.0);
  const double lambda = 1.0;
  std::array<double, 16> weight{};
  double z = 0.0;
  for (int code = 0; code < 16; ++code) {
    std::vector<Eigen::MatrixXd> phi(4, Eigen::MatrixXd::Ones(1, 1));
    for (int s = 0; s < 4; ++s)
      if (code >> s & 1) phi[s](0, 0) = -1.0;
    weight[code] = std::exp(-reference_action(FieldConfig(lat, phi), lambda));
    z += weight[code];
  }

  // 250k sweeps of 4 sites: 10^6 single-site updates.
  auto p = small_params(1, lambda, 2);
  auto config = FieldConfig::cold(lat, 1);
  Rng rng = make_stream(3, 0, 0);
  const int sweeps = 250000;
  std::vector<int> codes(sweeps);
  for (int i = 0; i < 1000; ++i) metropolis_sweep(config, p, 0.5, false, rng);
  for (int i = 0; i < sweeps; ++i) {
    metropolis_sweep(config, p, 0.5, false, rng);
    int code = 0;
    for (int s = 0; s < 4; ++s)
      if (config[s](0, 0) < 0) code |= 1 << s;
    codes[i] = code;
  }
  std::vector<double> hits(sweeps);
  for (int code = 0; code < 16; ++code) {
    for (int i = 0; i < sweeps; ++i) hits[i] = codes[i] == code ? 1.0 : 0.0;
    const auto f = binned_mean(hits, 5000);
    const double expected = weight[code] / z;
    // States with ~0 expected visits have no binned spread; use the counting error.
    const double error = std::max(f.error, std::sqrt(expected / sweeps));
    CHECK(std::abs(f.mean - expected) < 3.0 * error);
  }
}

TEST_CASE("lambda = infinity accepts every proposal") {
  for (auto kind : {ProposalKind::givens, ProposalKind::haar_independence}) {
    auto p = small_params(3, std::numeric_limits<double>::infinity(), 4);
    p.proposal = kind;
    p.thermalization = 10;
    p.sweeps = 50;
    const auto chain = run_chain(p);
    CHECK(chain.acceptance == 1.0);
  }
}

TEST_CASE("Givens and Haar-independence samplers agree on the energy") {
  auto p = small_params(2, 2.0, 4);
  p.sweeps = 100000;
  const auto givens = run_chain(p);
  p.proposal = ProposalKind::haar_independence;
  p.seed = 2;
  const auto haar = run_chain(p);
  std::vector<double> eg, eh;
  for (const auto& m : givens.measurements) eg.push_back(m.energy);
  for (const auto& m : haar.measurements) eh.push_back(m.energy);
  const auto a = binned_mean(eg, 500);
  const auto b = binned_mean(eh, 500);
  CHECK(std::abs(a.mean - b.mean) < 3.0 * std::hypot(a.error, b.error));
  CHECK(givens.acceptance > 0.2);
  CHECK(givens.acceptance < 0.8);
}

TEST_CASE("orthogonality drift stays small") {
  auto p = small_params(4, 1.0, 4);
  p.sweeps = 5000;
  p.reorthogonalize_every = 100;
  const auto chain = run_chain(p);
  CHECK(chain.max_defect < 1e-8);
  CHECK(chain.final_config.max_defect() < 1e-8);
}

TEST_CASE("orthogonality drift at the default reorthogonalization interval") {
  auto p = small_params(3, 1.0, 4);
  p.thermalization = 0;
  p.sweeps = 10000;
  p.measure_every = 100;
  const auto chain = run_chain(p);
  CHECK(chain.max_defect < 1e-10);
}

TEST_CASE("tiny epsilon leaves the configuration in place") {
  const auto lat = build_lattice(4, 1.0);
  Rng rng = make_stream(6, 0, 0);
  auto config = FieldConfig::hot(lat, 3, rng);
  const auto before = config.sites();
  const auto p = small_params(3, 1.0, 4);
  const auto r = metropolis_sweep(config, p, 1e-9, false, rng);
  CHECK(r.acceptance_rate() > 0.999);
  for (int s = 0; s < lat.sites(); ++s) CHECK((config[s] - before[s]).norm() < 1e-8);
}

TEST_CASE("frozen cold start at tiny lambda keeps a flat correlator") {
  auto p = small_params(2, 1e-6, 6);
  p.thermalization = 10;
  p.sweeps = 50;
  p.adapt_epsilon = false;
  const auto chain = run_chain(p);
  CHECK(chain.acceptance == 0.0);
  for (const auto& m : chain.measurements)
    for (double c : m.correlator) CHECK(c == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("correlator is invariant under a global left rotation") {
  const auto lat = build_lattice(6, 1.0);
  Rng rng = make_stream(7, 0, 0);
  auto config = FieldConfig::hot(lat, 3, rng);
  const auto before = measure(config);
  config.left_multiply(sample_haar(3, rng).matrix());
  const auto after = measure(config);
  REQUIRE(before.correlator.size() == after.correlator.size());
  for (std::size_t r = 0; r < before.correlator.size(); ++r)
    CHECK(std::abs(before.correlator[r] - after.correlator[r]) < 1e-10);
  CHECK(std::abs(before.energy - after.energy) < 1e-10);
}

TEST_CASE("run_chain is reproducible") {
  auto p = small_params(2, 1.5, 4);
  p.sweeps = 200;
  const auto a = run_chain(p);
  const auto b = run_chain(p);
  REQUIRE(a.measurements.size() == b.measurements.size());
  for (std::size_t i = 0; i < a.measurements.size(); ++i)
    CHECK(a.measurements[i].energy == b.measurements[i].energy);
  p.n = 0;
  CHECK_THROWS_AS(run_chain(p), ValidationError);
}

TEST_CASE("independent sites: connected correlator is a contact term") {
  // With lambda = infinity the sites are independent Haar matrices, so
  // C(0) = 1/side and C(r > 0) = 0.
  auto p = small_params(2, std::numeric_limits<double>::infinity(), 4);
  p.proposal = ProposalKind::haar_independence;
  const auto chain = run_chain(p);
  const auto corr = measure_correlator(chain.measurements, 4);
  REQUIRE(corr.value.size() == 3);
  CHECK(std::abs(corr.value[0] - 0.25) < 4.0 * corr.error[0]);
  CHECK(std::abs(corr.value[1]) < 4.0 * corr.error[1]);
  CHECK(std::abs(corr.value[2]) < 4.0 * corr.error[2]);
  CHECK(corr.bins >= 100);
  CHECK(corr.jackknife.size() == corr.bins);

  std::vector<Measurement> few(chain.measurements.begin(), chain.measurements.begin() + 50);
  CHECK_THROWS_AS(measure_correlator(few, 4), NumericalError);
}

TEST_CASE("effective mass of exact correlators") {
  const int side = 16;
  std::vector<double> c;
  for (int r = 0; r <= side / 2; ++r) c.push_back(std::cosh(0.5 * (r - side / 2)));
  const auto em = effective_mass(synthetic_correlator(c, side));
  CHECK(em.mass.size() == side / 2);
  for (double m : em.mass) CHECK(m == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(em.plateau == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(em.window_lo == 2);
  CHECK(em.window_hi == side / 2 - 1);

  const auto flat = effective_mass(synthetic_correlator(std::vector<double>(9, 2.0), side));
  for (double m : flat.mass) CHECK(m == 0.0);

  auto rising = c;
  rising[4] = rising[3] * 1.1;
  CHECK_THROWS_AS(effective_mass(synthetic_correlator(rising, side)), NumericalError);
  const auto [lo, hi] = usable_window(synthetic_correlator(rising, side), 0, 7);
  CHECK(lo == 0);
  CHECK(hi == 2);  // m_eff(3) would need C(4) <= C(3)
}

TEST_CASE("find_plateau skips an early curved region") {
  // Exact cosh shape plus a decaying excited state: only late windows are flat.
  const int side = 16;
  std::vector<double> c;
  for (int r = 0; r <= side / 2; ++r)
    c.push_back(std::cosh(0.3 * (r - side / 2)) + 5.0 * std::exp(-2.0 * r));
  auto corr = synthetic_correlator(c, side);
  // Independent 1e-4 jitter per point stands in for jackknife rows.
  std::mt19937_64 rng(17);
  std::normal_distribution<double> noise(0.0, 1e-4);
  for (int b = 0; b < 50; ++b) {
    auto row = c;
    for (auto& v : row) v *= 1.0 + noise(rng);
    corr.jackknife.push_back(row);
  }
  const auto em = find_plateau(corr, 1, 7, 3, 2.0);
  CHECK(em.window_lo > 2);
  CHECK(em.plateau == doctest::Approx(0.3).epsilon(5e-3));
  CHECK_THROWS_AS(find_plateau(corr, 1, 7, 3, 0.0), NumericalError);
}
