#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "pcmlab/errors.hpp"
#include "pcmlab/orthogonal.hpp"
#include "pcmlab/stats.hpp"

using namespace pcm;

namespace {

long double_factorial(int n) { return n <= 1 ? 1 : n * double_factorial(n - 2); }

}  // namespace

TEST_CASE("OrthogonalMatrix validation") {
  CHECK_NOTHROW(OrthogonalMatrix::identity(3));
  Eigen::MatrixXd bad = Eigen::MatrixXd::Identity(3, 3);
  bad(0, 1) = 1e-6;
  CHECK_THROWS_AS(OrthogonalMatrix{bad}, ValidationError);
  CHECK_THROWS_AS(OrthogonalMatrix(Eigen::MatrixXd::Identity(2, 3)), ValidationError);
}

TEST_CASE("sample_haar N=1 is a fair sign") {
  Rng rng = make_stream(3, 0, 0);
  int plus = 0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const auto o = sample_haar(1, rng);
    CHECK(std::abs(std::abs(o(0, 0)) - 1.0) < 1e-15);
    plus += o(0, 0) > 0;
  }
  CHECK(std::abs(plus - draws / 2.0) < 3.0 * std::sqrt(draws * 0.25));
}

TEST_CASE("sample_haar orthogonality and first moments") {
  Rng rng = make_stream(4, 0, 0);
  const int draws = 10000;
  double s = 0.0, ss = 0.0;
  for (int i = 0; i < draws; ++i) {
    const auto o = sample_haar(4, rng);
    CHECK(orthogonality_defect(o.matrix()) < 1e-12);
    s += o(0, 0);
    ss += o(0, 0) * o(0, 0);
  }
  const double mean = s / draws;
  const double se = std::sqrt((ss / draws - mean * mean) / draws);
  CHECK(std::abs(mean) < 4.0 * se);
}

TEST_CASE("Haar invariance under permutations (two-sample KS)") {
  Rng rng = make_stream(5, 0, 0);
  const int n = 4, draws = 10000;
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n), q = Eigen::MatrixXd::Zero(n, n);
  const int perm_p[] = {2, 0, 3, 1}, perm_q[] = {1, 3, 0, 2};
  for (int i = 0; i < n; ++i) {
    p(i, perm_p[i]) = 1.0;
    q(i, perm_q[i]) = 1.0;
  }
  std::vector<double> a, b;
  for (int i = 0; i < draws; ++i) {
    a.push_back(sample_haar(n, rng)(0, 0));
    b.push_back((p * sample_haar(n, rng).matrix() * q)(0, 0));
  }
  // 1% critical value for equal sample sizes: 1.628 sqrt(2/n).
  CHECK(ks_statistic(a, b) < 1.628 * std::sqrt(2.0 / draws));
}

TEST_CASE("sample_haar_columns matches the leading columns of sample_haar") {
  Rng a = make_stream(9, 1, 2), b = make_stream(9, 1, 2);
  const auto full = sample_haar(6, a);
  const auto cols = sample_haar_columns(6, 2, b);
  CHECK((full.matrix().leftCols(2) - cols).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("pair partitions") {
  CHECK(enumerate_pair_partitions(2).size() == 1);
  CHECK(enumerate_pair_partitions(2)[0].pairs == std::vector<std::pair<int, int>>{{0, 1}});
  CHECK(enumerate_pair_partitions(4).size() == 3);
  CHECK(enumerate_pair_partitions(6).size() == 15);
  for (int k = 1; k <= 6; ++k) {
    const auto parts = enumerate_pair_partitions(2 * k);
    CHECK(static_cast<long>(parts.size()) == double_factorial(2 * k - 1));
    std::set<std::vector<std::pair<int, int>>> distinct;
    for (const auto& p : parts) {
      std::vector<int> seen(2 * k, 0);
      for (auto [i, j] : p.pairs) {
        CHECK(i < j);
        ++seen[i];
        ++seen[j];
      }
      CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
      distinct.insert(p.pairs);
    }
    CHECK(distinct.size() == parts.size());
  }
  CHECK_THROWS_AS(enumerate_pair_partitions(3), ValidationError);
  CHECK_THROWS_AS(enumerate_pair_partitions(14), ValidationError);
  CHECK_THROWS_AS(enumerate_pair_partitions(0), ValidationError);
}

TEST_CASE("leading_moment examples") {
  CHECK(leading_moment(3, {{1, 1}, {2, 2}}) == doctest::Approx(1.0 / 3.0));
  for (int n : {4, 7}) CHECK(leading_moment(n, {{1, 3}, {2, 4}}) == 0.0);
  CHECK(leading_moment(4, {{1, 1, 1, 1}, {1, 1, 1, 1}}) == doctest::Approx(3.0 / 16.0));
  CHECK(leading_moment(5, {{1, 2, 3}, {1, 2, 3}}) == 0.0);
  CHECK_THROWS_AS(leading_moment(3, {{1, 4}, {1, 1}}), ValidationError);
}

TEST_CASE("mc_moment agrees with the exact k=1 formula") {
  for (int n = 1; n <= 5; ++n) {
    for (int a1 = 1; a1 <= std::min(n, 2); ++a1) {
      for (int b2 = 1; b2 <= std::min(n, 2); ++b2) {
        const MomentSpec spec{{a1, 1}, {1, b2}};
        const auto est = mc_moment(n, spec, 20000, 100 + n, 1);
        const double exact = leading_moment(n, spec);
        CHECK(std::abs(est.estimate - exact) <= 4.0 * est.standard_error + 1e-15);
      }
    }
  }
}

TEST_CASE("mc_moment odd degree vanishes and results ignore worker count") {
  const MomentSpec odd{{1, 2, 1}, {1, 1, 2}};
  const auto est = mc_moment(3, odd, 20000, 7, 1);
  CHECK(std::abs(est.estimate) < 4.0 * est.standard_error);
  const auto again = mc_moment(3, odd, 20000, 7, 4);
  CHECK(est.estimate == again.estimate);
  CHECK(est.standard_error == again.standard_error);
  CHECK_THROWS_AS(mc_moment(3, odd, 50, 7, 1), ValidationError);
}

TEST_CASE("mc_moment O11^4 at N=4") {
  // Oracle: the first column of a Haar matrix is uniform on the sphere, so
  // E[O11^4] = 3 / (N (N + 2)) = 0.125 at N = 4.
  const auto est = mc_moment(4, {{1, 1, 1, 1}, {1, 1, 1, 1}}, 1'000'000, 11, 0);
  CHECK(std::abs(est.estimate - 0.125) < 4.0 * est.standard_error);
}

TEST_CASE("spectrum_ensemble moments") {
  const auto c = spectrum_ensemble({2.5, 2.5, 2.5});
  CHECK(c.mean() == 2.5);
  CHECK(c.mean_square() == 6.25);
  const auto pm = spectrum_ensemble({-1.0, 1.0});
  CHECK(pm.mean() == 0.0);
  CHECK(pm.mean_square() == 1.0);
  double total = 0.0;
  for (auto [v, w] : pm.density()) total += w;
  CHECK(total == doctest::Approx(1.0));
  CHECK(pm.expectation([](double m) { return m * m; }) == doctest::Approx(1.0));

  Rng rng = make_stream(12, 0, 0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> values(100);
  for (auto& v : values) v = u(rng);
  const auto s = spectrum_ensemble(values);
  CHECK(std::abs(s.mean() - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / 100.0));
  CHECK(s.mean_square() >= s.mean() * s.mean());
  CHECK_THROWS_AS(spectrum_ensemble({}), ValidationError);

  const auto tp = two_point_spectrum(0.0, 1.0, 5);
  CHECK(tp.values() == std::vector<double>{0, 0, 1, 1, 1});
}

TEST_CASE("mc_moment O12^2 at N=4") {
  const auto est = mc_moment(4, {{1, 1}, {2, 2}}, 100000, 21, 0);
  CHECK(std::abs(est.estimate - 0.25) < 4.0 * est.standard_error);
}

TEST_CASE("N^2 E[O11^2 O22^2] approaches 1 as N grows") {
  const MomentSpec spec{{1, 1, 2, 2}, {1, 1, 2, 2}};
  const auto small = mc_moment(8, spec, 400000, 31, 0);
  const auto large = mc_moment(64, spec, 400000, 32, 0);
  const double dev_small = std::abs(64.0 * small.estimate - 1.0);
  const double dev_large = std::abs(4096.0 * large.estimate - 1.0);
  CHECK(dev_large < 4.0 * 4096.0 * large.standard_error);
  CHECK(dev_large < dev_small);
}
