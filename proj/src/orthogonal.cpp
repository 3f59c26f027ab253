#include "pcmlab/orthogonal.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pcmlab/errors.hpp"
#include "pcmlab/parallel.hpp"
#include "pcmlab/stats.hpp"

namespace pcm {

double orthogonality_defect(const Eigen::MatrixXd& a) {
  const Eigen::MatrixXd gram = a.transpose() * a;
  return (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
}

OrthogonalMatrix::OrthogonalMatrix(Eigen::MatrixXd entries, double tolerance)
    : entries_(std::move(entries)) {
  if (entries_.rows() != entries_.cols() || entries_.rows() == 0) {
    throw ValidationError("OrthogonalMatrix: matrix must be square and non-empty");
  }
  const double defect = orthogonality_defect(entries_);
  if (!(defect < tolerance)) {
    std::ostringstream msg;
    msg << "OrthogonalMatrix: orthogonality defect " << defect << " exceeds " << tolerance;
    throw ValidationError(msg.str());
  }
}

OrthogonalMatrix OrthogonalMatrix::identity(int n) {
  return OrthogonalMatrix(Eigen::MatrixXd::Identity(n, n));
}

Eigen::MatrixXd orthonormalize_columns(const Eigen::MatrixXd& z) {
  const Eigen::Index n = z.rows();
  const Eigen::Index k = z.cols();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(z);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, k);
  const auto& r = qr.matrixQR();
  for (Eigen::Index j = 0; j < k; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

namespace {

Eigen::MatrixXd gaussian_matrix(int rows, int cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd z(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) z(i, j) = normal(rng);
  }
  return z;
}

}  // namespace

OrthogonalMatrix sample_haar(int n, Rng& rng) {
  if (n < 1) throw ValidationError("sample_haar: N must be >= 1");
  return OrthogonalMatrix(orthonormalize_columns(gaussian_matrix(n, n, rng)));
}

Eigen::MatrixXd sample_haar_columns(int n, int k, Rng& rng) {
  if (n < 1 || k < 1 || k > n) {
    throw ValidationError("sample_haar_columns: need 1 <= k <= N");
  }
  return orthonormalize_columns(gaussian_matrix(n, k, rng));
}

std::vector<PairPartition> enumerate_pair_partitions(int two_k) {
  if (two_k <= 0 || two_k % 2 != 0) {
    throw ValidationError("enumerate_pair_partitions: size must be a positive even integer, got " +
                          std::to_string(two_k));
  }
  if (two_k > 12) {
    throw ValidationError("enumerate_pair_partitions: size " + std::to_string(two_k) +
                          " exceeds the limit of 12");
  }
  std::vector<PairPartition> out;
  std::vector<std::pair<int, int>> current;
  std::vector<bool> used(two_k, false);

  auto recurse = [&](auto&& self) -> void {
    const auto first = std::find(used.begin(), used.end(), false);
    if (first == used.end()) {
      out.push_back({current});
      return;
    }
    const int i = static_cast<int>(first - used.begin());
    used[i] = true;
    for (int j = i + 1; j < two_k; ++j) {
      if (used[j]) continue;
      used[j] = true;
      current.emplace_back(i, j);
      self(self);
      current.pop_back();
      used[j] = false;
    }
    used[i] = false;
  };
  recurse(recurse);
  return out;
}

void MomentSpec::validate(int n) const {
  if (rows.size() != cols.size()) {
    throw ValidationError("MomentSpec: row and column index lists differ in length");
  }
  if (rows.empty()) throw ValidationError("MomentSpec: empty index list");
  auto in_range = [n](int v) { return v >= 1 && v <= n; };
  if (!std::all_of(rows.begin(), rows.end(), in_range) ||
      !std::all_of(cols.begin(), cols.end(), in_range)) {
    throw ValidationError("MomentSpec: indices must lie in 1..N with N = " + std::to_string(n));
  }
}

double leading_moment(int n, const MomentSpec& spec) {
  if (n < 1) throw ValidationError("leading_moment: N must be >= 1");
  spec.validate(n);
  const int degree = spec.degree();
  if (degree % 2 != 0) return 0.0;
  if (degree > 12) throw ValidationError("leading_moment: degree above 12 is not supported");

  std::size_t matches = 0;
  for (const auto& partition : enumerate_pair_partitions(degree)) {
    const bool all = std::all_of(partition.pairs.begin(), partition.pairs.end(), [&](auto pr) {
      return spec.rows[pr.first] == spec.rows[pr.second] &&
             spec.cols[pr.first] == spec.cols[pr.second];
    });
    if (all) ++matches;
  }
  return static_cast<double>(matches) / std::pow(static_cast<double>(n), degree / 2);
}

MomentEstimate mc_moment(int n, const MomentSpec& spec, std::size_t samples, std::uint64_t seed,
                         unsigned workers) {
  if (n < 1) throw ValidationError("mc_moment: N must be >= 1");
  spec.validate(n);
  if (samples < 100) throw ValidationError("mc_moment: need at least 100 samples");

  // Only the columns that appear in the monomial are generated.
  std::vector<int> needed(spec.cols.begin(), spec.cols.end());
  std::sort(needed.begin(), needed.end());
  needed.erase(std::unique(needed.begin(), needed.end()), needed.end());
  const int k = needed.back();

  constexpr std::size_t kChunks = 64;
  struct Partial {
    std::size_t count = 0;
    double mean = 0.0;
    double m2 = 0.0;
  };
  std::vector<Partial> partials(kChunks);

  parallel_for(kChunks, workers, [&](std::size_t chunk) {
    const std::size_t begin = samples * chunk / kChunks;
    const std::size_t end = samples * (chunk + 1) / kChunks;
    Rng rng = make_stream(seed, 0, chunk);
    Partial p;
    for (std::size_t s = begin; s < end; ++s) {
      const Eigen::MatrixXd cols = sample_haar_columns(n, k, rng);
      double value = 1.0;
      for (int i = 0; i < spec.degree(); ++i) value *= cols(spec.rows[i] - 1, spec.cols[i] - 1);
      ++p.count;
      const double delta = value - p.mean;
      p.mean += delta / static_cast<double>(p.count);
      p.m2 += delta * (value - p.mean);
    }
    partials[chunk] = p;
  });

  Partial total;
  for (const auto& p : partials) {
    if (p.count == 0) continue;
    const double na = static_cast<double>(total.count);
    const double nb = static_cast<double>(p.count);
    const double delta = p.mean - total.mean;
    total.count += p.count;
    total.mean += delta * nb / (na + nb);
    total.m2 += p.m2 + delta * delta * na * nb / (na + nb);
  }
  MomentEstimate out;
  out.samples = total.count;
  out.estimate = total.mean;
  const double variance = total.m2 / static_cast<double>(total.count - 1);
  out.standard_error = std::sqrt(variance / static_cast<double>(total.count));
  return out;
}

double SpectrumEnsemble::min() const { return *std::min_element(values_.begin(), values_.end()); }

double SpectrumEnsemble::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

double SpectrumEnsemble::expectation(const std::function<double(double)>& f) const {
  CompensatedSum acc;
  for (double v : values_) acc.add(f(v));
  return acc.value() / static_cast<double>(values_.size());
}

std::vector<std::pair<double, double>> SpectrumEnsemble::density() const {
  std::vector<std::pair<double, double>> atoms;
  const double w = 1.0 / static_cast<double>(values_.size());
  for (double v : values_) atoms.emplace_back(v, w);
  return atoms;
}

SpectrumEnsemble spectrum_ensemble(std::vector<double> values) {
  if (values.empty()) throw ValidationError("spectrum_ensemble: empty eigenvalue list");
  for (double v : values) {
    if (!std::isfinite(v)) throw ValidationError("spectrum_ensemble: non-finite eigenvalue");
  }
  SpectrumEnsemble s;
  s.values_ = std::move(values);
  CompensatedSum sum, sum_sq;
  for (double v : s.values_) {
    sum.add(v);
    sum_sq.add(v * v);
  }
  const double n = static_cast<double>(s.values_.size());
  s.mean_ = sum.value() / n;
  // Clamp protects mean_square >= mean^2 against last-bit rounding.
  s.mean_square_ = std::max(sum_sq.value() / n, s.mean_ * s.mean_);
  return s;
}

SpectrumEnsemble two_point_spectrum(double m1, double m2, int n) {
  if (n < 1) throw ValidationError("two_point_spectrum: N must be >= 1");
  std::vector<double> values(n, m2);
  std::fill(values.begin(), values.begin() + n / 2, m1);
  return spectrum_ensemble(std::move(values));
}

}  // namespace pcm
