#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pcmlab/random.hpp"

namespace pcm {

inline constexpr double kOrthogonalityTolerance = 1e-10;

/// An element of O(N). Construction checks max|O^T O - I| against a
/// tolerance (1e-10 unless stated otherwise).
class OrthogonalMatrix {
 public:
  explicit OrthogonalMatrix(Eigen::MatrixXd entries,
                            double tolerance = kOrthogonalityTolerance);

  static OrthogonalMatrix identity(int n);

  const Eigen::MatrixXd& matrix() const { return entries_; }
  int dimension() const { return static_cast<int>(entries_.rows()); }
  double operator()(int row, int col) const { return entries_(row, col); }

 private:
  Eigen::MatrixXd entries_;
};

/// max_{ij} |(A^T A - I)_{ij}|.
double orthogonality_defect(const Eigen::MatrixXd& a);

/// Orthonormalizes the columns of z by Householder QR and flips column signs
/// so that R has a positive diagonal. Applied to i.i.d. standard normals this
/// yields Haar-distributed columns.
Eigen::MatrixXd orthonormalize_columns(const Eigen::MatrixXd& z);

/// Haar-distributed element of O(N). Normals are drawn column by column.
OrthogonalMatrix sample_haar(int n, Rng& rng);

/// The first k columns of a Haar O(N) matrix (N x k), consuming the same
/// normals sample_haar would use for those columns.
Eigen::MatrixXd sample_haar_columns(int n, int k, Rng& rng);

/// A perfect matching of {0, ..., 2k-1}; pairs are (smaller, larger) and
/// sorted by first element.
struct PairPartition {
  std::vector<std::pair<int, int>> pairs;
};

/// All (2k-1)!! matchings of two_k elements in canonical order (element 0 is
/// paired with 1, 2, ... in turn, recursively). two_k must be even, <= 12.
std::vector<PairPartition> enumerate_pair_partitions(int two_k);

/// Index lists for the monomial O_{a1 b1} ... O_{a_2k b_2k}, 1-based.
struct MomentSpec {
  std::vector<int> rows;
  std::vector<int> cols;

  int degree() const { return static_cast<int>(rows.size()); }
  void validate(int n) const;
};

/// N^{-k} sum over pair partitions of prod delta_{a a'} delta_{b b'}: the
/// large-N leading term of the Haar moment (exact for k = 1). Odd degree
/// gives 0.
double leading_moment(int n, const MomentSpec& spec);

struct MomentEstimate {
  double estimate = 0.0;
  double standard_error = 0.0;
  std::size_t samples = 0;
};

/// Monte Carlo mean and standard error of the monomial over independent Haar
/// draws. Draws are split into fixed chunks with streams (seed, chunk), so
/// the result does not depend on `workers`.
MomentEstimate mc_moment(int n, const MomentSpec& spec, std::size_t samples,
                         std::uint64_t seed, unsigned workers = 1);

/// Eigenvalue vector of the multiplier field with its empirical density
/// rho = (1/N) sum_a delta(. - M_a) and first two moments.
class SpectrumEnsemble {
 public:
  const std::vector<double>& values() const { return values_; }
  int size() const { return static_cast<int>(values_.size()); }
  double mean() const { return mean_; }
  double mean_square() const { return mean_square_; }
  double min() const;
  double max_abs() const;

  /// int f(M) rho(M) dM.
  double expectation(const std::function<double(double)>& f) const;
  /// rho as (value, weight) atoms, weights summing to one.
  std::vector<std::pair<double, double>> density() const;

 private:
  friend SpectrumEnsemble spectrum_ensemble(std::vector<double> values);
  std::vector<double> values_;
  double mean_ = 0.0;
  double mean_square_ = 0.0;
};

/// Throws ValidationError for an empty list.
SpectrumEnsemble spectrum_ensemble(std::vector<double> values);

/// Equal-weight two-point spectrum: floor(N/2) entries m1, the rest m2.
SpectrumEnsemble two_point_spectrum(double m1, double m2, int n);

}  // namespace pcm
