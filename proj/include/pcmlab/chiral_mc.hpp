#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "pcmlab/lattice.hpp"
#include "pcmlab/random.hpp"

namespace pcm {

/// givens:            left-multiply by a rotation in a random coordinate
///                    plane with angle uniform in (-epsilon, epsilon);
///                    every `reflector_every`-th sweep flips a random row.
/// haar_independence: replace phi(x) by a fresh Haar draw (second sampler
///                    used to cross-check the first).
enum class ProposalKind { givens, haar_independence };

std::string_view to_string(ProposalKind kind);
ProposalKind parse_proposal(std::string_view name);

struct McParams {
  int n = 2;
  double lambda = 1.0;  // +infinity means zero action
  LatticeSpec lattice;
  int thermalization = 1000;
  int sweeps = 10000;          // sweeps in the measurement phase
  int measure_every = 1;       // sweeps between measurements
  double epsilon = 0.5;        // initial proposal angle
  bool adapt_epsilon = true;   // tune to 40-60% acceptance while thermalizing
  int hits = 0;                // proposals per site and sweep (0 -> N)
  int reflector_every = 10;
  int reorthogonalize_every = 10;
  bool hot_start = false;
  ProposalKind proposal = ProposalKind::givens;
  std::uint64_t seed = 1;
  std::uint64_t point = 0;  // chain index in the seed derivation

  void validate() const;
  int effective_hits() const { return hits > 0 ? hits : n; }
};

/// phi(x) in O(N) at every site.
class FieldConfig {
 public:
  FieldConfig(LatticeSpec lattice, std::vector<Eigen::MatrixXd> phi);

  static FieldConfig cold(const LatticeSpec& lattice, int n);
  static FieldConfig hot(const LatticeSpec& lattice, int n, Rng& rng);

  const LatticeSpec& lattice() const { return lattice_; }
  int n() const { return n_; }
  const Eigen::MatrixXd& operator[](int site) const { return phi_[site]; }
  Eigen::MatrixXd& operator[](int site) { return phi_[site]; }
  const std::vector<Eigen::MatrixXd>& sites() const { return phi_; }

  /// max_x max|phi^T phi - I|.
  double max_defect() const;
  /// Sign-fixed QR at every site.
  void reorthogonalize();
  /// phi(x) -> R phi(x) at every site.
  void left_multiply(const Eigen::MatrixXd& r);

 private:
  LatticeSpec lattice_;
  int n_;
  std::vector<Eigen::MatrixXd> phi_;
};

/// S = (N/lambda) sum_{x, mu} Tr[I - phi(x)^T phi(x + mu)].
double action(const FieldConfig& config, double lambda);

/// (1 / (2 sites N)) sum_{x, mu} Tr[I - phi(x)^T phi(x + mu)], in [0, 2].
double link_energy(const FieldConfig& config);

struct SweepResult {
  std::size_t proposed = 0;
  std::size_t accepted = 0;
  double acceptance_rate() const {
    return proposed == 0 ? 1.0 : static_cast<double>(accepted) / static_cast<double>(proposed);
  }
};

/// One pass over all sites in lexicographic order. `reflector` switches the
/// Givens scheme to row-sign flips for this sweep (always the case for N=1,
/// where half of the proposals are the identity to keep the chain ergodic).
SweepResult metropolis_sweep(FieldConfig& config, const McParams& params, double epsilon,
                             bool reflector, Rng& rng);

/// Per-measurement observables.
struct Measurement {
  double energy = 0.0;
  std::vector<double> correlator;  // C_raw(r), r = 0..side/2, both axes averaged
  Eigen::MatrixXd magnetization;   // (1/sites) sum_x phi(x)
};

Measurement measure(const FieldConfig& config);

struct ChainResult {
  std::vector<Measurement> measurements;
  double acceptance = 0.0;  // measurement phase
  double epsilon = 0.0;     // after adaptation
  double max_defect = 0.0;  // largest orthogonality defect seen
  FieldConfig final_config;
};

ChainResult run_chain(const McParams& params);

struct CorrelatorEstimate {
  std::vector<int> r;
  std::vector<double> value;  // connected, reflection-averaged
  std::vector<double> error;
  /// Leave-one-bin-out estimates, one row per bin (empty for synthetic input).
  std::vector<std::vector<double>> jackknife;
  double tau_energy = 0.5;
  double tau_correlator = 0.5;
  std::size_t bin_size = 1;
  std::size_t bins = 0;
  int side = 0;
};

/// Bins measurements by more than twice the larger integrated
/// autocorrelation time (energy, C(side/2)) and requires at least
/// `min_bins` bins, otherwise NumericalError. The disconnected piece
/// (1/N) Tr(mbar^T mbar) uses the ensemble magnetization of each jackknife
/// sample.
CorrelatorEstimate measure_correlator(const std::vector<Measurement>& measurements, int side,
                                      std::size_t min_bins = 100);

/// Wraps exact values (no errors) for effective-mass extraction.
CorrelatorEstimate synthetic_correlator(const std::vector<double>& values, int side);

struct EffectiveMass {
  std::vector<int> r;
  std::vector<double> mass;
  std::vector<double> error;
  int window_lo = 0;
  int window_hi = 0;
  double plateau = 0.0;
  double plateau_error = 0.0;
  double chi2_per_dof = 0.0;  // uncorrelated, for plateau quality
  bool correlated = false;  // full covariance used in the plateau fit
};

/// m_eff(r) from C(r)/C(r+1) = cosh(m(r - side/2)) / cosh(m(r + 1 - side/2)),
/// r = 0..side/2 - 1. The plateau is a constant fit over [lo, hi] (default
/// [2, side/2 - 1]) with the jackknife covariance when it is usable.
/// Non-positive or rising correlators inside the window raise NumericalError.
EffectiveMass effective_mass(const CorrelatorEstimate& corr, int window_lo = -1,
                             int window_hi = -1);

/// Largest window [lo, hi'] with hi' <= hi on which C stays positive and
/// non-increasing; throws NumericalError if fewer than two points remain.
std::pair<int, int> usable_window(const CorrelatorEstimate& corr, int lo, int hi);

/// Scans lo upward from window_lo and returns the first fit on [lo, window_hi]
/// (at least min_points points) with chi2_per_dof <= max_chi2. Throws
/// NumericalError with the smallest chi2_per_dof seen when none qualifies.
EffectiveMass find_plateau(const CorrelatorEstimate& corr, int window_lo, int window_hi,
                           int min_points = 3, double max_chi2 = 2.0);

}  // namespace pcm
