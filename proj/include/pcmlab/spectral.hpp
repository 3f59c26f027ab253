#pragma once

#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "pcmlab/lattice.hpp"
#include "pcmlab/orthogonal.hpp"
#include "pcmlab/random.hpp"

namespace pcm {

/// Per-site orthogonal matrices O(x) sharing one eigenvalue vector M.
/// The multiplier at site x is O(x)^T diag(M) O(x).
struct MultiplierField {
  LatticeSpec lattice;
  SpectrumEnsemble spectrum;
  std::vector<Eigen::MatrixXd> rotations;

  int n() const { return spectrum.size(); }
  /// O(x)^T diag(M) O(x).
  Eigen::MatrixXd multiplier(int site) const;
};

/// Validates one N x N orthogonal matrix per site (defect < 1e-10).
MultiplierField make_field(const LatticeSpec& lattice, SpectrumEnsemble spectrum,
                           std::vector<Eigen::MatrixXd> rotations);
/// Independent Haar matrix at every site, drawn in site order from `rng`.
MultiplierField random_field(const LatticeSpec& lattice, SpectrumEnsemble spectrum, Rng& rng);
MultiplierField identity_field(const LatticeSpec& lattice, SpectrumEnsemble spectrum);

/// N x N source matrix J(x) per site.
struct SourceField {
  std::vector<Eigen::MatrixXd> values;

  int n() const { return values.empty() ? 0 : static_cast<int>(values.front().rows()); }
  /// max_x ||J(x)||_HS^2.
  double max_norm_squared() const;
};

SourceField zero_source(const LatticeSpec& lattice, int n);
/// Gaussian entries rescaled to unit Hilbert-Schmidt norm at every site.
SourceField random_source(const LatticeSpec& lattice, int n, Rng& rng);
/// J(site) = value, zero elsewhere.
SourceField single_site_source(const LatticeSpec& lattice, int site, Eigen::MatrixXd value);

/// K = (-laplacian + mu) (x) I_N + blockdiag_x O(x)^T M O(x), acting on
/// vectors indexed by (x, a) -> x*N + a.
class KOperator {
 public:
  KOperator(FreeOperator free, MultiplierField field);

  int dimension() const { return free_.lattice().sites() * field_.n(); }
  int n() const { return field_.n(); }
  double mu() const { return free_.mu(); }
  const FreeOperator& free() const { return free_; }
  const MultiplierField& field() const { return field_; }
  const Eigen::MatrixXd& block(int site) const { return blocks_[site]; }

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
  /// Dense realization; throws ValidationError above dimension 4096.
  Eigen::MatrixXd dense() const;

 private:
  FreeOperator free_;
  MultiplierField field_;
  std::vector<Eigen::MatrixXd> blocks_;
};

inline constexpr int kDenseLimit = 4096;

/// Rejects mu + min M <= 0 (the margin is reported) and source/field shape
/// mismatches.
KOperator assemble_K(const LatticeSpec& lattice, const Dispersion& dispersion, double mu,
                     MultiplierField field);

/// How log det K and K^{-1} are evaluated.
///   dense:       Cholesky of the full matrix (dimension <= 4096).
///   capacitance: K = (A (x) I) + W D W^T with A = -laplacian + mu + min M
///                and D holding the excess eigenvalues; only a
///                (sites * r) system is factorized, r = #{a : M_a > min M}.
///   automatic:   capacitance when r <= N/2 or the dense limit is exceeded.
enum class LogDetRoute { automatic, dense, capacitance };

std::string_view to_string(LogDetRoute route);
LogDetRoute parse_route(std::string_view name);

/// log det K. A failed factorization raises NumericalError naming the
/// smallest eigenvalue of the factorized matrix.
double log_det(const KOperator& k, LogDetRoute route = LogDetRoute::automatic);

/// log det of a symmetric positive definite matrix by Cholesky.
double log_det_spd(const Eigen::MatrixXd& a);

/// (1 / (2 N V)) log det K.
double t_of_O(const KOperator& k, LogDetRoute route = LogDetRoute::automatic);

/// (1 / 2V) sum_p ln(disp(p) + mu + mbar). Requires mu + mbar > 0.
double t0_closed_form(const LatticeSpec& lattice, const Dispersion& dispersion, double mu,
                      double mbar);

/// sum_b J_b^T K^{-1} J_b with J_b(x, a) = J(x)_{ab}. With M = 0 this is
/// exactly sum_b J_b^T G J_b for the lattice propagator G of mass mu.
double j_functional(const KOperator& k, const SourceField& j,
                    LogDetRoute route = LogDetRoute::automatic);

/// sum_b J_b^T (G_{mu + mbar} (x) I) J_b.
double averaged_j_prediction(const LatticeSpec& lattice, const Dispersion& dispersion, double mu,
                             double mbar, const SourceField& j);

struct LipschitzCheck {
  double difference = 0.0;  // |j(O) - j(O')|
  double distance = 0.0;    // sum_x ||O(x) - O'(x)||_HS
  double ratio = 0.0;
  double bound = 0.0;       // 2 max_x ||J(x)||_HS^2 ||M||^2 / mu^2, ||M|| = max |M_a|
  bool within_bound = false;
};

/// Both fields must share lattice and spectrum; identical fields are
/// rejected.
LipschitzCheck lipschitz_ratio(const LatticeSpec& lattice, const Dispersion& dispersion,
                               const SourceField& j, double mu, const MultiplierField& first,
                               const MultiplierField& second);

/// (1/N^2) (4 m2bar mbar^4 + m2bar^2) V / side^4. Only the scaling is
/// meaningful; the prefactor is undetermined.
double variance_prediction(const LatticeSpec& lattice, int n, double mbar, double m2bar);

}  // namespace pcm
