#pragma once

#include <complex>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace pcm {

/// Square periodic lattice with side^2 sites covering a physical area
/// `volume`. Derived quantities are fixed at construction.
struct LatticeSpec {
  int side = 0;
  double volume = 0.0;
  double spacing = 0.0;        // sqrt(volume) / side
  double momentum_step = 0.0;  // 2 pi / sqrt(volume)
  double cutoff = 0.0;         // 2 pi side / sqrt(volume) = 2 pi / spacing

  int sites() const { return side * side; }
};

/// Throws ValidationError for side < 2 or volume <= 0.
LatticeSpec build_lattice(int side, double volume);

/// Integer site coordinates, each in [0, side).
struct Site {
  int x = 0;
  int y = 0;
};

inline int site_index(const LatticeSpec& lattice, Site s) { return s.y * lattice.side + s.x; }
inline Site site_at(const LatticeSpec& lattice, int index) {
  return {index % lattice.side, index / lattice.side};
}
/// Neighbour of `index` shifted by (dx, dy) with periodic wrap-around.
int shifted_site(const LatticeSpec& lattice, int index, int dx, int dy);

/// A point of the dual lattice: integer indices and the physical momentum.
struct Momentum {
  int nx = 0;
  int ny = 0;
  double px = 0.0;
  double py = 0.0;
};

struct MomentumGrid {
  std::vector<Momentum> points;
  int min_index = 0;
  int max_index = 0;

  std::size_t count() const { return points.size(); }
};

/// Indices run over {-floor(side/2), ..., ceil(side/2) - 1} in each
/// direction, so even sides carry one unpaired mode at -side/2.
MomentumGrid momentum_grid(const LatticeSpec& lattice);

enum class DispersionKind { continuum, finite_difference };

std::string_view to_string(DispersionKind kind);
DispersionKind parse_dispersion(std::string_view name);

/// p -> p^2 (continuum) or sum_mu (2/a)^2 sin^2(p_mu a / 2) (nearest-neighbour
/// finite differences).
class Dispersion {
 public:
  Dispersion() = default;
  Dispersion(DispersionKind kind, double spacing) : kind_(kind), spacing_(spacing) {}

  DispersionKind kind() const { return kind_; }
  double operator()(double px, double py) const;
  double operator()(const Momentum& p) const { return (*this)(p.px, p.py); }

 private:
  DispersionKind kind_ = DispersionKind::continuum;
  double spacing_ = 1.0;
};

Dispersion make_dispersion(const LatticeSpec& lattice,
                           DispersionKind kind = DispersionKind::continuum);

struct RadialSumCheck {
  double exact_sum = 0.0;
  double disc_approx = 0.0;
  double relative_gap = 0.0;
  double quadrature_error = 0.0;
};

/// Compares sum_p f(|p|) with (V / 2 pi) int_0^{cutoff/2} f(q) q dq.
/// Throws NumericalError if the quadrature misses its tolerance (1e-10
/// absolute or 1e6 evaluations).
RadialSumCheck radial_sum_check(const std::function<double(double)>& f,
                                const LatticeSpec& lattice);

/// (1/side^2) sum_p cos(p.(x-y)) / (disp(p) + m), the (x, y) element of
/// (-laplacian + m)^{-1}. Throws ValidationError for m <= 0.
double propagator(const LatticeSpec& lattice, const Dispersion& dispersion, double m,
                  Site x, Site y);

/// The free operator -laplacian + mu on the torus, diagonal in momentum
/// space. Dense site-space realizations are built from translation kernels.
class FreeOperator {
 public:
  FreeOperator(const LatticeSpec& lattice, const Dispersion& dispersion, double mu);

  const LatticeSpec& lattice() const { return lattice_; }
  const Dispersion& dispersion() const { return dispersion_; }
  double mu() const { return mu_; }

  /// disp(p) + mu for every grid momentum, in grid order.
  const std::vector<double>& eigenvalues() const { return eigenvalues_; }

  /// Dense (-laplacian + mu).
  Eigen::MatrixXd matrix() const;
  /// Dense (-laplacian + mu + shift)^{-1}; requires mu + shift > 0.
  Eigen::MatrixXd inverse(double shift = 0.0) const;
  /// sum_p ln(disp(p) + mu + shift).
  double log_det(double shift = 0.0) const;

 private:
  Eigen::MatrixXd from_kernel(const std::function<double(double)>& g) const;

  LatticeSpec lattice_;
  Dispersion dispersion_;
  double mu_;
  MomentumGrid grid_;
  std::vector<double> eigenvalues_;
};

/// f_hat(p) = sum_x exp(-i p.x) f(x) a^2, in grid order.
std::vector<std::complex<double>> fourier_transform(const LatticeSpec& lattice,
                                                    std::span<const double> f);

/// f(x) = (1/V) sum_p exp(i p.x) f_hat(p); the real part is returned.
std::vector<double> inverse_fourier_transform(const LatticeSpec& lattice,
                                              std::span<const std::complex<double>> f_hat);

}  // namespace pcm
