#include "pcmlab/lattice.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include "pcmlab/errors.hpp"
#include "pcmlab/quadrature.hpp"
#include "pcmlab/stats.hpp"

namespace pcm {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

int wrap(int v, int n) {
  const int r = v % n;
  return r < 0 ? r + n : r;
}

// cos(2 pi k / side) for k = 0..side-1; phases p.r reduce to this table.
std::vector<double> cosine_table(int side) {
  std::vector<double> table(side);
  for (int k = 0; k < side; ++k) table[k] = std::cos(kTwoPi * k / side);
  return table;
}

// kernel[r] = (1/side^2) sum_p g(p) cos(p.r) for every displacement r.
std::vector<double> translation_kernel(const LatticeSpec& lattice, const MomentumGrid& grid,
                                       const std::vector<double>& weights) {
  const int side = lattice.side;
  const auto table = cosine_table(side);
  std::vector<double> kernel(lattice.sites());
  for (int ry = 0; ry < side; ++ry) {
    for (int rx = 0; rx < side; ++rx) {
      CompensatedSum acc;
      for (std::size_t k = 0; k < grid.points.size(); ++k) {
        const auto& p = grid.points[k];
        acc.add(weights[k] * table[wrap(p.nx * rx + p.ny * ry, side)]);
      }
      kernel[ry * side + rx] = acc.value() / lattice.sites();
    }
  }
  return kernel;
}

}  // namespace

LatticeSpec build_lattice(int side, double volume) {
  if (side < 2) {
    throw ValidationError("build_lattice: side must be >= 2, got " + std::to_string(side));
  }
  if (!(volume > 0.0) || !std::isfinite(volume)) {
    std::ostringstream msg;
    msg << "build_lattice: volume must be positive and finite, got " << volume;
    throw ValidationError(msg.str());
  }
  LatticeSpec lattice;
  lattice.side = side;
  lattice.volume = volume;
  const double length = std::sqrt(volume);
  lattice.spacing = length / side;
  lattice.momentum_step = kTwoPi / length;
  lattice.cutoff = kTwoPi * side / length;
  return lattice;
}

int shifted_site(const LatticeSpec& lattice, int index, int dx, int dy) {
  const Site s = site_at(lattice, index);
  return site_index(lattice, {wrap(s.x + dx, lattice.side), wrap(s.y + dy, lattice.side)});
}

MomentumGrid momentum_grid(const LatticeSpec& lattice) {
  MomentumGrid grid;
  grid.min_index = -(lattice.side / 2);
  grid.max_index = (lattice.side + 1) / 2 - 1;
  grid.points.reserve(lattice.sites());
  for (int ny = grid.min_index; ny <= grid.max_index; ++ny) {
    for (int nx = grid.min_index; nx <= grid.max_index; ++nx) {
      grid.points.push_back(
          {nx, ny, nx * lattice.momentum_step, ny * lattice.momentum_step});
    }
  }
  return grid;
}

std::string_view to_string(DispersionKind kind) {
  return kind == DispersionKind::continuum ? "continuum" : "finite-difference";
}

DispersionKind parse_dispersion(std::string_view name) {
  if (name == "continuum") return DispersionKind::continuum;
  if (name == "finite-difference" || name == "finite_difference") {
    return DispersionKind::finite_difference;
  }
  throw ValidationError("dispersion: expected 'continuum' or 'finite-difference', got '" +
                        std::string(name) + "'");
}

double Dispersion::operator()(double px, double py) const {
  if (kind_ == DispersionKind::continuum) return px * px + py * py;
  const double scale = 2.0 / spacing_;
  const double sx = std::sin(0.5 * px * spacing_);
  const double sy = std::sin(0.5 * py * spacing_);
  return scale * scale * (sx * sx + sy * sy);
}

Dispersion make_dispersion(const LatticeSpec& lattice, DispersionKind kind) {
  return Dispersion(kind, lattice.spacing);
}

RadialSumCheck radial_sum_check(const std::function<double(double)>& f,
                                const LatticeSpec& lattice) {
  RadialSumCheck out;
  const auto grid = momentum_grid(lattice);
  CompensatedSum exact;
  for (const auto& p : grid.points) exact.add(f(std::hypot(p.px, p.py)));
  out.exact_sum = exact.value();

  QuadratureOptions options;
  options.abs_tol = 1e-10;
  options.max_evaluations = 1'000'000;
  const auto integral = integrate_adaptive<double>(
      [&](double q) { return f(q) * q; }, 0.0, 0.5 * lattice.cutoff, options);
  if (!integral.converged) {
    std::ostringstream msg;
    msg << "radial_sum_check: quadrature did not converge (error estimate "
        << integral.error << " after " << integral.evaluations << " evaluations)";
    throw NumericalError(msg.str());
  }
  out.quadrature_error = integral.error * lattice.volume / kTwoPi;
  out.disc_approx = lattice.volume / kTwoPi * integral.value;
  const double diff = std::abs(out.exact_sum - out.disc_approx);
  out.relative_gap = out.exact_sum == 0.0 ? (diff == 0.0 ? 0.0 : INFINITY)
                                          : diff / std::abs(out.exact_sum);
  return out;
}

double propagator(const LatticeSpec& lattice, const Dispersion& dispersion, double m,
                  Site x, Site y) {
  if (!(m > 0.0)) {
    std::ostringstream msg;
    msg << "propagator: mass parameter must be positive, got " << m;
    throw ValidationError(msg.str());
  }
  const int side = lattice.side;
  const int rx = wrap(x.x - y.x, side);
  const int ry = wrap(x.y - y.y, side);
  const auto table = cosine_table(side);
  CompensatedSum acc;
  for (const auto& p : momentum_grid(lattice).points) {
    acc.add(table[wrap(p.nx * rx + p.ny * ry, side)] / (dispersion(p) + m));
  }
  return acc.value() / lattice.sites();
}

FreeOperator::FreeOperator(const LatticeSpec& lattice, const Dispersion& dispersion, double mu)
    : lattice_(lattice), dispersion_(dispersion), mu_(mu), grid_(momentum_grid(lattice)) {
  eigenvalues_.reserve(grid_.points.size());
  for (const auto& p : grid_.points) eigenvalues_.push_back(dispersion_(p) + mu_);
}

Eigen::MatrixXd FreeOperator::from_kernel(const std::function<double(double)>& g) const {
  std::vector<double> weights(eigenvalues_.size());
  for (std::size_t k = 0; k < weights.size(); ++k) weights[k] = g(eigenvalues_[k]);
  const auto kernel = translation_kernel(lattice_, grid_, weights);

  const int n = lattice_.sites();
  const int side = lattice_.side;
  Eigen::MatrixXd out(n, n);
  for (int j = 0; j < n; ++j) {
    const Site sj = site_at(lattice_, j);
    for (int i = 0; i < n; ++i) {
      const Site si = site_at(lattice_, i);
      out(i, j) = kernel[wrap(si.y - sj.y, side) * side + wrap(si.x - sj.x, side)];
    }
  }
  return out;
}

Eigen::MatrixXd FreeOperator::matrix() const {
  return from_kernel([](double e) { return e; });
}

Eigen::MatrixXd FreeOperator::inverse(double shift) const {
  if (!(mu_ + shift > 0.0)) {
    std::ostringstream msg;
    msg << "FreeOperator::inverse: mu + shift must be positive, got " << mu_ + shift;
    throw ValidationError(msg.str());
  }
  return from_kernel([shift](double e) { return 1.0 / (e + shift); });
}

double FreeOperator::log_det(double shift) const {
  CompensatedSum acc;
  for (double e : eigenvalues_) {
    const double v = e + shift;
    if (!(v > 0.0)) {
      std::ostringstream msg;
      msg << "FreeOperator::log_det: non-positive eigenvalue " << v;
      throw NumericalError(msg.str());
    }
    acc.add(std::log(v));
  }
  return acc.value();
}

std::vector<std::complex<double>> fourier_transform(const LatticeSpec& lattice,
                                                    std::span<const double> f) {
  if (static_cast<int>(f.size()) != lattice.sites()) {
    throw ValidationError("fourier_transform: function size does not match the lattice");
  }
  const int side = lattice.side;
  const double area = lattice.spacing * lattice.spacing;
  const auto grid = momentum_grid(lattice);
  std::vector<std::complex<double>> out;
  out.reserve(grid.points.size());
  for (const auto& p : grid.points) {
    std::complex<double> acc = 0.0;
    for (int i = 0; i < lattice.sites(); ++i) {
      const Site s = site_at(lattice, i);
      const double phase = -kTwoPi * wrap(p.nx * s.x + p.ny * s.y, side) / side;
      acc += std::polar(1.0, phase) * f[i];
    }
    out.push_back(acc * area);
  }
  return out;
}

std::vector<double> inverse_fourier_transform(const LatticeSpec& lattice,
                                              std::span<const std::complex<double>> f_hat) {
  if (static_cast<int>(f_hat.size()) != lattice.sites()) {
    throw ValidationError("inverse_fourier_transform: size does not match the lattice");
  }
  const int side = lattice.side;
  const auto grid = momentum_grid(lattice);
  std::vector<double> out(lattice.sites());
  for (int i = 0; i < lattice.sites(); ++i) {
    const Site s = site_at(lattice, i);
    std::complex<double> acc = 0.0;
    for (std::size_t k = 0; k < grid.points.size(); ++k) {
      const auto& p = grid.points[k];
      const double phase = kTwoPi * wrap(p.nx * s.x + p.ny * s.y, side) / side;
      acc += std::polar(1.0, phase) * f_hat[k];
    }
    out[i] = acc.real() / lattice.volume;
  }
  return out;
}

}  // namespace pcm
