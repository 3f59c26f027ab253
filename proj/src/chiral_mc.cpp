#include "pcmlab/chiral_mc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

#include "pcmlab/errors.hpp"
#include "pcmlab/orthogonal.hpp"
#include "pcmlab/stats.hpp"

namespace pcm {

std::string_view to_string(ProposalKind kind) {
  return kind == ProposalKind::givens ? "givens" : "haar-independence";
}

ProposalKind parse_proposal(std::string_view name) {
  if (name == "givens") return ProposalKind::givens;
  if (name == "haar-independence" || name == "haar_independence") {
    return ProposalKind::haar_independence;
  }
  throw ValidationError("proposal: expected 'givens' or 'haar-independence', got '" +
                        std::string(name) + "'");
}

void McParams::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ValidationError("McParams: " + what);
  };
  require(n >= 1, "n must be >= 1");
  require(lambda > 0.0, "lambda must be positive");
  require(lattice.side >= 2, "lattice side must be >= 2");
  require(thermalization >= 0, "thermalization must be >= 0");
  require(sweeps > 0, "sweeps must be positive");
  require(measure_every > 0, "measure_every must be positive");
  require(epsilon > 0.0 && epsilon < std::numbers::pi, "epsilon must lie in (0, pi)");
  require(hits >= 0, "hits must be >= 0");
  require(reflector_every >= 0, "reflector_every must be >= 0");
  require(reorthogonalize_every > 0, "reorthogonalize_every must be positive");
}

FieldConfig::FieldConfig(LatticeSpec lattice, std::vector<Eigen::MatrixXd> phi)
    : lattice_(lattice), n_(phi.empty() ? 0 : static_cast<int>(phi.front().rows())),
      phi_(std::move(phi)) {
  if (static_cast<int>(phi_.size()) != lattice_.sites()) {
    throw ValidationError("FieldConfig: expected one matrix per site");
  }
  for (const auto& m : phi_) {
    if (m.rows() != n_ || m.cols() != n_) throw ValidationError("FieldConfig: shape mismatch");
  }
  if (!(max_defect() < 1e-8)) throw ValidationError("FieldConfig: matrices are not orthogonal");
}

FieldConfig FieldConfig::cold(const LatticeSpec& lattice, int n) {
  return {lattice, std::vector<Eigen::MatrixXd>(lattice.sites(), Eigen::MatrixXd::Identity(n, n))};
}

FieldConfig FieldConfig::hot(const LatticeSpec& lattice, int n, Rng& rng) {
  std::vector<Eigen::MatrixXd> phi;
  phi.reserve(lattice.sites());
  for (int x = 0; x < lattice.sites(); ++x) phi.push_back(sample_haar(n, rng).matrix());
  return {lattice, std::move(phi)};
}

double FieldConfig::max_defect() const {
  double d = 0.0;
  for (const auto& m : phi_) d = std::max(d, orthogonality_defect(m));
  return d;
}

void FieldConfig::reorthogonalize() {
  for (auto& m : phi_) m = orthonormalize_columns(m);
}

void FieldConfig::left_multiply(const Eigen::MatrixXd& r) {
  for (auto& m : phi_) m = r * m;
}

namespace {

// sum_{x, mu} Tr[phi(x)^T phi(x + mu)] over the two forward links.
double link_trace_sum(const FieldConfig& config) {
  const auto& lattice = config.lattice();
  CompensatedSum acc;
  for (int x = 0; x < lattice.sites(); ++x) {
    const auto& here = config[x];
    acc.add((here.array() * config[shifted_site(lattice, x, 1, 0)].array()).sum());
    acc.add((here.array() * config[shifted_site(lattice, x, 0, 1)].array()).sum());
  }
  return acc.value();
}

double n_over_lambda(int n, double lambda) {
  return std::isinf(lambda) ? 0.0 : static_cast<double>(n) / lambda;
}

}  // namespace

double action(const FieldConfig& config, double lambda) {
  const double links = 2.0 * config.lattice().sites() * config.n();
  return n_over_lambda(config.n(), lambda) * (links - link_trace_sum(config));
}

double link_energy(const FieldConfig& config) {
  const double links = 2.0 * config.lattice().sites() * config.n();
  return (links - link_trace_sum(config)) / links;
}

SweepResult metropolis_sweep(FieldConfig& config, const McParams& params, double epsilon,
                             bool reflector, Rng& rng) {
  const auto& lattice = config.lattice();
  const int n = config.n();
  const double beta = n_over_lambda(n, params.lambda);
  const int hits = params.proposal == ProposalKind::givens ? params.effective_hits() : 1;
  const bool flips = reflector || n == 1;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> row(0, n - 1);
  std::uniform_int_distribution<int> other(0, std::max(0, n - 2));

  auto accept = [&](double delta_trace) {
    // Delta S = -(N/lambda) Delta Tr[phi^T F].
    const double delta_s = -beta * delta_trace;
    return delta_s <= 0.0 || unit(rng) < std::exp(-delta_s);
  };

  SweepResult result;
  for (int x = 0; x < lattice.sites(); ++x) {
    const Eigen::MatrixXd f = config[shifted_site(lattice, x, 1, 0)] +
                              config[shifted_site(lattice, x, -1, 0)] +
                              config[shifted_site(lattice, x, 0, 1)] +
                              config[shifted_site(lattice, x, 0, -1)];
    Eigen::MatrixXd& phi = config[x];

    if (params.proposal == ProposalKind::haar_independence) {
      Eigen::MatrixXd candidate = sample_haar(n, rng).matrix();
      ++result.proposed;
      if (accept(((candidate - phi).array() * f.array()).sum())) {
        phi = std::move(candidate);
        ++result.accepted;
      }
      continue;
    }
    if (flips) {
      ++result.proposed;
      // For N=1 the flip is the only move; with a fixed site order, zero-cost
      // flips are then deterministic and the chain is not ergodic (side 2 is
      // reducible). Proposing the identity half of the time fixes that.
      if (n == 1 && unit(rng) < 0.5) {
        ++result.accepted;
        continue;
      }
      const int i = row(rng);
      if (accept(-2.0 * phi.row(i).dot(f.row(i)))) {
        phi.row(i) = -phi.row(i);
        ++result.accepted;
      }
      continue;
    }
    for (int h = 0; h < hits; ++h) {
      const int i = row(rng);
      int j = other(rng);
      if (j >= i) ++j;
      const double theta = epsilon * (2.0 * unit(rng) - 1.0);
      const double c = std::cos(theta);
      const double s = std::sin(theta);
      const Eigen::RowVectorXd ri = c * phi.row(i) - s * phi.row(j);
      const Eigen::RowVectorXd rj = s * phi.row(i) + c * phi.row(j);
      const double delta = (ri - phi.row(i)).dot(f.row(i)) + (rj - phi.row(j)).dot(f.row(j));
      ++result.proposed;
      if (accept(delta)) {
        phi.row(i) = ri;
        phi.row(j) = rj;
        ++result.accepted;
      }
    }
  }
  return result;
}

Measurement measure(const FieldConfig& config) {
  const auto& lattice = config.lattice();
  const int side = lattice.side;
  const int n = config.n();

  Measurement m;
  m.energy = link_energy(config);
  m.magnetization = Eigen::MatrixXd::Zero(n, n);
  for (const auto& phi : config.sites()) m.magnetization += phi;
  m.magnetization /= lattice.sites();

  // Slice sums along each axis: rows[t] sums the sites with y = t, cols[t]
  // those with x = t.
  std::vector<Eigen::MatrixXd> rows(side, Eigen::MatrixXd::Zero(n, n));
  std::vector<Eigen::MatrixXd> cols(side, Eigen::MatrixXd::Zero(n, n));
  for (int x = 0; x < lattice.sites(); ++x) {
    const Site s = site_at(lattice, x);
    rows[s.y] += config[x];
    cols[s.x] += config[x];
  }
  std::vector<double> full(side, 0.0);
  for (int r = 0; r < side; ++r) {
    double acc = 0.0;
    for (int t = 0; t < side; ++t) {
      const int u = (t + r) % side;
      acc += (rows[t].array() * rows[u].array()).sum();
      acc += (cols[t].array() * cols[u].array()).sum();
    }
    full[r] = acc / (2.0 * n * std::pow(static_cast<double>(side), 3));
  }
  m.correlator.resize(side / 2 + 1);
  for (int r = 0; r <= side / 2; ++r) m.correlator[r] = 0.5 * (full[r] + full[(side - r) % side]);
  return m;
}

ChainResult run_chain(const McParams& params) {
  params.validate();
  Rng rng = make_stream(params.seed, params.point, 0);
  FieldConfig config = params.hot_start ? FieldConfig::hot(params.lattice, params.n, rng)
                                        : FieldConfig::cold(params.lattice, params.n);
  double epsilon = params.epsilon;
  double max_defect = config.max_defect();
  long sweep_index = 0;

  auto step = [&]() {
    const bool reflector =
        params.reflector_every > 0 && (sweep_index + 1) % params.reflector_every == 0;
    const SweepResult r = metropolis_sweep(config, params, epsilon, reflector, rng);
    ++sweep_index;
    if (sweep_index % params.reorthogonalize_every == 0) {
      max_defect = std::max(max_defect, config.max_defect());
      config.reorthogonalize();
    }
    return std::pair{r, reflector};
  };

  SweepResult block;
  for (int s = 0; s < params.thermalization; ++s) {
    const auto [r, reflector] = step();
    if (reflector || !params.adapt_epsilon || params.proposal != ProposalKind::givens ||
        params.n == 1) {
      continue;
    }
    block.proposed += r.proposed;
    block.accepted += r.accepted;
    if (block.proposed >= 10u * static_cast<std::size_t>(params.lattice.sites())) {
      const double rate = block.acceptance_rate();
      if (rate > 0.6) epsilon = std::min(epsilon * 1.15, 3.1);
      if (rate < 0.4) epsilon = std::max(epsilon * 0.85, 1e-4);
      block = {};
    }
  }

  std::vector<Measurement> measurements;
  measurements.reserve(params.sweeps / params.measure_every);
  SweepResult total;
  for (int s = 0; s < params.sweeps; ++s) {
    const auto [r, reflector] = step();
    total.proposed += r.proposed;
    total.accepted += r.accepted;
    if ((s + 1) % params.measure_every == 0) measurements.push_back(measure(config));
  }
  max_defect = std::max(max_defect, config.max_defect());

  return ChainResult{std::move(measurements), total.acceptance_rate(), epsilon, max_defect,
                     std::move(config)};
}

namespace {

double log_cosh(double x) {
  const double a = std::abs(x);
  return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

// Solves cosh(m a) / cosh(m (a - 1)) = ratio for m >= 0, a = side/2 - r.
double cosh_mass(double ratio, double a) {
  if (ratio == 1.0) return 0.0;
  const double target = std::log(ratio);
  auto g = [&](double m) { return log_cosh(m * a) - log_cosh(m * (a - 1.0)); };
  double lo = 0.0, hi = 1.0;
  while (g(hi) < target) {
    hi *= 2.0;
    if (hi > 1e6) return std::numeric_limits<double>::infinity();
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// m_eff(r) for r in [lo, hi]; throws with diagnostics on invalid ratios.
std::vector<double> mass_curve(const std::vector<double>& c, int side, int lo, int hi) {
  std::vector<double> out;
  for (int r = lo; r <= hi; ++r) {
    const double a = c[r];
    const double b = c[r + 1];
    if (!(a > 0.0) || !(b > 0.0)) {
      std::ostringstream msg;
      msg << "effective_mass: non-positive correlator in window [" << lo << ", " << hi
          << "]: C(" << r << ") = " << a << ", C(" << r + 1 << ") = " << b;
      throw NumericalError(msg.str());
    }
    if (a < b) {
      std::ostringstream msg;
      msg << "effective_mass: correlator rises inside window [" << lo << ", " << hi << "]: C("
          << r << ") = " << a << " < C(" << r + 1 << ") = " << b;
      throw NumericalError(msg.str());
    }
    out.push_back(cosh_mass(a / b, 0.5 * side - r));
  }
  return out;
}

}  // namespace

CorrelatorEstimate measure_correlator(const std::vector<Measurement>& measurements, int side,
                                      std::size_t min_bins) {
  if (measurements.empty()) throw NumericalError("measure_correlator: no measurements");
  const int half = side / 2;
  const int n = static_cast<int>(measurements.front().magnetization.rows());
  for (const auto& m : measurements) {
    if (static_cast<int>(m.correlator.size()) != half + 1) {
      throw ValidationError("measure_correlator: correlator length does not match side");
    }
  }

  std::vector<double> energy, far;
  for (const auto& m : measurements) {
    energy.push_back(m.energy);
    far.push_back(m.correlator[half]);
  }
  CorrelatorEstimate est;
  est.side = side;
  est.tau_energy = integrated_autocorrelation_time(energy);
  est.tau_correlator = integrated_autocorrelation_time(far);
  const double tau = std::max(est.tau_energy, est.tau_correlator);
  est.bin_size = static_cast<std::size_t>(std::floor(2.0 * tau)) + 1;
  est.bins = measurements.size() / est.bin_size;
  if (est.bins < min_bins) {
    std::ostringstream msg;
    msg << "measure_correlator: only " << est.bins << " decorrelated bins (need " << min_bins
        << "); " << measurements.size() << " measurements, integrated autocorrelation time "
        << tau << " -> bin size " << est.bin_size;
    throw NumericalError(msg.str());
  }

  // Bin sums of C_raw and of the magnetization.
  const std::size_t nb = est.bins;
  std::vector<std::vector<double>> c_bins(nb, std::vector<double>(half + 1, 0.0));
  std::vector<Eigen::MatrixXd> m_bins(nb, Eigen::MatrixXd::Zero(n, n));
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t k = b * est.bin_size; k < (b + 1) * est.bin_size; ++k) {
      for (int r = 0; r <= half; ++r) c_bins[b][r] += measurements[k].correlator[r];
      m_bins[b] += measurements[k].magnetization;
    }
  }
  std::vector<double> c_total(half + 1, 0.0);
  Eigen::MatrixXd m_total = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t b = 0; b < nb; ++b) {
    for (int r = 0; r <= half; ++r) c_total[r] += c_bins[b][r];
    m_total += m_bins[b];
  }

  auto connected = [&](const std::vector<double>& c_sum, const Eigen::MatrixXd& m_sum,
                       double count) {
    const Eigen::MatrixXd mbar = m_sum / count;
    const double disc = mbar.squaredNorm() / n;
    std::vector<double> out(half + 1);
    for (int r = 0; r <= half; ++r) out[r] = c_sum[r] / count - disc;
    return out;
  };

  const double used = static_cast<double>(nb * est.bin_size);
  est.value = connected(c_total, m_total, used);
  for (std::size_t b = 0; b < nb; ++b) {
    std::vector<double> c_loo(half + 1);
    for (int r = 0; r <= half; ++r) c_loo[r] = c_total[r] - c_bins[b][r];
    est.jackknife.push_back(
        connected(c_loo, m_total - m_bins[b], used - static_cast<double>(est.bin_size)));
  }
  for (int r = 0; r <= half; ++r) {
    est.r.push_back(r);
    std::vector<double> column(nb);
    for (std::size_t b = 0; b < nb; ++b) column[b] = est.jackknife[b][r];
    est.error.push_back(jackknife_error(column));
  }
  return est;
}

CorrelatorEstimate synthetic_correlator(const std::vector<double>& values, int side) {
  if (static_cast<int>(values.size()) != side / 2 + 1) {
    throw ValidationError("synthetic_correlator: need side/2 + 1 values");
  }
  CorrelatorEstimate est;
  est.side = side;
  est.value = values;
  est.error.assign(values.size(), 0.0);
  for (int r = 0; r <= side / 2; ++r) est.r.push_back(r);
  return est;
}

std::pair<int, int> usable_window(const CorrelatorEstimate& corr, int lo, int hi) {
  const auto& c = corr.value;
  int last = lo - 1;
  for (int r = lo; r <= hi && r + 1 < static_cast<int>(c.size()); ++r) {
    if (!(c[r] > 0.0) || !(c[r + 1] > 0.0) || c[r] < c[r + 1]) break;
    last = r;
  }
  if (last < lo + 1) {
    std::ostringstream msg;
    msg << "usable_window: fewer than two valid effective-mass points from r = " << lo;
    throw NumericalError(msg.str());
  }
  return {lo, last};
}

EffectiveMass effective_mass(const CorrelatorEstimate& corr, int window_lo, int window_hi) {
  const int side = corr.side;
  const int half = side / 2;
  if (half < 1 || static_cast<int>(corr.value.size()) != half + 1) {
    throw ValidationError("effective_mass: correlator length does not match side");
  }
  const int lo = window_lo >= 0 ? window_lo : std::min(2, half - 1);
  const int hi = window_hi >= 0 ? window_hi : half - 1;
  if (lo > hi || hi > half - 1) {
    throw ValidationError("effective_mass: window [" + std::to_string(lo) + ", " +
                          std::to_string(hi) + "] outside 0.." + std::to_string(half - 1));
  }

  EffectiveMass out;
  out.window_lo = lo;
  out.window_hi = hi;
  // The full curve is reported where defined; the window must be valid.
  for (int r = 0; r < half; ++r) {
    out.r.push_back(r);
    const double a = corr.value[r];
    const double b = corr.value[r + 1];
    out.mass.push_back(a > 0.0 && b > 0.0 && a >= b ? cosh_mass(a / b, 0.5 * side - r)
                                                    : std::numeric_limits<double>::quiet_NaN());
  }
  const std::vector<double> central = mass_curve(corr.value, side, lo, hi);
  const int w = hi - lo + 1;

  std::vector<std::vector<double>> jk;
  for (const auto& row : corr.jackknife) jk.push_back(mass_curve(row, side, lo, hi));

  out.error.assign(half, 0.0);
  const std::size_t nb = jk.size();
  Eigen::VectorXd sigma = Eigen::VectorXd::Zero(w);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(w, w);
  if (nb >= 2) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(w);
    for (const auto& row : jk) mean += Eigen::Map<const Eigen::VectorXd>(row.data(), w);
    mean /= static_cast<double>(nb);
    for (const auto& row : jk) {
      const Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(row.data(), w) - mean;
      cov += d * d.transpose();
    }
    cov *= static_cast<double>(nb - 1) / static_cast<double>(nb);
    sigma = cov.diagonal().cwiseSqrt();
    for (int i = 0; i < w; ++i) out.error[lo + i] = sigma[i];
    // Errors outside the window from the jackknife of the full curve.
    for (int r = 0; r < half; ++r) {
      if (r >= lo && r <= hi) continue;
      std::vector<double> col;
      for (const auto& row : corr.jackknife) {
        const double a = row[r], b = row[r + 1];
        if (a > 0.0 && b > 0.0 && a >= b) col.push_back(cosh_mass(a / b, 0.5 * side - r));
      }
      out.error[r] = col.size() == nb ? jackknife_error(col)
                                      : std::numeric_limits<double>::quiet_NaN();
    }
  }

  // Weights: correlated when the covariance is well conditioned and there
  // are comfortably more bins than window points, else diagonal or flat.
  Eigen::VectorXd weights = Eigen::VectorXd::Constant(w, 1.0);
  if (nb >= 2 && sigma.minCoeff() > 0.0) {
    weights = sigma.array().square().inverse().matrix();
    if (static_cast<int>(nb) > 4 * w) {
      Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
      if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
        const double cond = eig.eigenvalues().maxCoeff() / eig.eigenvalues().minCoeff();
        if (eig.eigenvalues().minCoeff() > 0.0 && cond < 1e10) {
          weights = ldlt.solve(Eigen::VectorXd::Constant(w, 1.0));
          out.correlated = true;
        }
      }
    }
  }
  weights /= weights.sum();

  auto fit = [&](const std::vector<double>& m) {
    return weights.dot(Eigen::Map<const Eigen::VectorXd>(m.data(), w));
  };
  out.plateau = fit(central);
  if (nb >= 2) {
    std::vector<double> loo;
    for (const auto& row : jk) loo.push_back(fit(row));
    out.plateau_error = jackknife_error(loo);
  }
  if (w > 1) {
    double chi2 = 0.0;
    for (int i = 0; i < w; ++i) {
      const double d = central[i] - out.plateau;
      chi2 += sigma[i] > 0.0 ? d * d / (sigma[i] * sigma[i]) : 0.0;
    }
    out.chi2_per_dof = chi2 / (w - 1);
  }
  return out;
}

EffectiveMass find_plateau(const CorrelatorEstimate& corr, int window_lo, int window_hi,
                           int min_points, double max_chi2) {
  if (min_points < 2) throw ValidationError("find_plateau: min_points must be >= 2");
  double best = std::numeric_limits<double>::infinity();
  for (int lo = window_lo; window_hi - lo + 1 >= min_points; ++lo) {
    EffectiveMass em;
    try {
      em = effective_mass(corr, lo, window_hi);
    } catch (const NumericalError&) {
      continue;
    }
    if (em.chi2_per_dof <= max_chi2) return em;
    best = std::min(best, em.chi2_per_dof);
  }
  std::ostringstream msg;
  msg << "find_plateau: no window [lo, " << window_hi << "] with lo >= " << window_lo
      << " and at least " << min_points << " points has chi2/dof <= " << max_chi2
      << " (best " << best << ")";
  throw NumericalError(msg.str());
}

}  // namespace pcm
