#include "pcmlab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "pcmlab/errors.hpp"

namespace pcm {

Eigen::MatrixXd MultiplierField::multiplier(int site) const {
  const auto& o = rotations[site];
  const Eigen::Map<const Eigen::VectorXd> m(spectrum.values().data(), n());
  return o.transpose() * m.asDiagonal() * o;
}

MultiplierField make_field(const LatticeSpec& lattice, SpectrumEnsemble spectrum,
                           std::vector<Eigen::MatrixXd> rotations) {
  if (static_cast<int>(rotations.size()) != lattice.sites()) {
    throw ValidationError("make_field: expected one rotation per site (" +
                          std::to_string(lattice.sites()) + "), got " +
                          std::to_string(rotations.size()));
  }
  const int n = spectrum.size();
  for (std::size_t x = 0; x < rotations.size(); ++x) {
    const auto& o = rotations[x];
    if (o.rows() != n || o.cols() != n) {
      throw ValidationError("make_field: rotation at site " + std::to_string(x) +
                            " is not N x N with N = " + std::to_string(n));
    }
    if (!(orthogonality_defect(o) < kOrthogonalityTolerance)) {
      throw ValidationError("make_field: rotation at site " + std::to_string(x) +
                            " is not orthogonal");
    }
  }
  return {lattice, std::move(spectrum), std::move(rotations)};
}

MultiplierField random_field(const LatticeSpec& lattice, SpectrumEnsemble spectrum, Rng& rng) {
  std::vector<Eigen::MatrixXd> rotations;
  rotations.reserve(lattice.sites());
  for (int x = 0; x < lattice.sites(); ++x) {
    rotations.push_back(sample_haar(spectrum.size(), rng).matrix());
  }
  return {lattice, std::move(spectrum), std::move(rotations)};
}

MultiplierField identity_field(const LatticeSpec& lattice, SpectrumEnsemble spectrum) {
  const int n = spectrum.size();
  std::vector<Eigen::MatrixXd> rotations(lattice.sites(), Eigen::MatrixXd::Identity(n, n));
  return {lattice, std::move(spectrum), std::move(rotations)};
}

double SourceField::max_norm_squared() const {
  double m = 0.0;
  for (const auto& j : values) m = std::max(m, j.squaredNorm());
  return m;
}

SourceField zero_source(const LatticeSpec& lattice, int n) {
  return {std::vector<Eigen::MatrixXd>(lattice.sites(), Eigen::MatrixXd::Zero(n, n))};
}

SourceField random_source(const LatticeSpec& lattice, int n, Rng& rng) {
  if (n < 1) throw ValidationError("random_source: N must be >= 1");
  std::normal_distribution<double> normal(0.0, 1.0);
  SourceField j;
  j.values.reserve(lattice.sites());
  for (int x = 0; x < lattice.sites(); ++x) {
    Eigen::MatrixXd v(n, n);
    for (int c = 0; c < n; ++c) {
      for (int r = 0; r < n; ++r) v(r, c) = normal(rng);
    }
    v /= v.norm();
    j.values.push_back(std::move(v));
  }
  return j;
}

SourceField single_site_source(const LatticeSpec& lattice, int site, Eigen::MatrixXd value) {
  if (site < 0 || site >= lattice.sites()) {
    throw ValidationError("single_site_source: site index out of range");
  }
  if (value.rows() != value.cols()) {
    throw ValidationError("single_site_source: value must be square");
  }
  SourceField j = zero_source(lattice, static_cast<int>(value.rows()));
  j.values[site] = std::move(value);
  return j;
}

KOperator::KOperator(FreeOperator free, MultiplierField field)
    : free_(std::move(free)), field_(std::move(field)) {
  blocks_.reserve(field_.rotations.size());
  for (int x = 0; x < static_cast<int>(field_.rotations.size()); ++x) {
    blocks_.push_back(field_.multiplier(x));
  }
}

Eigen::VectorXd KOperator::apply(const Eigen::VectorXd& v) const {
  const int n = this->n();
  const int sites = free_.lattice().sites();
  if (v.size() != dimension()) throw ValidationError("KOperator::apply: dimension mismatch");
  // Columns of vm are sites, rows are colour indices.
  const Eigen::Map<const Eigen::MatrixXd> vm(v.data(), n, sites);
  Eigen::MatrixXd out = vm * free_.matrix();
  for (int x = 0; x < sites; ++x) out.col(x) += blocks_[x] * vm.col(x);
  return Eigen::Map<Eigen::VectorXd>(out.data(), out.size());
}

Eigen::MatrixXd KOperator::dense() const {
  const int dim = dimension();
  if (dim > kDenseLimit) {
    throw ValidationError("KOperator::dense: dimension " + std::to_string(dim) +
                          " exceeds the dense limit " + std::to_string(kDenseLimit));
  }
  const int n = this->n();
  const int sites = free_.lattice().sites();
  const Eigen::MatrixXd t = free_.matrix();
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(dim, dim);
  for (int y = 0; y < sites; ++y) {
    for (int x = 0; x < sites; ++x) {
      k.block(x * n, y * n, n, n).diagonal().setConstant(t(x, y));
    }
  }
  for (int x = 0; x < sites; ++x) k.block(x * n, x * n, n, n) += blocks_[x];
  return k;
}

KOperator assemble_K(const LatticeSpec& lattice, const Dispersion& dispersion, double mu,
                     MultiplierField field) {
  if (field.lattice.side != lattice.side || field.lattice.volume != lattice.volume) {
    throw ValidationError("assemble_K: field was built on a different lattice");
  }
  if (static_cast<int>(field.rotations.size()) != lattice.sites()) {
    throw ValidationError("assemble_K: field has the wrong number of sites");
  }
  const double margin = mu + field.spectrum.min();
  if (!(margin > 0.0)) {
    std::ostringstream msg;
    msg << "assemble_K: mu + min(M) must be positive, got margin " << margin << " (mu = " << mu
        << ", min(M) = " << field.spectrum.min() << ")";
    throw ValidationError(msg.str());
  }
  return KOperator(FreeOperator(lattice, dispersion, mu), std::move(field));
}

std::string_view to_string(LogDetRoute route) {
  switch (route) {
    case LogDetRoute::dense: return "dense";
    case LogDetRoute::capacitance: return "capacitance";
    default: return "automatic";
  }
}

LogDetRoute parse_route(std::string_view name) {
  if (name == "automatic") return LogDetRoute::automatic;
  if (name == "dense") return LogDetRoute::dense;
  if (name == "capacitance") return LogDetRoute::capacitance;
  throw ValidationError("route: expected automatic, dense or capacitance, got '" +
                        std::string(name) + "'");
}

namespace {

[[noreturn]] void report_indefinite(const char* where, const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a, Eigen::EigenvaluesOnly);
  std::ostringstream msg;
  msg << where << ": matrix is not positive definite, smallest eigenvalue "
      << eig.eigenvalues().minCoeff();
  throw NumericalError(msg.str());
}

Eigen::LLT<Eigen::MatrixXd> factorize(const char* where, const Eigen::MatrixXd& a) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) report_indefinite(where, a);
  const auto diag = llt.matrixLLT().diagonal();
  if (!(diag.minCoeff() > 0.0) || !diag.allFinite()) report_indefinite(where, a);
  return llt;
}

double log_det_from(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

// Low-rank split of the multiplier: O^T M O = c I + U_x diag(d) U_x^T with
// c = min M, d_i = M_i - c > 0 over the excited set.
struct Capacitance {
  double floor = 0.0;
  std::vector<int> excited;
  Eigen::VectorXd excess;
  Eigen::MatrixXd g;        // (-laplacian + mu + c)^{-1}, sites x sites
  Eigen::MatrixXd stacked;  // N x (sites * r), block x holds U_x
  Eigen::MatrixXd matrix;   // diag(1/d) + W^T (G (x) I) W
};

int excited_count(const SpectrumEnsemble& s) {
  const double c = s.min();
  return static_cast<int>(std::count_if(s.values().begin(), s.values().end(),
                                        [c](double v) { return v > c; }));
}

Capacitance build_capacitance(const KOperator& k) {
  const auto& field = k.field();
  const auto& values = field.spectrum.values();
  const int n = field.n();
  const int sites = k.free().lattice().sites();

  Capacitance cap;
  cap.floor = field.spectrum.min();
  for (int a = 0; a < n; ++a) {
    if (values[a] > cap.floor) cap.excited.push_back(a);
  }
  const int r = static_cast<int>(cap.excited.size());
  cap.excess.resize(r);
  for (int i = 0; i < r; ++i) cap.excess[i] = values[cap.excited[i]] - cap.floor;
  cap.g = k.free().inverse(cap.floor);
  if (r == 0) return cap;

  cap.stacked.resize(n, sites * r);
  for (int x = 0; x < sites; ++x) {
    const auto& o = field.rotations[x];
    for (int i = 0; i < r; ++i) cap.stacked.col(x * r + i) = o.row(cap.excited[i]).transpose();
  }
  cap.matrix.resize(sites * r, sites * r);
  cap.matrix.noalias() = cap.stacked.transpose() * cap.stacked;
  for (int y = 0; y < sites; ++y) {
    for (int x = 0; x < sites; ++x) cap.matrix.block(x * r, y * r, r, r) *= cap.g(x, y);
  }
  for (int x = 0; x < sites; ++x) {
    for (int i = 0; i < r; ++i) cap.matrix(x * r + i, x * r + i) += 1.0 / cap.excess[i];
  }
  return cap;
}

bool use_capacitance(const KOperator& k, LogDetRoute route) {
  switch (route) {
    case LogDetRoute::dense:
      if (k.dimension() > kDenseLimit) {
        throw ValidationError("dense route: dimension " + std::to_string(k.dimension()) +
                              " exceeds the dense limit " + std::to_string(kDenseLimit));
      }
      return false;
    case LogDetRoute::capacitance: return true;
    default:
      return 2 * excited_count(k.field().spectrum) <= k.n() || k.dimension() > kDenseLimit;
  }
}

// J_b(x, a) = J(x)_{ab}, laid out as sites x (N*N) with column a + N*b.
Eigen::MatrixXd reshape_source(const SourceField& j, int sites, int n) {
  if (static_cast<int>(j.values.size()) != sites) {
    throw ValidationError("source field has " + std::to_string(j.values.size()) +
                          " sites, lattice has " + std::to_string(sites));
  }
  Eigen::MatrixXd out(sites, n * n);
  for (int x = 0; x < sites; ++x) {
    const auto& v = j.values[x];
    if (v.rows() != n || v.cols() != n) {
      throw ValidationError("source field: J(x) must be N x N with N = " + std::to_string(n));
    }
    if (!v.allFinite()) throw ValidationError("source field: non-finite entry");
    out.row(x) = Eigen::Map<const Eigen::RowVectorXd>(v.data(), n * n);
  }
  return out;
}

}  // namespace

double log_det_spd(const Eigen::MatrixXd& a) { return log_det_from(factorize("log_det_spd", a)); }

double log_det(const KOperator& k, LogDetRoute route) {
  if (!use_capacitance(k, route)) return log_det_from(factorize("log_det (dense)", k.dense()));

  const Capacitance cap = build_capacitance(k);
  double result = k.n() * k.free().log_det(cap.floor);
  if (cap.excited.empty()) return result;
  const int sites = k.free().lattice().sites();
  Eigen::LLT<Eigen::MatrixXd> llt(cap.matrix);
  if (llt.info() != Eigen::Success) {
    if (k.dimension() <= kDenseLimit) report_indefinite("log_det", k.dense());
    report_indefinite("log_det (capacitance matrix)", cap.matrix);
  }
  result += sites * cap.excess.array().log().sum();
  result += log_det_from(llt);
  return result;
}

double t_of_O(const KOperator& k, LogDetRoute route) {
  const auto& lattice = k.free().lattice();
  return log_det(k, route) / (2.0 * k.n() * lattice.volume);
}

double t0_closed_form(const LatticeSpec& lattice, const Dispersion& dispersion, double mu,
                      double mbar) {
  if (!(mu + mbar > 0.0)) {
    std::ostringstream msg;
    msg << "t0_closed_form: mu + mbar must be positive, got " << mu + mbar;
    throw ValidationError(msg.str());
  }
  return FreeOperator(lattice, dispersion, mu).log_det(mbar) / (2.0 * lattice.volume);
}

double j_functional(const KOperator& k, const SourceField& j, LogDetRoute route) {
  const int n = k.n();
  const int sites = k.free().lattice().sites();
  const Eigen::MatrixXd jr = reshape_source(j, sites, n);

  if (!use_capacitance(k, route)) {
    // Column b of jm is J_b with (x, a) -> x*N + a.
    Eigen::MatrixXd jm(k.dimension(), n);
    for (int x = 0; x < sites; ++x) jm.block(x * n, 0, n, n) = j.values[x];
    const auto llt = factorize("j_functional (dense)", k.dense());
    return (jm.array() * llt.solve(jm).array()).sum();
  }

  const Capacitance cap = build_capacitance(k);
  const Eigen::MatrixXd y = cap.g * jr;
  double result = (jr.array() * y.array()).sum();
  const int r = static_cast<int>(cap.excited.size());
  if (r == 0) return result;

  Eigen::MatrixXd z(sites * r, n);
  for (int x = 0; x < sites; ++x) {
    const Eigen::Map<const Eigen::MatrixXd> yx(y.row(x).eval().data(), n, n);
    z.block(x * r, 0, r, n) = cap.stacked.middleCols(x * r, r).transpose() * yx;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cap.matrix);
  if (llt.info() != Eigen::Success) report_indefinite("j_functional (capacitance matrix)", cap.matrix);
  result -= (z.array() * llt.solve(z).array()).sum();
  return result;
}

double averaged_j_prediction(const LatticeSpec& lattice, const Dispersion& dispersion, double mu,
                             double mbar, const SourceField& j) {
  if (!(mu + mbar > 0.0)) {
    std::ostringstream msg;
    msg << "averaged_j_prediction: mu + mbar must be positive, got " << mu + mbar;
    throw ValidationError(msg.str());
  }
  const int n = j.n();
  const Eigen::MatrixXd jr = reshape_source(j, lattice.sites(), n);
  const Eigen::MatrixXd g = FreeOperator(lattice, dispersion, mu).inverse(mbar);
  return (jr.array() * (g * jr).array()).sum();
}

LipschitzCheck lipschitz_ratio(const LatticeSpec& lattice, const Dispersion& dispersion,
                               const SourceField& j, double mu, const MultiplierField& first,
                               const MultiplierField& second) {
  if (first.spectrum.values() != second.spectrum.values()) {
    throw ValidationError("lipschitz_ratio: fields must share the eigenvalue vector");
  }
  if (first.rotations.size() != second.rotations.size()) {
    throw ValidationError("lipschitz_ratio: fields have different site counts");
  }
  if (!(mu > 0.0)) throw ValidationError("lipschitz_ratio: mu must be positive");

  LipschitzCheck out;
  for (std::size_t x = 0; x < first.rotations.size(); ++x) {
    out.distance += (first.rotations[x] - second.rotations[x]).norm();
  }
  if (out.distance == 0.0) {
    throw ValidationError("lipschitz_ratio: the two fields coincide (zero distance)");
  }
  const double ja = j_functional(assemble_K(lattice, dispersion, mu, first), j);
  const double jb = j_functional(assemble_K(lattice, dispersion, mu, second), j);
  out.difference = std::abs(ja - jb);
  out.ratio = out.difference / out.distance;
  const double m_norm = first.spectrum.max_abs();
  out.bound = 2.0 * j.max_norm_squared() * m_norm * m_norm / (mu * mu);
  out.within_bound = out.ratio <= out.bound;
  return out;
}

double variance_prediction(const LatticeSpec& lattice, int n, double mbar, double m2bar) {
  if (n < 1) throw ValidationError("variance_prediction: N must be >= 1");
  const double side4 = std::pow(static_cast<double>(lattice.side), 4);
  const double m4 = std::pow(mbar, 4);
  return (4.0 * m2bar * m4 + m2bar * m2bar) * lattice.volume /
         (static_cast<double>(n) * n * side4);
}

}  // namespace pcm
