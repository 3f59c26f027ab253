#include "pcmlab/report.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <numbers>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "pcmlab/chiral_mc.hpp"
#include "pcmlab/concentration.hpp"
#include "pcmlab/contour.hpp"
#include "pcmlab/errors.hpp"
#include "pcmlab/gap.hpp"
#include "pcmlab/lattice.hpp"
#include "pcmlab/orthogonal.hpp"
#include "pcmlab/parallel.hpp"
#include "pcmlab/spectral.hpp"

namespace pcm {

using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------- config

CampaignConfig CampaignConfig::parse(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ValidationError(std::string("config: ") + e.message() + " at line " +
                          std::to_string(e.line()));
  }
  CampaignConfig config;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      if (body.data().empty()) continue;  // empty [section]
      throw ValidationError("config: key '" + section +
                            "' must be placed inside a [section]");
    }
    for (const auto& [key, value] : body) {
      config.values_[section + "." + key] = boost::algorithm::trim_copy(value.data());
    }
  }
  return config;
}

CampaignConfig CampaignConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot open '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

void CampaignConfig::check_keys(const std::string& subcommand,
                                const std::set<std::string>& allowed) const {
  for (const auto& [key, value] : values_) {
    if (!allowed.count(key)) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      throw ValidationError("config: unknown key '" + key + "' for subcommand '" + subcommand +
                            "' (allowed: " + list + ")");
    }
  }
}

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> parts;
  boost::algorithm::split(parts, text, boost::algorithm::is_any_of(", \t"),
                          boost::algorithm::token_compress_on);
  std::erase_if(parts, [](const std::string& s) { return s.empty(); });
  return parts;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& expected) {
  throw ValidationError("config: '" + key + "' = '" + value + "' is not " + expected);
}

double to_double(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    bad_value(key, text, "a number");
  }
  if (used != text.size() || !std::isfinite(v)) bad_value(key, text, "a finite number");
  return v;
}

long long to_integer(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(text, &used);
  } catch (const std::exception&) {
    bad_value(key, text, "an integer");
  }
  if (used != text.size()) bad_value(key, text, "an integer");
  return v;
}

int to_int(const std::string& key, const std::string& text) {
  const long long v = to_integer(key, text);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    bad_value(key, text, "a 32-bit integer");
  }
  return static_cast<int>(v);
}

}  // namespace

int CampaignConfig::get_int(const std::string& key, int fallback) {
  const int v = has(key) ? to_int(key, values_.at(key)) : fallback;
  echo_[key] = v;
  return v;
}

std::uint64_t CampaignConfig::get_seed(const std::string& key, std::uint64_t fallback) {
  std::uint64_t v = fallback;
  if (has(key)) {
    const std::string& text = values_.at(key);
    std::size_t used = 0;
    try {
      v = std::stoull(text, &used);
    } catch (const std::exception&) {
      bad_value(key, text, "an unsigned 64-bit integer");
    }
    if (used != text.size() || text.front() == '-') {
      bad_value(key, text, "an unsigned 64-bit integer");
    }
  }
  echo_[key] = v;
  return v;
}

double CampaignConfig::get_double(const std::string& key, double fallback) {
  const double v = has(key) ? to_double(key, values_.at(key)) : fallback;
  echo_[key] = v;
  return v;
}

bool CampaignConfig::get_bool(const std::string& key, bool fallback) {
  bool v = fallback;
  if (has(key)) {
    const std::string t = boost::algorithm::to_lower_copy(values_.at(key));
    if (t == "true" || t == "1" || t == "yes" || t == "on") {
      v = true;
    } else if (t == "false" || t == "0" || t == "no" || t == "off") {
      v = false;
    } else {
      bad_value(key, values_.at(key), "a boolean");
    }
  }
  echo_[key] = v;
  return v;
}

std::string CampaignConfig::get_string(const std::string& key, const std::string& fallback) {
  const std::string v = has(key) ? values_.at(key) : fallback;
  echo_[key] = v;
  return v;
}

std::vector<int> CampaignConfig::get_int_list(const std::string& key,
                                              const std::vector<int>& fallback) {
  std::vector<int> v = fallback;
  if (has(key)) {
    v.clear();
    for (const auto& part : split_list(values_.at(key))) v.push_back(to_int(key, part));
    if (v.empty()) bad_value(key, values_.at(key), "a non-empty list");
  }
  echo_[key] = v;
  return v;
}

std::vector<double> CampaignConfig::get_double_list(const std::string& key,
                                                    const std::vector<double>& fallback) {
  std::vector<double> v = fallback;
  if (has(key)) {
    v.clear();
    for (const auto& part : split_list(values_.at(key))) v.push_back(to_double(key, part));
    if (v.empty()) bad_value(key, values_.at(key), "a non-empty list");
  }
  echo_[key] = v;
  return v;
}

std::vector<std::string> CampaignConfig::get_string_list(
    const std::string& key, const std::vector<std::string>& fallback) {
  std::vector<std::string> v = has(key) ? split_list(values_.at(key)) : fallback;
  if (v.empty()) bad_value(key, has(key) ? values_.at(key) : "", "a non-empty list");
  echo_[key] = v;
  return v;
}

// ---------------------------------------------------------------- csv

std::string format_number(double v) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.17g", v);
  return buffer;
}

std::string csv_escape(const std::string& cell) {
  if (cell.find_first_of(",\"\r\n") == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

CsvTable::Row& CsvTable::Row::add(double v) {
  if (!std::isfinite(v)) {
    throw NumericalError("report: non-finite value in CSV row (" + format_number(v) + ")");
  }
  cells_.push_back(format_number(v));
  return *this;
}

CsvTable::Row& CsvTable::Row::add(long long v) {
  cells_.push_back(std::to_string(v));
  return *this;
}

CsvTable::Row& CsvTable::Row::add(const std::string& v) {
  cells_.push_back(csv_escape(v));
  return *this;
}

CsvTable::Row& CsvTable::row() { return rows_.emplace_back(); }

void CsvTable::write(std::ostream& out) const {
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << "\r\n";
  };
  std::vector<std::string> header;
  for (const auto& h : header_) header.push_back(csv_escape(h));
  line(header);
  for (const auto& r : rows_) {
    if (r.cells_.size() != header_.size()) {
      throw std::logic_error("CsvTable: row width does not match header");
    }
    line(r.cells_);
  }
}

void CsvTable::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("report: cannot write '" + path.string() + "'");
  write(out);
}

bool decreasing_within_errors(const std::vector<double>& v, const std::vector<double>& e) {
  if (v.size() < 2) return true;
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    if (v[i + 1] - v[i] > e[i] + e[i + 1]) return false;
  }
  return v.back() < v.front();
}

// ---------------------------------------------------------------- campaigns

namespace {

const std::set<std::string> kRunKeys = {"run.seed", "run.workers"};
const std::set<std::string> kLatticeKeys = {"lattice.side", "lattice.volume",
                                            "lattice.dispersion"};
const std::set<std::string> kSpectrumKeys = {"spectrum.values", "spectrum.two_point"};
const std::set<std::string> kSamplingKeys = {"sampling.samples", "sampling.route"};

std::set<std::string> merge(std::initializer_list<std::set<std::string>> sets) {
  std::set<std::string> out;
  for (const auto& s : sets) out.insert(s.begin(), s.end());
  return out;
}

struct Context {
  CampaignConfig& config;
  std::filesystem::path out_dir;
  unsigned workers = 1;
  std::uint64_t seed = 1;
  ordered_json results = ordered_json::object();
  ordered_json criteria = ordered_json::object();
  std::vector<std::string> outputs;
  std::ostream& out;

  void write(const std::string& name, const CsvTable& table) {
    table.write(out_dir / name);
    outputs.push_back(name);
  }
};

LatticeSpec lattice_from(CampaignConfig& c, int default_side) {
  return build_lattice(c.get_int("lattice.side", default_side), c.get_double("lattice.volume", 1.0));
}

Dispersion dispersion_from(CampaignConfig& c, const LatticeSpec& lattice) {
  return make_dispersion(lattice, parse_dispersion(c.get_string("lattice.dispersion", "continuum")));
}

SpectrumEnsemble spectrum_from(CampaignConfig& c, int n) {
  if (c.has("spectrum.values") && c.has("spectrum.two_point")) {
    throw ValidationError("config: give either spectrum.values or spectrum.two_point, not both");
  }
  if (c.has("spectrum.values")) {
    auto values = c.get_double_list("spectrum.values", {});
    if (static_cast<int>(values.size()) != n) {
      throw ValidationError("config: spectrum.values has " + std::to_string(values.size()) +
                            " entries but N = " + std::to_string(n));
    }
    return spectrum_ensemble(std::move(values));
  }
  const auto tp = c.get_double_list("spectrum.two_point", {0.0, 1.0});
  if (tp.size() != 2) throw ValidationError("config: spectrum.two_point needs exactly two values");
  return two_point_spectrum(tp[0], tp[1], n);
}

std::vector<int> positive_list(CampaignConfig& c, const std::string& key,
                               const std::vector<int>& fallback, int minimum = 1) {
  auto v = c.get_int_list(key, fallback);
  for (int x : v) {
    if (x < minimum) {
      throw ValidationError("config: " + key + " entries must be >= " + std::to_string(minimum));
    }
  }
  return v;
}

std::size_t samples_from(CampaignConfig& c, int fallback, int minimum) {
  const int s = c.get_int("sampling.samples", fallback);
  if (s < minimum) {
    throw ValidationError("config: sampling.samples must be >= " + std::to_string(minimum));
  }
  return static_cast<std::size_t>(s);
}

void haar_moments(Context& ctx) {
  auto& c = ctx.config;
  const auto ns = positive_list(c, "model.n", {4});
  const auto rows = c.get_int_list("moment.rows", {1, 1});
  const auto cols = c.get_int_list("moment.cols", {2, 2});
  const std::size_t samples = samples_from(c, 200000, 100);
  const MomentSpec spec{rows, cols};

  CsvTable table({"n", "degree", "leading", "estimate", "standard_error", "samples",
                  "deviation_in_stderr", "scaled_gap", "scaled_gap_error"});
  std::vector<double> gaps, gap_errors;
  bool within = true;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const int n = ns[i];
    const double lead = leading_moment(n, spec);
    const auto est = mc_moment(n, spec, samples, derive_seed(ctx.seed, i, 0), ctx.workers);
    const double dev = est.standard_error > 0 ? std::abs(est.estimate - lead) / est.standard_error
                                              : (est.estimate == lead ? 0.0 : INFINITY);
    const double scale = std::pow(static_cast<double>(n), spec.degree() / 2);
    gaps.push_back(scale * std::abs(est.estimate - lead));
    gap_errors.push_back(scale * est.standard_error);
    within = within && dev < 4.0;
    table.row().add(n).add(spec.degree()).add(lead).add(est.estimate).add(est.standard_error)
        .add(est.samples).add(std::isfinite(dev) ? dev : 1e300).add(gaps.back()).add(gap_errors.back());
    ctx.out << "N=" << n << "  leading=" << lead << "  estimate=" << est.estimate << " +- "
            << est.standard_error << "\n";
  }
  ctx.write("haar-moments.csv", table);
  ctx.criteria["leading_within_4_stderr"] = within;
  ctx.criteria["scaled_gap_decreasing"] = decreasing_within_errors(gaps, gap_errors);
}

std::vector<EmpiricalMoments> t_campaign(Context& ctx, const LatticeSpec& lattice,
                                         const Dispersion& dispersion, double mu,
                                         const std::vector<int>& ns, std::size_t samples,
                                         LogDetRoute route,
                                         std::vector<SpectrumEnsemble>& spectra) {
  std::vector<EmpiricalMoments> out;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    spectra.push_back(spectrum_from(ctx.config, ns[i]));
    SamplingOptions options{ctx.seed, i, ctx.workers, route};
    out.push_back(sample_t_distribution(lattice, dispersion, mu, spectra.back(), samples, options));
  }
  return out;
}

void concentration(Context& ctx, bool mean_check) {
  auto& c = ctx.config;
  const auto lattice = lattice_from(c, 8);
  const auto dispersion = dispersion_from(c, lattice);
  const double mu = c.get_double("model.mu", 1.0);
  const auto ns = positive_list(c, "model.n", {8, 16, 32});
  const std::size_t samples = samples_from(c, 400, 50);
  const auto route = parse_route(c.get_string("sampling.route", "automatic"));

  std::vector<SpectrumEnsemble> spectra;
  const auto runs = t_campaign(ctx, lattice, dispersion, mu, ns, samples, route, spectra);

  if (!mean_check) {
    CsvTable table({"n", "side", "volume", "mu", "mbar", "m2bar", "samples", "mean", "mean_error",
                    "variance", "variance_error", "skewness", "excess_kurtosis", "t0",
                    "variance_prediction"});
    bool decreasing = true;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const auto& em = runs[i];
      const auto& s = spectra[i];
      table.row().add(ns[i]).add(lattice.side).add(lattice.volume).add(mu).add(s.mean())
          .add(s.mean_square()).add(em.sample_count).add(em.mean).add(em.mean_error)
          .add(em.variance).add(em.variance_error).add(em.skewness).add(em.excess_kurtosis)
          .add(t0_closed_form(lattice, dispersion, mu, s.mean()))
          .add(variance_prediction(lattice, ns[i], s.mean(), s.mean_square()));
      if (i > 0) {
        const double combined = std::hypot(em.variance_error, runs[i - 1].variance_error);
        decreasing = decreasing && em.variance < runs[i - 1].variance + 2.0 * combined;
      }
      ctx.out << "N=" << ns[i] << "  mean=" << em.mean << "  variance=" << em.variance << "\n";
    }
    ctx.write("concentration.csv", table);
    ctx.criteria["variance_decreasing_in_n"] = decreasing;
    if (runs.back().sample_count >= 500) {
      ctx.criteria["gaussian_at_largest_n"] = gaussianity_report(runs.back()).both_small;
    }
    return;
  }

  CsvTable table({"n", "side", "volume", "mu", "mbar", "samples", "mean", "mean_error", "t0",
                  "gap", "gap_in_stderr", "relative_gap"});
  std::vector<double> in_stderr;
  double last_relative = 0.0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& em = runs[i];
    const double mbar = spectra[i].mean();
    const auto g = mean_vs_t0(em, lattice, dispersion, mu, mbar);
    table.row().add(ns[i]).add(lattice.side).add(lattice.volume).add(mu).add(mbar)
        .add(em.sample_count).add(em.mean).add(em.mean_error).add(g.t0).add(g.gap)
        .add(std::isfinite(g.gap_in_stderr) ? g.gap_in_stderr : 1e300).add(g.relative_gap);
    in_stderr.push_back(g.gap_in_stderr);
    last_relative = g.relative_gap;
    ctx.out << "N=" << ns[i] << "  gap=" << g.gap << "  gap/stderr=" << g.gap_in_stderr
            << "  relative=" << g.relative_gap << "\n";
  }
  ctx.write("mean-check.csv", table);
  bool decreasing = true;
  for (std::size_t i = 1; i < in_stderr.size(); ++i) {
    decreasing = decreasing && in_stderr[i] < in_stderr[i - 1];
  }
  ctx.criteria["gap_in_stderr_decreasing"] = decreasing;
  ctx.criteria["relative_gap_below_2pct_at_largest_n"] = last_relative < 0.02;
}

void variance_scaling(Context& ctx) {
  auto& c = ctx.config;
  const std::string axis_name = c.get_string("scaling.axis", "N");
  ScalingAxis axis;
  if (axis_name == "N" || axis_name == "n") {
    axis = ScalingAxis::n;
  } else if (axis_name == "side") {
    axis = ScalingAxis::side;
  } else {
    throw ValidationError("config: scaling.axis must be 'N' or 'side', got '" + axis_name + "'");
  }
  const auto sides = positive_list(c, "lattice.side",
                                   axis == ScalingAxis::side ? std::vector<int>{4, 6, 8, 12}
                                                             : std::vector<int>{8}, 2);
  const double volume = c.get_double("lattice.volume", 1.0);
  const auto kind = parse_dispersion(c.get_string("lattice.dispersion", "continuum"));
  const double mu = c.get_double("model.mu", 1.0);
  const auto ns = positive_list(c, "model.n",
                                axis == ScalingAxis::n ? std::vector<int>{8, 16, 32, 64}
                                                       : std::vector<int>{32});
  const std::size_t samples = samples_from(c, 400, 50);
  const auto route = parse_route(c.get_string("sampling.route", "automatic"));
  if (axis == ScalingAxis::n && sides.size() != 1) {
    throw ValidationError("config: lattice.side must be a single value when scaling.axis = N");
  }
  if (axis == ScalingAxis::side && ns.size() != 1) {
    throw ValidationError("config: model.n must be a single value when scaling.axis = side");
  }

  const std::size_t points = axis == ScalingAxis::n ? ns.size() : sides.size();
  CsvTable table({"axis", "n", "side", "volume", "samples", "mean", "variance", "variance_error",
                  "variance_prediction"});
  std::vector<std::pair<double, EmpiricalMoments>> runs;
  for (std::size_t i = 0; i < points; ++i) {
    const int n = axis == ScalingAxis::n ? ns[i] : ns[0];
    const int side = axis == ScalingAxis::side ? sides[i] : sides[0];
    const auto lattice = build_lattice(side, volume);
    const auto dispersion = make_dispersion(lattice, kind);
    const auto spectrum = spectrum_from(c, n);
    SamplingOptions options{ctx.seed, i, ctx.workers, route};
    auto em = sample_t_distribution(lattice, dispersion, mu, spectrum, samples, options);
    table.row().add(std::string(to_string(axis))).add(n).add(side).add(volume)
        .add(em.sample_count).add(em.mean).add(em.variance).add(em.variance_error)
        .add(variance_prediction(lattice, n, spectrum.mean(), spectrum.mean_square()));
    ctx.out << to_string(axis) << "=" << (axis == ScalingAxis::n ? n : side)
            << "  variance=" << em.variance << " +- " << em.variance_error << "\n";
    runs.emplace_back(axis == ScalingAxis::n ? n : side, std::move(em));
  }
  ctx.write("variance-scaling.csv", table);
  const auto fit = variance_scaling_fit(runs, axis);
  ctx.results["exponent"] = fit.exponent;
  ctx.results["exponent_error"] = fit.exponent_error;
  ctx.results["target"] = fit.target;
  const double lo = axis == ScalingAxis::n ? -2.3 : -4.6;
  const double hi = axis == ScalingAxis::n ? -1.7 : -3.4;
  ctx.criteria["exponent_in_window"] = fit.exponent >= lo && fit.exponent <= hi;
  ctx.out << "exponent=" << fit.exponent << " +- " << fit.exponent_error << "\n";
}

void gap(Context& ctx) {
  auto& c = ctx.config;
  const auto lattice = lattice_from(c, 64);
  const auto dispersion = dispersion_from(c, lattice);
  const auto lambdas = c.get_double_list("model.lambda", {1.0, 2.0, 3.0, 4.0});
  const int n = c.get_int("model.n", 32);
  const auto spectrum = spectrum_from(c, n);

  CsvTable table({"lambda", "side", "volume", "m_numeric", "asymptotic", "alt_asymptotic",
                  "residual", "iterations", "log_offset", "dropped_term_ratio",
                  "dropped_term_ratio_mu0"});
  bool residual_ok = true, monotone = true;
  double prev = 0.0, lo = INFINITY, hi = -INFINITY, worst_dropped = 0.0;
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    const auto sol = solve_gap(lattice, dispersion, lambdas[i]);
    const double offset = std::log(sol.m) + 4.0 * std::numbers::pi / sol.lambda -
                          std::log(lattice.cutoff * lattice.cutoff);
    const double dropped =
        dropped_term_ratio(lattice, n, sol.lambda, spectrum.mean(), spectrum.mean_square());
    const double dropped_mu0 = dropped_term_at_solution(lattice, n, sol, spectrum);
    residual_ok = residual_ok && std::abs(sol.residual) < 1e-12 / (2.0 * sol.lambda);
    if (i > 0) monotone = monotone && sol.m > prev;
    prev = sol.m;
    lo = std::min(lo, offset);
    hi = std::max(hi, offset);
    worst_dropped = std::max(worst_dropped, dropped);
    table.row().add(sol.lambda).add(lattice.side).add(lattice.volume).add(sol.m)
        .add(sol.asymptotic_value).add(sol.alt_asymptotic).add(sol.residual).add(sol.iterations)
        .add(offset).add(dropped).add(dropped_mu0);
    ctx.out << "lambda=" << sol.lambda << "  m=" << sol.m << "  offset=" << offset << "\n";
  }
  ctx.write("gap.csv", table);
  ctx.results["log_offset_spread"] = hi - lo;
  ctx.results["max_dropped_term_ratio"] = worst_dropped;
  ctx.criteria["residual_below_tolerance"] = residual_ok;
  ctx.criteria["monotone_in_lambda"] = monotone;
  ctx.criteria["log_offset_spread_below_1_5"] = hi - lo < 1.5;
  ctx.criteria["dropped_term_below_1e-3"] = worst_dropped < 1e-3;
}

void simulate(Context& ctx) {
  auto& c = ctx.config;
  const auto lattice = lattice_from(c, 16);
  const int n = c.get_int("model.n", 8);
  const auto lambdas = c.get_double_list("model.lambda", {1.0, 2.0, 3.0});
  McParams base;
  base.n = n;
  base.lattice = lattice;
  base.thermalization = c.get_int("mc.thermalization", 2000);
  base.sweeps = c.get_int("mc.sweeps", 20000);
  base.measure_every = c.get_int("mc.measure_every", 5);
  base.epsilon = c.get_double("mc.epsilon", 0.5);
  base.adapt_epsilon = c.get_bool("mc.adapt_epsilon", true);
  base.hits = c.get_int("mc.hits", 0);
  base.reflector_every = c.get_int("mc.reflector_every", 10);
  base.reorthogonalize_every = c.get_int("mc.reorthogonalize_every", 10);
  base.hot_start = c.get_bool("mc.hot_start", false);
  base.proposal = parse_proposal(c.get_string("mc.proposal", "givens"));
  base.seed = ctx.seed;
  const int min_bins = c.get_int("mc.min_bins", 100);
  const int half = lattice.side / 2;
  const int window_lo = c.get_int("fit.window_lo", std::min(2, half - 1));
  const int window_hi = c.get_int("fit.window_hi", half - 1);
  const int min_points = c.get_int("fit.min_points", 3);
  const double max_chi2 = c.get_double("fit.max_chi2", 2.0);
  if (min_bins < 1) throw ValidationError("config: mc.min_bins must be >= 1");
  base.validate();

  std::vector<ChainResult> chains;
  chains.reserve(lambdas.size());
  {
    std::vector<std::optional<ChainResult>> slots(lambdas.size());
    parallel_for(lambdas.size(), ctx.workers, [&](std::size_t i) {
      McParams p = base;
      p.lambda = lambdas[i];
      p.point = i;
      slots[i] = run_chain(p);
    });
    for (auto& s : slots) chains.push_back(std::move(*s));
  }

  CsvTable summary({"lambda", "r", "correlator", "correlator_error", "m_eff", "m_eff_error"});
  CsvTable per_measurement({"lambda", "index", "energy", "magnetization_sq", "correlator_half"});
  ordered_json per_lambda = ordered_json::array();
  bool shape_ok = true, plateau_ok = true;
  std::vector<double> masses, mass_errors;
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    const auto& chain = chains[i];
    for (std::size_t k = 0; k < chain.measurements.size(); ++k) {
      const auto& m = chain.measurements[k];
      per_measurement.row().add(lambdas[i]).add(k).add(m.energy)
          .add(m.magnetization.squaredNorm() / n).add(m.correlator[half]);
    }
    const auto corr = measure_correlator(chain.measurements, lattice.side,
                                         static_cast<std::size_t>(min_bins));
    for (int r = 1; r <= half; ++r) {
      shape_ok = shape_ok && corr.value[r] > 0.0;
      if (r < half) {
        shape_ok = shape_ok && corr.value[r + 1] <= corr.value[r] + corr.error[r] + corr.error[r + 1];
      }
    }
    ordered_json entry = {{"lambda", lambdas[i]},
                          {"acceptance", chain.acceptance},
                          {"epsilon", chain.epsilon},
                          {"max_defect", chain.max_defect},
                          {"measurements", chain.measurements.size()},
                          {"tau_energy", corr.tau_energy},
                          {"tau_correlator", corr.tau_correlator},
                          {"bin_size", corr.bin_size},
                          {"bins", corr.bins}};
    std::optional<EffectiveMass> em;
    try {
      const auto [lo, hi] = usable_window(corr, window_lo, window_hi);
      em = find_plateau(corr, lo, hi, min_points, max_chi2);
    } catch (const NumericalError& e) {
      entry["plateau_diagnostic"] = e.what();
    }
    for (int r = 0; r <= half; ++r) {
      const bool has_mass = em && r < half && std::isfinite(em->mass[r]) && std::isfinite(em->error[r]);
      summary.row().add(lambdas[i]).add(r).add(corr.value[r]).add(corr.error[r])
          .add(has_mass ? em->mass[r] : 0.0).add(has_mass ? em->error[r] : 0.0);
    }
    if (em) {
      entry["window"] = {em->window_lo, em->window_hi};
      entry["plateau"] = em->plateau;
      entry["plateau_error"] = em->plateau_error;
      entry["chi2_per_dof"] = em->chi2_per_dof;
      entry["correlated_fit"] = em->correlated;
      masses.push_back(em->plateau);
      mass_errors.push_back(em->plateau_error);
    } else {
      plateau_ok = false;
    }
    ctx.out << "lambda=" << lambdas[i] << "  acceptance=" << chain.acceptance
            << "  bins=" << corr.bins;
    if (em) ctx.out << "  mass=" << em->plateau << " +- " << em->plateau_error;
    ctx.out << "\n";
    per_lambda.push_back(entry);
  }
  ctx.write("simulate.csv", summary);
  ctx.write("simulate_measurements.csv", per_measurement);
  ctx.results["chains"] = per_lambda;
  bool increasing = plateau_ok;
  for (std::size_t i = 1; increasing && i < masses.size(); ++i) {
    increasing = masses[i] - masses[i - 1] > mass_errors[i] + mass_errors[i - 1];
  }
  ctx.criteria["correlator_positive_decreasing"] = shape_ok;
  ctx.criteria["plateau_found"] = plateau_ok;
  ctx.criteria["mass_increasing_in_lambda"] = increasing;
}

void contour_check(Context& ctx) {
  auto& c = ctx.config;
  std::vector<std::string> all;
  for (const auto& f : contour_catalog()) all.push_back(f.name);
  const auto names = c.get_string_list("contour.functions", all);
  const double radius = c.get_double("contour.radius", kDefaultContourRadius);
  const double tolerance = c.get_double("contour.tolerance", 1e-6);

  CsvTable table({"function", "radius", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "gap",
                  "tail_bound", "quadrature_error"});
  bool all_ok = true;
  for (const auto& name : names) {
    const auto res = verify_rotation(ContourTestCase::single(name, radius, tolerance));
    all_ok = all_ok && res.gap < tolerance;
    table.row().add(name).add(radius).add(res.lhs.real()).add(res.lhs.imag())
        .add(res.rhs.real()).add(res.rhs.imag()).add(res.gap).add(res.tail_bound)
        .add(res.quadrature_error);
    if (name == "inv_sq") {
      const std::complex<double> exact{0.0, -1.0};
      ctx.criteria["inv_sq_matches_minus_i"] =
          std::abs(res.lhs - exact) < 1e-8 && std::abs(res.rhs - exact) < 1e-8;
    }
    ctx.out << name << "  lhs=" << res.lhs << "  rhs=" << res.rhs << "  gap=" << res.gap << "\n";
  }
  ctx.write("contour-check.csv", table);
  ctx.criteria["all_gaps_below_tolerance"] = all_ok;
}

void propagator_table(Context& ctx) {
  auto& c = ctx.config;
  const auto lattice = lattice_from(c, 4);
  const auto dispersion = dispersion_from(c, lattice);
  const double m = c.get_double("model.m", 1.0);
  const bool dense = lattice.sites() <= kDenseLimit;
  Eigen::MatrixXd inverse;
  if (dense) {
    if (!(m > 0.0)) throw ValidationError("config: model.m must be positive");
    inverse = FreeOperator(lattice, dispersion, m).matrix().inverse();
  }
  CsvTable table({"dx", "dy", "value", "dense_value"});
  double worst = 0.0;
  for (int dy = 0; dy <= lattice.side / 2; ++dy) {
    for (int dx = 0; dx <= lattice.side / 2; ++dx) {
      const double v = propagator(lattice, dispersion, m, {dx, dy}, {0, 0});
      const double d = dense ? inverse(site_index(lattice, {dx, dy}), 0) : v;
      worst = std::max(worst, std::abs(v - d));
      table.row().add(dx).add(dy).add(v).add(d);
    }
  }
  ctx.write("propagator.csv", table);
  ctx.results["max_dense_deviation"] = worst;
  ctx.criteria["matches_dense_inverse"] = worst < 1e-10;
  ctx.out << "propagator: " << table.size() << " displacements, max dense deviation " << worst
          << "\n";
}

}  // namespace

const std::vector<std::string>& subcommand_names() {
  static const std::vector<std::string> names = {
      "haar-moments", "concentration", "mean-check", "variance-scaling",
      "gap",          "simulate",      "contour-check", "propagator"};
  return names;
}

std::set<std::string> allowed_keys(const std::string& sub) {
  if (sub == "haar-moments") {
    return merge({kRunKeys, {"model.n", "moment.rows", "moment.cols", "sampling.samples"}});
  }
  if (sub == "concentration" || sub == "mean-check") {
    return merge({kRunKeys, kLatticeKeys, kSpectrumKeys, kSamplingKeys, {"model.mu", "model.n"}});
  }
  if (sub == "variance-scaling") {
    return merge({kRunKeys, kLatticeKeys, kSpectrumKeys, kSamplingKeys,
                  {"model.mu", "model.n", "scaling.axis"}});
  }
  if (sub == "gap") return merge({kRunKeys, kLatticeKeys, kSpectrumKeys, {"model.lambda", "model.n"}});
  if (sub == "simulate") {
    return merge({kRunKeys,
                  {"lattice.side", "lattice.volume", "model.n", "model.lambda",
                   "mc.thermalization", "mc.sweeps", "mc.measure_every", "mc.epsilon",
                   "mc.adapt_epsilon", "mc.hits", "mc.reflector_every",
                   "mc.reorthogonalize_every", "mc.hot_start", "mc.proposal", "mc.min_bins",
                   "fit.window_lo", "fit.window_hi", "fit.min_points", "fit.max_chi2"}});
  }
  if (sub == "contour-check") {
    return merge({kRunKeys, {"contour.functions", "contour.radius", "contour.tolerance"}});
  }
  if (sub == "propagator") return merge({kRunKeys, kLatticeKeys, {"model.m"}});
  std::string list;
  for (const auto& s : subcommand_names()) list += (list.empty() ? "" : ", ") + s;
  throw ValidationError("unknown subcommand '" + sub + "' (expected one of: " + list + ")");
}

int run_campaign(const std::string& subcommand, CampaignConfig config,
                 const std::filesystem::path& out_dir, std::optional<unsigned> workers,
                 std::ostream& out, std::ostream& err) {
  try {
    const auto allowed = allowed_keys(subcommand);
    if (config.empty()) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      throw ValidationError("config: no keys given; subcommand '" + subcommand +
                            "' accepts [section] key = value entries among: " + list);
    }
    config.check_keys(subcommand, allowed);

    const auto start = std::chrono::steady_clock::now();
    Context ctx{config, out_dir, 1, 1, ordered_json::object(), ordered_json::object(), {}, out};
    ctx.seed = config.get_seed("run.seed", 1);
    const int configured = config.get_int("run.workers", 1);
    if (configured < 0) throw ValidationError("config: run.workers must be >= 0");
    ctx.workers = workers.value_or(static_cast<unsigned>(configured));
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw ValidationError("--out: cannot create '" + out_dir.string() + "': " + ec.message());

    if (subcommand == "haar-moments") haar_moments(ctx);
    else if (subcommand == "concentration") concentration(ctx, false);
    else if (subcommand == "mean-check") concentration(ctx, true);
    else if (subcommand == "variance-scaling") variance_scaling(ctx);
    else if (subcommand == "gap") gap(ctx);
    else if (subcommand == "simulate") simulate(ctx);
    else if (subcommand == "contour-check") contour_check(ctx);
    else propagator_table(ctx);

    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    ordered_json summary = {{"schema_version", kReportSchemaVersion},
                            {"subcommand", subcommand},
                            {"seed", ctx.seed},
                            {"parameters", config.echo()},
                            {"results", ctx.results},
                            {"criteria", ctx.criteria},
                            {"outputs", ctx.outputs},
                            {"wall_clock_seconds", seconds}};
    const auto json_path = out_dir / (subcommand + ".json");
    std::ofstream json_out(json_path);
    if (!json_out) throw ValidationError("--out: cannot write '" + json_path.string() + "'");
    json_out << summary.dump(2) << "\n";
    return 0;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return 2;
  }
}

int run_campaign(const RunRequest& request, std::ostream& out, std::ostream& err) {
  try {
    auto config = CampaignConfig::load(request.config_path);
    return run_campaign(request.subcommand, std::move(config), request.out_dir, request.workers,
                        out, err);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace pcm
