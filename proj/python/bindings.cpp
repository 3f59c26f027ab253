#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "pcmlab/concentration.hpp"
#include "pcmlab/contour.hpp"
#include "pcmlab/errors.hpp"
#include "pcmlab/gap.hpp"
#include "pcmlab/lattice.hpp"
#include "pcmlab/orthogonal.hpp"
#include "pcmlab/report.hpp"
#include "pcmlab/spectral.hpp"

namespace py = pybind11;
using namespace pcm;

namespace {

Dispersion dispersion_for(const LatticeSpec& lattice, const std::string& kind) {
  return make_dispersion(lattice, parse_dispersion(kind));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Large-N principal chiral model toolkit";

  auto validation = py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  (void)validation;

  py::class_<LatticeSpec>(m, "LatticeSpec")
      .def_readonly("side", &LatticeSpec::side)
      .def_readonly("volume", &LatticeSpec::volume)
      .def_readonly("spacing", &LatticeSpec::spacing)
      .def_readonly("momentum_step", &LatticeSpec::momentum_step)
      .def_readonly("cutoff", &LatticeSpec::cutoff)
      .def_property_readonly("sites", &LatticeSpec::sites)
      .def("__repr__", [](const LatticeSpec& l) {
        std::ostringstream s;
        s << "LatticeSpec(side=" << l.side << ", volume=" << l.volume << ")";
        return s.str();
      });

  m.def("build_lattice", &build_lattice, py::arg("side"), py::arg("volume"));

  m.def(
      "propagator",
      [](const LatticeSpec& lattice, double mass, std::pair<int, int> x, std::pair<int, int> y,
         const std::string& dispersion) {
        return propagator(lattice, dispersion_for(lattice, dispersion), mass, {x.first, x.second},
                          {y.first, y.second});
      },
      py::arg("lattice"), py::arg("mass"), py::arg("x"), py::arg("y"),
      py::arg("dispersion") = "continuum");

  m.def(
      "sample_haar",
      [](int n, std::uint64_t seed) {
        Rng rng = make_stream(seed, 0, 0);
        return Eigen::MatrixXd(sample_haar(n, rng).matrix());
      },
      py::arg("n"), py::arg("seed") = 1);

  m.def(
      "leading_moment",
      [](int n, std::vector<int> rows, std::vector<int> cols) {
        return leading_moment(n, {std::move(rows), std::move(cols)});
      },
      py::arg("n"), py::arg("rows"), py::arg("cols"));

  m.def(
      "mc_moment",
      [](int n, std::vector<int> rows, std::vector<int> cols, std::size_t samples,
         std::uint64_t seed, unsigned workers) {
        MomentEstimate e;
        {
          py::gil_scoped_release release;
          e = mc_moment(n, {std::move(rows), std::move(cols)}, samples, seed, workers);
        }
        return py::dict(py::arg("estimate") = e.estimate,
                        py::arg("standard_error") = e.standard_error,
                        py::arg("samples") = e.samples);
      },
      py::arg("n"), py::arg("rows"), py::arg("cols"), py::arg("samples"), py::arg("seed") = 1,
      py::arg("workers") = 1);

  m.def(
      "t0_closed_form",
      [](const LatticeSpec& lattice, double mu, double mbar, const std::string& dispersion) {
        return t0_closed_form(lattice, dispersion_for(lattice, dispersion), mu, mbar);
      },
      py::arg("lattice"), py::arg("mu"), py::arg("mbar"), py::arg("dispersion") = "continuum");

  m.def(
      "t0_prime",
      [](const LatticeSpec& lattice, double mass, const std::string& dispersion) {
        return t0_prime(lattice, dispersion_for(lattice, dispersion), mass);
      },
      py::arg("lattice"), py::arg("mass"), py::arg("dispersion") = "continuum");

  m.def(
      "t_of_random_field",
      [](const LatticeSpec& lattice, double mu, std::vector<double> spectrum, std::uint64_t seed,
         const std::string& route) {
        Rng rng = make_stream(seed, 0, 0);
        auto field = random_field(lattice, spectrum_ensemble(std::move(spectrum)), rng);
        const auto k = assemble_K(lattice, make_dispersion(lattice), mu, std::move(field));
        return t_of_O(k, parse_route(route));
      },
      py::arg("lattice"), py::arg("mu"), py::arg("spectrum"), py::arg("seed") = 1,
      py::arg("route") = "automatic");

  m.def(
      "sample_t",
      [](const LatticeSpec& lattice, double mu, std::vector<double> spectrum, std::size_t samples,
         std::uint64_t seed, unsigned workers) {
        EmpiricalMoments moments;
        {
          py::gil_scoped_release release;
          moments = sample_t_distribution(lattice, make_dispersion(lattice), mu,
                                          spectrum_ensemble(std::move(spectrum)), samples,
                                          {.seed = seed, .point = 0, .workers = workers});
        }
        return py::array_t<double>(static_cast<py::ssize_t>(moments.samples.size()),
                                   moments.samples.data());
      },
      py::arg("lattice"), py::arg("mu"), py::arg("spectrum"), py::arg("samples"),
      py::arg("seed") = 1, py::arg("workers") = 1);

  m.def("variance_prediction", &variance_prediction, py::arg("lattice"), py::arg("n"),
        py::arg("mbar"), py::arg("m2bar"));

  m.def(
      "solve_gap",
      [](const LatticeSpec& lattice, double lam, const std::string& dispersion) {
        const auto s = solve_gap(lattice, dispersion_for(lattice, dispersion), lam);
        return py::dict(py::arg("lambda") = s.lambda, py::arg("m") = s.m,
                        py::arg("residual") = s.residual, py::arg("iterations") = s.iterations,
                        py::arg("asymptotic_value") = s.asymptotic_value,
                        py::arg("alt_asymptotic") = s.alt_asymptotic);
      },
      py::arg("lattice"), py::arg("lam"), py::arg("dispersion") = "continuum");

  m.def(
      "verify_rotation",
      [](const std::string& name, double radius, double tolerance) {
        const auto r = verify_rotation(ContourTestCase::single(name, radius, tolerance));
        return py::dict(py::arg("lhs") = r.lhs, py::arg("rhs") = r.rhs,
                        py::arg("tail_bound") = r.tail_bound,
                        py::arg("quadrature_error") = r.quadrature_error, py::arg("gap") = r.gap);
      },
      py::arg("name"), py::arg("radius") = kDefaultContourRadius, py::arg("tolerance") = 1e-6);

  m.def(
      "run_campaign",
      [](const std::string& subcommand, const std::string& config, const std::filesystem::path& out,
         unsigned workers) {
        std::ostringstream o, e;
        int code;
        {
          py::gil_scoped_release release;
          code = run_campaign(subcommand, CampaignConfig::parse(config), out, workers, o, e);
        }
        return py::make_tuple(code, o.str(), e.str());
      },
      py::arg("subcommand"), py::arg("config"), py::arg("out"), py::arg("workers") = 1,
      "Runs a campaign from INI text; returns (exit_code, stdout, stderr).");
}
