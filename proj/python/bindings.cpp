#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "conelab/scenario.hpp"

namespace py = pybind11;
using namespace conelab;

namespace {

Variation::Kind parse_kind(const std::string& kind) {
  if (kind == "normal") return Variation::Kind::Normal;
  if (kind == "dilation") return Variation::Kind::Dilation;
  if (kind == "parallel") return Variation::Kind::Parallel;
  fail(ErrorKind::InvalidArgument, "variation kind must be normal, dilation or parallel");
}

SpectrumMode parse_mode(const std::string& mode) {
  if (mode == "all") return SpectrumMode::All;
  if (mode == "mean_zero") return SpectrumMode::MeanZero;
  fail(ErrorKind::InvalidArgument, "spectrum mode must be all or mean_zero");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "weighted variational geometry of Euclidean solid cones";
  m.attr("__version__") = kToolVersion;

  py::register_exception<Error>(m, "ConelabError");

  py::class_<SolidCone>(m, "SolidCone")
      .def_static("full_sphere", &SolidCone::full_sphere, py::arg("ambient_dim"))
      .def_static("half_space", &SolidCone::half_space, py::arg("inner_normal"))
      .def_static("circular", &SolidCone::circular, py::arg("axis"), py::arg("half_aperture"))
      .def_static("planar_sector",
                  py::overload_cast<double, double>(&SolidCone::planar_sector),
                  py::arg("angle"), py::arg("start_angle"))
      .def_static("planar_sector", py::overload_cast<double>(&SolidCone::planar_sector),
                  py::arg("angle"))
      .def("ambient_dim", &SolidCone::ambient_dim)
      .def("convex", &SolidCone::convex)
      .def("has_boundary", &SolidCone::has_boundary)
      .def("contains", &SolidCone::contains, py::arg("p"), py::arg("tol") = 1e-12)
      .def("describe", &SolidCone::describe)
      .def("__repr__", &SolidCone::describe);

  py::class_<DensityProfile>(m, "DensityProfile")
      .def_static("radial", &DensityProfile::radial, py::arg("constant") = 1.0)
      .def_static("monomial", &DensityProfile::monomial, py::arg("exponents"))
      .def_static("linear_power", &DensityProfile::linear_power, py::arg("form"),
                  py::arg("power"))
      .def_static("perturbed_radial", &DensityProfile::perturbed_radial, py::arg("direction"),
                  py::arg("amplitude"))
      .def_static("expression", &DensityProfile::expression, py::arg("source"),
                  py::arg("ambient_dim"));

  py::class_<CurvatureWitness>(m, "CurvatureWitness")
      .def_readonly("point", &CurvatureWitness::point)
      .def_readonly("direction", &CurvatureWitness::direction)
      .def_readonly("value", &CurvatureWitness::value);

  py::class_<CurvatureReport>(m, "CurvatureReport")
      .def_readonly("cd_certified", &CurvatureReport::cd_certified)
      .def_readonly("min_ric_f_k", &CurvatureReport::min_ric_f_k)
      .def_readonly("min_ric_f", &CurvatureReport::min_ric_f)
      .def_readonly("profile_test_certified", &CurvatureReport::profile_test_certified)
      .def_readonly("methods_agree", &CurvatureReport::methods_agree)
      .def_readonly("witness", &CurvatureReport::witness);

  py::class_<HomogeneousDensity>(m, "HomogeneousDensity")
      .def(py::init<double, DensityProfile>(), py::arg("degree"), py::arg("profile"))
      .def("degree", &HomogeneousDensity::degree)
      .def("is_radial", &HomogeneousDensity::is_radial)
      .def("evaluate", &HomogeneousDensity::evaluate, py::arg("cone"), py::arg("p"))
      .def(
          "certify_cd",
          [](const HomogeneousDensity& d, const SolidCone& cone) {
            return d.certify_cd(cone, SampleSpec{});
          },
          py::arg("cone"))
      .def("describe", &HomogeneousDensity::describe)
      .def("__repr__", &HomogeneousDensity::describe);

  py::class_<DiscreteHypersurface>(m, "Hypersurface")
      .def("sample_count", &DiscreteHypersurface::sample_count)
      .def("sample", &DiscreteHypersurface::sample, py::arg("index"))
      .def("min_radius", &DiscreteHypersurface::min_radius)
      .def("dilated", &DiscreteHypersurface::dilated, py::arg("factor"));

  m.def("make_cap", &make_cap, py::arg("cone"), py::arg("radius"), py::arg("resolution"));
  m.def("make_sphere_through_origin", &make_sphere_through_origin, py::arg("center"),
        py::arg("resolution"), py::arg("puncture_radius") = -1.0);
  m.def("make_ellipsoid", &make_ellipsoid, py::arg("semiaxes"), py::arg("resolution"));
  m.def("make_radial_graph", &make_radial_graph, py::arg("cone"), py::arg("rho"),
        py::arg("resolution"));
  m.def("mesh_cap", &mesh_cap, py::arg("cone"), py::arg("radius"), py::arg("resolution"));
  m.def("mesh_ellipsoid", &mesh_ellipsoid, py::arg("semiaxes"), py::arg("resolution"));
  m.def("import_obj", &import_obj, py::arg("path"));
  m.def("import_polyline_csv", &import_polyline_csv, py::arg("path"));

  m.def(
      "weighted_area",
      [](const DiscreteHypersurface& s, const HomogeneousDensity& d, const SolidCone& c) {
        return weighted_area(geometry(s, d, c));
      },
      py::arg("surface"), py::arg("density"), py::arg("cone"));
  m.def(
      "oriented_volume",
      [](const DiscreteHypersurface& s, const HomogeneousDensity& d, const SolidCone& c) {
        return oriented_volume(geometry(s, d, c), d);
      },
      py::arg("surface"), py::arg("density"), py::arg("cone"));

  py::class_<MinkowskiReport>(m, "MinkowskiReport")
      .def_readonly("residual_integral", &MinkowskiReport::residual_integral)
      .def_readonly("area", &MinkowskiReport::area)
      .def_readonly("oriented_volume", &MinkowskiReport::oriented_volume)
      .def_readonly("identity_gap", &MinkowskiReport::identity_gap)
      .def_readonly("relative_residual", &MinkowskiReport::relative_residual)
      .def_readonly("relative_gap", &MinkowskiReport::relative_gap)
      .def_readonly("Hf_mean", &MinkowskiReport::Hf_mean)
      .def_readonly("Hf_std", &MinkowskiReport::Hf_std)
      .def_readonly("stationary", &MinkowskiReport::stationary)
      .def_readonly("critical_degree", &MinkowskiReport::critical_degree)
      .def_readonly("forced_zero_Hf", &MinkowskiReport::forced_zero_Hf);

  m.def(
      "minkowski",
      [](const DiscreteHypersurface& s, const HomogeneousDensity& d, const SolidCone& c,
         double tol_stationary) {
        return minkowski(geometry(s, d, c), d, tol_stationary);
      },
      py::arg("surface"), py::arg("density"), py::arg("cone"),
      py::arg("tol_stationary") = 1e-6);

  py::class_<StabilityReport>(m, "StabilityReport")
      .def_readonly("Hf_mean", &StabilityReport::Hf_mean)
      .def_readonly("Hf_std", &StabilityReport::Hf_std)
      .def_readonly("orthogonality_error", &StabilityReport::orthogonality_error)
      .def_readonly("lambda_min_all", &StabilityReport::lambda_min_all)
      .def_readonly("lambda_min_meanzero", &StabilityReport::lambda_min_meanzero)
      .def_readonly("stationary", &StabilityReport::stationary)
      .def_readonly("strongly_stationary", &StabilityReport::strongly_stationary)
      .def_readonly("f_stable", &StabilityReport::f_stable)
      .def_readonly("strongly_f_stable", &StabilityReport::strongly_f_stable)
      .def_readonly("refinement_checked", &StabilityReport::refinement_checked)
      .def_readonly("refinement_delta", &StabilityReport::refinement_delta)
      .def_readonly("tol_stationary", &StabilityReport::tol_stationary)
      .def_readonly("dofs", &StabilityReport::dofs);

  m.def(
      "stability_report",
      [](const DiscreteHypersurface& s, const HomogeneousDensity& d, const SolidCone& c,
         double tol_stationary) { return stability_report(s, d, c, tol_stationary); },
      py::arg("surface"), py::arg("density"), py::arg("cone"),
      py::arg("tol_stationary") = -1.0);

  m.def(
      "spectrum",
      [](const DiscreteHypersurface& s, const HomogeneousDensity& d, const SolidCone& c,
         const std::string& mode, int count) {
        WeightedOperators ops = assemble(s, d, c);
        return spectrum_eigenvalues(ops, parse_mode(mode), count);
      },
      py::arg("surface"), py::arg("density"), py::arg("cone"), py::arg("mode") = "mean_zero",
      py::arg("count") = 8, "lowest eigenvalues of the weighted Jacobi pencil");

  m.def(
      "laplace_spectrum",
      [](const DiscreteHypersurface& s, const HomogeneousDensity& d, const SolidCone& c,
         int count) {
        WeightedOperators ops = assemble(s, d, c);
        return laplace_eigenvalues(ops, count);
      },
      py::arg("surface"), py::arg("density"), py::arg("cone"), py::arg("count") = 8,
      "lowest eigenvalues of the weighted Laplacian (no potential)");

  py::class_<VariationDiagnostics>(m, "VariationDiagnostics")
      .def_readonly("dt", &VariationDiagnostics::dt)
      .def_readonly("area_first", &VariationDiagnostics::area_first)
      .def_readonly("volume_first", &VariationDiagnostics::volume_first)
      .def_readonly("area_first_expected", &VariationDiagnostics::area_first_expected)
      .def_readonly("volume_first_expected", &VariationDiagnostics::volume_first_expected)
      .def_readonly("second_combined", &VariationDiagnostics::second_combined)
      .def_readonly("index_form_value", &VariationDiagnostics::index_form_value)
      .def_readonly("Hf_rate", &VariationDiagnostics::Hf_rate)
      .def_readonly("Hf_rate_expected", &VariationDiagnostics::Hf_rate_expected)
      .def_readonly("richardson_error", &VariationDiagnostics::richardson_error)
      .def_readonly("richardson_ok", &VariationDiagnostics::richardson_ok)
      .def_readonly("critical_degree", &VariationDiagnostics::critical_degree);

  m.def(
      "run_variation",
      [](const DiscreteHypersurface& s, const HomogeneousDensity& d, const SolidCone& c,
         const std::string& kind, const std::vector<double>& u, double dt) {
        Variation var;
        var.kind = parse_kind(kind);
        var.u = u;
        return run_variation(s, d, c, var, dt);
      },
      py::arg("surface"), py::arg("density"), py::arg("cone"), py::arg("kind") = "dilation",
      py::arg("u") = std::vector<double>{}, py::arg("dt") = 0.0);

  py::class_<RescaledParallelReport>(m, "RescaledParallelReport")
      .def_readonly("dt", &RescaledParallelReport::dt)
      .def_readonly("volume_drift", &RescaledParallelReport::volume_drift)
      .def_readonly("velocity_error", &RescaledParallelReport::velocity_error)
      .def_readonly("s_prime", &RescaledParallelReport::s_prime)
      .def_readonly("s_prime_expected", &RescaledParallelReport::s_prime_expected)
      .def_readonly("stationary", &RescaledParallelReport::stationary);

  m.def("rescaled_parallel", &rescaled_parallel, py::arg("surface"), py::arg("density"),
        py::arg("cone"), py::arg("dt") = 0.0);

  py::class_<UmbilicityReport>(m, "UmbilicityReport")
      .def_readonly("gap", &UmbilicityReport::gap)
      .def_readonly("lower_bound", &UmbilicityReport::lower_bound)
      .def_readonly("min_gap", &UmbilicityReport::min_gap)
      .def_readonly("max_gap", &UmbilicityReport::max_gap)
      .def_readonly("max_bound_violation", &UmbilicityReport::max_bound_violation);

  m.def("umbilicity_gap", &umbilicity_gap, py::arg("surface"), py::arg("density"),
        py::arg("cone"));

  py::class_<CutoffDecay>(m, "CutoffDecay")
      .def_readonly("eps", &CutoffDecay::eps)
      .def_readonly("energy", &CutoffDecay::energy)
      .def_readonly("slope", &CutoffDecay::slope)
      .def_readonly("expected", &CutoffDecay::expected)
      .def_readonly("monotone", &CutoffDecay::monotone);

  m.def("cutoff_energy_decay", &cutoff_energy_decay, py::arg("surface"), py::arg("density"),
        py::arg("cone"), py::arg("eps_list"));

  m.def("canonical_config",
        [](const std::string& text) { return serialize_scenario(parse_scenario(text)); },
        py::arg("config_json"), "parse a scenario config and return its canonical form");

  m.def(
      "run_config",
      [](const std::string& text, const std::string& subcommand) {
        Scenario s = parse_scenario(text);
        RunOptions opt;
        opt.subcommand = subcommand;
        RunResult r = run_scenario(s, opt);
        return py::make_tuple(r.all_passed, r.report_json, r.artifacts);
      },
      py::arg("config_json"), py::arg("subcommand") = "verify",
      "run a scenario in memory; returns (all_passed, report_json, artifacts)");
}
