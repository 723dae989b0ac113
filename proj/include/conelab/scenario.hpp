#pragma once

#include <cstdint>

#include "conelab/oracles.hpp"
#include "conelab/stability.hpp"

// Scenario configs: a JSON document describing one cone + density + surface
// and a list of analyses to run on it. Parsing is strict (unknown keys are
// rejected, arity and ranges checked); serialization is canonical so that
// serialize(parse(text)) is a fixed point and configs hash stably.
namespace conelab {

inline constexpr const char* kToolName = "conelab";
inline constexpr const char* kToolVersion = "0.1.0";

struct ConeSpec {
  std::string type;  // full_sphere | half_space | circular | planar_sector
  Vec inner_normal;  // half_space
  Vec axis;          // circular
  double half_aperture = 0.0;
  double angle = 0.0;  // planar_sector
  double start_angle = 0.0;
};

struct DensitySpec {
  std::string family;  // radial | monomial | linear_power | perturbed_radial | expression
  double k = 0.0;
  double constant = 1.0;          // radial
  std::vector<double> exponents;  // monomial (k is then their sum)
  Vec form;                       // linear_power: f = <form,p>^k
  Vec direction;                  // perturbed_radial
  double amplitude = 0.0;
  std::string source;  // expression profile eta(theta) resp. eta(theta, phi)
};

struct SurfaceSpec {
  std::string type;  // cap | sphere_through_origin | graph | ellipsoid | import
  double radius = 1.0;
  Vec center;                     // sphere_through_origin
  double puncture_radius = -1.0;  // < 0: default puncture
  std::string rho;                // graph: expression in chart parameters u,v
  Vec semiaxes;                   // ellipsoid
  std::string path;               // import: .obj (3d) or .csv polyline (2d)
  int resolution = 48;
  std::string backend = "parametric";  // parametric | fem
};

struct AnalysisSpec {
  std::string type;  // geometry | minkowski | certify_cd | spectrum | variation
                     // | cutoff_decay | sweep
  std::string mode = "both";    // spectrum: all | mean_zero | both
  std::string kind = "normal";  // variation: normal | dilation | parallel
  double dt = 0.0;              // variation step; 0 = automatic
  std::vector<double> eps;      // cutoff_decay radii (empty = default ladder)
  std::string parameter;        // sweep: k | radius | dilation
  std::vector<double> values;   // sweep values (or range + count)
  std::string sub = "minkowski";  // sweep: minkowski | spectrum
};

struct Scenario {
  int ambient_dim = 2;
  ConeSpec cone;
  DensitySpec density;
  SurfaceSpec surface;
  std::vector<AnalysisSpec> analyses;
  double tol_verdict = 1e-8;
  double tol_stationary = -1.0;  // < 0: backend default
  std::string report_path = "report.json";
  std::string csv_path = "sweep.csv";
  std::uint64_t seed = 1;
};

// Throws ParseError with line/column on malformed JSON and on schema
// violations (unknown keys, wrong types, bad enum values, missing fields).
Scenario parse_scenario(const std::string& json_text);
Scenario load_scenario(const std::string& path);

// Canonical serialization: fixed key order, all effective values explicit.
std::string serialize_scenario(const Scenario& s);

// FNV-1a 64-bit over the canonical serialization, as 16 hex digits.
std::string scenario_hash(const Scenario& s);

SolidCone build_cone(const Scenario& s);
HomogeneousDensity build_density(const Scenario& s);
DiscreteHypersurface build_surface(const Scenario& s, const SolidCone& cone);

struct RunOptions {
  std::string subcommand = "verify";  // verify | spectrum | sweep | certify | variation
  std::string out_dir;                // when set, artifacts land here
  int grid = 0;                       // > 0 overrides surface.resolution
  std::string backend;                // nonempty overrides surface.backend
  double tol = 0.0;                   // > 0 overrides tol_verdict
};

struct RunResult {
  bool all_passed = true;
  std::string report_json;  // the full report document
  std::string report_path;  // resolved destination
  // CSV artifacts (spectra, sweeps): resolved path -> file contents.
  std::vector<std::pair<std::string, std::string>> artifacts;
};

// Runs the analyses selected by the subcommand. A failed verdict or a
// numerical error in one analysis never aborts the remaining ones; errors are
// recorded in the report. Throws only for config-level problems (no analysis
// matches the subcommand, unbuildable cone/density/surface).
RunResult run_scenario(const Scenario& s, const RunOptions& opt);

// Write-to-temp-then-rename, so concurrent readers never see partial files.
void write_atomic(const std::string& path, const std::string& contents);

}  // namespace conelab
