#include "conelab/scenario.hpp"

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <algorithm>
#include <cstring>
#include <ctime>
#include <limits>
#include <map>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "conelab/expression.hpp"
#include "json.hpp"

namespace conelab {
namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

// --- logging (CONELAB_LOG = info | debug) -----------------------------------

int log_level() {
  static int level = [] {
    const char* e = std::getenv("CONELAB_LOG");
    if (!e) return 0;
    if (std::strcmp(e, "debug") == 0) return 2;
    if (std::strcmp(e, "info") == 0) return 1;
    return 0;
  }();
  return level;
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) std::fprintf(stderr, "[conelab] %s\n", msg.c_str());
}

// --- strict schema helpers ---------------------------------------------------

[[noreturn]] void schema_fail(const std::string& where, const std::string& msg) {
  fail(ErrorKind::ParseError, "config: " + where + ": " + msg);
}

void check_keys(const ojson& o, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!o.is_object()) schema_fail(where, "expected an object");
  for (const auto& item : o.items()) {
    bool ok = false;
    for (const char* k : allowed)
      if (item.key() == k) {
        ok = true;
        break;
      }
    if (!ok) schema_fail(where, "unknown key '" + item.key() + "'");
  }
}

const ojson& need(const ojson& o, const std::string& where, const char* key) {
  auto it = o.find(key);
  if (it == o.end()) schema_fail(where, std::string("missing required key '") + key + "'");
  return *it;
}

double as_num(const ojson& v, const std::string& where) {
  if (!v.is_number()) schema_fail(where, "expected a number");
  return v.get<double>();
}

int as_int(const ojson& v, const std::string& where) {
  if (!v.is_number_integer()) schema_fail(where, "expected an integer");
  return v.get<int>();
}

std::string as_str(const ojson& v, const std::string& where) {
  if (!v.is_string()) schema_fail(where, "expected a string");
  return v.get<std::string>();
}

Vec as_vec(const ojson& v, const std::string& where, int dim) {
  if (!v.is_array() || static_cast<int>(v.size()) != dim)
    schema_fail(where, "expected an array of " + std::to_string(dim) + " numbers");
  Vec out = Vec::Zero(dim);
  for (int i = 0; i < dim; ++i) out(i) = as_num(v[i], where);
  return out;
}

std::vector<double> as_num_list(const ojson& v, const std::string& where) {
  if (!v.is_array()) schema_fail(where, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v) out.push_back(as_num(x, where));
  return out;
}

double opt_num(const ojson& o, const std::string& where, const char* key, double dflt) {
  auto it = o.find(key);
  return it == o.end() ? dflt : as_num(*it, where + "." + key);
}

int opt_int(const ojson& o, const std::string& where, const char* key, int dflt) {
  auto it = o.find(key);
  return it == o.end() ? dflt : as_int(*it, where + "." + key);
}

std::string opt_str(const ojson& o, const std::string& where, const char* key,
                    const std::string& dflt) {
  auto it = o.find(key);
  return it == o.end() ? dflt : as_str(*it, where + "." + key);
}

ojson vec_json(const Vec& v) {
  ojson a = ojson::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

ojson list_json(const std::vector<double>& v) {
  ojson a = ojson::array();
  for (double x : v) a.push_back(x);
  return a;
}

// --- piecewise parsing -------------------------------------------------------

ConeSpec parse_cone(const ojson& o, int dim) {
  ConeSpec c;
  c.type = as_str(need(o, "cone", "type"), "cone.type");
  if (c.type == "full_sphere") {
    check_keys(o, "cone", {"type"});
  } else if (c.type == "half_space") {
    check_keys(o, "cone", {"type", "inner_normal"});
    c.inner_normal = as_vec(need(o, "cone", "inner_normal"), "cone.inner_normal", dim);
    if (!(c.inner_normal.norm() > 0)) schema_fail("cone.inner_normal", "must be nonzero");
  } else if (c.type == "circular") {
    check_keys(o, "cone", {"type", "axis", "half_aperture"});
    if (dim != 3) schema_fail("cone", "circular cones need ambient_dim = 3");
    c.axis = as_vec(need(o, "cone", "axis"), "cone.axis", dim);
    if (!(c.axis.norm() > 0)) schema_fail("cone.axis", "must be nonzero");
    c.half_aperture = as_num(need(o, "cone", "half_aperture"), "cone.half_aperture");
    if (!(c.half_aperture > 0.0) || c.half_aperture > M_PI / 2)
      schema_fail("cone.half_aperture", "must lie in (0, pi/2]");
  } else if (c.type == "planar_sector") {
    check_keys(o, "cone", {"type", "angle", "start_angle"});
    if (dim != 2) schema_fail("cone", "planar sectors need ambient_dim = 2");
    c.angle = as_num(need(o, "cone", "angle"), "cone.angle");
    if (!(c.angle > 0.0) || !(c.angle < 2.0 * M_PI))
      schema_fail("cone.angle", "must lie in (0, 2*pi)");
    c.start_angle = opt_num(o, "cone", "start_angle", -0.5 * c.angle);
  } else {
    schema_fail("cone.type", "unknown cone type '" + c.type + "'");
  }
  return c;
}

DensitySpec parse_density(const ojson& o, int dim) {
  DensitySpec d;
  d.family = as_str(need(o, "density", "family"), "density.family");
  if (d.family == "radial") {
    check_keys(o, "density", {"family", "k", "constant"});
    d.k = as_num(need(o, "density", "k"), "density.k");
    d.constant = opt_num(o, "density", "constant", 1.0);
    if (!(d.constant > 0.0)) schema_fail("density.constant", "must be positive");
  } else if (d.family == "monomial") {
    check_keys(o, "density", {"family", "k", "exponents"});
    d.exponents = as_num_list(need(o, "density", "exponents"), "density.exponents");
    if (static_cast<int>(d.exponents.size()) != dim)
      schema_fail("density.exponents", "expected " + std::to_string(dim) + " exponents");
    double sum = 0.0;
    for (double a : d.exponents) sum += a;
    d.k = opt_num(o, "density", "k", sum);
    if (std::abs(d.k - sum) > 1e-12)
      schema_fail("density.k", "monomial degree is the exponent sum " + std::to_string(sum));
  } else if (d.family == "linear_power") {
    check_keys(o, "density", {"family", "k", "form"});
    d.k = as_num(need(o, "density", "k"), "density.k");
    d.form = as_vec(need(o, "density", "form"), "density.form", dim);
    if (!(d.form.norm() > 0)) schema_fail("density.form", "must be nonzero");
  } else if (d.family == "perturbed_radial") {
    check_keys(o, "density", {"family", "k", "direction", "amplitude"});
    d.k = as_num(need(o, "density", "k"), "density.k");
    d.direction = as_vec(need(o, "density", "direction"), "density.direction", dim);
    if (!(d.direction.norm() > 0)) schema_fail("density.direction", "must be nonzero");
    d.amplitude = as_num(need(o, "density", "amplitude"), "density.amplitude");
    if (!(std::abs(d.amplitude) < 1.0))
      schema_fail("density.amplitude", "must lie in (-1, 1) to keep the profile positive");
  } else if (d.family == "expression") {
    check_keys(o, "density", {"family", "k", "source"});
    d.k = as_num(need(o, "density", "k"), "density.k");
    d.source = as_str(need(o, "density", "source"), "density.source");
    // Surface any expression syntax error now, offset included.
    DensityProfile::expression(d.source, dim);
  } else {
    schema_fail("density.family", "unknown density family '" + d.family + "'");
  }
  return d;
}

void check_backend_compat(const std::string& type, const std::string& backend,
                          const std::string& where) {
  if (backend != "parametric" && backend != "fem")
    schema_fail(where, "backend must be 'parametric' or 'fem'");
  if (backend == "fem" && type != "cap" && type != "ellipsoid" && type != "import")
    schema_fail(where, "backend 'fem' is only available for cap, ellipsoid, import");
  if (backend == "parametric" && type == "import")
    schema_fail(where, "imported surfaces are simplicial; backend must be 'fem'");
}

SurfaceSpec parse_surface(const ojson& o, int dim) {
  SurfaceSpec f;
  f.type = as_str(need(o, "surface", "type"), "surface.type");
  std::string default_backend = f.type == "import" ? "fem" : "parametric";
  if (f.type == "cap") {
    check_keys(o, "surface", {"type", "radius", "resolution", "backend"});
    f.radius = opt_num(o, "surface", "radius", 1.0);
    if (!(f.radius > 0.0)) schema_fail("surface.radius", "must be positive");
  } else if (f.type == "sphere_through_origin") {
    check_keys(o, "surface", {"type", "center", "puncture_radius", "resolution", "backend"});
    f.center = as_vec(need(o, "surface", "center"), "surface.center", dim);
    if (!(f.center.norm() > 0)) schema_fail("surface.center", "must be nonzero");
    f.puncture_radius = opt_num(o, "surface", "puncture_radius", -1.0);
  } else if (f.type == "graph") {
    check_keys(o, "surface", {"type", "rho", "resolution", "backend"});
    f.rho = as_str(need(o, "surface", "rho"), "surface.rho");
    Expression::parse(f.rho, {"u", "v"});  // surface syntax errors now
  } else if (f.type == "ellipsoid") {
    check_keys(o, "surface", {"type", "semiaxes", "resolution", "backend"});
    f.semiaxes = as_vec(need(o, "surface", "semiaxes"), "surface.semiaxes", dim);
    for (int i = 0; i < dim; ++i)
      if (!(f.semiaxes(i) > 0.0)) schema_fail("surface.semiaxes", "must all be positive");
  } else if (f.type == "import") {
    check_keys(o, "surface", {"type", "path", "resolution", "backend"});
    f.path = as_str(need(o, "surface", "path"), "surface.path");
  } else {
    schema_fail("surface.type", "unknown surface type '" + f.type + "'");
  }
  f.resolution = opt_int(o, "surface", "resolution", 48);
  if (f.resolution < 4) schema_fail("surface.resolution", "must be at least 4");
  f.backend = opt_str(o, "surface", "backend", default_backend);
  check_backend_compat(f.type, f.backend, "surface.backend");
  return f;
}

AnalysisSpec parse_analysis(const ojson& o, int idx) {
  std::string where = "analyses[" + std::to_string(idx) + "]";
  AnalysisSpec a;
  a.type = as_str(need(o, where, "type"), where + ".type");
  if (a.type == "geometry" || a.type == "minkowski" || a.type == "certify_cd") {
    check_keys(o, where, {"type"});
  } else if (a.type == "spectrum") {
    check_keys(o, where, {"type", "mode"});
    a.mode = opt_str(o, where, "mode", "both");
    if (a.mode != "all" && a.mode != "mean_zero" && a.mode != "both")
      schema_fail(where + ".mode", "must be 'all', 'mean_zero' or 'both'");
  } else if (a.type == "variation") {
    check_keys(o, where, {"type", "kind", "dt"});
    a.kind = opt_str(o, where, "kind", "normal");
    if (a.kind != "normal" && a.kind != "dilation" && a.kind != "parallel")
      schema_fail(where + ".kind", "must be 'normal', 'dilation' or 'parallel'");
    a.dt = opt_num(o, where, "dt", 0.0);
    if (a.dt < 0.0) schema_fail(where + ".dt", "must be nonnegative (0 = automatic)");
  } else if (a.type == "cutoff_decay") {
    check_keys(o, where, {"type", "eps"});
    if (o.contains("eps")) {
      a.eps = as_num_list(o["eps"], where + ".eps");
      if (a.eps.size() < 2) schema_fail(where + ".eps", "need at least two radii");
      for (std::size_t i = 0; i < a.eps.size(); ++i) {
        if (!(a.eps[i] > 0.0)) schema_fail(where + ".eps", "radii must be positive");
        if (i > 0 && !(a.eps[i] < a.eps[i - 1]))
          schema_fail(where + ".eps", "radii must be strictly decreasing");
      }
    }
  } else if (a.type == "sweep") {
    check_keys(o, where, {"type", "parameter", "values", "range", "count", "sub"});
    a.parameter = as_str(need(o, where, "parameter"), where + ".parameter");
    if (a.parameter != "k" && a.parameter != "radius" && a.parameter != "dilation")
      schema_fail(where + ".parameter", "must be 'k', 'radius' or 'dilation'");
    bool has_values = o.contains("values");
    bool has_range = o.contains("range") || o.contains("count");
    if (has_values == has_range)
      schema_fail(where, "give either 'values' or 'range' + 'count'");
    if (has_values) {
      a.values = as_num_list(o["values"], where + ".values");
    } else {
      std::vector<double> range = as_num_list(need(o, where, "range"), where + ".range");
      if (range.size() != 2 || !(range[1] > range[0]))
        schema_fail(where + ".range", "expected [lo, hi] with lo < hi");
      int count = as_int(need(o, where, "count"), where + ".count");
      if (count < 2) schema_fail(where + ".count", "must be at least 2");
      a.values.resize(count);
      for (int i = 0; i < count; ++i)
        a.values[i] = range[0] + (range[1] - range[0]) * i / (count - 1);
    }
    if (a.values.empty()) schema_fail(where + ".values", "must be nonempty");
    a.sub = opt_str(o, where, "sub", "minkowski");
    if (a.sub != "minkowski" && a.sub != "spectrum")
      schema_fail(where + ".sub", "must be 'minkowski' or 'spectrum'");
  } else {
    schema_fail(where + ".type", "unknown analysis type '" + a.type + "'");
  }
  return a;
}

}  // namespace

Scenario parse_scenario(const std::string& json_text) {
  ojson doc;
  try {
    doc = ojson::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t byte = e.byte;
    int line = 1, column = 1;
    for (std::size_t i = 0; i + 1 < byte && i < json_text.size(); ++i) {
      if (json_text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    fail(ErrorKind::ParseError, "config parse error at line " + std::to_string(line) +
                                    ", column " + std::to_string(column) + ": " + e.what());
  }

  check_keys(doc, "scenario",
             {"ambient_dim", "cone", "density", "surface", "analyses", "tolerances", "output",
              "seed"});

  Scenario s;
  s.ambient_dim = as_int(need(doc, "scenario", "ambient_dim"), "ambient_dim");
  if (s.ambient_dim != 2 && s.ambient_dim != 3)
    schema_fail("ambient_dim", "must be 2 or 3");

  s.cone = parse_cone(need(doc, "scenario", "cone"), s.ambient_dim);
  s.density = parse_density(need(doc, "scenario", "density"), s.ambient_dim);
  s.surface = parse_surface(need(doc, "scenario", "surface"), s.ambient_dim);

  const ojson& alist = need(doc, "scenario", "analyses");
  if (!alist.is_array() || alist.empty())
    schema_fail("analyses", "expected a nonempty array");
  for (std::size_t i = 0; i < alist.size(); ++i)
    s.analyses.push_back(parse_analysis(alist[i], static_cast<int>(i)));

  if (doc.contains("tolerances")) {
    const ojson& t = doc["tolerances"];
    check_keys(t, "tolerances", {"verdict", "stationary"});
    s.tol_verdict = opt_num(t, "tolerances", "verdict", 1e-8);
    if (!(s.tol_verdict > 0.0)) schema_fail("tolerances.verdict", "must be positive");
    s.tol_stationary = opt_num(t, "tolerances", "stationary", -1.0);
  }
  if (doc.contains("output")) {
    const ojson& out = doc["output"];
    check_keys(out, "output", {"report", "csv"});
    s.report_path = opt_str(out, "output", "report", "report.json");
    s.csv_path = opt_str(out, "output", "csv", "sweep.csv");
    if (s.report_path.empty() || s.csv_path.empty())
      schema_fail("output", "paths must be nonempty");
  }
  if (doc.contains("seed")) {
    const ojson& sd = doc["seed"];
    if (!sd.is_number_integer() || sd.get<std::int64_t>() < 0)
      schema_fail("seed", "expected a nonnegative integer");
    s.seed = sd.get<std::uint64_t>();
  }
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string serialize_scenario(const Scenario& s) {
  ojson root;
  root["ambient_dim"] = s.ambient_dim;

  ojson cone;
  cone["type"] = s.cone.type;
  if (s.cone.type == "half_space") cone["inner_normal"] = vec_json(s.cone.inner_normal);
  if (s.cone.type == "circular") {
    cone["axis"] = vec_json(s.cone.axis);
    cone["half_aperture"] = s.cone.half_aperture;
  }
  if (s.cone.type == "planar_sector") {
    cone["angle"] = s.cone.angle;
    cone["start_angle"] = s.cone.start_angle;
  }
  root["cone"] = cone;

  ojson dens;
  dens["family"] = s.density.family;
  dens["k"] = s.density.k;
  if (s.density.family == "radial") dens["constant"] = s.density.constant;
  if (s.density.family == "monomial") dens["exponents"] = list_json(s.density.exponents);
  if (s.density.family == "linear_power") dens["form"] = vec_json(s.density.form);
  if (s.density.family == "perturbed_radial") {
    dens["direction"] = vec_json(s.density.direction);
    dens["amplitude"] = s.density.amplitude;
  }
  if (s.density.family == "expression") dens["source"] = s.density.source;
  root["density"] = dens;

  ojson surf;
  surf["type"] = s.surface.type;
  if (s.surface.type == "cap") surf["radius"] = s.surface.radius;
  if (s.surface.type == "sphere_through_origin") {
    surf["center"] = vec_json(s.surface.center);
    surf["puncture_radius"] = s.surface.puncture_radius;
  }
  if (s.surface.type == "graph") surf["rho"] = s.surface.rho;
  if (s.surface.type == "ellipsoid") surf["semiaxes"] = vec_json(s.surface.semiaxes);
  if (s.surface.type == "import") surf["path"] = s.surface.path;
  surf["resolution"] = s.surface.resolution;
  surf["backend"] = s.surface.backend;
  root["surface"] = surf;

  ojson alist = ojson::array();
  for (const AnalysisSpec& a : s.analyses) {
    ojson aj;
    aj["type"] = a.type;
    if (a.type == "spectrum") aj["mode"] = a.mode;
    if (a.type == "variation") {
      aj["kind"] = a.kind;
      aj["dt"] = a.dt;
    }
    if (a.type == "cutoff_decay" && !a.eps.empty()) aj["eps"] = list_json(a.eps);
    if (a.type == "sweep") {
      aj["parameter"] = a.parameter;
      aj["values"] = list_json(a.values);
      aj["sub"] = a.sub;
    }
    alist.push_back(aj);
  }
  root["analyses"] = alist;

  ojson tol;
  tol["verdict"] = s.tol_verdict;
  tol["stationary"] = s.tol_stationary;
  root["tolerances"] = tol;

  ojson out;
  out["report"] = s.report_path;
  out["csv"] = s.csv_path;
  root["output"] = out;

  root["seed"] = s.seed;
  return root.dump(2) + "\n";
}

std::string scenario_hash(const Scenario& s) {
  std::string text = serialize_scenario(s);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

SolidCone build_cone(const Scenario& s) {
  const ConeSpec& c = s.cone;
  if (c.type == "full_sphere") return SolidCone::full_sphere(s.ambient_dim);
  if (c.type == "half_space") return SolidCone::half_space(c.inner_normal);
  if (c.type == "circular") return SolidCone::circular(c.axis, c.half_aperture);
  return SolidCone::planar_sector(c.angle, c.start_angle);
}

HomogeneousDensity build_density(const Scenario& s) {
  const DensitySpec& d = s.density;
  DensityProfile profile = DensityProfile::radial();
  if (d.family == "radial") {
    profile = DensityProfile::radial(d.constant);
  } else if (d.family == "monomial") {
    profile = DensityProfile::monomial(d.exponents);
  } else if (d.family == "linear_power") {
    profile = DensityProfile::linear_power(d.form, d.k);
  } else if (d.family == "perturbed_radial") {
    profile = DensityProfile::perturbed_radial(d.direction, d.amplitude);
  } else {
    profile = DensityProfile::expression(d.source, s.ambient_dim);
  }
  return HomogeneousDensity(d.k, profile);
}

DiscreteHypersurface build_surface(const Scenario& s, const SolidCone& cone) {
  const SurfaceSpec& f = s.surface;
  check_backend_compat(f.type, f.backend, "surface.backend");
  bool fem = f.backend == "fem";
  if (f.type == "cap")
    return fem ? mesh_cap(cone, f.radius, f.resolution) : make_cap(cone, f.radius, f.resolution);
  if (f.type == "sphere_through_origin")
    return make_sphere_through_origin(f.center, f.resolution, f.puncture_radius);
  if (f.type == "graph") {
    Expression rho = Expression::parse(f.rho, {"u", "v"});
    return make_radial_graph(
        cone, [rho](double u, double v) { return rho.eval({u, v}); }, f.resolution);
  }
  if (f.type == "ellipsoid")
    return fem ? mesh_ellipsoid(f.semiaxes, f.resolution) : make_ellipsoid(f.semiaxes, f.resolution);
  if (f.path.size() >= 4 && f.path.substr(f.path.size() - 4) == ".obj")
    return import_obj(f.path);
  return import_polyline_csv(f.path);
}

void write_atomic(const std::string& path, const std::string& contents) {
  fs::path p(path);
  std::error_code ec;
  if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
  fs::path tmp = p;
  tmp += ".tmp." + std::to_string(static_cast<long>(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::IoError, "cannot open '" + tmp.string() + "' for writing");
    out << contents;
    out.flush();
    if (!out) {
      fs::remove(tmp, ec);
      fail(ErrorKind::IoError, "write failed for '" + tmp.string() + "'");
    }
  }
  fs::rename(tmp, p, ec);
  if (ec) {
    std::error_code ec2;
    fs::remove(tmp, ec2);
    fail(ErrorKind::IoError, "cannot rename '" + tmp.string() + "' to '" + path + "'");
  }
}

// --- analysis runners --------------------------------------------------------

namespace {

std::string fmt17(double x) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string timestamp_utc() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ojson prov_json(const oracle::OracleResult& r) {
  ojson o;
  o["name"] = r.name;
  o["method"] = oracle::method_name(r.method);
  o["detail"] = r.detail;
  ojson vals = ojson::object();
  for (const auto& [key, value] : r.values) vals[key] = value;
  o["values"] = vals;
  return o;
}

// Seeded low-frequency normal speed with weighted mean zero.
ScalarField random_normal_speed(const GeometryCache& g, std::uint64_t seed) {
  Rng rng(seed);
  const int ns = static_cast<int>(g.position.size());
  const int dim = g.ambient_dim;
  ScalarField u(ns, 0.0);
  for (int w = 0; w < 3; ++w) {
    Vec dir = Vec::Zero(dim);
    for (int j = 0; j < dim; ++j) dir(j) = rng.uniform(-1.0, 1.0);
    if (dir.norm() < 1e-3) dir(0) = 1.0;
    dir.normalize();
    double freq = rng.uniform(0.5, 2.0);
    double phase = rng.uniform(0.0, 2.0 * M_PI);
    double amp = rng.uniform(0.3, 1.0);
    for (int i = 0; i < ns; ++i) u[i] += amp * std::cos(freq * dir.dot(g.position[i]) + phase);
  }
  KahanSum num, den;
  for (int i = 0; i < ns; ++i) {
    if (g.degenerate[i] || !(g.f[i] > 0)) continue;
    double w = g.da_weight[i] * g.f[i];
    num.add(w * u[i]);
    den.add(w);
  }
  if (den.value() > 0) {
    double mean = num.value() / den.value();
    for (double& x : u) x -= mean;
  }
  return u;
}

struct RunContext {
  const Scenario* s = nullptr;
  const SolidCone* cone = nullptr;
  const HomogeneousDensity* density = nullptr;
  const DiscreteHypersurface* surface = nullptr;
  std::string out_dir;  // from RunOptions
  std::vector<ojson>* provenance = nullptr;
  RunResult* result = nullptr;
};

std::string artifact_path(const RunContext& ctx, const std::string& name) {
  fs::path base = ctx.out_dir.empty() ? fs::path(ctx.s->csv_path).parent_path()
                                      : fs::path(ctx.out_dir);
  return (base / name).string();
}

// Reference integrals are available for unit radial densities over caps; the
// records double as the report's provenance trail.
void add_cap_provenance(const RunContext& ctx, double checked_area, bool with_spectrum) {
  const Scenario& s = *ctx.s;
  if (s.surface.type != "cap" || s.density.family != "radial" || s.density.constant != 1.0)
    return;
  auto already = [&](const std::string& name) {
    for (const ojson& p : *ctx.provenance)
      if (p.at("name") == name) return true;
    return false;
  };
  int n = s.ambient_dim - 1;
  try {
    auto ri = oracle::radial_integrals(n, s.density.k, s.surface.radius, *ctx.cone);
    if (!already(ri.record.name)) {
      ojson o = prov_json(ri.record);
      o["checked_area"] = checked_area;
      o["area_relative_error"] =
          std::abs(checked_area - ri.circle_area) / (1.0 + std::abs(ri.circle_area));
      ctx.provenance->push_back(o);
    }
  } catch (const Error&) {
  }
  if (!with_spectrum) return;
  try {
    auto cr = oracle::cap_reference(n, s.density.k, s.surface.radius, *ctx.cone, false);
    if (cr.has_spectrum && !already(cr.record.name)) ctx.provenance->push_back(prov_json(cr.record));
  } catch (const Error&) {
  }
}

bool run_geometry(const RunContext& ctx, ojson& aj) {
  const Scenario& s = *ctx.s;
  GeometryCache g = geometry(*ctx.surface, *ctx.density, *ctx.cone);
  double area = weighted_area(g);
  aj["backend"] = s.surface.backend;
  aj["samples"] = static_cast<int>(g.position.size());
  aj["h"] = g.h_disc;
  aj["area"] = area;
  bool critical = false;
  try {
    aj["volume"] = oriented_volume(g, *ctx.density);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::CriticalDegree) throw;
    critical = true;
    aj["volume"] = nullptr;
  }
  aj["critical_degree"] = critical;
  aj["H_f_mean"] = g.weighted_mean_Hf();
  aj["H_f_std"] = g.weighted_std_Hf();
  double orth = 0.0;
  for (const auto& b : g.boundary)
    orth = std::max(orth, std::abs(b.normal.dot(b.wall_normal)));
  aj["orthogonality_error"] = orth;
  double divres = verify_surface_divergence_theorem(*ctx.surface, g, position_field());
  aj["divergence_residual"] = divres;
  double tol = std::max(s.tol_verdict, default_stationarity_tol(g));
  aj["tolerance"] = tol;
  add_cap_provenance(ctx, area, false);
  return divres <= tol * (1.0 + area);
}

bool run_minkowski(const RunContext& ctx, ojson& aj) {
  const Scenario& s = *ctx.s;
  GeometryCache g = geometry(*ctx.surface, *ctx.density, *ctx.cone);
  double stat_tol = s.tol_stationary > 0 ? s.tol_stationary : default_stationarity_tol(g);
  MinkowskiReport m = minkowski(g, *ctx.density, stat_tol);
  aj["area"] = m.area;
  aj["oriented_volume"] = m.oriented_volume;
  aj["H_f_mean"] = m.Hf_mean;
  aj["H_f_std"] = m.Hf_std;
  aj["residual_integral"] = m.residual_integral;
  aj["relative_residual"] = m.relative_residual;
  aj["identity_gap"] = m.identity_gap;
  aj["relative_gap"] = m.relative_gap;
  aj["stationary"] = m.stationary;
  aj["critical_degree"] = m.critical_degree;
  aj["forced_zero_Hf"] = m.forced_zero_Hf;
  double tol = std::max(s.tol_verdict, default_stationarity_tol(g));
  aj["tolerance"] = tol;
  add_cap_provenance(ctx, m.area, false);
  bool pass = m.relative_residual <= tol;
  if (!m.critical_degree) pass = pass && m.relative_gap <= tol;
  return pass;
}

bool run_certify(const RunContext& ctx, ojson& aj) {
  SampleSpec spec;
  CurvatureReport c = ctx.density->certify_cd(*ctx.cone, spec);
  aj["cd_certified"] = c.cd_certified;
  aj["min_ric_f_k"] = c.min_ric_f_k;
  aj["min_ric_f"] = c.min_ric_f;
  aj["profile_test_certified"] = c.profile_test_certified;
  aj["methods_agree"] = c.methods_agree;
  ojson w;
  w["point"] = vec_json(c.witness.point);
  w["direction"] = vec_json(c.witness.direction);
  w["value"] = c.witness.value;
  aj["witness"] = w;
  return c.methods_agree;
}

bool run_spectrum(const RunContext& ctx, const AnalysisSpec& a, ojson& aj, int index) {
  const Scenario& s = *ctx.s;
  StabilityReport rep =
      stability_report(*ctx.surface, *ctx.density, *ctx.cone, s.tol_stationary);
  aj["mode"] = a.mode;
  aj["dofs"] = rep.dofs;
  aj["H_f_mean"] = rep.Hf_mean;
  aj["H_f_std"] = rep.Hf_std;
  aj["orthogonality_error"] = rep.orthogonality_error;
  aj["tol_stationary"] = rep.tol_stationary;
  aj["lambda_min_all"] = rep.lambda_min_all;
  aj["lambda_min_meanzero"] = rep.lambda_min_meanzero;
  aj["stationary"] = rep.stationary;
  aj["strongly_stationary"] = rep.strongly_stationary;
  aj["f_stable"] = rep.f_stable;
  aj["strongly_f_stable"] = rep.strongly_f_stable;

  WeightedOperators ops = assemble(*ctx.surface, *ctx.density, *ctx.cone);
  std::string suffix = index > 0 ? "_" + std::to_string(index) : "";
  auto export_mode = [&](SpectrumMode mode, const std::string& tag, const char* key) {
    VecX ev = spectrum_eigenvalues(ops, mode, 16);
    std::ostringstream csv;
    csv << "index,eigenvalue\n";
    for (int i = 0; i < ev.size(); ++i) csv << i << ',' << fmt17(ev(i)) << '\n';
    std::string path = artifact_path(ctx, "spectrum_" + tag + suffix + ".csv");
    ctx.result->artifacts.emplace_back(path, csv.str());
    aj[key] = path;
  };
  if (a.mode != "mean_zero") export_mode(SpectrumMode::All, "all", "eigenvalues_csv_all");
  if (a.mode != "all")
    export_mode(SpectrumMode::MeanZero, "mean_zero", "eigenvalues_csv_mean_zero");
  add_cap_provenance(ctx, weighted_area(ops.cache), true);
  return true;
}

bool run_variation_analysis(const RunContext& ctx, const AnalysisSpec& a, ojson& aj) {
  const Scenario& s = *ctx.s;
  Variation var;
  if (a.kind == "dilation") var.kind = Variation::Kind::Dilation;
  if (a.kind == "parallel") var.kind = Variation::Kind::Parallel;
  if (a.kind == "normal") {
    GeometryCache g = geometry(*ctx.surface, *ctx.density, *ctx.cone);
    var.u = random_normal_speed(g, s.seed);
  }
  VariationDiagnostics d = run_variation(*ctx.surface, *ctx.density, *ctx.cone, var, a.dt);
  aj["kind"] = a.kind;
  aj["dt"] = d.dt;
  aj["area_first"] = d.area_first;
  aj["area_first_expected"] = d.area_first_expected;
  aj["volume_first"] = d.volume_first;
  aj["volume_first_expected"] = d.volume_first_expected;
  aj["second_combined"] = d.second_combined;
  aj["index_form_value"] = d.index_form_value;
  aj["Hf_rate"] = d.Hf_rate;
  aj["Hf_rate_expected"] = d.Hf_rate_expected;
  aj["richardson_error"] = d.richardson_error;
  aj["richardson_ok"] = d.richardson_ok;
  aj["critical_degree"] = d.critical_degree;

  double vt = std::max(s.tol_verdict, 1e-6);
  bool pass = d.richardson_ok;
  pass = pass && std::abs(d.area_first - d.area_first_expected) <=
                     vt * (1.0 + std::abs(d.area_first_expected));
  if (!d.critical_degree)
    pass = pass && std::abs(d.volume_first - d.volume_first_expected) <=
                       vt * (1.0 + std::abs(d.volume_first_expected));
  if (a.kind == "dilation")
    pass = pass && std::abs(d.Hf_rate - d.Hf_rate_expected) <=
                       vt * (1.0 + std::abs(d.Hf_rate_expected));

  if (a.kind == "parallel") {
    RescaledParallelReport rp = rescaled_parallel(*ctx.surface, *ctx.density, *ctx.cone, a.dt);
    ojson rj;
    rj["volume_drift"] = rp.volume_drift;
    rj["velocity_error"] = rp.velocity_error;
    rj["s_prime"] = rp.s_prime;
    rj["s_prime_expected"] = rp.s_prime_expected;
    rj["stationary"] = rp.stationary;
    aj["rescaled"] = rj;
    if (rp.stationary)
      pass = pass && rp.volume_drift <= 1e-8 && rp.velocity_error <= 1e-4;
  }
  return pass;
}

bool run_cutoff(const RunContext& ctx, const AnalysisSpec& a, ojson& aj) {
  std::vector<double> eps = a.eps.empty() ? std::vector<double>{0.4, 0.2, 0.1, 0.05} : a.eps;
  CutoffDecay cd = cutoff_energy_decay(*ctx.surface, *ctx.density, *ctx.cone, eps);
  aj["eps"] = list_json(cd.eps);
  aj["energy"] = list_json(cd.energy);
  aj["slope"] = cd.slope;
  aj["expected"] = cd.expected;
  aj["monotone"] = cd.monotone;
  return cd.monotone && std::abs(cd.slope - cd.expected) <= 0.1;
}

bool run_sweep(const RunContext& ctx, const AnalysisSpec& a, ojson& aj, int index) {
  const Scenario& s = *ctx.s;
  const bool with_spectrum = a.sub == "spectrum";
  if (a.parameter == "k" && s.density.family == "monomial")
    fail(ErrorKind::InvalidArgument,
         "sweep over k needs a density family with a free degree");
  if (a.parameter == "radius" && s.surface.type != "cap")
    fail(ErrorKind::InvalidArgument, "sweep over radius needs a cap surface");

  std::ostringstream csv;
  csv << "parameter,area,volume,H_f_mean,H_f_std,minkowski_residual,identity_gap";
  if (with_spectrum) csv << ",lambda_min_all,lambda_min_meanzero";
  csv << '\n';

  const double qnan = std::numeric_limits<double>::quiet_NaN();
  int computed = 0;
  for (double v : a.values) {
    double area = qnan, volume = qnan, hf_mean = qnan, hf_std = qnan;
    double residual = qnan, gap = qnan, l_all = qnan, l_mz = qnan;
    try {
      Scenario sv = s;
      if (a.parameter == "k") sv.density.k = v;
      if (a.parameter == "radius") sv.surface.radius = v;
      HomogeneousDensity density = build_density(sv);
      DiscreteHypersurface surface = a.parameter == "dilation"
                                         ? ctx.surface->dilated(v)
                                         : build_surface(sv, *ctx.cone);
      GeometryCache g = geometry(surface, density, *ctx.cone);
      double stat_tol =
          s.tol_stationary > 0 ? s.tol_stationary : default_stationarity_tol(g);
      MinkowskiReport m = minkowski(g, density, stat_tol);
      area = m.area;
      volume = m.oriented_volume;
      hf_mean = m.Hf_mean;
      hf_std = m.Hf_std;
      residual = m.residual_integral;
      gap = m.identity_gap;
      if (with_spectrum) {
        WeightedOperators ops = assemble(surface, density, *ctx.cone);
        l_all = stability_spectrum(ops, SpectrumMode::All).lambda_min;
        l_mz = stability_spectrum(ops, SpectrumMode::MeanZero).lambda_min;
      }
      ++computed;
    } catch (const Error& e) {
      log_info("sweep value " + fmt17(v) + " failed: " + e.what());
    }
    csv << fmt17(v) << ',' << fmt17(area) << ',' << fmt17(volume) << ',' << fmt17(hf_mean)
        << ',' << fmt17(hf_std) << ',' << fmt17(residual) << ',' << fmt17(gap);
    if (with_spectrum) csv << ',' << fmt17(l_all) << ',' << fmt17(l_mz);
    csv << '\n';
  }

  fs::path csv_name(s.csv_path);
  std::string name = csv_name.filename().string();
  if (index > 0) {
    std::string stem = csv_name.stem().string();
    std::string ext = csv_name.extension().string();
    name = stem + "_" + std::to_string(index) + ext;
  }
  std::string path = artifact_path(ctx, name);
  ctx.result->artifacts.emplace_back(path, csv.str());
  aj["parameter"] = a.parameter;
  aj["sub"] = a.sub;
  aj["rows"] = static_cast<int>(a.values.size());
  aj["computed"] = computed;
  aj["csv"] = path;
  return computed > 0;
}

const std::vector<std::string>& subcommand_types(const std::string& sub) {
  static const std::map<std::string, std::vector<std::string>> table = {
      {"verify", {"geometry", "minkowski", "cutoff_decay"}},
      {"spectrum", {"spectrum"}},
      {"sweep", {"sweep"}},
      {"certify", {"certify_cd"}},
      {"variation", {"variation"}},
  };
  auto it = table.find(sub);
  if (it == table.end())
    fail(ErrorKind::InvalidArgument, "unknown subcommand '" + sub + "'");
  return it->second;
}

}  // namespace

RunResult run_scenario(const Scenario& input, const RunOptions& opt) {
  Scenario s = input;
  if (opt.grid > 0) s.surface.resolution = opt.grid;
  if (!opt.backend.empty()) s.surface.backend = opt.backend;
  if (opt.tol > 0) s.tol_verdict = opt.tol;
  check_backend_compat(s.surface.type, s.surface.backend, "surface.backend");

  const std::vector<std::string>& wanted = subcommand_types(opt.subcommand);
  std::vector<AnalysisSpec> selected;
  for (const AnalysisSpec& a : s.analyses)
    if (std::find(wanted.begin(), wanted.end(), a.type) != wanted.end())
      selected.push_back(a);
  if (selected.empty())
    fail(ErrorKind::InvalidArgument,
         "no analyses in the scenario match subcommand '" + opt.subcommand + "'");

  log_info("building " + s.surface.type + " surface at resolution " +
           std::to_string(s.surface.resolution));
  SolidCone cone = build_cone(s);
  HomogeneousDensity density = build_density(s);
  DiscreteHypersurface surface = build_surface(s, cone);

  RunResult rr;
  std::vector<ojson> provenance;
  RunContext ctx;
  ctx.s = &s;
  ctx.cone = &cone;
  ctx.density = &density;
  ctx.surface = &surface;
  ctx.out_dir = opt.out_dir;
  ctx.provenance = &provenance;
  ctx.result = &rr;

  ojson analyses = ojson::array();
  bool all_pass = true;
  int spectrum_index = 0, sweep_index = 0;
  for (const AnalysisSpec& a : selected) {
    ojson aj;
    aj["type"] = a.type;
    bool pass = false;
    try {
      if (a.type == "geometry") pass = run_geometry(ctx, aj);
      else if (a.type == "minkowski") pass = run_minkowski(ctx, aj);
      else if (a.type == "certify_cd") pass = run_certify(ctx, aj);
      else if (a.type == "spectrum") pass = run_spectrum(ctx, a, aj, spectrum_index++);
      else if (a.type == "variation") pass = run_variation_analysis(ctx, a, aj);
      else if (a.type == "cutoff_decay") pass = run_cutoff(ctx, a, aj);
      else if (a.type == "sweep") pass = run_sweep(ctx, a, aj, sweep_index++);
    } catch (const Error& e) {
      aj["error"] = e.what();
      pass = false;
    } catch (const std::exception& e) {
      aj["error"] = e.what();
      pass = false;
    }
    aj["verdict"] = pass;
    log_info("analysis " + a.type + (pass ? " passed" : " failed"));
    all_pass = all_pass && pass;
    analyses.push_back(aj);
  }

  ojson rep;
  ojson tool;
  tool["name"] = kToolName;
  tool["version"] = kToolVersion;
  rep["tool"] = tool;
  rep["timestamp"] = timestamp_utc();
  rep["subcommand"] = opt.subcommand;
  rep["config_hash"] = scenario_hash(s);
  rep["scenario"] = ojson::parse(serialize_scenario(s));
  ojson prov = ojson::array();
  for (const ojson& p : provenance) prov.push_back(p);
  rep["provenance"] = prov;
  rep["analyses"] = analyses;
  rep["verdict"] = all_pass;

  rr.all_passed = all_pass;
  rr.report_json = rep.dump(2) + "\n";
  rr.report_path = opt.out_dir.empty()
                       ? s.report_path
                       : (fs::path(opt.out_dir) / fs::path(s.report_path).filename()).string();
  return rr;
}

}  // namespace conelab
