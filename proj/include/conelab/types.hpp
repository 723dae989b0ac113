#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace conelab {

// Ambient vectors live in R^2 or R^3; fixed-capacity dynamic size keeps them
// on the stack while letting both dimensions share one code path.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 3, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, 3, 3>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

inline Vec make_vec2(double x, double y) {
  Vec v(2);
  v << x, y;
  return v;
}

inline Vec make_vec3(double x, double y, double z) {
  Vec v(3);
  v << x, y, z;
  return v;
}

inline Vec cross3(const Vec& a, const Vec& b) {
  Vec c(3);
  c << a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0];
  return c;
}

// Counterclockwise quarter turn in the plane.
inline Vec rotate90(const Vec& a) { return make_vec2(-a[1], a[0]); }

enum class ErrorKind {
  OutsideCone,
  VertexSingular,
  DegreeZero,
  CriticalDegree,
  BoundaryTooClose,
  NonRadialDensity,
  WrongDegreeRange,
  HypothesisViolated,
  StencilExitsCone,
  SingularMass,
  ProjectionDegenerate,
  NoSpectralReference,
  ParseError,
  InvalidArgument,
  IoError,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

// Neumaier-compensated accumulator; summation order is the caller's loop order,
// which we keep fixed for reproducibility.
class KahanSum {
 public:
  void add(double value) {
    double t = sum_ + value;
    if (std::abs(sum_) >= std::abs(value)) {
      comp_ += (sum_ - t) + value;
    } else {
      comp_ += (value - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// Deterministic uniform generator (splitmix-initialized xorshift), independent
// of standard-library distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

  std::uint64_t next_u64() {
    std::uint64_t x = state_;
    x ^= x << 13;
    x ^= x >> 7;
    x ^= x << 17;
    state_ = x;
    return x;
  }

  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::uint64_t state_;
};

// Least-squares slope of y against x; used for log-log scaling fits.
double fit_slope(const std::vector<double>& x, const std::vector<double>& y);

inline bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

}  // namespace conelab
