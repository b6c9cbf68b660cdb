#pragma once

#include <complex>
#include <memory>
#include <string>
#include <vector>

#include "steiner/geometry.hpp"

namespace steiner {

using Complex = std::complex<double>;

// Closed interval used for quantities obtained by extrapolating a radius
// toward the unit circle: [certified lower value, upper estimate].
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double mid() const { return 0.5 * (lo + hi); }
  double spread() const { return hi - lo; }
  // Wide means the spread exceeds 1% of the magnitude; callers decide how
  // to react (it is a reporting flag, never an error).
  bool wide() const;
};

// A convex non-decreasing integrand Phi applied to Re f on circles.
// Exponential kinds are integrated in log space so huge exponents cannot
// overflow the accumulation.
class MeanFunctional {
public:
  enum class Kind { power, exp_p, plus_power, exp_plus_power, entire_series };

  static MeanFunctional power(double p);           // x^p, requires x >= 0
  static MeanFunctional exponential(double p);     // e^{p x}
  static MeanFunctional plus_power(double p);      // max(x,0)^p
  static MeanFunctional exp_plus_power(double p);  // exp(max(x,0)^p)
  static MeanFunctional entire(std::vector<double> coefficients);  // sum c_n x^n

  double operator()(double x) const;
  // True when Phi = exp(g) and the mean should accumulate g in log space.
  bool exponential_form() const;
  double exponent(double x) const;  // g(x) for exponential kinds

  Kind kind() const { return kind_; }
  double p() const { return p_; }
  const std::vector<double>& coefficients() const { return coeffs_; }
  std::string name() const;

private:
  MeanFunctional(Kind k, double p, std::vector<double> c);
  Kind kind_;
  double p_;
  std::vector<double> coeffs_;
};

// Quality record for a constructed map.
struct MapDiagnostics {
  double eps_boundary = 0.0;  // max | |F(w)| - 1 | over validation samples
  double eps_witness = 0.0;   // max dist(f(circle sample), target boundary)
  bool univalent = false;     // monotone boundary correspondence + simple image
  double max_arg_backstep = 0.0;  // worst negative correspondence increment
  int poly_degree = 0;
  int pole_count = 0;
  int symmetry_order = 1;
  int attempts = 0;
  int witness_samples = 0;
};

struct TaylorCoefficients {
  std::vector<Complex> a;   // a[0..N]
  std::vector<double> err;  // per-coefficient cross-radius disagreement
  double rho = 0.0;         // primary sample radius
  double rho_check = 0.0;   // secondary radius used for the error estimate
};

// Numerical Riemann map f of the unit disk onto a polygon, normalized by
// f(0) = w0 and f'(0) > 0. Immutable once built; safe to evaluate from
// several threads concurrently.
class ConformalMap {
public:
  const Polygon& target() const;
  Complex w0() const;
  double deriv0() const;  // f'(0), real and positive
  const MapDiagnostics& diagnostics() const;

  // Interior evaluation. Requires |z| <= 1 - 1e-6.
  Complex eval(Complex z) const;
  Complex deriv(Complex z) const;
  // f at m equally spaced points of the circle |z| = r (indexed by angle
  // 2*pi*j/m), computed by continuation around the circle.
  std::vector<Complex> eval_circle(double r, int m) const;

  // Forward direction: the represented map of the target onto the disk and
  // its derivative (F = f^{-1} up to the construction tolerance).
  Complex to_disk(Complex w) const;
  Complex to_disk_deriv(Complex w) const;

  // Coefficients of f(z) = sum a_n z^n from circle samples at radius rho in
  // [0.5, 0.999], cross-checked at rho - 0.05.
  TaylorCoefficients taylor_coefficients(int count, double rho) const;

  // ((1/2pi) integral of |f(r e^{i t})|^p dt)^{1/p}, adaptive node doubling
  // with relative target 1e-8.
  double hardy_mean(double r, double p) const;

  // H^p norm estimate as an interval. p = infinity uses the geometric sup;
  // p = 2 uses coefficients with an area-based tail bound; other p use
  // Richardson extrapolation in r over {0.99, 0.995, 0.999}.
  Interval hardy_norm(double p) const;
  static constexpr double kPInfinity = -1.0;  // sentinel accepted as p

  // Integral of |f'| over the unit circle, which for a polygon target is
  // exactly its perimeter.
  double boundary_derivative_integral() const;

  // (1/2pi) integral of Phi(Re f(r e^{i t})) dt.
  double real_part_mean(double r, const MeanFunctional& phi) const;

  // Relative defect of the disk-automorphism change of variables
  //   integral |f(phi_a) - f(a)|^p  vs  the Poisson-kernel-weighted form,
  // both extrapolated r -> 1. Small residuals certify the evaluation
  // machinery; |a| <= 0.9.
  double moebius_identity_residual(Complex a, double p) const;

  // Serialization for the map cache (versioned; keyed by polygon hash + tol).
  std::string to_cache_json() const;
  static ConformalMap from_cache_json(const std::string& text);

  struct Impl;
  explicit ConformalMap(std::shared_ptr<const Impl> impl);

private:
  std::shared_ptr<const Impl> impl_;
};

// Constructs the map by a least-squares boundary-correspondence solve:
// F(w) = (w - w0) exp(G(w)) with G spanned by a polynomial basis plus pole
// clusters at sharp corners, fitted so |F| = 1 on the boundary. tol is the
// target for the witness error (max distance from mapped circle samples to
// the target boundary), within [1e-8, 1e-2].
ConformalMap build_map(const Polygon& target, Vec2 w0 = {0.0, 0.0},
                       double tol = 1e-4);

// Cache helpers: write/read a map next to its polygon, verifying the stored
// polygon hash and tolerance on load.
void save_map(const ConformalMap& m, const std::string& path);
ConformalMap load_map(const std::string& path, const Polygon& expected_target);

}  // namespace steiner
