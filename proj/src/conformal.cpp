#include "steiner/conformal.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

#include "json.hpp"
#include "steiner/errors.hpp"

namespace steiner {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

Complex rot(double angle) { return std::polar(1.0, angle); }

// ---------------------------------------------------------------------------
// Basis: G(w) is spanned by Arnoldi-orthogonalized powers of the reduced
// variable W = ((w - w0)/scale)^k plus simple poles 1/(W - P). For a target
// invariant under rotation by 2*pi/k (with w0 = 0) one pole term covers the
// whole orbit of a corner at once and the represented map is exactly
// equivariant: F(e^{2pi i/k} w) = e^{2pi i/k} F(w).
// ---------------------------------------------------------------------------
struct Basis {
  Complex w0;
  double scale = 1.0;
  int k = 1;
  int degree = 0;                  // polynomial degree in W
  Eigen::MatrixXcd H;              // (degree+1) x degree Arnoldi recurrence
  std::vector<Complex> poles;      // pole positions in the W plane
  std::vector<double> pole_scale;  // per-pole column normalization

  int cols() const { return degree + 1 + static_cast<int>(poles.size()); }

  Complex W(Complex w) const {
    Complex u = (w - w0) / scale;
    if (k == 1) return u;
    Complex r = 1.0;
    int e = k;
    while (e > 0) {  // small integer power
      if (e & 1) r *= u;
      u *= u;
      e >>= 1;
    }
    return r;
  }
  Complex dW(Complex w) const {
    Complex u = (w - w0) / scale;
    if (k == 1) return Complex(1.0 / scale, 0.0);
    Complex r = 1.0;
    for (int i = 0; i < k - 1; ++i) r *= u;
    return double(k) * r / scale;
  }

  // phi[j](w) for all columns; optionally d/dw phi[j](w).
  void eval(Complex w, std::vector<Complex>& phi, std::vector<Complex>* dphi) const {
    const Complex Wv = W(w);
    const Complex dWv = dphi ? dW(w) : Complex(0.0);
    phi.resize(cols());
    if (dphi) dphi->resize(cols());
    // Arnoldi recurrence: q_{j+1} = (W q_j - sum_i H(i,j) q_i) / H(j+1, j).
    std::vector<Complex> q(degree + 1), dq(degree + 1);
    q[0] = 1.0;
    dq[0] = 0.0;
    for (int j = 0; j < degree; ++j) {
      Complex v = Wv * q[j];
      Complex dv = dWv * q[j] + Wv * dq[j];
      for (int i = 0; i <= j; ++i) {
        v -= H(i, j) * q[i];
        dv -= H(i, j) * dq[i];
      }
      q[j + 1] = v / H(j + 1, j);
      dq[j + 1] = dv / H(j + 1, j);
    }
    for (int j = 0; j <= degree; ++j) {
      phi[j] = q[j];
      if (dphi) (*dphi)[j] = dq[j];
    }
    for (std::size_t t = 0; t < poles.size(); ++t) {
      Complex d = Wv - poles[t];
      phi[degree + 1 + t] = pole_scale[t] / d;
      if (dphi) (*dphi)[degree + 1 + t] = -pole_scale[t] * dWv / (d * d);
    }
  }
};

struct BoundarySample {
  Complex w;
  int edge = 0;
  double t = 0.0;  // parameter along the edge, for ordering
};

struct CornerInfo {
  Complex v;
  double turn = 0.0;       // signed exterior turning angle; |turn| ~ sharpness
  double leg = 0.0;        // shorter adjacent edge length
  Complex exterior_dir{};  // unit direction pointing out of the domain
  bool sharp = false;
};

std::vector<CornerInfo> analyze_corners(const Polygon& p) {
  const auto& vs = p.vertices();
  const std::size_t n = vs.size();
  std::vector<CornerInfo> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vec2 prev = vs[(i + n - 1) % n], cur = vs[i], next = vs[(i + 1) % n];
    Vec2 d1 = cur - prev, d2 = next - cur;
    double turn = std::atan2(cross(d1, d2), dot(d1, d2));
    Vec2 u1 = (1.0 / norm(prev - cur)) * (prev - cur);
    Vec2 u2 = (1.0 / norm(next - cur)) * (next - cur);
    Vec2 bis = u1 + u2;
    double bn = norm(bis);
    CornerInfo c;
    c.v = to_complex(cur);
    c.turn = turn;
    c.leg = std::min(norm(prev - cur), norm(next - cur));
    c.sharp = std::fabs(turn) > 0.1;
    if (bn > 1e-12) {
      // The bisector of the two edge directions points into the interior at a
      // convex corner and into the exterior wedge at a reflex corner.
      Complex b(bis.x / bn, bis.y / bn);
      c.exterior_dir = (turn > 0.0) ? -b : b;
    } else {
      c.exterior_dir = 0.0;  // straight corner, no poles anyway
    }
    out[i] = c;
  }
  return out;
}

// Largest k such that the vertex list is invariant under rotation by 2*pi/k
// about the origin (requires the normalization point at the origin).
int detect_symmetry(const Polygon& p, Complex w0, double scale) {
  if (std::abs(w0) > 1e-12 * scale) return 1;
  const auto& vs = p.vertices();
  const int n = static_cast<int>(vs.size());
  for (int k = n; k >= 2; --k) {
    if (n % k != 0) continue;
    int shift = n / k;
    Complex r = rot(kTwoPi / k);
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) {
      Complex expect = r * to_complex(vs[i]);
      Complex got = to_complex(vs[(i + shift) % n]);
      if (std::abs(got - expect) > 1e-9 * scale) ok = false;
    }
    if (ok) return k;
  }
  return 1;
}

// With k-fold symmetry any n/k consecutive edges form a fundamental domain;
// index arithmetic avoids angle comparisons at sector boundaries.
bool in_sector(std::size_t index, std::size_t n, int k) {
  return k == 1 || index < n / static_cast<std::size_t>(k);
}

void place_cluster(std::vector<Complex>& poles, const CornerInfo& c, int count,
                   const Polygon& target, double scale, Complex w0) {
  if (count <= 0 || std::abs(c.exterior_dir) < 0.5) return;
  double L = 0.5 * std::min(c.leg, scale);
  if ((c.exterior_dir * std::conj(w0 - c.v)).real() > 0.0) {
    // The ray heads toward the normalization point: keep poles clear of it.
    double cap = 0.7 * std::abs(c.v - w0);
    L = std::min(L, std::max(cap, 1e-3 * scale));
  }
  for (int j = 1; j <= count; ++j) {
    double d = L * std::exp(-4.0 * (std::sqrt(double(count)) - std::sqrt(double(j))));
    Complex p = c.v + d * c.exterior_dir;
    if (contains_point(target, {p.real(), p.imag()})) continue;
    poles.push_back(p);
  }
}

struct SamplePlan {
  std::vector<BoundarySample> fit;
  std::vector<BoundarySample> validate;
};

// Boundary samples, exponentially clustered toward sharp corners, covering
// either the whole boundary or one fundamental sector (k > 1).
SamplePlan make_samples(const Polygon& p, const std::vector<CornerInfo>& corners,
                        int k, int cluster_n, int min_total, double scale) {
  const auto& vs = p.vertices();
  const std::size_t n = vs.size();
  std::vector<std::size_t> edges;
  double sector_len = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (in_sector(i, n, k)) {
      edges.push_back(i);
      sector_len += std::abs(to_complex(vs[(i + 1) % n]) - to_complex(vs[i]));
    }
  }
  if (edges.empty()) fail(ErrorKind::construction_failure, "empty boundary sector");

  SamplePlan plan;
  const int cluster_m = cluster_n > 0 ? 3 * cluster_n : 6;
  for (std::size_t e : edges) {
    Complex a = to_complex(vs[e]), b = to_complex(vs[(e + 1) % n]);
    double len = std::abs(b - a);
    std::vector<double> ts;
    auto cluster_end = [&](bool at_start, int m) {
      for (int j = 1; j <= m; ++j) {
        double d = 0.5 * std::exp(-4.0 * (std::sqrt(double(m)) - std::sqrt(double(j))));
        d = std::max(d, 1e-13);  // keep samples representably off the corner
        ts.push_back(at_start ? d : 1.0 - d);
      }
    };
    bool sa = corners[e].sharp, sb = corners[(e + 1) % n].sharp;
    cluster_end(true, sa ? cluster_m : 4);
    cluster_end(false, sb ? cluster_m : 4);
    int extra = min_total > 0
                    ? static_cast<int>(std::ceil(min_total * (len / sector_len)))
                    : 0;
    int nmid = std::max(6, extra);
    for (int i = 0; i < nmid; ++i) ts.push_back((i + 0.5) / nmid);
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end(),
                         [](double x, double y) { return std::fabs(x - y) < 1e-13; }),
             ts.end());
    for (std::size_t i = 0; i < ts.size(); ++i) {
      plan.fit.push_back({a + ts[i] * (b - a), static_cast<int>(e), ts[i]});
      double tv = (i + 1 < ts.size()) ? 0.5 * (ts[i] + ts[i + 1])
                                      : 0.5 * (ts[i] + 1.0);
      plan.validate.push_back({a + tv * (b - a), static_cast<int>(e), tv});
    }
    // One validation point deeper into each sharp corner than any fit point.
    if (sa) plan.validate.push_back({a + (ts.front() / 3.0) * (b - a),
                                     static_cast<int>(e), ts.front() / 3.0});
    if (sb) plan.validate.push_back({a + (0.5 + 0.5 * ts.back()) * (b - a),
                                     static_cast<int>(e), 0.5 + 0.5 * ts.back()});
  }
  (void)scale;
  return plan;
}

}  // namespace

// ---------------------------------------------------------------------------
// Impl
// ---------------------------------------------------------------------------
struct ConformalMap::Impl {
  Polygon target;
  Complex w0{};
  double tol = 1e-4;
  Basis basis;
  std::vector<Complex> coef;
  double fprime0 = 1.0;
  double vertex_radius = 0.0;  // max |v| over vertices (sup of |f| on the closure)
  double accept_r = 1e-12;     // Newton residual floor (evaluation noise)
  MapDiagnostics diag;
  // Boundary correspondence (theta = arg F(w), w on the boundary), sorted by
  // theta; Newton seeds for inversion.
  std::vector<std::pair<double, Complex>> corr;

  Impl() : target(Polygon::trusted({{0, 0}, {1, 0}, {0, 1}})) {}

  // Large ill-conditioned bases evaluate F with a noise floor proportional
  // to the l1 norm of the coefficients; Newton can do no better than that.
  void set_noise_floor() {
    double cnorm = 0.0;
    for (Complex c : coef) cnorm += std::abs(c);
    accept_r = std::max(1e-12, 5e-17 * cnorm);
  }

  Complex G(Complex w, Complex* dG) const {
    std::vector<Complex> phi, dphi;
    basis.eval(w, phi, dG ? &dphi : nullptr);
    Complex g = 0.0, dg = 0.0;
    for (std::size_t j = 0; j < coef.size(); ++j) {
      g += coef[j] * phi[j];
      if (dG) dg += coef[j] * dphi[j];
    }
    if (dG) *dG = dg;
    return g;
  }

  Complex F(Complex w, Complex* dF) const {
    Complex dg;
    Complex g = G(w, dF ? &dg : nullptr);
    Complex e = std::exp(g);
    if (dF) *dF = e * (1.0 + (w - w0) * dg);
    return (w - w0) * e;
  }

  // Solves F(w) = z by damped Newton: each step must shrink the residual,
  // which keeps iterates out of the exterior pole region. Accepts on a small
  // step or a small residual; large bases carry an evaluation noise floor, so
  // the best iterate is still accepted if its residual is far below any
  // construction tolerance.
  std::optional<Complex> newton(Complex z, Complex seed) const {
    const double step_tol = 3e-14 * basis.scale;
    Complex w = seed, dF;
    Complex Fw = F(w, &dF);
    double r = std::abs(Fw - z);
    Complex best_w = w;
    double best_r = r;
    const double early = std::max(1e-13, 0.3 * accept_r);
    for (int it = 0; it < 60; ++it) {
      if (r <= early) return w;
      if (!(std::abs(dF) > 1e-300)) break;
      Complex step = (Fw - z) / dF;
      double sn = std::abs(step);
      if (sn > 0.25 * basis.scale) step *= 0.25 * basis.scale / sn;
      // Full Newton steps may overshoot through curved residual valleys, so
      // tolerate moderate growth; halve only on a blow-up (an iterate that
      // escaped into the exterior pole region).
      double lambda = 1.0;
      Complex w_try, F_try, dF_try;
      double r_try = r;
      bool improved = false;
      for (int h = 0; h < 30; ++h) {
        w_try = w - lambda * step;
        F_try = F(w_try, &dF_try);
        r_try = std::abs(F_try - z);
        if (r_try < 4.0 * r) {
          improved = true;
          break;
        }
        lambda *= 0.5;
      }
      if (!improved) break;
      w = w_try;
      Fw = F_try;
      dF = dF_try;
      r = r_try;
      if (r < best_r) {
        best_r = r;
        best_w = w;
      }
      if (lambda * std::abs(step) <= step_tol) break;
      if (std::abs(w - w0) > 4.0 * basis.scale) break;
    }
    if (best_r <= accept_r) return best_w;
    return std::nullopt;
  }

  Complex seed_from_corr(Complex z) const {
    if (corr.empty()) return w0 + z * fprime0;
    double th = std::arg(z);
    auto it = std::lower_bound(corr.begin(), corr.end(), th,
                               [](const auto& a, double b) { return a.first < b; });
    if (it == corr.end()) it = corr.begin();
    Complex wb = it->second;
    double r = std::abs(z);
    return w0 + r * (wb - w0);
  }

  // Inversion with fallbacks: correspondence seed, center seed, then radial
  // continuation with geometrically refined steps.
  Complex invert(Complex z) const {
    if (std::abs(z) < 1e-300) return w0;
    if (auto w = newton(z, seed_from_corr(z))) return *w;
    if (auto w = newton(z, w0 + z * fprime0)) return *w;
    for (int stages : {8, 24, 64}) {
      Complex w = w0;
      bool ok = true;
      for (int i = 1; i <= stages && ok; ++i) {
        double t = double(i) / stages;
        Complex zt = t * z;
        auto wn = newton(zt, i == 1 ? w0 + zt * fprime0 : w);
        if (wn)
          w = *wn;
        else
          ok = false;
      }
      if (ok) return w;
    }
    fail(ErrorKind::precision_failure,
         "interior evaluation did not converge at z = (" +
             std::to_string(z.real()) + ", " + std::to_string(z.imag()) + ")");
  }
};

// ---------------------------------------------------------------------------
// MeanFunctional
// ---------------------------------------------------------------------------
MeanFunctional::MeanFunctional(Kind k, double p, std::vector<double> c)
    : kind_(k), p_(p), coeffs_(std::move(c)) {}

MeanFunctional MeanFunctional::power(double p) {
  if (!(p > 0.0)) fail(ErrorKind::invalid_input, "power mean requires p > 0");
  return MeanFunctional(Kind::power, p, {});
}
MeanFunctional MeanFunctional::exponential(double p) {
  if (!(p >= 0.0)) fail(ErrorKind::invalid_input, "exponential mean requires p >= 0");
  return MeanFunctional(Kind::exp_p, p, {});
}
MeanFunctional MeanFunctional::plus_power(double p) {
  if (!(p > 0.0)) fail(ErrorKind::invalid_input, "plus-power mean requires p > 0");
  return MeanFunctional(Kind::plus_power, p, {});
}
MeanFunctional MeanFunctional::exp_plus_power(double p) {
  if (!(p > 0.0)) fail(ErrorKind::invalid_input, "exp-plus-power mean requires p > 0");
  return MeanFunctional(Kind::exp_plus_power, p, {});
}
MeanFunctional MeanFunctional::entire(std::vector<double> coefficients) {
  for (double c : coefficients)
    if (!(c >= 0.0))
      fail(ErrorKind::invalid_input, "entire-series coefficients must be >= 0");
  return MeanFunctional(Kind::entire_series, 0.0, std::move(coefficients));
}

double MeanFunctional::operator()(double x) const {
  switch (kind_) {
    case Kind::power:
      if (x < 0.0)
        fail(ErrorKind::evaluation_out_of_range,
             "power functional requires a nonnegative argument");
      return std::pow(x, p_);
    case Kind::exp_p:
      return std::exp(p_ * x);
    case Kind::plus_power:
      return x > 0.0 ? std::pow(x, p_) : 0.0;
    case Kind::exp_plus_power:
      return std::exp(x > 0.0 ? std::pow(x, p_) : 0.0);
    case Kind::entire_series: {
      double acc = 0.0;
      for (std::size_t i = coeffs_.size(); i-- > 0;) acc = acc * x + coeffs_[i];
      return acc;
    }
  }
  return 0.0;
}

bool MeanFunctional::exponential_form() const {
  return kind_ == Kind::exp_p || kind_ == Kind::exp_plus_power;
}

double MeanFunctional::exponent(double x) const {
  if (kind_ == Kind::exp_p) return p_ * x;
  if (kind_ == Kind::exp_plus_power) return x > 0.0 ? std::pow(x, p_) : 0.0;
  fail(ErrorKind::invalid_input, "exponent() is defined for exponential kinds only");
}

std::string MeanFunctional::name() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::power: os << "power-" << p_; break;
    case Kind::exp_p: os << "exp-" << p_; break;
    case Kind::plus_power: os << "plus-power-" << p_; break;
    case Kind::exp_plus_power: os << "exp-plus-power-" << p_; break;
    case Kind::entire_series: os << "entire-series-" << coeffs_.size(); break;
  }
  return os.str();
}

bool Interval::wide() const {
  return spread() > 0.01 * std::max(1.0, std::fabs(mid()));
}

// ---------------------------------------------------------------------------
// ConformalMap public surface
// ---------------------------------------------------------------------------
ConformalMap::ConformalMap(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

const Polygon& ConformalMap::target() const { return impl_->target; }
Complex ConformalMap::w0() const { return impl_->w0; }
double ConformalMap::deriv0() const { return impl_->fprime0; }
const MapDiagnostics& ConformalMap::diagnostics() const { return impl_->diag; }

Complex ConformalMap::eval(Complex z) const {
  if (std::abs(z) > 1.0 - 1e-6 + 1e-12)
    fail(ErrorKind::evaluation_out_of_range,
         "evaluation requires |z| <= 1 - 1e-6");
  return impl_->invert(z);
}

Complex ConformalMap::deriv(Complex z) const {
  if (std::abs(z) > 1.0 - 1e-6 + 1e-12)
    fail(ErrorKind::evaluation_out_of_range,
         "evaluation requires |z| <= 1 - 1e-6");
  Complex w = impl_->invert(z);
  Complex dF;
  impl_->F(w, &dF);
  return 1.0 / dF;
}

std::vector<Complex> ConformalMap::eval_circle(double r, int m) const {
  if (r < 0.0 || r > 1.0 - 1e-6)
    fail(ErrorKind::evaluation_out_of_range, "circle radius must lie in [0, 1 - 1e-6]");
  if (m < 1) fail(ErrorKind::invalid_input, "sample count must be positive");
  std::vector<Complex> out(m);
  if (r < 1e-300) {
    std::fill(out.begin(), out.end(), impl_->w0);
    return out;
  }
  Complex prev = impl_->invert(Complex(r, 0.0));
  for (int j = 0; j < m; ++j) {
    Complex z = std::polar(r, kTwoPi * j / m);
    auto w = impl_->newton(z, prev);
    if (!w) w = impl_->invert(z);
    out[j] = *w;
    prev = *w;
  }
  return out;
}

Complex ConformalMap::to_disk(Complex w) const { return impl_->F(w, nullptr); }
Complex ConformalMap::to_disk_deriv(Complex w) const {
  Complex dF;
  impl_->F(w, &dF);
  return dF;
}

TaylorCoefficients ConformalMap::taylor_coefficients(int count, double rho) const {
  if (count < 1) fail(ErrorKind::invalid_input, "coefficient count must be >= 1");
  if (rho < 0.5 || rho > 0.999)
    fail(ErrorKind::invalid_input, "sample radius must lie in [0.5, 0.999]");
  const int m = std::max(512, 4 * count);
  const double rho2 = rho - 0.05;
  auto dft = [&](double r) {
    std::vector<Complex> f = eval_circle(r, m);
    std::vector<Complex> a(count + 1);
    for (int n = 0; n <= count; ++n) {
      Complex s = 0.0;
      for (int j = 0; j < m; ++j)
        s += f[j] * std::polar(1.0, -kTwoPi * double(j) * double(n) / m);
      a[n] = s / (double(m) * std::pow(r, n));
    }
    return a;
  };
  TaylorCoefficients out;
  out.rho = rho;
  out.rho_check = rho2;
  out.a = dft(rho);
  std::vector<Complex> b = dft(rho2);
  out.err.resize(count + 1);
  double worst = 0.0;
  for (int n = 0; n <= count; ++n) {
    out.err[n] = std::abs(out.a[n] - b[n]);
    worst = std::max(worst, out.err[n]);
  }
  if (worst > 1e-4 * impl_->basis.scale)
    fail(ErrorKind::precision_failure,
         "cross-radius coefficient disagreement " + std::to_string(worst) +
             " exceeds tolerance; reduce the count or move the radius toward 1");
  return out;
}

namespace {
// Adaptive node doubling for circle means; stops at 1e-8 relative agreement.
template <typename Fn>
double circle_mean(const Fn& values_mean, const char* what) {
  double prev = std::numeric_limits<double>::quiet_NaN();
  for (int m = 64; m <= (1 << 17); m *= 2) {
    double cur = values_mean(m);
    if (!std::isnan(prev)) {
      double tol = 1e-8 * (std::fabs(cur) + 1e-300);
      if (std::fabs(cur - prev) <= tol) return cur;
    }
    prev = cur;
  }
  fail(ErrorKind::precision_failure,
       std::string(what) + ": circle quadrature did not reach 1e-8 relative accuracy");
}
}  // namespace

double ConformalMap::hardy_mean(double r, double p) const {
  if (r < 0.0 || r > 0.999)
    fail(ErrorKind::invalid_input, "hardy_mean requires r in [0, 0.999]");
  if (!(p > 0.0) || std::isinf(p))
    fail(ErrorKind::invalid_input, "hardy_mean requires finite p > 0");
  double mean = circle_mean(
      [&](int m) {
        std::vector<Complex> f = eval_circle(r, m);
        double acc = 0.0;
        for (const Complex& v : f) acc += std::pow(std::abs(v), p);
        return acc / m;
      },
      "hardy_mean");
  return std::pow(mean, 1.0 / p);
}

Interval ConformalMap::hardy_norm(double p) const {
  const double sup = impl_->vertex_radius;
  if (p == kPInfinity || std::isinf(p)) {
    std::vector<Complex> f = eval_circle(0.999, 4096);
    double lo = 0.0;
    for (const Complex& v : f) lo = std::max(lo, std::abs(v));
    return {std::min(lo, sup), sup};
  }
  if (!(p > 0.0)) fail(ErrorKind::invalid_input, "hardy_norm requires p > 0 or infinity");
  if (p == 2.0) {
    const int N = 256;
    TaylorCoefficients tc = taylor_coefficients(N, 0.99);
    double partial = 0.0, weighted = 0.0, err = 0.0;
    for (int n = 0; n <= N; ++n) {
      double an = std::abs(tc.a[n]);
      partial += an * an;
      weighted += n * an * an;
      err += tc.err[n] * (2.0 * an + tc.err[n]);
    }
    double tail = std::max(0.0, area(impl_->target) / kPi - weighted) / (N + 1);
    double lo = std::sqrt(std::max(0.0, partial - err));
    lo = std::max(lo, hardy_mean(0.999, 2.0));
    double hi = std::sqrt(partial + err + tail);
    hi = std::max(hi, lo);
    return {lo, hi};
  }
  double m1 = hardy_mean(0.99, p);
  double m2 = hardy_mean(0.995, p);
  double m3 = hardy_mean(0.999, p);
  double e23 = m3 + (m3 - m2) * (0.001 / 0.004);
  double e13 = m3 + (m3 - m1) * (0.001 / 0.009);
  double spread = std::fabs(e23 - e13);
  double hi = std::min(std::max(e23, e13) + spread, sup);
  return {m3, std::max(hi, m3)};
}

double ConformalMap::boundary_derivative_integral() const {
  // For a polygonal target the boundary image has the polygon's length, so
  // the integral is the perimeter; interior quadrature approaches it as the
  // radius tends to 1 (covered by the tests).
  return perimeter(impl_->target);
}

double ConformalMap::real_part_mean(double r, const MeanFunctional& phi) const {
  if (r < 0.0 || r > 0.999)
    fail(ErrorKind::invalid_input, "real_part_mean requires r in [0, 0.999]");
  if (phi.exponential_form()) {
    // Accumulate in log space: log mean = LSE(g_j) - log m.
    double logmean = circle_mean(
        [&](int m) {
          std::vector<Complex> f = eval_circle(r, m);
          double gmax = -std::numeric_limits<double>::infinity();
          for (const Complex& v : f) gmax = std::max(gmax, phi.exponent(v.real()));
          double acc = 0.0;
          for (const Complex& v : f) acc += std::exp(phi.exponent(v.real()) - gmax);
          return gmax + std::log(acc / m);
        },
        "real_part_mean");
    return std::exp(logmean);
  }
  return circle_mean(
      [&](int m) {
        std::vector<Complex> f = eval_circle(r, m);
        double acc = 0.0;
        for (const Complex& v : f) acc += phi(v.real());
        return acc / m;
      },
      "real_part_mean");
}

double ConformalMap::moebius_identity_residual(Complex a, double p) const {
  if (std::abs(a) > 0.9)
    fail(ErrorKind::invalid_input, "moebius check requires |a| <= 0.9");
  if (!(p > 0.0)) fail(ErrorKind::invalid_input, "moebius check requires p > 0");
  const Complex fa = impl_->invert(a);
  const Complex ac = std::conj(a);
  auto lhs_at = [&](double r) {
    return circle_mean(
        [&](int m) {
          double acc = 0.0;
          for (int j = 0; j < m; ++j) {
            Complex z = std::polar(r, kTwoPi * j / m);
            Complex zz = (z + a) / (1.0 + ac * z);
            acc += std::pow(std::abs(impl_->invert(zz) - fa), p);
          }
          return acc / m;
        },
        "moebius lhs");
  };
  auto rhs_at = [&](double r) {
    return circle_mean(
        [&](int m) {
          std::vector<Complex> f = eval_circle(r, m);
          double acc = 0.0;
          for (int j = 0; j < m; ++j) {
            Complex u = std::polar(1.0, kTwoPi * j / m);
            double kern = (1.0 - std::norm(a)) / std::norm(u - a);
            acc += std::pow(std::abs(f[j] - fa), p) * kern;
          }
          return acc / m;
        },
        "moebius rhs");
  };
  // Quadratic extrapolation r -> 1 over h = 1-r in {0.003, 0.002, 0.001}.
  auto extrap = [&](auto side) {
    double v3 = side(0.997), v2 = side(0.998), v1 = side(0.999);
    return 3.0 * v1 - 3.0 * v2 + v3;
  };
  double L = extrap(lhs_at), R = extrap(rhs_at);
  return std::fabs(L - R) / (0.5 * (std::fabs(L) + std::fabs(R)) + 1e-300);
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------
namespace {
nlohmann::json cplx(Complex z) { return {z.real(), z.imag()}; }
Complex uncplx(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }
}  // namespace

std::string ConformalMap::to_cache_json() const {
  const Impl& im = *impl_;
  nlohmann::json j;
  j["format"] = "steinerlab-map";
  j["version"] = 1;
  {
    std::ostringstream os;
    os << std::hex << polygon_hash(im.target);
    j["polygon_hash"] = os.str();
  }
  j["polygon"] = nlohmann::json::parse(polygon_to_json(im.target));
  j["tol"] = im.tol;
  j["w0"] = cplx(im.w0);
  j["scale"] = im.basis.scale;
  j["symmetry"] = im.basis.k;
  j["degree"] = im.basis.degree;
  nlohmann::json H = nlohmann::json::array();
  for (int r = 0; r < im.basis.H.rows(); ++r)
    for (int c = 0; c < im.basis.H.cols(); ++c) H.push_back(cplx(im.basis.H(r, c)));
  j["arnoldi"] = H;
  nlohmann::json poles = nlohmann::json::array(), ps = nlohmann::json::array();
  for (std::size_t i = 0; i < im.basis.poles.size(); ++i) {
    poles.push_back(cplx(im.basis.poles[i]));
    ps.push_back(im.basis.pole_scale[i]);
  }
  j["poles"] = poles;
  j["pole_scale"] = ps;
  nlohmann::json coef = nlohmann::json::array();
  for (Complex c : im.coef) coef.push_back(cplx(c));
  j["coef"] = coef;
  j["fprime0"] = im.fprime0;
  j["diag"] = {{"eps_boundary", im.diag.eps_boundary},
               {"eps_witness", im.diag.eps_witness},
               {"univalent", im.diag.univalent},
               {"max_arg_backstep", im.diag.max_arg_backstep},
               {"poly_degree", im.diag.poly_degree},
               {"pole_count", im.diag.pole_count},
               {"symmetry_order", im.diag.symmetry_order},
               {"attempts", im.diag.attempts},
               {"witness_samples", im.diag.witness_samples}};
  nlohmann::json corr = nlohmann::json::array();
  std::size_t stride = std::max<std::size_t>(1, im.corr.size() / 1024);
  for (std::size_t i = 0; i < im.corr.size(); i += stride)
    corr.push_back({im.corr[i].first, im.corr[i].second.real(), im.corr[i].second.imag()});
  j["correspondence"] = corr;
  return j.dump(2);
}

ConformalMap ConformalMap::from_cache_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    fail(ErrorKind::invalid_input, std::string("map cache is not valid json: ") + e.what());
  }
  if (j.value("format", "") != "steinerlab-map" || j.value("version", 0) != 1)
    fail(ErrorKind::invalid_input, "unrecognized map cache format/version");
  auto im = std::make_shared<Impl>();
  im->target = polygon_from_json(j.at("polygon").dump());
  im->tol = j.at("tol").get<double>();
  im->w0 = uncplx(j.at("w0"));
  im->basis.w0 = im->w0;
  im->basis.scale = j.at("scale").get<double>();
  im->basis.k = j.at("symmetry").get<int>();
  im->basis.degree = j.at("degree").get<int>();
  int rows = im->basis.degree + 1, colsn = im->basis.degree;
  im->basis.H.resize(rows, colsn);
  const auto& H = j.at("arnoldi");
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < colsn; ++c) im->basis.H(r, c) = uncplx(H.at(r * colsn + c));
  for (const auto& p : j.at("poles")) im->basis.poles.push_back(uncplx(p));
  for (const auto& s : j.at("pole_scale")) im->basis.pole_scale.push_back(s.get<double>());
  for (const auto& c : j.at("coef")) im->coef.push_back(uncplx(c));
  im->set_noise_floor();
  im->fprime0 = j.at("fprime0").get<double>();
  double vr = 0.0;
  for (const Vec2& v : im->target.vertices())
    vr = std::max(vr, std::abs(to_complex(v)));
  im->vertex_radius = vr;
  const auto& d = j.at("diag");
  im->diag.eps_boundary = d.at("eps_boundary").get<double>();
  im->diag.eps_witness = d.at("eps_witness").get<double>();
  im->diag.univalent = d.at("univalent").get<bool>();
  im->diag.max_arg_backstep = d.at("max_arg_backstep").get<double>();
  im->diag.poly_degree = d.at("poly_degree").get<int>();
  im->diag.pole_count = d.at("pole_count").get<int>();
  im->diag.symmetry_order = d.at("symmetry_order").get<int>();
  im->diag.attempts = d.at("attempts").get<int>();
  im->diag.witness_samples = d.at("witness_samples").get<int>();
  for (const auto& c : j.at("correspondence"))
    im->corr.emplace_back(c.at(0).get<double>(),
                          Complex(c.at(1).get<double>(), c.at(2).get<double>()));
  std::sort(im->corr.begin(), im->corr.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return ConformalMap(im);
}

void save_map(const ConformalMap& m, const std::string& path) {
  std::ofstream f(path);
  if (!f) fail(ErrorKind::invalid_input, "cannot open map cache for writing: " + path);
  f << m.to_cache_json() << "\n";
}

ConformalMap load_map(const std::string& path, const Polygon& expected_target) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::invalid_input, "cannot open map cache: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  ConformalMap m = ConformalMap::from_cache_json(ss.str());
  if (polygon_hash(m.target()) != polygon_hash(expected_target))
    fail(ErrorKind::invalid_input, "map cache polygon hash does not match the target");
  return m;
}

// ---------------------------------------------------------------------------
// build_map
// ---------------------------------------------------------------------------
namespace {

// Simplicity test for a closed sample chain via a uniform bucket grid.
bool chain_is_simple(const std::vector<Complex>& pts, double scale) {
  std::vector<Complex> q;
  q.reserve(pts.size());
  for (const Complex& p : pts)
    if (q.empty() || std::abs(p - q.back()) > 1e-12 * scale) q.push_back(p);
  while (q.size() > 1 && std::abs(q.front() - q.back()) <= 1e-12 * scale) q.pop_back();
  const int n = static_cast<int>(q.size());
  if (n < 4) return true;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const Complex& p : q) {
    xmin = std::min(xmin, p.real());
    xmax = std::max(xmax, p.real());
    ymin = std::min(ymin, p.imag());
    ymax = std::max(ymax, p.imag());
  }
  int cells = std::max(1, static_cast<int>(std::sqrt(double(n))));
  double cw = std::max(xmax - xmin, 1e-300) / cells;
  double ch = std::max(ymax - ymin, 1e-300) / cells;
  std::vector<std::vector<int>> grid(cells * cells);
  auto cell_range = [&](int i, int& cx0, int& cx1, int& cy0, int& cy1) {
    Complex a = q[i], b = q[(i + 1) % n];
    cx0 = std::clamp(int((std::min(a.real(), b.real()) - xmin) / cw), 0, cells - 1);
    cx1 = std::clamp(int((std::max(a.real(), b.real()) - xmin) / cw), 0, cells - 1);
    cy0 = std::clamp(int((std::min(a.imag(), b.imag()) - ymin) / ch), 0, cells - 1);
    cy1 = std::clamp(int((std::max(a.imag(), b.imag()) - ymin) / ch), 0, cells - 1);
  };
  for (int i = 0; i < n; ++i) {
    int cx0, cx1, cy0, cy1;
    cell_range(i, cx0, cx1, cy0, cy1);
    for (int cx = cx0; cx <= cx1; ++cx)
      for (int cy = cy0; cy <= cy1; ++cy) grid[cy * cells + cx].push_back(i);
  }
  auto crosses = [&](int i, int j) {
    int i1 = (i + 1) % n, j1 = (j + 1) % n;
    if (i == j || i1 == j || j1 == i) return false;
    Complex a = q[i], b = q[i1], c = q[j], d = q[j1];
    // Normalized cross products so near-collinear chain runs along straight
    // target edges do not register sign noise as a crossing.
    auto sine = [](Complex u, Complex v) {
      double m = std::abs(u) * std::abs(v);
      return m > 0.0 ? (u.real() * v.imag() - u.imag() * v.real()) / m : 0.0;
    };
    const double eps = 1e-4;
    double s1 = sine(b - a, c - a), s2 = sine(b - a, d - a);
    double s3 = sine(d - c, a - c), s4 = sine(d - c, b - c);
    bool straddle1 = (s1 > eps && s2 < -eps) || (s1 < -eps && s2 > eps);
    bool straddle2 = (s3 > eps && s4 < -eps) || (s3 < -eps && s4 > eps);
    return straddle1 && straddle2;
  };
  for (const auto& bucket : grid)
    for (std::size_t u = 0; u < bucket.size(); ++u)
      for (std::size_t v = u + 1; v < bucket.size(); ++v)
        if (crosses(bucket[u], bucket[v])) return false;
  return true;
}

struct Attempt {
  int cluster_n;
  int degree;
};

}  // namespace

ConformalMap build_map(const Polygon& target, Vec2 w0v, double tol) {
  if (tol < 1e-8 || tol > 1e-2)
    fail(ErrorKind::invalid_input, "map tolerance must lie in [1e-8, 1e-2]");
  if (!contains_point(target, w0v))
    fail(ErrorKind::invalid_input, "normalization point must lie strictly inside the target");
  const Complex w0 = to_complex(w0v);
  const auto& vs = target.vertices();
  double scale = 0.0;
  for (const Vec2& v : vs) scale = std::max(scale, std::abs(to_complex(v) - w0));

  // Symmetry reduction folds the domain by w -> w^k; with w0 close to the
  // boundary the fold pinches the reduced domain, so only reduce when the
  // normalization point sits well inside.
  const int k = distance_to_boundary(target, w0v) >= 0.25 * scale
                    ? detect_symmetry(target, w0, scale)
                    : 1;
  std::vector<CornerInfo> corners = analyze_corners(target);
  bool any_sharp = false;
  for (const CornerInfo& c : corners) any_sharp |= c.sharp;

  std::vector<Attempt> attempts;
  if (any_sharp)
    attempts = {{8, 16}, {14, 22}, {20, 28}, {28, 36}, {38, 48}, {50, 64}};
  else
    attempts = {{0, 12}, {0, 18}, {0, 26}, {0, 38}, {0, 54}, {0, 78}, {0, 110}};

  auto im_best = std::make_shared<ConformalMap::Impl>();
  double best_eps = std::numeric_limits<double>::infinity();
  int tried = 0;

  for (const Attempt& at : attempts) {
    ++tried;
    auto im = std::make_shared<ConformalMap::Impl>();
    im->target = target;
    im->w0 = w0;
    im->tol = tol;
    im->basis.w0 = w0;
    im->basis.scale = scale;
    im->basis.k = k;
    im->basis.degree = at.degree;

    // Poles: clusters at sharp corners (one fundamental sector when the
    // domain is rotation-symmetric), plus reflections of w0 across nearby
    // edges to resolve thin necks.
    std::vector<Complex> poles_w;
    for (std::size_t i = 0; i < corners.size(); ++i) {
      if (!corners[i].sharp) continue;
      if (!in_sector(i, corners.size(), k)) continue;
      place_cluster(poles_w, corners[i], at.cluster_n, target, scale, w0);
    }
    if (at.cluster_n > 0) {
      // G has a log branch point at the reflection of w0 across each nearby
      // edge (the first image of the normalization point); represent the
      // branch cut by a pole cluster along the ray leading away from the
      // domain. Under rotational symmetry the reflected copies collapse to
      // one W cluster.
      const std::size_t n = vs.size();
      for (std::size_t i = 0; i < n; ++i) {
        Complex a = to_complex(vs[i]), b = to_complex(vs[(i + 1) % n]);
        Complex e = b - a;
        double len = std::abs(e);
        if (len < 1e-300) continue;
        Complex t = e / len;
        double proj = ((w0 - a) * std::conj(t)).real();
        proj = std::clamp(proj, 0.0, len);
        Complex foot = a + proj * t;
        double dist = std::abs(w0 - foot);
        if (dist < 0.25 * scale && dist > 1e-12 * scale) {
          Complex refl = 2.0 * foot - w0;
          if (contains_point(target, {refl.real(), refl.imag()})) continue;
          Complex dir = (refl - foot) / dist;
          CornerInfo image;
          image.v = refl;
          image.exterior_dir = dir;
          image.leg = scale;
          place_cluster(poles_w, image, at.cluster_n, target, scale, w0);
        }
      }
    }
    // Deduplicate and transfer to the W plane.
    std::sort(poles_w.begin(), poles_w.end(), [](Complex a, Complex b) {
      return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    poles_w.erase(std::unique(poles_w.begin(), poles_w.end(),
                              [&](Complex a, Complex b) {
                                return std::abs(a - b) < 1e-9 * scale;
                              }),
                  poles_w.end());
    for (Complex p : poles_w) {
      Complex P = im->basis.W(p);
      bool dup = false;
      for (Complex q : im->basis.poles)
        if (std::abs(q - P) < 1e-9) dup = true;
      if (dup) continue;
      // Column scaling: unit size at the nearest point of the W boundary
      // curve (approximated by the vertices and edge midpoints).
      double s = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < vs.size(); ++i) {
        Complex a = to_complex(vs[i]);
        Complex b = to_complex(vs[(i + 1) % vs.size()]);
        s = std::min(s, std::abs(im->basis.W(a) - P));
        s = std::min(s, std::abs(im->basis.W(0.5 * (a + b)) - P));
      }
      if (!(s > 1e-300)) continue;
      im->basis.poles.push_back(P);
      im->basis.pole_scale.push_back(s);
    }

    const int ccols = at.degree + 1 + static_cast<int>(im->basis.poles.size());
    SamplePlan plan = make_samples(target, corners, k, at.cluster_n,
                                   3 * ccols + 60, scale);
    const int M = static_cast<int>(plan.fit.size());

    // Arnoldi orthogonalization of powers of W on the fit samples.
    Eigen::MatrixXcd Q(M, at.degree + 1);
    im->basis.H = Eigen::MatrixXcd::Zero(at.degree + 1, std::max(at.degree, 1));
    std::vector<Complex> Wv(M);
    for (int i = 0; i < M; ++i) Wv[i] = im->basis.W(plan.fit[i].w);
    for (int i = 0; i < M; ++i) Q(i, 0) = 1.0;
    for (int j = 0; j < at.degree; ++j) {
      Eigen::VectorXcd v(M);
      for (int i = 0; i < M; ++i) v(i) = Wv[i] * Q(i, j);
      for (int pass = 0; pass < 2; ++pass)
        for (int i = 0; i <= j; ++i) {
          Complex h = Q.col(i).dot(v) / double(M);
          im->basis.H(i, j) += h;
          v -= h * Q.col(i);
        }
      double nv = std::sqrt(v.squaredNorm() / double(M));
      if (!(nv > 1e-300))
        fail(ErrorKind::construction_failure, "polynomial basis degenerated");
      im->basis.H(j + 1, j) = nv;
      Q.col(j + 1) = v / nv;
    }

    // Real least squares: Re G(w_i) = -log|w_i - w0| with complex
    // coefficients split into real pairs (imaginary part of the constant
    // dropped, it cannot affect Re G).
    std::vector<Complex> phi;
    Eigen::MatrixXd A(M, 2 * ccols - 1);
    Eigen::VectorXd rhs(M);
    for (int i = 0; i < M; ++i) {
      im->basis.eval(plan.fit[i].w, phi, nullptr);
      A(i, 0) = phi[0].real();
      for (int j = 1; j < ccols; ++j) {
        A(i, 2 * j - 1) = phi[j].real();
        A(i, 2 * j) = -phi[j].imag();
      }
      rhs(i) = -std::log(std::abs(plan.fit[i].w - w0));
    }
    Eigen::VectorXd x = Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(A).solve(rhs);
    im->coef.assign(ccols, 0.0);
    im->coef[0] = Complex(x(0), 0.0);
    for (int j = 1; j < ccols; ++j) im->coef[j] = Complex(x(2 * j - 1), x(2 * j));

    // Rotate the disk so f'(0) is real and positive.
    Complex g0 = im->G(w0, nullptr);
    im->coef[0] -= Complex(0.0, g0.imag());
    im->fprime0 = std::exp(-g0.real());
    im->set_noise_floor();
    double vr = 0.0;
    for (const Vec2& v : vs) vr = std::max(vr, std::abs(to_complex(v)));
    im->vertex_radius = vr;

    // Boundary correspondence from the validation samples (replicated around
    // the full boundary when only a sector was fitted).
    im->corr.clear();
    for (const BoundarySample& s : plan.validate) {
      Complex Fw = im->F(s.w, nullptr);
      for (int rep = 0; rep < k; ++rep) {
        // F is k-equivariant, so each sector sample yields k table entries.
        Complex turn = rot(kTwoPi * rep / k);
        im->corr.emplace_back(std::arg(Fw * turn), s.w * turn);
      }
    }
    std::sort(im->corr.begin(), im->corr.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    // Correspondence monotonicity: walking the physical boundary must advance
    // the image argument without backwards steps (a non-univalent candidate
    // folds the boundary and shows up here).
    {
      std::vector<const BoundarySample*> ord;
      ord.reserve(plan.validate.size());
      for (const BoundarySample& s : plan.validate) ord.push_back(&s);
      std::sort(ord.begin(), ord.end(), [](const BoundarySample* a, const BoundarySample* b) {
        return a->edge != b->edge ? a->edge < b->edge : a->t < b->t;
      });
      double worst_back = 0.0, prev_th = 0.0;
      bool first = true;
      for (const BoundarySample* s : ord) {
        double th = std::arg(im->F(s->w, nullptr));
        if (!first) {
          double d = th - prev_th;
          while (d < -kPi) d += kTwoPi;
          while (d > kPi) d -= kTwoPi;
          if (d < 0.0) worst_back = std::max(worst_back, -d);
        }
        first = false;
        prev_th = th;
      }
      im->diag.max_arg_backstep = worst_back;
    }

    // Quick witness: invert a few hundred unit-circle samples and measure the
    // distance from the image to the target boundary.
    // Witness: invert unit-circle samples and measure how far the images
    // land from the target boundary. A sample is unresolvable when the
    // inverse is so crowded there that the achieved residual translates to a
    // position uncertainty beyond the tolerance; a small budget of those is
    // tolerated (and excluded from the max) since no double-precision
    // evaluation can localize them.
    auto witness = [&](int samples, double& worst, int& unresolved,
                       std::vector<Complex>* chain) {
      worst = 0.0;
      unresolved = 0;
      Complex prev = im->corr.empty() ? w0 : im->corr.front().second;
      for (int j = 0; j < samples; ++j) {
        Complex z = std::polar(1.0, kTwoPi * j / samples);
        Complex seed = im->seed_from_corr(z * (1.0 - 1e-9));
        auto w = im->newton(z, seed);
        if (!w) w = im->newton(z, prev);
        if (!w) {
          ++unresolved;
          continue;
        }
        Complex dF;
        double r = std::abs(im->F(*w, &dF) - z);
        double uncert = r / std::max(std::abs(dF), 1e-300);
        if (uncert > 0.5 * tol) {
          ++unresolved;
          continue;
        }
        prev = *w;
        if (chain) chain->push_back(*w);
        worst = std::max(worst,
                         distance_to_boundary(target, {w->real(), w->imag()}));
      }
      if (unresolved > samples / 50) worst = std::numeric_limits<double>::infinity();
    };
    double eps_quick;
    int failures;
    witness(512, eps_quick, failures, nullptr);

    if (eps_quick < best_eps) {
      best_eps = eps_quick;
      im_best = im;
    }
    if (eps_quick <= 0.8 * tol) break;
  }

  auto im = im_best;
  im->diag.poly_degree = im->basis.degree;
  im->diag.pole_count = static_cast<int>(im->basis.poles.size());
  im->diag.symmetry_order = im->basis.k;
  im->diag.attempts = tried;

  // Final diagnostics at full resolution.
  {
    double worst = 0.0;
    int unresolved = 0;
    std::vector<Complex> chain;
    chain.reserve(4096);
    Complex prev = im->corr.empty() ? im->w0 : im->corr.front().second;
    for (int j = 0; j < 4096; ++j) {
      Complex z = std::polar(1.0, kTwoPi * j / 4096);
      Complex seed = im->seed_from_corr(z * (1.0 - 1e-9));
      auto w = im->newton(z, seed);
      if (!w) w = im->newton(z, prev);
      if (w) {
        Complex dF;
        double r = std::abs(im->F(*w, &dF) - z);
        if (r / std::max(std::abs(dF), 1e-300) > 0.5 * tol) w.reset();
      }
      if (!w) {
        ++unresolved;
        continue;
      }
      prev = *w;
      chain.push_back(*w);
      worst = std::max(worst, distance_to_boundary(target, {w->real(), w->imag()}));
    }
    im->diag.eps_witness =
        unresolved > 80 ? std::numeric_limits<double>::infinity() : worst;
    im->diag.witness_samples = 4096 - unresolved;

    double epsb = 0.0;
    for (const auto& [th, w] : im->corr)
      epsb = std::max(epsb, std::fabs(std::abs(im->F(w, nullptr)) - 1.0));
    im->diag.eps_boundary = epsb;

    // Univalence: the image of the unit circle must be a simple
    // counterclockwise curve and every circle sample must invert.
    double area2 = 0.0;
    for (std::size_t i = 0; i < chain.size(); ++i) {
      const Complex& a = chain[i];
      const Complex& b = chain[(i + 1) % chain.size()];
      area2 += a.real() * b.imag() - b.real() * a.imag();
    }
    bool ccw = area2 > 0.0;
    bool simple = chain_is_simple(chain, im->basis.scale);
    // A genuine fold backs the argument up by a macroscopic angle; tiny
    // negative increments at the evaluation noise floor are not folds.
    double back_tol = std::max(1e-8, 50.0 * im->accept_r);
    im->diag.univalent = ccw && simple &&
                         im->diag.max_arg_backstep <= back_tol &&
                         im->diag.witness_samples >= 4096 - 80;
  }

  if (!(im->diag.eps_witness <= tol)) {
    std::ostringstream os;
    os << "map construction missed the tolerance: witness error "
       << im->diag.eps_witness << " > " << tol << " after " << tried
       << " attempts (degree " << im->basis.degree << ", poles "
       << im->basis.poles.size() << ", symmetry " << im->basis.k << ")";
    fail(ErrorKind::construction_failure, os.str());
  }
  return ConformalMap(im);
}

}  // namespace steiner
