#include "steiner/symmetrize.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace steiner {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Join a lower chain (t ascending, y <= 0) with the mirrored upper chain,
// dropping duplicate joints and straight-through collinear vertices.
Polygon close_symmetric_chain(const std::vector<Vec2>& lower, double scale) {
  std::vector<Vec2> ring;
  ring.reserve(2 * lower.size());
  for (const Vec2& v : lower) ring.push_back(v);
  for (auto it = lower.rbegin(); it != lower.rend(); ++it)
    ring.push_back({it->x, -it->y});
  double tol = 1e-12 * std::max(scale, 1e-300);
  std::vector<Vec2> out;
  for (const Vec2& v : ring)
    if (out.empty() || norm(v - out.back()) > tol) out.push_back(v);
  while (out.size() > 1 && norm(out.back() - out.front()) <= tol)
    out.pop_back();
  // drop vertices that continue straight through
  std::vector<Vec2> clean;
  clean.reserve(out.size());
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) {
    Vec2 a = out[(i + n - 1) % n], b = out[i], c = out[(i + 1) % n];
    if (cross(b - a, c - b) == 0.0 && dot(b - a, c - b) > 0.0) continue;
    clean.push_back(b);
  }
  if (clean.size() < 3)
    fail(ErrorKind::construction_failure,
         "symmetrized region degenerated to fewer than 3 vertices");
  return Polygon::trusted(std::move(clean));
}

}  // namespace

Polygon steiner_symmetrize(const Polygon& p) {
  SliceProfile prof = vertical_slices(p);
  if (prof.t.empty() || prof.max_len() <= 0.0)
    fail(ErrorKind::invalid_input, "slice profile has empty support");
  const double t0 = prof.t.front(), t1 = prof.t.back();
  std::vector<Vec2> lower;
  lower.reserve(prof.t.size());
  for (std::size_t i = 0; i < prof.t.size(); ++i) {
    double len = prof.len[i];
    if (len < 1e-9 && prof.t[i] > t0 && prof.t[i] < t1)
      len = 1e-9;  // pinch point: keep the output simple
    lower.push_back({prof.t[i], -0.5 * len});
  }
  return close_symmetric_chain(lower, std::max(t1 - t0, prof.max_len()));
}

CircularSymmetrization circular_symmetrize(const Polygon& p,
                                           int radial_budget) {
  SliceProfile prof = radial_slices(p, radial_budget);
  const std::size_t m = prof.t.size();
  const double rmax = prof.t.back();
  const double full_tol = 1e-9;

  // Maximal run of full-measure circles starting at the origin: that disk is
  // interior, so the boundary starts at its rim (angle pi).
  std::size_t start = 0;
  if (prof.len[0] >= kTwoPi - full_tol) {
    while (start + 1 < m && prof.len[start + 1] >= kTwoPi - full_tol) ++start;
  } else {
    // Skip the empty prefix below the inner radius, keeping one zero-measure
    // entry as the inner tip of the domain.
    std::size_t first_pos = 0;
    while (first_pos < m && prof.len[first_pos] <= 0.0) ++first_pos;
    if (first_pos == m)
      fail(ErrorKind::invalid_input, "radial slice profile has empty support");
    if (first_pos > 0) start = first_pos - 1;
  }

  CircularSymmetrization result;
  std::vector<Vec2> lower;
  lower.reserve(m - start);
  double prev_t = -1.0, prev_half = 0.0;
  for (std::size_t i = start; i < m; ++i) {
    double half;
    if (prof.len[i] >= kTwoPi - full_tol) {
      if (i == start) {
        half = std::numbers::pi;  // rim of the interior core
      } else {
        // a full band detached from the core: boundary nearly self-touches
        result.degraded = true;
        half = std::numbers::pi - 5e-10;
      }
    } else {
      half = 0.5 * prof.len[i];
    }
    if (prev_t >= 0.0 && prof.t[i] - prev_t <= 1e-5 * prof.t[i] &&
        std::fabs(half - prev_half) > 0.02) {
      // measure jump: the boundary runs along the circle |z| ~ t between the
      // two half-angles; trace that wall as a fine polyline
      double tw = 0.5 * (prev_t + prof.t[i]);
      int steps = int(std::ceil(std::fabs(half - prev_half) / 0.02));
      for (int k = 1; k < steps; ++k) {
        double a = prev_half + (half - prev_half) * double(k) / steps;
        lower.push_back({tw * std::cos(a), -tw * std::sin(a)});
      }
    }
    lower.push_back({prof.t[i] * std::cos(half), -prof.t[i] * std::sin(half)});
    prev_t = prof.t[i];
    prev_half = half;
  }
  result.domain = close_symmetric_chain(lower, rmax);
  return result;
}

Polygon exp_domain(const Polygon& p, int boundary_budget) {
  if (boundary_budget < 16)
    fail(ErrorKind::invalid_input, "boundary budget must be at least 16");
  SliceProfile prof = vertical_slices(p);
  if (prof.max_len() >= kTwoPi)
    fail(ErrorKind::precondition_violation,
         "a vertical slice has measure >= 2*pi; exp would not be injective");
  const double step = std::min(1e-2, perimeter(p) / boundary_budget);
  const auto& v = p.vertices();
  const std::size_t n = v.size();
  std::vector<Vec2> out;
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Vec2 a = v[i], b = v[(i + 1) % n];
    int sub = std::max(1, int(std::ceil(norm(b - a) / step)));
    for (int k = 0; k < sub; ++k) {
      Vec2 z = a + (double(k) / sub) * (b - a);
      std::complex<double> w = std::exp(to_complex(z));
      out.push_back({w.real(), w.imag()});
      scale = std::max(scale, std::fabs(w.real()) + std::fabs(w.imag()));
    }
  }
  double tol = 1e-14 * scale;
  std::vector<Vec2> clean;
  clean.reserve(out.size());
  for (const Vec2& w : out)
    if (clean.empty() || norm(w - clean.back()) > tol) clean.push_back(w);
  while (clean.size() > 1 && norm(clean.back() - clean.front()) <= tol)
    clean.pop_back();
  if (clean.size() < 3)
    fail(ErrorKind::construction_failure, "exp image degenerated");
  return Polygon::trusted(std::move(clean));
}

}  // namespace steiner
