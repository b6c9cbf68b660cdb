#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "steiner/errors.hpp"

namespace steiner {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double c, Vec2 a) { return {c * a.x, c * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
double norm(Vec2 a);
inline std::complex<double> to_complex(Vec2 a) { return {a.x, a.y}; }

// Simple polygon, counterclockwise, no repeated closing vertex.
// Clockwise input is silently reversed (a notice is emitted); fewer than
// three vertices, repeated consecutive vertices, or self-intersection is
// invalid_input. The simplicity check is O(n^2) and runs for checked
// construction only; pipeline stages that produce provably simple output
// use Polygon::trusted.
class Polygon {
public:
  Polygon() = default;
  explicit Polygon(std::vector<Vec2> vertices);  // validates
  static Polygon trusted(std::vector<Vec2> vertices);

  const std::vector<Vec2>& vertices() const { return verts_; }
  std::size_t size() const { return verts_.size(); }
  const Vec2& operator[](std::size_t i) const { return verts_[i]; }
  bool was_reversed() const { return reversed_; }

private:
  std::vector<Vec2> verts_;
  bool reversed_ = false;
};

// Piecewise-linear slice profile. Breakpoints are sorted; a jump (vertical
// edge) is represented by a doubled abscissa carrying the two one-sided
// values, so linear interpolation between entries is exact.
struct SliceProfile {
  std::vector<double> t;
  std::vector<double> len;

  double integral() const;            // exact under the pl representation
  double value(double x) const;       // interpolated, 0 outside support
  double max_len() const;
};

double area(const Polygon& p);
double perimeter(const Polygon& p);
double diameter(const Polygon& p);

Polygon rotate(const Polygon& p, double phi);
Polygon scale(const Polygon& p, double c);   // c > 0
Polygon translate(const Polygon& p, Vec2 d);

// Vertical slice lengths l(t) = |{y : (t, y) in interior(p)}|.
SliceProfile vertical_slices(const Polygon& p);

// Angular measure |D(t)| of {theta : t e^{i theta} in p} on a radii grid of
// `budget` uniform points plus all vertex radii. Values lie in [0, 2pi].
SliceProfile radial_slices(const Polygon& p, int budget = 512);

// int t*|D(t)| dt for a radial profile.
double radial_area(const SliceProfile& profile);

// Symmetric Hausdorff distance between the two boundaries. Edges are
// densified to steps of at most 1e-3 * max(diameter) before sampling, so the
// reported value is accurate to about that sampling step.
double boundary_hausdorff(const Polygon& a, const Polygon& b);

bool contains_point(const Polygon& p, Vec2 q);           // strict interior
double distance_to_boundary(const Polygon& p, Vec2 q);   // unsigned

struct DecimateOptions {
  double max_deviation = 1e-6;   // cap on vertex->chord distance
  double area_budget = -1.0;     // absolute area change allowed, <0 = off
  bool inward_only = false;      // drop convex vertices only (result inside)
  std::size_t min_vertices = 16;
};

// Vertex-removal simplification (smallest displaced triangle first).
Polygon decimate(const Polygon& p, const DecimateOptions& opts);

Polygon convex_hull(const Polygon& p);

std::uint64_t polygon_hash(const Polygon& p);

std::string polygon_to_json(const Polygon& p);
Polygon polygon_from_json(const std::string& text);
Polygon load_polygon(const std::string& path);
void save_polygon(const Polygon& p, const std::string& path);

}  // namespace steiner
