#include "steiner/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <queue>
#include <sstream>

#include "json.hpp"

namespace steiner {

namespace {

NoticeFn g_notice = nullptr;

double orient(Vec2 a, Vec2 b, Vec2 c) { return cross(b - a, c - a); }

bool on_segment(Vec2 a, Vec2 b, Vec2 q) {
  return std::min(a.x, b.x) <= q.x && q.x <= std::max(a.x, b.x) &&
         std::min(a.y, b.y) <= q.y && q.y <= std::max(a.y, b.y);
}

// True if the closed segments intersect at all.
bool segments_intersect(Vec2 p1, Vec2 p2, Vec2 p3, Vec2 p4) {
  double d1 = orient(p3, p4, p1);
  double d2 = orient(p3, p4, p2);
  double d3 = orient(p1, p2, p3);
  double d4 = orient(p1, p2, p4);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
      ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
    return true;
  if (d1 == 0 && on_segment(p3, p4, p1)) return true;
  if (d2 == 0 && on_segment(p3, p4, p2)) return true;
  if (d3 == 0 && on_segment(p1, p2, p3)) return true;
  if (d4 == 0 && on_segment(p1, p2, p4)) return true;
  return false;
}

double signed_area(const std::vector<Vec2>& v) {
  double s = 0.0;
  for (std::size_t i = 0, n = v.size(); i < n; ++i) {
    const Vec2& a = v[i];
    const Vec2& b = v[(i + 1) % n];
    s += cross(a, b);
  }
  return 0.5 * s;
}

double point_segment_distance(Vec2 q, Vec2 a, Vec2 b) {
  Vec2 ab = b - a;
  double len2 = dot(ab, ab);
  if (len2 == 0.0) return norm(q - a);
  double s = std::clamp(dot(q - a, ab) / len2, 0.0, 1.0);
  return norm(q - (a + s * ab));
}

}  // namespace

void set_notice_handler(NoticeFn fn) { g_notice = fn; }
void notice(const std::string& message) {
  if (g_notice) g_notice(message);
}

double norm(Vec2 a) { return std::hypot(a.x, a.y); }

Polygon::Polygon(std::vector<Vec2> vertices) {
  if (vertices.size() < 3)
    fail(ErrorKind::invalid_input, "polygon needs at least 3 vertices");
  double span = 0.0;
  for (const Vec2& v : vertices)
    span = std::max({span, std::fabs(v.x), std::fabs(v.y)});
  for (std::size_t i = 0, n = vertices.size(); i < n; ++i) {
    Vec2 d = vertices[(i + 1) % n] - vertices[i];
    if (norm(d) <= 1e-15 * std::max(span, 1.0))
      fail(ErrorKind::invalid_input, "repeated consecutive vertex");
  }
  double a2 = signed_area(vertices);
  if (a2 == 0.0) fail(ErrorKind::invalid_input, "polygon has zero area");
  if (a2 < 0.0) {
    std::reverse(vertices.begin(), vertices.end());
    reversed_ = true;
    notice("polygon orientation was clockwise; reversed to counterclockwise");
  }
  const std::size_t n = vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      // skip adjacent edges (they share one endpoint)
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;
      if (segments_intersect(vertices[i], vertices[(i + 1) % n], vertices[j],
                             vertices[(j + 1) % n]))
        fail(ErrorKind::invalid_input, "polygon is self-intersecting");
    }
  }
  verts_ = std::move(vertices);
}

Polygon Polygon::trusted(std::vector<Vec2> vertices) {
  Polygon p;
  p.verts_ = std::move(vertices);
  return p;
}

double SliceProfile::integral() const {
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < t.size(); ++i)
    s += (t[i + 1] - t[i]) * 0.5 * (len[i] + len[i + 1]);
  return s;
}

double SliceProfile::value(double x) const {
  if (t.empty() || x < t.front() || x > t.back()) return 0.0;
  auto it = std::upper_bound(t.begin(), t.end(), x);
  std::size_t hi = std::min<std::size_t>(it - t.begin(), t.size() - 1);
  std::size_t lo = hi == 0 ? 0 : hi - 1;
  double dt = t[hi] - t[lo];
  if (dt <= 0.0) return std::max(len[lo], len[hi]);
  double s = (x - t[lo]) / dt;
  return len[lo] + s * (len[hi] - len[lo]);
}

double SliceProfile::max_len() const {
  double m = 0.0;
  for (double v : len) m = std::max(m, v);
  return m;
}

double area(const Polygon& p) { return std::fabs(signed_area(p.vertices())); }

double perimeter(const Polygon& p) {
  double s = 0.0;
  const auto& v = p.vertices();
  for (std::size_t i = 0, n = v.size(); i < n; ++i)
    s += norm(v[(i + 1) % n] - v[i]);
  return s;
}

Polygon convex_hull(const Polygon& p) {
  std::vector<Vec2> pts = p.vertices();
  std::sort(pts.begin(), pts.end(), [](Vec2 a, Vec2 b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](Vec2 a, Vec2 b) { return a.x == b.x && a.y == b.y; }),
            pts.end());
  std::size_t n = pts.size();
  if (n < 3) return Polygon::trusted(pts);
  std::vector<Vec2> h(2 * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (k >= 2 && orient(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  for (std::size_t i = n - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && orient(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  return Polygon::trusted(std::move(h));
}

double diameter(const Polygon& p) {
  Polygon hull = convex_hull(p);
  const auto& v = hull.vertices();
  std::size_t n = v.size();
  if (n == 1) return 0.0;
  if (n == 2) return norm(v[1] - v[0]);
  // rotating calipers over antipodal pairs
  double best = 0.0;
  std::size_t j = 1;
  for (std::size_t i = 0; i < n; ++i) {
    Vec2 a = v[i], b = v[(i + 1) % n];
    for (;;) {
      std::size_t jn = (j + 1) % n;
      if (std::fabs(cross(b - a, v[jn] - a)) >
          std::fabs(cross(b - a, v[j] - a))) {
        j = jn;
      } else {
        break;
      }
    }
    best = std::max({best, norm(v[j] - a), norm(v[j] - b)});
  }
  return best;
}

Polygon rotate(const Polygon& p, double phi) {
  double c = std::cos(phi), s = std::sin(phi);
  std::vector<Vec2> out;
  out.reserve(p.size());
  for (const Vec2& v : p.vertices())
    out.push_back({c * v.x - s * v.y, s * v.x + c * v.y});
  return Polygon::trusted(std::move(out));
}

Polygon scale(const Polygon& p, double c) {
  if (!(c > 0.0) || !std::isfinite(c))
    fail(ErrorKind::invalid_input, "scale factor must be positive");
  std::vector<Vec2> out;
  out.reserve(p.size());
  for (const Vec2& v : p.vertices()) out.push_back({c * v.x, c * v.y});
  return Polygon::trusted(std::move(out));
}

Polygon translate(const Polygon& p, Vec2 d) {
  std::vector<Vec2> out;
  out.reserve(p.size());
  for (const Vec2& v : p.vertices()) out.push_back(v + d);
  return Polygon::trusted(std::move(out));
}

SliceProfile vertical_slices(const Polygon& p) {
  const auto& v = p.vertices();
  const std::size_t n = v.size();
  std::vector<double> xs;
  xs.reserve(n);
  for (const Vec2& q : v) xs.push_back(q.x);
  std::sort(xs.begin(), xs.end());
  double span = std::max(xs.back() - xs.front(), 1e-300);
  std::vector<double> bp;  // deduplicated breakpoints
  for (double x : xs)
    if (bp.empty() || x - bp.back() > 1e-12 * span) bp.push_back(x);
  const std::size_t m = bp.size();

  // per interval: value and slope of l(t), evaluated at the midpoint
  std::vector<double> left_v(m, 0.0), right_v(m, 0.0);
  struct Crossing {
    double y, slope;
  };
  std::vector<Crossing> cr;
  for (std::size_t i = 0; i + 1 < m; ++i) {
    double mid = 0.5 * (bp[i] + bp[i + 1]);
    cr.clear();
    for (std::size_t e = 0; e < n; ++e) {
      const Vec2& a = v[e];
      const Vec2& b = v[(e + 1) % n];
      if ((a.x - mid) * (b.x - mid) >= 0.0) continue;
      double s = (mid - a.x) / (b.x - a.x);
      cr.push_back({a.y + s * (b.y - a.y), (b.y - a.y) / (b.x - a.x)});
    }
    std::sort(cr.begin(), cr.end(),
              [](const Crossing& a, const Crossing& b) { return a.y < b.y; });
    double val = 0.0, slope = 0.0;
    for (std::size_t k = 0; k + 1 < cr.size(); k += 2) {
      val += cr[k + 1].y - cr[k].y;
      slope += cr[k + 1].slope - cr[k].slope;
    }
    // one-sided limits of l at the interval ends
    right_v[i] = val + slope * (bp[i] - mid);      // limit from the right at bp[i]
    left_v[i + 1] = val + slope * (bp[i + 1] - mid);  // from the left at bp[i+1]
  }

  SliceProfile out;
  double scale_len = 0.0;
  for (std::size_t i = 0; i + 1 < m; ++i)
    scale_len = std::max({scale_len, right_v[i], left_v[i + 1]});
  double tol = 1e-12 * std::max(scale_len, 1e-300);
  for (std::size_t i = 0; i < m; ++i) {
    double a = std::max(0.0, left_v[i]);   // 0 outside the support
    double b = std::max(0.0, right_v[i]);
    if (std::fabs(a - b) <= tol) {
      out.t.push_back(bp[i]);
      out.len.push_back(0.5 * (a + b));
    } else {
      out.t.push_back(bp[i]);
      out.len.push_back(a);
      out.t.push_back(bp[i]);
      out.len.push_back(b);
    }
  }
  return out;
}

SliceProfile radial_slices(const Polygon& p, int budget) {
  if (budget < 64)
    fail(ErrorKind::invalid_input, "radial budget must be at least 64");
  const auto& v = p.vertices();
  const std::size_t n = v.size();
  double rmax = 0.0;
  for (const Vec2& q : v) rmax = std::max(rmax, norm(q));

  const double two_pi = 2.0 * std::numbers::pi;
  std::vector<double> ang;
  // One evaluation of the angular measure at radius t. ok is cleared when
  // the crossing set looks corrupted by rounding (odd parity, or no
  // crossings but inconsistent probes).
  auto measure_once = [&](double t, bool& ok) -> double {
    ok = true;
    if (t <= 1e-14 * rmax)
      return contains_point(p, {0.0, 0.0}) ? two_pi : 0.0;
    ang.clear();
    for (std::size_t e = 0; e < n; ++e) {
      Vec2 a = v[e], b = v[(e + 1) % n];
      Vec2 d = b - a;
      double A = dot(d, d);
      double B = 2.0 * dot(a, d);
      double C = dot(a, a) - t * t;
      double disc = B * B - 4.0 * A * C;
      if (disc <= 0.0 || A == 0.0) continue;
      double sq = std::sqrt(disc);
      for (double s : {(-B - sq) / (2.0 * A), (-B + sq) / (2.0 * A)}) {
        if (s < 0.0 || s >= 1.0) continue;
        Vec2 q = a + s * d;
        double th = std::atan2(q.y, q.x);
        if (th < 0.0) th += two_pi;
        ang.push_back(th);
      }
    }
    std::sort(ang.begin(), ang.end());
    ang.erase(std::unique(ang.begin(), ang.end(),
                          [](double a, double b) {
                            return std::fabs(a - b) <= 1e-13;
                          }),
              ang.end());
    if (ang.empty()) {
      // no crossings: the circle should be entirely inside or outside
      int inside = 0;
      for (int k = 0; k < 4; ++k) {
        double th = 0.1234567 + 0.5 * std::numbers::pi * k;
        if (contains_point(p, {t * std::cos(th), t * std::sin(th)})) ++inside;
      }
      if (inside != 0 && inside != 4) ok = false;
      return inside >= 2 ? two_pi : 0.0;
    }
    if (ang.size() % 2 != 0) ok = false;  // a crossing was probably lost
    double measure = 0.0;
    for (std::size_t k = 0; k < ang.size(); ++k) {
      double a0 = ang[k];
      double a1 = (k + 1 < ang.size()) ? ang[k + 1] : ang[0] + two_pi;
      double mid = 0.5 * (a0 + a1);
      Vec2 probe = {t * std::cos(mid), t * std::sin(mid)};
      if (contains_point(p, probe)) measure += a1 - a0;
    }
    return std::min(measure, two_pi);
  };
  auto measure_at = [&](double t) -> double {
    // Exact-contact radii can lose crossings to rounding; retry at slightly
    // perturbed radii until the evaluation is self-consistent.
    static constexpr double kNudge[] = {0.0, 3e-8, -3e-8, 1e-7};
    bool ok = false;
    double m = 0.0;
    for (double nudge : kNudge) {
      m = measure_once(t * (1.0 + nudge), ok);
      if (ok) return m;
    }
    return m;
  };

  struct Radius {
    double t;
    bool at_vertex;
  };
  std::vector<Radius> radii;
  radii.reserve(budget + n);
  for (int i = 0; i < budget; ++i)
    radii.push_back({rmax * double(i) / double(budget - 1), false});
  for (const Vec2& q : v) radii.push_back({norm(q), true});
  std::sort(radii.begin(), radii.end(),
            [](const Radius& a, const Radius& b) { return a.t < b.t; });
  std::vector<Radius> grid;
  for (const Radius& r : radii) {
    if (!grid.empty() && r.t - grid.back().t <= 1e-14 * rmax)
      grid.back().at_vertex = grid.back().at_vertex || r.at_vertex;
    else
      grid.push_back(r);
  }

  struct Entry {
    double t;
    double len;
  };
  std::vector<Entry> entries;
  entries.reserve(grid.size() + n);
  for (const Radius& r : grid) {
    if (r.at_vertex && r.t > 1e-14 * rmax) {
      // The circle through a vertex is an ill-posed crossing case, and a
      // boundary arc can lie exactly on it (the rim of an annular sector,
      // say), where the measure genuinely jumps. Sample just inside and
      // just outside instead, at their true radii.
      entries.push_back({r.t * (1.0 - 1e-6), measure_at(r.t * (1.0 - 1e-6))});
      if (r.t >= rmax * (1.0 - 1e-14))
        entries.push_back({r.t, 0.0});  // nothing at or beyond the outermost vertex
      else
        entries.push_back({r.t * (1.0 + 1e-6), measure_at(r.t * (1.0 + 1e-6))});
    } else {
      entries.push_back({r.t, measure_at(r.t)});
    }
  }

  // The measure can change steeply between grid radii (e.g. it collapses
  // over the sagitta band where a circle leaves a polygonal rim through the
  // chords). Refine such intervals by bisection so the profile follows the
  // transition instead of chording across it. The floor stays above the
  // vertex-radius flanks and above the precision limit of |a|^2 - t^2.
  std::vector<Entry> extra;
  std::vector<std::pair<Entry, Entry>> work;
  for (std::size_t i = 0; i + 1 < entries.size(); ++i)
    work.push_back({entries[i], entries[i + 1]});
  const std::size_t extra_cap = 32 * std::size_t(budget);
  while (!work.empty() && extra.size() < extra_cap) {
    auto [a, b] = work.back();
    work.pop_back();
    if (b.t - a.t <= std::max(1e-7 * rmax, 2.5e-6 * a.t)) continue;
    if (std::fabs(b.len - a.len) <= 0.05) continue;
    double tm = 0.5 * (a.t + b.t);
    Entry mid{tm, measure_at(tm)};
    extra.push_back(mid);
    work.push_back({a, mid});
    work.push_back({mid, b});
  }
  entries.insert(entries.end(), extra.begin(), extra.end());
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.t < b.t; });

  SliceProfile out;
  out.t.reserve(entries.size());
  out.len.reserve(entries.size());
  for (const Entry& e : entries) {
    out.t.push_back(e.t);
    out.len.push_back(e.len);
  }
  return out;
}

double radial_area(const SliceProfile& profile) {
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < profile.t.size(); ++i) {
    double t0 = profile.t[i], t1 = profile.t[i + 1];
    s += (t1 - t0) * 0.5 * (t0 * profile.len[i] + t1 * profile.len[i + 1]);
  }
  return s;
}

bool contains_point(const Polygon& p, Vec2 q) {
  const auto& v = p.vertices();
  bool inside = false;
  for (std::size_t i = 0, n = v.size(); i < n; ++i) {
    const Vec2& a = v[i];
    const Vec2& b = v[(i + 1) % n];
    if ((a.y > q.y) != (b.y > q.y)) {
      double xcross = a.x + (q.y - a.y) / (b.y - a.y) * (b.x - a.x);
      if (q.x < xcross) inside = !inside;
    }
  }
  return inside;
}

double distance_to_boundary(const Polygon& p, Vec2 q) {
  const auto& v = p.vertices();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0, n = v.size(); i < n; ++i)
    best = std::min(best, point_segment_distance(q, v[i], v[(i + 1) % n]));
  return best;
}

double boundary_hausdorff(const Polygon& a, const Polygon& b) {
  double step = 1e-3 * std::max(diameter(a), diameter(b));
  if (!(step > 0.0)) step = 1e-9;
  auto one_sided = [step](const Polygon& from, const Polygon& to) {
    const auto& v = from.vertices();
    double worst = 0.0;
    for (std::size_t i = 0, n = v.size(); i < n; ++i) {
      Vec2 p0 = v[i], p1 = v[(i + 1) % n];
      double len = norm(p1 - p0);
      int sub = std::max(1, int(std::ceil(len / step)));
      for (int k = 0; k <= sub; ++k) {
        Vec2 s = p0 + (double(k) / sub) * (p1 - p0);
        worst = std::max(worst, distance_to_boundary(to, s));
      }
    }
    return worst;
  };
  return std::max(one_sided(a, b), one_sided(b, a));
}

Polygon decimate(const Polygon& p, const DecimateOptions& opts) {
  const auto& v = p.vertices();
  std::size_t n = v.size();
  if (n <= opts.min_vertices) return p;
  std::vector<std::size_t> prev(n), next(n);
  std::vector<bool> alive(n, true);
  for (std::size_t i = 0; i < n; ++i) {
    prev[i] = (i + n - 1) % n;
    next[i] = (i + 1) % n;
  }
  struct Cand {
    double tri_area;
    std::size_t idx;
    std::uint64_t stamp;
  };
  auto cmp = [](const Cand& a, const Cand& b) { return a.tri_area > b.tri_area; };
  std::priority_queue<Cand, std::vector<Cand>, decltype(cmp)> heap(cmp);
  std::vector<std::uint64_t> stamp(n, 0);

  auto eligible = [&](std::size_t i, double& tri, double& dev) {
    Vec2 a = v[prev[i]], m = v[i], b = v[next[i]];
    double cr = cross(m - a, b - m);
    if (opts.inward_only && cr <= 0.0) return false;  // keep concave corners
    tri = 0.5 * std::fabs(cr);
    dev = point_segment_distance(m, a, b);
    return dev <= opts.max_deviation;
  };
  auto push = [&](std::size_t i) {
    double tri, dev;
    if (eligible(i, tri, dev)) heap.push({tri, i, stamp[i]});
  };
  for (std::size_t i = 0; i < n; ++i) push(i);

  std::size_t count = n;
  double spent = 0.0;
  while (!heap.empty() && count > opts.min_vertices) {
    Cand c = heap.top();
    heap.pop();
    if (!alive[c.idx] || stamp[c.idx] != c.stamp) continue;
    double tri, dev;
    if (!eligible(c.idx, tri, dev)) continue;
    if (opts.area_budget >= 0.0 && spent + tri > opts.area_budget) break;
    spent += tri;
    alive[c.idx] = false;
    --count;
    std::size_t a = prev[c.idx], b = next[c.idx];
    next[a] = b;
    prev[b] = a;
    ++stamp[a];
    ++stamp[b];
    push(a);
    push(b);
  }
  std::vector<Vec2> out;
  out.reserve(count);
  std::size_t start = 0;
  while (!alive[start]) ++start;
  for (std::size_t i = start; out.size() < count; i = next[i]) out.push_back(v[i]);
  return Polygon::trusted(std::move(out));
}

std::uint64_t polygon_hash(const Polygon& p) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const char* s) {
    for (; *s; ++s) {
      h ^= std::uint64_t(static_cast<unsigned char>(*s));
      h *= 1099511628211ull;
    }
  };
  char buf[64];
  for (const Vec2& v : p.vertices()) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g;", v.x, v.y);
    mix(buf);
  }
  return h;
}

std::string polygon_to_json(const Polygon& p) {
  std::string out = "[";
  char buf[64];
  for (std::size_t i = 0; i < p.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "[%.17g,%.17g]", p[i].x, p[i].y);
    if (i) out += ",";
    out += buf;
  }
  out += "]";
  return out;
}

Polygon polygon_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    fail(ErrorKind::invalid_input, std::string("bad polygon json: ") + e.what());
  }
  if (!j.is_array())
    fail(ErrorKind::invalid_input, "polygon json must be an array of [x,y]");
  std::vector<Vec2> pts;
  pts.reserve(j.size());
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
      fail(ErrorKind::invalid_input, "polygon json must be an array of [x,y]");
    pts.push_back({e[0].get<double>(), e[1].get<double>()});
  }
  return Polygon(std::move(pts));
}

Polygon load_polygon(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::invalid_input, "cannot open polygon file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return polygon_from_json(ss.str());
}

void save_polygon(const Polygon& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::invalid_input, "cannot write polygon file: " + path);
  out << polygon_to_json(p) << "\n";
}

}  // namespace steiner
