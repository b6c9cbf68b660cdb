#pragma once

#include "steiner/geometry.hpp"

namespace steiner {

// Steiner symmetrization about the x-axis: every vertical slice is recentered
// into {(t, y) : |y| < l(t)/2}. Exact on polygons (the slice profile is
// piecewise linear), so area is preserved to rounding; perimeter and diameter
// never increase. Slices of length zero strictly inside the support are
// thickened to 1e-9 so the result stays simple.
Polygon steiner_symmetrize(const Polygon& p);

struct CircularSymmetrization {
  Polygon domain;
  // Set when a full-circle radial band reappears outside the central core;
  // the emitted boundary then nearly self-touches along the negative axis
  // and downstream code should treat the polygon as approximate only.
  bool degraded = false;
};

// Circular symmetrization about the positive x-axis: the angular measure
// |D(t)| of each circle |z| = t is recentered into the arc |arg z| < |D(t)|/2.
// The boundary curve t -> t e^{+- i |D(t)|/2} is sampled on radial_budget
// uniform radii plus all vertex radii. Radii with full measure adjacent to
// the origin are interior (the result contains 0 iff p does).
CircularSymmetrization circular_symmetrize(const Polygon& p,
                                           int radial_budget = 512);

// Image of p under w = e^z, as a polygon through densified boundary points
// (arc-length step <= min(1e-2, perimeter/boundary_budget)). Requires every
// vertical slice measure to be < 2*pi; injective on the closure when p is
// Steiner-symmetric.
Polygon exp_domain(const Polygon& p, int boundary_budget = 4096);

}  // namespace steiner
