#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "steiner/conformal.hpp"
#include "steiner/geometry.hpp"

namespace steiner {

// Iterated rotate -> Steiner-symmetrize -> shrink flow on polygons.
//
// The working family is {f univalent on the unit disk, f(0) = 0,
// f'(0) >= 1, ||f||_H2 >= alpha}. One step rotates the domain about the
// origin, symmetrizes about the x-axis, and (in shrunk mode) rescales by the
// largest factor that keeps the Riemann map of the result inside the family:
//
//     c = max(1 / g'(0), alpha / ||g||_2),
//
// computed from a freshly built map g of the symmetrized domain. Iterating
// drives the domain toward a centered disk while the running product of the
// shrink factors stays in (0, 1].

// Outcome of one step.
struct ShrinkRecord {
  double phi = 0.0;             // rotation angle applied before symmetrizing
  double c_phi = 1.0;           // shrink factor, in (0, 1]
  double g_deriv0 = 0.0;        // g'(0) of the symmetrized (pre-shrink) map
  Interval h2_norm;             // ||g||_2 enclosure of the same map
  double diameter_after = 0.0;  // diameter of the stored domain after the step
};

enum class DeformMode {
  shrunk,    // apply the factor: the iterates stay inside the family
  unshrunk,  // skip the scaling; factors are still computed and recorded
};

// Deterministic rule producing the rotation angle of each step.
struct AngleStrategy {
  enum class Kind { fixed_list, uniform_random, golden_angle, greedy_diameter };

  Kind kind = Kind::golden_angle;
  std::vector<double> angles;  // fixed_list: consumed in order, run ends after
  std::uint64_t seed = 0;      // uniform_random
  int grid = 64;               // greedy_diameter: coarse angles in [0, pi)

  static AngleStrategy fixed(std::vector<double> list);
  static AngleStrategy random(std::uint64_t seed);
  static AngleStrategy golden();
  static AngleStrategy greedy(int grid = 64);
};

struct StopRule {
  int max_steps = 200;
  // Stop once the boundary Hausdorff distance to the centered disk of equal
  // area drops below this.
  double hausdorff_tol = 1e-2;
  // Optional second stop: relative isoperimetric deficit
  // perimeter / (2 sqrt(pi area)) - 1 below this. <= 0 disables it.
  double isoperimetric_tol = 0.0;
  // Greedy runs report stagnation (not an error) after 20 consecutive steps
  // whose diameter reduction stays below this.
  double stagnation_tol = 1e-10;
};

struct DeformationState {
  double alpha = 1.0;
  // Lower bound imposed on f'(0) by the working family. The default 1.0 is
  // the standard normalization; smaller values relax the derivative floor so
  // the shrink rule becomes c = max(deriv_floor / g'(0), alpha / ||g||_2),
  // letting the flow contract to the norm-bound disk of radius alpha even
  // when alpha < 1.
  double deriv_floor = 1.0;
  Polygon current;
  int step = 0;
  std::vector<ShrinkRecord> history;
  double product = 1.0;  // running product of recorded shrink factors
  DeformMode mode = DeformMode::shrunk;
  // Domain after every step; snapshots[0] is the initial polygon.
  std::vector<Polygon> snapshots;
  // Construction tolerance for the per-step maps. Intermediate domains have
  // many shallow corners, which caps the cheaply reachable boundary accuracy
  // near 1e-4; interior quantities (g'(0), ||g||_2) converge much faster
  // than the boundary witness, so this default loses nothing visible to the
  // shrink factors. A step whose ||g||_2 enclosure is wider than 1e-3
  // retries once at a tighter tolerance, and a failed construction retries
  // at 3x and 10x before giving up.
  double map_tol = 3e-4;
  // Vertex budget: symmetrization roughly doubles the vertex count, so the
  // domain is resampled (and rescaled back to exact area) when it grows
  // past this. <= 0 disables resampling.
  int vertex_budget = 280;
};

DeformationState make_deformation_state(const Polygon& p0, double alpha,
                                        DeformMode mode,
                                        double map_tol = 3e-4,
                                        double deriv_floor = 1.0);

// One step with a caller-chosen angle. Throws precondition_violation when 0
// is not strictly inside, or when the computed factor exceeds 1 by more than
// the numerical floor (the domain is outside the working family; see
// family_rescale). Map construction failures surface as step_failure with
// the builder's message attached.
DeformationState deform_step(DeformationState s, double phi);

struct RunVerdicts {
  bool converged = false;
  bool stagnated = false;  // greedy diameter stalled 20 steps before the tol
  double final_hausdorff = 0.0;  // to the equal-area centered disk
  double target_radius = 0.0;    // sqrt(area(final) / pi)
  int steps = 0;
  std::string note;
};

struct DeformationRun {
  DeformationState state;
  RunVerdicts verdicts;
};

// Runs deform_step under the angle strategy until a stop fires. When
// telemetry_path is non-empty, appends one JSON line per step: step, phi,
// c_phi, g_deriv0, h2 interval, area, perimeter, diameter and the Hausdorff
// distance to the equal-area centered disk.
DeformationRun run_deformation(const Polygon& p0, double alpha,
                               const AngleStrategy& strategy,
                               const StopRule& stop,
                               DeformMode mode = DeformMode::unshrunk,
                               const std::string& telemetry_path = "",
                               double map_tol = 3e-4);

// Smallest upscale putting the domain's map inside the working family:
// scale(p, s) with s = max(1, 1/f'(0), alpha/||f||_2). Returns p unchanged
// when it already qualifies.
Polygon family_rescale(const Polygon& p, double alpha, double map_tol = 1e-5);

// Lower bound for the product of shrink factors over any infinite run:
// max{1, alpha} / sqrt(area(p0) / pi). The square root equals the radius of
// the equal-area disk; see green_area_quadrature for the boundary-integral
// form this is the closed-form evaluation of.
double product_lower_bound(const Polygon& p0, double alpha);

// Quadrature of the boundary-integral form of the same quantity:
//   integral over [0, 2pi] of Re f(re^it) * Re(e^it f'(re^it)) dt,
// which tends to area(target)/1 * pi/pi = area as r -> 1 when f(0) = 0
// (equals pi * sum n |a_n|^2 r^(2n-1)). Used as an independent cross-check
// of product_lower_bound at r close to 1.
double green_area_quadrature(const ConformalMap& map, double r,
                             int nodes = 4096);

// Runs the shrunk flow, replays the same angles unshrunk, and compares the
// shrunk product against max{1/G'(0), alpha/||G||_2} of the terminal
// unshrunk map G. The two runs share no state, so agreement is a genuine
// cross-check of both.
struct ProductIdentity {
  double product = 1.0;         // from the shrunk run
  double identity_value = 1.0;  // from the terminal unshrunk map
  double residual = 0.0;        // |product - identity_value|
  double lower_bound = 0.0;     // product_lower_bound(p0, alpha)
  double terminal_deriv0 = 0.0;  // G'(0)
  Interval terminal_h2;          // ||G||_2
  int steps = 0;
};

ProductIdentity product_identity_check(const Polygon& p0, double alpha,
                                       const AngleStrategy& strategy,
                                       int steps, double map_tol = 3e-4);

// Bookkeeping over the recorded shrink factors: partial sums of (1 - c_n)
// (monotone non-decreasing), their increments, and the log-form sum
// sum log(1/c_n), which equals -log(product) identically.
struct BlaschkeSummary {
  std::vector<double> partial_sums;  // partial_sums[k] = sum_{n<=k+1} (1-c_n)
  double last_increment = 0.0;       // 1 - c_N
  double log_sum = 0.0;              // sum log(1/c_n)
  bool bounded = false;              // last increment below 1e-9
};

// Requires at least 10 recorded steps.
BlaschkeSummary blaschke_condition(const std::vector<ShrinkRecord>& history);

// Finite product prod (z - c_n) / (1 - c_n z) over the given zeros, all of
// which must lie in (0, 1]; |z| <= 0.99. Every factor is a disk
// automorphism, so |value| <= 1.
struct BlaschkeValue {
  std::complex<double> value;
  double one_minus_sum = 0.0;  // sum (1 - c_n) over the prefix
};

BlaschkeValue blaschke_eval(const std::vector<double>& zeros,
                            std::complex<double> z);

// Bound on the relative drift of a Blaschke partial product when factors
// with total deviation sum (1 - c_n) = tail_sum are appended: each factor
// differs from -1 by at most (1 - c) (1 + |z|) / (1 - |z|), so up to the
// sign flip per factor the product moves by at most
// expm1(tail_sum * (1 + |z|) / (1 - |z|)) relatively.
double blaschke_tail_bound(double tail_sum, std::complex<double> z);

// Kernel-convergence diagnostics over a sequence of domain snapshots.
struct KernelVerdict {
  int snapshots = 0;
  double initial_inradius = 0.0;  // dist(0, boundary of snapshots[0])
  double min_inradius = 0.0;      // min over all snapshots
  bool common_disk = false;       // every snapshot keeps the initial inradius
  // max over the last quarter of snapshots of the boundary Hausdorff
  // distance to the final snapshot; pairwise tail distances are at most
  // twice this.
  double cauchy_modulus = 0.0;
  bool cauchy = false;  // cauchy_modulus < tol
};

// Requires at least 2 snapshots, all containing 0 strictly.
KernelVerdict kernel_convergence_probe(const std::vector<Polygon>& snapshots,
                                       double tol = 1e-2);
KernelVerdict kernel_convergence_probe(const DeformationState& state,
                                       double tol = 1e-2);

}  // namespace steiner
