#include "steiner/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <utility>

#include "steiner/errors.hpp"
#include "steiner/symmetrize.hpp"

namespace steiner {

namespace {

constexpr double kPi = std::numbers::pi;

// Numerical headroom on the in-family gate c <= 1: the factor is built from
// g'(0) and a ||g||_2 midpoint whose combined error at the default map
// tolerance stays well under this.
constexpr double kFamilySlack = 2e-3;

Polygon regular_polygon(int n, double radius) {
  std::vector<Vec2> v;
  v.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double t = 2.0 * kPi * i / n;
    v.push_back({radius * std::cos(t), radius * std::sin(t)});
  }
  return Polygon::trusted(std::move(v));
}

// Resamples a symmetrized domain back under the vertex budget, then rescales
// about the origin so its area equals target_area exactly. Decimation is
// followed by a fresh symmetrization so the result stays mirror-symmetric.
Polygon compact_symmetric(Polygon p, int budget, double target_area) {
  if (budget > 0 && static_cast<int>(p.size()) > budget) {
    const double diam = diameter(p);
    double dev = 1e-8 * diam;
    const double dev_cap = 3e-5 * diam;
    Polygon slim = p;
    while (static_cast<int>(slim.size()) > budget / 2 && dev <= dev_cap) {
      DecimateOptions opts;
      opts.max_deviation = dev;
      opts.min_vertices = 64;
      slim = decimate(p, opts);
      dev *= 2.0;
    }
    p = steiner_symmetrize(slim);
  }
  const double a = area(p);
  const double s = std::sqrt(target_area / a);
  if (std::abs(s - 1.0) > 1e-15) p = scale(p, s);
  return p;
}

double pick_greedy_angle(const Polygon& current, int grid) {
  auto score = [&](double phi) {
    return diameter(steiner_symmetrize(rotate(current, phi)));
  };
  const int g = std::max(4, grid);
  double best_phi = 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < g; ++i) {
    double phi = kPi * i / g;
    double d = score(phi);
    if (d < best) {
      best = d;
      best_phi = phi;
    }
  }
  // Golden-section refinement around the best grid cell.
  const double ratio = 0.6180339887498949;
  double lo = best_phi - kPi / g;
  double hi = best_phi + kPi / g;
  double x1 = hi - ratio * (hi - lo);
  double x2 = lo + ratio * (hi - lo);
  double f1 = score(x1);
  double f2 = score(x2);
  while (hi - lo > 1e-4) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - ratio * (hi - lo);
      f1 = score(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + ratio * (hi - lo);
      f2 = score(x2);
    }
  }
  return 0.5 * (lo + hi);
}

double pick_angle(const AngleStrategy& strategy, const DeformationState& st,
                  std::mt19937_64& rng) {
  switch (strategy.kind) {
    case AngleStrategy::Kind::fixed_list: {
      std::size_t i = static_cast<std::size_t>(st.step);
      if (i >= strategy.angles.size())
        fail(ErrorKind::invalid_input, "angle list exhausted");
      return strategy.angles[i];
    }
    case AngleStrategy::Kind::uniform_random:
      // 53-bit mantissa draw; independent of library distribution internals.
      return kPi * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
    case AngleStrategy::Kind::golden_angle:
      return std::fmod((st.step + 1) * 0.6180339887498949 * kPi, kPi);
    case AngleStrategy::Kind::greedy_diameter:
      return pick_greedy_angle(st.current, strategy.grid);
  }
  fail(ErrorKind::invalid_input, "unknown angle strategy");
}

double equal_area_radius(double a) { return std::sqrt(a / kPi); }

// Map construction with an upward tolerance ladder. Deformation iterates
// carry many shallow corners, which can stall the builder just above a tight
// request while a mildly looser one succeeds with the same interior
// accuracy. Tries tol, 3 tol, 10 tol (clamped to the builder's ceiling) and
// rethrows the last failure.
ConformalMap build_map_laddered(const Polygon& p, double tol) {
  const double ceiling = 1e-2;
  double t = tol;
  for (int attempt = 0;; ++attempt) {
    try {
      return build_map(p, {0.0, 0.0}, std::min(t, ceiling));
    } catch (const Error&) {
      if (attempt >= 2 || t >= ceiling) throw;
      t *= (attempt == 0) ? 3.0 : (10.0 / 3.0);
    }
  }
}

double hausdorff_to_disk(const Polygon& p, double radius) {
  return boundary_hausdorff(p, regular_polygon(512, radius));
}

}  // namespace

AngleStrategy AngleStrategy::fixed(std::vector<double> list) {
  AngleStrategy s;
  s.kind = Kind::fixed_list;
  s.angles = std::move(list);
  return s;
}

AngleStrategy AngleStrategy::random(std::uint64_t seed) {
  AngleStrategy s;
  s.kind = Kind::uniform_random;
  s.seed = seed;
  return s;
}

AngleStrategy AngleStrategy::golden() {
  AngleStrategy s;
  s.kind = Kind::golden_angle;
  return s;
}

AngleStrategy AngleStrategy::greedy(int grid) {
  if (grid < 4) fail(ErrorKind::invalid_input, "greedy grid must be >= 4");
  AngleStrategy s;
  s.kind = Kind::greedy_diameter;
  s.grid = grid;
  return s;
}

DeformationState make_deformation_state(const Polygon& p0, double alpha,
                                        DeformMode mode, double map_tol) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha))
    fail(ErrorKind::invalid_input, "alpha must be a finite value >= 0");
  if (!contains_point(p0, {0.0, 0.0}))
    fail(ErrorKind::precondition_violation,
         "deformation requires 0 strictly inside the starting domain");
  DeformationState st;
  st.alpha = alpha;
  st.current = p0;
  st.mode = mode;
  st.map_tol = map_tol;
  st.snapshots.push_back(p0);
  return st;
}

DeformationState deform_step(DeformationState s, double phi) {
  if (s.current.size() < 3)
    fail(ErrorKind::precondition_violation, "deform_step: state has no domain");
  if (!contains_point(s.current, {0.0, 0.0}))
    fail(ErrorKind::precondition_violation,
         "deform_step: 0 must be strictly inside the domain");

  const double target_area = area(s.current);
  Polygon symd = steiner_symmetrize(rotate(s.current, phi));
  symd = compact_symmetric(std::move(symd), s.vertex_budget, target_area);

  std::optional<ConformalMap> map;
  try {
    map.emplace(build_map_laddered(symd, s.map_tol));
  } catch (const Error& e) {
    fail(ErrorKind::step_failure,
         "deform_step " + std::to_string(s.step + 1) +
             ": map construction failed: " + e.what());
  }
  Interval h2 = map->hardy_norm(2.0);
  if (h2.spread() >= 1e-3) {
    // One refinement at a tighter tolerance; keep the first map if the
    // retry fails outright.
    try {
      ConformalMap refined =
          build_map(symd, {0.0, 0.0}, std::max(1e-8, s.map_tol / 3.0));
      map = refined;
      h2 = map->hardy_norm(2.0);
    } catch (const Error&) {
    }
  }

  const double g0 = map->deriv0();
  const double c_raw = std::max(1.0 / g0, s.alpha / h2.mid());
  if (c_raw > 1.0 + kFamilySlack) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "deform_step: shrink factor %.6g exceeds 1; the domain maps "
                  "outside the working family (f'(0) >= 1, ||f||_2 >= alpha); "
                  "apply family_rescale first",
                  c_raw);
    fail(ErrorKind::precondition_violation, buf);
  }
  const double c = std::min(c_raw, 1.0);

  Polygon next = (s.mode == DeformMode::shrunk) ? scale(symd, c)
                                                : std::move(symd);
  ShrinkRecord rec;
  rec.phi = phi;
  rec.c_phi = c;
  rec.g_deriv0 = g0;
  rec.h2_norm = h2;
  rec.diameter_after = diameter(next);

  s.step += 1;
  s.product *= c;
  s.history.push_back(rec);
  s.current = std::move(next);
  s.snapshots.push_back(s.current);
  return s;
}

DeformationRun run_deformation(const Polygon& p0, double alpha,
                               const AngleStrategy& strategy,
                               const StopRule& stop, DeformMode mode,
                               const std::string& telemetry_path,
                               double map_tol) {
  if (stop.max_steps < 0)
    fail(ErrorKind::invalid_input, "stop.max_steps must be >= 0");
  if (!(stop.hausdorff_tol >= 0.0))
    fail(ErrorKind::invalid_input, "stop.hausdorff_tol must be >= 0");

  DeformationRun run;
  run.state = make_deformation_state(p0, alpha, mode, map_tol);

  std::ofstream telemetry;
  if (!telemetry_path.empty()) {
    telemetry.open(telemetry_path, std::ios::trunc);
    if (!telemetry)
      fail(ErrorKind::invalid_input,
           "cannot open telemetry file: " + telemetry_path);
  }

  std::mt19937_64 rng(strategy.seed);
  int budget = stop.max_steps;
  if (strategy.kind == AngleStrategy::Kind::fixed_list)
    budget = std::min<int>(budget, static_cast<int>(strategy.angles.size()));

  RunVerdicts& v = run.verdicts;
  v.target_radius = equal_area_radius(area(p0));
  v.final_hausdorff = hausdorff_to_disk(p0, v.target_radius);

  double prev_diameter = diameter(p0);
  int stalled = 0;

  for (int n = 1; n <= budget; ++n) {
    const double phi = pick_angle(strategy, run.state, rng);
    run.state = deform_step(std::move(run.state), phi);

    const double a = area(run.state.current);
    const double per = perimeter(run.state.current);
    const double radius = equal_area_radius(a);
    const double haus = hausdorff_to_disk(run.state.current, radius);
    const ShrinkRecord& rec = run.state.history.back();

    if (telemetry.is_open()) {
      char line[512];
      std::snprintf(
          line, sizeof line,
          "{\"step\":%d,\"phi\":%.17g,\"c_phi\":%.17g,\"g_deriv0\":%.17g,"
          "\"h2_lo\":%.17g,\"h2_hi\":%.17g,\"area\":%.17g,"
          "\"perimeter\":%.17g,\"diameter\":%.17g,"
          "\"hausdorff_to_target\":%.17g}\n",
          n, rec.phi, rec.c_phi, rec.g_deriv0, rec.h2_norm.lo, rec.h2_norm.hi,
          a, per, rec.diameter_after, haus);
      telemetry << line;
      telemetry.flush();
    }

    v.steps = n;
    v.final_hausdorff = haus;
    v.target_radius = radius;

    if (haus < stop.hausdorff_tol) {
      v.converged = true;
      break;
    }
    if (stop.isoperimetric_tol > 0.0 &&
        per / (2.0 * std::sqrt(kPi * a)) - 1.0 < stop.isoperimetric_tol) {
      v.converged = true;
      v.note = "isoperimetric stop";
      break;
    }
    if (strategy.kind == AngleStrategy::Kind::greedy_diameter) {
      stalled = (prev_diameter - rec.diameter_after < stop.stagnation_tol)
                    ? stalled + 1
                    : 0;
      prev_diameter = rec.diameter_after;
      if (stalled >= 20) {
        v.stagnated = true;
        char note[96];
        std::snprintf(note, sizeof note,
                      "greedy diameter reduction below %.3g for 20 steps",
                      stop.stagnation_tol);
        v.note = note;
        break;
      }
    }
  }
  return run;
}

Polygon family_rescale(const Polygon& p, double alpha, double map_tol) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha))
    fail(ErrorKind::invalid_input, "alpha must be a finite value >= 0");
  if (!contains_point(p, {0.0, 0.0}))
    fail(ErrorKind::precondition_violation,
         "family_rescale requires 0 strictly inside the domain");
  ConformalMap map = build_map_laddered(p, map_tol);
  double s = std::max(1.0, 1.0 / map.deriv0());
  if (alpha > 0.0) s = std::max(s, alpha / map.hardy_norm(2.0).mid());
  if (s <= 1.0 + 1e-12) return p;
  return scale(p, s);
}

double product_lower_bound(const Polygon& p0, double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha))
    fail(ErrorKind::invalid_input, "alpha must be a finite value >= 0");
  if (!contains_point(p0, {0.0, 0.0}))
    fail(ErrorKind::precondition_violation,
         "product_lower_bound requires 0 strictly inside the domain");
  return std::max(1.0, alpha) / equal_area_radius(area(p0));
}

double green_area_quadrature(const ConformalMap& map, double r, int nodes) {
  if (!(r > 0.0 && r <= 1.0 - 1e-6))
    fail(ErrorKind::evaluation_out_of_range,
         "green_area_quadrature requires r in (0, 1 - 1e-6]");
  if (nodes < 16)
    fail(ErrorKind::invalid_input, "green_area_quadrature needs >= 16 nodes");
  double sum = 0.0;
  for (int j = 0; j < nodes; ++j) {
    const double theta = 2.0 * kPi * j / nodes;
    const Complex dir = std::polar(1.0, theta);
    const Complex z = r * dir;
    sum += std::real(map.eval(z)) * std::real(dir * map.deriv(z));
  }
  return sum * (2.0 * kPi / nodes);
}

ProductIdentity product_identity_check(const Polygon& p0, double alpha,
                                       const AngleStrategy& strategy,
                                       int steps, double map_tol) {
  if (steps < 1)
    fail(ErrorKind::invalid_input, "product_identity_check needs steps >= 1");
  StopRule exact;
  exact.max_steps = steps;
  exact.hausdorff_tol = 0.0;  // run the full budget (or until stagnation)
  DeformationRun shrunk = run_deformation(p0, alpha, strategy, exact,
                                          DeformMode::shrunk, "", map_tol);

  std::vector<double> phis;
  phis.reserve(shrunk.state.history.size());
  for (const ShrinkRecord& rec : shrunk.state.history) phis.push_back(rec.phi);

  StopRule replay_stop;
  replay_stop.max_steps = static_cast<int>(phis.size());
  replay_stop.hausdorff_tol = 0.0;
  DeformationRun replay =
      run_deformation(p0, alpha, AngleStrategy::fixed(phis), replay_stop,
                      DeformMode::unshrunk, "", map_tol);

  ConformalMap terminal = build_map_laddered(replay.state.current, map_tol);
  Interval h2 = terminal.hardy_norm(2.0);

  ProductIdentity out;
  out.product = shrunk.state.product;
  out.terminal_deriv0 = terminal.deriv0();
  out.terminal_h2 = h2;
  out.identity_value =
      std::max(1.0 / out.terminal_deriv0, alpha / h2.mid());
  out.residual = std::abs(out.product - out.identity_value);
  out.lower_bound = product_lower_bound(p0, alpha);
  out.steps = replay.state.step;
  return out;
}

BlaschkeSummary blaschke_condition(const std::vector<ShrinkRecord>& history) {
  if (history.size() < 10)
    fail(ErrorKind::precondition_violation,
         "blaschke_condition needs at least 10 recorded steps");
  BlaschkeSummary out;
  out.partial_sums.reserve(history.size());
  double sum = 0.0;
  double log_sum = 0.0;
  for (const ShrinkRecord& rec : history) {
    if (!(rec.c_phi > 0.0 && rec.c_phi <= 1.0))
      fail(ErrorKind::invalid_input, "shrink factor outside (0, 1]");
    sum += 1.0 - rec.c_phi;
    log_sum += std::log(1.0 / rec.c_phi);
    out.partial_sums.push_back(sum);
  }
  out.last_increment = 1.0 - history.back().c_phi;
  out.log_sum = log_sum;
  out.bounded = out.last_increment < 1e-9;
  return out;
}

BlaschkeValue blaschke_eval(const std::vector<double>& zeros,
                            std::complex<double> z) {
  if (!(std::abs(z) <= 0.99))
    fail(ErrorKind::invalid_input, "blaschke_eval requires |z| <= 0.99");
  BlaschkeValue out;
  out.value = 1.0;
  for (double c : zeros) {
    if (!std::isfinite(c) || !(c > 0.0 && c <= 1.0))
      fail(ErrorKind::invalid_input, "blaschke zero outside (0, 1]");
    out.value *= (z - c) / (1.0 - c * z);
    out.one_minus_sum += 1.0 - c;
  }
  return out;
}

double blaschke_tail_bound(double tail_sum, std::complex<double> z) {
  if (!(tail_sum >= 0.0) || !std::isfinite(tail_sum))
    fail(ErrorKind::invalid_input, "tail sum must be a finite value >= 0");
  if (!(std::abs(z) <= 0.99))
    fail(ErrorKind::invalid_input, "blaschke_tail_bound requires |z| <= 0.99");
  const double growth = (1.0 + std::abs(z)) / (1.0 - std::abs(z));
  return std::expm1(growth * tail_sum);
}

KernelVerdict kernel_convergence_probe(const std::vector<Polygon>& snapshots,
                                       double tol) {
  if (snapshots.size() < 2)
    fail(ErrorKind::precondition_violation,
         "kernel_convergence_probe needs at least 2 snapshots");
  KernelVerdict v;
  v.snapshots = static_cast<int>(snapshots.size());
  v.min_inradius = std::numeric_limits<double>::infinity();
  for (const Polygon& snap : snapshots) {
    if (!contains_point(snap, {0.0, 0.0}))
      fail(ErrorKind::precondition_violation,
           "every snapshot must contain 0 strictly");
    v.min_inradius =
        std::min(v.min_inradius, distance_to_boundary(snap, {0.0, 0.0}));
  }
  v.initial_inradius = distance_to_boundary(snapshots.front(), {0.0, 0.0});
  v.common_disk = v.min_inradius >= v.initial_inradius - 1e-9;

  const std::size_t n = snapshots.size();
  const std::size_t tail = std::max<std::size_t>(2, n / 4);
  double modulus = 0.0;
  for (std::size_t i = n - tail; i + 1 < n; ++i)
    modulus = std::max(modulus,
                       boundary_hausdorff(snapshots[i], snapshots[n - 1]));
  v.cauchy_modulus = modulus;
  v.cauchy = modulus < tol;
  return v;
}

KernelVerdict kernel_convergence_probe(const DeformationState& state,
                                       double tol) {
  return kernel_convergence_probe(state.snapshots, tol);
}

}  // namespace steiner
