#include "reslab/solver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <vector>

#include "reslab/common.hpp"

namespace reslab {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

// Half-width of the square excised around z=0 under allow_origin.
constexpr double kOriginHalfWidth = 1e-3;

// Systems at most this large default to the quadrature engine.
constexpr int kQuadratureSideLimit = 32;

// Outward boundary perturbations tried when a contour pins a zero,
// as fractions of the rectangle diameter.
constexpr double kJitterFactors[] = {0.0, 1e-5, 3e-5, 1e-4};

// Split-line placements tried during quadrisection, as fractions of extent.
constexpr double kSplitFractions[] = {0.5, 0.46, 0.54, 0.42, 0.58};

double principal(double d) {
  while (d > kPi) d -= kTwoPi;
  while (d <= -kPi) d += kTwoPi;
  return d;
}

std::string rect_str(const Rectangle& r) {
  std::ostringstream os;
  os << "[" << r.re_min << "," << r.re_max << "]x[" << r.im_min << "," << r.im_max << "]";
  return os.str();
}

Rectangle expand(const Rectangle& r, double d) {
  return Rectangle{r.re_min - d, r.re_max + d, r.im_min - d, r.im_max + d};
}

// --- strip clipping ---------------------------------------------------------

// Recovers the resonance-strip depth from the assembled S alone: each vertex
// block has backscatter entry 2/(n+d) - 1, giving n+d, and the out-degree
// gives d. Returns nothing when some vertex is balanced (unbounded strip).
std::optional<double> strip_limit(const SecularSystem& sys) {
  if (sys.closed) return 0.0;
  const int m = sys.bonds.bond_count;
  const int nv = 1 + *std::max_element(sys.bonds.origin.begin(), sys.bonds.origin.end());
  std::vector<int> out_degree(nv, 0);
  std::vector<int> witness(nv, -1);
  for (int b = 0; b < m; ++b) {
    if (witness[sys.bonds.origin[b]] < 0) witness[sys.bonds.origin[b]] = b;
    ++out_degree[sys.bonds.origin[b]];
  }
  double worst = 0.0;
  for (int v = 0; v < nv; ++v) {
    if (witness[v] < 0) continue;
    const int b = witness[v];
    const double f = sys.S(b, sys.bonds.reverse(b)) + 1.0;
    const int nd = static_cast<int>(std::llround(2.0 / f));
    const int d = out_degree[v];
    const int n = nd - d;
    if (n <= 0) continue;
    if (n == d) return std::nullopt;
    worst = std::max(worst, std::log(double(n + d)) - std::log(double(std::abs(d - n))));
  }
  return worst / sys.min_length();
}

// Shrinks the query onto the strip that provably holds every zero. Returns
// nothing when the clipped region is empty (count is zero without any work).
std::optional<Rectangle> clip_rect(const SecularSystem& sys, const Rectangle& r) {
  const std::optional<double> k = strip_limit(sys);
  if (!k) return r;  // balanced: no bound available
  const double lo = -*k - 0.05;
  const double hi = 0.05;
  Rectangle out = r;
  out.im_min = std::max(out.im_min, lo);
  out.im_max = std::min(out.im_max, hi);
  if (out.im_min >= out.im_max) return std::nullopt;
  return out;
}

// --- adaptive argument tracking ---------------------------------------------

struct TrackPiece {
  double t0, t1;
  LogDet a, b;
};

struct TrackedSegment {
  Complex a, b;
  std::vector<TrackPiece> pieces;  // contiguous over [0,1], sorted
  double total_arg = 0.0;          // accumulated phase change a -> b

  Complex point(double t) const { return a + t * (b - a); }
};

TrackedSegment reverse_segment(const TrackedSegment& s) {
  TrackedSegment out;
  out.a = s.b;
  out.b = s.a;
  out.total_arg = -s.total_arg;
  out.pieces.reserve(s.pieces.size());
  for (auto it = s.pieces.rbegin(); it != s.pieces.rend(); ++it)
    out.pieces.push_back({1.0 - it->t1, 1.0 - it->t0, it->b, it->a});
  return out;
}

// Tracks det(Id - U(z)) along contour segments, bisecting until each piece's
// phase step is unambiguous. All evaluations across one solver call share a
// budget through this object.
class Tracker {
 public:
  Tracker(const SecularEvaluator& ev, long budget) : ev_(ev), budget_(budget) {}

  long evaluations() const { return evals_; }

  // False on a singular hit (a zero sits on or numerically on the segment).
  bool track(Complex a, Complex b, const std::vector<double>& forced_ts, TrackedSegment& out) {
    out = TrackedSegment{};
    out.a = a;
    out.b = b;
    const double len = std::abs(b - a);
    if (len == 0.0) throw InputError("solver: degenerate contour segment");

    // Horizontal runs sweep phase at up to the total bond length; size the
    // initial grid so a full alias (2*pi slip) cannot hide between samples.
    const double sum_len = ev_.system().lengths.sum();
    const bool horizontal = a.imag() == b.imag();
    const double hmax = horizontal ? std::min(0.25, kPi / (2.0 * sum_len) / len) : 0.125;

    std::vector<double> ts{0.0, 1.0};
    for (double t : forced_ts)
      if (t > 0.0 && t < 1.0) ts.push_back(t);
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    std::vector<double> grid;
    for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
      grid.push_back(ts[i]);
      const int extra = static_cast<int>(std::ceil((ts[i + 1] - ts[i]) / hmax)) - 1;
      for (int j = 1; j <= extra; ++j)
        grid.push_back(ts[i] + (ts[i + 1] - ts[i]) * double(j) / double(extra + 1));
    }
    grid.push_back(1.0);

    std::vector<LogDet> lds(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
      if (!eval(out.point(grid[i]), lds[i])) return false;

    std::vector<TrackPiece> stack;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i)
      stack.push_back({grid[i], grid[i + 1], lds[i], lds[i + 1]});

    if (!refine(out, stack, [&out](const TrackPiece& p) { out.pieces.push_back(p); }))
      return false;
    std::sort(out.pieces.begin(), out.pieces.end(),
              [](const TrackPiece& x, const TrackPiece& y) { return x.t0 < y.t0; });
    for (const TrackPiece& p : out.pieces) out.total_arg += principal(p.b.arg - p.a.arg);
    return true;
  }

  // Splits a tracked segment at parameter t without retracking: only the
  // straddling piece is re-refined. Fails on a singular hit.
  bool split(const TrackedSegment& s, double t, TrackedSegment& lo, TrackedSegment& hi) {
    lo = TrackedSegment{};
    hi = TrackedSegment{};
    lo.a = s.a;
    lo.b = s.point(t);
    hi.a = lo.b;
    hi.b = s.b;
    for (const TrackPiece& p : s.pieces) {
      if (!(p.t0 < t && t < p.t1)) {
        // Non-straddling pieces classify by midpoint (boundaries may meet t exactly).
        if (0.5 * (p.t0 + p.t1) < t) {
          append(lo, 0.0, t, p);
        } else {
          append(hi, t, 1.0, p);
        }
      } else {
        LogDet mid;
        if (!eval(s.point(t), mid)) return false;
        std::vector<TrackPiece> stack{{p.t0, t, p.a, mid}};
        if (!refine(s, stack, [&](const TrackPiece& q) { append(lo, 0.0, t, q); }))
          return false;
        stack.assign(1, {t, p.t1, mid, p.b});
        if (!refine(s, stack, [&](const TrackPiece& q) { append(hi, t, 1.0, q); }))
          return false;
      }
    }
    finish(lo);
    finish(hi);
    return true;
  }

 private:
  // Rescales a parent piece into child coordinates ([t_lo, t_hi] -> [0,1]).
  static void append(TrackedSegment& child, double t_lo, double t_hi, const TrackPiece& p) {
    const double w = t_hi - t_lo;
    child.pieces.push_back({(p.t0 - t_lo) / w, (p.t1 - t_lo) / w, p.a, p.b});
  }

  static bool guards_pass(const LogDet& a, const LogDet& b) {
    return std::abs(principal(b.arg - a.arg)) < kPi / 2.0 && std::abs(b.log_abs - a.log_abs) < 2.0;
  }

  // Core refinement. A piece whose endpoints satisfy the guards is still not
  // trusted on its own: a zero sitting close to the middle of a long piece can
  // sweep the phase by nearly 2*pi while the endpoint deltas look small
  // (symmetric approach hides the magnitude dip too). Every candidate is
  // therefore checked at its midpoint and accepted only when both halves also
  // satisfy the guards; otherwise the halves are refined further.
  template <typename Sink>
  bool refine(const TrackedSegment& geom, std::vector<TrackPiece>& stack, Sink sink) {
    while (!stack.empty()) {
      TrackPiece p = stack.back();
      stack.pop_back();
      const bool pass = guards_pass(p.a, p.b);
      if (!pass && p.t1 - p.t0 < 1e-12) return false;  // pinned on a zero
      const double tm = 0.5 * (p.t0 + p.t1);
      LogDet mid;
      if (!eval(geom.point(tm), mid)) return false;
      const TrackPiece lo{p.t0, tm, p.a, mid};
      const TrackPiece hi{tm, p.t1, mid, p.b};
      if (pass && guards_pass(lo.a, lo.b) && guards_pass(hi.a, hi.b)) {
        sink(lo);
        sink(hi);
        continue;
      }
      stack.push_back(lo);
      stack.push_back(hi);
    }
    return true;
  }

  static void finish(TrackedSegment& s) {
    std::sort(s.pieces.begin(), s.pieces.end(),
              [](const TrackPiece& x, const TrackPiece& y) { return x.t0 < y.t0; });
    s.total_arg = 0.0;
    for (const TrackPiece& p : s.pieces) s.total_arg += principal(p.b.arg - p.a.arg);
  }

  bool eval(Complex z, LogDet& out) {
    if (++evals_ > budget_)
      throw NumericalError("solver: contour evaluation budget exceeded");
    out = ev_.log_det(z);
    return !out.near_singular;
  }

  const SecularEvaluator& ev_;
  long budget_;
  long evals_ = 0;
};

// Cumulative phase change up to a forced grid point of the segment.
double cumulative_at(const TrackedSegment& s, double t) {
  double acc = 0.0;
  for (const TrackPiece& p : s.pieces) {
    if (p.t1 > t + 1e-15) break;
    acc += principal(p.b.arg - p.a.arg);
  }
  return acc;
}

// --- Gauss-Legendre quadrature engine ----------------------------------------

constexpr double kGlNode[4] = {0.1834346424956498, 0.5255324099163290,
                               0.7966664774136267, 0.9602898564975363};
constexpr double kGlWeight[4] = {0.3626837833783620, 0.3137066458778873,
                                 0.2223810344533745, 0.1012285362903763};

struct EngineRun {
  bool ok = false;        // false: singular hit or instability, try a jittered boundary
  bool unstable = false;  // quadrature hit its refinement cap without settling
  double winding = 0.0;   // partial value when unstable
  long evals = 0;
};

EngineRun winding_quadrature(const SecularEvaluator& ev, const Rectangle& r) {
  EngineRun run;
  const Complex c0(r.re_min, r.im_min), c1(r.re_max, r.im_min), c2(r.re_max, r.im_max),
      c3(r.re_min, r.im_max);
  const Complex corners[5] = {c0, c1, c2, c3, c0};

  double prev = std::numeric_limits<double>::quiet_NaN();
  for (int panels = 4; panels * 8 <= (1 << 14); panels *= 2) {
    Complex acc(0.0, 0.0);
    for (int side = 0; side < 4; ++side) {
      const Complex a = corners[side], b = corners[side + 1];
      Complex sum(0.0, 0.0);
      for (int p = 0; p < panels; ++p) {
        for (int j = 0; j < 4; ++j) {
          for (int sgn = -1; sgn <= 1; sgn += 2) {
            const double x = sgn * kGlNode[j];
            const double t = (p + 0.5 * (x + 1.0)) / panels;
            ++run.evals;
            const LogDerivative ld = ev.log_derivative(a + t * (b - a));
            if (!ld.valid) return run;  // zero on/near the contour
            sum += 0.5 * kGlWeight[j] * ld.value;
          }
        }
      }
      acc += sum * (b - a) / double(panels);
    }
    const double w = (acc / Complex(0.0, kTwoPi)).real();
    if (std::isfinite(prev) && std::abs(w - std::round(w)) < 0.05 && std::abs(w - prev) < 0.05) {
      run.ok = true;
      run.winding = w;
      return run;
    }
    prev = w;
  }
  run.unstable = true;
  run.winding = prev;
  return run;
}

EngineRun winding_tracking(const SecularEvaluator& ev, const Rectangle& r) {
  Tracker tracker(ev, 1L << 23);
  EngineRun run;
  const Complex c0(r.re_min, r.im_min), c1(r.re_max, r.im_min), c2(r.re_max, r.im_max),
      c3(r.re_min, r.im_max);
  const Complex corners[5] = {c0, c1, c2, c3, c0};
  double total = 0.0;
  for (int side = 0; side < 4; ++side) {
    TrackedSegment seg;
    const bool ok = tracker.track(corners[side], corners[side + 1], {}, seg);
    run.evals = tracker.evaluations();
    if (!ok) return run;
    total += seg.total_arg;
  }
  run.ok = true;
  run.winding = total / kTwoPi;
  return run;
}

WindingMethod pick_method(const SecularEvaluator& ev, const SolverOptions& opt) {
  if (opt.method != WindingMethod::kAuto) return opt.method;
  return ev.side() <= kQuadratureSideLimit ? WindingMethod::kQuadrature
                                           : WindingMethod::kTracking;
}

// Counting with the outward-jitter retry policy; no origin/clip logic here.
CountResult count_with_jitter(const SecularEvaluator& ev, const Rectangle& rect,
                              const SolverOptions& opt) {
  const WindingMethod method = pick_method(ev, opt);
  long spent = 0;
  bool saw_unstable = false;
  double partial = 0.0;
  for (double f : kJitterFactors) {
    const Rectangle r = expand(rect, f * rect.diameter());
    EngineRun run = method == WindingMethod::kQuadrature ? winding_quadrature(ev, r)
                                                         : winding_tracking(ev, r);
    spent += run.evals;
    if (run.unstable) {
      saw_unstable = true;
      partial = run.winding;
    }
    if (!run.ok) continue;
    const long nearest = std::lround(run.winding);
    if (std::abs(run.winding - double(nearest)) >= 0.1 || nearest < 0) continue;
    CountResult out;
    out.count = static_cast<int>(nearest);
    out.winding_raw = run.winding;
    out.quadrature_points = spent;
    out.jittered = f > 0.0;
    out.box = r;
    return out;
  }
  if (saw_unstable)
    throw NumericalError("solver: winding quadrature did not stabilize (partial winding " +
                         std::to_string(partial) + " on " + rect_str(rect) + ")");
  throw NumericalError("solver: contour repeatedly pinned on zeros near " + rect_str(rect));
}

void check_rect(const Rectangle& r) {
  if (!(r.re_min < r.re_max) || !(r.im_min < r.im_max) || !std::isfinite(r.re_min) ||
      !std::isfinite(r.re_max) || !std::isfinite(r.im_min) || !std::isfinite(r.im_max))
    throw InputError("solver: rectangle must have finite nonempty interior");
}

Rectangle origin_square() {
  return Rectangle{-kOriginHalfWidth, kOriginHalfWidth, -kOriginHalfWidth, kOriginHalfWidth};
}

std::optional<Rectangle> intersect(const Rectangle& a, const Rectangle& b) {
  Rectangle r{std::max(a.re_min, b.re_min), std::min(a.re_max, b.re_max),
              std::max(a.im_min, b.im_min), std::min(a.im_max, b.im_max)};
  if (r.re_min >= r.re_max || r.im_min >= r.im_max) return std::nullopt;
  return r;
}

// rect minus the origin square, as up to four disjoint rectangles. The cuts
// sit on the square's edges, far from any zero (the excised neighborhood of
// the origin contains no other zeros at these scales).
std::vector<Rectangle> excised_partition(const Rectangle& rect) {
  const Rectangle sq = origin_square();
  std::vector<Rectangle> parts;
  if (rect.re_min < sq.re_min)
    parts.push_back({rect.re_min, sq.re_min, rect.im_min, rect.im_max});
  if (rect.re_max > sq.re_max)
    parts.push_back({sq.re_max, rect.re_max, rect.im_min, rect.im_max});
  const double mid_lo = std::max(rect.re_min, sq.re_min);
  const double mid_hi = std::min(rect.re_max, sq.re_max);
  if (mid_lo < mid_hi) {
    if (rect.im_min < sq.im_min) parts.push_back({mid_lo, mid_hi, rect.im_min, sq.im_min});
    if (rect.im_max > sq.im_max) parts.push_back({mid_lo, mid_hi, sq.im_max, rect.im_max});
  }
  return parts;
}

}  // namespace

double Rectangle::diameter() const { return std::hypot(width(), height()); }

bool Rectangle::contains(Complex z, double slack) const {
  return z.real() >= re_min - slack && z.real() <= re_max + slack &&
         z.imag() >= im_min - slack && z.imag() <= im_max + slack;
}

bool Rectangle::closure_contains_origin() const {
  return re_min <= 0.0 && 0.0 <= re_max && im_min <= 0.0 && 0.0 <= im_max;
}

CountResult count_zeros(const SecularEvaluator& ev, const Rectangle& rect,
                        const SolverOptions& opt) {
  check_rect(rect);
  const bool origin = rect.closure_contains_origin();
  if (origin && !opt.allow_origin)
    throw PolicyError(
        "solver: rectangle closure contains the origin, where the determinant "
        "criterion is not valid; pass allow_origin to excise it");

  Rectangle query = rect;
  if (opt.clip_to_strip) {
    const std::optional<Rectangle> clipped = clip_rect(ev.system(), rect);
    if (!clipped) {
      CountResult out;
      out.box = rect;
      out.origin_excised = origin;
      return out;  // query lies outside the resonance strip
    }
    query = *clipped;
  }

  CountResult outer = count_with_jitter(ev, query, opt);
  if (!origin) return outer;

  outer.origin_excised = true;
  const std::optional<Rectangle> inner = intersect(origin_square(), query);
  if (!inner) return outer;
  const CountResult hole = count_with_jitter(ev, *inner, opt);
  outer.count -= hole.count;
  outer.winding_raw -= hole.winding_raw;
  outer.quadrature_points += hole.quadrature_points;
  outer.jittered = outer.jittered || hole.jittered;
  return outer;
}

CountResult count_zeros(const SecularSystem& sys, const Rectangle& rect,
                        const SolverOptions& opt) {
  SecularEvaluator ev(sys);
  return count_zeros(ev, rect, opt);
}

// --- resonance location -----------------------------------------------------

namespace {

// A subdivision cell carries its four tracked sides (counterclockwise:
// bottom, right, top, left) so children reuse the parent's boundary work.
struct Cell {
  Rectangle r;
  TrackedSegment bottom, right, top, left;
  int count = 0;

  double winding() const {
    return (bottom.total_arg + right.total_arg + top.total_arg + left.total_arg) / kTwoPi;
  }
};

struct NewtonResult {
  Complex z;
  bool converged = false;
};

NewtonResult newton_refine(const SecularEvaluator& ev, Complex z0, double tol, double clamp) {
  NewtonResult out;
  out.z = z0;
  for (int it = 0; it < 100; ++it) {
    const LogDerivative ld = ev.log_derivative(out.z);
    if (!ld.valid) {  // numerically on the zero already
      out.converged = true;
      return out;
    }
    Complex step = -1.0 / ld.value;
    if (std::abs(step) > clamp) step *= clamp / std::abs(step);
    out.z += step;
    if (std::abs(step) < tol) {
      out.converged = true;
      break;
    }
  }
  if (out.converged) {
    for (int j = 0; j < 2; ++j) {  // polish without the clamp
      const LogDerivative ld = ev.log_derivative(out.z);
      if (!ld.valid) break;
      const Complex step = -1.0 / ld.value;
      if (std::abs(step) > 8.0 * tol) break;  // drifting off: keep the converged point
      out.z += step;
    }
  }
  return out;
}

class ResonanceSearch {
 public:
  ResonanceSearch(const SecularEvaluator& ev, const SolverOptions& opt)
      : ev_(ev), opt_(opt), tracker_(ev, 1L << 23) {}

  std::vector<Resonance> run(const Rectangle& query) {
    Cell root;
    if (!make_root(query, root))
      throw NumericalError("solver: contour repeatedly pinned on zeros near " +
                           rect_str(query));
    recurse(root, 0);
    finalize(root.count);
    return std::move(found_);
  }

 private:
  bool make_root(const Rectangle& query, Cell& root) {
    for (double f : kJitterFactors) {
      const Rectangle r = expand(query, f * query.diameter());
      Cell cell;
      cell.r = r;
      const Complex c0(r.re_min, r.im_min), c1(r.re_max, r.im_min), c2(r.re_max, r.im_max),
          c3(r.re_min, r.im_max);
      if (!tracker_.track(c0, c1, {}, cell.bottom)) continue;
      if (!tracker_.track(c1, c2, {}, cell.right)) continue;
      if (!tracker_.track(c2, c3, {}, cell.top)) continue;
      if (!tracker_.track(c3, c0, {}, cell.left)) continue;
      const double w = cell.winding();
      const long n = std::lround(w);
      if (std::abs(w - double(n)) >= 0.1 || n < 0) continue;
      cell.count = static_cast<int>(n);
      root = std::move(cell);
      return true;
    }
    return false;
  }

  void recurse(Cell& cell, int depth) {
    if (cell.count == 0) return;
    if (depth > 200)
      throw NumericalError("solver: subdivision depth exceeded near " + rect_str(cell.r));

    const double diam = cell.r.diameter();
    if (cell.count == 1 && try_unit_cell(cell)) return;
    if (cell.count >= 2 && diam < 16.0 * opt_.tol) {
      resolve_cluster(cell);
      return;
    }
    if (cell.count == 1 && diam < 16.0 * opt_.tol) {
      // Newton kept escaping a tiny cell; report the center as unresolved.
      emit_cluster(cell.r.center(), 1);
      return;
    }
    split_and_recurse(cell, depth);
  }

  // Newton from the center of a count-1 cell. Accepts only roots that stay
  // inside the cell: a converged point elsewhere belongs to a sibling.
  bool try_unit_cell(Cell& cell) {
    const NewtonResult nr =
        newton_refine(ev_, cell.r.center(), opt_.tol, cell.r.diameter());
    if (!nr.converged || !cell.r.contains(nr.z, opt_.tol)) return false;
    const double residual = ev_.value(nr.z).smallest_singular;
    found_.push_back({nr.z, 1, residual, residual < 1e-8});
    return true;
  }

  // A tol-sized cell holding count >= 2 zeros: either one multiple root
  // (verified by a winding circle) or an unresolvable cluster.
  void resolve_cluster(Cell& cell) {
    const NewtonResult nr =
        newton_refine(ev_, cell.r.center(), opt_.tol, cell.r.diameter());
    const Complex z = (nr.converged && cell.r.contains(nr.z, opt_.tol)) ? nr.z : cell.r.center();
    const double radius = std::max(8.0 * opt_.tol, 1e-9);
    for (double scale : {1.0, 1.3, 1.7}) {
      const double rr = radius * scale;
      const Rectangle circle{z.real() - rr, z.real() + rr, z.imag() - rr, z.imag() + rr};
      Cell probe;
      probe.r = circle;
      const Complex c0(circle.re_min, circle.im_min), c1(circle.re_max, circle.im_min),
          c2(circle.re_max, circle.im_max), c3(circle.re_min, circle.im_max);
      if (!tracker_.track(c0, c1, {}, probe.bottom)) continue;
      if (!tracker_.track(c1, c2, {}, probe.right)) continue;
      if (!tracker_.track(c2, c3, {}, probe.top)) continue;
      if (!tracker_.track(c3, c0, {}, probe.left)) continue;
      const double w = probe.winding();
      if (std::abs(w - std::round(w)) >= 0.1) continue;
      if (std::lround(w) == cell.count) {
        const double residual = ev_.value(z).smallest_singular;
        found_.push_back({z, cell.count, residual, nr.converged && residual < 1e-8});
        return;
      }
      break;  // winding disagrees: genuine cluster, not one multiple root
    }
    emit_cluster(cell.r.center(), cell.count);
  }

  void emit_cluster(Complex z, int multiplicity) {
    const double residual = ev_.value(z).smallest_singular;
    found_.push_back({z, multiplicity, residual, false});
  }

  void split_and_recurse(Cell& cell, int depth) {
    const Rectangle& r = cell.r;
    for (double f : kSplitFractions) {
      const double xm = r.re_min + f * r.width();
      const double ym = r.im_min + f * r.height();

      TrackedSegment vcross, hcross;
      if (!tracker_.track(Complex(xm, r.im_min), Complex(xm, r.im_max), {}, vcross)) continue;
      if (!tracker_.track(Complex(r.re_min, ym), Complex(r.re_max, ym), {}, hcross)) continue;

      TrackedSegment v_lo, v_hi, h_left, h_right;
      if (!tracker_.split(vcross, (ym - r.im_min) / r.height(), v_lo, v_hi)) continue;
      if (!tracker_.split(hcross, (xm - r.re_min) / r.width(), h_left, h_right)) continue;

      TrackedSegment b_lo, b_hi, r_lo, r_hi, t_first, t_second, l_top, l_bot;
      if (!tracker_.split(cell.bottom, (xm - r.re_min) / r.width(), b_lo, b_hi)) continue;
      if (!tracker_.split(cell.right, (ym - r.im_min) / r.height(), r_lo, r_hi)) continue;
      // top runs right-to-left, left runs top-to-bottom: parameters flip.
      if (!tracker_.split(cell.top, (r.re_max - xm) / r.width(), t_first, t_second)) continue;
      if (!tracker_.split(cell.left, (r.im_max - ym) / r.height(), l_top, l_bot)) continue;

      Cell bl, br, tr, tl;
      bl.r = {r.re_min, xm, r.im_min, ym};
      bl.bottom = b_lo;
      bl.right = v_lo;
      bl.top = reverse_segment(h_left);
      bl.left = l_bot;

      br.r = {xm, r.re_max, r.im_min, ym};
      br.bottom = b_hi;
      br.right = r_lo;
      br.top = reverse_segment(h_right);
      br.left = reverse_segment(v_lo);

      tr.r = {xm, r.re_max, ym, r.im_max};
      tr.bottom = h_right;
      tr.right = r_hi;
      tr.top = t_first;
      tr.left = reverse_segment(v_hi);

      tl.r = {r.re_min, xm, ym, r.im_max};
      tl.bottom = h_left;
      tl.right = v_hi;
      tl.top = t_second;
      tl.left = l_top;

      Cell* children[4] = {&bl, &br, &tr, &tl};
      int sum = 0;
      bool ok = true;
      for (Cell* c : children) {
        const double w = c->winding();
        const long n = std::lround(w);
        if (std::abs(w - double(n)) >= 0.1 || n < 0) {
          ok = false;
          break;
        }
        c->count = static_cast<int>(n);
        sum += c->count;
      }
      if (!ok || sum != cell.count) continue;  // split line grazed a zero
      for (Cell* c : children) recurse(*c, depth + 1);
      return;
    }
    throw NumericalError("solver: could not separate zeros near " + rect_str(cell.r));
  }

  void finalize(int expected_total) {
    std::sort(found_.begin(), found_.end(), [](const Resonance& a, const Resonance& b) {
      if (a.z.real() != b.z.real()) return a.z.real() < b.z.real();
      return a.z.imag() < b.z.imag();
    });
    // Merge reports within the dedup radius (clusters straddling a split).
    std::vector<Resonance> merged;
    for (const Resonance& res : found_) {
      if (!merged.empty() && std::abs(merged.back().z - res.z) <= 8.0 * opt_.tol) {
        Resonance& prev = merged.back();
        if (res.residual < prev.residual) prev.z = res.z;
        prev.residual = std::min(prev.residual, res.residual);
        prev.multiplicity += res.multiplicity;
        prev.refined = prev.refined && res.refined;
      } else {
        merged.push_back(res);
      }
    }
    found_ = std::move(merged);
    int total = 0;
    for (const Resonance& res : found_) total += res.multiplicity;
    if (total != expected_total)
      throw NumericalError("solver: located multiplicities sum to " + std::to_string(total) +
                           " but the contour count is " + std::to_string(expected_total));
  }

  const SecularEvaluator& ev_;
  const SolverOptions& opt_;
  Tracker tracker_;
  std::vector<Resonance> found_;
};

}  // namespace

std::vector<Resonance> find_resonances(const SecularEvaluator& ev, const Rectangle& rect,
                                       const SolverOptions& opt) {
  check_rect(rect);
  const bool origin = rect.closure_contains_origin();
  if (origin && !opt.allow_origin)
    throw PolicyError(
        "solver: rectangle closure contains the origin, where the determinant "
        "criterion is not valid; pass allow_origin to excise it");

  std::vector<Rectangle> regions;
  if (origin) {
    regions = excised_partition(rect);
  } else {
    regions.push_back(rect);
  }

  std::vector<Resonance> all;
  for (const Rectangle& region : regions) {
    Rectangle query = region;
    if (opt.clip_to_strip) {
      const std::optional<Rectangle> clipped = clip_rect(ev.system(), region);
      if (!clipped) continue;
      query = *clipped;
    }
    ResonanceSearch search(ev, opt);
    std::vector<Resonance> part = search.run(query);
    all.insert(all.end(), part.begin(), part.end());
  }
  std::sort(all.begin(), all.end(), [](const Resonance& a, const Resonance& b) {
    if (a.z.real() != b.z.real()) return a.z.real() < b.z.real();
    return a.z.imag() < b.z.imag();
  });
  return all;
}

std::vector<Resonance> find_resonances(const SecularSystem& sys, const Rectangle& rect,
                                       const SolverOptions& opt) {
  SecularEvaluator ev(sys);
  return find_resonances(ev, rect, opt);
}

std::vector<RealEigenvalue> closed_spectrum(const SecularSystem& sys, double a, double b,
                                            double tol) {
  if (!sys.closed) throw InputError("solver: closed_spectrum requires a closed system");
  if (!(0.0 < a && a < b)) throw InputError("solver: closed_spectrum needs 0 < a < b");
  const double eps = std::min(0.1, 0.1 / sys.max_length());
  SolverOptions opt;
  opt.tol = tol;
  SecularEvaluator ev(sys);
  const std::vector<Resonance> res =
      find_resonances(ev, Rectangle{a, b, -eps, eps}, opt);
  std::vector<RealEigenvalue> out;
  for (const Resonance& r : res) {
    if (std::abs(r.z.imag()) > tol)
      throw NumericalError("solver: non-real zero for closed system at Re " +
                           std::to_string(r.z.real()));
    out.push_back({r.z.real(), r.multiplicity});
  }
  std::sort(out.begin(), out.end(),
            [](const RealEigenvalue& x, const RealEigenvalue& y) { return x.x < y.x; });
  return out;
}

// --- eigenphase tracking ----------------------------------------------------

namespace {

// Sum of eigenphases of the unitary U(x), phases folded into [0, 2pi). The
// evaluation point is nudged upward if an eigenvalue sits numerically at 1,
// where folding becomes ambiguous.
struct PhaseSum {
  double x;
  double sum;
};

PhaseSum phase_sum(const SecularSystem& sys, double x, double nudge) {
  for (int attempt = 0; attempt < 4; ++attempt) {
    const Eigen::MatrixXcd u = evaluate_U(sys, Complex(x, 0.0));
    Eigen::ComplexSchur<Eigen::MatrixXcd> schur(u, /*computeU=*/false);
    if (schur.info() != Eigen::Success)
      throw NumericalError("solver: eigenphase decomposition failed");
    double sum = 0.0;
    bool ambiguous = false;
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
      const Complex lambda = schur.matrixT()(i, i);
      if (std::abs(std::abs(lambda) - 1.0) > 1e-8)
        throw NumericalError("solver: eigenphase tracking needs a unitary evolution");
      double phi = std::arg(lambda);
      if (phi < 0.0) phi += kTwoPi;
      if (phi < 1e-9 || kTwoPi - phi < 1e-9) {
        ambiguous = true;
        break;
      }
      sum += phi;
    }
    if (!ambiguous) return {x, sum};
    x += nudge;
  }
  throw NumericalError("solver: eigenphase pinned at 1 despite nudging");
}

// Wraps through phase 0 between two points: speeds sum exactly to the total
// bond length, so the folded sums differ from the linear growth by 2pi per
// crossing.
double wrap_estimate(double sum_len, const PhaseSum& p0, const PhaseSum& p1) {
  return ((p1.x - p0.x) * sum_len - (p1.sum - p0.sum)) / kTwoPi;
}

int crossings_between(const SecularSystem& sys, double sum_len, const PhaseSum& p0,
                      const PhaseSum& p1, double floor_step, double nudge) {
  const double w = wrap_estimate(sum_len, p0, p1);
  const long n = std::lround(w);
  if (std::abs(w - double(n)) < 0.05 && n >= 0) return static_cast<int>(n);
  if (p1.x - p0.x < floor_step)
    throw NumericalError("solver: eigenphase step floor reached at x = " +
                         std::to_string(p0.x));
  const PhaseSum mid = phase_sum(sys, 0.5 * (p0.x + p1.x), nudge);
  return crossings_between(sys, sum_len, p0, mid, floor_step, nudge) +
         crossings_between(sys, sum_len, mid, p1, floor_step, nudge);
}

}  // namespace

int eigenphase_crossing_count(const SecularSystem& sys, double a, double b) {
  if (!sys.closed) throw InputError("solver: eigenphase tracking requires a closed system");
  if (!(0.0 < a && a < b)) throw InputError("solver: eigenphase window needs 0 < a < b");
  const double sum_len = sys.lengths.sum();
  const double step = kPi / (4.0 * sys.max_length());
  const double nudge = 1e-7 * step;
  const int intervals = std::max(1, static_cast<int>(std::ceil((b - a) / step)));
  int total = 0;
  PhaseSum prev = phase_sum(sys, a, nudge);
  for (int i = 1; i <= intervals; ++i) {
    const PhaseSum next = phase_sum(sys, a + (b - a) * double(i) / intervals, nudge);
    total += crossings_between(sys, sum_len, prev, next, 1e-4, nudge);
    prev = next;
  }
  return total;
}

std::vector<int> eigenphase_bin_counts(const SecularSystem& sys,
                                       const std::vector<double>& edges) {
  if (!sys.closed) throw InputError("solver: eigenphase tracking requires a closed system");
  if (edges.size() < 2) throw InputError("solver: need at least two bin edges");
  for (std::size_t i = 0; i + 1 < edges.size(); ++i)
    if (!(edges[i] < edges[i + 1])) throw InputError("solver: bin edges must increase");
  if (edges.front() <= 0.0) throw InputError("solver: eigenphase window needs positive edges");

  const double sum_len = sys.lengths.sum();
  const double step = kPi / (4.0 * sys.max_length());
  const double nudge = 1e-7 * step;
  std::vector<int> counts(edges.size() - 1, 0);
  PhaseSum prev = phase_sum(sys, edges[0], nudge);
  for (std::size_t bin = 0; bin + 1 < edges.size(); ++bin) {
    const double lo = edges[bin], hi = edges[bin + 1];
    const int intervals = std::max(1, static_cast<int>(std::ceil((hi - lo) / step)));
    int total = 0;
    PhaseSum left = prev;
    for (int i = 1; i <= intervals; ++i) {
      const PhaseSum right = phase_sum(sys, lo + (hi - lo) * double(i) / intervals, nudge);
      total += crossings_between(sys, sum_len, left, right, 1e-4, nudge);
      left = right;
    }
    counts[bin] = total;
    prev = left;
  }
  return counts;
}

// --- shared-edge bin counting -----------------------------------------------

std::vector<int> binned_counts(const SecularEvaluator& ev, const std::vector<double>& edges,
                               double im_min, double im_max, const SolverOptions& opt) {
  if (edges.size() < 2) throw InputError("solver: need at least two bin edges");
  for (std::size_t i = 0; i + 1 < edges.size(); ++i)
    if (!(edges[i] < edges[i + 1])) throw InputError("solver: bin edges must increase");
  if (!(im_min < im_max)) throw InputError("solver: empty imaginary range");
  const Rectangle whole{edges.front(), edges.back(), im_min, im_max};
  if (whole.closure_contains_origin())
    throw PolicyError("solver: bin grid touches the origin; shift the window");

  Rectangle strip = whole;
  if (opt.clip_to_strip) {
    const std::optional<Rectangle> clipped = clip_rect(ev.system(), whole);
    if (!clipped) return std::vector<int>(edges.size() - 1, 0);
    strip = *clipped;
  }
  const double lo = strip.im_min, hi = strip.im_max;

  const std::size_t nbins = edges.size() - 1;
  Tracker tracker(ev, 1L << 23);

  // Bottom and top runs carry forced grid points at every bin edge; vertical
  // runs are shared by adjacent bins, so bin counts telescope exactly.
  std::vector<double> forced;
  for (std::size_t i = 1; i < nbins; ++i)
    forced.push_back((edges[i] - edges.front()) / (edges.back() - edges.front()));

  double bottom_y = lo, top_y = hi;
  TrackedSegment bottom, top;
  bool ok = false;
  for (int attempt = 0; attempt < 3 && !ok; ++attempt) {
    ok = tracker.track(Complex(edges.front(), bottom_y), Complex(edges.back(), bottom_y),
                       forced, bottom);
    if (!ok) bottom_y -= 1e-6 * (hi - lo) * (attempt + 1);
  }
  if (!ok) throw NumericalError("solver: bottom bin contour pinned on zeros");
  ok = false;
  for (int attempt = 0; attempt < 3 && !ok; ++attempt) {
    ok = tracker.track(Complex(edges.front(), top_y), Complex(edges.back(), top_y), forced, top);
    if (!ok) top_y += 1e-6 * (hi - lo) * (attempt + 1);
  }
  if (!ok) throw NumericalError("solver: top bin contour pinned on zeros");

  std::vector<double> vertical(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    double x = edges[i];
    TrackedSegment seg;
    ok = false;
    const double width =
        (i + 1 < edges.size() ? edges[i + 1] - edges[i] : edges[i] - edges[i - 1]);
    for (int attempt = 0; attempt < 3 && !ok; ++attempt) {
      ok = tracker.track(Complex(x, bottom_y), Complex(x, top_y), {}, seg);
      if (!ok) x += 1e-7 * width * (attempt + 1);  // on-edge zero stays in the lower bin
    }
    if (!ok)
      throw NumericalError("solver: bin edge contour pinned on zeros at Re " +
                           std::to_string(edges[i]));
    vertical[i] = seg.total_arg;
  }

  std::vector<int> counts(nbins, 0);
  double prev_b = 0.0, prev_t = 0.0;
  for (std::size_t i = 0; i < nbins; ++i) {
    const double tb = (i + 1 < nbins)
                          ? cumulative_at(bottom, (edges[i + 1] - edges.front()) /
                                                      (edges.back() - edges.front()))
                          : bottom.total_arg;
    const double tt = (i + 1 < nbins)
                          ? cumulative_at(top, (edges[i + 1] - edges.front()) /
                                                   (edges.back() - edges.front()))
                          : top.total_arg;
    const double w =
        ((tb - prev_b) + vertical[i + 1] - (tt - prev_t) - vertical[i]) / kTwoPi;
    prev_b = tb;
    prev_t = tt;
    const long n = std::lround(w);
    if (std::abs(w - double(n)) >= 0.1 || n < 0)
      throw NumericalError("solver: non-integer winding " + std::to_string(w) + " in bin " +
                           std::to_string(i));
    counts[i] = static_cast<int>(n);
  }
  return counts;
}

}  // namespace reslab
