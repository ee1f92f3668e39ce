#pragma once

#include <vector>

#include "reslab/secular.hpp"

namespace reslab {

// Axis-aligned query rectangle in the complex plane.
struct Rectangle {
  double re_min = 0.0;
  double re_max = 0.0;
  double im_min = 0.0;
  double im_max = 0.0;

  double width() const { return re_max - re_min; }
  double height() const { return im_max - im_min; }
  double diameter() const;
  Complex center() const { return Complex(0.5 * (re_min + re_max), 0.5 * (im_min + im_max)); }
  bool contains(Complex z, double slack = 0.0) const;
  bool closure_contains_origin() const;
};

enum class WindingMethod {
  kAuto,        // quadrature below a size threshold, tracking above it
  kQuadrature,  // composite Gauss-Legendre panels on the log-derivative
  kTracking,    // adaptive argument tracking of the determinant
};

struct SolverOptions {
  double tol = 1e-10;          // Newton convergence tolerance
  bool allow_origin = false;   // excise a small square at z=0 instead of rejecting
  WindingMethod method = WindingMethod::kAuto;
  // Contours are clipped to the horizontal strip that provably contains all
  // zeros (see strip_bound); this never changes a count, only the work done.
  bool clip_to_strip = true;
};

struct CountResult {
  int count = 0;
  double winding_raw = 0.0;     // contour integral value before rounding
  long quadrature_points = 0;   // determinant / log-derivative evaluations spent
  bool jittered = false;        // boundary was pushed outward off a zero
  bool origin_excised = false;  // a square around z=0 was removed from the region
  Rectangle box;                // the rectangle actually integrated
};

struct Resonance {
  Complex z;
  int multiplicity = 1;
  double residual = 0.0;  // smallest singular value of Id - U(z) at the point
  bool refined = true;    // false for unresolved clusters reported at their center
};

struct RealEigenvalue {
  double x = 0.0;
  int multiplicity = 1;
};

// Number of zeros of det(Id - U(z)) in rect, with multiplicity, via the
// argument principle. Boxes whose closure contains z=0 are rejected unless
// options.allow_origin is set, in which case a square of half-width 1e-3
// around 0 is excised from the region and the result flagged.
CountResult count_zeros(const SecularEvaluator& ev, const Rectangle& rect,
                        const SolverOptions& options = {});
CountResult count_zeros(const SecularSystem& sys, const Rectangle& rect,
                        const SolverOptions& options = {});

// Locates every zero in rect: recursive quadrisection until cells hold at
// most one zero (or are tol-sized), Newton refinement inside unit cells,
// winding-circle multiplicities for clusters. The multiplicity sum always
// equals the box count; unresolved clusters come back with refined=false.
// Results are sorted by (Re, Im).
std::vector<Resonance> find_resonances(const SecularEvaluator& ev, const Rectangle& rect,
                                       const SolverOptions& options = {});
std::vector<Resonance> find_resonances(const SecularSystem& sys, const Rectangle& rect,
                                       const SolverOptions& options = {});

// Real spectrum of a closed system on [a, b] (0 < a < b), with multiplicity.
// Any zero found off the real axis beyond tol reports an assembly bug.
std::vector<RealEigenvalue> closed_spectrum(const SecularSystem& sys, double a, double b,
                                            double tol = 1e-10);

// Counts eigenvalues of the unitary U(x) crossing 1 for x in (a, b), with
// multiplicity, by tracking eigenphase wrap-around on a grid. Independent of
// the contour machinery; cross-checks closed_spectrum totals.
int eigenphase_crossing_count(const SecularSystem& sys, double a, double b);

// Per-bin crossing counts over half-open bins [edges[i], edges[i+1]).
std::vector<int> eigenphase_bin_counts(const SecularSystem& sys,
                                       const std::vector<double>& edges);

// Zero counts per half-open bin [edges[i], edges[i+1]) x [im_min, im_max],
// sharing contour edges between adjacent bins so the bin totals telescope to
// the full-box count exactly.
std::vector<int> binned_counts(const SecularEvaluator& ev, const std::vector<double>& edges,
                               double im_min, double im_max,
                               const SolverOptions& options = {});

}  // namespace reslab
