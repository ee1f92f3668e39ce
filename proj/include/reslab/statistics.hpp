#pragma once

#include <vector>

#include "reslab/common.hpp"
#include "reslab/ensembles.hpp"
#include "reslab/graph.hpp"
#include "reslab/solver.hpp"

namespace reslab {

// Histogram of resonance real parts over a window, weights normalized by the
// total graph length so that sum(weights) * total_length is the integer
// multiplicity captured. Bins are half-open [lo, hi); a resonance exactly on
// an edge lands in the lower bin. All bins have width bin_width except the
// last, which is clamped to end exactly at the window top.
struct BinnedMeasure {
  double window_lo = 0.0;
  double window_hi = 0.0;
  double bin_width = 0.0;
  double cutoff = 0.0;        // resonances with Im >= -cutoff are counted
  double total_length = 0.0;  // normalization constant L(Q)
  std::vector<double> edges;  // size weights.size() + 1
  std::vector<double> weights;
};

struct ComparisonReport {
  BinnedMeasure open_measure;
  BinnedMeasure closed_measure;  // spectrum of the graph with leads removed
  double distance = 0.0;         // sum|w_open - w_closed| / sum w_closed
};

// Counts of resonances in [a1,a2] x [-a3,-delta] for a decreasing sequence of
// deltas, plus a log-log fit of count against 1/delta.
struct DeltaScan {
  double a1 = 0.0, a2 = 0.0, a3 = 0.0;
  std::vector<double> deltas;  // strictly decreasing, positive
  std::vector<int> counts;
  bool fit_defined = false;      // false when fewer than two bins had count >= 3
  double fitted_exponent = 0.0;  // slope of log(count) vs log(1/delta)
  double fitted_constant = 0.0;  // max over deltas of count * delta^{5/2} / lead count
};

struct AuditEntry {
  Complex z;
  int multiplicity = 1;
  double residual = 0.0;
  bool strip_ok = false;    // -strip_bound - 1e-9 <= Im z <= 1e-9
  bool mirror_ok = false;   // a resonance within 1e-6 of -conj(z) exists
  double mirror_distance = 0.0;
};

struct AuditReport {
  double strip_bound_value = 0.0;
  std::vector<AuditEntry> entries;
  int violations = 0;  // entries failing either check
};

// Total multiplicity of resonances in rect (origin policy per solver).
int box_count(const QuantumGraph& g, const Rectangle& rect, const SolverOptions& options = {});

// Resonance real parts binned over (window_lo, window_hi) with Im in
// [-cutoff, 0]. Closed graphs are binned by eigenphase crossings (cutoff is
// irrelevant: their spectrum is real); open graphs by shared-edge contour
// counts.
BinnedMeasure empirical_measure(const QuantumGraph& g, double window_lo, double window_hi,
                                double bin_width, double cutoff);

// Open-versus-closed spectral comparison on a common binning. The closed side
// is the same graph with every lead removed. A closed input compares against
// itself (distance 0).
ComparisonReport compare_open_closed(const QuantumGraph& g, double window_lo, double window_hi,
                                     double bin_width, double cutoff);

// Deep-resonance counts at each delta, deepest window first. Requires
// 0 < a1 < a2, strictly decreasing positive deltas, and a3 > deltas.front().
DeltaScan delta_scan(const QuantumGraph& g, double a1, double a2, double a3,
                     const std::vector<double>& deltas);

// Eigenvalues of A + iB with Re in [a1, a2] and Im <= -delta.
int hermitian_strip_count(const HermitianPair& pair, double delta, double a1, double a2);

// Locates resonances in rect, checks the strip bound on each, and checks that
// the mirror image -conj(z) is found in the mirrored rectangle.
AuditReport audit(const QuantumGraph& g, const Rectangle& rect);

}  // namespace reslab
