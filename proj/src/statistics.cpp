#include "reslab/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "reslab/secular.hpp"

namespace reslab {

namespace {

// Internal ceiling above the real axis: all resonances satisfy Im <= 0, so a
// contour top slightly above zero captures embedded real resonances without
// changing any count.
constexpr double kTopMargin = 0.02;

std::vector<double> make_edges(double lo, double hi, double width) {
  if (!(0.0 < lo && lo < hi)) throw InputError("statistics: window must satisfy 0 < lo < hi");
  if (!(width > 0.0)) throw InputError("statistics: bin width must be positive");
  const int nbins = std::max(1, static_cast<int>(std::ceil((hi - lo) / width - 1e-12)));
  std::vector<double> edges(nbins + 1);
  for (int i = 0; i < nbins; ++i) edges[i] = lo + i * width;
  edges[nbins] = hi;  // last bin clamped to the window top
  return edges;
}

}  // namespace

int box_count(const QuantumGraph& g, const Rectangle& rect, const SolverOptions& options) {
  return count_zeros(assemble(g), rect, options).count;
}

BinnedMeasure empirical_measure(const QuantumGraph& g, double window_lo, double window_hi,
                                double bin_width, double cutoff) {
  if (!(cutoff >= 0.0)) throw InputError("statistics: cutoff must be nonnegative");
  BinnedMeasure out;
  out.window_lo = window_lo;
  out.window_hi = window_hi;
  out.bin_width = bin_width;
  out.cutoff = cutoff;
  out.total_length = g.total_length();
  out.edges = make_edges(window_lo, window_hi, bin_width);

  std::vector<int> counts;
  const SecularSystem sys = assemble(g);
  if (sys.closed) {
    // Real spectrum: count unit-circle eigenphase crossings per bin. The
    // cutoff plays no role here.
    counts = eigenphase_bin_counts(sys, out.edges);
  } else {
    SecularEvaluator ev(sys);
    counts = binned_counts(ev, out.edges, -cutoff, kTopMargin);
  }
  out.weights.resize(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i)
    out.weights[i] = counts[i] / out.total_length;
  return out;
}

ComparisonReport compare_open_closed(const QuantumGraph& g, double window_lo, double window_hi,
                                     double bin_width, double cutoff) {
  ComparisonReport rep;
  rep.open_measure = empirical_measure(g, window_lo, window_hi, bin_width, cutoff);
  rep.closed_measure = empirical_measure(remove_leads(g), window_lo, window_hi, bin_width, cutoff);

  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < rep.open_measure.weights.size(); ++i) {
    num += std::abs(rep.open_measure.weights[i] - rep.closed_measure.weights[i]);
    den += rep.closed_measure.weights[i];
  }
  if (den > 0.0) {
    rep.distance = num / den;
  } else {
    rep.distance = num > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  }
  return rep;
}

DeltaScan delta_scan(const QuantumGraph& g, double a1, double a2, double a3,
                     const std::vector<double>& deltas) {
  if (!(0.0 < a1 && a1 < a2)) throw InputError("statistics: need 0 < a1 < a2");
  if (deltas.empty()) throw InputError("statistics: need at least one delta");
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!(deltas[i] > 0.0)) throw InputError("statistics: deltas must be positive");
    if (i > 0 && !(deltas[i] < deltas[i - 1]))
      throw InputError("statistics: deltas must strictly decrease");
  }
  if (!(a3 > deltas.front())) throw InputError("statistics: a3 must exceed every delta");

  DeltaScan scan;
  scan.a1 = a1;
  scan.a2 = a2;
  scan.a3 = a3;
  scan.deltas = deltas;
  scan.counts.resize(deltas.size());
  for (std::size_t i = 0; i < deltas.size(); ++i)
    scan.counts[i] = box_count(g, Rectangle{a1, a2, -a3, -deltas[i]});

  // Log-log fit over bins with enough mass for the slope to mean anything.
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < deltas.size(); ++i)
    if (scan.counts[i] >= 3) {
      xs.push_back(std::log(1.0 / deltas[i]));
      ys.push_back(std::log(static_cast<double>(scan.counts[i])));
    }
  if (xs.size() >= 2) {
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      mx += xs[i];
      my += ys[i];
    }
    mx /= xs.size();
    my /= ys.size();
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxx += (xs[i] - mx) * (xs[i] - mx);
      sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (sxx > 0.0) {
      scan.fit_defined = true;
      scan.fitted_exponent = sxy / sxx;
    }
  }

  const int lead_vertices = validate(g).lead_vertex_count;
  if (lead_vertices > 0) {
    for (std::size_t i = 0; i < deltas.size(); ++i)
      scan.fitted_constant =
          std::max(scan.fitted_constant,
                   scan.counts[i] * std::pow(deltas[i], 2.5) / lead_vertices);
  }
  return scan;
}

int hermitian_strip_count(const HermitianPair& pair, double delta, double a1, double a2) {
  if (!(delta > 0.0)) throw InputError("statistics: delta must be positive");
  if (!(a1 <= a2)) throw InputError("statistics: need a1 <= a2");
  int count = 0;
  for (Complex z : pair.eigenvalues)
    if (z.real() >= a1 && z.real() <= a2 && z.imag() <= -delta) ++count;
  return count;
}

AuditReport audit(const QuantumGraph& g, const Rectangle& rect) {
  AuditReport rep;
  rep.strip_bound_value = strip_bound(g);

  SecularEvaluator ev(assemble(g));
  const std::vector<Resonance> found = find_resonances(ev, rect);
  const Rectangle mirrored{-rect.re_max, -rect.re_min, rect.im_min, rect.im_max};
  const std::vector<Resonance> mirror_found = find_resonances(ev, mirrored);

  for (const Resonance& r : found) {
    AuditEntry e;
    e.z = r.z;
    e.multiplicity = r.multiplicity;
    e.residual = r.residual;
    e.strip_ok =
        r.z.imag() >= -rep.strip_bound_value - 1e-9 && r.z.imag() <= 1e-9;
    const Complex target = -std::conj(r.z);
    e.mirror_distance = std::numeric_limits<double>::infinity();
    for (const Resonance& m : mirror_found)
      e.mirror_distance = std::min(e.mirror_distance, std::abs(m.z - target));
    e.mirror_ok = e.mirror_distance <= 1e-6;
    if (!e.strip_ok || !e.mirror_ok) ++rep.violations;
    rep.entries.push_back(e);
  }
  return rep;
}

}  // namespace reslab
