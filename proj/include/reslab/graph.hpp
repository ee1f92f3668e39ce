#pragma once

#include <optional>
#include <string>
#include <vector>

namespace reslab {

struct Edge {
  int u = 0;
  int v = 0;
  double length = 0.0;
};

// Metric graph with semi-infinite leads: vertices 0..vertex_count-1, internal
// edges carrying positive lengths, and leads[v] = number of leads at v.
// Loops and parallel edges are allowed; a loop adds 2 to its vertex's degree.
struct QuantumGraph {
  int vertex_count = 0;
  std::vector<Edge> edges;
  std::vector<int> leads;  // size vertex_count

  bool closed() const;
  double total_length() const;           // sum of edge lengths in input order
  std::vector<int> degrees() const;      // internal degree d(v), loops twice
};

// Oriented-edge table. Edge e yields bonds 2e (u->v) and 2e+1 (v->u), so the
// ordering is determined by the input edge order alone.
struct BondTable {
  int bond_count = 0;
  std::vector<int> origin;
  std::vector<int> terminus;
  std::vector<int> edge_of;
  std::vector<double> length;

  static BondTable build(const QuantumGraph& g);

  int reverse(int b) const { return b ^ 1; }
};

struct BoundLimits {
  int max_degree = 0;    // D
  int max_leads = 0;     // n0
  double min_length = 0.0;
  double max_length = 0.0;
};

struct ValidationReport {
  bool satisfies_bounds = false;  // observed extremes within `limits` (true when no limits given)
  int max_degree = 0;             // observed D
  int max_leads = 0;              // observed n0
  double min_length = 0.0;
  double max_length = 0.0;
  double total_length = 0.0;
  std::vector<int> balanced_vertices;  // v with n(v) = d(v)
  bool unbalanced = false;             // no balanced vertex
  int lead_vertex_count = 0;           // g = #{v : n(v) > 0}
};

// Throws InputError when g breaks a structural invariant (bad endpoint,
// non-positive or non-finite length, wrong leads size, isolated vertex).
void check_valid(const QuantumGraph& g);

// Parses the JSON graph document:
//   {"vertices": <int>, "edges": [{"u":..,"v":..,"length":..}...], "leads": [..]}
// "leads" may be omitted (all zeros). Rejects NaN/Inf and non-positive lengths.
QuantumGraph parse_graph(const std::string& text);

// Inverse of parse_graph, used for reproducible ensemble dumps.
std::string serialize_graph(const QuantumGraph& g);

QuantumGraph load_graph_file(const std::string& path);

ValidationReport validate(const QuantumGraph& g,
                          const std::optional<BoundLimits>& limits = std::nullopt);

// Same graph with every lead removed; edges are copied bit-identically.
QuantumGraph remove_leads(const QuantumGraph& g);

// K = (1/L_min) * max_v [ln(n(v)+d(v)) - ln|d(v)-n(v)|]. Every resonance lies
// in the strip -K <= Im z <= 0. Requires every vertex to satisfy n(v) != d(v).
double strip_bound(const QuantumGraph& g);

}  // namespace reslab
