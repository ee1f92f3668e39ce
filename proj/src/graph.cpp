#include "reslab/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "reslab/common.hpp"

namespace reslab {

bool QuantumGraph::closed() const {
  for (int n : leads)
    if (n > 0) return false;
  return true;
}

double QuantumGraph::total_length() const {
  double total = 0.0;
  for (const Edge& e : edges) total += e.length;
  return total;
}

std::vector<int> QuantumGraph::degrees() const {
  std::vector<int> d(vertex_count, 0);
  for (const Edge& e : edges) {
    d[e.u] += 1;
    d[e.v] += 1;  // a loop hits this twice, giving the loop convention d += 2
  }
  return d;
}

BondTable BondTable::build(const QuantumGraph& g) {
  check_valid(g);
  BondTable t;
  t.bond_count = 2 * static_cast<int>(g.edges.size());
  t.origin.resize(t.bond_count);
  t.terminus.resize(t.bond_count);
  t.edge_of.resize(t.bond_count);
  t.length.resize(t.bond_count);
  for (int e = 0; e < static_cast<int>(g.edges.size()); ++e) {
    const Edge& ed = g.edges[e];
    t.origin[2 * e] = ed.u;
    t.terminus[2 * e] = ed.v;
    t.origin[2 * e + 1] = ed.v;
    t.terminus[2 * e + 1] = ed.u;
    t.edge_of[2 * e] = t.edge_of[2 * e + 1] = e;
    t.length[2 * e] = t.length[2 * e + 1] = ed.length;
  }
  return t;
}

void check_valid(const QuantumGraph& g) {
  if (g.vertex_count < 0) throw InputError("graph: negative vertex count");
  if (static_cast<int>(g.leads.size()) != g.vertex_count)
    throw InputError("graph: leads list must have one entry per vertex (got " +
                     std::to_string(g.leads.size()) + " for " +
                     std::to_string(g.vertex_count) + " vertices)");
  for (int v = 0; v < g.vertex_count; ++v)
    if (g.leads[v] < 0)
      throw InputError("graph: negative lead count at vertex " + std::to_string(v));
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    const Edge& e = g.edges[i];
    if (e.u < 0 || e.u >= g.vertex_count || e.v < 0 || e.v >= g.vertex_count)
      throw InputError("graph: edge " + std::to_string(i) + " endpoint out of range");
    if (!std::isfinite(e.length) || e.length <= 0.0)
      throw InputError("graph: edge " + std::to_string(i) + " has non-positive length");
  }
  const std::vector<int> d = g.degrees();
  for (int v = 0; v < g.vertex_count; ++v)
    if (d[v] == 0)
      throw InputError("graph: vertex " + std::to_string(v) +
                       " has no internal edge (degree 0)");
}

namespace {

nlohmann::json parse_document(const std::string& text) {
  nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw InputError("graph: malformed JSON document");
  if (!doc.is_object()) throw InputError("graph: top-level value must be an object");
  return doc;
}

int require_int(const nlohmann::json& j, const std::string& where) {
  if (!j.is_number_integer())
    throw InputError("graph: " + where + " must be an integer");
  return j.get<int>();
}

}  // namespace

QuantumGraph parse_graph(const std::string& text) {
  const nlohmann::json doc = parse_document(text);
  if (!doc.contains("vertices")) throw InputError("graph: missing \"vertices\"");
  QuantumGraph g;
  g.vertex_count = require_int(doc["vertices"], "\"vertices\"");
  if (g.vertex_count < 0) throw InputError("graph: \"vertices\" must be nonnegative");

  if (!doc.contains("edges") || !doc["edges"].is_array())
    throw InputError("graph: missing \"edges\" array");
  std::size_t idx = 0;
  for (const auto& je : doc["edges"]) {
    const std::string where = "edge " + std::to_string(idx);
    if (!je.is_object()) throw InputError("graph: " + where + " must be an object");
    if (!je.contains("u") || !je.contains("v") || !je.contains("length"))
      throw InputError("graph: " + where + " needs \"u\", \"v\" and \"length\"");
    Edge e;
    e.u = require_int(je["u"], where + " \"u\"");
    e.v = require_int(je["v"], where + " \"v\"");
    if (!je["length"].is_number())
      throw InputError("graph: " + where + " \"length\" must be a number");
    e.length = je["length"].get<double>();
    if (!std::isfinite(e.length))
      throw InputError("graph: " + where + " has non-finite length");
    if (e.length <= 0.0)
      throw InputError("graph: " + where + " has non-positive length");
    g.edges.push_back(e);
    ++idx;
  }

  if (doc.contains("leads")) {
    if (!doc["leads"].is_array())
      throw InputError("graph: \"leads\" must be an array");
    std::size_t v = 0;
    for (const auto& jl : doc["leads"]) {
      g.leads.push_back(require_int(jl, "leads[" + std::to_string(v) + "]"));
      ++v;
    }
  } else {
    g.leads.assign(g.vertex_count, 0);
  }

  check_valid(g);
  return g;
}

std::string serialize_graph(const QuantumGraph& g) {
  nlohmann::ordered_json doc;
  doc["vertices"] = g.vertex_count;
  doc["edges"] = nlohmann::ordered_json::array();
  for (const Edge& e : g.edges)
    doc["edges"].push_back({{"u", e.u}, {"v", e.v}, {"length", e.length}});
  doc["leads"] = g.leads;
  return doc.dump();
}

QuantumGraph load_graph_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("graph: cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_graph(buf.str());
}

ValidationReport validate(const QuantumGraph& g, const std::optional<BoundLimits>& limits) {
  check_valid(g);
  ValidationReport r;
  const std::vector<int> d = g.degrees();
  r.max_degree = *std::max_element(d.begin(), d.end());
  r.max_leads = g.leads.empty() ? 0 : *std::max_element(g.leads.begin(), g.leads.end());
  r.min_length = std::numeric_limits<double>::infinity();
  r.max_length = 0.0;
  for (const Edge& e : g.edges) {
    r.min_length = std::min(r.min_length, e.length);
    r.max_length = std::max(r.max_length, e.length);
  }
  r.total_length = g.total_length();
  for (int v = 0; v < g.vertex_count; ++v) {
    if (g.leads[v] == d[v]) r.balanced_vertices.push_back(v);
    if (g.leads[v] > 0) r.lead_vertex_count += 1;
  }
  r.unbalanced = r.balanced_vertices.empty();
  r.satisfies_bounds = true;
  if (limits) {
    r.satisfies_bounds = r.max_degree <= limits->max_degree &&
                         r.max_leads <= limits->max_leads &&
                         r.min_length >= limits->min_length &&
                         r.max_length <= limits->max_length;
  }
  return r;
}

QuantumGraph remove_leads(const QuantumGraph& g) {
  QuantumGraph out = g;
  out.leads.assign(g.vertex_count, 0);
  return out;
}

double strip_bound(const QuantumGraph& g) {
  check_valid(g);
  const std::vector<int> d = g.degrees();
  double worst = 0.0;
  double min_length = std::numeric_limits<double>::infinity();
  for (const Edge& e : g.edges) min_length = std::min(min_length, e.length);
  for (int v = 0; v < g.vertex_count; ++v) {
    const int n = g.leads[v];
    if (n == d[v])
      throw InputError("strip bound undefined (balanced vertex " + std::to_string(v) + ")");
    worst = std::max(worst, std::log(double(n + d[v])) - std::log(std::abs(double(d[v] - n))));
  }
  return worst / min_length;
}

}  // namespace reslab
