#include "reslab/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "reslab/common.hpp"
#include "reslab/ensembles.hpp"
#include "reslab/graph.hpp"
#include "reslab/report.hpp"
#include "reslab/secular.hpp"
#include "reslab/solver.hpp"
#include "reslab/statistics.hpp"

namespace reslab {

namespace {

using nlohmann::ordered_json;

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

// "lo:hi" with decimal or scientific literals.
Range parse_range(const std::string& text, const std::string& what) {
  const auto colon = text.find(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 >= text.size()) {
    throw InputError(what + " must have the form lo:hi, got '" + text + "'");
  }
  Range r;
  std::size_t used = 0;
  try {
    r.lo = std::stod(text.substr(0, colon), &used);
    if (used != colon) throw std::invalid_argument("trailing characters");
    const std::string hi = text.substr(colon + 1);
    r.hi = std::stod(hi, &used);
    if (used != hi.size()) throw std::invalid_argument("trailing characters");
  } catch (const std::exception&) {
    throw InputError(what + " must have the form lo:hi with numeric bounds, got '" + text + "'");
  }
  return r;
}

void write_output(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out_path, std::ios::binary);
  if (!f) throw InputError("cannot open output file '" + out_path + "'");
  f << text;
  if (!f) throw InputError("failed while writing '" + out_path + "'");
}

std::uint64_t env_seed_override(std::uint64_t seed) {
  const char* env = std::getenv("RESLAB_SEED");
  if (env == nullptr || *env == '\0') return seed;
  std::uint64_t value = 0;
  const char* end = env + std::string_view(env).size();
  const auto [ptr, ec] = std::from_chars(env, end, value);
  if (ec != std::errc{} || ptr != end) {
    throw InputError(std::string("RESLAB_SEED must be an unsigned integer, got '") + env + "'");
  }
  return value;
}

WindingMethod parse_method(const std::string& name) {
  if (name == "auto") return WindingMethod::kAuto;
  if (name == "quadrature") return WindingMethod::kQuadrature;
  if (name == "tracking") return WindingMethod::kTracking;
  throw InputError("unknown winding method '" + name + "'");
}

ordered_json range_json(const Range& r) { return ordered_json::array({r.lo, r.hi}); }

// ---------------------------------------------------------------------------
// validate

int cmd_validate(const std::string& graph_path) {
  const QuantumGraph g = load_graph_file(graph_path);
  const ValidationReport rep = validate(g);

  std::ostringstream out;
  out << "vertices: " << g.vertex_count << '\n';
  out << "internal edges: " << g.edges.size() << '\n';
  out << "total length: " << format_double(rep.total_length) << '\n';
  out << "max degree: " << rep.max_degree << '\n';
  out << "max leads: " << rep.max_leads << '\n';
  out << "lead vertices: " << rep.lead_vertex_count << '\n';
  if (rep.balanced_vertices.empty()) {
    out << "balanced vertices: none\n";
  } else {
    out << "balanced vertices: [";
    for (std::size_t i = 0; i < rep.balanced_vertices.size(); ++i) {
      if (i != 0) out << ", ";
      out << rep.balanced_vertices[i];
    }
    out << "]\n";
    out << "warning: balanced vertices present; the resonance strip is unbounded\n";
  }
  out << "unbalanced: " << (rep.unbalanced ? "true" : "false") << '\n';
  if (rep.unbalanced) {
    out << "strip bound: " << format_double(strip_bound(g)) << '\n';
  }
  std::cout << out.str();
  return 0;
}

// ---------------------------------------------------------------------------
// resonances

int cmd_resonances(const std::string& graph_path, const Range& re, const Range& im, double tol,
                   bool allow_origin, const std::string& method, const std::string& format,
                   const std::string& out_path, const std::string& svg_path, int threads) {
  if (tol <= 0.0) throw InputError("--tol must be positive");
  const QuantumGraph g = load_graph_file(graph_path);
  const ValidationReport vrep = validate(g);
  const SecularSystem sys = assemble(g);
  SecularEvaluator ev(sys);

  SolverOptions opts;
  opts.tol = tol;
  opts.allow_origin = allow_origin;
  opts.method = parse_method(method);

  const Rectangle rect{re.lo, re.hi, im.lo, im.hi};
  const std::vector<Resonance> res = find_resonances(ev, rect, opts);

  std::optional<double> strip;
  if (vrep.unbalanced) strip = strip_bound(g);

  if (!svg_path.empty()) write_output(resonance_svg(res, strip), svg_path);

  if (format == "csv") {
    write_output(resonances_csv(res), out_path);
  } else {
    ordered_json config{{"command", "resonances"},
                        {"graph", graph_path},
                        {"re", range_json(re)},
                        {"im", range_json(im)},
                        {"tol", tol},
                        {"allow_origin", allow_origin},
                        {"method", method},
                        {"format", format},
                        {"threads", threads}};
    long total = 0;
    for (const auto& r : res) total += r.multiplicity;
    ordered_json diagnostics{{"resonance_count", res.size()}, {"total_multiplicity", total}};
    if (strip) diagnostics["strip_bound"] = *strip;
    ordered_json results{{"resonances", resonances_json_rows(res)}};
    write_output(make_report(std::move(config), std::move(results), std::move(diagnostics)).dump(2) +
                     "\n",
                 out_path);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// compare

ordered_json measure_json(const BinnedMeasure& m) {
  return ordered_json{{"edges", m.edges}, {"weights", m.weights}, {"total_length", m.total_length}};
}

int cmd_compare(const std::string& graph_path, const Range& window, double bin_width, double cutoff,
                const std::string& out_path, int threads) {
  const QuantumGraph g = load_graph_file(graph_path);
  const ComparisonReport rep = compare_open_closed(g, window.lo, window.hi, bin_width, cutoff);

  ordered_json config{{"command", "compare"}, {"graph", graph_path},   {"window", range_json(window)},
                      {"bins", bin_width},    {"cutoff", cutoff},      {"threads", threads}};
  double open_total = 0.0;
  for (double w : rep.open_measure.weights) open_total += w;
  double closed_total = 0.0;
  for (double w : rep.closed_measure.weights) closed_total += w;
  ordered_json results{{"open", measure_json(rep.open_measure)},
                       {"closed", measure_json(rep.closed_measure)},
                       {"distance", rep.distance}};
  ordered_json diagnostics{{"open_total_weight", open_total},
                           {"closed_total_weight", closed_total}};
  write_output(make_report(std::move(config), std::move(results), std::move(diagnostics)).dump(2) +
                   "\n",
               out_path);
  return 0;
}

// ---------------------------------------------------------------------------
// scan

int cmd_scan(const std::string& graph_path, const Range& window, double depth,
             const std::vector<double>& deltas, const std::string& out_path, int threads) {
  const QuantumGraph g = load_graph_file(graph_path);
  const DeltaScan scan = delta_scan(g, window.lo, window.hi, depth, deltas);

  ordered_json config{{"command", "scan"},
                      {"graph", graph_path},
                      {"window", range_json(window)},
                      {"depth", depth},
                      {"deltas", deltas},
                      {"threads", threads}};
  ordered_json results{{"deltas", scan.deltas},
                       {"counts", scan.counts},
                       {"fit_defined", scan.fit_defined},
                       {"fitted_exponent", scan.fitted_exponent},
                       {"fitted_constant", scan.fitted_constant}};
  ordered_json diagnostics{{"lead_vertices", validate(g).lead_vertex_count}};
  write_output(make_report(std::move(config), std::move(results), std::move(diagnostics)).dump(2) +
                   "\n",
               out_path);
  return 0;
}

// ---------------------------------------------------------------------------
// ensemble

struct MemberResult {
  std::uint64_t seed = 0;
  ComparisonReport report;
  std::exception_ptr error;
};

int cmd_ensemble(const std::vector<int>& n_list, int degree, const Range& lengths, int leads,
                 std::uint64_t seed, const Range& window, double bin_width, double cutoff,
                 const std::string& out_path, int threads) {
  if (n_list.empty()) throw InputError("--n requires at least one vertex count");
  seed = env_seed_override(seed);

  // Validate every member spec up front so bad input fails before any work.
  std::vector<EnsembleSpec> specs(n_list.size());
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    EnsembleSpec spec;
    spec.n_vertices = n_list[i];
    spec.degree = degree;
    spec.length_min = lengths.lo;
    spec.length_max = lengths.hi;
    spec.lead_count = leads;
    spec.seed = seed ^ static_cast<std::uint64_t>(i);
    check_valid(spec);
    specs[i] = spec;
  }

  std::vector<MemberResult> members(n_list.size());
  parallel_for(n_list.size(), threads, [&](std::size_t i) {
    members[i].seed = specs[i].seed;
    try {
      const QuantumGraph g = random_regular_graph(specs[i]);
      members[i].report = compare_open_closed(g, window.lo, window.hi, bin_width, cutoff);
    } catch (...) {
      members[i].error = std::current_exception();
    }
  });
  for (const auto& m : members) {
    if (m.error) std::rethrow_exception(m.error);
  }

  ordered_json config{{"command", "ensemble"},
                      {"n", n_list},
                      {"degree", degree},
                      {"lengths", range_json(lengths)},
                      {"leads", leads},
                      {"seed", seed},
                      {"window", range_json(window)},
                      {"bins", bin_width},
                      {"cutoff", cutoff},
                      {"threads", threads}};
  ordered_json rows = ordered_json::array();
  for (std::size_t i = 0; i < members.size(); ++i) {
    double open_total = 0.0;
    for (double w : members[i].report.open_measure.weights) open_total += w;
    double closed_total = 0.0;
    for (double w : members[i].report.closed_measure.weights) closed_total += w;
    rows.push_back({{"n", n_list[i]},
                    {"seed", members[i].seed},
                    {"distance", members[i].report.distance},
                    {"open_total_weight", open_total},
                    {"closed_total_weight", closed_total}});
  }
  ordered_json results{{"members", rows}};
  ordered_json diagnostics{{"member_count", members.size()}};
  write_output(make_report(std::move(config), std::move(results), std::move(diagnostics)).dump(2) +
                   "\n",
               out_path);
  return 0;
}

// ---------------------------------------------------------------------------
// hermitian

int cmd_hermitian(int n, const std::vector<int>& damp_counts, double damp_scale,
                  const std::vector<double>& deltas, std::uint64_t seed, const Range& window,
                  const std::string& out_path, int threads) {
  if (damp_counts.empty()) throw InputError("--damp-counts requires at least one value");
  if (deltas.empty()) throw InputError("--deltas requires at least one value");
  seed = env_seed_override(seed);

  struct Row {
    double b_trace_norm = 0.0;
    std::vector<long> counts;
    std::exception_ptr error;
  };
  std::vector<Row> rows(damp_counts.size());
  parallel_for(damp_counts.size(), threads, [&](std::size_t i) {
    try {
      const HermitianPair pair = hermitian_pair(n, damp_counts[i], damp_scale, seed);
      rows[i].b_trace_norm = pair.b_trace_norm;
      for (double delta : deltas) {
        rows[i].counts.push_back(hermitian_strip_count(pair, delta, window.lo, window.hi));
      }
    } catch (...) {
      rows[i].error = std::current_exception();
    }
  });
  for (const auto& r : rows) {
    if (r.error) std::rethrow_exception(r.error);
  }

  ordered_json config{{"command", "hermitian"},
                      {"n", n},
                      {"damp_counts", damp_counts},
                      {"scale", damp_scale},
                      {"deltas", deltas},
                      {"seed", seed},
                      {"window", range_json(window)},
                      {"threads", threads}};
  ordered_json counts = ordered_json::array();
  ordered_json norms = ordered_json::array();
  for (const auto& r : rows) {
    counts.push_back(r.counts);
    norms.push_back(r.b_trace_norm);
  }
  ordered_json results{{"counts", counts}, {"b_trace_norms", norms}};
  ordered_json diagnostics{{"rows", rows.size()}};
  write_output(make_report(std::move(config), std::move(results), std::move(diagnostics)).dump(2) +
                   "\n",
               out_path);
  return 0;
}

}  // namespace

int run_mapped(const std::function<int()>& body) {
  try {
    return body();
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const PolicyError& e) {
    std::cerr << "policy violation: " << e.what() << '\n';
    return 4;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Resonances of open quantum graphs"};
  app.require_subcommand(1);

  // Shared option storage. Each subcommand binds only the flags it uses.
  std::string graph_path;
  std::string re_text, im_text, window_text, lengths_text = "1:2";
  std::string out_path, svg_path;
  std::string format = "csv";
  std::string method = "auto";
  double tol = 1e-10;
  bool allow_origin = false;
  double bin_width = 0.0;
  double cutoff = 0.0;
  double depth = 0.0;
  std::vector<double> deltas;
  std::vector<int> n_list;
  std::vector<int> damp_counts;
  int degree = 3;
  int leads = 0;
  int n_dim = 0;
  double damp_scale = 0.0;
  std::uint64_t seed = 0;
  int threads = default_thread_count();

  auto add_threads = [&](CLI::App* cmd) {
    cmd->add_option("--threads", threads, "Concurrency cap (default: available parallelism)")
        ->check(CLI::PositiveNumber);
  };
  auto add_out = [&](CLI::App* cmd) {
    cmd->add_option("--out", out_path, "Output file (default: stdout)");
  };

  CLI::App* validate_cmd =
      app.add_subcommand("validate", "Check a graph file and print its structural report");
  validate_cmd->add_option("graph", graph_path, "Graph JSON file")->required();

  CLI::App* res_cmd =
      app.add_subcommand("resonances", "Locate resonances inside a rectangle");
  res_cmd->add_option("graph", graph_path, "Graph JSON file")->required();
  res_cmd->add_option("--re", re_text, "Real range lo:hi")->required();
  res_cmd->add_option("--im", im_text, "Imaginary range lo:hi (upper bound may be 0)")->required();
  res_cmd->add_option("--tol", tol, "Root tolerance");
  res_cmd->add_flag("--allow-origin", allow_origin, "Excise the origin instead of rejecting it");
  res_cmd->add_option("--method", method, "Winding engine")
      ->check(CLI::IsMember({"auto", "quadrature", "tracking"}));
  res_cmd->add_option("--format", format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  res_cmd->add_option("--svg", svg_path, "Write an SVG scatter plot to this path");
  add_out(res_cmd);
  add_threads(res_cmd);

  CLI::App* cmp_cmd =
      app.add_subcommand("compare", "Binned open-vs-closed counting measure comparison");
  cmp_cmd->add_option("graph", graph_path, "Graph JSON file")->required();
  cmp_cmd->add_option("--window", window_text, "Real window lo:hi")->required();
  cmp_cmd->add_option("--bins", bin_width, "Bin width")->required()->check(CLI::PositiveNumber);
  cmp_cmd->add_option("--cutoff", cutoff, "Strip depth cutoff for the open side")->required();
  add_out(cmp_cmd);
  add_threads(cmp_cmd);

  CLI::App* scan_cmd = app.add_subcommand("scan", "Count resonances below depth cutoffs");
  scan_cmd->add_option("graph", graph_path, "Graph JSON file")->required();
  scan_cmd->add_option("--window", window_text, "Real window lo:hi")->required();
  scan_cmd->add_option("--depth", depth, "Maximum strip depth")->required()
      ->check(CLI::PositiveNumber);
  scan_cmd->add_option("--deltas", deltas, "Decreasing depth cutoffs, comma separated")
      ->required()
      ->delimiter(',');
  add_out(scan_cmd);
  add_threads(scan_cmd);

  CLI::App* ens_cmd =
      app.add_subcommand("ensemble", "Run the open-vs-closed comparison over random graphs");
  ens_cmd->add_option("--n", n_list, "Vertex counts, comma separated")->required()->delimiter(',');
  ens_cmd->add_option("--degree", degree, "Vertex degree");
  ens_cmd->add_option("--lengths", lengths_text, "Edge length range lo:hi");
  ens_cmd->add_option("--leads", leads, "Number of lead vertices");
  ens_cmd->add_option("--seed", seed, "Base seed (member i uses seed XOR i)");
  ens_cmd->add_option("--window", window_text, "Real window lo:hi")->required();
  ens_cmd->add_option("--bins", bin_width, "Bin width")->required()->check(CLI::PositiveNumber);
  ens_cmd->add_option("--cutoff", cutoff, "Strip depth cutoff for the open side")->required();
  add_out(ens_cmd);
  add_threads(ens_cmd);

  CLI::App* herm_cmd =
      app.add_subcommand("hermitian", "Strip counts for damped Hermitian matrix pairs");
  herm_cmd->add_option("--n", n_dim, "Matrix dimension")->required()->check(CLI::PositiveNumber);
  herm_cmd->add_option("--damp-counts", damp_counts, "Damped coordinate counts, comma separated")
      ->required()
      ->delimiter(',');
  herm_cmd->add_option("--scale", damp_scale, "Damping strength")->required();
  herm_cmd->add_option("--deltas", deltas, "Depth cutoffs, comma separated")
      ->required()
      ->delimiter(',');
  herm_cmd->add_option("--seed", seed, "Seed");
  herm_cmd->add_option("--window", window_text, "Real window lo:hi")->required();
  add_out(herm_cmd);
  add_threads(herm_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  return run_mapped([&]() -> int {
    if (validate_cmd->parsed()) return cmd_validate(graph_path);
    if (res_cmd->parsed()) {
      return cmd_resonances(graph_path, parse_range(re_text, "--re"), parse_range(im_text, "--im"),
                            tol, allow_origin, method, format, out_path, svg_path, threads);
    }
    if (cmp_cmd->parsed()) {
      return cmd_compare(graph_path, parse_range(window_text, "--window"), bin_width, cutoff,
                         out_path, threads);
    }
    if (scan_cmd->parsed()) {
      return cmd_scan(graph_path, parse_range(window_text, "--window"), depth, deltas, out_path,
                      threads);
    }
    if (ens_cmd->parsed()) {
      return cmd_ensemble(n_list, degree, parse_range(lengths_text, "--lengths"), leads, seed,
                          parse_range(window_text, "--window"), bin_width, cutoff, out_path,
                          threads);
    }
    if (herm_cmd->parsed()) {
      return cmd_hermitian(n_dim, damp_counts, damp_scale, deltas, seed,
                           parse_range(window_text, "--window"), out_path, threads);
    }
    throw InputError("no subcommand given");
  });
}

}  // namespace reslab
