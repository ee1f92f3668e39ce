#include "reslab/ensembles.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <sstream>

#include "reslab/rng.hpp"

namespace reslab {

namespace {

// Stream ids: draws for one purpose never disturb the others.
constexpr std::uint64_t kTopologyStream = 1;
constexpr std::uint64_t kLengthStream = 2;
constexpr std::uint64_t kLeadStream = 3;
constexpr std::uint64_t kGaussianStream = 1;
constexpr std::uint64_t kDampStream = 2;

// First `k` entries of a seeded Fisher-Yates shuffle of 0..n-1.
std::vector<int> sample_distinct(int n, int k, Rng rng) {
  std::vector<int> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace

void check_valid(const EnsembleSpec& spec) {
  if (spec.n_vertices < 1) throw InputError("ensemble: n_vertices must be positive");
  if (spec.degree < 3) throw InputError("ensemble: regular degree must be at least 3");
  if ((static_cast<long long>(spec.degree) * spec.n_vertices) % 2 != 0)
    throw InputError("ensemble: degree * n_vertices must be even");
  if (!(spec.length_min > 0.0) || !(spec.length_min <= spec.length_max) ||
      !std::isfinite(spec.length_max))
    throw InputError("ensemble: need 0 < length_min <= length_max");
  if (spec.lead_count < 0 || spec.lead_count > spec.n_vertices)
    throw InputError("ensemble: lead_count must lie in [0, n_vertices]");
}

QuantumGraph random_regular_graph(const EnsembleSpec& spec) {
  check_valid(spec);
  const Rng root(spec.seed);

  // Pairing model: d stubs per vertex, shuffled, paired consecutively.
  std::vector<int> stubs(static_cast<std::size_t>(spec.n_vertices) * spec.degree);
  for (std::size_t i = 0; i < stubs.size(); ++i)
    stubs[i] = static_cast<int>(i) / spec.degree;
  Rng topo = root.stream(kTopologyStream);
  for (std::size_t i = stubs.size(); i > 1; --i)
    std::swap(stubs[i - 1], stubs[topo.below(i)]);

  QuantumGraph g;
  g.vertex_count = spec.n_vertices;
  g.leads.assign(spec.n_vertices, 0);
  Rng len = root.stream(kLengthStream);
  for (std::size_t i = 0; i + 1 < stubs.size(); i += 2)
    g.edges.push_back({stubs[i], stubs[i + 1], len.uniform(spec.length_min, spec.length_max)});

  for (int v : sample_distinct(spec.n_vertices, spec.lead_count, root.stream(kLeadStream)))
    g.leads[v] = 1;

  check_valid(g);
  return g;
}

namespace {

// Parses "name" or "name(a, b)" with numeric arguments.
struct FixtureName {
  std::string word;
  std::vector<double> args;
};

FixtureName parse_fixture_name(const std::string& name) {
  FixtureName out;
  std::size_t i = 0;
  auto skip_ws = [&] {
    while (i < name.size() && std::isspace(static_cast<unsigned char>(name[i]))) ++i;
  };
  skip_ws();
  while (i < name.size() &&
         (std::isalnum(static_cast<unsigned char>(name[i])) || name[i] == '_'))
    out.word.push_back(name[i++]);
  skip_ws();
  if (i == name.size()) {
    if (out.word.empty()) throw InputError("fixture: empty name");
    return out;
  }
  if (name[i] != '(') throw InputError("fixture: malformed name '" + name + "'");
  ++i;
  while (true) {
    skip_ws();
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(name.substr(i), &used);
    } catch (const std::exception&) {
      throw InputError("fixture: bad argument in '" + name + "'");
    }
    out.args.push_back(v);
    i += used;
    skip_ws();
    if (i < name.size() && name[i] == ',') {
      ++i;
      continue;
    }
    break;
  }
  if (i >= name.size() || name[i] != ')')
    throw InputError("fixture: missing ')' in '" + name + "'");
  ++i;
  skip_ws();
  if (i != name.size()) throw InputError("fixture: trailing characters in '" + name + "'");
  return out;
}

int int_arg(double v, const char* what) {
  const double r = std::round(v);
  if (!(std::abs(v - r) < 1e-9) || r < -1e15)
    throw InputError(std::string("fixture: ") + what + " must be an integer");
  return static_cast<int>(r);
}

QuantumGraph make_path(int n, double len, bool open_ends) {
  if (n < 1) throw InputError("fixture: path needs at least one edge");
  if (!(len > 0.0)) throw InputError("fixture: edge length must be positive");
  QuantumGraph g;
  g.vertex_count = n + 1;
  for (int i = 0; i < n; ++i) g.edges.push_back({i, i + 1, len});
  g.leads.assign(n + 1, 0);
  if (open_ends) {
    g.leads.front() = 1;
    g.leads.back() = 1;
  }
  return g;
}

QuantumGraph make_cycle(int k, int lead_count) {
  if (k < 2) throw InputError("fixture: cycle needs at least two edges");
  if (lead_count < 0 || lead_count > k)
    throw InputError("fixture: cycle lead count must lie in [0, k]");
  QuantumGraph g;
  g.vertex_count = k;
  for (int i = 0; i < k; ++i) g.edges.push_back({i, (i + 1) % k, 1.0});
  g.leads.assign(k, 0);
  for (int v = 0; v < lead_count; ++v) g.leads[v] = 1;
  return g;
}

}  // namespace

QuantumGraph fixture(const std::string& name) {
  const FixtureName f = parse_fixture_name(name);
  auto expect_args = [&](std::size_t n) {
    if (f.args.size() != n)
      throw InputError("fixture: '" + f.word + "' takes " + std::to_string(n) + " argument(s)");
  };
  if (f.word == "interval") {
    expect_args(1);
    return make_path(1, f.args[0], false);
  }
  if (f.word == "neumann_path") {
    expect_args(2);
    return make_path(int_arg(f.args[0], "edge count"), f.args[1], false);
  }
  if (f.word == "balanced_path") {
    expect_args(2);
    return make_path(int_arg(f.args[0], "edge count"), f.args[1], true);
  }
  if (f.word == "commensurate_cycle") {
    expect_args(2);
    return make_cycle(int_arg(f.args[0], "cycle size"), int_arg(f.args[1], "lead count"));
  }
  if (f.word == "triangle_lead") {
    expect_args(0);
    return make_cycle(3, 1);
  }
  throw InputError("fixture: unknown name '" + f.word + "'");
}

HermitianPair hermitian_pair(int n, int damp_count, double damp_scale, std::uint64_t seed) {
  if (n < 1) throw InputError("hermitian_pair: n must be positive");
  if (damp_count < 0 || damp_count > n)
    throw InputError("hermitian_pair: damp_count must lie in [0, n]");
  if (!(damp_scale > 0.0) || !std::isfinite(damp_scale))
    throw InputError("hermitian_pair: damp_scale must be positive");

  const Rng root(seed);
  Rng gauss = root.stream(kGaussianStream);
  Eigen::MatrixXcd g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double re = gauss.normal();
      const double im = gauss.normal();
      g(i, j) = Complex(re, im) / std::sqrt(2.0);
    }

  HermitianPair out;
  out.A = 0.5 * (g + g.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> sa(out.A, Eigen::EigenvaluesOnly);
  const double norm = std::max(std::abs(sa.eigenvalues().minCoeff()),
                               std::abs(sa.eigenvalues().maxCoeff()));
  if (norm > 0.0) out.A /= norm;

  out.B = Eigen::MatrixXcd::Zero(n, n);
  for (int v : sample_distinct(n, damp_count, root.stream(kDampStream)))
    out.B(v, v) = Complex(-damp_scale, 0.0);
  out.b_trace_norm = damp_scale * damp_count;

  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(out.A + Complex(0.0, 1.0) * out.B,
                                                 /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success)
    throw NumericalError("hermitian_pair: eigensolver failed to converge");
  out.eigenvalues.assign(es.eigenvalues().data(), es.eigenvalues().data() + n);
  std::sort(out.eigenvalues.begin(), out.eigenvalues.end(), [](Complex a, Complex b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
  return out;
}

}  // namespace reslab
