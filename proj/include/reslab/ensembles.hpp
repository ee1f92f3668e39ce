#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "reslab/common.hpp"
#include "reslab/graph.hpp"

namespace reslab {

// Parameters of one random-graph ensemble member.
struct EnsembleSpec {
  int n_vertices = 0;
  int degree = 3;  // regular degree, >= 3
  double length_min = 1.0;
  double length_max = 2.0;
  int lead_count = 0;  // distinct vertices opened with one lead each
  std::uint64_t seed = 0;
};

// Throws InputError unless: n_vertices >= 1, degree >= 3, degree*n_vertices
// even, 0 < length_min <= length_max, 0 <= lead_count <= n_vertices.
void check_valid(const EnsembleSpec& spec);

// Pairing-model d-regular multigraph (loops and parallel edges allowed),
// i.i.d. uniform lengths, one lead on each of lead_count distinct vertices.
// Deterministic in the seed; topology, lengths, and lead placement draw from
// independent derived streams, so changing lead_count alone never reshuffles
// the underlying closed graph.
QuantumGraph random_regular_graph(const EnsembleSpec& spec);

// Canonical named fixtures:
//   interval(L)                one closed edge of length L
//   neumann_path(n, L)         closed path of n edges, length L each
//   balanced_path(n, L)        the same path with one lead at each endpoint
//   commensurate_cycle(k, g)   k-cycle, unit lengths, g leads on distinct vertices
//   triangle_lead              commensurate_cycle(3, 1)
// Unknown or malformed names throw InputError.
QuantumGraph fixture(const std::string& name);

// Random Hermitian matrix plus imaginary diagonal damping: the matrix-model
// counterpart of opening a closed system on a few sites.
struct HermitianPair {
  Eigen::MatrixXcd A;                // Hermitian, rescaled to operator norm 1
  Eigen::MatrixXcd B;                // diagonal, entries 0 or -damp_scale
  std::vector<Complex> eigenvalues;  // spectrum of A + iB, sorted by (Re, Im)
  double b_trace_norm = 0.0;         // damp_scale * damp_count
};

// A = (G + G*)/2 normalized to ||A|| = 1 (G i.i.d. standard complex Gaussian),
// B = -damp_scale on damp_count seeded distinct coordinates. Eigenvalues of
// A + iB all satisfy Im <= 0. Deterministic in the seed.
HermitianPair hermitian_pair(int n, int damp_count, double damp_scale, std::uint64_t seed);

}  // namespace reslab
