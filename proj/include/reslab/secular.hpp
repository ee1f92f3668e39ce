#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <complex>
#include <memory>
#include <vector>

#include "reslab/common.hpp"
#include "reslab/graph.hpp"

namespace reslab {

// Bond scattering system: resonances are the nonzero solutions of
// det(Id - U(z)) = 0 with U(z) = S * diag(e^{i z L_b}).
struct SecularSystem {
  BondTable bonds;
  Eigen::MatrixXd S;        // side bond_count; S(b,b') = 0 unless origin(b) = terminus(b')
  Eigen::VectorXd lengths;  // per bond, equal on a bond and its reverse
  bool closed = false;      // true when built from a lead-free graph

  double min_length() const { return lengths.size() ? lengths.minCoeff() : 0.0; }
  double max_length() const { return lengths.size() ? lengths.maxCoeff() : 0.0; }
  double total_bond_length() const { return lengths.sum(); }  // 2 * L(Q)
};

// Vertex scattering block -Id + (2/(n+d)) * J on the d outgoing bonds.
/// Eigenvalues: -1 with multiplicity d-1, and -1 + 2d/(n+d) once.
Eigen::MatrixXd vertex_sigma(int d, int n);

SecularSystem assemble(const QuantumGraph& g);

Eigen::MatrixXcd evaluate_U(const SecularSystem& sys, Complex z);
Eigen::MatrixXcd evaluate_U_derivative(const SecularSystem& sys, Complex z);

struct SecularValue {
  Complex z;
  Complex det;                  // may under/overflow for large systems; see log_abs_det
  double log_abs_det = 0.0;     // log|det(Id - U(z))|, overflow-safe
  double det_arg = 0.0;         // arg det(Id - U(z)) in (-pi, pi]
  Complex log_derivative;       // d/dz log det(Id - U(z)) = -tr[(Id-U)^{-1} U']
  bool log_derivative_valid = false;  // false when Id-U(z) is numerically singular
  double smallest_singular = 0.0;
};

// Full evaluation via a dense pivoted factorization. The log-derivative is
// flagged invalid when smallest_singular < 1e-13 * bond_count (contour code
// must jitter away from such points).
SecularValue secular_value(const SecularSystem& sys, Complex z);

// Schatten-1 norm: sum of singular values.
double trace_norm(const Eigen::MatrixXcd& m);

struct DiagnosticsReport {
  double open_norm = 0.0;            // operator norm of the open S
  double closed_unitarity_defect = 0.0;  // || S~ S~^T - Id ||
  double max_trace_gap = 0.0;        // max over samples of || U(z) - U~(z) ||_1
  double trace_gap_per_lead_vertex = 0.0;  // max_trace_gap / g (0 when g = 0)
  double speed_min = 0.0;            // extreme eigenvalues of -i U~'(x) U~(x)^{-1}
  double speed_max = 0.0;            // at real sample points; expect [L_min, L_max]
  double max_resolvent_product = 0.0;  // max over samples of ||(Id-U~(z))^{-1}|| * |Im z|
};

// Compares an open system with its lead-stripped version on sample points.
// Both systems must come from the same underlying edge set.
DiagnosticsReport hypothesis_diagnostics(const SecularSystem& open_sys,
                                         const SecularSystem& closed_sys,
                                         const std::vector<Complex>& sample_points);

// --- contour evaluation support -------------------------------------------

struct LogDet {
  double log_abs = 0.0;
  double arg = 0.0;     // principal value
  bool near_singular = false;  // a pivot collapsed; the point sits on a zero
};

struct LogDerivative {
  Complex value;        // d/dz log det(Id - U(z))
  bool valid = false;   // false when Id - U(z) is numerically singular
};

// Repeated-evaluation engine bound to one system. Dense factorizations are
// the reference path; systems above the size threshold use a sparse LU for
// determinant-only queries (the values agree to roundoff, only speed differs).
class SecularEvaluator {
 public:
  // Takes its own copy of the system: the evaluator outlives any temporary
  // it was built from.
  explicit SecularEvaluator(SecularSystem sys);
  ~SecularEvaluator();
  SecularEvaluator(const SecularEvaluator&) = delete;
  SecularEvaluator& operator=(const SecularEvaluator&) = delete;

  const SecularSystem& system() const { return sys_; }
  int side() const { return sys_.bonds.bond_count; }

  // log|det| and principal arg of det(Id - U(z)).
  LogDet log_det(Complex z) const;

  // -tr[(Id - U(z))^{-1} U'(z)] plus the determinant pieces, dense path.
  SecularValue value(Complex z) const;

  // The log-derivative alone, skipping the singular-value computation that
  // value() performs; validity judged from the factorization pivots. This is
  // the workhorse for quadrature nodes and Newton steps.
  LogDerivative log_derivative(Complex z) const;

  // Number of singular values of Id - U(z) below tol (always a full SVD).
  int kernel_dimension(Complex z, double tol) const;

 private:
  struct Impl;
  const SecularSystem sys_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace reslab
