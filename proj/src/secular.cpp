#include "reslab/secular.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>

#include "reslab/common.hpp"

namespace reslab {

namespace {

constexpr Complex kI(0.0, 1.0);

// Side at which determinant-only queries switch to the sparse factorization
// and smallest-singular queries switch to inverse iteration.
constexpr int kDenseSvdLimit = 256;
constexpr int kSparseLimit = 160;

}  // namespace

Eigen::MatrixXd vertex_sigma(int d, int n) {
  if (d < 1) throw InputError("secular: vertex_sigma needs d >= 1");
  if (n < 0) throw InputError("secular: vertex_sigma needs n >= 0");
  const double f = 2.0 / double(n + d);
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(d, d, f);
  m.diagonal().array() -= 1.0;
  return m;
}

SecularSystem assemble(const QuantumGraph& g) {
  check_valid(g);
  SecularSystem sys;
  sys.bonds = BondTable::build(g);
  const int m = sys.bonds.bond_count;
  const std::vector<int> deg = g.degrees();

  std::vector<std::vector<int>> out_bonds(g.vertex_count);
  for (int b = 0; b < m; ++b) out_bonds[sys.bonds.origin[b]].push_back(b);

  sys.S = Eigen::MatrixXd::Zero(m, m);
  for (int bp = 0; bp < m; ++bp) {
    const int v = sys.bonds.terminus[bp];          // = origin(reverse(bp))
    const double f = 2.0 / double(g.leads[v] + deg[v]);
    const int rev = sys.bonds.reverse(bp);
    for (int b : out_bonds[v]) sys.S(b, bp) = f - (b == rev ? 1.0 : 0.0);
  }

  sys.lengths = Eigen::Map<const Eigen::VectorXd>(sys.bonds.length.data(), m);
  sys.closed = g.closed();
  return sys;
}

Eigen::MatrixXcd evaluate_U(const SecularSystem& sys, Complex z) {
  const int m = sys.bonds.bond_count;
  Eigen::MatrixXcd u(m, m);
  for (int b = 0; b < m; ++b)
    u.col(b) = sys.S.col(b) * std::exp(kI * z * sys.lengths[b]);
  return u;
}

Eigen::MatrixXcd evaluate_U_derivative(const SecularSystem& sys, Complex z) {
  const int m = sys.bonds.bond_count;
  Eigen::MatrixXcd u(m, m);
  for (int b = 0; b < m; ++b)
    u.col(b) = sys.S.col(b) * (kI * sys.lengths[b] * std::exp(kI * z * sys.lengths[b]));
  return u;
}

double trace_norm(const Eigen::MatrixXcd& m) {
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(m);
  return svd.singularValues().sum();
}

namespace {

double operator_norm(const Eigen::MatrixXcd& m) {
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(m);
  return svd.singularValues()(0);
}

Eigen::MatrixXcd id_minus_u(const SecularSystem& sys, Complex z) {
  const int m = sys.bonds.bond_count;
  Eigen::MatrixXcd a(m, m);
  for (int b = 0; b < m; ++b)
    a.col(b) = sys.S.col(b) * (-std::exp(kI * z * sys.lengths[b]));
  a.diagonal().array() += 1.0;
  return a;
}

struct DenseLogDet {
  double log_abs;
  double arg;
  double min_pivot;
};

DenseLogDet dense_log_det(const Eigen::PartialPivLU<Eigen::MatrixXcd>& lu) {
  DenseLogDet out{0.0, 0.0, std::numeric_limits<double>::infinity()};
  Complex phase(double(lu.permutationP().determinant()), 0.0);
  const auto diag = lu.matrixLU().diagonal();
  for (Eigen::Index i = 0; i < diag.size(); ++i) {
    const double a = std::abs(diag(i));
    out.min_pivot = std::min(out.min_pivot, a);
    if (a == 0.0) {
      out.log_abs = -std::numeric_limits<double>::infinity();
      continue;
    }
    out.log_abs += std::log(a);
    phase *= diag(i) / a;
  }
  out.arg = std::arg(phase);
  return out;
}

// Smallest singular value via block inverse iteration on (M* M)^{-1}; used
// above the dense SVD size limit. A block of 4 absorbs the near-degenerate
// trailing pairs that time-reversal symmetry produces, which would stall a
// single-vector iteration. The estimate is the smallest singular value of
// the projected block M*V, exact once span(V) contains the minimizer.
double inverse_iteration_sigma_min(const Eigen::MatrixXcd& a,
                                   const Eigen::PartialPivLU<Eigen::MatrixXcd>& lu, int m) {
  const int k = std::min(6, m);
  Eigen::MatrixXcd v(m, k);
  for (int j = 0; j < k; ++j)  // fixed deterministic start block
    for (int i = 0; i < m; ++i)
      v(i, j) = Complex(std::cos(0.7 * i + 0.3 + 1.7 * j), std::sin(1.3 * i + 0.1 + 0.9 * j));
  {
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(v);
    v = qr.householderQ() * Eigen::MatrixXcd::Identity(m, k);
  }
  double sigma = -1.0;
  for (int it = 0; it < 100; ++it) {
    Eigen::MatrixXcd x = lu.solve(lu.adjoint().solve(v));
    if (!x.allFinite()) return 0.0;
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(x);
    v = qr.householderQ() * Eigen::MatrixXcd::Identity(m, k);
    Eigen::JacobiSVD<Eigen::MatrixXcd> proj(a * v);
    const double next = proj.singularValues()(k - 1);
    if (!std::isfinite(next)) return 0.0;
    if (next < 1e-13 * double(m)) return next;  // gate triggers; no need to polish
    if (it > 5 && std::abs(next - sigma) <= 1e-12 * next) return next;
    sigma = next;
  }
  return sigma;
}

double smallest_singular_of(const Eigen::MatrixXcd& a,
                            const Eigen::PartialPivLU<Eigen::MatrixXcd>& lu) {
  const int m = static_cast<int>(a.rows());
  if (m < kDenseSvdLimit) {
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(a);
    return svd.singularValues()(m - 1);
  }
  return inverse_iteration_sigma_min(a, lu, m);
}

}  // namespace

SecularValue secular_value(const SecularSystem& sys, Complex z) {
  const int m = sys.bonds.bond_count;
  SecularValue out;
  out.z = z;
  const Eigen::MatrixXcd a = id_minus_u(sys, z);
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(a);
  const DenseLogDet ld = dense_log_det(lu);
  out.log_abs_det = ld.log_abs;
  out.det_arg = ld.arg;
  out.det = std::exp(Complex(ld.log_abs, ld.arg));
  out.smallest_singular = smallest_singular_of(a, lu);
  out.log_derivative_valid = out.smallest_singular >= 1e-13 * double(m);
  if (out.log_derivative_valid) {
    // -tr[(Id-U)^{-1} U'] with U' = U diag(iL) reduces to the inverse diagonal:
    // (A^{-1} U)_{bb} = (A^{-1})_{bb} - 1 for A = Id - U.
    const Eigen::MatrixXcd inv = lu.inverse();
    Complex acc(0.0, 0.0);
    for (int b = 0; b < m; ++b)
      acc += kI * sys.lengths[b] * (1.0 - inv(b, b));
    out.log_derivative = acc;
    if (!std::isfinite(acc.real()) || !std::isfinite(acc.imag())) {
      out.log_derivative_valid = false;
      out.log_derivative = Complex(0, 0);
    }
  }
  return out;
}

DiagnosticsReport hypothesis_diagnostics(const SecularSystem& open_sys,
                                         const SecularSystem& closed_sys,
                                         const std::vector<Complex>& sample_points) {
  if (open_sys.bonds.bond_count != closed_sys.bonds.bond_count)
    throw InputError("secular: diagnostics need systems over the same bond set");
  const int m = open_sys.bonds.bond_count;
  DiagnosticsReport r;
  r.open_norm = operator_norm(open_sys.S.cast<Complex>());
  {
    Eigen::MatrixXd defect = closed_sys.S * closed_sys.S.transpose();
    defect.diagonal().array() -= 1.0;
    r.closed_unitarity_defect = operator_norm(defect.cast<Complex>());
  }

  // Lead vertices are exactly those whose outgoing rows changed.
  int lead_vertices = 0;
  {
    std::vector<char> changed(m, 0);
    for (int b = 0; b < m; ++b)
      if ((open_sys.S.row(b) - closed_sys.S.row(b)).cwiseAbs().maxCoeff() > 0.0)
        changed[open_sys.bonds.origin[b]] = 1;  // vertex index < bond_count never overflows usage below
    std::vector<char> seen;
    for (int b = 0; b < m; ++b) {
      const int v = open_sys.bonds.origin[b];
      if (static_cast<int>(seen.size()) <= v) seen.resize(v + 1, 0);
      if (changed[v] && !seen[v]) {
        seen[v] = 1;
        ++lead_vertices;
      }
    }
  }

  r.speed_min = std::numeric_limits<double>::infinity();
  r.speed_max = -std::numeric_limits<double>::infinity();
  for (const Complex& z : sample_points) {
    r.max_trace_gap = std::max(
        r.max_trace_gap, trace_norm(evaluate_U(open_sys, z) - evaluate_U(closed_sys, z)));

    // Phase-speed generator at the real part of the sample; Hermitian with
    // spectrum inside [L_min, L_max] when the closed S is orthogonal.
    const double x = z.real();
    const Eigen::MatrixXcd u = evaluate_U(closed_sys, x);
    const Eigen::MatrixXcd du = evaluate_U_derivative(closed_sys, x);
    const Eigen::MatrixXcd gen = -kI * du * u.inverse();
    const Eigen::MatrixXcd herm = 0.5 * (gen + gen.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(herm, Eigen::EigenvaluesOnly);
    r.speed_min = std::min(r.speed_min, eig.eigenvalues().minCoeff());
    r.speed_max = std::max(r.speed_max, eig.eigenvalues().maxCoeff());

    if (z.imag() != 0.0) {
      const Eigen::MatrixXcd a = id_minus_u(closed_sys, z);
      Eigen::BDCSVD<Eigen::MatrixXcd> svd(a);
      const double sigma_min = svd.singularValues()(a.rows() - 1);
      if (sigma_min > 0.0)
        r.max_resolvent_product =
            std::max(r.max_resolvent_product, std::abs(z.imag()) / sigma_min);
    }
  }
  if (sample_points.empty()) r.speed_min = r.speed_max = 0.0;
  r.trace_gap_per_lead_vertex = lead_vertices > 0 ? r.max_trace_gap / lead_vertices : 0.0;
  return r;
}

// --- SecularEvaluator -------------------------------------------------------

namespace {

// Exposes a log-scaled complex determinant from the sparse factorization; the
// U diagonal lives in the (protected) supernodal L store.
struct LogDetSparseLU
    : Eigen::SparseLU<Eigen::SparseMatrix<Complex>, Eigen::COLAMDOrdering<int>> {
  LogDet log_det() const {
    LogDet out;
    Complex phase(double(this->m_detPermR * this->m_detPermC), 0.0);
    double min_pivot = std::numeric_limits<double>::infinity();
    double max_pivot = 0.0;
    for (Eigen::Index j = 0; j < this->cols(); ++j) {
      for (SCMatrix::InnerIterator it(this->m_Lstore, j); it; ++it) {
        if (it.index() == j) {
          const double a = std::abs(it.value());
          min_pivot = std::min(min_pivot, a);
          max_pivot = std::max(max_pivot, a);
          if (a == 0.0) {
            out.log_abs = -std::numeric_limits<double>::infinity();
          } else {
            out.log_abs += std::log(a);
            phase *= it.value() / a;
          }
          break;
        }
      }
    }
    out.arg = std::arg(phase);
    out.near_singular = !(min_pivot > 1e-13 * double(this->cols()) * std::max(1.0, max_pivot));
    return out;
  }
};

}  // namespace

struct SecularEvaluator::Impl {
  // Sparse pattern of Id - S D(z): value slots aligned with the CSC storage.
  Eigen::SparseMatrix<Complex> pattern;
  std::vector<double> slot_s;     // S entry for each stored slot
  std::vector<char> slot_diag;    // slot sits on the diagonal
  LogDetSparseLU sparse_lu;
  bool use_sparse = false;
  bool analyzed = false;
};

SecularEvaluator::SecularEvaluator(SecularSystem sys)
    : sys_(std::move(sys)), impl_(new Impl) {
  const int m = sys_.bonds.bond_count;
  impl_->use_sparse = m >= kSparseLimit;
  if (!impl_->use_sparse) return;

  std::vector<Eigen::Triplet<Complex>> trips;
  for (int c = 0; c < m; ++c) {
    bool has_diag = false;
    for (int r = 0; r < m; ++r) {
      if (sys_.S(r, c) != 0.0) {
        trips.emplace_back(r, c, Complex(1.0, 0.0));
        if (r == c) has_diag = true;
      }
    }
    if (!has_diag) trips.emplace_back(c, c, Complex(1.0, 0.0));
  }
  impl_->pattern.resize(m, m);
  impl_->pattern.setFromTriplets(trips.begin(), trips.end());
  impl_->pattern.makeCompressed();

  const int nnz = static_cast<int>(impl_->pattern.nonZeros());
  impl_->slot_s.resize(nnz);
  impl_->slot_diag.resize(nnz);
  int slot = 0;
  for (int c = 0; c < m; ++c) {
    for (Eigen::SparseMatrix<Complex>::InnerIterator it(impl_->pattern, c); it; ++it, ++slot) {
      impl_->slot_s[slot] = sys_.S(it.row(), c);
      impl_->slot_diag[slot] = (it.row() == c);
    }
  }
}

SecularEvaluator::~SecularEvaluator() = default;

LogDet SecularEvaluator::log_det(Complex z) const {
  const int m = sys_.bonds.bond_count;
  if (!impl_->use_sparse) {
    const Eigen::MatrixXcd a = id_minus_u(sys_, z);
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(a);
    const DenseLogDet ld = dense_log_det(lu);
    LogDet out{ld.log_abs, ld.arg, false};
    double max_pivot = lu.matrixLU().diagonal().cwiseAbs().maxCoeff();
    out.near_singular = !(ld.min_pivot > 1e-13 * double(m) * std::max(1.0, max_pivot));
    return out;
  }
  // Refresh the stored values in place; the pattern never changes.
  Complex* vals = impl_->pattern.valuePtr();
  const int* outer = impl_->pattern.outerIndexPtr();
  int slot = 0;
  for (int c = 0; c < m; ++c) {
    const Complex phase = std::exp(kI * z * sys_.lengths[c]);
    const int end = outer[c + 1];
    for (; slot < end; ++slot) {
      Complex v = -impl_->slot_s[slot] * phase;
      if (impl_->slot_diag[slot]) v += 1.0;
      vals[slot] = v;
    }
  }
  if (!impl_->analyzed) {
    impl_->sparse_lu.analyzePattern(impl_->pattern);
    impl_->analyzed = true;
  }
  impl_->sparse_lu.factorize(impl_->pattern);
  if (impl_->sparse_lu.info() != Eigen::Success) {
    // Structurally fine but numerically singular: report a contour hit.
    return LogDet{-std::numeric_limits<double>::infinity(), 0.0, true};
  }
  return impl_->sparse_lu.log_det();
}

SecularValue SecularEvaluator::value(Complex z) const { return secular_value(sys_, z); }

LogDerivative SecularEvaluator::log_derivative(Complex z) const {
  const int m = sys_.bonds.bond_count;
  const Eigen::MatrixXcd a = id_minus_u(sys_, z);
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(a);
  const auto diag = lu.matrixLU().diagonal();
  const double min_pivot = diag.cwiseAbs().minCoeff();
  const double max_pivot = diag.cwiseAbs().maxCoeff();
  LogDerivative out;
  out.valid = min_pivot > 1e-13 * double(m) * std::max(1.0, max_pivot);
  if (!out.valid) return out;
  const Eigen::MatrixXcd inv = lu.inverse();
  Complex acc(0.0, 0.0);
  for (int b = 0; b < m; ++b) acc += kI * sys_.lengths[b] * (1.0 - inv(b, b));
  out.value = acc;
  out.valid = std::isfinite(acc.real()) && std::isfinite(acc.imag());
  return out;
}

int SecularEvaluator::kernel_dimension(Complex z, double tol) const {
  const Eigen::MatrixXcd a = id_minus_u(sys_, z);
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a);
  int k = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) < tol) ++k;
  return k;
}

}  // namespace reslab
