#include "hsie/linalg.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hsie {

namespace {

using EigenSparse = Eigen::SparseMatrix<Complex, Eigen::ColMajor, int>;
using EigenDense = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>;
using EigenVector = Eigen::Matrix<Complex, Eigen::Dynamic, 1>;

EigenSparse to_eigen(const SparseComplexMatrix& m) {
  std::vector<Eigen::Triplet<Complex>> trip;
  trip.reserve(m.nnz());
  for (std::size_t r = 0; r < m.n_rows; ++r)
    for (std::size_t k = m.row_offsets[r]; k < m.row_offsets[r + 1]; ++k)
      trip.emplace_back(static_cast<int>(r), static_cast<int>(m.cols[k]), m.vals[k]);
  EigenSparse s(static_cast<int>(m.n_rows), static_cast<int>(m.n_cols));
  s.setFromTriplets(trip.begin(), trip.end());
  s.makeCompressed();
  return s;
}

double vec_norm(const std::vector<Complex>& v) {
  double s = 0.0;
  for (const auto& x : v) s += std::norm(x);
  return std::sqrt(s);
}

}  // namespace

std::uint64_t SplitMix64::next() {
  state_ += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double SplitMix64::uniform() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

Complex SplitMix64::unit_complex() {
  double re = 2.0 * uniform() - 1.0;
  double im = 2.0 * uniform() - 1.0;
  return {re, im};
}

SparseComplexMatrix SparseComplexMatrix::from_triplets(std::size_t rows, std::size_t columns,
                                                       std::vector<Triplet> triplets) {
  for (const auto& t : triplets)
    if (t.row >= rows || t.col >= columns)
      throw std::runtime_error("triplet index out of range");
  std::stable_sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  SparseComplexMatrix m;
  m.n_rows = rows;
  m.n_cols = columns;
  m.row_offsets.assign(rows + 1, 0);
  std::size_t i = 0;
  while (i < triplets.size()) {
    std::size_t j = i;
    Complex sum = 0.0;
    while (j < triplets.size() && triplets[j].row == triplets[i].row &&
           triplets[j].col == triplets[i].col) {
      sum += triplets[j].value;
      ++j;
    }
    m.cols.push_back(triplets[i].col);
    m.vals.push_back(sum);
    m.row_offsets[triplets[i].row + 1] += 1;
    i = j;
  }
  for (std::size_t r = 0; r < rows; ++r) m.row_offsets[r + 1] += m.row_offsets[r];
  return m;
}

SparseComplexMatrix SparseComplexMatrix::identity(std::size_t n) {
  std::vector<Triplet> t;
  t.reserve(n);
  for (std::size_t i = 0; i < n; ++i) t.push_back({i, i, Complex(1.0)});
  return from_triplets(n, n, std::move(t));
}

Complex SparseComplexMatrix::coeff(std::size_t r, std::size_t c) const {
  auto first = cols.begin() + static_cast<std::ptrdiff_t>(row_offsets[r]);
  auto last = cols.begin() + static_cast<std::ptrdiff_t>(row_offsets[r + 1]);
  auto it = std::lower_bound(first, last, c);
  if (it == last || *it != c) return 0.0;
  return vals[static_cast<std::size_t>(it - cols.begin())];
}

std::vector<Complex> SparseComplexMatrix::apply(const std::vector<Complex>& x) const {
  if (x.size() != n_cols) throw std::runtime_error("apply: size mismatch");
  std::vector<Complex> y(n_rows, 0.0);
  for (std::size_t r = 0; r < n_rows; ++r) {
    Complex acc = 0.0;
    for (std::size_t k = row_offsets[r]; k < row_offsets[r + 1]; ++k) acc += vals[k] * x[cols[k]];
    y[r] = acc;
  }
  return y;
}

SparseComplexMatrix SparseComplexMatrix::transpose() const {
  std::vector<Triplet> t;
  t.reserve(nnz());
  for (std::size_t r = 0; r < n_rows; ++r)
    for (std::size_t k = row_offsets[r]; k < row_offsets[r + 1]; ++k)
      t.push_back({cols[k], r, vals[k]});
  return from_triplets(n_cols, n_rows, std::move(t));
}

double SparseComplexMatrix::max_abs_asymmetry() const {
  SparseComplexMatrix tr = transpose();
  SparseComplexMatrix diff = add_scaled(*this, 1.0, tr, -1.0);
  double m = 0.0;
  for (const auto& v : diff.vals) m = std::max(m, std::abs(v));
  return m;
}

double SparseComplexMatrix::inf_norm() const {
  double m = 0.0;
  for (std::size_t r = 0; r < n_rows; ++r) {
    double s = 0.0;
    for (std::size_t k = row_offsets[r]; k < row_offsets[r + 1]; ++k) s += std::abs(vals[k]);
    m = std::max(m, s);
  }
  return m;
}

SparseComplexMatrix add_scaled(const SparseComplexMatrix& a, Complex alpha,
                               const SparseComplexMatrix& b, Complex beta) {
  if (a.n_rows != b.n_rows || a.n_cols != b.n_cols)
    throw std::runtime_error("add_scaled: shape mismatch");
  SparseComplexMatrix m;
  m.n_rows = a.n_rows;
  m.n_cols = a.n_cols;
  m.row_offsets.assign(a.n_rows + 1, 0);
  m.cols.reserve(a.nnz() + b.nnz());
  m.vals.reserve(a.nnz() + b.nnz());
  for (std::size_t r = 0; r < a.n_rows; ++r) {
    std::size_t ia = a.row_offsets[r], ea = a.row_offsets[r + 1];
    std::size_t ib = b.row_offsets[r], eb = b.row_offsets[r + 1];
    while (ia < ea || ib < eb) {
      std::size_t ca = ia < ea ? a.cols[ia] : SIZE_MAX;
      std::size_t cb = ib < eb ? b.cols[ib] : SIZE_MAX;
      if (ca < cb) {
        m.cols.push_back(ca);
        m.vals.push_back(alpha * a.vals[ia++]);
      } else if (cb < ca) {
        m.cols.push_back(cb);
        m.vals.push_back(beta * b.vals[ib++]);
      } else {
        m.cols.push_back(ca);
        m.vals.push_back(alpha * a.vals[ia++] + beta * b.vals[ib++]);
      }
    }
    m.row_offsets[r + 1] = m.cols.size();
  }
  return m;
}

Complex DenseComplexMatrix::trace() const {
  Complex t = 0.0;
  for (std::size_t i = 0; i < std::min(n_rows, n_cols); ++i) t += (*this)(i, i);
  return t;
}

DenseComplexMatrix to_dense(const SparseComplexMatrix& m) {
  DenseComplexMatrix d(m.n_rows, m.n_cols);
  for (std::size_t r = 0; r < m.n_rows; ++r)
    for (std::size_t k = m.row_offsets[r]; k < m.row_offsets[r + 1]; ++k)
      d(r, m.cols[k]) = m.vals[k];
  return d;
}

DenseComplexMatrix dense_matmul(const DenseComplexMatrix& a, const DenseComplexMatrix& b) {
  if (a.n_cols != b.n_rows) throw std::runtime_error("dense_matmul: shape mismatch");
  DenseComplexMatrix c(a.n_rows, b.n_cols);
  for (std::size_t i = 0; i < a.n_rows; ++i)
    for (std::size_t k = 0; k < a.n_cols; ++k) {
      Complex aik = a(i, k);
      if (aik == Complex(0.0)) continue;
      for (std::size_t j = 0; j < b.n_cols; ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

DenseComplexMatrix dense_lu_solve(const DenseComplexMatrix& a, const DenseComplexMatrix& rhs) {
  if (a.n_rows != a.n_cols || a.n_rows != rhs.n_rows)
    throw std::runtime_error("dense_lu_solve: shape mismatch");
  Eigen::Map<const Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> am(
      a.vals.data(), static_cast<Eigen::Index>(a.n_rows), static_cast<Eigen::Index>(a.n_cols));
  Eigen::Map<const Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> rm(
      rhs.vals.data(), static_cast<Eigen::Index>(rhs.n_rows),
      static_cast<Eigen::Index>(rhs.n_cols));
  Eigen::PartialPivLU<EigenDense> lu(am);
  EigenDense x = lu.solve(EigenDense(rm));
  DenseComplexMatrix out(rhs.n_rows, rhs.n_cols);
  for (std::size_t i = 0; i < out.n_rows; ++i)
    for (std::size_t j = 0; j < out.n_cols; ++j)
      out(i, j) = x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return out;
}

struct LuFactorization::Impl {
  Eigen::SparseLU<EigenSparse, Eigen::COLAMDOrdering<int>> solver;
  std::size_t n = 0;
};

std::vector<Complex> LuFactorization::solve(const std::vector<Complex>& b) const {
  if (!impl_) throw std::runtime_error("solve on empty factorization");
  if (b.size() != impl_->n) throw std::runtime_error("solve: size mismatch");
  EigenVector bv(static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < b.size(); ++i) bv[static_cast<Eigen::Index>(i)] = b[i];
  EigenVector xv = impl_->solver.solve(bv);
  std::vector<Complex> x(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) x[i] = xv[static_cast<Eigen::Index>(i)];
  return x;
}

std::size_t LuFactorization::dim() const { return impl_ ? impl_->n : 0; }

LuFactorization lu_factor(const SparseComplexMatrix& m) {
  if (m.n_rows != m.n_cols) throw std::runtime_error("lu_factor: matrix not square");
  auto impl = std::make_shared<LuFactorization::Impl>();
  impl->n = m.n_rows;
  EigenSparse s = to_eigen(m);
  impl->solver.compute(s);
  if (impl->solver.info() != Eigen::Success)
    throw std::runtime_error("singular matrix in LU factorization: " +
                             impl->solver.lastErrorMessage());

  // One-solve condition estimate: ||x||/||b|| for a generic b approximates
  // ||A^-1||; a pivot smaller than 1e-13 * scale shows up as growth beyond
  // the reciprocal threshold. The implicated index is the dominant component
  // of the near-null vector.
  if (impl->n > 0) {
    SplitMix64 rng(0x5EEDF00Dull);
    std::vector<Complex> b(impl->n);
    for (auto& v : b) v = rng.unit_complex();
    LuFactorization f;
    f.impl_ = impl;
    std::vector<Complex> x = f.solve(b);
    double bn = 0.0, xn = 0.0;
    std::size_t worst = 0;
    for (std::size_t i = 0; i < impl->n; ++i) {
      bn = std::max(bn, std::abs(b[i]));
      if (std::abs(x[i]) > xn) {
        xn = std::abs(x[i]);
        worst = i;
      }
    }
    double anorm = m.inf_norm();
    if (!(xn < 1e300) || (xn > 0.0 && bn / (xn * anorm) < 1e-13))
      throw std::runtime_error("singular matrix in LU factorization: pivot below 1e-13 near index " +
                               std::to_string(worst));
    return f;
  }
  LuFactorization f;
  f.impl_ = impl;
  return f;
}

DenseEigResult dense_eig(const DenseComplexMatrix& m, bool with_vectors) {
  if (m.n_rows != m.n_cols) throw std::runtime_error("dense_eig: matrix not square");
  Eigen::Map<const Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> am(
      m.vals.data(), static_cast<Eigen::Index>(m.n_rows), static_cast<Eigen::Index>(m.n_cols));
  Eigen::ComplexEigenSolver<EigenDense> es;
  es.compute(am, with_vectors);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("dense_eig: QR iteration failed to converge within " +
                             std::to_string(30 * m.n_rows) + " sweeps");
  DenseEigResult r;
  r.values.resize(m.n_rows);
  for (std::size_t i = 0; i < m.n_rows; ++i) r.values[i] = es.eigenvalues()[static_cast<Eigen::Index>(i)];
  if (with_vectors) {
    r.vectors = DenseComplexMatrix(m.n_rows, m.n_cols);
    for (std::size_t i = 0; i < m.n_rows; ++i)
      for (std::size_t j = 0; j < m.n_cols; ++j)
        r.vectors(i, j) = es.eigenvectors()(static_cast<Eigen::Index>(i),
                                            static_cast<Eigen::Index>(j));
  }
  return r;
}

ArnoldiResult arnoldi_shift_invert(const SparseComplexMatrix& a, const SparseComplexMatrix& b,
                                   Complex shift, std::size_t krylov_dim, std::size_t n_wanted,
                                   double residual_tol) {
  if (a.n_rows != a.n_cols || b.n_rows != b.n_cols || a.n_rows != b.n_rows)
    throw std::runtime_error("arnoldi_shift_invert: shape mismatch");
  if (krylov_dim < n_wanted) throw std::runtime_error("arnoldi_shift_invert: krylov_dim < n_wanted");
  const std::size_t n = a.n_rows;
  krylov_dim = std::min(krylov_dim, n);

  SparseComplexMatrix shifted = add_scaled(a, 1.0, b, -shift);
  LuFactorization lu;
  try {
    lu = lu_factor(shifted);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(std::string("singular shift in Arnoldi iteration: ") + e.what());
  }

  std::vector<std::vector<Complex>> v;
  v.reserve(krylov_dim + 1);
  SplitMix64 rng(0xA5A5A5A5F00Dull);
  std::vector<Complex> v0(n);
  for (auto& x : v0) x = rng.unit_complex();
  double nrm = vec_norm(v0);
  for (auto& x : v0) x /= nrm;
  v.push_back(std::move(v0));

  DenseComplexMatrix h(krylov_dim + 1, krylov_dim);
  std::size_t m_eff = krylov_dim;
  for (std::size_t k = 0; k < krylov_dim; ++k) {
    std::vector<Complex> w = lu.solve(b.apply(v[k]));
    // classical Gram-Schmidt, applied twice
    for (int pass = 0; pass < 2; ++pass) {
      std::vector<Complex> proj(k + 1, 0.0);
      for (std::size_t j = 0; j <= k; ++j) {
        Complex dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += std::conj(v[j][i]) * w[i];
        proj[j] = dot;
      }
      for (std::size_t j = 0; j <= k; ++j) {
        h(j, k) += proj[j];
        for (std::size_t i = 0; i < n; ++i) w[i] -= proj[j] * v[j][i];
      }
    }
    double wn = vec_norm(w);
    h(k + 1, k) = wn;
    if (wn < 1e-14) {  // invariant subspace found
      m_eff = k + 1;
      break;
    }
    for (auto& x : w) x /= wn;
    v.push_back(std::move(w));
  }

  DenseComplexMatrix hm(m_eff, m_eff);
  for (std::size_t i = 0; i < m_eff; ++i)
    for (std::size_t j = 0; j < m_eff; ++j) hm(i, j) = h(i, j);
  DenseEigResult hev = dense_eig(hm, true);

  std::vector<std::size_t> order(m_eff);
  for (std::size_t i = 0; i < m_eff; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return std::abs(hev.values[x]) > std::abs(hev.values[y]);
  });

  ArnoldiResult result;
  for (std::size_t idx : order) {
    if (result.pairs.size() >= n_wanted) break;
    Complex theta = hev.values[idx];
    if (std::abs(theta) < 1e-290) continue;
    Complex lambda = shift + 1.0 / theta;
    std::vector<Complex> x(n, 0.0);
    for (std::size_t j = 0; j < m_eff; ++j) {
      Complex c = hev.vectors(j, idx);
      for (std::size_t i = 0; i < n; ++i) x[i] += c * v[j][i];
    }
    double xn = vec_norm(x);
    if (xn == 0.0) continue;
    for (auto& e : x) e /= xn;
    std::vector<Complex> ax = a.apply(x);
    std::vector<Complex> bx = b.apply(x);
    double rn = 0.0;
    for (std::size_t i = 0; i < n; ++i) rn += std::norm(ax[i] - lambda * bx[i]);
    RitzPair p;
    p.value = lambda;
    p.vector = std::move(x);
    p.residual = std::sqrt(rn);
    result.pairs.push_back(std::move(p));
  }
  for (const auto& p : result.pairs)
    if (!(p.residual <= residual_tol)) result.converged = false;
  return result;
}

QuadratureRule gauss_legendre(std::size_t n, double a, double b) {
  if (n < 1) throw std::runtime_error("gauss_legendre: n must be positive");
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(M_PI * (static_cast<double>(i) + 0.75) /
                        (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (std::size_t k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      double pn = p1, pm = p0;
      dp = n * (x * pn - pm) / (x * x - 1.0);
      double dx = pn / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  for (std::size_t i = 0; i < n; ++i) {
    rule.nodes[i] = mid + half * rule.nodes[i];
    rule.weights[i] *= half;
  }
  return rule;
}

}  // namespace hsie
