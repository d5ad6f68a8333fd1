#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <tuple>
#include <vector>

namespace hsie {

using Complex = std::complex<double>;

struct Triplet {
  std::size_t row = 0;
  std::size_t col = 0;
  Complex value{};
};

// Compressed-row storage; column indices sorted and unique within each row.
struct SparseComplexMatrix {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<std::size_t> row_offsets;
  std::vector<std::size_t> cols;
  std::vector<Complex> vals;

  static SparseComplexMatrix from_triplets(std::size_t rows, std::size_t columns,
                                           std::vector<Triplet> triplets);
  static SparseComplexMatrix identity(std::size_t n);

  std::size_t nnz() const { return vals.size(); }
  Complex coeff(std::size_t r, std::size_t c) const;
  std::vector<Complex> apply(const std::vector<Complex>& x) const;
  SparseComplexMatrix transpose() const;
  double max_abs_asymmetry() const;
  double inf_norm() const;
};

// alpha*a + beta*b
SparseComplexMatrix add_scaled(const SparseComplexMatrix& a, Complex alpha,
                               const SparseComplexMatrix& b, Complex beta);

struct DenseComplexMatrix {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<Complex> vals;  // row-major

  DenseComplexMatrix() = default;
  DenseComplexMatrix(std::size_t r, std::size_t c) : n_rows(r), n_cols(c), vals(r * c) {}

  Complex& operator()(std::size_t i, std::size_t j) { return vals[i * n_cols + j]; }
  const Complex& operator()(std::size_t i, std::size_t j) const { return vals[i * n_cols + j]; }
  Complex trace() const;
};

DenseComplexMatrix to_dense(const SparseComplexMatrix& m);
DenseComplexMatrix dense_matmul(const DenseComplexMatrix& a, const DenseComplexMatrix& b);
// Solves a x = rhs column-by-column by dense partial-pivot LU.
DenseComplexMatrix dense_lu_solve(const DenseComplexMatrix& a, const DenseComplexMatrix& rhs);

class LuFactorization {
 public:
  LuFactorization() = default;
  std::vector<Complex> solve(const std::vector<Complex>& b) const;
  std::size_t dim() const;

 private:
  friend LuFactorization lu_factor(const SparseComplexMatrix&);
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

// Throws std::runtime_error naming the implicated index when a pivot (or the
// one-solve condition estimate) falls below the 1e-13 singularity threshold.
LuFactorization lu_factor(const SparseComplexMatrix& m);

struct RitzPair {
  Complex value{};
  std::vector<Complex> vector;
  double residual = 0.0;  // ||a v - lambda b v|| / ||v||
};

struct ArnoldiResult {
  std::vector<RitzPair> pairs;  // sorted by |value - shift|, at most n_wanted
  bool converged = true;        // false: partial results, some residual above tolerance
};

ArnoldiResult arnoldi_shift_invert(const SparseComplexMatrix& a, const SparseComplexMatrix& b,
                                   Complex shift, std::size_t krylov_dim, std::size_t n_wanted,
                                   double residual_tol = 1e-8);

struct DenseEigResult {
  std::vector<Complex> values;
  DenseComplexMatrix vectors;  // columns are eigenvectors when requested
};

DenseEigResult dense_eig(const DenseComplexMatrix& m, bool with_vectors = true);

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

QuadratureRule gauss_legendre(std::size_t n, double a, double b);

// Deterministic pseudo-random stream used wherever a generic vector is needed.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  double uniform();             // [0,1)
  Complex unit_complex();       // both parts in [-1,1)

 private:
  std::uint64_t state_;
};

}  // namespace hsie
