#include "treesumm/matrix.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace treesumm {

namespace {

int g_thread_budget = 0;

// Below this many multiply-adds the OpenMP dispatch costs more than it
// saves; the serial path computes the identical bits.
constexpr std::size_t kParallelFlopCutoff = 1u << 20;

}  // namespace

void set_thread_budget(int n) {
  g_thread_budget = n;
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#endif
}

int thread_budget() { return g_thread_budget; }

Matrix matmul(const Matrix& a, const Matrix& b) {
  assert(a.cols == b.rows);
  if (a.rows * a.cols * b.cols < kParallelFlopCutoff) return matmul_serial(a, b);
  Matrix c(a.rows, b.cols);
  const std::ptrdiff_t m = static_cast<std::ptrdiff_t>(a.rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < m; ++i) {
    double* crow = c.row(static_cast<std::size_t>(i));
    const double* arow = a.row(static_cast<std::size_t>(i));
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      const double* brow = b.row(k);
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix matmul_serial(const Matrix& a, const Matrix& b) {
  assert(a.cols == b.rows);
  Matrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* crow = c.row(i);
    const double* arow = a.row(i);
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      const double* brow = b.row(k);
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  assert(a.cols == b.cols);
  if (a.rows * a.cols * b.rows < kParallelFlopCutoff) return matmul_nt_serial(a, b);
  Matrix c(a.rows, b.rows);
  const std::ptrdiff_t m = static_cast<std::ptrdiff_t>(a.rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < m; ++i) {
    const double* arow = a.row(static_cast<std::size_t>(i));
    double* crow = c.row(static_cast<std::size_t>(i));
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double* brow = b.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
      crow[j] = acc;
    }
  }
  return c;
}

Matrix matmul_nt_serial(const Matrix& a, const Matrix& b) {
  assert(a.cols == b.cols);
  Matrix c(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.row(i);
    double* crow = c.row(i);
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double* brow = b.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
      crow[j] = acc;
    }
  }
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  assert(a.rows == b.rows);
  if (a.rows * a.cols * b.cols < kParallelFlopCutoff) return matmul_tn_serial(a, b);
  Matrix c(a.cols, b.cols);
  const std::ptrdiff_t m = static_cast<std::ptrdiff_t>(a.cols);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < m; ++i) {
    double* crow = c.row(static_cast<std::size_t>(i));
    for (std::size_t k = 0; k < a.rows; ++k) {
      const double aki = a(k, static_cast<std::size_t>(i));
      const double* brow = b.row(k);
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aki * brow[j];
    }
  }
  return c;
}

Matrix matmul_tn_serial(const Matrix& a, const Matrix& b) {
  assert(a.rows == b.rows);
  Matrix c(a.cols, b.cols);
  for (std::size_t i = 0; i < a.cols; ++i) {
    double* crow = c.row(i);
    for (std::size_t k = 0; k < a.rows; ++k) {
      const double aki = a(k, i);
      const double* brow = b.row(k);
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aki * brow[j];
    }
  }
  return c;
}

void add_inplace(Matrix& a, const Matrix& b) {
  assert(a.same_shape(b));
  for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

void scale_inplace(Matrix& a, double s) {
  for (double& v : a.data) v *= s;
}

}  // namespace treesumm
