#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <vector>

namespace sessionrec {

// Dense row-major matrix of doubles. Vectors are 1 x d or n x 1 matrices.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }
  double* row(int r) { return a.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(int r) const { return a.data() + static_cast<std::size_t>(r) * cols; }
  std::size_t size() const { return a.size(); }
  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
  void zero() { std::fill(a.begin(), a.end(), 0.0); }

  bool all_finite() const;
};

namespace linalg {

// C = opA(A) * opB(B), overwriting C. opX transposes when the flag is set.
// The parallel version splits output rows across threads; every output
// cell is accumulated in the same order either way, so results are
// bit-identical between the two paths.
void matmul_serial(const Mat& A, const Mat& B, Mat& C, bool transA = false, bool transB = false);
void matmul_omp(const Mat& A, const Mat& B, Mat& C, bool transA = false, bool transB = false);
// Dispatches to the parallel kernel for large products.
void matmul(const Mat& A, const Mat& B, Mat& C, bool transA = false, bool transB = false);
Mat matmul(const Mat& A, const Mat& B, bool transA = false, bool transB = false);

// scores[v] = table.row(v) . query  (query is 1 x d)
void score_all_serial(const Mat& table, const Mat& query, std::vector<double>& scores);
void score_all_omp(const Mat& table, const Mat& query, std::vector<double>& scores);
void score_all(const Mat& table, const Mat& query, std::vector<double>& scores);
std::vector<double> score_all(const Mat& table, const std::vector<double>& query);

void add_inplace(Mat& dst, const Mat& src, double scale = 1.0);
double dot(const double* a, const double* b, int n);

}  // namespace linalg
}  // namespace sessionrec
