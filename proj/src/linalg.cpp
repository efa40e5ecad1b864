#include "sessionrec/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace sessionrec {

bool Mat::all_finite() const {
  for (double v : a) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

namespace linalg {
namespace {

inline void check_shapes(const Mat& A, const Mat& B, Mat& C, bool tA, bool tB, int& m, int& n, int& k) {
  m = tA ? A.cols : A.rows;
  k = tA ? A.rows : A.cols;
  const int kb = tB ? B.cols : B.rows;
  n = tB ? B.rows : B.cols;
  if (k != kb) throw std::invalid_argument("matmul: inner dimensions differ");
  if (C.rows != m || C.cols != n) {
    C = Mat(m, n);
  }
}

inline double cell(const Mat& A, const Mat& B, bool tA, bool tB, int i, int j, int k) {
  double acc = 0.0;
  if (!tA && !tB) {
    const double* ar = A.row(i);
    for (int p = 0; p < k; ++p) acc += ar[p] * B.at(p, j);
  } else if (!tA && tB) {
    const double* ar = A.row(i);
    const double* br = B.row(j);
    for (int p = 0; p < k; ++p) acc += ar[p] * br[p];
  } else if (tA && !tB) {
    for (int p = 0; p < k; ++p) acc += A.at(p, i) * B.at(p, j);
  } else {
    for (int p = 0; p < k; ++p) acc += A.at(p, i) * B.at(j, p);
  }
  return acc;
}

}  // namespace

void matmul_serial(const Mat& A, const Mat& B, Mat& C, bool transA, bool transB) {
  int m, n, k;
  check_shapes(A, B, C, transA, transB, m, n, k);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) C.at(i, j) = cell(A, B, transA, transB, i, j, k);
}

void matmul_omp(const Mat& A, const Mat& B, Mat& C, bool transA, bool transB) {
  int m, n, k;
  check_shapes(A, B, C, transA, transB, m, n, k);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) C.at(i, j) = cell(A, B, transA, transB, i, j, k);
}

void matmul(const Mat& A, const Mat& B, Mat& C, bool transA, bool transB) {
  const long long m = transA ? A.cols : A.rows;
  const long long n = transB ? B.rows : B.cols;
  const long long k = transA ? A.rows : A.cols;
  if (m * n * k >= (1LL << 18)) {
    matmul_omp(A, B, C, transA, transB);
  } else {
    matmul_serial(A, B, C, transA, transB);
  }
}

Mat matmul(const Mat& A, const Mat& B, bool transA, bool transB) {
  Mat C(transA ? A.cols : A.rows, transB ? B.rows : B.cols);
  matmul(A, B, C, transA, transB);
  return C;
}

double dot(const double* a, const double* b, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void score_all_serial(const Mat& table, const Mat& query, std::vector<double>& scores) {
  scores.resize(table.rows);
  for (int v = 0; v < table.rows; ++v) scores[v] = dot(table.row(v), query.row(0), table.cols);
}

void score_all_omp(const Mat& table, const Mat& query, std::vector<double>& scores) {
  scores.resize(table.rows);
  const int n = table.rows;
#pragma omp parallel for schedule(static)
  for (int v = 0; v < n; ++v) scores[v] = dot(table.row(v), query.row(0), table.cols);
}

void score_all(const Mat& table, const Mat& query, std::vector<double>& scores) {
  if (static_cast<long long>(table.rows) * table.cols >= (1LL << 16)) {
    score_all_omp(table, query, scores);
  } else {
    score_all_serial(table, query, scores);
  }
}

std::vector<double> score_all(const Mat& table, const std::vector<double>& query) {
  assert(static_cast<int>(query.size()) == table.cols);
  Mat q(1, table.cols);
  std::copy(query.begin(), query.end(), q.a.begin());
  std::vector<double> scores;
  score_all(table, q, scores);
  return scores;
}

void add_inplace(Mat& dst, const Mat& src, double scale) {
  assert(dst.same_shape(src));
  for (std::size_t i = 0; i < dst.a.size(); ++i) dst.a[i] += scale * src.a[i];
}

}  // namespace linalg
}  // namespace sessionrec
