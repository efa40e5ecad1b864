#include "sessionrec/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace sessionrec::ad {

int ParamStore::add(const std::string& name, Mat m, bool train) {
  if (find(name) >= 0) throw std::invalid_argument("duplicate parameter: " + name);
  names.push_back(name);
  value.push_back(std::move(m));
  trainable.push_back(train ? 1 : 0);
  return static_cast<int>(names.size()) - 1;
}

int ParamStore::find(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  return -1;
}

const Mat& ParamStore::at(const std::string& name) const {
  int i = find(name);
  if (i < 0) throw std::out_of_range("no parameter named " + name);
  return value[static_cast<size_t>(i)];
}

Mat& ParamStore::at(const std::string& name) {
  int i = find(name);
  if (i < 0) throw std::out_of_range("no parameter named " + name);
  return value[static_cast<size_t>(i)];
}

void GradStore::init_like(const ParamStore& p) {
  g.clear();
  g.reserve(p.value.size());
  for (const Mat& m : p.value) g.emplace_back(m.rows, m.cols);
}

void GradStore::zero() {
  for (Mat& m : g) m.zero();
}

void GradStore::add(const GradStore& other) {
  if (other.g.size() != g.size()) throw std::invalid_argument("GradStore::add: size mismatch");
  for (size_t i = 0; i < g.size(); ++i) linalg::add_inplace(g[i], other.g[i]);
}

void GradStore::scale(double s) {
  for (Mat& m : g) {
    for (double& x : m.a) x *= s;
  }
}

namespace {

void softplus_check(const Mat& m, const char* who) {
  if (m.cols != 1) throw std::invalid_argument(std::string(who) + ": expected a column vector");
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x))); }

double sigmoid_scalar(double x) {
  if (x >= 0.0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

void softmax_flat(const std::vector<double>& z, std::vector<double>& out) {
  double mx = z[0];
  for (double v : z) mx = std::max(mx, v);
  double sum = 0.0;
  out.resize(z.size());
  for (size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
}

}  // namespace

int Tape::push(Node n) {
  compute(n);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::leaf(int param) {
  Node n;
  n.op = Op::Leaf;
  n.param = param;
  return push(std::move(n));
}

int Tape::constant(Mat m) {
  Node n;
  n.op = Op::ConstM;
  n.value = std::move(m);
  return push(std::move(n));
}

int Tape::gather(int param, std::vector<int> idx) {
  Node n;
  n.op = Op::Gather;
  n.param = param;
  n.idx = std::move(idx);
  return push(std::move(n));
}

int Tape::matmul(int a, int b, bool trans_a, bool trans_b) {
  Node n;
  n.op = Op::MatMul;
  n.a = a;
  n.b = b;
  n.mult = trans_a ? 1.0 : 0.0;
  n.shift = trans_b ? 1.0 : 0.0;
  return push(std::move(n));
}

int Tape::add(int a, int b) {
  Node n;
  n.op = Op::Add;
  n.a = a;
  n.b = b;
  return push(std::move(n));
}

int Tape::sub(int a, int b) {
  Node n;
  n.op = Op::Sub;
  n.a = a;
  n.b = b;
  return push(std::move(n));
}

int Tape::add_rowvec(int a, int v) {
  Node n;
  n.op = Op::AddRowVec;
  n.a = a;
  n.b = v;
  return push(std::move(n));
}

int Tape::affine(int a, double mult, double shift) {
  Node n;
  n.op = Op::Affine;
  n.a = a;
  n.mult = mult;
  n.shift = shift;
  return push(std::move(n));
}

int Tape::relu(int a) {
  Node n;
  n.op = Op::Relu;
  n.a = a;
  return push(std::move(n));
}

int Tape::sigmoid(int a) {
  Node n;
  n.op = Op::Sigmoid;
  n.a = a;
  return push(std::move(n));
}

int Tape::scale_by(int a, int s) {
  Node n;
  n.op = Op::ScaleByNode;
  n.a = a;
  n.b = s;
  return push(std::move(n));
}

int Tape::causal_softmax(int a, double scale) {
  Node n;
  n.op = Op::CausalSoftmax;
  n.a = a;
  n.mult = scale;
  return push(std::move(n));
}

int Tape::softmax_vec(int a) {
  Node n;
  n.op = Op::SoftmaxVec;
  n.a = a;
  return push(std::move(n));
}

int Tape::colsum(int a) {
  Node n;
  n.op = Op::ColSum;
  n.a = a;
  return push(std::move(n));
}

int Tape::row_dot(int a, int b) {
  Node n;
  n.op = Op::RowDot;
  n.a = a;
  n.b = b;
  return push(std::move(n));
}

int Tape::concat_cols(int a, int b) {
  Node n;
  n.op = Op::ConcatCols;
  n.a = a;
  n.b = b;
  return push(std::move(n));
}

int Tape::stack_rows(std::vector<int> rows) {
  if (rows.empty()) throw std::invalid_argument("stack_rows: no inputs");
  Node n;
  n.op = Op::StackRows;
  n.srcs = std::move(rows);
  return push(std::move(n));
}

int Tape::pick_row(int a, int row) {
  Node n;
  n.op = Op::PickRow;
  n.a = a;
  n.row = row;
  return push(std::move(n));
}

int Tape::bpr_pairs(int sp, int sn) {
  Node n;
  n.op = Op::BprPairs;
  n.a = sp;
  n.b = sn;
  return push(std::move(n));
}

void Tape::compute(Node& n) {
  auto val = [&](int id) -> const Mat& { return nodes_[static_cast<size_t>(id)].value; };
  switch (n.op) {
    case Op::Leaf:
      n.value = params_->value[static_cast<size_t>(n.param)];
      break;
    case Op::ConstM:
      break;
    case Op::Gather: {
      const Mat& src = params_->value[static_cast<size_t>(n.param)];
      n.value = Mat(static_cast<int>(n.idx.size()), src.cols);
      for (size_t i = 0; i < n.idx.size(); ++i) {
        int r = n.idx[i];
        if (r < 0 || r >= src.rows) throw std::out_of_range("gather: row index");
        const double* s = src.row(r);
        double* d = n.value.row(static_cast<int>(i));
        for (int j = 0; j < src.cols; ++j) d[j] = s[j];
      }
      break;
    }
    case Op::MatMul:
      n.value = linalg::matmul(val(n.a), val(n.b), n.mult != 0.0, n.shift != 0.0);
      break;
    case Op::Add: {
      const Mat& A = val(n.a);
      const Mat& B = val(n.b);
      if (!A.same_shape(B)) throw std::invalid_argument("add: shape mismatch");
      n.value = A;
      linalg::add_inplace(n.value, B);
      break;
    }
    case Op::Sub: {
      const Mat& A = val(n.a);
      const Mat& B = val(n.b);
      if (!A.same_shape(B)) throw std::invalid_argument("sub: shape mismatch");
      n.value = A;
      for (size_t i = 0; i < n.value.a.size(); ++i) n.value.a[i] -= B.a[i];
      break;
    }
    case Op::AddRowVec: {
      const Mat& A = val(n.a);
      const Mat& V = val(n.b);
      if (V.rows != 1 || V.cols != A.cols) throw std::invalid_argument("add_rowvec: shape");
      n.value = A;
      for (int i = 0; i < A.rows; ++i) {
        double* d = n.value.row(i);
        for (int j = 0; j < A.cols; ++j) d[j] += V.a[static_cast<size_t>(j)];
      }
      break;
    }
    case Op::Affine: {
      n.value = val(n.a);
      for (double& x : n.value.a) x = n.mult * x + n.shift;
      break;
    }
    case Op::Relu: {
      n.value = val(n.a);
      for (double& x : n.value.a) x = std::max(x, 0.0);
      break;
    }
    case Op::Sigmoid: {
      n.value = val(n.a);
      for (double& x : n.value.a) x = sigmoid_scalar(x);
      break;
    }
    case Op::ScaleByNode: {
      const Mat& S = val(n.b);
      if (S.rows != 1 || S.cols != 1) throw std::invalid_argument("scale_by: scalar expected");
      double s = S.a[0];
      n.value = val(n.a);
      for (double& x : n.value.a) x *= s;
      break;
    }
    case Op::CausalSoftmax: {
      const Mat& A = val(n.a);
      if (A.rows != A.cols) throw std::invalid_argument("causal_softmax: square matrix expected");
      n.value = Mat(A.rows, A.cols);
      for (int i = 0; i < A.rows; ++i) {
        const double* src = A.row(i);
        double* dst = n.value.row(i);
        double mx = n.mult * src[0];
        for (int j = 1; j <= i; ++j) mx = std::max(mx, n.mult * src[j]);
        double sum = 0.0;
        for (int j = 0; j <= i; ++j) {
          dst[j] = std::exp(n.mult * src[j] - mx);
          sum += dst[j];
        }
        for (int j = 0; j <= i; ++j) dst[j] /= sum;
      }
      break;
    }
    case Op::SoftmaxVec: {
      const Mat& A = val(n.a);
      if (A.a.empty()) throw std::invalid_argument("softmax_vec: empty input");
      std::vector<double> out;
      softmax_flat(A.a, out);
      n.value = Mat(A.rows, A.cols);
      n.value.a = out;
      break;
    }
    case Op::ColSum: {
      const Mat& A = val(n.a);
      n.value = Mat(1, A.cols);
      for (int i = 0; i < A.rows; ++i) {
        const double* s = A.row(i);
        for (int j = 0; j < A.cols; ++j) n.value.a[static_cast<size_t>(j)] += s[j];
      }
      break;
    }
    case Op::RowDot: {
      const Mat& A = val(n.a);
      const Mat& B = val(n.b);
      if (!A.same_shape(B)) throw std::invalid_argument("row_dot: shape mismatch");
      n.value = Mat(A.rows, 1);
      for (int i = 0; i < A.rows; ++i) {
        n.value.at(i, 0) = linalg::dot(A.row(i), B.row(i), A.cols);
      }
      break;
    }
    case Op::ConcatCols: {
      const Mat& A = val(n.a);
      const Mat& B = val(n.b);
      if (A.rows != B.rows) throw std::invalid_argument("concat_cols: row mismatch");
      n.value = Mat(A.rows, A.cols + B.cols);
      for (int i = 0; i < A.rows; ++i) {
        double* d = n.value.row(i);
        const double* sa = A.row(i);
        const double* sb = B.row(i);
        for (int j = 0; j < A.cols; ++j) d[j] = sa[j];
        for (int j = 0; j < B.cols; ++j) d[A.cols + j] = sb[j];
      }
      break;
    }
    case Op::StackRows: {
      int cols = val(n.srcs[0]).cols;
      n.value = Mat(static_cast<int>(n.srcs.size()), cols);
      for (size_t i = 0; i < n.srcs.size(); ++i) {
        const Mat& R = val(n.srcs[i]);
        if (R.rows != 1 || R.cols != cols) throw std::invalid_argument("stack_rows: shape");
        double* d = n.value.row(static_cast<int>(i));
        for (int j = 0; j < cols; ++j) d[j] = R.a[static_cast<size_t>(j)];
      }
      break;
    }
    case Op::PickRow: {
      const Mat& A = val(n.a);
      if (n.row < 0 || n.row >= A.rows) throw std::out_of_range("pick_row");
      n.value = Mat(1, A.cols);
      const double* s = A.row(n.row);
      for (int j = 0; j < A.cols; ++j) n.value.a[static_cast<size_t>(j)] = s[j];
      break;
    }
    case Op::BprPairs: {
      const Mat& P = val(n.a);
      const Mat& N = val(n.b);
      softplus_check(P, "bpr_pairs");
      softplus_check(N, "bpr_pairs");
      if (P.rows == 0 || N.rows == 0) throw std::invalid_argument("bpr_pairs: empty input");
      double loss = 0.0;
      for (int i = 0; i < P.rows; ++i) {
        for (int j = 0; j < N.rows; ++j) loss += softplus(N.a[static_cast<size_t>(j)] - P.a[static_cast<size_t>(i)]);
      }
      n.value = Mat(1, 1);
      n.value.a[0] = loss;
      break;
    }
  }
}

void Tape::forward() {
  for (Node& n : nodes_) compute(n);
}

void Tape::backward(int loss, GradStore& gs) {
  Node& top = nodes_[static_cast<size_t>(loss)];
  if (top.value.rows != 1 || top.value.cols != 1) {
    throw std::invalid_argument("backward: loss must be 1x1");
  }
  for (Node& n : nodes_) {
    n.grad = Mat(n.value.rows, n.value.cols);
  }
  top.grad.a[0] = 1.0;

  auto val = [&](int id) -> const Mat& { return nodes_[static_cast<size_t>(id)].value; };
  auto grd = [&](int id) -> Mat& { return nodes_[static_cast<size_t>(id)].grad; };

  for (int t = loss; t >= 0; --t) {
    Node& n = nodes_[static_cast<size_t>(t)];
    const Mat& g = n.grad;
    bool any = false;
    for (double x : g.a) {
      if (x != 0.0) {
        any = true;
        break;
      }
    }
    if (!any) continue;

    switch (n.op) {
      case Op::Leaf:
        if (params_->trainable[static_cast<size_t>(n.param)]) {
          linalg::add_inplace(gs.g[static_cast<size_t>(n.param)], g);
        }
        break;
      case Op::ConstM:
        break;
      case Op::Gather:
        if (params_->trainable[static_cast<size_t>(n.param)]) {
          Mat& pg = gs.g[static_cast<size_t>(n.param)];
          for (size_t i = 0; i < n.idx.size(); ++i) {
            double* d = pg.row(n.idx[i]);
            const double* s = g.row(static_cast<int>(i));
            for (int j = 0; j < g.cols; ++j) d[j] += s[j];
          }
        }
        break;
      case Op::MatMul: {
        bool ta = n.mult != 0.0;
        bool tb = n.shift != 0.0;
        // effA = op(A), effB = op(B); d(effA) = g effB^T, d(effB) = effA^T g
        Mat da = ta ? linalg::matmul(val(n.b), g, tb, true)
                    : linalg::matmul(g, val(n.b), false, !tb);
        Mat db = tb ? linalg::matmul(g, val(n.a), true, ta)
                    : linalg::matmul(val(n.a), g, !ta, false);
        linalg::add_inplace(grd(n.a), da);
        linalg::add_inplace(grd(n.b), db);
        break;
      }
      case Op::Add:
        linalg::add_inplace(grd(n.a), g);
        linalg::add_inplace(grd(n.b), g);
        break;
      case Op::Sub: {
        linalg::add_inplace(grd(n.a), g);
        Mat& gb = grd(n.b);
        for (size_t i = 0; i < gb.a.size(); ++i) gb.a[i] -= g.a[i];
        break;
      }
      case Op::AddRowVec: {
        linalg::add_inplace(grd(n.a), g);
        Mat& gv = grd(n.b);
        for (int i = 0; i < g.rows; ++i) {
          const double* s = g.row(i);
          for (int j = 0; j < g.cols; ++j) gv.a[static_cast<size_t>(j)] += s[j];
        }
        break;
      }
      case Op::Affine: {
        Mat& ga = grd(n.a);
        for (size_t i = 0; i < ga.a.size(); ++i) ga.a[i] += n.mult * g.a[i];
        break;
      }
      case Op::Relu: {
        Mat& ga = grd(n.a);
        const Mat& A = val(n.a);
        for (size_t i = 0; i < ga.a.size(); ++i) {
          if (A.a[i] > 0.0) ga.a[i] += g.a[i];
        }
        break;
      }
      case Op::Sigmoid: {
        Mat& ga = grd(n.a);
        for (size_t i = 0; i < ga.a.size(); ++i) {
          double y = n.value.a[i];
          ga.a[i] += g.a[i] * y * (1.0 - y);
        }
        break;
      }
      case Op::ScaleByNode: {
        double s = val(n.b).a[0];
        Mat& ga = grd(n.a);
        const Mat& A = val(n.a);
        double ds = 0.0;
        for (size_t i = 0; i < ga.a.size(); ++i) {
          ga.a[i] += s * g.a[i];
          ds += g.a[i] * A.a[i];
        }
        grd(n.b).a[0] += ds;
        break;
      }
      case Op::CausalSoftmax: {
        Mat& ga = grd(n.a);
        for (int i = 0; i < g.rows; ++i) {
          const double* y = n.value.row(i);
          const double* gr = g.row(i);
          double s = 0.0;
          for (int j = 0; j <= i; ++j) s += y[j] * gr[j];
          double* d = ga.row(i);
          for (int j = 0; j <= i; ++j) d[j] += n.mult * y[j] * (gr[j] - s);
        }
        break;
      }
      case Op::SoftmaxVec: {
        Mat& ga = grd(n.a);
        double s = 0.0;
        for (size_t i = 0; i < g.a.size(); ++i) s += n.value.a[i] * g.a[i];
        for (size_t i = 0; i < g.a.size(); ++i) ga.a[i] += n.value.a[i] * (g.a[i] - s);
        break;
      }
      case Op::ColSum: {
        Mat& ga = grd(n.a);
        for (int i = 0; i < ga.rows; ++i) {
          double* d = ga.row(i);
          for (int j = 0; j < ga.cols; ++j) d[j] += g.a[static_cast<size_t>(j)];
        }
        break;
      }
      case Op::RowDot: {
        Mat& ga = grd(n.a);
        Mat& gb = grd(n.b);
        const Mat& A = val(n.a);
        const Mat& B = val(n.b);
        for (int i = 0; i < A.rows; ++i) {
          double gi = g.at(i, 0);
          double* da = ga.row(i);
          double* db = gb.row(i);
          const double* ra = A.row(i);
          const double* rb = B.row(i);
          for (int j = 0; j < A.cols; ++j) {
            da[j] += gi * rb[j];
            db[j] += gi * ra[j];
          }
        }
        break;
      }
      case Op::ConcatCols: {
        Mat& ga = grd(n.a);
        Mat& gb = grd(n.b);
        for (int i = 0; i < g.rows; ++i) {
          const double* s = g.row(i);
          double* da = ga.row(i);
          double* db = gb.row(i);
          for (int j = 0; j < ga.cols; ++j) da[j] += s[j];
          for (int j = 0; j < gb.cols; ++j) db[j] += s[ga.cols + j];
        }
        break;
      }
      case Op::StackRows: {
        for (size_t i = 0; i < n.srcs.size(); ++i) {
          Mat& gr = grd(n.srcs[i]);
          const double* s = g.row(static_cast<int>(i));
          for (int j = 0; j < g.cols; ++j) gr.a[static_cast<size_t>(j)] += s[j];
        }
        break;
      }
      case Op::PickRow: {
        Mat& ga = grd(n.a);
        double* d = ga.row(n.row);
        for (int j = 0; j < g.cols; ++j) d[j] += g.a[static_cast<size_t>(j)];
        break;
      }
      case Op::BprPairs: {
        const Mat& P = val(n.a);
        const Mat& N = val(n.b);
        Mat& gp = grd(n.a);
        Mat& gn = grd(n.b);
        double gl = g.a[0];
        for (int i = 0; i < P.rows; ++i) {
          for (int j = 0; j < N.rows; ++j) {
            double s = sigmoid_scalar(N.a[static_cast<size_t>(j)] - P.a[static_cast<size_t>(i)]);
            gp.a[static_cast<size_t>(i)] -= gl * s;
            gn.a[static_cast<size_t>(j)] += gl * s;
          }
        }
        break;
      }
    }
  }
}

}  // namespace sessionrec::ad
