#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sessionrec/linalg.hpp"

namespace sessionrec::ad {

// Named model parameters in a fixed registration order. The order defines
// gradient accumulation order and checkpoint layout, so it must not depend
// on runtime conditions.
struct ParamStore {
  std::vector<std::string> names;
  std::vector<Mat> value;
  std::vector<char> trainable;

  int add(const std::string& name, Mat m, bool train = true);
  int find(const std::string& name) const;  // -1 if absent
  const Mat& at(const std::string& name) const;
  Mat& at(const std::string& name);
};

// Dense per-parameter gradients, shape-aligned with a ParamStore.
struct GradStore {
  std::vector<Mat> g;

  void init_like(const ParamStore& p);
  void zero();
  void add(const GradStore& other);
  void scale(double s);
};

enum class Op {
  Leaf,
  ConstM,
  Gather,
  MatMul,
  Add,
  Sub,
  AddRowVec,
  Affine,
  Relu,
  Sigmoid,
  ScaleByNode,
  CausalSoftmax,
  SoftmaxVec,
  ColSum,
  RowDot,
  ConcatCols,
  StackRows,
  PickRow,
  BprPairs,
};

struct Node {
  Op op;
  int a = -1;
  int b = -1;
  std::vector<int> srcs;   // StackRows inputs
  int param = -1;          // Leaf / Gather
  std::vector<int> idx;    // Gather row indices
  double mult = 1.0;       // Affine multiplier, CausalSoftmax scale
  double shift = 0.0;      // Affine offset
  int row = -1;            // PickRow
  Mat value;
  Mat grad;
};

// Reverse-mode tape over Mat-valued nodes. Values are computed eagerly as
// nodes are created; forward() recomputes everything in place after a
// parameter update so a built graph can be reused.
class Tape {
 public:
  explicit Tape(const ParamStore* params) : params_(params) {}

  int leaf(int param);
  int constant(Mat m);
  int gather(int param, std::vector<int> idx);
  int matmul(int a, int b, bool trans_a = false, bool trans_b = false);
  int add(int a, int b);
  int sub(int a, int b);
  int add_rowvec(int a, int v);
  int affine(int a, double mult, double shift);
  int relu(int a);
  int sigmoid(int a);
  int scale_by(int a, int s);  // s is a 1x1 node
  int causal_softmax(int a, double scale);
  int softmax_vec(int a);
  int colsum(int a);
  int row_dot(int a, int b);
  int concat_cols(int a, int b);
  int stack_rows(std::vector<int> rows);
  int pick_row(int a, int row);
  // sum over all (i, j) of softplus(sn[j] - sp[i]); sp, sn are column vectors
  int bpr_pairs(int sp, int sn);

  void forward();
  // Seeds d(loss) = 1 (loss must be 1x1) and accumulates parameter
  // gradients into gs. Node grads are reset at the start of each call.
  void backward(int loss, GradStore& gs);

  const Mat& value(int id) const { return nodes_[static_cast<size_t>(id)].value; }
  const Mat& grad(int id) const { return nodes_[static_cast<size_t>(id)].grad; }
  size_t size() const { return nodes_.size(); }

 private:
  int push(Node n);
  void compute(Node& n);

  const ParamStore* params_;
  std::vector<Node> nodes_;
};

}  // namespace sessionrec::ad
