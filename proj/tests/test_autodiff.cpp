#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "sessionrec/autodiff.hpp"
#include "sessionrec/common.hpp"

using namespace sessionrec;
using namespace sessionrec::ad;

namespace {

using Builder = std::function<int(Tape&)>;

Mat randmat(int r, int c, Rng& rng, double scale = 1.0, double shift = 0.0) {
  Mat m(r, c);
  for (double& x : m.a) x = scale * (2.0 * rng.next_double() - 1.0) + shift;
  return m;
}

// deterministic non-uniform reduction weights so symmetric gradient bugs
// cannot cancel out
Mat reduce_weights(int n) {
  Mat w(n, 1);
  for (int i = 0; i < n; ++i) w.at(i, 0) = 0.3 + 0.17 * i * (i % 3 == 0 ? 1.0 : -1.0);
  return w;
}

// node (r x c) -> scalar via two fixed projections
int reduce(Tape& t, int node, int r, int c) {
  int col = t.matmul(node, t.constant(reduce_weights(c)));        // r x 1
  return t.matmul(col, t.constant(reduce_weights(r)), true);      // 1 x 1
}

double loss_value(const ParamStore& p, const Builder& build) {
  Tape t(&p);
  int loss = build(t);
  return t.value(loss).at(0, 0);
}

// analytic tape gradients vs central differences over every trainable entry
double max_rel_err(ParamStore& p, const Builder& build, double eps = 1e-6) {
  Tape t(&p);
  int loss = build(t);
  GradStore gs;
  gs.init_like(p);
  t.backward(loss, gs);

  double worst = 0.0;
  for (size_t i = 0; i < p.value.size(); ++i) {
    if (!p.trainable[i]) continue;
    for (size_t j = 0; j < p.value[i].a.size(); ++j) {
      double save = p.value[i].a[j];
      p.value[i].a[j] = save + eps;
      double up = loss_value(p, build);
      p.value[i].a[j] = save - eps;
      double dn = loss_value(p, build);
      p.value[i].a[j] = save;
      double num = (up - dn) / (2.0 * eps);
      double ana = gs.g[i].a[j];
      // the floor keeps fd noise at near-cancelled gradients from
      // registering as a huge relative error
      double den = std::max({std::fabs(num), std::fabs(ana), 1e-3});
      worst = std::max(worst, std::fabs(num - ana) / den);
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("param store registers names in order and rejects duplicates") {
  ParamStore p;
  CHECK(p.add("a", Mat(1, 1)) == 0);
  CHECK(p.add("b", Mat(2, 2), false) == 1);
  CHECK(p.find("b") == 1);
  CHECK(p.find("zz") == -1);
  CHECK_THROWS(p.add("a", Mat(1, 1)));
  CHECK_THROWS(p.at("zz"));
  CHECK(p.trainable[0] == 1);
  CHECK(p.trainable[1] == 0);
}

TEST_CASE("matmul gradients hold for every transpose combination") {
  Rng rng(1);
  for (int ta = 0; ta < 2; ++ta) {
    for (int tb = 0; tb < 2; ++tb) {
      ParamStore p;
      p.add("A", ta ? randmat(4, 3, rng) : randmat(3, 4, rng));
      p.add("B", tb ? randmat(2, 4, rng) : randmat(4, 2, rng));
      Builder build = [&, ta, tb](Tape& t) {
        int m = t.matmul(t.leaf(0), t.leaf(1), ta != 0, tb != 0);
        return reduce(t, m, 3, 2);
      };
      CHECK(max_rel_err(p, build) < 1e-6);
    }
  }
}

TEST_CASE("gather accumulates gradients on duplicate rows") {
  Rng rng(2);
  ParamStore p;
  p.add("table", randmat(6, 3, rng));
  Builder build = [](Tape& t) {
    int g = t.gather(0, {4, 0, 2, 2});
    return reduce(t, g, 4, 3);
  };
  CHECK(max_rel_err(p, build) < 1e-6);

  // duplicate row 2 must receive the sum of both row gradients
  Tape t(&p);
  int loss = build(t);
  GradStore gs;
  gs.init_like(p);
  t.backward(loss, gs);
  CHECK(gs.g[0].row(2)[0] != 0.0);
  CHECK(gs.g[0].row(5)[0] == 0.0);  // unused row untouched
}

TEST_CASE("gather rejects out-of-range rows") {
  ParamStore p;
  p.add("table", Mat(2, 2));
  Tape t(&p);
  CHECK_THROWS(t.gather(0, {2}));
}

TEST_CASE("add, sub and row-vector broadcast gradients") {
  Rng rng(3);
  ParamStore p;
  p.add("X", randmat(3, 4, rng));
  p.add("Y", randmat(3, 4, rng));
  p.add("v", randmat(1, 4, rng));
  Builder build = [](Tape& t) {
    int s = t.sub(t.add(t.leaf(0), t.leaf(1)), t.leaf(1));
    int b = t.add_rowvec(s, t.leaf(2));
    return reduce(t, b, 3, 4);
  };
  CHECK(max_rel_err(p, build) < 1e-6);
}

TEST_CASE("affine scales gradients by its multiplier") {
  Rng rng(4);
  ParamStore p;
  p.add("X", randmat(2, 3, rng));
  Builder build = [](Tape& t) { return reduce(t, t.affine(t.leaf(0), 2.5, -0.7), 2, 3); };
  CHECK(max_rel_err(p, build) < 1e-6);
}

TEST_CASE("relu gradients away from the kink") {
  Rng rng(5);
  ParamStore p;
  Mat x = randmat(3, 3, rng);
  for (double& v : x.a) v += (v >= 0 ? 0.3 : -0.3);  // keep clear of zero
  p.add("X", x);
  Builder build = [](Tape& t) { return reduce(t, t.relu(t.leaf(0)), 3, 3); };
  CHECK(max_rel_err(p, build) < 1e-6);

  Tape t(&p);
  int r = t.relu(t.leaf(0));
  for (size_t i = 0; i < t.value(r).a.size(); ++i) {
    CHECK(t.value(r).a[i] == std::max(p.value[0].a[i], 0.0));
  }
}

TEST_CASE("sigmoid gradients and saturation behavior") {
  Rng rng(6);
  ParamStore p;
  p.add("X", randmat(2, 4, rng, 2.0));
  Builder build = [](Tape& t) { return reduce(t, t.sigmoid(t.leaf(0)), 2, 4); };
  CHECK(max_rel_err(p, build) < 1e-6);

  ParamStore q;
  Mat big(1, 2);
  big.at(0, 0) = 400.0;
  big.at(0, 1) = -400.0;
  q.add("X", big);
  Tape t(&q);
  int s = t.sigmoid(t.leaf(0));
  CHECK(t.value(s).at(0, 0) == doctest::Approx(1.0));
  CHECK(t.value(s).at(0, 1) == doctest::Approx(0.0));
  CHECK(std::isfinite(t.value(s).at(0, 1)));
}

TEST_CASE("scale_by routes gradients to both operands") {
  Rng rng(7);
  ParamStore p;
  p.add("X", randmat(3, 2, rng));
  p.add("s", randmat(1, 1, rng));
  Builder build = [](Tape& t) {
    int s = t.sigmoid(t.leaf(1));
    return reduce(t, t.scale_by(t.leaf(0), s), 3, 2);
  };
  CHECK(max_rel_err(p, build) < 1e-6);
}

TEST_CASE("causal softmax masks the future and backpropagates") {
  Rng rng(8);
  ParamStore p;
  p.add("A", randmat(4, 4, rng, 1.5));
  Builder build = [](Tape& t) { return reduce(t, t.causal_softmax(t.leaf(0), 0.5), 4, 4); };
  CHECK(max_rel_err(p, build) < 1e-6);

  Tape t(&p);
  int sm = t.causal_softmax(t.leaf(0), 0.5);
  const Mat& probs = t.value(sm);
  for (int i = 0; i < 4; ++i) {
    double sum = 0.0;
    for (int j = 0; j <= i; ++j) {
      CHECK(probs.at(i, j) >= 0.0);
      sum += probs.at(i, j);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    for (int j = i + 1; j < 4; ++j) CHECK(probs.at(i, j) == 0.0);  // masked
  }
}

TEST_CASE("softmax_vec gradients") {
  Rng rng(9);
  ParamStore p;
  p.add("z", randmat(5, 1, rng, 2.0));
  Builder build = [](Tape& t) { return reduce(t, t.softmax_vec(t.leaf(0)), 5, 1); };
  CHECK(max_rel_err(p, build) < 1e-6);
}

TEST_CASE("colsum, row_dot, concat, stack and pick gradients") {
  Rng rng(10);
  ParamStore p;
  p.add("X", randmat(3, 4, rng));
  p.add("Y", randmat(3, 4, rng));
  SUBCASE("colsum") {
    Builder build = [](Tape& t) { return reduce(t, t.colsum(t.leaf(0)), 1, 4); };
    CHECK(max_rel_err(p, build) < 1e-6);
  }
  SUBCASE("row_dot") {
    Builder build = [](Tape& t) { return reduce(t, t.row_dot(t.leaf(0), t.leaf(1)), 3, 1); };
    CHECK(max_rel_err(p, build) < 1e-6);
  }
  SUBCASE("concat_cols") {
    Builder build = [](Tape& t) {
      return reduce(t, t.concat_cols(t.leaf(0), t.leaf(1)), 3, 8);
    };
    CHECK(max_rel_err(p, build) < 1e-6);
  }
  SUBCASE("stack_rows of picked rows") {
    Builder build = [](Tape& t) {
      int x = t.leaf(0);
      int s = t.stack_rows({t.pick_row(x, 2), t.pick_row(x, 0), t.pick_row(t.leaf(1), 1)});
      return reduce(t, s, 3, 4);
    };
    CHECK(max_rel_err(p, build) < 1e-6);
  }
}

TEST_CASE("bpr_pairs value matches the softplus sum") {
  ParamStore p;
  Mat sp(1, 1), sn(1, 1);
  sp.at(0, 0) = std::log(3.0);
  sn.at(0, 0) = 0.0;
  p.add("sp", sp);
  p.add("sn", sn);
  Tape t(&p);
  int loss = t.bpr_pairs(t.leaf(0), t.leaf(1));
  // single pair with margin ln 3: ln(1 + 1/3)
  CHECK(t.value(loss).at(0, 0) == doctest::Approx(0.2876821).epsilon(1e-6));

  ParamStore q;
  q.add("sp", Mat(3, 1));  // all scores zero
  q.add("sn", Mat(4, 1));
  Tape t2(&q);
  int l2 = t2.bpr_pairs(t2.leaf(0), t2.leaf(1));
  CHECK(t2.value(l2).at(0, 0) == doctest::Approx(12.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("bpr_pairs gradients, including extreme margins") {
  Rng rng(11);
  ParamStore p;
  p.add("sp", randmat(3, 1, rng, 2.0));
  p.add("sn", randmat(4, 1, rng, 2.0));
  Builder build = [](Tape& t) { return t.bpr_pairs(t.leaf(0), t.leaf(1)); };
  CHECK(max_rel_err(p, build) < 1e-6);

  // huge positive margin: loss ~ 0, gradient ~ 0, everything finite
  ParamStore q;
  Mat sp(1, 1), sn(1, 1);
  sp.at(0, 0) = 500.0;
  sn.at(0, 0) = -500.0;
  q.add("sp", sp);
  q.add("sn", sn);
  Tape t(&q);
  int loss = t.bpr_pairs(t.leaf(0), t.leaf(1));
  CHECK(t.value(loss).at(0, 0) == 0.0);
  GradStore gs;
  gs.init_like(q);
  t.backward(loss, gs);
  CHECK(std::isfinite(gs.g[0].a[0]));
}

TEST_CASE("frozen parameters receive no gradient") {
  Rng rng(12);
  ParamStore p;
  p.add("frozen", randmat(2, 2, rng), false);
  p.add("live", randmat(2, 2, rng));
  Tape t(&p);
  int loss = reduce(t, t.add(t.leaf(0), t.leaf(1)), 2, 2);
  GradStore gs;
  gs.init_like(p);
  t.backward(loss, gs);
  for (double x : gs.g[0].a) CHECK(x == 0.0);
  bool any = false;
  for (double x : gs.g[1].a) any = any || x != 0.0;
  CHECK(any);
}

TEST_CASE("forward recomputes a built graph after parameter updates") {
  Rng rng(13);
  ParamStore p;
  p.add("X", randmat(3, 3, rng));
  Builder build = [](Tape& t) {
    return reduce(t, t.relu(t.matmul(t.leaf(0), t.leaf(0))), 3, 3);
  };
  Tape t(&p);
  int loss = build(t);
  double before = t.value(loss).at(0, 0);

  p.value[0].at(1, 1) += 0.25;
  t.forward();
  double after = t.value(loss).at(0, 0);
  CHECK(after != before);
  CHECK(after == doctest::Approx(loss_value(p, build)).epsilon(1e-15));
}

TEST_CASE("backward starts from clean node gradients each call") {
  Rng rng(14);
  ParamStore p;
  p.add("X", randmat(2, 2, rng));
  Tape t(&p);
  int loss = reduce(t, t.leaf(0), 2, 2);
  GradStore a, b;
  a.init_like(p);
  b.init_like(p);
  t.backward(loss, a);
  t.backward(loss, b);
  CHECK(a.g[0].a == b.g[0].a);  // node grads were reset, not doubled

  // GradStore itself accumulates across calls
  GradStore twice;
  twice.init_like(p);
  t.backward(loss, twice);
  t.backward(loss, twice);
  for (size_t i = 0; i < twice.g[0].a.size(); ++i) {
    CHECK(twice.g[0].a[i] == doctest::Approx(2.0 * a.g[0].a[i]).epsilon(1e-15));
  }
}

TEST_CASE("a composite graph mixing most ops differentiates cleanly") {
  Rng rng(15);
  ParamStore p;
  p.add("table", randmat(5, 4, rng, 0.5));
  p.add("w", randmat(4, 4, rng, 0.5));
  p.add("bias", randmat(1, 4, rng, 0.2));
  p.add("gate", randmat(1, 1, rng));
  Builder build = [](Tape& t) {
    int x = t.gather(0, {3, 1, 4});
    int h = t.add_rowvec(t.matmul(x, t.leaf(1)), t.leaf(2));
    int probs = t.causal_softmax(t.matmul(h, h, false, true), 0.5);
    int mixed = t.matmul(probs, t.relu(h));
    int last = t.pick_row(mixed, 2);
    int scaled = t.scale_by(last, t.sigmoid(t.leaf(3)));
    return reduce(t, scaled, 1, 4);
  };
  CHECK(max_rel_err(p, build) < 1e-6);
}
