#include "sessionrec/seqmodel.hpp"

#include <cmath>
#include <stdexcept>

namespace sessionrec::model {

std::string head_param(int block, int head, const char* which) {
  return "blk" + std::to_string(block) + ".head" + std::to_string(head) + "." + which;
}

std::string block_param(int block, const char* which) {
  return "blk" + std::to_string(block) + "." + which;
}

namespace {

Mat glorot(int rows, int cols, Rng& rng) {
  Mat m(rows, cols);
  double s = std::sqrt(2.0 / (rows + cols));
  for (double& x : m.a) x = s * rng.next_normal();
  return m;
}

}  // namespace

ad::ParamStore init_params(const embed::EmbeddingTable& table, const RunConfig& cfg,
                           std::uint64_t seed) {
  if (cfg.d % cfg.H != 0) throw ConfigError("H must divide d");
  if (table.m.cols != cfg.d) throw ConfigError("embedding table dim does not match config d");
  int dh = cfg.d / cfg.H;

  bool table_trainable = table.trainable || cfg.trainable_embeddings;

  ad::ParamStore p;
  Rng rng(seed);
  p.add("song_table", table.m, table_trainable);

  Mat pos(cfg.L, cfg.d);
  for (double& x : pos.a) x = 0.1 * rng.next_normal();
  p.add("positional", std::move(pos));

  for (int b = 0; b < cfg.B; ++b) {
    for (int h = 0; h < cfg.H; ++h) {
      p.add(head_param(b, h, "wq"), glorot(cfg.d, dh, rng));
      p.add(head_param(b, h, "wk"), glorot(cfg.d, dh, rng));
      p.add(head_param(b, h, "wv"), glorot(cfg.d, dh, rng));
    }
    p.add(block_param(b, "wo"), glorot(cfg.d, cfg.d, rng));
    p.add(block_param(b, "ffn_w1"), glorot(cfg.d, cfg.d, rng));
    p.add(block_param(b, "ffn_b1"), Mat(1, cfg.d));
    p.add(block_param(b, "ffn_w2"), glorot(cfg.d, cfg.d, rng));
    p.add(block_param(b, "ffn_b2"), Mat(1, cfg.d));
  }
  p.add("mixer_logits", Mat(3, 1));
  p.add("gate_w", Mat(2 * cfg.d, 1));
  p.add("gate_b", Mat(1, 1));
  return p;
}

namespace {

// softmax over the first `upto+1` entries of row i, scores pre-scaled
void causal_softmax_row(const double* src, double* dst, int upto, double scale) {
  double mx = scale * src[0];
  for (int j = 1; j <= upto; ++j) mx = std::max(mx, scale * src[j]);
  double sum = 0.0;
  for (int j = 0; j <= upto; ++j) {
    dst[j] = std::exp(scale * src[j] - mx);
    sum += dst[j];
  }
  for (int j = 0; j <= upto; ++j) dst[j] /= sum;
}

}  // namespace

Mat encode_sequence(const ad::ParamStore& p, const Mat& session_embeddings, const RunConfig& cfg,
                    AttentionTrace* trace) {
  int l = session_embeddings.rows;
  if (l == 0) throw std::invalid_argument("encode_sequence: empty sequence");
  if (l > cfg.L) throw std::invalid_argument("encode_sequence: sequence longer than L");
  if (session_embeddings.cols != cfg.d) throw std::invalid_argument("encode_sequence: bad width");
  int dh = cfg.d / cfg.H;
  double scale = 1.0 / std::sqrt(static_cast<double>(cfg.d));

  if (trace) trace->probs.clear();

  Mat x = session_embeddings;
  for (int b = 0; b < cfg.B; ++b) {
    Mat heads(l, cfg.d);
    for (int h = 0; h < cfg.H; ++h) {
      const Mat& wq = p.at(head_param(b, h, "wq"));
      const Mat& wk = p.at(head_param(b, h, "wk"));
      const Mat& wv = p.at(head_param(b, h, "wv"));
      Mat q = linalg::matmul(x, wq);
      Mat k = linalg::matmul(x, wk);
      Mat v = linalg::matmul(x, wv);
      Mat a = linalg::matmul(q, k, false, true);
      Mat probs(l, l);
      for (int i = 0; i < l; ++i) causal_softmax_row(a.row(i), probs.row(i), i, scale);
      if (trace) trace->probs.push_back(probs);
      Mat att = linalg::matmul(probs, v);
      for (int i = 0; i < l; ++i) {
        double* dst = heads.row(i) + h * dh;
        const double* src = att.row(i);
        for (int j = 0; j < dh; ++j) dst[j] = src[j];
      }
    }
    Mat sal = linalg::matmul(heads, p.at(block_param(b, "wo")));
    if (cfg.residual) linalg::add_inplace(sal, x);

    Mat f1 = linalg::matmul(sal, p.at(block_param(b, "ffn_w1")));
    const Mat& b1 = p.at(block_param(b, "ffn_b1"));
    for (int i = 0; i < l; ++i) {
      double* r = f1.row(i);
      for (int j = 0; j < cfg.d; ++j) r[j] = std::max(r[j] + b1.a[static_cast<size_t>(j)], 0.0);
    }
    Mat f2 = linalg::matmul(f1, p.at(block_param(b, "ffn_w2")));
    const Mat& b2 = p.at(block_param(b, "ffn_b2"));
    for (int i = 0; i < l; ++i) {
      double* r = f2.row(i);
      for (int j = 0; j < cfg.d; ++j) r[j] += b2.a[static_cast<size_t>(j)];
    }
    if (cfg.residual) linalg::add_inplace(f2, sal);
    x = std::move(f2);
  }
  return x;
}

std::vector<double> short_term_embedding(const Mat& encoded) {
  if (encoded.rows == 0) throw std::invalid_argument("short_term_embedding: empty input");
  const double* r = encoded.row(encoded.rows - 1);
  return std::vector<double>(r, r + encoded.cols);
}

std::pair<std::vector<double>, double> fuse(const std::vector<double>& short_emb,
                                            const std::vector<double>& long_emb,
                                            const ad::ParamStore& p) {
  const Mat& gw = p.at("gate_w");
  const Mat& gb = p.at("gate_b");
  size_t d = short_emb.size();
  if (long_emb.size() != d) throw std::invalid_argument("fuse: dim mismatch");
  if (gw.rows != static_cast<int>(2 * d)) throw std::invalid_argument("fuse: gate width");
  double z = gb.a[0];
  for (size_t j = 0; j < d; ++j) z += gw.a[j] * short_emb[j];
  for (size_t j = 0; j < d; ++j) z += gw.a[d + j] * long_emb[j];
  double beta = 1.0 / (1.0 + std::exp(-z));
  std::vector<double> out(d);
  for (size_t j = 0; j < d; ++j) out[j] = beta * short_emb[j] + (1.0 - beta) * long_emb[j];
  return {out, beta};
}

PrefixInputs build_prefix_inputs(const dataio::SessionSequence& seq, int l,
                                 const actr::ListenHistoryIndex& history,
                                 const actr::CooccurrenceStats& cooc, const RunConfig& cfg,
                                 bool with_target) {
  int L = static_cast<int>(seq.history.size());
  if (l < 1 || l > L) throw std::invalid_argument("build_prefix_inputs: bad prefix length");
  const dataio::Session* target = nullptr;
  if (l < L) {
    target = &seq.history[static_cast<size_t>(l)];
  } else {
    target = &seq.target;
  }

  double unit = cfg.time_unit_seconds();
  PrefixInputs in;
  in.user = seq.user;
  in.songs.reserve(static_cast<size_t>(l));
  for (int j = 0; j < l; ++j) {
    const dataio::Session& s = seq.history[static_cast<size_t>(j)];
    in.songs.push_back(s.songs);
    in.bl.push_back(actr::base_level_session(s, seq.user, s.start_time, cfg.alpha, history, unit));
    in.spr.push_back(actr::spreading(s, cooc));
  }

  auto top = actr::top_bl_songs(seq.user, target->start_time, cfg.alpha, history, cfg.top_bl_n, unit);
  for (const auto& e : top) {
    in.long_songs.push_back(e.song);
    in.long_weights.push_back(e.weight);
  }

  if (with_target) {
    in.target_songs = target->songs;
    in.target_bl =
        actr::base_level_session(*target, seq.user, target->start_time, cfg.alpha, history, unit);
    in.target_spr = actr::spreading(*target, cooc);
  }
  return in;
}

namespace {

// w_v = (softmax of mixer logits) . (bl_v, spr_v, pm_v), pm computed from
// the current table rows; returns sum_v w_v row_v as a d-vector
std::vector<double> session_embedding_plain(const ad::ParamStore& p, const std::vector<int>& songs,
                                            const std::vector<double>& bl,
                                            const std::vector<double>& spr) {
  const Mat& table = p.at("song_table");
  const Mat& logits = p.at("mixer_logits");
  size_t k = songs.size();
  if (bl.size() != k || spr.size() != k) {
    throw std::invalid_argument("session embedding: component size mismatch");
  }
  int d = table.cols;

  std::vector<double> total(static_cast<size_t>(d), 0.0);
  for (int v : songs) {
    const double* r = table.row(v);
    for (int j = 0; j < d; ++j) total[static_cast<size_t>(j)] += r[j];
  }
  std::vector<double> pm_raw(k);
  for (size_t i = 0; i < k; ++i) {
    const double* r = table.row(songs[i]);
    double dot_total = 0.0, dot_self = 0.0;
    for (int j = 0; j < d; ++j) {
      dot_total += r[j] * total[static_cast<size_t>(j)];
      dot_self += r[j] * r[j];
    }
    pm_raw[i] = dot_total - dot_self;
  }
  std::vector<double> pm = actr::softmax(pm_raw);
  std::vector<double> mix =
      actr::softmax({logits.at(0, 0), logits.at(1, 0), logits.at(2, 0)});

  std::vector<double> out(static_cast<size_t>(d), 0.0);
  for (size_t i = 0; i < k; ++i) {
    double w = mix[0] * bl[i] + mix[1] * spr[i] + mix[2] * pm[i];
    const double* r = table.row(songs[i]);
    for (int j = 0; j < d; ++j) out[static_cast<size_t>(j)] += w * r[j];
  }
  return out;
}

std::vector<double> long_term_plain(const ad::ParamStore& p, const PrefixInputs& in) {
  const Mat& table = p.at("song_table");
  std::vector<double> out(static_cast<size_t>(table.cols), 0.0);
  for (size_t i = 0; i < in.long_songs.size(); ++i) {
    const double* r = table.row(in.long_songs[i]);
    for (int j = 0; j < table.cols; ++j) out[static_cast<size_t>(j)] += in.long_weights[i] * r[j];
  }
  return out;
}

}  // namespace

std::vector<double> user_embedding(const ad::ParamStore& p, const PrefixInputs& in,
                                   const RunConfig& cfg, double* beta_out, AttentionTrace* trace) {
  int l = static_cast<int>(in.songs.size());
  if (l == 0) throw std::invalid_argument("user_embedding: empty prefix");
  Mat x(l, cfg.d);
  const Mat& pos = p.at("positional");
  for (int i = 0; i < l; ++i) {
    std::vector<double> se = session_embedding_plain(p, in.songs[static_cast<size_t>(i)],
                                                     in.bl[static_cast<size_t>(i)],
                                                     in.spr[static_cast<size_t>(i)]);
    double* r = x.row(i);
    const double* pr = pos.row(i);
    for (int j = 0; j < cfg.d; ++j) r[j] = se[static_cast<size_t>(j)] + pr[j];
  }
  Mat enc = encode_sequence(p, x, cfg, trace);
  std::vector<double> short_emb = short_term_embedding(enc);
  std::vector<double> long_emb = long_term_plain(p, in);
  auto [mu, beta] = fuse(short_emb, long_emb, p);
  if (beta_out) *beta_out = beta;
  return mu;
}

std::vector<double> target_embedding(const ad::ParamStore& p, const PrefixInputs& in) {
  if (in.target_songs.empty()) throw std::invalid_argument("target_embedding: no target side");
  return session_embedding_plain(p, in.target_songs, in.target_bl, in.target_spr);
}

namespace {

// shared between user graph and loss graph
int session_embedding_node(ad::Tape& t, int table_param, int mix_node, const std::vector<int>& songs,
                           const std::vector<double>& bl, const std::vector<double>& spr) {
  int k = static_cast<int>(songs.size());
  int rows = t.gather(table_param, songs);
  int total = t.colsum(rows);
  int dots = t.matmul(rows, total, false, true);
  int self_dots = t.row_dot(rows, rows);
  int pm = t.softmax_vec(t.sub(dots, self_dots));

  Mat blm(k, 1), sprm(k, 1);
  blm.a = bl;
  sprm.a = spr;
  int comps = t.concat_cols(t.concat_cols(t.constant(std::move(blm)), t.constant(std::move(sprm))), pm);
  int w = t.matmul(comps, mix_node);      // k x 1
  return t.matmul(w, rows, true, false);  // 1 x d
}

}  // namespace

UserGraph build_user_graph(ad::Tape& t, const ad::ParamStore& p, const PrefixInputs& in,
                           const RunConfig& cfg) {
  int l = static_cast<int>(in.songs.size());
  if (l == 0) throw std::invalid_argument("build_user_graph: empty prefix");
  if (l > cfg.L) throw std::invalid_argument("build_user_graph: prefix longer than L");
  int table_param = p.find("song_table");
  int mix = t.softmax_vec(t.leaf(p.find("mixer_logits")));

  std::vector<int> sess_nodes;
  sess_nodes.reserve(static_cast<size_t>(l));
  for (int j = 0; j < l; ++j) {
    sess_nodes.push_back(session_embedding_node(t, table_param, mix, in.songs[static_cast<size_t>(j)],
                                                in.bl[static_cast<size_t>(j)],
                                                in.spr[static_cast<size_t>(j)]));
  }
  std::vector<int> pos_rows(static_cast<size_t>(l));
  for (int j = 0; j < l; ++j) pos_rows[static_cast<size_t>(j)] = j;
  int x = t.add(t.stack_rows(sess_nodes), t.gather(p.find("positional"), pos_rows));

  double scale = 1.0 / std::sqrt(static_cast<double>(cfg.d));
  for (int b = 0; b < cfg.B; ++b) {
    int heads = -1;
    for (int h = 0; h < cfg.H; ++h) {
      int q = t.matmul(x, t.leaf(p.find(head_param(b, h, "wq"))));
      int k = t.matmul(x, t.leaf(p.find(head_param(b, h, "wk"))));
      int v = t.matmul(x, t.leaf(p.find(head_param(b, h, "wv"))));
      int probs = t.causal_softmax(t.matmul(q, k, false, true), scale);
      int att = t.matmul(probs, v);
      heads = (h == 0) ? att : t.concat_cols(heads, att);
    }
    int sal = t.matmul(heads, t.leaf(p.find(block_param(b, "wo"))));
    if (cfg.residual) sal = t.add(x, sal);
    int f1 = t.relu(t.add_rowvec(t.matmul(sal, t.leaf(p.find(block_param(b, "ffn_w1")))),
                                 t.leaf(p.find(block_param(b, "ffn_b1")))));
    int f2 = t.add_rowvec(t.matmul(f1, t.leaf(p.find(block_param(b, "ffn_w2")))),
                          t.leaf(p.find(block_param(b, "ffn_b2"))));
    if (cfg.residual) f2 = t.add(sal, f2);
    x = f2;
  }
  int short_emb = t.pick_row(x, l - 1);

  int long_emb;
  if (in.long_songs.empty()) {
    long_emb = t.constant(Mat(1, cfg.d));
  } else {
    Mat w(1, static_cast<int>(in.long_weights.size()));
    w.a = in.long_weights;
    long_emb = t.matmul(t.constant(std::move(w)), t.gather(table_param, in.long_songs));
  }

  int cat = t.concat_cols(short_emb, long_emb);
  int z = t.add(t.matmul(cat, t.leaf(p.find("gate_w"))), t.leaf(p.find("gate_b")));
  int beta = t.sigmoid(z);
  int one_minus = t.affine(beta, -1.0, 1.0);
  int mu = t.add(t.scale_by(short_emb, beta), t.scale_by(long_emb, one_minus));

  UserGraph g;
  g.mu = mu;
  g.beta = beta;
  return g;
}

LossGraph build_loss_graph(ad::Tape& t, const ad::ParamStore& p, const PrefixInputs& in,
                           const std::vector<int>& positives, const std::vector<int>& negatives,
                           const RunConfig& cfg) {
  if (in.target_songs.empty()) throw std::invalid_argument("build_loss_graph: no target side");
  if (positives.empty() || negatives.empty()) {
    throw std::invalid_argument("build_loss_graph: empty positive or negative set");
  }
  UserGraph ug = build_user_graph(t, p, in, cfg);
  int table_param = p.find("song_table");

  int sp = t.matmul(t.gather(table_param, positives), ug.mu, false, true);
  int sn = t.matmul(t.gather(table_param, negatives), ug.mu, false, true);
  int song = t.bpr_pairs(sp, sn);

  int mix = t.softmax_vec(t.leaf(p.find("mixer_logits")));
  int m_target = session_embedding_node(t, table_param, mix, in.target_songs, in.target_bl,
                                        in.target_spr);
  int sess = t.affine(t.matmul(ug.mu, m_target, false, true), -1.0, 1.0);
  if (cfg.clamp_session_loss) sess = t.relu(sess);

  int total = t.add(t.affine(song, cfg.lambda, 0.0), t.affine(sess, 1.0 - cfg.lambda, 0.0));

  LossGraph g;
  g.total = total;
  g.song = song;
  g.session = sess;
  g.mu = ug.mu;
  return g;
}

}  // namespace sessionrec::model
