#include "sessionrec/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <unordered_set>

#include "sessionrec/eval.hpp"
#include "sessionrec/recsys.hpp"

namespace sessionrec::train {

std::vector<TrainingExample> expand_prefixes(const std::vector<dataio::SessionSequence>& sequences,
                                             const std::vector<int>& split, bool full_window) {
  std::vector<TrainingExample> out;
  for (int si : split) {
    int L = static_cast<int>(sequences[static_cast<size_t>(si)].history.size());
    for (int l = 1; l < L; ++l) out.push_back({si, l});
    if (full_window) out.push_back({si, L});
  }
  return out;
}

NegativeSampler::NegativeSampler(const dataio::SongCatalog& catalog, NegMode mode, double beta)
    : mode_(mode), n_songs_(catalog.size()) {
  if (mode_ == NegMode::Popularity) {
    cum_.resize(static_cast<size_t>(n_songs_));
    double acc = 0.0;
    for (int v = 0; v < n_songs_; ++v) {
      acc += std::pow(static_cast<double>(catalog.popularity[static_cast<size_t>(v)]), beta);
      cum_[static_cast<size_t>(v)] = acc;
    }
    if (!(acc > 0.0)) throw DataError("popularity sampler: zero total weight");
  }
}

std::vector<int> NegativeSampler::sample(const std::vector<int>& positive, Rng& rng, int n) const {
  int want = n < 0 ? static_cast<int>(positive.size()) : n;
  if (n_songs_ <= 2 * static_cast<int>(positive.size())) {
    throw DataError("catalog too small for negative sampling");
  }
  if (n_songs_ - static_cast<int>(positive.size()) < want) {
    throw DataError("catalog too small for negative sampling");
  }
  std::unordered_set<int> taken(positive.begin(), positive.end());
  std::vector<int> out;
  out.reserve(static_cast<size_t>(want));
  while (static_cast<int>(out.size()) < want) {
    int v;
    if (mode_ == NegMode::Uniform) {
      v = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n_songs_)));
    } else {
      double u = rng.next_double() * cum_.back();
      v = static_cast<int>(std::upper_bound(cum_.begin(), cum_.end(), u) - cum_.begin());
      if (v >= n_songs_) v = n_songs_ - 1;
    }
    if (taken.count(v)) continue;
    taken.insert(v);
    out.push_back(v);
  }
  return out;
}

std::vector<int> sample_negatives(const std::vector<int>& positive,
                                  const dataio::SongCatalog& catalog, NegMode mode, double beta,
                                  Rng& rng, int n) {
  return NegativeSampler(catalog, mode, beta).sample(positive, rng, n);
}

namespace {

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x))); }

double score_song(const std::vector<double>& mu, const Mat& table, int song) {
  return linalg::dot(mu.data(), table.row(song), table.cols);
}

}  // namespace

double song_loss(const std::vector<double>& user_emb, const std::vector<int>& positives,
                 const std::vector<int>& negatives, const Mat& table) {
  double loss = 0.0;
  for (int p : positives) {
    double sp = score_song(user_emb, table, p);
    for (int q : negatives) {
      double sn = score_song(user_emb, table, q);
      loss += softplus(sn - sp);
    }
  }
  return loss;
}

double session_loss(const std::vector<double>& user_emb, const std::vector<double>& target_emb) {
  if (user_emb.size() != target_emb.size()) throw std::invalid_argument("session_loss: dim mismatch");
  double dot = 0.0;
  for (size_t i = 0; i < user_emb.size(); ++i) dot += user_emb[i] * target_emb[i];
  return 1.0 - dot;
}

double total_loss(double lambda, double song, double session) {
  return lambda * song + (1.0 - lambda) * session;
}

void AdamState::init_like(const ad::ParamStore& p) {
  m.clear();
  v.clear();
  for (const Mat& mat : p.value) {
    m.emplace_back(mat.rows, mat.cols);
    v.emplace_back(mat.rows, mat.cols);
  }
  t = 0;
}

void adam_step(ad::ParamStore& params, const ad::GradStore& grads, AdamState& st,
               const RunConfig& cfg) {
  if (grads.g.size() != params.value.size() || st.m.size() != params.value.size()) {
    throw std::invalid_argument("adam_step: shape mismatch");
  }
  for (size_t i = 0; i < grads.g.size(); ++i) {
    if (!grads.g[i].all_finite()) {
      throw DataError("adam_step: non-finite gradient in " + params.names[i]);
    }
  }
  ++st.t;
  double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  double c1 = 1.0 - std::pow(b1, static_cast<double>(st.t));
  double c2 = 1.0 - std::pow(b2, static_cast<double>(st.t));
  for (size_t i = 0; i < params.value.size(); ++i) {
    if (!params.trainable[i]) continue;
    Mat& th = params.value[i];
    Mat& m = st.m[i];
    Mat& v = st.v[i];
    const Mat& g = grads.g[i];
    for (size_t j = 0; j < th.a.size(); ++j) {
      m.a[j] = b1 * m.a[j] + (1.0 - b1) * g.a[j];
      v.a[j] = b2 * v.a[j] + (1.0 - b2) * g.a[j] * g.a[j];
      double mhat = m.a[j] / c1;
      double vhat = v.a[j] / c2;
      th.a[j] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
  }
}

double grad_check(ad::ParamStore& params, const model::PrefixInputs& in,
                  const std::vector<int>& positives, const std::vector<int>& negatives,
                  const RunConfig& cfg, double epsilon) {
  ad::Tape tape(&params);
  model::LossGraph g = model::build_loss_graph(tape, params, in, positives, negatives, cfg);
  ad::GradStore ana;
  ana.init_like(params);
  tape.backward(g.total, ana);

  double max_rel = 0.0;
  for (size_t p = 0; p < params.value.size(); ++p) {
    if (!params.trainable[p]) continue;
    Mat& mat = params.value[p];
    for (size_t j = 0; j < mat.a.size(); ++j) {
      double orig = mat.a[j];
      mat.a[j] = orig + epsilon;
      tape.forward();
      double fp = tape.value(g.total).a[0];
      mat.a[j] = orig - epsilon;
      tape.forward();
      double fm = tape.value(g.total).a[0];
      mat.a[j] = orig;
      double num = (fp - fm) / (2.0 * epsilon);
      double a = ana.g[p].a[j];
      double rel = std::fabs(a - num) / std::max({std::fabs(a), std::fabs(num), 1e-3});
      max_rel = std::max(max_rel, rel);
    }
  }
  tape.forward();
  return max_rel;
}

namespace {

struct EvalSeqState {
  model::PrefixInputs inputs;  // full window, target side filled
  std::unordered_set<int> truth;
};

double mean_ndcg(const std::vector<EvalSeqState>& seqs, const ad::ParamStore& params,
                 const RunConfig& cfg) {
  if (seqs.empty()) return 0.0;
  int n = static_cast<int>(seqs.size());
  std::vector<double> vals(static_cast<size_t>(n), 0.0);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    const EvalSeqState& s = seqs[static_cast<size_t>(i)];
    std::vector<double> mu = model::user_embedding(params, s.inputs, cfg);
    rec::RecommendationList list = rec::top_k(rec::score_all(mu, params.at("song_table")), cfg.k);
    vals[static_cast<size_t>(i)] = eval::ndcg_at_k(list.songs, s.truth, s.truth.size());
  }
  double sum = 0.0;
  for (double v : vals) sum += v;
  return sum / n;
}

}  // namespace

TrainResult train(const data::Dataset& ds, const embed::EmbeddingTable& table,
                  const RunConfig& cfg, std::ostream* trace_out,
                  const ad::ParamStore* resume_params, const AdamState* resume_adam,
                  int start_epoch) {
  if (ds.splits.train.empty()) throw DataError("train: empty train split");

  TrainResult res;
  ad::ParamStore params = resume_params ? *resume_params : model::init_params(table, cfg, cfg.seed);
  AdamState adam;
  if (resume_adam) {
    adam = *resume_adam;
  } else {
    adam.init_like(params);
  }

  std::vector<TrainingExample> examples =
      expand_prefixes(ds.sequences, ds.splits.train, cfg.full_window);
  if (examples.empty()) throw DataError("train: no prefix examples (L too small?)");
  int n_ex = static_cast<int>(examples.size());

  // constant per example: session scores, long-term picks, target side
  std::vector<model::PrefixInputs> inputs(static_cast<size_t>(n_ex));
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n_ex; ++i) {
    const TrainingExample& ex = examples[static_cast<size_t>(i)];
    inputs[static_cast<size_t>(i)] = model::build_prefix_inputs(
        ds.sequences[static_cast<size_t>(ex.seq_index)], ex.l, ds.history, ds.cooc, cfg, true);
  }

  // full-window states for the per-epoch NDCG probes
  auto build_eval_states = [&](const std::vector<int>& split, bool with_target) {
    std::vector<EvalSeqState> out(split.size());
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < static_cast<int>(split.size()); ++i) {
      const dataio::SessionSequence& seq = ds.sequences[static_cast<size_t>(split[static_cast<size_t>(i)])];
      EvalSeqState st;
      st.inputs = model::build_prefix_inputs(seq, static_cast<int>(seq.history.size()), ds.history,
                                             ds.cooc, cfg, with_target);
      st.truth.insert(seq.target.songs.begin(), seq.target.songs.end());
      out[static_cast<size_t>(i)] = std::move(st);
    }
    return out;
  };
  std::vector<EvalSeqState> train_eval = build_eval_states(ds.splits.train, false);
  std::vector<EvalSeqState> val_eval = build_eval_states(ds.splits.val, true);

  NegativeSampler sampler(ds.catalog, cfg.neg_mode, cfg.neg_beta);
  const int CHUNK = 32;

  int bad_epochs = 0;
  res.best_val_ndcg = -1.0;
  res.epochs_run = start_epoch;

  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    ad::ParamStore snapshot = params;
    AdamState adam_snapshot = adam;

    // fresh negatives, one substream per example so any schedule agrees
    std::vector<std::vector<int>> negs(static_cast<size_t>(n_ex));
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n_ex; ++i) {
      Rng r = Rng::substream(cfg.seed, static_cast<std::uint64_t>(epoch),
                             static_cast<std::uint64_t>(i), 2);
      negs[static_cast<size_t>(i)] =
          sampler.sample(inputs[static_cast<size_t>(i)].target_songs, r);
    }

    std::vector<int> order(static_cast<size_t>(n_ex));
    for (int i = 0; i < n_ex; ++i) order[static_cast<size_t>(i)] = i;
    Rng shuffle_rng = Rng::substream(cfg.seed, static_cast<std::uint64_t>(epoch), 0, 1);
    shuffle(order, shuffle_rng);

    double epoch_loss = 0.0;
    bool epoch_ok = true;
    for (int b0 = 0; b0 < n_ex && epoch_ok; b0 += cfg.batch_size) {
      int b1 = std::min(b0 + cfg.batch_size, n_ex);
      int n_chunks = (b1 - b0 + CHUNK - 1) / CHUNK;
      std::vector<ad::GradStore> partial(static_cast<size_t>(n_chunks));
      std::vector<double> chunk_loss(static_cast<size_t>(n_chunks), 0.0);

#pragma omp parallel for schedule(dynamic)
      for (int c = 0; c < n_chunks; ++c) {
        partial[static_cast<size_t>(c)].init_like(params);
        int lo = b0 + c * CHUNK;
        int hi = std::min(lo + CHUNK, b1);
        for (int j = lo; j < hi; ++j) {
          int e = order[static_cast<size_t>(j)];
          ad::Tape tape(&params);
          model::LossGraph g =
              model::build_loss_graph(tape, params, inputs[static_cast<size_t>(e)],
                                      inputs[static_cast<size_t>(e)].target_songs,
                                      negs[static_cast<size_t>(e)], cfg);
          chunk_loss[static_cast<size_t>(c)] += tape.value(g.total).a[0];
          tape.backward(g.total, partial[static_cast<size_t>(c)]);
        }
      }

      ad::GradStore grads;
      grads.init_like(params);
      double batch_loss = 0.0;
      for (int c = 0; c < n_chunks; ++c) {
        grads.add(partial[static_cast<size_t>(c)]);
        batch_loss += chunk_loss[static_cast<size_t>(c)];
      }

      bool finite = std::isfinite(batch_loss);
      for (const Mat& m : grads.g) {
        if (!finite) break;
        finite = m.all_finite();
      }
      if (!finite) {
        params = snapshot;
        adam = adam_snapshot;
        res.aborted = true;
        epoch_ok = false;
        if (trace_out) {
          (*trace_out) << "# aborted: non-finite loss at epoch " << (epoch + 1) << "\n";
        }
        break;
      }
      epoch_loss += batch_loss;
      adam_step(params, grads, adam, cfg);
    }
    if (!epoch_ok) break;

    res.epochs_run = epoch + 1;

    EpochLog log;
    log.epoch = epoch + 1;
    log.train_loss = epoch_loss / n_ex;
    log.train_ndcg = mean_ndcg(train_eval, params, cfg);

    if (!val_eval.empty()) {
      int n_val = static_cast<int>(val_eval.size());
      std::vector<double> vloss(static_cast<size_t>(n_val), 0.0);
#pragma omp parallel for schedule(dynamic)
      for (int i = 0; i < n_val; ++i) {
        Rng r = Rng::substream(cfg.seed, static_cast<std::uint64_t>(epoch),
                               static_cast<std::uint64_t>(i), 3);
        std::vector<int> vneg = sampler.sample(val_eval[static_cast<size_t>(i)].inputs.target_songs, r);
        ad::Tape tape(&params);
        model::LossGraph g = model::build_loss_graph(
            tape, params, val_eval[static_cast<size_t>(i)].inputs,
            val_eval[static_cast<size_t>(i)].inputs.target_songs, vneg, cfg);
        vloss[static_cast<size_t>(i)] = tape.value(g.total).a[0];
      }
      double sum = 0.0;
      for (double v : vloss) sum += v;
      log.val_loss = sum / n_val;
      log.val_ndcg = mean_ndcg(val_eval, params, cfg);
    }

    res.trace.push_back(log);
    if (trace_out) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "epoch=%d split=train loss=%.6f ndcg=%.6f\n", log.epoch,
                    log.train_loss, log.train_ndcg);
      (*trace_out) << buf;
      if (!val_eval.empty()) {
        std::snprintf(buf, sizeof(buf), "epoch=%d split=val loss=%.6f ndcg=%.6f\n", log.epoch,
                      log.val_loss, log.val_ndcg);
        (*trace_out) << buf;
      }
    }

    if (!val_eval.empty()) {
      if (log.val_ndcg > res.best_val_ndcg) {
        res.best_val_ndcg = log.val_ndcg;
        res.best = params;
        res.best_epoch = log.epoch;
        bad_epochs = 0;
      } else {
        ++bad_epochs;
        if (bad_epochs >= cfg.patience) break;
      }
    }
  }

  res.last = params;
  res.adam = adam;
  if (val_eval.empty() || res.best_epoch == 0) {
    res.best = params;
    res.best_epoch = res.epochs_run;
    if (val_eval.empty()) res.best_val_ndcg = 0.0;
  }
  return res;
}

}  // namespace sessionrec::train
