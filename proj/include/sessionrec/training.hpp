#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sessionrec/dataset.hpp"
#include "sessionrec/embed.hpp"
#include "sessionrec/seqmodel.hpp"

namespace sessionrec::train {

// One prefix of one training window: sessions [0, l) predict the songs of
// history session l.
struct TrainingExample {
  int seq_index = 0;
  int l = 0;
};

// L-1 examples per sequence, prefix lengths 1..L-1. With full_window an
// L-th example is added whose positive is the window's own target.
std::vector<TrainingExample> expand_prefixes(const std::vector<dataio::SessionSequence>& sequences,
                                             const std::vector<int>& split,
                                             bool full_window = false);

// Weighted reservoir for V \ positive. Uniform mode draws flat; popularity
// mode draws with probability proportional to popularity^beta.
class NegativeSampler {
 public:
  NegativeSampler(const dataio::SongCatalog& catalog, NegMode mode, double beta);

  // n < 0 draws |positive| songs (the training default); sampling is
  // without replacement and never returns a positive.
  std::vector<int> sample(const std::vector<int>& positive, Rng& rng, int n = -1) const;

 private:
  NegMode mode_;
  int n_songs_ = 0;
  std::vector<double> cum_;  // cumulative popularity^beta weights
};

std::vector<int> sample_negatives(const std::vector<int>& positive,
                                  const dataio::SongCatalog& catalog, NegMode mode, double beta,
                                  Rng& rng, int n = -1);

// Plain-math losses, the oracles the tape is tested against.
double song_loss(const std::vector<double>& user_emb, const std::vector<int>& positives,
                 const std::vector<int>& negatives, const Mat& table);
double session_loss(const std::vector<double>& user_emb, const std::vector<double>& target_emb);
double total_loss(double lambda, double song, double session);

struct AdamState {
  std::vector<Mat> m, v;
  std::int64_t t = 0;

  void init_like(const ad::ParamStore& p);
};

// Standard Adam with bias correction; throws DataError on non-finite
// gradients. Frozen parameters are left untouched.
void adam_step(ad::ParamStore& params, const ad::GradStore& grads, AdamState& st,
               const RunConfig& cfg);

// Max relative error between tape gradients of the total loss and central
// finite differences over every trainable coordinate.
double grad_check(ad::ParamStore& params, const model::PrefixInputs& in,
                  const std::vector<int>& positives, const std::vector<int>& negatives,
                  const RunConfig& cfg, double epsilon = 1e-5);

struct EpochLog {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_ndcg = 0.0;
  double val_loss = 0.0;
  double val_ndcg = 0.0;
};

struct TrainResult {
  ad::ParamStore best;   // parameters at the best validation epoch
  ad::ParamStore last;   // parameters after the final completed epoch
  AdamState adam;        // optimizer state matching `last`
  std::vector<EpochLog> trace;
  int best_epoch = 0;    // 1-based, 0 when no epoch ran
  double best_val_ndcg = 0.0;
  int epochs_run = 0;    // absolute count including resumed epochs
  bool aborted = false;  // non-finite loss stopped the run
};

// Mini-batch Adam over all prefix examples of the train split, negatives
// resampled per epoch, early stopping on validation NDCG. Pass the
// previous run's params/adam/epochs_run to resume; epoch-keyed RNG
// substreams make a resumed run bit-identical to an uninterrupted one.
TrainResult train(const data::Dataset& ds, const embed::EmbeddingTable& table,
                  const RunConfig& cfg, std::ostream* trace_out = nullptr,
                  const ad::ParamStore* resume_params = nullptr,
                  const AdamState* resume_adam = nullptr, int start_epoch = 0);

}  // namespace sessionrec::train
