#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sessionrec/actr.hpp"
#include "sessionrec/autodiff.hpp"
#include "sessionrec/config.hpp"
#include "sessionrec/dataio.hpp"
#include "sessionrec/embed.hpp"
#include "sessionrec/linalg.hpp"

namespace sessionrec::model {

// Parameter names, in registration order:
//   song_table, positional,
//   blk{b}.head{h}.wq / .wk / .wv, blk{b}.wo,
//   blk{b}.ffn_w1, blk{b}.ffn_b1, blk{b}.ffn_w2, blk{b}.ffn_b2,
//   mixer_logits, gate_w, gate_b
std::string head_param(int block, int head, const char* which);
std::string block_param(int block, const char* which);

// Builds the full parameter set. The song table comes from `table`;
// everything else is initialized from `seed` (weight matrices scaled by
// sqrt(2/(fan_in+fan_out)), positional rows N(0, 0.1^2), biases, mixer
// logits and gate at zero so training starts from uniform attention mixing
// and a 0.5 fusion gate).
ad::ParamStore init_params(const embed::EmbeddingTable& table, const RunConfig& cfg,
                           std::uint64_t seed);

struct AttentionTrace {
  // probs[b*H + h] is the l x l causal attention matrix of head h in block b
  std::vector<Mat> probs;
};

// The transformer stack on already-assembled inputs (session embeddings
// with positional rows added). Plain serial math, usable for inference and
// as the oracle the tape version is tested against.
Mat encode_sequence(const ad::ParamStore& p, const Mat& session_embeddings, const RunConfig& cfg,
                    AttentionTrace* trace = nullptr);

std::vector<double> short_term_embedding(const Mat& encoded);

// beta = sigmoid(gate_w . [short; long] + gate_b)
std::pair<std::vector<double>, double> fuse(const std::vector<double>& short_emb,
                                            const std::vector<double>& long_emb,
                                            const ad::ParamStore& p);

// Everything the model needs for one prefix, with the attention statistics
// that do not depend on trainable parameters (base-level, spreading,
// long-term weights) precomputed as constants.
struct PrefixInputs {
  int user = 0;
  std::vector<std::vector<int>> songs;       // per prefix session, catalog indices
  std::vector<std::vector<double>> bl;       // softmaxed within session
  std::vector<std::vector<double>> spr;      // softmaxed within session
  std::vector<int> long_songs;               // top base-level picks at t_ref
  std::vector<double> long_weights;

  // target side, only filled for training examples
  std::vector<int> target_songs;
  std::vector<double> target_bl;
  std::vector<double> target_spr;
};

// Assembles inputs for the first `l` sessions of `seq.history`. The target
// session (scored at its own start time) is seq.history[l] when l < L, the
// window's own target otherwise. t_ref for the long-term component is the
// target's start time.
PrefixInputs build_prefix_inputs(const dataio::SessionSequence& seq, int l,
                                 const actr::ListenHistoryIndex& history,
                                 const actr::CooccurrenceStats& cooc, const RunConfig& cfg,
                                 bool with_target);

// Full forward pass: per-session ACT-R-weighted embeddings, transformer,
// beta-gated fusion with the long-term embedding.
std::vector<double> user_embedding(const ad::ParamStore& p, const PrefixInputs& in,
                                   const RunConfig& cfg, double* beta_out = nullptr,
                                   AttentionTrace* trace = nullptr);

// Session embedding of the prefix's target side (plain math, used by the
// session-loss oracle).
std::vector<double> target_embedding(const ad::ParamStore& p, const PrefixInputs& in);

// Tape versions of the same computations.
struct UserGraph {
  int mu = -1;    // 1 x d
  int beta = -1;  // 1 x 1
};
UserGraph build_user_graph(ad::Tape& tape, const ad::ParamStore& p, const PrefixInputs& in,
                           const RunConfig& cfg);

struct LossGraph {
  int total = -1;
  int song = -1;
  int session = -1;
  int mu = -1;
};
LossGraph build_loss_graph(ad::Tape& tape, const ad::ParamStore& p, const PrefixInputs& in,
                           const std::vector<int>& positives, const std::vector<int>& negatives,
                           const RunConfig& cfg);

}  // namespace sessionrec::model
