#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sessionrec/dataset.hpp"
#include "sessionrec/seqmodel.hpp"

namespace sessionrec::rec {

struct RecommendationList {
  int user = 0;
  std::vector<int> songs;      // exactly K, by descending score
  std::vector<double> scores;  // aligned with songs, non-increasing
};

// r(v) = user . table_row(v) for every song
std::vector<double> score_all(const std::vector<double>& user_embedding, const Mat& table);

// K highest scores, ties broken by ascending song index
RecommendationList top_k(const std::vector<double>& scores, int k);

// Embeds the sequence's full history (any length 1..L), fuses with the
// long-term state at the target's start time, scores the catalog.
RecommendationList recommend(const ad::ParamStore& params, const dataio::SessionSequence& seq,
                             const actr::ListenHistoryIndex& history,
                             const actr::CooccurrenceStats& cooc, const RunConfig& cfg, int k);

enum class BaselineKind { GTop, PTop, ActrRepeat, Oracle };

BaselineKind baseline_from_string(const std::string& s);
std::string to_string(BaselineKind k);

// Shared read-only state for baseline recommenders; gtop_order caches the
// catalog ranked by total listen count (ties by index) for padding.
struct BaselineContext {
  const dataio::SongCatalog* catalog = nullptr;
  const actr::ListenHistoryIndex* history = nullptr;
  const actr::CooccurrenceStats* cooc = nullptr;
  double alpha = 0.5;
  double time_unit_seconds = 3600.0;
  std::vector<int> gtop_order;

  BaselineContext() = default;
  BaselineContext(const dataio::SongCatalog& cat, const actr::ListenHistoryIndex& hist,
                  const actr::CooccurrenceStats& co, const RunConfig& cfg);
};

// GTop: global top-K by listen count. PTop: the user's songs heard before
// t_ref ranked by personal listen count. ActrRepeat: heard songs ranked by
// softmax(base-level) + softmax(spreading vs the most recent history
// session). Oracle: the target session itself (testing upper bound).
// Personal pools shorter than K are padded from the global ranking.
RecommendationList baseline_recommend(BaselineKind kind, const BaselineContext& ctx,
                                      const dataio::SessionSequence& seq, int k,
                                      std::int64_t t_ref);

}  // namespace sessionrec::rec
