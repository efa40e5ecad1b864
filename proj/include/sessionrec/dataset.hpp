#pragma once

#include <vector>

#include "sessionrec/actr.hpp"
#include "sessionrec/config.hpp"
#include "sessionrec/dataio.hpp"

namespace sessionrec::data {

// The full working set derived from one event log: everything train,
// evaluate and recommend need.
struct Dataset {
  dataio::SongCatalog catalog;
  dataio::UserIndex users;
  std::vector<dataio::IndexedEvent> events;          // (user, time)-sorted
  std::vector<std::vector<dataio::Session>> sessions;  // per user
  std::vector<dataio::SessionSequence> sequences;
  dataio::SplitIndices splits;
  actr::ListenHistoryIndex history;
  actr::CooccurrenceStats cooc;  // from train-split session windows only
};

// parse -> catalog -> sessionize -> windows -> split -> indices. The
// co-occurrence matrix only sees sessions referenced by train sequences,
// so validation and test listening never leaks into spreading activation.
Dataset build_dataset(const std::vector<dataio::ListeningEvent>& raw, const RunConfig& cfg);

// The train-history session set, deduplicated across overlapping windows,
// in (user, session index) order. Exposed for leakage tests.
std::vector<const dataio::Session*> train_cooccurrence_sessions(
    const std::vector<std::vector<dataio::Session>>& sessions,
    const std::vector<dataio::SessionSequence>& sequences, const std::vector<int>& train);

}  // namespace sessionrec::data
