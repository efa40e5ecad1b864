#include "sessionrec/dataset.hpp"

#include <algorithm>
#include <set>

#include "sessionrec/common.hpp"

namespace sessionrec::data {

std::vector<const dataio::Session*> train_cooccurrence_sessions(
    const std::vector<std::vector<dataio::Session>>& sessions,
    const std::vector<dataio::SessionSequence>& sequences, const std::vector<int>& train) {
  std::set<std::pair<int, int>> seen;
  for (int si : train) {
    const dataio::SessionSequence& seq = sequences[static_cast<size_t>(si)];
    for (size_t j = 0; j < seq.history.size(); ++j) {
      seen.emplace(seq.user, seq.offset + static_cast<int>(j));
    }
  }
  std::vector<const dataio::Session*> out;
  out.reserve(seen.size());
  for (const auto& [user, idx] : seen) {
    out.push_back(&sessions[static_cast<size_t>(user)][static_cast<size_t>(idx)]);
  }
  return out;
}

Dataset build_dataset(const std::vector<dataio::ListeningEvent>& raw, const RunConfig& cfg) {
  Dataset ds;
  ds.catalog = dataio::build_catalog(raw);
  ds.users = dataio::build_user_index(raw);
  ds.events = dataio::index_events(raw, ds.users, ds.catalog);
  ds.sessions = dataio::sessionize(ds.events, ds.users.size(), cfg.gap_seconds(), cfg.k,
                                   cfg.min_session_len);
  ds.sequences = dataio::build_sequences(ds.sessions, cfg.L, cfg.step, cfg.min_sessions_per_user);
  if (ds.sequences.empty()) throw DataError("no session windows; not enough sessions per user");
  ds.splits = dataio::split_chronological(ds.sequences, cfg.n_test, cfg.n_val);
  ds.history = actr::ListenHistoryIndex(ds.events, ds.users.size());
  auto train_sessions = train_cooccurrence_sessions(ds.sessions, ds.sequences, ds.splits.train);
  ds.cooc = actr::build_cooccurrence(train_sessions, ds.catalog.size());
  return ds;
}

}  // namespace sessionrec::data
