#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace sessionrec::dataio {

struct ListeningEvent {
  std::string user_id;
  std::string song_id;
  std::int64_t timestamp = 0;  // seconds since epoch
};

// A session is a set of songs; order inside the session is not modeled,
// but we keep first-listen order for deterministic iteration.
struct Session {
  std::vector<int> songs;  // distinct catalog indices, 1..k_max of them
  std::int64_t start_time = 0;
  std::int64_t end_time = 0;
};

// A sliding window over one user's session history: L context sessions
// plus the following session as prediction target. `offset` is the index
// of history[0] in the user's full session list.
struct SessionSequence {
  int user = 0;
  int offset = 0;
  std::vector<Session> history;
  Session target;
};

struct SongCatalog {
  std::vector<std::string> ids;        // index -> song_id, lexicographic
  std::vector<int> popularity;         // distinct users who listened
  std::vector<std::int64_t> listen_count;  // total listen events

  int size() const { return static_cast<int>(ids.size()); }
  int index_of(const std::string& id) const;  // -1 when unknown
  std::uint64_t hash() const;
};

// Catalog-indexed event, the working representation after parsing.
struct IndexedEvent {
  int user = 0;
  int song = 0;
  std::int64_t timestamp = 0;
};

struct ParseResult {
  std::vector<ListeningEvent> events;
  std::size_t malformed_lines = 0;
  std::size_t total_lines = 0;  // non-empty, non-comment lines
};

// Reads `user_id<TAB>song_id<TAB>timestamp` lines. Lines starting with
// '#' are ignored. Malformed lines are skipped and counted; inputs of at
// least 1000 lines abort when more than 1% are malformed (small fixtures
// stay parseable so the skip counting itself can be tested).
ParseResult parse_events(std::istream& in);
ParseResult parse_events_file(const std::string& path);

SongCatalog build_catalog(const std::vector<ListeningEvent>& events);

struct UserIndex {
  std::vector<std::string> ids;  // index -> user_id, lexicographic
  int size() const { return static_cast<int>(ids.size()); }
};

UserIndex build_user_index(const std::vector<ListeningEvent>& events);

// Maps events onto dense user/song indices, sorted by (user, time) with
// file order preserved for equal timestamps.
std::vector<IndexedEvent> index_events(const std::vector<ListeningEvent>& events,
                                       const UserIndex& users, const SongCatalog& catalog);

// Gap-based segmentation: a new session starts when the gap to the
// previous event is >= gap_seconds. Inside a session the first k_max
// distinct songs are kept in listen order; sessions with fewer than
// min_session_len distinct songs are dropped.
std::vector<std::vector<Session>> sessionize(const std::vector<IndexedEvent>& events, int n_users,
                                             std::int64_t gap_seconds, int k_max,
                                             int min_session_len);

// Sliding windows of L+1 consecutive sessions at offsets 0, step, 2*step, ...
// Users with fewer than min_sessions_per_user sessions are dropped entirely.
std::vector<SessionSequence> build_sequences(const std::vector<std::vector<Session>>& sessions,
                                             int L, int step, int min_sessions_per_user = 0);

struct SplitIndices {
  std::vector<int> train, val, test;  // indices into the sequence list
};

// Per user: last n_test sequences -> test, preceding n_val -> val, rest ->
// train. Users with fewer sequences contribute proportionally fewer eval
// sequences and always keep at least one train sequence.
SplitIndices split_chronological(const std::vector<SessionSequence>& sequences, int n_test,
                                 int n_val);

}  // namespace sessionrec::dataio
