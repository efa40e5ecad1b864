#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "sessionrec/dataio.hpp"
#include "sessionrec/linalg.hpp"

namespace sessionrec::actr {

// Per (user, song) sorted listen timestamps, built from the raw event
// log (duplicate listens matter for base-level activation even when the
// session set representation collapses them).
class ListenHistoryIndex {
 public:
  ListenHistoryIndex() = default;
  ListenHistoryIndex(const std::vector<dataio::IndexedEvent>& events, int n_users);

  // listens of (user, song) strictly before t_ref
  int count_before(int user, int song, std::int64_t t_ref) const;
  const std::vector<std::int64_t>* timestamps(int user, int song) const;
  // songs with at least one listen strictly before t_ref, ascending index
  std::vector<int> songs_before(int user, std::int64_t t_ref) const;
  // total listens of (user, song) strictly before t_ref
  std::int64_t listen_count_before(int user, int song, std::int64_t t_ref) const;

  int n_users() const { return static_cast<int>(by_user_.size()); }

 private:
  // per user: (song, sorted distinct timestamps), sorted by song index
  std::vector<std::vector<std::pair<int, std::vector<std::int64_t>>>> by_user_;
};

// Sparse symmetric co-listen counts F plus the normalized correlation
// C = D^(-1/2) F D^(-1/2) with D_ii = sum_j F_ij. Rows with zero degree
// stay zero. Built from training sessions only.
class CooccurrenceStats {
 public:
  CooccurrenceStats() = default;
  explicit CooccurrenceStats(int n_songs) : n_songs_(n_songs), degree_(n_songs, 0), rows_(n_songs) {}

  int n_songs() const { return n_songs_; }
  std::int64_t f(int i, int j) const;
  double degree(int i) const { return degree_[i]; }
  double c(int i, int j) const;
  // neighbors of i with C_ij > 0, ascending j
  const std::vector<std::pair<int, double>>& row(int i) const { return rows_[i]; }

  void dump_c(std::ostream& out) const;  // `i j value` triplets, i < j

 private:
  friend CooccurrenceStats build_cooccurrence(const std::vector<const dataio::Session*>&, int);
  friend CooccurrenceStats build_cooccurrence_serial(const std::vector<const dataio::Session*>&,
                                                     int);
  void finalize(const std::unordered_map<std::uint64_t, std::int64_t>& pair_counts);

  int n_songs_ = 0;
  std::unordered_map<std::uint64_t, std::int64_t> f_;         // key i*N+j, i<j
  std::vector<double> degree_;                                // D_ii = sum_j F_ij
  std::vector<std::vector<std::pair<int, double>>> rows_;     // C rows, sparse
};

// n_songs < 0 sizes the matrix by the largest index seen; pass the catalog
// size to keep lookups valid for songs that never co-occur in training.
CooccurrenceStats build_cooccurrence_serial(const std::vector<const dataio::Session*>& train_sessions,
                                            int n_songs = -1);
// Parallel partial counts merged in fixed chunk order; counts are integers
// so the result is identical to the serial build.
CooccurrenceStats build_cooccurrence(const std::vector<const dataio::Session*>& train_sessions,
                                     int n_songs = -1);

// softmax(x), numerically stabilized
std::vector<double> softmax(const std::vector<double>& x);

// sum_k ((t_ref - t_k) / time_unit_seconds)^(-alpha) over listens of
// `song` by `user` strictly before t_ref. Zero when there are none.
double base_level_raw(int user, int song, std::int64_t t_ref, double alpha,
                      const ListenHistoryIndex& history, double time_unit_seconds = 3600.0);

std::vector<double> base_level_raw_session(const dataio::Session& session, int user,
                                           std::int64_t t_ref, double alpha,
                                           const ListenHistoryIndex& history,
                                           double time_unit_seconds = 3600.0);

// softmax of raw base-level values across the session's songs
std::vector<double> base_level_session(const dataio::Session& session, int user, std::int64_t t_ref,
                                       double alpha, const ListenHistoryIndex& history,
                                       double time_unit_seconds = 3600.0);

std::vector<double> spreading_raw(const dataio::Session& session, const CooccurrenceStats& stats);
// raw spreading, softmax-normalized within the session
std::vector<double> spreading(const dataio::Session& session, const CooccurrenceStats& stats);

std::vector<double> partial_matching_raw(const dataio::Session& session, const Mat& song_embeddings);
std::vector<double> partial_matching(const dataio::Session& session, const Mat& song_embeddings);

// Per-song component values for one session at one reference time.
// Each component sums to 1 across the session.
struct ActrScores {
  std::vector<double> bl;
  std::vector<double> spr;
  std::vector<double> pm;
  std::int64_t reference_time = 0;
};

struct TopBlEntry {
  int song = 0;
  double weight = 0.0;  // softmax-normalized over the selected set
};

// The n prior songs with the highest raw base-level activation at t_ref;
// all of them when the user has fewer. Empty when the user has no history.
std::vector<TopBlEntry> top_bl_songs(int user, std::int64_t t_ref, double alpha,
                                     const ListenHistoryIndex& history, int n = 20,
                                     double time_unit_seconds = 3600.0);

}  // namespace sessionrec::actr
