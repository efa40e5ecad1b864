#include "sessionrec/actr.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <stdexcept>

namespace sessionrec::actr {

ListenHistoryIndex::ListenHistoryIndex(const std::vector<dataio::IndexedEvent>& events, int n_users)
    : by_user_(n_users) {
  std::vector<std::map<int, std::vector<std::int64_t>>> tmp(n_users);
  for (const auto& e : events) tmp[e.user][e.song].push_back(e.timestamp);
  for (int u = 0; u < n_users; ++u) {
    by_user_[u].reserve(tmp[u].size());
    for (auto& [song, ts] : tmp[u]) {
      std::sort(ts.begin(), ts.end());
      ts.erase(std::unique(ts.begin(), ts.end()), ts.end());  // logging artifacts
      by_user_[u].emplace_back(song, std::move(ts));
    }
  }
}

const std::vector<std::int64_t>* ListenHistoryIndex::timestamps(int user, int song) const {
  const auto& v = by_user_[user];
  auto it = std::lower_bound(v.begin(), v.end(), song,
                             [](const auto& p, int s) { return p.first < s; });
  if (it == v.end() || it->first != song) return nullptr;
  return &it->second;
}

int ListenHistoryIndex::count_before(int user, int song, std::int64_t t_ref) const {
  const auto* ts = timestamps(user, song);
  if (!ts) return 0;
  return static_cast<int>(std::lower_bound(ts->begin(), ts->end(), t_ref) - ts->begin());
}

std::int64_t ListenHistoryIndex::listen_count_before(int user, int song, std::int64_t t_ref) const {
  return count_before(user, song, t_ref);
}

std::vector<int> ListenHistoryIndex::songs_before(int user, std::int64_t t_ref) const {
  std::vector<int> out;
  for (const auto& [song, ts] : by_user_[user]) {
    if (!ts.empty() && ts.front() < t_ref) out.push_back(song);
  }
  return out;
}

namespace {

inline std::uint64_t pair_key(int i, int j, int n) {
  return static_cast<std::uint64_t>(i) * static_cast<std::uint64_t>(n) + static_cast<std::uint64_t>(j);
}

void count_session_pairs(const dataio::Session& s, int n,
                         std::unordered_map<std::uint64_t, std::int64_t>& counts) {
  const auto& songs = s.songs;
  for (std::size_t a = 0; a < songs.size(); ++a) {
    for (std::size_t b = a + 1; b < songs.size(); ++b) {
      int i = songs[a], j = songs[b];
      if (i == j) continue;
      if (i > j) std::swap(i, j);
      counts[pair_key(i, j, n)]++;
    }
  }
}

}  // namespace

void CooccurrenceStats::finalize(const std::unordered_map<std::uint64_t, std::int64_t>& pair_counts) {
  f_ = pair_counts;
  std::fill(degree_.begin(), degree_.end(), 0.0);
  for (const auto& [key, cnt] : f_) {
    const int i = static_cast<int>(key / n_songs_);
    const int j = static_cast<int>(key % n_songs_);
    degree_[i] += static_cast<double>(cnt);
    degree_[j] += static_cast<double>(cnt);
  }
  for (auto& r : rows_) r.clear();
  for (const auto& [key, cnt] : f_) {
    const int i = static_cast<int>(key / n_songs_);
    const int j = static_cast<int>(key % n_songs_);
    const double c = static_cast<double>(cnt) / std::sqrt(degree_[i] * degree_[j]);
    rows_[i].emplace_back(j, c);
    rows_[j].emplace_back(i, c);
  }
  for (auto& r : rows_) std::sort(r.begin(), r.end());
}

std::int64_t CooccurrenceStats::f(int i, int j) const {
  if (i == j) return 0;
  if (i > j) std::swap(i, j);
  auto it = f_.find(pair_key(i, j, n_songs_));
  return it == f_.end() ? 0 : it->second;
}

double CooccurrenceStats::c(int i, int j) const {
  if (i == j) return 0.0;
  const auto& r = rows_[i];
  auto it = std::lower_bound(r.begin(), r.end(), j,
                             [](const auto& p, int s) { return p.first < s; });
  if (it == r.end() || it->first != j) return 0.0;
  return it->second;
}

void CooccurrenceStats::dump_c(std::ostream& out) const {
  char buf[64];
  for (int i = 0; i < n_songs_; ++i) {
    for (const auto& [j, c] : rows_[i]) {
      if (j <= i) continue;
      std::snprintf(buf, sizeof(buf), "%d %d %.6f\n", i, j, c);
      out << buf;
    }
  }
}

CooccurrenceStats build_cooccurrence_serial(const std::vector<const dataio::Session*>& train_sessions,
                                            int n_songs) {
  int n = std::max(n_songs, 0);
  for (const auto* s : train_sessions)
    for (int song : s->songs) n = std::max(n, song + 1);
  CooccurrenceStats stats(n);
  std::unordered_map<std::uint64_t, std::int64_t> counts;
  for (const auto* s : train_sessions) count_session_pairs(*s, n, counts);
  stats.finalize(counts);
  return stats;
}

CooccurrenceStats build_cooccurrence(const std::vector<const dataio::Session*>& train_sessions,
                                     int n_songs) {
  int n = std::max(n_songs, 0);
  for (const auto* s : train_sessions)
    for (int song : s->songs) n = std::max(n, song + 1);
  CooccurrenceStats stats(n);

  const std::size_t chunk = 2048;
  const std::size_t n_chunks = (train_sessions.size() + chunk - 1) / chunk;
  std::vector<std::unordered_map<std::uint64_t, std::int64_t>> partials(n_chunks);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t c = 0; c < n_chunks; ++c) {
    const std::size_t lo = c * chunk;
    const std::size_t hi = std::min(lo + chunk, train_sessions.size());
    for (std::size_t i = lo; i < hi; ++i) count_session_pairs(*train_sessions[i], n, partials[c]);
  }
  // integer count merge is commutative, chunk order kept for clarity
  std::unordered_map<std::uint64_t, std::int64_t> counts;
  for (const auto& p : partials)
    for (const auto& [k, v] : p) counts[k] += v;
  stats.finalize(counts);
  return stats;
}

std::vector<double> softmax(const std::vector<double>& x) {
  std::vector<double> out(x.size());
  if (x.empty()) return out;
  const double mx = *std::max_element(x.begin(), x.end());
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - mx);
    z += out[i];
  }
  for (auto& v : out) v /= z;
  return out;
}

double base_level_raw(int user, int song, std::int64_t t_ref, double alpha,
                      const ListenHistoryIndex& history, double time_unit_seconds) {
  if (alpha <= 0.0) throw std::invalid_argument("base_level_raw: alpha must be positive");
  const auto* ts = history.timestamps(user, song);
  if (!ts) return 0.0;
  double acc = 0.0;
  for (std::int64_t t : *ts) {
    if (t >= t_ref) break;
    const double dt = static_cast<double>(t_ref - t) / time_unit_seconds;
    acc += std::pow(dt, -alpha);
  }
  return acc;
}

std::vector<double> base_level_raw_session(const dataio::Session& session, int user,
                                           std::int64_t t_ref, double alpha,
                                           const ListenHistoryIndex& history,
                                           double time_unit_seconds) {
  std::vector<double> raw(session.songs.size());
  for (std::size_t i = 0; i < session.songs.size(); ++i)
    raw[i] = base_level_raw(user, session.songs[i], t_ref, alpha, history, time_unit_seconds);
  return raw;
}

std::vector<double> base_level_session(const dataio::Session& session, int user, std::int64_t t_ref,
                                       double alpha, const ListenHistoryIndex& history,
                                       double time_unit_seconds) {
  if (session.songs.empty()) throw std::invalid_argument("base_level_session: empty session");
  return softmax(base_level_raw_session(session, user, t_ref, alpha, history, time_unit_seconds));
}

std::vector<double> spreading_raw(const dataio::Session& session, const CooccurrenceStats& stats) {
  const auto& songs = session.songs;
  std::vector<double> raw(songs.size(), 0.0);
  for (std::size_t a = 0; a < songs.size(); ++a) {
    for (std::size_t b = 0; b < songs.size(); ++b) {
      if (a == b) continue;
      if (songs[a] < stats.n_songs() && songs[b] < stats.n_songs())
        raw[a] += stats.c(songs[a], songs[b]);
    }
  }
  return raw;
}

std::vector<double> spreading(const dataio::Session& session, const CooccurrenceStats& stats) {
  if (session.songs.empty()) throw std::invalid_argument("spreading: empty session");
  return softmax(spreading_raw(session, stats));
}

std::vector<double> partial_matching_raw(const dataio::Session& session, const Mat& song_embeddings) {
  const auto& songs = session.songs;
  const int d = song_embeddings.cols;
  std::vector<double> sum(d, 0.0);
  for (int s : songs) {
    const double* r = song_embeddings.row(s);
    for (int k = 0; k < d; ++k) sum[k] += r[k];
  }
  std::vector<double> raw(songs.size());
  for (std::size_t i = 0; i < songs.size(); ++i) {
    const double* r = song_embeddings.row(songs[i]);
    double self = 0.0, tot = 0.0;
    for (int k = 0; k < d; ++k) {
      tot += r[k] * sum[k];
      self += r[k] * r[k];
    }
    raw[i] = tot - self;  // dot with every other song in the session
  }
  return raw;
}

std::vector<double> partial_matching(const dataio::Session& session, const Mat& song_embeddings) {
  if (session.songs.empty()) throw std::invalid_argument("partial_matching: empty session");
  return softmax(partial_matching_raw(session, song_embeddings));
}

std::vector<TopBlEntry> top_bl_songs(int user, std::int64_t t_ref, double alpha,
                                     const ListenHistoryIndex& history, int n,
                                     double time_unit_seconds) {
  const std::vector<int> candidates = history.songs_before(user, t_ref);
  if (candidates.empty()) return {};
  std::vector<std::pair<double, int>> scored;
  scored.reserve(candidates.size());
  for (int song : candidates)
    scored.emplace_back(base_level_raw(user, song, t_ref, alpha, history, time_unit_seconds), song);
  // highest raw BL first, ties by ascending song index
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  const int keep = std::min<int>(n, static_cast<int>(scored.size()));
  std::vector<double> raw(keep);
  for (int i = 0; i < keep; ++i) raw[i] = scored[i].first;
  const std::vector<double> w = softmax(raw);
  std::vector<TopBlEntry> out(keep);
  for (int i = 0; i < keep; ++i) out[i] = {scored[i].second, w[i]};
  return out;
}

}  // namespace sessionrec::actr
