#include "sessionrec/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "sessionrec/common.hpp"

namespace sessionrec::dataio {

int SongCatalog::index_of(const std::string& id) const {
  auto it = std::lower_bound(ids.begin(), ids.end(), id);
  if (it == ids.end() || *it != id) return -1;
  return static_cast<int>(it - ids.begin());
}

std::uint64_t SongCatalog::hash() const {
  std::uint64_t h = fnv1a64(nullptr, 0);
  for (const auto& id : ids) {
    h = fnv1a64(id.data(), id.size(), h);
    h = fnv1a64("\n", 1, h);
  }
  return h;
}

namespace {

bool parse_i64(std::string_view s, std::int64_t& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

}  // namespace

ParseResult parse_events(std::istream& in) {
  ParseResult res;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    res.total_lines++;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    bool ok = t1 != std::string::npos && t2 != std::string::npos && line.find('\t', t2 + 1) == std::string::npos;
    std::int64_t ts = 0;
    if (ok) {
      ok = t1 > 0 && t2 > t1 + 1 && t2 + 1 < line.size();
    }
    if (ok) {
      ok = parse_i64(std::string_view(line).substr(t2 + 1), ts) && ts >= 0;
    }
    if (!ok) {
      res.malformed_lines++;
      continue;
    }
    res.events.push_back({line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1), ts});
  }
  if (in.bad()) throw DataError("I/O error while reading events");
  if (res.total_lines >= 1000 &&
      static_cast<double>(res.malformed_lines) > 0.01 * static_cast<double>(res.total_lines)) {
    throw DataError("more than 1% of event lines are malformed (" +
                    std::to_string(res.malformed_lines) + "/" + std::to_string(res.total_lines) + ")");
  }
  return res;
}

ParseResult parse_events_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open events file: " + path);
  return parse_events(f);
}

SongCatalog build_catalog(const std::vector<ListeningEvent>& events) {
  if (events.empty()) throw std::invalid_argument("build_catalog: no events");
  std::map<std::string, std::pair<std::set<std::string>, std::int64_t>> by_song;
  for (const auto& e : events) {
    auto& entry = by_song[e.song_id];
    entry.first.insert(e.user_id);
    entry.second++;
  }
  SongCatalog cat;
  cat.ids.reserve(by_song.size());
  for (auto& [id, entry] : by_song) {
    cat.ids.push_back(id);
    cat.popularity.push_back(static_cast<int>(entry.first.size()));
    cat.listen_count.push_back(entry.second);
  }
  return cat;
}

UserIndex build_user_index(const std::vector<ListeningEvent>& events) {
  std::set<std::string> ids;
  for (const auto& e : events) ids.insert(e.user_id);
  UserIndex idx;
  idx.ids.assign(ids.begin(), ids.end());
  return idx;
}

std::vector<IndexedEvent> index_events(const std::vector<ListeningEvent>& events,
                                       const UserIndex& users, const SongCatalog& catalog) {
  std::unordered_map<std::string, int> umap;
  umap.reserve(users.ids.size());
  for (int i = 0; i < users.size(); ++i) umap[users.ids[i]] = i;
  std::vector<IndexedEvent> out;
  out.reserve(events.size());
  for (const auto& e : events) {
    const int u = umap.at(e.user_id);
    const int s = catalog.index_of(e.song_id);
    if (s < 0) throw DataError("event references song missing from catalog: " + e.song_id);
    out.push_back({u, s, e.timestamp});
  }
  std::stable_sort(out.begin(), out.end(), [](const IndexedEvent& a, const IndexedEvent& b) {
    if (a.user != b.user) return a.user < b.user;
    return a.timestamp < b.timestamp;
  });
  return out;
}

std::vector<std::vector<Session>> sessionize(const std::vector<IndexedEvent>& events, int n_users,
                                             std::int64_t gap_seconds, int k_max,
                                             int min_session_len) {
  if (gap_seconds <= 0) throw std::invalid_argument("sessionize: gap_seconds must be positive");
  if (k_max < 1) throw std::invalid_argument("sessionize: k_max must be >= 1");
  if (min_session_len < 1) min_session_len = 1;

  std::vector<std::vector<Session>> out(n_users);
  std::size_t i = 0;
  while (i < events.size()) {
    const int user = events[i].user;
    std::size_t j = i;
    while (j < events.size() && events[j].user == user) ++j;

    std::size_t burst_begin = i;
    auto flush = [&](std::size_t begin, std::size_t end) {
      Session s;
      s.start_time = events[begin].timestamp;
      s.end_time = events[end - 1].timestamp;
      std::unordered_set<int> seen;
      for (std::size_t p = begin; p < end; ++p) {
        const int song = events[p].song;
        if (static_cast<int>(s.songs.size()) >= k_max) break;
        if (seen.insert(song).second) s.songs.push_back(song);
      }
      if (static_cast<int>(s.songs.size()) >= min_session_len) out[user].push_back(std::move(s));
    };

    for (std::size_t p = i + 1; p < j; ++p) {
      if (events[p].timestamp - events[p - 1].timestamp >= gap_seconds) {
        flush(burst_begin, p);
        burst_begin = p;
      }
    }
    flush(burst_begin, j);
    i = j;
  }
  return out;
}

std::vector<SessionSequence> build_sequences(const std::vector<std::vector<Session>>& sessions,
                                             int L, int step, int min_sessions_per_user) {
  if (L < 1) throw std::invalid_argument("build_sequences: L must be >= 1");
  if (step < 1) throw std::invalid_argument("build_sequences: step must be >= 1");
  std::vector<SessionSequence> out;
  for (int u = 0; u < static_cast<int>(sessions.size()); ++u) {
    const auto& ss = sessions[u];
    const int n = static_cast<int>(ss.size());
    if (n < min_sessions_per_user) continue;
    for (int offset = 0; offset + L + 1 <= n; offset += step) {
      SessionSequence seq;
      seq.user = u;
      seq.offset = offset;
      seq.history.assign(ss.begin() + offset, ss.begin() + offset + L);
      seq.target = ss[offset + L];
      out.push_back(std::move(seq));
    }
  }
  return out;
}

SplitIndices split_chronological(const std::vector<SessionSequence>& sequences, int n_test,
                                 int n_val) {
  if (n_test < 0 || n_val < 0) throw std::invalid_argument("split: negative split sizes");
  // group sequence indices per user; build_sequences emits them in
  // chronological (offset) order already
  std::map<int, std::vector<int>> by_user;
  for (int i = 0; i < static_cast<int>(sequences.size()); ++i) by_user[sequences[i].user].push_back(i);

  SplitIndices split;
  for (auto& [user, idxs] : by_user) {
    (void)user;
    const int n = static_cast<int>(idxs.size());
    int t = 0, v = 0;
    if (n >= n_test + n_val + 1) {
      t = n_test;
      v = n_val;
    } else if (n >= 2) {
      const int avail = n - 1;  // train floor of one sequence
      t = (avail * n_test) / std::max(1, n_test + n_val);
      if (t < 1 && n_test > 0) t = 1;
      t = std::min(t, n_test);
      v = std::min(n_val, avail - t);
    }
    const int tr = n - t - v;
    for (int i = 0; i < tr; ++i) split.train.push_back(idxs[i]);
    for (int i = tr; i < tr + v; ++i) split.val.push_back(idxs[i]);
    for (int i = tr + v; i < n; ++i) split.test.push_back(idxs[i]);
  }
  return split;
}

}  // namespace sessionrec::dataio
