#include "sessionrec/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_set>

#include "sessionrec/common.hpp"

namespace sessionrec::synth {

void SynthParams::set(const std::string& key, const std::string& value) {
  auto as_int = [&](int& dst) {
    try {
      dst = std::stoi(value);
    } catch (const std::exception&) {
      throw ConfigError("bad integer for synth." + key + ": " + value);
    }
  };
  auto as_i64 = [&](std::int64_t& dst) {
    try {
      dst = std::stoll(value);
    } catch (const std::exception&) {
      throw ConfigError("bad integer for synth." + key + ": " + value);
    }
  };
  auto as_double = [&](double& dst) {
    try {
      dst = std::stod(value);
    } catch (const std::exception&) {
      throw ConfigError("bad number for synth." + key + ": " + value);
    }
  };
  if (key == "users") {
    as_int(n_users);
  } else if (key == "songs") {
    as_int(n_songs);
  } else if (key == "clusters") {
    as_int(n_clusters);
  } else if (key == "pool") {
    as_int(pool_size);
  } else if (key == "sessions") {
    as_int(n_sessions);
  } else if (key == "session_len") {
    as_int(session_len);
  } else if (key == "p_rep") {
    as_double(p_rep);
  } else if (key == "repeat_from") {
    if (value != "last" && value != "heard") throw ConfigError("synth.repeat_from must be last or heard");
    repeat_from = value;
  } else if (key == "zipf_s") {
    as_double(zipf_s);
  } else if (key == "start_time") {
    as_i64(start_time);
  } else if (key == "session_gap") {
    as_i64(session_gap);
  } else if (key == "intra_gap") {
    as_i64(intra_gap);
  } else if (key == "user_stagger") {
    as_i64(user_stagger);
  } else {
    throw ConfigError("unknown synth key: " + key);
  }
}

std::map<std::string, std::string> SynthParams::to_map() const {
  char buf[64];
  auto fmt_d = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  std::map<std::string, std::string> m;
  m["users"] = std::to_string(n_users);
  m["songs"] = std::to_string(n_songs);
  m["clusters"] = std::to_string(n_clusters);
  m["pool"] = std::to_string(pool_size);
  m["sessions"] = std::to_string(n_sessions);
  m["session_len"] = std::to_string(session_len);
  m["p_rep"] = fmt_d(p_rep);
  m["repeat_from"] = repeat_from;
  m["zipf_s"] = fmt_d(zipf_s);
  m["start_time"] = std::to_string(start_time);
  m["session_gap"] = std::to_string(session_gap);
  m["intra_gap"] = std::to_string(intra_gap);
  m["user_stagger"] = std::to_string(user_stagger);
  return m;
}

SynthParams synth_profile(const std::string& name) {
  SynthParams p;
  if (name == "default") return p;
  if (name == "repeat-heavy") {
    // ~2 fresh songs per session keeps explored targets present through
    // session 60 (heard stays well under the pool size); many small
    // clusters keep global popularity uninformative
    p.n_users = 20;
    p.n_songs = 1500;
    p.n_clusters = 10;
    p.pool_size = 140;
    p.n_sessions = 60;
    p.session_len = 10;
    p.p_rep = 0.8;
    p.repeat_from = "last";
    return p;
  }
  if (name == "skewed") {
    p.n_users = 16;
    p.n_songs = 240;
    p.n_clusters = 1;
    p.pool_size = 50;
    p.n_sessions = 40;
    p.session_len = 8;
    p.p_rep = 0.5;
    p.repeat_from = "heard";
    p.zipf_s = 1.2;
    return p;
  }
  throw ConfigError("unknown synth profile: " + name);
}

namespace {

void validate(const SynthParams& p) {
  if (p.n_users < 1) throw ConfigError("synth.users must be >= 1");
  if (p.n_songs < 1) throw ConfigError("synth.songs must be >= 1");
  if (p.n_clusters < 1) throw ConfigError("synth.clusters must be >= 1");
  if (p.session_len < 1) throw ConfigError("synth.session_len must be >= 1");
  if (p.n_sessions < 1) throw ConfigError("synth.sessions must be >= 1");
  if (p.pool_size < p.session_len) throw ConfigError("synth.pool must be >= synth.session_len");
  if (p.pool_size > p.n_songs) throw ConfigError("synth.pool must be <= synth.songs");
  if (p.p_rep < 0.0 || p.p_rep > 1.0) throw ConfigError("synth.p_rep must be in [0, 1]");
  if (p.zipf_s < 0.0) throw ConfigError("synth.zipf_s must be >= 0");
  if (p.zipf_s == 0.0 && p.n_songs / p.n_clusters < p.pool_size)
    throw ConfigError("synth: cluster size (songs/clusters) must be >= pool");
  if (p.session_gap < p.intra_gap * p.session_len)
    throw ConfigError("synth: session_gap too small for session_len * intra_gap");
}

std::string song_id(int j) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "s%05d", j);
  return buf;
}

std::string user_id(int u) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "u%04d", u);
  return buf;
}

// Distinct draws from [lo, hi) with weight (j+1)^-s (s=0 means uniform).
std::vector<int> sample_pool(int lo, int hi, int want, double s, Rng& rng) {
  std::vector<int> out;
  out.reserve(want);
  std::unordered_set<int> taken;
  if (s <= 0.0) {
    while ((int)out.size() < want) {
      int j = lo + (int)rng.next_below((std::uint64_t)(hi - lo));
      if (taken.insert(j).second) out.push_back(j);
    }
    return out;
  }
  std::vector<double> cum((std::size_t)(hi - lo));
  double acc = 0.0;
  for (int j = lo; j < hi; ++j) {
    acc += std::pow((double)(j + 1), -s);
    cum[(std::size_t)(j - lo)] = acc;
  }
  while ((int)out.size() < want) {
    double x = rng.next_double() * acc;
    auto it = std::lower_bound(cum.begin(), cum.end(), x);
    int j = lo + (int)std::min<std::ptrdiff_t>(it - cum.begin(), (std::ptrdiff_t)cum.size() - 1);
    if (taken.insert(j).second) out.push_back(j);
  }
  return out;
}

// Uniform pick from `src` avoiding `used`; returns -1 when src is exhausted.
int pick_avoiding(const std::vector<int>& src, const std::unordered_set<int>& used, Rng& rng) {
  std::vector<int> cand;
  cand.reserve(src.size());
  for (int v : src)
    if (!used.count(v)) cand.push_back(v);
  if (cand.empty()) return -1;
  return cand[rng.next_below(cand.size())];
}

}  // namespace

std::vector<dataio::ListeningEvent> generate(const SynthParams& p, std::uint64_t seed) {
  validate(p);
  std::vector<dataio::ListeningEvent> events;
  events.reserve((std::size_t)p.n_users * p.n_sessions * p.session_len);
  const int cluster_span = p.n_songs / p.n_clusters;
  for (int u = 0; u < p.n_users; ++u) {
    Rng rng = Rng::substream(seed, 11, (std::uint64_t)u);
    int lo = 0, hi = p.n_songs;
    if (p.zipf_s <= 0.0) {
      const int c = u % p.n_clusters;
      lo = c * cluster_span;
      hi = (c + 1 == p.n_clusters) ? p.n_songs : lo + cluster_span;
    }
    std::vector<int> pool = sample_pool(lo, hi, p.pool_size, p.zipf_s, rng);
    std::vector<int> heard_vec, prev;
    std::unordered_set<int> heard;
    const std::string uid = user_id(u);
    const std::int64_t user_start = p.start_time + (std::int64_t)u * p.user_stagger;
    for (int si = 0; si < p.n_sessions; ++si) {
      std::vector<int> cur;
      std::unordered_set<int> in_session;
      const std::vector<int>& rep_src = (p.repeat_from == "last" && !prev.empty()) ? prev : heard_vec;
      while ((int)cur.size() < p.session_len) {
        int v = -1;
        const bool want_repeat = !heard_vec.empty() && rng.next_double() < p.p_rep;
        if (want_repeat) v = pick_avoiding(rep_src, in_session, rng);
        if (v < 0) {
          // fresh draw from the unheard part of the pool
          std::vector<int> fresh;
          for (int s : pool)
            if (!heard.count(s) && !in_session.count(s)) fresh.push_back(s);
          if (!fresh.empty()) v = fresh[rng.next_below(fresh.size())];
        }
        if (v < 0) v = pick_avoiding(heard_vec, in_session, rng);
        if (v < 0) v = pick_avoiding(pool, in_session, rng);
        if (v < 0) throw DataError("synth: could not fill session (pool too small?)");
        cur.push_back(v);
        in_session.insert(v);
      }
      const std::int64_t s_start = user_start + (std::int64_t)si * p.session_gap;
      for (int j = 0; j < (int)cur.size(); ++j) {
        events.push_back({uid, song_id(cur[j]), s_start + (std::int64_t)j * p.intra_gap});
        if (heard.insert(cur[j]).second) heard_vec.push_back(cur[j]);
      }
      prev = cur;
    }
  }
  return events;
}

void write_events_tsv(const std::string& path, const std::vector<dataio::ListeningEvent>& events) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& e : events)
    out << e.user_id << '\t' << e.song_id << '\t' << e.timestamp << '\n';
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace sessionrec::synth
