#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sessionrec/dataio.hpp"

namespace sessionrec::synth {

// Controls for the synthetic listening-log generator. Songs are assigned
// to users either from taste clusters (contiguous catalog blocks) or from
// a global Zipf draw (zipf_s > 0) for popularity-skew experiments.
struct SynthParams {
  int n_users = 10;
  int n_songs = 600;
  int n_clusters = 2;
  // large enough that fresh draws never run out over n_sessions, so the
  // realized repeat rate stays near p_rep
  int pool_size = 220;
  int n_sessions = 40;     // sessions per user
  int session_len = 10;    // distinct songs per session
  double p_rep = 0.5;      // chance each song is a repeat draw
  // "last": repeats come from the previous session (highly predictable);
  // "heard": repeats come from everything heard so far
  std::string repeat_from = "heard";
  double zipf_s = 0.0;     // > 0 switches pools to global Zipf(s) draws
  std::int64_t start_time = 1600000000;
  std::int64_t session_gap = 6 * 3600;  // between session starts
  std::int64_t intra_gap = 180;         // between listens inside a session
  std::int64_t user_stagger = 3600;     // offset between users' timelines

  void set(const std::string& key, const std::string& value);
  std::map<std::string, std::string> to_map() const;
};

// Named presets: "default", "repeat-heavy" (clustered, predictable
// repeats), "skewed" (Zipf popularity, moderate repetition).
SynthParams synth_profile(const std::string& name);

std::vector<dataio::ListeningEvent> generate(const SynthParams& p, std::uint64_t seed);

void write_events_tsv(const std::string& path, const std::vector<dataio::ListeningEvent>& events);

}  // namespace sessionrec::synth
