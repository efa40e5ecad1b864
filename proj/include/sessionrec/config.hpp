#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace sessionrec {

enum class NegMode { Uniform, Popularity };

std::string to_string(NegMode m);
NegMode neg_mode_from_string(const std::string& s);

// All run tunables with their defaults. Everything can be overridden from
// a key=value config file or --set flags; validate() enforces invariants.
struct RunConfig {
  // data
  int k = 10;                    // songs kept per session / recommended
  int gap_minutes = 20;          // inactivity gap starting a new session
  int L = 20;                    // history sessions per sequence
  int step = 5;                  // sliding window stride
  int min_session_len = 2;
  int min_sessions_per_user = 0;
  int n_test = 10;
  int n_val = 5;
  std::string time_unit = "hours";  // base-level decay unit

  // model
  int d = 128;
  int B = 2;
  int H = 2;
  double alpha = 0.5;
  int top_bl_n = 20;
  bool residual = false;          // optional residual connections in blocks
  std::string embeddings_path;    // pretrained song embeddings (optional)
  // Only consulted when embeddings_path is set; scratch tables are always
  // trainable, pretrained ones frozen unless this flag opts in.
  bool trainable_embeddings = false;

  // training
  double lambda = 0.8;
  double lr = 0.001;
  int epochs = 100;
  int batch_size = 512;
  NegMode neg_mode = NegMode::Popularity;
  double neg_beta = 0.5;
  std::uint64_t seed = 1;
  int patience = 5;
  bool clamp_session_loss = false;
  // also train on the full window (prefix length L, the window target as
  // positive); off by default, where prefixes stop at L-1
  bool full_window = false;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  std::int64_t gap_seconds() const { return static_cast<std::int64_t>(gap_minutes) * 60; }
  double time_unit_seconds() const;

  void set(const std::string& key, const std::string& value);
  void validate() const;

  // sorted key=value map; the echo embedded in every artifact
  std::map<std::string, std::string> to_map() const;
  std::string to_text() const;
  static RunConfig from_map(const std::map<std::string, std::string>& kv);
};

// Parses a key=value file ('#' comments, blank lines ignored).
RunConfig load_config_file(const std::string& path, RunConfig base = {});
// Same grammar from an in-memory string (checkpoint / bundle echoes).
RunConfig parse_config_text(const std::string& text, RunConfig base = {});

}  // namespace sessionrec
