#include "sessionrec/embed.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace sessionrec::embed {

EmbeddingTable init_random(int n_songs, int d, std::uint64_t seed) {
  if (n_songs <= 0 || d <= 0) throw std::invalid_argument("init_random: bad dims");
  EmbeddingTable t;
  t.m = Mat(n_songs, d);
  t.trainable = true;
  Rng rng(seed);
  for (double& x : t.m.a) x = 0.1 * rng.next_normal();
  return t;
}

EmbeddingTable load_pretrained(const std::string& path, const dataio::SongCatalog& catalog, int d,
                               std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open embeddings file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw ConfigError("embeddings file is empty: " + path);
  std::istringstream head(line);
  long long n_file = 0;
  int d_file = 0;
  if (!(head >> n_file >> d_file)) throw ConfigError("bad embeddings header in " + path);
  if (d_file != d) {
    throw ConfigError("embedding dim mismatch: file has " + std::to_string(d_file) +
                      ", config wants " + std::to_string(d));
  }

  const int n_songs = static_cast<int>(catalog.ids.size());
  EmbeddingTable t;
  t.m = Mat(n_songs, d);
  t.trainable = false;

  std::vector<char> filled(static_cast<size_t>(n_songs), 0);
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string id;
    ls >> id;
    int row = catalog.index_of(id);
    std::vector<double> v(static_cast<size_t>(d));
    for (int j = 0; j < d; ++j) {
      if (!(ls >> v[static_cast<size_t>(j)])) {
        throw ConfigError("short embedding row at " + path + ":" + std::to_string(line_no));
      }
    }
    if (row < 0) {
      ++t.unknown_ids;
      continue;
    }
    double norm2 = 0.0;
    for (double x : v) norm2 += x * x;
    double norm = std::sqrt(norm2);
    if (norm > 10.0) {
      double s = 10.0 / norm;
      for (double& x : v) x *= s;
    }
    double* dst = t.m.row(row);
    for (int j = 0; j < d; ++j) dst[j] = v[static_cast<size_t>(j)];
    filled[static_cast<size_t>(row)] = 1;
  }

  Rng rng(seed);
  for (int i = 0; i < n_songs; ++i) {
    if (filled[static_cast<size_t>(i)]) continue;
    ++t.missing_rows;
    double* dst = t.m.row(i);
    for (int j = 0; j < d; ++j) dst[j] = 0.1 * rng.next_normal();
  }
  if (t.missing_rows > 0) {
    std::fprintf(stderr, "embeddings: %d catalog songs missing from %s, initialized randomly\n",
                 t.missing_rows, path.c_str());
  }
  return t;
}

std::vector<double> combined_weights(const actr::ActrScores& scores, const ComponentMixer& mixer) {
  size_t n = scores.bl.size();
  if (scores.spr.size() != n || scores.pm.size() != n) {
    throw std::invalid_argument("combined_weights: component size mismatch");
  }
  std::vector<double> w = mixer.weights();
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) {
    out[i] = w[0] * scores.bl[i] + w[1] * scores.spr[i] + w[2] * scores.pm[i];
  }
  return out;
}

std::vector<double> session_embedding(const dataio::Session& session, const actr::ActrScores& scores,
                                      const ComponentMixer& mixer, const EmbeddingTable& table) {
  if (session.songs.empty()) throw std::invalid_argument("session_embedding: empty session");
  if (scores.bl.size() != session.songs.size()) {
    throw std::invalid_argument("session_embedding: scores do not match session songs");
  }
  std::vector<double> w = combined_weights(scores, mixer);
  int d = table.m.cols;
  std::vector<double> out(static_cast<size_t>(d), 0.0);
  for (size_t i = 0; i < session.songs.size(); ++i) {
    int v = session.songs[i];
    if (v < 0 || v >= table.m.rows) throw std::out_of_range("session_embedding: song index");
    const double* row = table.m.row(v);
    for (int j = 0; j < d; ++j) out[static_cast<size_t>(j)] += w[i] * row[j];
  }
  return out;
}

std::vector<double> long_term_embedding(int user, std::int64_t t_ref, double alpha,
                                        const actr::ListenHistoryIndex& history,
                                        const EmbeddingTable& table, int top_n,
                                        double time_unit_seconds) {
  int d = table.m.cols;
  std::vector<double> out(static_cast<size_t>(d), 0.0);
  auto top = actr::top_bl_songs(user, t_ref, alpha, history, top_n, time_unit_seconds);
  for (const auto& e : top) {
    const double* row = table.m.row(e.song);
    for (int j = 0; j < d; ++j) out[static_cast<size_t>(j)] += e.weight * row[j];
  }
  return out;
}

}  // namespace sessionrec::embed
