#pragma once

#include <string>
#include <vector>

#include "sessionrec/actr.hpp"
#include "sessionrec/common.hpp"
#include "sessionrec/dataio.hpp"
#include "sessionrec/linalg.hpp"

namespace sessionrec::embed {

struct EmbeddingTable {
  Mat m;  // |V| x d
  bool trainable = true;
  int missing_rows = 0;   // catalog songs absent from a pretrained file
  int unknown_ids = 0;    // file rows whose song_id is not in the catalog
};

// Three trainable logits; softmax gives the global component weights
// (w_bl, w_spr, w_pm) shared across users.
struct ComponentMixer {
  Mat logits{3, 1};

  std::vector<double> weights() const {
    return actr::softmax({logits.at(0, 0), logits.at(1, 0), logits.at(2, 0)});
  }
};

EmbeddingTable init_random(int n_songs, int d, std::uint64_t seed);

// File format: first line `n d`, then `song_id v_1 ... v_d` per line.
// Rows with norm > 10 are rescaled to norm 10. Catalog songs missing from
// the file get N(0, 0.1^2) rows drawn from `seed`; unknown ids are counted
// and ignored. Loaded tables are frozen by default.
EmbeddingTable load_pretrained(const std::string& path, const dataio::SongCatalog& catalog, int d,
                               std::uint64_t seed);

// Per-song attention weights w_v = w_bl*bl + w_spr*spr + w_pm*pm; they are
// a convex combination, so they sum to one across the session.
std::vector<double> combined_weights(const actr::ActrScores& scores, const ComponentMixer& mixer);

// m_s = sum_v w_v m_v. Scores must carry one entry per session song.
std::vector<double> session_embedding(const dataio::Session& session, const actr::ActrScores& scores,
                                      const ComponentMixer& mixer, const EmbeddingTable& table);

// Weighted average of the user's top base-level songs at t_ref; the zero
// vector for users without history (fusion then leans on short-term).
std::vector<double> long_term_embedding(int user, std::int64_t t_ref, double alpha,
                                        const actr::ListenHistoryIndex& history,
                                        const EmbeddingTable& table, int top_n = 20,
                                        double time_unit_seconds = 3600.0);

}  // namespace sessionrec::embed
