#include "sessionrec/recsys.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

namespace sessionrec::rec {

std::vector<double> score_all(const std::vector<double>& user_embedding, const Mat& table) {
  if (static_cast<int>(user_embedding.size()) != table.cols) {
    throw std::invalid_argument("score_all: dim mismatch");
  }
  return linalg::score_all(table, user_embedding);
}

RecommendationList top_k(const std::vector<double>& scores, int k) {
  int n = static_cast<int>(scores.size());
  if (k <= 0) throw std::invalid_argument("top_k: k must be positive");
  if (n < k) throw std::invalid_argument("top_k: fewer songs than k");
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  auto better = [&](int a, int b) {
    if (scores[static_cast<size_t>(a)] != scores[static_cast<size_t>(b)]) {
      return scores[static_cast<size_t>(a)] > scores[static_cast<size_t>(b)];
    }
    return a < b;
  };
  std::partial_sort(order.begin(), order.begin() + k, order.end(), better);
  RecommendationList out;
  out.songs.assign(order.begin(), order.begin() + k);
  out.scores.reserve(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) out.scores.push_back(scores[static_cast<size_t>(out.songs[static_cast<size_t>(i)])]);
  return out;
}

RecommendationList recommend(const ad::ParamStore& params, const dataio::SessionSequence& seq,
                             const actr::ListenHistoryIndex& history,
                             const actr::CooccurrenceStats& cooc, const RunConfig& cfg, int k) {
  int l = static_cast<int>(seq.history.size());
  if (l == 0) throw std::invalid_argument("recommend: empty history");
  if (l > cfg.L) throw std::invalid_argument("recommend: history longer than L");
  model::PrefixInputs in = model::build_prefix_inputs(seq, l, history, cooc, cfg, false);
  std::vector<double> mu = model::user_embedding(params, in, cfg);
  RecommendationList out = top_k(score_all(mu, params.at("song_table")), k);
  out.user = seq.user;
  return out;
}

BaselineKind baseline_from_string(const std::string& s) {
  if (s == "g-top" || s == "gtop") return BaselineKind::GTop;
  if (s == "p-top" || s == "ptop") return BaselineKind::PTop;
  if (s == "actr-repeat" || s == "actr_repeat") return BaselineKind::ActrRepeat;
  if (s == "oracle") return BaselineKind::Oracle;
  throw ConfigError("unknown baseline: " + s +
                    " (expected g-top, p-top, actr-repeat or oracle)");
}

std::string to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::GTop: return "g-top";
    case BaselineKind::PTop: return "p-top";
    case BaselineKind::ActrRepeat: return "actr-repeat";
    case BaselineKind::Oracle: return "oracle";
  }
  return "?";
}

BaselineContext::BaselineContext(const dataio::SongCatalog& cat,
                                 const actr::ListenHistoryIndex& hist,
                                 const actr::CooccurrenceStats& co, const RunConfig& cfg)
    : catalog(&cat), history(&hist), cooc(&co), alpha(cfg.alpha),
      time_unit_seconds(cfg.time_unit_seconds()) {
  gtop_order.resize(static_cast<size_t>(cat.size()));
  std::iota(gtop_order.begin(), gtop_order.end(), 0);
  std::stable_sort(gtop_order.begin(), gtop_order.end(), [&](int a, int b) {
    return cat.listen_count[static_cast<size_t>(a)] > cat.listen_count[static_cast<size_t>(b)];
  });
}

namespace {

// fill up to k songs from the global ranking, skipping ones already listed
void pad_with_gtop(RecommendationList& out, const BaselineContext& ctx, int k) {
  std::unordered_set<int> present(out.songs.begin(), out.songs.end());
  double floor_score = out.scores.empty() ? 0.0 : out.scores.back();
  for (int v : ctx.gtop_order) {
    if (static_cast<int>(out.songs.size()) >= k) break;
    if (present.count(v)) continue;
    out.songs.push_back(v);
    floor_score -= 1.0;
    out.scores.push_back(floor_score);
  }
  if (static_cast<int>(out.songs.size()) < k) {
    throw std::invalid_argument("baseline_recommend: catalog smaller than k");
  }
}

// rank candidate (song, score) pairs descending, tie on ascending index
RecommendationList ranked_head(std::vector<std::pair<int, double>> cand, int k) {
  std::sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  RecommendationList out;
  int take = std::min<int>(k, static_cast<int>(cand.size()));
  for (int i = 0; i < take; ++i) {
    out.songs.push_back(cand[static_cast<size_t>(i)].first);
    out.scores.push_back(cand[static_cast<size_t>(i)].second);
  }
  return out;
}

}  // namespace

RecommendationList baseline_recommend(BaselineKind kind, const BaselineContext& ctx,
                                      const dataio::SessionSequence& seq, int k,
                                      std::int64_t t_ref) {
  const dataio::SongCatalog& cat = *ctx.catalog;
  RecommendationList out;
  switch (kind) {
    case BaselineKind::GTop: {
      std::vector<double> scores(static_cast<size_t>(cat.size()));
      for (int v = 0; v < cat.size(); ++v) {
        scores[static_cast<size_t>(v)] = static_cast<double>(cat.listen_count[static_cast<size_t>(v)]);
      }
      out = top_k(scores, k);
      break;
    }
    case BaselineKind::PTop: {
      std::vector<int> heard = ctx.history->songs_before(seq.user, t_ref);
      std::vector<std::pair<int, double>> cand;
      cand.reserve(heard.size());
      for (int v : heard) {
        cand.emplace_back(v, static_cast<double>(ctx.history->listen_count_before(seq.user, v, t_ref)));
      }
      out = ranked_head(std::move(cand), k);
      pad_with_gtop(out, ctx, k);
      break;
    }
    case BaselineKind::ActrRepeat: {
      std::vector<int> heard = ctx.history->songs_before(seq.user, t_ref);
      std::vector<double> bl_raw(heard.size());
      std::vector<double> spr_raw(heard.size(), 0.0);
      const std::vector<int>* context = nullptr;
      if (!seq.history.empty()) context = &seq.history.back().songs;
      for (size_t i = 0; i < heard.size(); ++i) {
        bl_raw[i] = actr::base_level_raw(seq.user, heard[i], t_ref, ctx.alpha, *ctx.history,
                                         ctx.time_unit_seconds);
        if (context) {
          for (int v : *context) {
            if (v != heard[i]) spr_raw[i] += ctx.cooc->c(heard[i], v);
          }
        }
      }
      std::vector<std::pair<int, double>> cand;
      if (!heard.empty()) {
        std::vector<double> bl = actr::softmax(bl_raw);
        std::vector<double> spr = actr::softmax(spr_raw);
        for (size_t i = 0; i < heard.size(); ++i) cand.emplace_back(heard[i], bl[i] + spr[i]);
      }
      out = ranked_head(std::move(cand), k);
      pad_with_gtop(out, ctx, k);
      break;
    }
    case BaselineKind::Oracle: {
      for (size_t i = 0; i < seq.target.songs.size() && static_cast<int>(i) < k; ++i) {
        out.songs.push_back(seq.target.songs[i]);
        out.scores.push_back(static_cast<double>(k) - static_cast<double>(i));
      }
      pad_with_gtop(out, ctx, k);
      break;
    }
  }
  out.user = seq.user;
  return out;
}

}  // namespace sessionrec::rec
