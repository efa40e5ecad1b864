#include "sessionrec/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace sessionrec::eval {

double recall_at_k(const std::vector<int>& recommended, const std::unordered_set<int>& truth) {
  if (truth.empty()) throw std::invalid_argument("recall_at_k: empty truth");
  int hits = 0;
  for (int v : recommended) {
    if (truth.count(v)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double ndcg_at_k(const std::vector<int>& recommended, const std::unordered_set<int>& relevant,
                 std::size_t ideal_n) {
  if (relevant.empty()) throw std::invalid_argument("ndcg_at_k: empty relevance set");
  double dcg = 0.0;
  for (size_t i = 0; i < recommended.size(); ++i) {
    if (relevant.count(recommended[i])) {
      dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    }
  }
  std::size_t n = std::min(recommended.size(), ideal_n);
  double idcg = 0.0;
  for (size_t i = 0; i < n; ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return idcg == 0.0 ? 0.0 : dcg / idcg;
}

std::unordered_set<int> heard_before(const std::vector<dataio::Session>& user_sessions,
                                     std::int64_t t_ref) {
  std::unordered_set<int> heard;
  for (const auto& s : user_sessions) {
    if (s.start_time >= t_ref) break;
    heard.insert(s.songs.begin(), s.songs.end());
  }
  return heard;
}

std::pair<std::unordered_set<int>, std::unordered_set<int>> split_truth(
    const std::vector<int>& truth, const std::unordered_set<int>& heard) {
  std::unordered_set<int> repeated, explored;
  for (int v : truth) {
    if (heard.count(v)) {
      repeated.insert(v);
    } else {
      explored.insert(v);
    }
  }
  return {repeated, explored};
}

double rep_ratio(const std::vector<int>& recommended, const std::unordered_set<int>& heard) {
  if (recommended.empty()) throw std::invalid_argument("rep_ratio: empty list");
  int reps = 0;
  for (int v : recommended) {
    if (heard.count(v)) ++reps;
  }
  return static_cast<double>(reps) / static_cast<double>(recommended.size());
}

double rep_ratio_gt(const std::vector<int>& truth, const std::unordered_set<int>& heard) {
  return rep_ratio(truth, heard);
}

double median_rank(const std::vector<int>& recommended, const dataio::SongCatalog& catalog) {
  if (recommended.empty()) throw std::invalid_argument("median_rank: empty list");
  std::vector<double> pops;
  pops.reserve(recommended.size());
  for (int v : recommended) pops.push_back(static_cast<double>(catalog.popularity[static_cast<size_t>(v)]));
  std::sort(pops.begin(), pops.end());
  size_t n = pops.size();
  if (n % 2 == 1) return pops[n / 2];
  return 0.5 * (pops[n / 2 - 1] + pops[n / 2]);
}

namespace {

struct Row {
  double recall = 0.0, ndcg = 0.0;
  bool has_rep = false, has_exp = false;
  double recall_rep = 0.0, ndcg_rep = 0.0;
  double recall_exp = 0.0, ndcg_exp = 0.0;
  double rr = 0.0, rr_gt = 0.0, mr = 0.0;
};

}  // namespace

EvalReport evaluate(const data::Dataset& ds, const std::vector<int>& split, int k,
                    const Recommender& recommender) {
  if (split.empty()) throw DataError("evaluate: empty split");
  int n = static_cast<int>(split.size());
  std::vector<Row> rows(static_cast<size_t>(n));

#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    const dataio::SessionSequence& seq = ds.sequences[static_cast<size_t>(split[static_cast<size_t>(i)])];
    std::int64_t t_ref = seq.target.start_time;
    rec::RecommendationList list = recommender(seq, t_ref);

    const std::vector<int>& truth_list = seq.target.songs;
    std::unordered_set<int> truth(truth_list.begin(), truth_list.end());
    std::unordered_set<int> heard = heard_before(ds.sessions[static_cast<size_t>(seq.user)], t_ref);
    auto [repeated, explored] = split_truth(truth_list, heard);

    Row& r = rows[static_cast<size_t>(i)];
    r.recall = recall_at_k(list.songs, truth);
    r.ndcg = ndcg_at_k(list.songs, truth, truth.size());
    if (!repeated.empty()) {
      r.has_rep = true;
      r.recall_rep = recall_at_k(list.songs, repeated);
      r.ndcg_rep = ndcg_at_k(list.songs, repeated, repeated.size());
    }
    if (!explored.empty()) {
      r.has_exp = true;
      r.recall_exp = recall_at_k(list.songs, explored);
      r.ndcg_exp = ndcg_at_k(list.songs, explored, explored.size());
    }
    r.rr = rep_ratio(list.songs, heard);
    r.rr_gt = rep_ratio_gt(truth_list, heard);
    r.mr = median_rank(list.songs, ds.catalog);
  }

  EvalReport rep;
  rep.n_sessions = n;
  double s_recall = 0, s_ndcg = 0, s_rrep = 0, s_nrep = 0, s_rexp = 0, s_nexp = 0;
  double s_rr = 0, s_rrgt = 0, s_mr = 0;
  for (const Row& r : rows) {
    s_recall += r.recall;
    s_ndcg += r.ndcg;
    if (r.has_rep) {
      ++rep.n_sessions_with_rep;
      s_rrep += r.recall_rep;
      s_nrep += r.ndcg_rep;
    }
    if (r.has_exp) {
      ++rep.n_sessions_with_exp;
      s_rexp += r.recall_exp;
      s_nexp += r.ndcg_exp;
    }
    s_rr += r.rr;
    s_rrgt += r.rr_gt;
    s_mr += r.mr;
  }
  rep.recall = 100.0 * s_recall / n;
  rep.ndcg = 100.0 * s_ndcg / n;
  rep.recall_rep = rep.n_sessions_with_rep ? 100.0 * s_rrep / rep.n_sessions_with_rep : 0.0;
  rep.ndcg_rep = rep.n_sessions_with_rep ? 100.0 * s_nrep / rep.n_sessions_with_rep : 0.0;
  rep.recall_exp = rep.n_sessions_with_exp ? 100.0 * s_rexp / rep.n_sessions_with_exp : 0.0;
  rep.ndcg_exp = rep.n_sessions_with_exp ? 100.0 * s_nexp / rep.n_sessions_with_exp : 0.0;
  rep.rep_ratio = 100.0 * s_rr / n;
  rep.rep_ratio_gt = 100.0 * s_rrgt / n;
  rep.rep_bias = rep.rep_ratio - rep.rep_ratio_gt;
  rep.mr = s_mr / n;
  return rep;
}

EvalReport evaluate_model(const data::Dataset& ds, const ad::ParamStore& params,
                          const RunConfig& cfg, const std::vector<int>& split) {
  return evaluate(ds, split, cfg.k,
                  [&](const dataio::SessionSequence& seq, std::int64_t) {
                    return rec::recommend(params, seq, ds.history, ds.cooc, cfg, cfg.k);
                  });
}

EvalReport evaluate_baseline(const data::Dataset& ds, rec::BaselineKind kind, const RunConfig& cfg,
                             const std::vector<int>& split) {
  rec::BaselineContext ctx(ds.catalog, ds.history, ds.cooc, cfg);
  return evaluate(ds, split, cfg.k,
                  [&, kind](const dataio::SessionSequence& seq, std::int64_t t_ref) {
                    return rec::baseline_recommend(kind, ctx, seq, cfg.k, t_ref);
                  });
}

std::string report_to_string(const EvalReport& r, const RunConfig& cfg, const std::string& label,
                             int k) {
  char buf[256];
  std::string out;
  out += "label=" + label + "\n";
  auto kv = [&](const char* key, double v) {
    std::snprintf(buf, sizeof(buf), "%s=%.6f\n", key, v);
    out += buf;
  };
  kv("recall", r.recall);
  kv("ndcg", r.ndcg);
  kv("recall_rep", r.recall_rep);
  kv("ndcg_rep", r.ndcg_rep);
  kv("recall_exp", r.recall_exp);
  kv("ndcg_exp", r.ndcg_exp);
  kv("rep_ratio", r.rep_ratio);
  kv("rep_ratio_gt", r.rep_ratio_gt);
  kv("rep_bias", r.rep_bias);
  kv("mr", r.mr);
  std::snprintf(buf, sizeof(buf), "n_sessions=%d\nn_sessions_with_rep=%d\nn_sessions_with_exp=%d\n",
                r.n_sessions, r.n_sessions_with_rep, r.n_sessions_with_exp);
  out += buf;
  for (const auto& [key, value] : cfg.to_map()) out += "config." + key + "=" + value + "\n";

  std::snprintf(buf, sizeof(buf),
                "\n%-14s %9s@%-3d %8s@%-3d %10s %9s %10s %9s %9s %9s %9s\n", "system", "Recall", k,
                "NDCG", k, "Recall^Rep", "NDCG^Rep", "Recall^Exp", "NDCG^Exp", "RepRatio",
                "RepBias", "MR");
  out += buf;
  std::snprintf(buf, sizeof(buf),
                "%-14s %12.2f %11.2f %10.2f %9.2f %10.2f %9.2f %9.2f %9.2f %9.2f\n", label.c_str(),
                r.recall, r.ndcg, r.recall_rep, r.ndcg_rep, r.recall_exp, r.ndcg_exp, r.rep_ratio,
                r.rep_bias, r.mr);
  out += buf;
  return out;
}

void write_report(const std::string& path, const EvalReport& r, const RunConfig& cfg,
                  const std::string& label, int k) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write report: " + path);
  out << report_to_string(r, cfg, label, k);
}

ReportStats aggregate_reports(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("aggregate_reports: no reports");
  ReportStats st;
  auto fields = [](EvalReport& r) {
    return std::vector<double*>{&r.recall,     &r.ndcg,         &r.recall_rep, &r.ndcg_rep,
                                &r.recall_exp, &r.ndcg_exp,     &r.rep_ratio,  &r.rep_ratio_gt,
                                &r.rep_bias,   &r.mr};
  };
  std::vector<double*> mean_f = fields(st.mean);
  std::vector<double*> sd_f = fields(st.stddev);
  size_t n = reports.size();
  for (const EvalReport& r : reports) {
    EvalReport tmp = r;
    std::vector<double*> src = fields(tmp);
    for (size_t i = 0; i < mean_f.size(); ++i) *mean_f[i] += *src[i] / static_cast<double>(n);
    st.mean.n_sessions = r.n_sessions;
    st.mean.n_sessions_with_rep = r.n_sessions_with_rep;
    st.mean.n_sessions_with_exp = r.n_sessions_with_exp;
  }
  if (n > 1) {
    for (const EvalReport& r : reports) {
      EvalReport tmp = r;
      std::vector<double*> src = fields(tmp);
      for (size_t i = 0; i < sd_f.size(); ++i) {
        double d = *src[i] - *mean_f[i];
        *sd_f[i] += d * d / static_cast<double>(n - 1);
      }
    }
    for (double* p : sd_f) *p = std::sqrt(*p);
  }
  return st;
}

}  // namespace sessionrec::eval
