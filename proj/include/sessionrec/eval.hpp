#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_set>
#include <vector>

#include "sessionrec/dataset.hpp"
#include "sessionrec/recsys.hpp"

namespace sessionrec::eval {

// |rec intersect truth| / |truth|
double recall_at_k(const std::vector<int>& recommended, const std::unordered_set<int>& truth);

// Binary relevance, DCG discount 1/log2(rank+1) with 1-based ranks, ideal
// DCG over min(|rec|, ideal_n) positions. For the plain metric ideal_n is
// the truth size; partitioned variants pass the partition size.
double ndcg_at_k(const std::vector<int>& recommended, const std::unordered_set<int>& relevant,
                 std::size_t ideal_n);

// Songs listened to in any of the user's sessions starting before t_ref.
std::unordered_set<int> heard_before(const std::vector<dataio::Session>& user_sessions,
                                     std::int64_t t_ref);

// (repeated, explored) partition of the truth set against the heard set.
std::pair<std::unordered_set<int>, std::unordered_set<int>> split_truth(
    const std::vector<int>& truth, const std::unordered_set<int>& heard);

double rep_ratio(const std::vector<int>& recommended, const std::unordered_set<int>& heard);
double rep_ratio_gt(const std::vector<int>& truth, const std::unordered_set<int>& heard);

// median popularity (distinct listeners) of the recommended songs; even
// list length takes the mean of the two central values
double median_rank(const std::vector<int>& recommended, const dataio::SongCatalog& catalog);

// All metric means are percentages except mr.
struct EvalReport {
  double recall = 0.0;
  double ndcg = 0.0;
  double recall_rep = 0.0;
  double ndcg_rep = 0.0;
  double recall_exp = 0.0;
  double ndcg_exp = 0.0;
  double rep_ratio = 0.0;
  double rep_ratio_gt = 0.0;
  double rep_bias = 0.0;  // rep_ratio - rep_ratio_gt, exactly
  double mr = 0.0;
  int n_sessions = 0;
  int n_sessions_with_rep = 0;
  int n_sessions_with_exp = 0;
};

using Recommender =
    std::function<rec::RecommendationList(const dataio::SessionSequence&, std::int64_t)>;

// Runs the recommender on every sequence of the split (t_ref = target
// start time) and aggregates per-session metrics. Sessions are processed
// in parallel; the fold is in split order.
EvalReport evaluate(const data::Dataset& ds, const std::vector<int>& split, int k,
                    const Recommender& recommender);

EvalReport evaluate_model(const data::Dataset& ds, const ad::ParamStore& params,
                          const RunConfig& cfg, const std::vector<int>& split);
EvalReport evaluate_baseline(const data::Dataset& ds, rec::BaselineKind kind, const RunConfig& cfg,
                             const std::vector<int>& split);

// key=value lines plus a rendered table; `label` names the scored system.
std::string report_to_string(const EvalReport& r, const RunConfig& cfg, const std::string& label,
                             int k);
void write_report(const std::string& path, const EvalReport& r, const RunConfig& cfg,
                  const std::string& label, int k);

struct ReportStats {
  EvalReport mean;
  EvalReport stddev;  // sample stddev, zero for a single report
};
ReportStats aggregate_reports(const std::vector<EvalReport>& reports);

}  // namespace sessionrec::eval
