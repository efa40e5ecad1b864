#include "sessionrec/cli.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "sessionrec/checkpoint.hpp"
#include "sessionrec/common.hpp"
#include "sessionrec/embed.hpp"
#include "sessionrec/eval.hpp"
#include "sessionrec/recsys.hpp"
#include "sessionrec/synth.hpp"
#include "sessionrec/training.hpp"

namespace sessionrec::cli {

namespace {

using nlohmann::json;

constexpr int kBundleVersion = 1;

// segmentation/split keys are fixed when the bundle is written
const char* kShapeKeys[] = {"k",  "gap_minutes",     "L",
                            "step", "min_session_len", "min_sessions_per_user",
                            "n_test", "n_val"};

std::string hash_hex(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)h);
  return buf;
}

std::string join_path(const std::string& dir, const std::string& name) {
  if (dir.empty() || dir == ".") return name;
  return (std::filesystem::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
  if (dir.empty() || dir == ".") return;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir + ": " + ec.message());
}

}  // namespace

void save_bundle(const std::string& path, const data::Dataset& ds, const RunConfig& cfg,
                 std::size_t total_lines, std::size_t malformed_lines) {
  json j;
  j["bundle_version"] = kBundleVersion;
  j["catalog_hash"] = hash_hex(ds.catalog.hash());
  json cfg_j = json::object();
  for (const auto& [k, v] : cfg.to_map()) cfg_j[k] = v;
  j["config"] = cfg_j;
  j["users"] = ds.users.ids;
  j["songs"] = ds.catalog.ids;
  json ev = json::array();
  for (const auto& e : ds.events) ev.push_back({e.user, e.song, e.timestamp});
  j["events"] = ev;
  std::size_t n_sessions = 0;
  for (const auto& s : ds.sessions) n_sessions += s.size();
  j["counts"] = {{"total_lines", total_lines},
                 {"malformed_lines", malformed_lines},
                 {"events", ds.events.size()},
                 {"sessions", n_sessions},
                 {"sequences", ds.sequences.size()},
                 {"train", ds.splits.train.size()},
                 {"val", ds.splits.val.size()},
                 {"test", ds.splits.test.size()}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(1, '\t') << '\n';
  if (!out) throw DataError("write failed: " + path);
}

data::Dataset load_bundle(const std::string& path, RunConfig& cfg) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open bundle " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("bad bundle " + path + ": " + e.what());
  }
  try {
    if (j.at("bundle_version").get<int>() != kBundleVersion)
      throw DataError("unsupported bundle version in " + path);
    const auto& cfg_j = j.at("config");
    for (const char* key : kShapeKeys) cfg.set(key, cfg_j.at(key).get<std::string>());
    cfg.validate();
    std::vector<std::string> users = j.at("users").get<std::vector<std::string>>();
    std::vector<std::string> songs = j.at("songs").get<std::vector<std::string>>();
    std::vector<dataio::ListeningEvent> events;
    events.reserve(j.at("events").size());
    for (const auto& e : j.at("events")) {
      const int u = e.at(0).get<int>();
      const int s = e.at(1).get<int>();
      if (u < 0 || u >= (int)users.size() || s < 0 || s >= (int)songs.size())
        throw DataError("bundle event index out of range in " + path);
      events.push_back({users[(std::size_t)u], songs[(std::size_t)s], e.at(2).get<std::int64_t>()});
    }
    data::Dataset ds = data::build_dataset(events, cfg);
    if (hash_hex(ds.catalog.hash()) != j.at("catalog_hash").get<std::string>())
      throw DataError("bundle catalog hash mismatch in " + path);
    return ds;
  } catch (const json::exception& e) {
    throw DataError("bad bundle " + path + ": " + e.what());
  }
}

namespace {

struct GlobalArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
};

RunConfig make_config(const GlobalArgs& g) {
  RunConfig cfg;
  if (!g.config_path.empty()) cfg = load_config_file(g.config_path, cfg);
  if (g.seed) cfg.seed = *g.seed;
  cfg.validate();
  return cfg;
}

int user_index_of(const dataio::UserIndex& users, const std::string& id) {
  auto it = std::lower_bound(users.ids.begin(), users.ids.end(), id);
  if (it == users.ids.end() || *it != id) return -1;
  return (int)(it - users.ids.begin());
}

int cmd_ingest(const GlobalArgs& g, const std::string& input, std::string output) {
  RunConfig cfg = make_config(g);
  ensure_dir(g.out_dir);
  if (output.empty()) output = join_path(g.out_dir, "bundle.json");
  dataio::ParseResult parsed = dataio::parse_events_file(input);
  data::Dataset ds = data::build_dataset(parsed.events, cfg);
  save_bundle(output, ds, cfg, parsed.total_lines, parsed.malformed_lines);
  std::size_t n_sessions = 0;
  for (const auto& s : ds.sessions) n_sessions += s.size();
  std::printf("bundle=%s\n", output.c_str());
  std::printf("lines=%zu malformed=%zu events=%zu\n", parsed.total_lines, parsed.malformed_lines,
              parsed.events.size());
  std::printf("users=%d songs=%d sessions=%zu\n", ds.users.size(), ds.catalog.size(), n_sessions);
  std::printf("sequences=%zu train=%zu val=%zu test=%zu\n", ds.sequences.size(),
              ds.splits.train.size(), ds.splits.val.size(), ds.splits.test.size());
  return 0;
}

int cmd_synth(const GlobalArgs& g, const std::string& profile,
              const std::vector<std::string>& sets, std::string output, std::string meta_out) {
  RunConfig cfg = make_config(g);
  synth::SynthParams p = synth::synth_profile(profile);
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("--param expects key=value, got: " + kv);
    p.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  ensure_dir(g.out_dir);
  if (output.empty()) output = join_path(g.out_dir, "events.tsv");
  if (meta_out.empty()) meta_out = join_path(g.out_dir, "synth_meta.json");
  auto events = synth::generate(p, cfg.seed);
  synth::write_events_tsv(output, events);
  json meta;
  meta["profile"] = profile;
  meta["seed"] = cfg.seed;
  meta["events"] = events.size();
  json pj = json::object();
  for (const auto& [k, v] : p.to_map()) pj[k] = v;
  meta["params"] = pj;
  std::ofstream mout(meta_out, std::ios::binary);
  if (!mout) throw DataError("cannot write " + meta_out);
  mout << meta.dump(1, '\t') << '\n';
  std::printf("events=%s meta=%s n_events=%zu\n", output.c_str(), meta_out.c_str(), events.size());
  return 0;
}

int cmd_train(const GlobalArgs& g, const std::string& bundle_path, std::string ckpt_out,
              bool resume) {
  RunConfig cfg = make_config(g);
  data::Dataset ds = load_bundle(bundle_path, cfg);
  ensure_dir(g.out_dir);
  if (ckpt_out.empty()) ckpt_out = join_path(g.out_dir, "checkpoint.bin");
  const std::string state_path = join_path(g.out_dir, "last_state.bin");
  const std::string trace_path = join_path(g.out_dir, "trace.txt");

  embed::EmbeddingTable table =
      cfg.embeddings_path.empty()
          ? embed::init_random(ds.catalog.size(), cfg.d, cfg.seed)
          : embed::load_pretrained(cfg.embeddings_path, ds.catalog, cfg.d, cfg.seed);

  ckpt::Checkpoint prev;
  if (resume) {
    prev = ckpt::load_checkpoint(state_path);
    ckpt::check_compatible(prev, ds.catalog, cfg.d);
    if (!prev.has_adam) throw ConfigError("cannot resume: " + state_path + " has no optimizer state");
  }

  std::ofstream trace(trace_path, std::ios::binary);
  if (!trace) throw DataError("cannot write " + trace_path);
  train::TrainResult res =
      resume ? train::train(ds, table, cfg, &trace, &prev.params, &prev.adam,
                            (int)prev.epochs_run)
             : train::train(ds, table, cfg, &trace);

  ckpt::Checkpoint best;
  best.catalog_hash = ds.catalog.hash();
  best.config_text = cfg.to_text();
  best.params = res.best;
  best.epochs_run = res.best_epoch;
  ckpt::save_checkpoint(ckpt_out, best);

  ckpt::Checkpoint last;
  last.catalog_hash = ds.catalog.hash();
  last.config_text = cfg.to_text();
  last.params = res.last;
  last.has_adam = true;
  last.adam = res.adam;
  last.epochs_run = res.epochs_run;
  ckpt::save_checkpoint(state_path, last);

  std::printf("checkpoint=%s state=%s trace=%s\n", ckpt_out.c_str(), state_path.c_str(),
              trace_path.c_str());
  std::printf("epochs_run=%d best_epoch=%d best_val_ndcg=%.6f aborted=%d\n", res.epochs_run,
              res.best_epoch, res.best_val_ndcg, res.aborted ? 1 : 0);
  return res.aborted ? 1 : 0;
}

const std::vector<int>& pick_split(const data::Dataset& ds, const std::string& name) {
  if (name == "train") return ds.splits.train;
  if (name == "val") return ds.splits.val;
  if (name == "test") return ds.splits.test;
  throw ConfigError("unknown split: " + name);
}

int cmd_evaluate(const GlobalArgs& g, const std::string& bundle_path, const std::string& ckpt_path,
                 const std::string& baseline, const std::string& split_name, std::string report_out,
                 std::string label) {
  if (ckpt_path.empty() == baseline.empty())
    throw ConfigError("evaluate needs exactly one of --checkpoint or --baseline");
  RunConfig cfg = make_config(g);
  data::Dataset ds = load_bundle(bundle_path, cfg);
  ensure_dir(g.out_dir);
  if (report_out.empty()) report_out = join_path(g.out_dir, "report.txt");
  const std::vector<int>& split = pick_split(ds, split_name);
  if (split.empty()) throw DataError("split '" + split_name + "' is empty");

  eval::EvalReport rep;
  RunConfig cfg_eval = cfg;
  if (!ckpt_path.empty()) {
    ckpt::Checkpoint c = ckpt::load_checkpoint(ckpt_path);
    // model keys come from the checkpoint so scoring matches training;
    // segmentation keys stay pinned to the bundle
    cfg_eval = parse_config_text(c.config_text);
    for (const char* key : kShapeKeys) cfg_eval.set(key, cfg.to_map().at(key));
    cfg_eval.validate();
    ckpt::check_compatible(c, ds.catalog, cfg_eval.d);
    if (label.empty()) label = "model";
    rep = eval::evaluate_model(ds, c.params, cfg_eval, split);
  } else {
    rec::BaselineKind kind = rec::baseline_from_string(baseline);
    if (label.empty()) label = rec::to_string(kind);
    rep = eval::evaluate_baseline(ds, kind, cfg_eval, split);
  }
  eval::write_report(report_out, rep, cfg_eval, label, cfg_eval.k);
  std::fputs(eval::report_to_string(rep, cfg_eval, label, cfg_eval.k).c_str(), stdout);
  std::printf("report=%s\n", report_out.c_str());
  return 0;
}

int cmd_recommend(const GlobalArgs& g, const std::string& bundle_path, const std::string& ckpt_path,
                  const std::vector<std::string>& user_ids, std::string out_path) {
  RunConfig cfg = make_config(g);
  data::Dataset ds = load_bundle(bundle_path, cfg);
  ensure_dir(g.out_dir);
  if (out_path.empty()) out_path = join_path(g.out_dir, "recommendations.txt");
  ckpt::Checkpoint c = ckpt::load_checkpoint(ckpt_path);
  RunConfig cfg_eval = parse_config_text(c.config_text);
  for (const char* key : kShapeKeys) cfg_eval.set(key, cfg.to_map().at(key));
  cfg_eval.validate();
  ckpt::check_compatible(c, ds.catalog, cfg_eval.d);

  std::vector<int> users;
  if (user_ids.empty()) {
    for (int u = 0; u < ds.users.size(); ++u) users.push_back(u);
  } else {
    for (const auto& id : user_ids) {
      const int u = user_index_of(ds.users, id);
      if (u < 0) throw DataError("unknown user: " + id);
      users.push_back(u);
    }
  }

  std::ostringstream lines;
  for (int u : users) {
    const auto& sess = ds.sessions[(std::size_t)u];
    if (sess.empty()) {
      std::fprintf(stderr, "skipping %s: no sessions\n", ds.users.ids[(std::size_t)u].c_str());
      continue;
    }
    dataio::SessionSequence seq;
    seq.user = u;
    const int l = std::min<int>(cfg_eval.L, (int)sess.size());
    seq.offset = (int)sess.size() - l;
    seq.history.assign(sess.end() - l, sess.end());
    seq.target.start_time = sess.back().end_time + 1;  // recommend for "now"
    rec::RecommendationList r = rec::recommend(c.params, seq, ds.history, ds.cooc, cfg_eval,
                                               cfg_eval.k);
    lines << ds.users.ids[(std::size_t)u];
    char buf[64];
    for (std::size_t i = 0; i < r.songs.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.6f", r.scores[i]);
      lines << (i == 0 ? '\t' : ',') << ds.catalog.ids[(std::size_t)r.songs[i]] << ':' << buf;
    }
    lines << '\n';
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw DataError("cannot write " + out_path);
  out << lines.str();
  std::fputs(lines.str().c_str(), stdout);
  return 0;
}

int cmd_stats(const GlobalArgs& g, const std::string& bundle_path) {
  RunConfig cfg = make_config(g);
  data::Dataset ds = load_bundle(bundle_path, cfg);
  std::size_t n_sessions = 0, n_session_songs = 0;
  for (const auto& per_user : ds.sessions) {
    n_sessions += per_user.size();
    for (const auto& s : per_user) n_session_songs += s.songs.size();
  }
  std::printf("users=%d songs=%d events=%zu\n", ds.users.size(), ds.catalog.size(),
              ds.events.size());
  std::printf("sessions=%zu mean_session_len=%.3f\n", n_sessions,
              n_sessions ? (double)n_session_songs / (double)n_sessions : 0.0);
  std::printf("sequences=%zu train=%zu val=%zu test=%zu\n", ds.sequences.size(),
              ds.splits.train.size(), ds.splits.val.size(), ds.splits.test.size());

  std::vector<int> order(ds.catalog.ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = (int)i;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (ds.catalog.popularity[(std::size_t)a] != ds.catalog.popularity[(std::size_t)b])
      return ds.catalog.popularity[(std::size_t)a] > ds.catalog.popularity[(std::size_t)b];
    return a < b;
  });
  std::printf("top_songs_by_listeners:");
  for (int i = 0; i < (int)order.size() && i < 10; ++i)
    std::printf(" %s(%d)", ds.catalog.ids[(std::size_t)order[(std::size_t)i]].c_str(),
                ds.catalog.popularity[(std::size_t)order[(std::size_t)i]]);
  std::printf("\n");

  // ground-truth repetition over test targets, the dataset-side RepRatio
  double rep_sum = 0.0;
  int rep_n = 0;
  for (int idx : ds.splits.test) {
    const auto& seq = ds.sequences[(std::size_t)idx];
    if (seq.target.songs.empty()) continue;
    auto heard = eval::heard_before(ds.sessions[(std::size_t)seq.user], seq.target.start_time);
    rep_sum += eval::rep_ratio_gt(seq.target.songs, heard);
    rep_n++;
  }
  std::printf("test_rep_ratio_gt=%.2f%% over %d targets\n", rep_n ? 100.0 * rep_sum / rep_n : 0.0,
              rep_n);
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"repeat-aware sequential listening-session recommender"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may appear after the subcommand
  GlobalArgs g;
  app.add_option("--config", g.config_path, "key=value config file");
  app.add_option("--seed", g.seed, "RNG seed (overrides config)");
  app.add_option("--out-dir", g.out_dir, "directory for output artifacts");

  auto* ingest = app.add_subcommand("ingest", "parse events and build the dataset bundle");
  std::string in_events, in_bundle_out;
  ingest->add_option("--input", in_events, "events TSV path")->required();
  ingest->add_option("--output", in_bundle_out, "bundle path (default <out-dir>/bundle.json)");

  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic listening log");
  std::string sy_profile = "default", sy_out, sy_meta;
  std::vector<std::string> sy_params;
  synth_cmd->add_option("--profile", sy_profile, "default, repeat-heavy or skewed");
  synth_cmd->add_option("--param", sy_params, "generator override key=value (repeatable)");
  synth_cmd->add_option("--output", sy_out, "events path (default <out-dir>/events.tsv)");
  synth_cmd->add_option("--meta", sy_meta, "metadata path (default <out-dir>/synth_meta.json)");

  auto* train_cmd = app.add_subcommand("train", "train the model on a bundle");
  std::string tr_bundle, tr_ckpt;
  bool tr_resume = false;
  train_cmd->add_option("--bundle", tr_bundle, "dataset bundle path")->required();
  train_cmd->add_option("--checkpoint", tr_ckpt, "best-epoch checkpoint path");
  train_cmd->add_flag("--resume", tr_resume, "continue from <out-dir>/last_state.bin");

  auto* eval_cmd = app.add_subcommand("evaluate", "score a checkpoint or baseline on a split");
  std::string ev_bundle, ev_ckpt, ev_baseline, ev_split = "test", ev_report, ev_label;
  eval_cmd->add_option("--bundle", ev_bundle, "dataset bundle path")->required();
  eval_cmd->add_option("--checkpoint", ev_ckpt, "model checkpoint path");
  eval_cmd->add_option("--baseline", ev_baseline, "g-top, p-top, actr-repeat or oracle");
  eval_cmd->add_option("--split", ev_split, "train, val or test (default test)");
  eval_cmd->add_option("--report", ev_report, "report path (default <out-dir>/report.txt)");
  eval_cmd->add_option("--label", ev_label, "system name echoed in the report");

  auto* rec_cmd = app.add_subcommand("recommend", "emit top-K lists for users");
  std::string rc_bundle, rc_ckpt, rc_out;
  std::vector<std::string> rc_users;
  rec_cmd->add_option("--bundle", rc_bundle, "dataset bundle path")->required();
  rec_cmd->add_option("--checkpoint", rc_ckpt, "model checkpoint path")->required();
  rec_cmd->add_option("--user", rc_users, "user id (repeatable; default all users)");
  rec_cmd->add_option("--output", rc_out, "output path (default <out-dir>/recommendations.txt)");

  auto* stats_cmd = app.add_subcommand("stats", "print bundle statistics");
  std::string st_bundle;
  stats_cmd->add_option("--bundle", st_bundle, "dataset bundle path")->required();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    if (*ingest) return cmd_ingest(g, in_events, in_bundle_out);
    if (*synth_cmd) return cmd_synth(g, sy_profile, sy_params, sy_out, sy_meta);
    if (*train_cmd) return cmd_train(g, tr_bundle, tr_ckpt, tr_resume);
    if (*eval_cmd)
      return cmd_evaluate(g, ev_bundle, ev_ckpt, ev_baseline, ev_split, ev_report, ev_label);
    if (*rec_cmd) return cmd_recommend(g, rc_bundle, rc_ckpt, rc_users, rc_out);
    if (*stats_cmd) return cmd_stats(g, st_bundle);
    std::fputs("no subcommand given\n", stderr);
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args);
}

}  // namespace sessionrec::cli
