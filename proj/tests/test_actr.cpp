#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "sessionrec/actr.hpp"
#include "sessionrec/common.hpp"
#include "sessionrec/config.hpp"
#include "sessionrec/dataset.hpp"
#include "sessionrec/synth.hpp"

using namespace sessionrec;
using namespace sessionrec::actr;

namespace {

constexpr double kHour = 3600.0;

dataio::IndexedEvent iev(int u, int s, std::int64_t t) { return {u, s, t}; }

dataio::Session sess(std::vector<int> songs) {
  dataio::Session s;
  s.songs = std::move(songs);
  return s;
}

// independent base-level recount straight from an event list
double bl_oracle(const std::vector<dataio::IndexedEvent>& events, int user, int song,
                 std::int64_t t_ref, double alpha) {
  std::set<std::int64_t> ts;  // identical timestamps collapse
  for (const auto& e : events) {
    if (e.user == user && e.song == song && e.timestamp < t_ref) ts.insert(e.timestamp);
  }
  double sum = 0.0;
  for (std::int64_t t : ts) sum += std::pow(static_cast<double>(t_ref - t) / kHour, -alpha);
  return sum;
}

// dense recount of F and C from scratch
struct DenseCooc {
  std::vector<std::vector<double>> f, c;
};

DenseCooc cooc_oracle(const std::vector<dataio::Session>& corpus, int n) {
  DenseCooc d;
  d.f.assign(n, std::vector<double>(n, 0.0));
  for (const auto& s : corpus) {
    for (size_t i = 0; i < s.songs.size(); ++i) {
      for (size_t j = i + 1; j < s.songs.size(); ++j) {
        d.f[s.songs[i]][s.songs[j]] += 1.0;
        d.f[s.songs[j]][s.songs[i]] += 1.0;
      }
    }
  }
  std::vector<double> deg(n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) deg[i] += d.f[i][j];
  }
  d.c.assign(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j && deg[i] > 0 && deg[j] > 0) {
        d.c[i][j] = d.f[i][j] / std::sqrt(deg[i] * deg[j]);
      }
    }
  }
  return d;
}

std::vector<const dataio::Session*> ptrs(const std::vector<dataio::Session>& corpus) {
  std::vector<const dataio::Session*> p;
  for (const auto& s : corpus) p.push_back(&s);
  return p;
}

}  // namespace

TEST_CASE("base_level_raw matches the hand-computed decay sum") {
  std::vector<dataio::IndexedEvent> events = {iev(0, 0, 100 * 3600), iev(0, 0, 200 * 3600)};
  ListenHistoryIndex h(events, 1);
  // (300-100)^-0.5 + (300-200)^-0.5 in hours
  double v = base_level_raw(0, 0, 300 * 3600, 0.5, h);
  CHECK(v == doctest::Approx(0.170711).epsilon(1e-5));
  CHECK(v == doctest::Approx(1.0 / std::sqrt(200.0) + 1.0 / std::sqrt(100.0)).epsilon(1e-12));
}

TEST_CASE("base_level_raw edge cases") {
  std::vector<dataio::IndexedEvent> events = {iev(0, 0, 3600)};
  ListenHistoryIndex h(events, 1);
  CHECK(base_level_raw(0, 1, 7200, 0.5, h) == 0.0);       // no prior listens
  CHECK(base_level_raw(0, 0, 7200, 0.5, h) == 1.0);       // one listen 1h before
  CHECK(base_level_raw(0, 0, 3600, 0.5, h) == 0.0);       // strictly-before filter
  CHECK_THROWS(base_level_raw(0, 0, 7200, 0.0, h));       // alpha must be positive
}

TEST_CASE("base_level_raw matches an independent recount on random histories") {
  Rng rng(101);
  int checked = 0;
  for (int trial = 0; trial < 1200; ++trial) {
    int n_users = 1 + static_cast<int>(rng.next_below(3));
    std::vector<dataio::IndexedEvent> events;
    int n = 3 + static_cast<int>(rng.next_below(20));
    for (int i = 0; i < n; ++i) {
      events.push_back(iev(static_cast<int>(rng.next_below(n_users)),
                           static_cast<int>(rng.next_below(4)),
                           static_cast<std::int64_t>(rng.next_below(500)) * 900));
    }
    ListenHistoryIndex h(events, n_users);
    std::int64_t t_ref = 500 * 900 / 2 + static_cast<std::int64_t>(rng.next_below(500 * 450));
    double alpha = 0.1 + rng.next_double();
    int user = static_cast<int>(rng.next_below(n_users));
    int song = static_cast<int>(rng.next_below(4));
    double got = base_level_raw(user, song, t_ref, alpha, h);
    double want = bl_oracle(events, user, song, t_ref, alpha);
    CHECK(got == doctest::Approx(want).epsilon(1e-9));
    ++checked;
  }
  CHECK(checked >= 1000);
}

TEST_CASE("base-level activation grows with extra and more recent listens") {
  std::vector<dataio::IndexedEvent> a = {iev(0, 0, 100 * 3600)};
  std::vector<dataio::IndexedEvent> b = {iev(0, 0, 100 * 3600), iev(0, 0, 150 * 3600)};
  std::vector<dataio::IndexedEvent> c = {iev(0, 0, 150 * 3600)};
  std::int64_t t_ref = 300 * 3600;
  double va = base_level_raw(0, 0, t_ref, 0.5, ListenHistoryIndex(a, 1));
  double vb = base_level_raw(0, 0, t_ref, 0.5, ListenHistoryIndex(b, 1));
  double vc = base_level_raw(0, 0, t_ref, 0.5, ListenHistoryIndex(c, 1));
  CHECK(vb > va);  // extra listen
  CHECK(vc > va);  // closer listen
}

TEST_CASE("identical duplicate timestamps collapse to one listen") {
  std::vector<dataio::IndexedEvent> events = {iev(0, 0, 3600), iev(0, 0, 3600)};
  ListenHistoryIndex h(events, 1);
  CHECK(base_level_raw(0, 0, 7200, 0.5, h) == 1.0);
  CHECK(h.count_before(0, 0, 7200) == 1);
}

TEST_CASE("listen_count_before keeps raw listen volume") {
  std::vector<dataio::IndexedEvent> events = {iev(0, 0, 100), iev(0, 0, 200), iev(0, 0, 300)};
  ListenHistoryIndex h(events, 1);
  CHECK(h.listen_count_before(0, 0, 250) == 2);
  CHECK(h.listen_count_before(0, 0, 1000) == 3);
  auto songs = h.songs_before(0, 150);
  REQUIRE(songs.size() == 1);
  CHECK(songs[0] == 0);
  CHECK(h.songs_before(0, 50).empty());
}

TEST_CASE("softmax handles the documented arithmetic") {
  auto w = softmax({std::log(2.0), 0.0});
  CHECK(w[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(w[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  auto flat = softmax({4.2, 4.2, 4.2});
  for (double x : flat) CHECK(x == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  // stabilized against large inputs
  auto big = softmax({1000.0, 999.0});
  CHECK(std::isfinite(big[0]));
  CHECK(big[0] + big[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("base_level_session softmax-normalizes raw values") {
  // equal raw values -> (0.5, 0.5); singleton -> (1.0)
  std::vector<dataio::IndexedEvent> events = {iev(0, 0, 0), iev(0, 1, 0)};
  ListenHistoryIndex h(events, 1);
  auto two = base_level_session(sess({0, 1}), 0, 7200, 0.5, h);
  CHECK(two[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(two[1] == doctest::Approx(0.5).epsilon(1e-12));
  auto one = base_level_session(sess({0}), 0, 7200, 0.5, h);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == 1.0);
}

TEST_CASE("cooccurrence counts pairs once per session") {
  std::vector<dataio::Session> corpus = {sess({0, 1})};
  auto st = build_cooccurrence(ptrs(corpus), 2);
  CHECK(st.f(0, 1) == 1);
  CHECK(st.f(1, 0) == 1);
  CHECK(st.f(0, 0) == 0);
  CHECK(st.degree(0) == 1.0);
  CHECK(st.c(0, 1) == doctest::Approx(1.0).epsilon(1e-12));  // 1/(sqrt(1)*sqrt(1))

  std::vector<dataio::Session> twice = {sess({0, 1}), sess({0, 1})};
  auto st2 = build_cooccurrence(ptrs(twice), 2);
  CHECK(st2.f(0, 1) == 2);  // F=[[0,2],[2,0]]
  CHECK(st2.c(0, 1) == doctest::Approx(1.0).epsilon(1e-12));  // 2/(sqrt(2)*sqrt(2))
}

TEST_CASE("cooccurrence leaves never-co-listened songs with zero rows") {
  std::vector<dataio::Session> corpus = {sess({0, 1})};
  auto st = build_cooccurrence(ptrs(corpus), 3);
  CHECK(st.degree(2) == 0.0);
  CHECK(st.c(2, 0) == 0.0);
  CHECK(st.row(2).empty());
}

TEST_CASE("cooccurrence matches a dense recount on random corpora") {
  Rng rng(202);
  for (int trial = 0; trial < 1100; ++trial) {
    int n = 3 + static_cast<int>(rng.next_below(10));
    int n_sessions = 1 + static_cast<int>(rng.next_below(15));
    std::vector<dataio::Session> corpus;
    for (int s = 0; s < n_sessions; ++s) {
      std::set<int> songs;
      int len = std::min(n, 2 + static_cast<int>(rng.next_below(4)));
      while (static_cast<int>(songs.size()) < len) songs.insert(static_cast<int>(rng.next_below(n)));
      corpus.push_back(sess(std::vector<int>(songs.begin(), songs.end())));
    }
    auto st = build_cooccurrence(ptrs(corpus), n);
    auto want = cooc_oracle(corpus, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        CHECK(static_cast<double>(st.f(i, j)) == want.f[i][j]);
        CHECK(st.c(i, j) == doctest::Approx(want.c[i][j]).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("cooccurrence is symmetric with a zero diagonal") {
  Rng rng(203);
  std::vector<dataio::Session> corpus;
  for (int s = 0; s < 40; ++s) {
    std::set<int> songs;
    while (songs.size() < 3) songs.insert(static_cast<int>(rng.next_below(15)));
    corpus.push_back(sess(std::vector<int>(songs.begin(), songs.end())));
  }
  auto st = build_cooccurrence(ptrs(corpus), 15);
  for (int i = 0; i < 15; ++i) {
    CHECK(st.f(i, i) == 0);
    CHECK(st.c(i, i) == 0.0);
    for (int j = 0; j < 15; ++j) {
      CHECK(st.f(i, j) == st.f(j, i));
      CHECK(st.c(i, j) == st.c(j, i));
    }
  }
}

TEST_CASE("spreading_raw sums pairwise correlations") {
  // sessions {a,b},{a,c}: C_ab = C_ac = 1/sqrt(2), C_bc = 0
  std::vector<dataio::Session> corpus = {sess({0, 1}), sess({0, 2})};
  auto st = build_cooccurrence(ptrs(corpus), 3);
  double r = 1.0 / std::sqrt(2.0);
  auto raw = spreading_raw(sess({0, 1, 2}), st);
  CHECK(raw[0] == doctest::Approx(2 * r).epsilon(1e-12));
  CHECK(raw[1] == doctest::Approx(r).epsilon(1e-12));
  CHECK(raw[2] == doctest::Approx(r).epsilon(1e-12));
}

TEST_CASE("spreading falls back to uniform when context is silent") {
  CooccurrenceStats empty(4);
  auto w = spreading(sess({0, 1, 2}), empty);
  for (double x : w) CHECK(x == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  auto single = spreading(sess({3}), empty);
  REQUIRE(single.size() == 1);
  CHECK(single[0] == 1.0);
}

TEST_CASE("spreading_raw matches a brute-force recount on random corpora") {
  Rng rng(204);
  for (int trial = 0; trial < 1100; ++trial) {
    int n = 4 + static_cast<int>(rng.next_below(8));
    std::vector<dataio::Session> corpus;
    int n_sessions = 2 + static_cast<int>(rng.next_below(10));
    for (int s = 0; s < n_sessions; ++s) {
      std::set<int> songs;
      int len = 2 + static_cast<int>(rng.next_below(3));
      while (static_cast<int>(songs.size()) < len) songs.insert(static_cast<int>(rng.next_below(n)));
      corpus.push_back(sess(std::vector<int>(songs.begin(), songs.end())));
    }
    auto st = build_cooccurrence(ptrs(corpus), n);
    auto want = cooc_oracle(corpus, n);

    std::set<int> probe_set;
    int plen = 2 + static_cast<int>(rng.next_below(3));
    while (static_cast<int>(probe_set.size()) < plen) probe_set.insert(static_cast<int>(rng.next_below(n)));
    dataio::Session probe = sess(std::vector<int>(probe_set.begin(), probe_set.end()));

    auto raw = spreading_raw(probe, st);
    for (size_t i = 0; i < probe.songs.size(); ++i) {
      double expect = 0.0;
      for (size_t j = 0; j < probe.songs.size(); ++j) {
        if (i != j) expect += want.c[probe.songs[i]][probe.songs[j]];
      }
      CHECK(raw[i] == doctest::Approx(expect).epsilon(1e-9));
    }
  }
}

TEST_CASE("partial_matching_raw sums dot products against session peers") {
  Mat m(3, 2);
  m.at(0, 0) = 1.0;  // a = (1,0)
  m.at(1, 1) = 1.0;  // b = (0,1)
  m.at(2, 0) = 1.0;  // c = (1,1)
  m.at(2, 1) = 1.0;
  auto raw = partial_matching_raw(sess({0, 1, 2}), m);
  CHECK(raw[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(raw[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(raw[2] == doctest::Approx(2.0).epsilon(1e-12));

  auto ortho = partial_matching(sess({0, 1}), m);
  CHECK(ortho[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(ortho[1] == doctest::Approx(0.5).epsilon(1e-12));

  auto single = partial_matching(sess({2}), m);
  REQUIRE(single.size() == 1);
  CHECK(single[0] == 1.0);
}

TEST_CASE("partial_matching_raw matches a brute-force recount") {
  Rng rng(205);
  for (int trial = 0; trial < 1100; ++trial) {
    int n = 4 + static_cast<int>(rng.next_below(6));
    int d = 2 + static_cast<int>(rng.next_below(5));
    Mat m(n, d);
    for (double& x : m.a) x = 2.0 * rng.next_double() - 1.0;
    std::set<int> songs;
    int len = 2 + static_cast<int>(rng.next_below(3));
    while (static_cast<int>(songs.size()) < len) songs.insert(static_cast<int>(rng.next_below(n)));
    dataio::Session s = sess(std::vector<int>(songs.begin(), songs.end()));

    auto raw = partial_matching_raw(s, m);
    for (size_t i = 0; i < s.songs.size(); ++i) {
      double expect = 0.0;
      for (size_t j = 0; j < s.songs.size(); ++j) {
        if (i == j) continue;
        for (int x = 0; x < d; ++x) expect += m.at(s.songs[i], x) * m.at(s.songs[j], x);
      }
      CHECK(raw[i] == doctest::Approx(expect).epsilon(1e-9));
    }
  }
}

TEST_CASE("session components each sum to one on random sessions") {
  Rng rng(206);
  std::vector<dataio::Session> corpus;
  for (int s = 0; s < 30; ++s) {
    std::set<int> songs;
    while (songs.size() < 3) songs.insert(static_cast<int>(rng.next_below(20)));
    corpus.push_back(sess(std::vector<int>(songs.begin(), songs.end())));
  }
  auto st = build_cooccurrence(ptrs(corpus), 20);
  Mat m(20, 4);
  for (double& x : m.a) x = rng.next_normal();
  std::vector<dataio::IndexedEvent> events;
  for (int i = 0; i < 200; ++i) {
    events.push_back(iev(0, static_cast<int>(rng.next_below(20)),
                         static_cast<std::int64_t>(rng.next_below(1000)) * 3600));
  }
  ListenHistoryIndex h(events, 1);

  for (int trial = 0; trial < 2000; ++trial) {
    std::set<int> songs;
    int len = 1 + static_cast<int>(rng.next_below(6));
    while (static_cast<int>(songs.size()) < len) songs.insert(static_cast<int>(rng.next_below(20)));
    dataio::Session s = sess(std::vector<int>(songs.begin(), songs.end()));
    std::int64_t t_ref = 1001 * 3600;
    auto bl = base_level_session(s, 0, t_ref, 0.5, h);
    auto spr = spreading(s, st);
    auto pm = partial_matching(s, m);
    double sb = 0, ss = 0, sp = 0;
    for (double x : bl) { CHECK(x >= 0.0); sb += x; }
    for (double x : spr) { CHECK(x >= 0.0); ss += x; }
    for (double x : pm) { CHECK(x >= 0.0); sp += x; }
    CHECK(sb == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(ss == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(sp == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("top_bl_songs selects by raw activation and renormalizes") {
  std::vector<dataio::IndexedEvent> events = {
      iev(0, 3, 100 * 3600), iev(0, 3, 250 * 3600),  // strongest: two listens, one recent
      iev(0, 1, 200 * 3600),                          // middle
      iev(0, 2, 10 * 3600),                           // weakest: old single listen
  };
  ListenHistoryIndex h(events, 1);
  std::int64_t t_ref = 300 * 3600;

  auto all = top_bl_songs(0, t_ref, 0.5, h, 20);
  REQUIRE(all.size() == 3);  // fewer prior songs than n
  CHECK(all[0].song == 3);
  CHECK(all[1].song == 1);
  CHECK(all[2].song == 2);
  double sum = 0.0;
  for (const auto& e : all) sum += e.weight;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));

  auto one = top_bl_songs(0, t_ref, 0.5, h, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].song == 3);
  CHECK(one[0].weight == 1.0);

  CHECK(top_bl_songs(1, t_ref, 0.5, ListenHistoryIndex({}, 2), 20).empty());
}

TEST_CASE("top_bl_songs gives equal weights to equally active songs") {
  std::vector<dataio::IndexedEvent> events = {iev(0, 0, 100 * 3600), iev(0, 1, 100 * 3600)};
  ListenHistoryIndex h(events, 1);
  auto top = top_bl_songs(0, 200 * 3600, 0.5, h, 2);
  REQUIRE(top.size() == 2);
  CHECK(top[0].weight == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(top[1].weight == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("train cooccurrence ignores validation and test listening") {
  synth::SynthParams p;
  p.set("users", "4");
  p.set("songs", "120");
  p.set("pool", "40");
  p.set("sessions", "14");
  p.set("session_len", "5");
  auto events = synth::generate(p, 9);

  RunConfig cfg;
  cfg.L = 4;
  cfg.step = 1;
  cfg.n_test = 2;
  cfg.n_val = 1;
  cfg.gap_minutes = 60;
  cfg.min_session_len = 2;
  auto ds = data::build_dataset(events, cfg);
  REQUIRE_FALSE(ds.splits.test.empty());

  // the dataset's matrix is exactly the train-window rebuild
  auto train_sessions =
      data::train_cooccurrence_sessions(ds.sessions, ds.sequences, ds.splits.train);
  std::ostringstream a, b;
  ds.cooc.dump_c(a);
  build_cooccurrence(train_sessions, ds.catalog.size()).dump_c(b);
  CHECK(a.str() == b.str());

  // no train-window history session reaches any eval target; in particular
  // each user's last sessions (the test targets) stay out of the counts
  std::map<int, int> max_train_idx;  // user -> highest session index seen
  for (int si : ds.splits.train) {
    const auto& seq = ds.sequences[static_cast<size_t>(si)];
    int hi = seq.offset + static_cast<int>(seq.history.size()) - 1;
    max_train_idx[seq.user] = std::max(max_train_idx[seq.user], hi);
  }
  for (int si : ds.splits.test) {
    const auto& seq = ds.sequences[static_cast<size_t>(si)];
    int target_idx = seq.offset + static_cast<int>(seq.history.size());
    CHECK(max_train_idx[seq.user] < target_idx);
  }
}
