// Timing harness for the OpenMP kernels vs their serial references. Also
// re-runs a short training job with 1 and N threads and checks the
// resulting parameters are bit-identical.

#include <omp.h>

#include <cstdio>
#include <cstring>
#include <functional>
#include <sstream>
#include <vector>

#include "sessionrec/actr.hpp"
#include "sessionrec/common.hpp"
#include "sessionrec/dataset.hpp"
#include "sessionrec/embed.hpp"
#include "sessionrec/linalg.hpp"
#include "sessionrec/synth.hpp"
#include "sessionrec/training.hpp"

using namespace sessionrec;

namespace {

Mat random_mat(int r, int c, Rng& rng) {
  Mat m(r, c);
  for (auto& x : m.a) x = rng.next_normal();
  return m;
}

double time_of(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const double t0 = omp_get_wtime();
  for (int i = 0; i < reps; ++i) fn();
  return (omp_get_wtime() - t0) / reps;
}

void report(const char* name, double serial, double parallel, bool same) {
  std::printf("%-22s serial %9.4f ms   parallel %9.4f ms   speedup %5.2fx   %s\n", name,
              serial * 1e3, parallel * 1e3, parallel > 0 ? serial / parallel : 0.0,
              same ? "bitwise-equal" : "MISMATCH");
}

bool params_equal(const ad::ParamStore& a, const ad::ParamStore& b) {
  if (a.value.size() != b.value.size()) return false;
  for (std::size_t i = 0; i < a.value.size(); ++i) {
    if (!a.value[i].same_shape(b.value[i])) return false;
    if (std::memcmp(a.value[i].a.data(), b.value[i].a.data(),
                    a.value[i].size() * sizeof(double)) != 0)
      return false;
  }
  return true;
}

}  // namespace

int main() {
  std::printf("threads available: %d\n", omp_get_max_threads());
  Rng rng(7);

  {
    Mat A = random_mat(384, 256, rng), B = random_mat(256, 384, rng);
    Mat C1(384, 384), C2(384, 384);
    const double ts = time_of([&] { linalg::matmul_serial(A, B, C1); }, 5);
    const double tp = time_of([&] { linalg::matmul_omp(A, B, C2); }, 5);
    report("matmul 384x256x384", ts, tp,
           std::memcmp(C1.a.data(), C2.a.data(), C1.size() * sizeof(double)) == 0);
  }

  {
    Mat table = random_mat(50000, 128, rng), q = random_mat(1, 128, rng);
    std::vector<double> s1, s2;
    const double ts = time_of([&] { linalg::score_all_serial(table, q, s1); }, 5);
    const double tp = time_of([&] { linalg::score_all_omp(table, q, s2); }, 5);
    report("score_all 50k x 128", ts, tp, s1 == s2);
  }

  synth::SynthParams sp = synth::synth_profile("repeat-heavy");
  auto events = synth::generate(sp, 7);
  RunConfig cfg;
  cfg.L = 10;
  cfg.step = 5;
  cfg.n_test = 3;
  cfg.n_val = 2;
  cfg.gap_minutes = 60;
  cfg.d = 32;
  cfg.epochs = 2;
  cfg.seed = 7;
  data::Dataset ds = data::build_dataset(events, cfg);

  {
    auto windows = data::train_cooccurrence_sessions(ds.sessions, ds.sequences, ds.splits.train);
    actr::CooccurrenceStats c1, c2;
    const double ts =
        time_of([&] { c1 = actr::build_cooccurrence_serial(windows, ds.catalog.size()); }, 3);
    const double tp = time_of([&] { c2 = actr::build_cooccurrence(windows, ds.catalog.size()); }, 3);
    std::ostringstream d1, d2;
    c1.dump_c(d1);
    c2.dump_c(d2);
    report("cooccurrence build", ts, tp, d1.str() == d2.str());
  }

  {
    embed::EmbeddingTable table = embed::init_random(ds.catalog.size(), cfg.d, cfg.seed);
    omp_set_num_threads(1);
    const double t0 = omp_get_wtime();
    train::TrainResult r1 = train::train(ds, table, cfg);
    const double ts = omp_get_wtime() - t0;
    omp_set_num_threads(omp_get_num_procs());
    const double t1 = omp_get_wtime();
    train::TrainResult r2 = train::train(ds, table, cfg);
    const double tp = omp_get_wtime() - t1;
    report("train 2 epochs", ts, tp, params_equal(r1.last, r2.last));
  }

  return 0;
}
