#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sessionrec/config.hpp"
#include "sessionrec/dataset.hpp"

namespace sessionrec::cli {

// Versioned JSON dataset artifact: config echo, id tables, indexed events
// and summary counts. Loading rebuilds the dataset from the stored events,
// so every downstream command sees exactly the ingest-time segmentation.
void save_bundle(const std::string& path, const data::Dataset& ds, const RunConfig& cfg,
                 std::size_t total_lines, std::size_t malformed_lines);

// Rebuilds the dataset. Dataset-shape keys in cfg (k, gap_minutes, L,
// step, min_session_len, min_sessions_per_user, n_test, n_val) are
// replaced by the bundle's; model/training keys are left alone.
data::Dataset load_bundle(const std::string& path, RunConfig& cfg);

// Full command-line entry point; returns the process exit code
// (0 success, 1 runtime failure, 2 usage or config error).
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, char** argv);

}  // namespace sessionrec::cli
