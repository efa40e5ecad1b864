#pragma once

#include <cstdint>
#include <string>

#include "sessionrec/config.hpp"
#include "sessionrec/dataio.hpp"
#include "sessionrec/training.hpp"

namespace sessionrec::ckpt {

// Versioned binary container: header (magic, version, catalog hash, dims),
// the config echo, named parameter blocks in registry order, and the
// optimizer moments when training state is included. Doubles are written
// raw, so a round trip is bit-exact.
struct Checkpoint {
  std::uint64_t catalog_hash = 0;
  std::string config_text;
  ad::ParamStore params;
  bool has_adam = false;
  train::AdamState adam;
  std::int64_t epochs_run = 0;
};

void save_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& path);

// Rejects a checkpoint trained against a different catalog or model width.
void check_compatible(const Checkpoint& c, const dataio::SongCatalog& catalog, int d);

}  // namespace sessionrec::ckpt
