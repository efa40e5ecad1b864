#include "sessionrec/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace sessionrec::ckpt {

namespace {

constexpr char kMagic[8] = {'S', 'R', 'E', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T get(std::istream& in, const std::string& path) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw DataError("truncated checkpoint: " + path);
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in, const std::string& path) {
  auto n = get<std::uint32_t>(in, path);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw DataError("truncated checkpoint: " + path);
  return s;
}

void put_mat(std::ostream& out, const Mat& m) {
  put<std::int32_t>(out, m.rows);
  put<std::int32_t>(out, m.cols);
  out.write(reinterpret_cast<const char*>(m.a.data()),
            static_cast<std::streamsize>(m.a.size() * sizeof(double)));
}

Mat get_mat(std::istream& in, const std::string& path) {
  auto rows = get<std::int32_t>(in, path);
  auto cols = get<std::int32_t>(in, path);
  if (rows < 0 || cols < 0) throw DataError("corrupt checkpoint block shape: " + path);
  Mat m(rows, cols);
  in.read(reinterpret_cast<char*>(m.a.data()),
          static_cast<std::streamsize>(m.a.size() * sizeof(double)));
  if (!in) throw DataError("truncated checkpoint: " + path);
  return m;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  put(out, kVersion);
  put(out, c.catalog_hash);
  put(out, c.epochs_run);
  put_string(out, c.config_text);

  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.params.names.size()));
  for (size_t i = 0; i < c.params.names.size(); ++i) {
    put_string(out, c.params.names[i]);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(c.params.trainable[i]));
    put_mat(out, c.params.value[i]);
  }

  put<std::uint8_t>(out, c.has_adam ? 1 : 0);
  if (c.has_adam) {
    if (c.adam.m.size() != c.params.value.size()) {
      throw DataError("checkpoint: optimizer state does not match parameters");
    }
    put(out, c.adam.t);
    for (size_t i = 0; i < c.adam.m.size(); ++i) {
      put_mat(out, c.adam.m[i]);
      put_mat(out, c.adam.v[i]);
    }
  }
  if (!out) throw DataError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("not a checkpoint file: " + path);
  }
  auto version = get<std::uint32_t>(in, path);
  if (version != kVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version) + ": " + path);
  }
  Checkpoint c;
  c.catalog_hash = get<std::uint64_t>(in, path);
  c.epochs_run = get<std::int64_t>(in, path);
  c.config_text = get_string(in, path);

  auto n = get<std::uint32_t>(in, path);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string name = get_string(in, path);
    bool trainable = get<std::uint8_t>(in, path) != 0;
    c.params.add(name, get_mat(in, path), trainable);
  }

  c.has_adam = get<std::uint8_t>(in, path) != 0;
  if (c.has_adam) {
    c.adam.t = get<std::int64_t>(in, path);
    for (std::uint32_t i = 0; i < n; ++i) {
      c.adam.m.push_back(get_mat(in, path));
      c.adam.v.push_back(get_mat(in, path));
    }
  }
  return c;
}

void check_compatible(const Checkpoint& c, const dataio::SongCatalog& catalog, int d) {
  if (c.catalog_hash != catalog.hash()) {
    throw ConfigError("checkpoint was trained against a different song catalog");
  }
  int table = c.params.find("song_table");
  if (table < 0) throw DataError("checkpoint has no song_table block");
  const Mat& m = c.params.value[static_cast<size_t>(table)];
  if (m.cols != d) {
    throw ConfigError("checkpoint embedding dim " + std::to_string(m.cols) +
                      " does not match config d=" + std::to_string(d));
  }
  if (m.rows != catalog.size()) {
    throw ConfigError("checkpoint song table size does not match catalog");
  }
}

}  // namespace sessionrec::ckpt
