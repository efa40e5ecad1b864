#include "sessionrec/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "sessionrec/common.hpp"

namespace sessionrec {

std::string to_string(NegMode m) { return m == NegMode::Uniform ? "uniform" : "popularity"; }

NegMode neg_mode_from_string(const std::string& s) {
  if (s == "uniform") return NegMode::Uniform;
  if (s == "popularity") return NegMode::Popularity;
  throw ConfigError("neg_mode must be 'uniform' or 'popularity', got '" + s + "'");
}

double RunConfig::time_unit_seconds() const {
  if (time_unit == "hours") return 3600.0;
  if (time_unit == "minutes") return 60.0;
  if (time_unit == "seconds") return 1.0;
  throw ConfigError("time_unit must be hours, minutes or seconds, got '" + time_unit + "'");
}

namespace {

int to_int(const std::string& k, const std::string& v) {
  try {
    std::size_t pos = 0;
    const int r = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + k + "' expects an integer, got '" + v + "'");
  }
}

double to_double(const std::string& k, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + k + "' expects a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& k, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + k + "' expects a boolean, got '" + v + "'");
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "k") k = to_int(key, value);
  else if (key == "gap_minutes") gap_minutes = to_int(key, value);
  else if (key == "L") L = to_int(key, value);
  else if (key == "step") step = to_int(key, value);
  else if (key == "min_session_len") min_session_len = to_int(key, value);
  else if (key == "min_sessions_per_user") min_sessions_per_user = to_int(key, value);
  else if (key == "n_test") n_test = to_int(key, value);
  else if (key == "n_val") n_val = to_int(key, value);
  else if (key == "time_unit") time_unit = value;
  else if (key == "d") d = to_int(key, value);
  else if (key == "B") B = to_int(key, value);
  else if (key == "H") H = to_int(key, value);
  else if (key == "alpha") alpha = to_double(key, value);
  else if (key == "top_bl_n") top_bl_n = to_int(key, value);
  else if (key == "residual") residual = to_bool(key, value);
  else if (key == "embeddings_path") embeddings_path = value;
  else if (key == "trainable_embeddings") trainable_embeddings = to_bool(key, value);
  else if (key == "lambda") lambda = to_double(key, value);
  else if (key == "lr") lr = to_double(key, value);
  else if (key == "epochs") epochs = to_int(key, value);
  else if (key == "batch_size") batch_size = to_int(key, value);
  else if (key == "neg_mode") neg_mode = neg_mode_from_string(value);
  else if (key == "neg_beta") neg_beta = to_double(key, value);
  else if (key == "seed") seed = static_cast<std::uint64_t>(std::stoull(value));
  else if (key == "patience") patience = to_int(key, value);
  else if (key == "clamp_session_loss") clamp_session_loss = to_bool(key, value);
  else if (key == "full_window") full_window = to_bool(key, value);
  else if (key == "adam_beta1") adam_beta1 = to_double(key, value);
  else if (key == "adam_beta2") adam_beta2 = to_double(key, value);
  else if (key == "adam_eps") adam_eps = to_double(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

void RunConfig::validate() const {
  if (k < 1) throw ConfigError("k must be >= 1");
  if (gap_minutes <= 0) throw ConfigError("gap_minutes must be positive");
  if (L < 1) throw ConfigError("L must be >= 1");
  if (step < 1) throw ConfigError("step must be >= 1");
  if (d < 1 || H < 1 || B < 1) throw ConfigError("d, B, H must be >= 1");
  if (d % H != 0) throw ConfigError("H must divide d");
  if (alpha <= 0.0) throw ConfigError("alpha must be positive");
  if (lambda < 0.0 || lambda > 1.0) throw ConfigError("lambda must be in [0,1]");
  if (lr <= 0.0) throw ConfigError("lr must be positive");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (min_session_len < 1) throw ConfigError("min_session_len must be >= 1");
  if (n_test < 0 || n_val < 0) throw ConfigError("n_test/n_val must be >= 0");
  if (top_bl_n < 1) throw ConfigError("top_bl_n must be >= 1");
  time_unit_seconds();  // validates the unit name
}

std::map<std::string, std::string> RunConfig::to_map() const {
  std::map<std::string, std::string> m;
  m["k"] = std::to_string(k);
  m["gap_minutes"] = std::to_string(gap_minutes);
  m["L"] = std::to_string(L);
  m["step"] = std::to_string(step);
  m["min_session_len"] = std::to_string(min_session_len);
  m["min_sessions_per_user"] = std::to_string(min_sessions_per_user);
  m["n_test"] = std::to_string(n_test);
  m["n_val"] = std::to_string(n_val);
  m["time_unit"] = time_unit;
  m["d"] = std::to_string(d);
  m["B"] = std::to_string(B);
  m["H"] = std::to_string(H);
  m["alpha"] = fmt(alpha);
  m["top_bl_n"] = std::to_string(top_bl_n);
  m["residual"] = residual ? "true" : "false";
  m["embeddings_path"] = embeddings_path;
  m["trainable_embeddings"] = trainable_embeddings ? "true" : "false";
  m["lambda"] = fmt(lambda);
  m["lr"] = fmt(lr);
  m["epochs"] = std::to_string(epochs);
  m["batch_size"] = std::to_string(batch_size);
  m["neg_mode"] = to_string(neg_mode);
  m["neg_beta"] = fmt(neg_beta);
  m["seed"] = std::to_string(seed);
  m["patience"] = std::to_string(patience);
  m["clamp_session_loss"] = clamp_session_loss ? "true" : "false";
  m["full_window"] = full_window ? "true" : "false";
  m["adam_beta1"] = fmt(adam_beta1);
  m["adam_beta2"] = fmt(adam_beta2);
  m["adam_eps"] = fmt(adam_eps);
  return m;
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  for (const auto& [k2, v] : to_map()) os << k2 << "=" << v << "\n";
  return os.str();
}

RunConfig RunConfig::from_map(const std::map<std::string, std::string>& kv) {
  RunConfig c;
  for (const auto& [k2, v] : kv) c.set(k2, v);
  return c;
}

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t");
  auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

RunConfig parse_config_stream(std::istream& f, const std::string& where, RunConfig base) {
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || trim(line)[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(where + ":" + std::to_string(lineno) + ": expected key=value");
    base.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

}  // namespace

RunConfig load_config_file(const std::string& path, RunConfig base) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  return parse_config_stream(f, path, std::move(base));
}

RunConfig parse_config_text(const std::string& text, RunConfig base) {
  std::istringstream f(text);
  return parse_config_stream(f, "<config text>", std::move(base));
}

}  // namespace sessionrec
