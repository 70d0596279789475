#include "ctlab/config.hpp"

#include "ctlab/error.hpp"
#include "ctlab/util.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdlib>

namespace ctlab {

namespace pt = boost::property_tree;

namespace {

std::string unquote(std::string v) {
  if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front()) return v.substr(1, v.size() - 2);
  return v;
}

template <typename T>
T convert(const std::string& key, const std::string& raw) {
  try {
    std::size_t used = 0;
    T v;
    if constexpr (std::is_same_v<T, double>) v = std::stod(raw, &used);
    else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!raw.empty() && raw.front() == '-') throw std::invalid_argument("negative");
      v = std::stoull(raw, &used);
    } else v = std::stoi(raw, &used);
    if (used != raw.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("invalid value for " + key + ": '" + raw + "'");
  }
}

bool to_bool(const std::string& key, const std::string& raw) {
  if (raw == "true" || raw == "1" || raw == "yes" || raw == "on") return true;
  if (raw == "false" || raw == "0" || raw == "no" || raw == "off") return false;
  throw ConfigError("invalid boolean for " + key + ": '" + raw + "'");
}

/// Single table of settable fields shared by the file reader and the env reader.
void set_field(RunConfig& c, const std::string& key, const std::string& raw, const std::filesystem::path& base) {
  auto path = [&] {
    std::filesystem::path p(raw);
    return p.is_relative() && !base.empty() ? base / p : p;
  };
  if (key == "corpus") c.corpus = path();
  else if (key == "stopwords") c.stopwords = path();
  else if (key == "emoji_map") c.emoji_map = path();
  else if (key == "checkpoint_dir") c.checkpoint_dir = path();
  else if (key == "output_dir") c.output_dir = path();
  else if (key == "ensemble") c.ensemble = path();
  else if (key == "encoders") {
    c.encoder_roots.clear();
    for (const auto& part : split_whitespace(raw)) c.encoder_roots.push_back(base.empty() ? std::filesystem::path(part) : base / part);
  } else if (key == "encoder_id") c.model.encoder_id = raw;
  else if (key == "epochs") c.model.epochs = convert<int>(key, raw);
  else if (key == "batch_size") c.model.batch_size = convert<int>(key, raw);
  else if (key == "learning_rate") c.model.learning_rate = convert<double>(key, raw);
  else if (key == "patience") c.model.patience = convert<int>(key, raw);
  else if (key == "use_class_weights") c.model.use_class_weights = to_bool(key, raw);
  else if (key == "max_tokens") c.model.max_tokens = convert<int>(key, raw);
  else if (key == "seed") c.seed = c.model.seed = convert<std::uint64_t>(key, raw);
  else if (key == "threshold") c.threshold = convert<double>(key, raw);
  else throw ConfigError("unknown config key '" + key + "'");
}

constexpr const char* kKeys[] = {"corpus",     "stopwords",  "emoji_map",     "checkpoint_dir",    "output_dir",
                                 "ensemble",   "encoders",   "encoder_id",    "epochs",            "batch_size",
                                 "learning_rate", "patience", "use_class_weights", "max_tokens",   "seed",
                                 "threshold"};

}  // namespace

RunConfig load_run_config(const std::filesystem::path& file) {
  if (!std::filesystem::exists(file)) throw ConfigError("config file not found: " + file.string());
  pt::ptree tree;
  try {
    pt::read_ini(file.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config " + file.string() + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  RunConfig c;
  const auto base = file.parent_path();
  for (const auto& [key, node] : tree) {
    if (node.empty()) {
      set_field(c, key, unquote(node.data()), base);
      continue;
    }
    if (key != "paths" && key != "model" && key != "run")
      throw ConfigError("unknown config section [" + key + "]");
    for (const auto& [k, v] : node) set_field(c, k, unquote(v.data()), base);
  }
  return c;
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

void apply_env(RunConfig& config, const EnvLookup& env) {
  for (const char* key : kKeys) {
    std::string name = "CTLAB_";
    for (const char* p = key; *p; ++p) name += static_cast<char>(std::toupper(static_cast<unsigned char>(*p)));
    if (auto v = env(name)) set_field(config, key, *v, {});
  }
}

std::vector<std::string> missing_paths(const std::vector<std::pair<std::string, std::filesystem::path>>& paths) {
  std::vector<std::string> out;
  for (const auto& [label, p] : paths)
    if (!p.empty() && !std::filesystem::exists(p)) out.push_back(label + ": " + p.string());
  return out;
}

void require_paths(const std::vector<std::pair<std::string, std::filesystem::path>>& paths) {
  auto missing = missing_paths(paths);
  if (!missing.empty()) throw ConfigError("missing input path(s): " + join(missing, "; "));
}

}  // namespace ctlab
