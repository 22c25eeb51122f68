#include "gibly/config.hpp"

#include <fstream>
#include <sstream>

namespace gibly {

namespace {

std::string trim(const std::string& s) {
  const std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  const std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

long parse_int(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  long v = 0;
  try {
    v = std::stol(value, &pos);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': not an integer: '" + value + "'");
  }
  if (pos != value.size()) {
    throw ConfigError("config key '" + key + "': not an integer: '" + value + "'");
  }
  return v;
}

double parse_real(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': not a number: '" + value + "'");
  }
  if (pos != value.size()) {
    throw ConfigError("config key '" + key + "': not a number: '" + value + "'");
  }
  return v;
}

std::uint64_t parse_seed(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(value, &pos);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': not a seed: '" + value + "'");
  }
  if (pos != value.size()) {
    throw ConfigError("config key '" + key + "': not a seed: '" + value + "'");
  }
  return v;
}

}  // namespace

void apply_config_key(CliConfig& config, const std::string& key,
                      const std::string& value) {
  if (key == "base_radius") {
    config.layer.schedule.base_radius = parse_real(key, value);
  } else if (key == "radius_factor") {
    config.layer.schedule.factor = parse_real(key, value);
  } else if (key == "num_scales") {
    config.layer.schedule.num_scales = static_cast<int>(parse_int(key, value));
  } else if (key == "gibs_per_kind") {
    config.layer.gibs_per_kind = static_cast<int>(parse_int(key, value));
  } else if (key == "num_composites") {
    config.layer.num_composites = static_cast<int>(parse_int(key, value));
  } else if (key == "mc_samples") {
    config.layer.mc_samples = static_cast<int>(parse_int(key, value));
  } else if (key == "projection_dim") {
    config.layer.projection_dim = static_cast<int>(parse_int(key, value));
  } else if (key == "lambda_l1") {
    config.layer.reg.lambda_l1 = parse_real(key, value);
  } else if (key == "lambda_l2") {
    config.layer.reg.lambda_l2 = parse_real(key, value);
  } else if (key == "max_neighbors") {
    config.layer.max_neighbors = static_cast<int>(parse_int(key, value));
  } else if (key == "workers") {
    config.layer.workers = static_cast<int>(parse_int(key, value));
  } else if (key == "seed") {
    config.layer.global_seed = parse_seed(key, value);
  } else if (key == "epochs") {
    config.epochs = static_cast<int>(parse_int(key, value));
  } else if (key == "learning_rate") {
    config.learning_rate = parse_real(key, value);
  } else if (key == "weight_decay") {
    config.weight_decay = parse_real(key, value);
  } else {
    throw ConfigError("unknown config key: '" + key + "'");
  }
}

CliConfig parse_config_text(const std::string& text) {
  CliConfig config;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected 'key = value'");
    }
    apply_config_key(config, key, value);
  }
  return config;
}

CliConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

}  // namespace gibly
