#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "gibly/layer.hpp"
#include "gibly/training.hpp"

namespace gibly {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Layer configuration plus training knobs, mirrored 1:1 by the config file
// keys and their command-line overrides. Defaults follow the reference
// setup: 3 scales at base radius 0.4 m and factor 2, 2 GIBs per kind,
// 16 composites.
struct CliConfig {
  GiblyConfig layer;
  int epochs = 50;
  double learning_rate = 1e-2;
  double weight_decay = 1e-4;

  TrainOptions train_options() const {
    TrainOptions opts;
    opts.epochs = epochs;
    opts.learning_rate = learning_rate;
    opts.weight_decay = weight_decay;
    opts.seed = layer.global_seed;
    return opts;
  }
};

// Parses "key = value" lines ('#' comments). Unknown keys are rejected with
// the offending key named in the error.
CliConfig parse_config_text(const std::string& text);
CliConfig load_config_file(const std::string& path);

// Applies a single key/value override; same key set as the file.
void apply_config_key(CliConfig& config, const std::string& key,
                      const std::string& value);

}  // namespace gibly
