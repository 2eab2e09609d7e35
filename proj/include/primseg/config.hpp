#pragma once

#include "primseg/losses.hpp"
#include "primseg/segment.hpp"

#include <string>

namespace primseg {

struct Config {
  PipelineConfig pipeline;
  LossConfig loss;

  /// Throws Error naming the offending key when a value is out of range.
  void validate() const;
};

/// Parses a JSON config. Missing keys keep their defaults; unknown keys,
/// wrongly typed values and out-of-range values throw Error naming the key.
Config parse_config(const std::string& text);
Config load_config(const std::string& path);

/// Every field, with nested sections "pipeline", "hyper", "estimation",
/// "mean_shift", "weights" and "loss".
std::string config_to_json(const Config& cfg);

}  // namespace primseg
