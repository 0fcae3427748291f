#pragma once

// Merged run configuration read from a JSON file:
//   {"nasalance": {...}, "model": {...}, "train": {...}}
// Every section and key is optional; unknown ones are rejected.

#include <filesystem>
#include <string>

#include "nasality/physio_params.hpp"
#include "nasality/tcn.hpp"
#include "nasality/training.hpp"

namespace nasality {

struct RunConfig {
  NasalanceConfig nasalance;
  ModelConfig model;
  TrainConfig train;

  // Runs each section's validate(); throws ConfigError.
  void validate() const;

  std::string to_text() const;
  static RunConfig from_text(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
};

}  // namespace nasality
