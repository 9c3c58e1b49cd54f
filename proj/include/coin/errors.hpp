#pragma once

#include <stdexcept>
#include <string>

namespace coin {

/// Bad configuration, unusable input files, malformed corpora. CLI exit 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Training produced a non-finite loss. CLI exit 3.
struct DivergenceError : std::runtime_error {
  explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Artifact incompatibility (checkpoint/vocab mismatch). CLI exit 4.
struct ArtifactError : std::runtime_error {
  explicit ArtifactError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace coin
