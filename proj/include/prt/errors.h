#pragma once

#include <stdexcept>
#include <string>

namespace prt {

// Bad user input: scene files, flags, config values. CLI exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad or inconsistent pipeline artifacts: datasets, checkpoints, images.
// CLI exit code 3.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace prt
