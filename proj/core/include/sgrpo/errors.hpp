#ifndef SGRPO_ERRORS_HPP_
#define SGRPO_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace sgrpo {

// Invalid configuration value or precondition on user-supplied settings.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values surfacing from losses, gradients or optimizer state.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Decoding cannot proceed (e.g. context longer than the model window).
class GenerationError : public std::runtime_error {
 public:
  explicit GenerationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed files: checkpoints, task corpora, config files.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace sgrpo

#endif  // SGRPO_ERRORS_HPP_
