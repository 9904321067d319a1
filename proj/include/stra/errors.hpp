#pragma once

#include <stdexcept>
#include <string>

namespace stra {

/// Bad arguments or shapes handed to a library call.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Conflicting compression settings (e.g. a background bound below the RoI bound).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A compressed stream that cannot be decoded.
class FormatError : public std::runtime_error {
 public:
  enum class Kind { Framing, Checksum, Unsupported };

  FormatError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace stra
