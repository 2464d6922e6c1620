#pragma once

#include <stdexcept>
#include <string>

namespace fedsim {

// Invalid user-supplied configuration (bad dimensions, out-of-range
// hyperparameters, missing config fields). Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A function was called outside its mathematical domain (empty index set,
// mismatched lengths, negative counts).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite loss or parameters during training. Carries the round and
// client that diverged when known. Maps to CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, int client = -1, int round = -1)
      : std::runtime_error(what), client_(client), round_(round) {}

  int client() const noexcept { return client_; }
  int round() const noexcept { return round_; }

 private:
  int client_;
  int round_;
};

// File system failures. Maps to CLI exit code 4.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fedsim
