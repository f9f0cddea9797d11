// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMCAST_ERRORS_HPP
#define BEAMCAST_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace beamcast {

// Base class for all errors thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape or dimension disagreement between tensor operands.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& msg) : Error(msg) {}
};

// A caller violated an operation's contract (non-scalar loss, missing
// gradient, non-normalized probability vector, ...).
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& msg) : Error(msg) {}
};

// Invalid or inconsistent configuration. CLI exit code 2.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Corrupt or mismatched on-disk artifacts (bad magic, truncated records,
// codebook hash mismatch). CLI exit code 3.
class DataIntegrityError : public Error {
 public:
  explicit DataIntegrityError(const std::string& msg) : Error(msg) {}
};

// NaN/Inf detected in a computation. CLI exit code 4.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& msg) : Error(msg) {}
};

// A generator could not satisfy its constraints (e.g. buildings cannot fit).
class GenerationError : public Error {
 public:
  explicit GenerationError(const std::string& msg) : Error(msg) {}
};

}  // namespace beamcast

#endif  // BEAMCAST_ERRORS_HPP
