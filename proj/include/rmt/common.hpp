#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rmt {

inline constexpr std::uint64_t kPageSize = 4096;
inline constexpr std::uint32_t kMaxPages = 4096;  // 16 MiB address space
inline constexpr std::size_t kRegisterCount = 8;

using PageIndex = std::uint32_t;
using ReplicaId = std::uint32_t;
using CoreId = std::uint32_t;
using BackingId = std::uint64_t;
using RegionId = std::uint64_t;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error("line " + std::to_string(line) + ": " + message), line_(line), message_(message) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& message() const noexcept { return message_; }

 private:
  std::size_t line_;
  std::string message_;
};

// Anything wrong with the inputs of a run, detected before it starts.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class OverlapError : public Error {
 public:
  using Error::Error;
};

class AddressSpaceExhausted : public Error {
 public:
  using Error::Error;
};

class InsufficientCores : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class MasterNotResilient : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class ScaleRefused : public Error {
 public:
  using Error::Error;
};

class EmptySpace : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

}  // namespace rmt
