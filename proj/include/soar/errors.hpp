#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace soar {

// Every error carries the name of the module that raised it so the CLI can
// report where a pipeline failed.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& message)
      : std::runtime_error("[" + module + "] " + message), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

class FormatError : public Error {
 public:
  FormatError(const std::string& message, std::uint64_t offset)
      : Error("dataio", message + " at byte offset " + std::to_string(offset)), offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class SizeError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  ValidationError(std::string module, std::vector<std::string> issues)
      : Error(std::move(module), join(issues)), issues_(std::move(issues)) {}

  const std::vector<std::string>& issues() const noexcept { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& issues) {
    std::string out = "validation failed (" + std::to_string(issues.size()) + " issue(s))";
    for (const auto& s : issues) out += "; " + s;
    return out;
  }
  std::vector<std::string> issues_;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ContractError : public Error {
 public:
  using Error::Error;
};

class MetricError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace soar
