#pragma once

#include <stdexcept>
#include <string>

namespace gridfit {

// Base for all failures that should surface to the CLI as a machine-readable
// error kind ("io", "parse", "config", "input", "schedule").
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& msg)
      : std::runtime_error(msg), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

struct IoError : Error {
  explicit IoError(const std::string& msg) : Error("io", msg) {}
};

struct ParseError : Error {
  explicit ParseError(const std::string& msg) : Error("parse", msg) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error("config", msg) {}
};

struct InputError : Error {
  explicit InputError(const std::string& msg) : Error("input", msg) {}
};

struct ScheduleError : Error {
  explicit ScheduleError(const std::string& msg) : Error("schedule", msg) {}
};

}  // namespace gridfit
