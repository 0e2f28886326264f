#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace powermod {

/// Malformed or inconsistent input data (trace files, configs, datasets).
/// Carries an optional file:line location for diagnostics.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
  DataError(const std::filesystem::path& file, std::size_t line, const std::string& what)
      : std::runtime_error(file.string() + ":" + std::to_string(line) + ": " + what),
        file_(file),
        line_(line) {}

  const std::filesystem::path& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::filesystem::path file_;
  std::size_t line_ = 0;
};

/// Numerical failure during model fitting (divergence, non-finite values).
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace powermod
