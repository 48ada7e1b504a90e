#pragma once

#include <stdexcept>
#include <string>

namespace rfim {

/// Bad parameters or violated preconditions. Maps to exit code 1 in the CLI.
struct validation_error : std::invalid_argument {
  explicit validation_error(const std::string& what) : std::invalid_argument(what) {}
};

/// A mathematical invariant the library guarantees was observed to fail.
/// Maps to exit code 2 in the CLI; always a bug or a corrupted run.
struct invariant_violation : std::runtime_error {
  explicit invariant_violation(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem / stream failure. Maps to exit code 3 in the CLI.
struct io_error : std::runtime_error {
  explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rfim
