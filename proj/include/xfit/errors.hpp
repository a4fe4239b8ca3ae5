#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace xfit {

// A fold whose training set came out empty (complete graphs, gap too wide...).
// Hard error by design: silently dropping folds would bias pooled estimates.
class EmptyTrainingFold : public std::runtime_error {
 public:
  explicit EmptyTrainingFold(const std::string& what) : std::runtime_error(what) {}
};

// IRLS hit its iteration cap without converging.
class IrlsDivergence : public std::runtime_error {
 public:
  IrlsDivergence(const std::string& what, int iterations)
      : std::runtime_error(what), iterations(iterations) {}
  int iterations;
};

// Generation or fitting failure inside a Monte Carlo replicate, tagged with
// the (size, replicate) coordinates it happened at.
class ReplicateError : public std::runtime_error {
 public:
  ReplicateError(std::size_t size, int replicate, const std::string& what)
      : std::runtime_error("size " + std::to_string(size) + " replicate " +
                           std::to_string(replicate) + ": " + what),
        size(size),
        replicate(replicate) {}
  std::size_t size;
  int replicate;
};

// Config-file validation failure; `path` points at the offending field.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path(path) {}
  std::string path;
};

}  // namespace xfit
