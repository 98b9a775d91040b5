#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace gridplan {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input document or a violated structural invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Operation mixes configurations from different grids.
class GridMismatchError : public Error {
 public:
  GridMismatchError() : Error("topology configurations belong to different grids") {}
};

/// An action or configuration leaves an injection on a bus without any online line.
class InfeasibleConfigError : public Error {
 public:
  using Error::Error;
};

/// The online electrical graph is split into several components.
class IslandingError : public Error {
 public:
  explicit IslandingError(std::vector<std::vector<int>> components)
      : Error("electrical islanding: " + std::to_string(components.size()) + " components"),
        components_(std::move(components)) {}

  /// Electrical bus indices per connected component.
  const std::vector<std::vector<int>>& components() const { return components_; }

 private:
  std::vector<std::vector<int>> components_;
};

class SingularSystemError : public Error {
 public:
  using Error::Error;
};

/// Policy training stopped because evaluation reward collapsed.
class TrainingDivergedError : public Error {
 public:
  using Error::Error;
};

}  // namespace gridplan
