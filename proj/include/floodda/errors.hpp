#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace floodda {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent configuration / input value.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// A forcing time series was queried outside its span.
class MissingForcing : public Error {
public:
  using Error::Error;
};

/// A file or recorded diagnostic the caller relies on does not exist.
class MissingArtifact : public Error {
public:
  using Error::Error;
};

/// The explicit solver produced a non-finite value.
class SolverDivergence : public Error {
public:
  SolverDivergence(std::size_t cell, double time, const std::string &context = {})
      : Error((context.empty() ? std::string() : context + ": ") + "solver diverged at cell " +
              std::to_string(cell) + ", t = " + std::to_string(time) + " s"),
        cell_(cell), time_(time) {}

  std::size_t cell() const noexcept { return cell_; }
  double time() const noexcept { return time_; }

private:
  std::size_t cell_;
  double time_;
};

} // namespace floodda
