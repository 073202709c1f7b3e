#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace gdcl {

// Column-major storage; one example per column throughout the library.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

using Rng = std::mt19937_64;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller passed malformed data (shape mismatch, label out of range, empty set).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// A configuration or term setup that cannot be executed.
class InvalidConfig : public Error {
 public:
  using Error::Error;
};

// API used out of order, e.g. backward against a model that changed since forward.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Non-finite value encountered; `where` names the offending parameter.
class NumericError : public Error {
 public:
  NumericError(std::string where, const std::string& what)
      : Error(where + ": " + what), where_(std::move(where)) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

// A class required by data weighting has no examples.
class MissingClass : public Error {
 public:
  MissingClass(std::size_t cls, const std::string& what)
      : Error(what), cls_(cls) {}
  std::size_t missing_class() const noexcept { return cls_; }

 private:
  std::size_t cls_;
};

// splitmix64 finalizer; used to derive independent sub-seeds from one trial seed.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) noexcept {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t tag) {
  return Rng{mix_seed(seed, tag)};
}

}  // namespace gdcl
