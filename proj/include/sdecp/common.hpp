#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sdecp {

// Error categories map onto CLI exit codes: config -> 1, data -> 2,
// numeric -> 3.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Half-open increment range (lo, hi]: covers increments i with lo < i <= hi,
// i.e. observations X_{lo}..X_{hi}. Increment i is X_{t_i} - X_{t_{i-1}}.
struct IndexRange {
  std::int64_t lo = 0;
  std::int64_t hi = 0;

  std::int64_t length() const { return hi - lo; }
  bool contains(std::int64_t i) const { return i > lo && i <= hi; }
};

// Non-fatal conditions accumulated by estimators and the pipeline.
using Warnings = std::vector<std::string>;

}  // namespace sdecp
