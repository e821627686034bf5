#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lapmrf {

// Bad sizes or index ranges: builder dimensions, configuration length,
// elimination orders that are not permutations.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A clique argument that is not one of the model's maximal cliques.
struct InvalidCliqueError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct EmptyDatasetError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Model too big for full-state enumeration.
struct TooLargeError : std::runtime_error {
  int num_vars;
  int cap;
  TooLargeError(int nv, int c)
      : std::runtime_error("model has " + std::to_string(nv) +
                           " variables, above the enumeration cap of " +
                           std::to_string(c)),
        num_vars(nv),
        cap(c) {}
};

// Elimination produced a bucket bigger than the configured memory cap.
struct WidthExceededError : std::runtime_error {
  std::size_t bucket_entries;
  std::size_t cap;
  WidthExceededError(std::size_t entries, std::size_t c)
      : std::runtime_error("elimination bucket needs " + std::to_string(entries) +
                           " table entries, cap is " + std::to_string(c)),
        bucket_entries(entries),
        cap(c) {}
};

// Probability table with a zero or negative entry where positivity is required.
struct PositivityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Objective returned a non-finite value; `point` is where it happened,
// when known.
struct NumericalError : std::runtime_error {
  std::vector<double> point;
  explicit NumericalError(const std::string& what, std::vector<double> at = {})
      : std::runtime_error(what), point(std::move(at)) {}
};

// Auxiliary construction would enumerate too many subsets.
struct AuxiliaryTooLargeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Failure inside one LAP sub-problem, tagged with the offending clique.
struct SubproblemError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace lapmrf
