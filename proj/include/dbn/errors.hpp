#pragma once

#include <stdexcept>
#include <string>

namespace dbn {

// Shape or index violation in a model, circuit, or data container.
class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid hyperparameter, unknown key, or unknown pass/split name.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing, truncated, or malformed input file.
class IngestionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// API called in the wrong order (e.g. backward without a forward cache).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A gate's cone has more support variables than the configured limit.
class OversizedConeError : public std::runtime_error {
 public:
  OversizedConeError(std::size_t layer, std::size_t gate, std::size_t support)
      : std::runtime_error("cone of layer " + std::to_string(layer) + " gate " +
                           std::to_string(gate) + " has " + std::to_string(support) +
                           " support variables, above the configured limit"),
        layer_(layer),
        gate_(gate),
        support_(support) {}

  std::size_t layer() const { return layer_; }
  std::size_t gate() const { return gate_; }
  std::size_t support() const { return support_; }

 private:
  std::size_t layer_;
  std::size_t gate_;
  std::size_t support_;
};

}  // namespace dbn
