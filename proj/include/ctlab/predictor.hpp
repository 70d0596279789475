#pragma once

#include "ctlab/types.hpp"

#include <span>
#include <string>

namespace ctlab {

/// Anything that scores texts with four independent class probabilities.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual ProbabilityMatrix predict(std::span<const std::string> texts) const = 0;
  virtual std::string name() const { return "predictor"; }
};

}  // namespace ctlab
