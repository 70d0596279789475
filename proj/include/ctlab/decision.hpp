#pragma once

#include "ctlab/error.hpp"
#include "ctlab/types.hpp"

#include <Eigen/Core>

#include <string>
#include <vector>

namespace ctlab {

inline constexpr double kDefaultThreshold = 0.5;

/// Single decision from four independent class scores.
///
/// NonViolent when every score is below the threshold, otherwise the argmax;
/// ties resolve in class order religio > ethno > nondenominational > noncommunal.
template <typename Derived>
DecisionLabel decide(const Eigen::MatrixBase<Derived>& row, typename Derived::Scalar threshold = kDefaultThreshold) {
  using Scalar = typename Derived::Scalar;
  if (row.size() != kNumClasses) throw ValidationError("decide: expected 4 scores, got " + std::to_string(row.size()));
  int best = -1;
  Scalar best_value = Scalar(0);
  for (int c = 0; c < kNumClasses; ++c) {
    const Scalar v = row(c);
    if (!(v >= Scalar(0) && v <= Scalar(1)))
      throw ValidationError("decide: score " + std::to_string(static_cast<double>(v)) + " outside [0,1]");
    if (v >= threshold && (best < 0 || v > best_value)) {
      best = c;
      best_value = v;
    }
  }
  return best < 0 ? DecisionLabel::NonViolent : static_cast<DecisionLabel>(best);
}

template <typename Derived>
std::vector<DecisionLabel> decide_rows(const Eigen::MatrixBase<Derived>& m, typename Derived::Scalar threshold = kDefaultThreshold) {
  std::vector<DecisionLabel> out;
  out.reserve(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(decide(m.row(i), threshold));
  return out;
}

/// Cellwise score >= threshold.
template <typename Derived>
BinaryMatrix binarize(const Eigen::MatrixBase<Derived>& m, typename Derived::Scalar threshold = kDefaultThreshold) {
  return (m.array() >= threshold).template cast<std::uint8_t>();
}

}  // namespace ctlab
