#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace ctlab {

inline constexpr int kNumClasses = 4;

/// Column order of every label vector and probability matrix. Also the tie-break priority.
enum class ClassId : int { Religio = 0, Ethno = 1, Nondenominational = 2, Noncommunal = 3 };

/// Single-decision outcome. NonViolent is the all-below-threshold / all-zeros case.
enum class DecisionLabel : int { Religio = 0, Ethno = 1, Nondenominational = 2, Noncommunal = 3, NonViolent = 4 };

inline constexpr int kNumDecisions = 5;

inline constexpr std::array<std::string_view, kNumClasses> kClassKeys = {
    "religio", "ethno", "nondenominational", "noncommunal"};

inline constexpr std::array<std::string_view, kNumDecisions> kDecisionNames = {
    "Religio", "Ethno", "Nondenominational", "Noncommunal", "NonViolent"};

std::string_view to_string(DecisionLabel d);
std::string_view class_key(ClassId c);
/// Accepts either the class key ("religio") or the decision name ("Religio", "NonViolent").
std::optional<DecisionLabel> parse_decision(std::string_view s);
std::optional<ClassId> parse_class(std::string_view s);

/// Four binary class flags. Noncommunal is exclusive; all zeros means non-violent.
struct LabelVector {
  std::array<std::uint8_t, kNumClasses> flags{};

  std::uint8_t operator[](ClassId c) const { return flags[static_cast<int>(c)]; }
  std::uint8_t& operator[](ClassId c) { return flags[static_cast<int>(c)]; }
  std::uint8_t operator[](int c) const { return flags[c]; }

  bool is_valid() const;
  bool any() const { return flags[0] || flags[1] || flags[2] || flags[3]; }
  /// Throws ValidationError when noncommunal is combined with any other flag or a flag is not 0/1.
  void validate(std::string_view context = {}) const;

  /// Highest-priority positive class, NonViolent when all zero.
  DecisionLabel decision() const;

  static LabelVector from_decision(DecisionLabel d);

  friend bool operator==(const LabelVector&, const LabelVector&) = default;
};

template <typename Scalar>
using ProbMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, kNumClasses>;

template <typename Scalar>
using ClassVector = Eigen::Matrix<Scalar, kNumClasses, 1>;

/// n x 4 independent per-class scores in [0,1], rows aligned with the inputs.
using ProbabilityMatrix = ProbMatrix<double>;
/// n x 4 matrix of 0/1 votes.
using BinaryMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, kNumClasses>;

}  // namespace ctlab
