#include "ctlab/types.hpp"

#include "ctlab/error.hpp"

namespace ctlab {

std::string_view to_string(DecisionLabel d) { return kDecisionNames[static_cast<int>(d)]; }

std::string_view class_key(ClassId c) { return kClassKeys[static_cast<int>(c)]; }

std::optional<DecisionLabel> parse_decision(std::string_view s) {
  for (int i = 0; i < kNumDecisions; ++i)
    if (s == kDecisionNames[i]) return static_cast<DecisionLabel>(i);
  for (int i = 0; i < kNumClasses; ++i)
    if (s == kClassKeys[i]) return static_cast<DecisionLabel>(i);
  if (s == "nonviolent" || s == "Non Violent") return DecisionLabel::NonViolent;
  return std::nullopt;
}

std::optional<ClassId> parse_class(std::string_view s) {
  auto d = parse_decision(s);
  if (!d || *d == DecisionLabel::NonViolent) return std::nullopt;
  return static_cast<ClassId>(static_cast<int>(*d));
}

bool LabelVector::is_valid() const {
  for (auto f : flags)
    if (f > 1) return false;
  if (flags[3] && (flags[0] || flags[1] || flags[2])) return false;
  return true;
}

void LabelVector::validate(std::string_view context) const {
  for (auto f : flags)
    if (f > 1) throw ValidationError(std::string(context) + (context.empty() ? "" : ": ") + "label flags must be 0 or 1");
  if (!is_valid())
    throw ValidationError(std::string(context) + (context.empty() ? "" : ": ") +
                          "noncommunal cannot be combined with another class");
}

DecisionLabel LabelVector::decision() const {
  for (int c = 0; c < kNumClasses; ++c)
    if (flags[c]) return static_cast<DecisionLabel>(c);
  return DecisionLabel::NonViolent;
}

LabelVector LabelVector::from_decision(DecisionLabel d) {
  LabelVector v;
  if (d != DecisionLabel::NonViolent) v.flags[static_cast<int>(d)] = 1;
  return v;
}

}  // namespace ctlab
