#include "ctlab/decision.hpp"
#include "ctlab/error.hpp"
#include "ctlab/random.hpp"
#include "ctlab/types.hpp"

#include <doctest.h>

using namespace ctlab;

namespace {

LabelVector lv(int r, int e, int n, int c) {
  LabelVector l;
  l.flags = {std::uint8_t(r), std::uint8_t(e), std::uint8_t(n), std::uint8_t(c)};
  return l;
}

}  // namespace

TEST_CASE("noncommunal is exclusive") {
  CHECK(lv(0, 0, 0, 1).is_valid());
  CHECK(lv(1, 1, 1, 0).is_valid());
  CHECK(lv(0, 0, 0, 0).is_valid());
  CHECK_FALSE(lv(1, 0, 0, 1).is_valid());
  CHECK_THROWS_AS(lv(0, 1, 0, 1).validate("row 3"), ValidationError);
  CHECK_FALSE(lv(2, 0, 0, 0).is_valid());
}

TEST_CASE("decision priority for overlapping violent labels") {
  CHECK(lv(1, 1, 0, 0).decision() == DecisionLabel::Religio);
  CHECK(lv(0, 1, 1, 0).decision() == DecisionLabel::Ethno);
  CHECK(lv(0, 0, 1, 0).decision() == DecisionLabel::Nondenominational);
  CHECK(lv(0, 0, 0, 0).decision() == DecisionLabel::NonViolent);
  for (int d = 0; d < kNumDecisions; ++d)
    CHECK(LabelVector::from_decision(static_cast<DecisionLabel>(d)).decision() == static_cast<DecisionLabel>(d));
}

TEST_CASE("decision names parse both spellings") {
  CHECK(parse_decision("religio") == DecisionLabel::Religio);
  CHECK(parse_decision("NonViolent") == DecisionLabel::NonViolent);
  CHECK_FALSE(parse_decision("violent").has_value());
  CHECK(parse_class("nondenominational") == ClassId::Nondenominational);
}

TEST_CASE("decide: below threshold is non-violent, ties go to class order") {
  Eigen::RowVector4d row(0.2, 0.3, 0.1, 0.49);
  CHECK(decide(row, 0.5) == DecisionLabel::NonViolent);
  row << 0.7, 0.7, 0.1, 0.2;
  CHECK(decide(row, 0.5) == DecisionLabel::Religio);
  row << 0.1, 0.6, 0.1, 0.9;
  CHECK(decide(row, 0.5) == DecisionLabel::Noncommunal);
  row << 0.1, 1.2, 0.1, 0.9;
  CHECK_THROWS_AS(decide(row, 0.5), ValidationError);
}

TEST_CASE("decide agrees with an argmax oracle on random rows") {
  Rng rng(3);
  for (int t = 0; t < 2000; ++t) {
    Eigen::RowVector4d row;
    for (int c = 0; c < 4; ++c) row(c) = std::round(rng.uniform() * 20) / 20;
    int best = -1;
    for (int c = 0; c < 4; ++c)
      if (row(c) >= 0.5 && (best < 0 || row(c) > row(best))) best = c;
    const auto want = best < 0 ? DecisionLabel::NonViolent : static_cast<DecisionLabel>(best);
    CHECK(decide(row, 0.5) == want);
  }
}

TEST_CASE("rng substreams are independent and reproducible") {
  Rng a = Rng::substream(7, "split"), b = Rng::substream(7, "split"), c = Rng::substream(7, "train");
  const auto x = a.next();
  CHECK(x == b.next());
  CHECK(x != c.next());
  Rng r(1);
  for (int i = 0; i < 1000; ++i) {
    const auto v = r.below(7);
    CHECK(v < 7);
    const double u = r.uniform();
    CHECK((u >= 0.0 && u < 1.0));
  }
}
