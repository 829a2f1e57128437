#include <gtest/gtest.h>

#include "fffsim/layout.hpp"

using namespace fffsim;

namespace {

std::vector<int> lengths(const std::vector<LevelLayout>& l, int level) { return l[level].lengths(); }

}  // namespace

TEST(Layout, EighteenElements) {
  const auto l = compute_level_layout(18, 2, 2);
  ASSERT_EQ(l.size(), 3u);
  EXPECT_EQ(lengths(l, 0), std::vector<int>(18, 1));
  EXPECT_EQ(lengths(l, 1), std::vector<int>(9, 2));
  EXPECT_EQ(lengths(l, 2), (std::vector<int>{4, 4, 4, 6}));
  EXPECT_TRUE(l[2].segments.back().uneven);
  EXPECT_EQ(l[2].layer_thickness, 4);
}

TEST(Layout, NineteenElementsCarriesTheOddTail) {
  const auto l = compute_level_layout(19, 2, 2);
  EXPECT_EQ(lengths(l, 1), (std::vector<int>{2, 2, 2, 2, 2, 2, 2, 2, 3}));
  EXPECT_EQ(lengths(l, 2), (std::vector<int>{4, 4, 4, 4, 3}));
  // the 3 was formed at level 1 and not merged again
  EXPECT_EQ(l[2].segments.back().formed_level, 1);
}

TEST(Layout, PowerOfTwoIsRegular) {
  const auto l = compute_level_layout(16, 2, 3);
  EXPECT_EQ(lengths(l, 3), (std::vector<int>{8, 8}));
  for (const auto& s : l[3].segments) EXPECT_FALSE(s.uneven);
}

TEST(Layout, TooFewToMergeStaysUnchanged) {
  const auto l = compute_level_layout(1, 2, 3);
  for (const auto& lv : l) EXPECT_EQ(lv.lengths(), std::vector<int>{1});
}

TEST(Layout, RejectsBadArguments) {
  EXPECT_THROW(compute_level_layout(0, 2, 1), std::invalid_argument);
  EXPECT_THROW(compute_level_layout(4, 1, 1), std::invalid_argument);
  EXPECT_THROW(compute_level_layout(4, 2, -1), std::invalid_argument);
}

TEST(Layout, ExhaustiveSumsAndUnevenBound) {
  for (int factor : {2, 3}) {
    for (int n = 1; n <= 64; ++n) {
      const auto l = compute_level_layout(n, factor, 4);
      for (const auto& lv : l) {
        EXPECT_EQ(lv.total(), n) << "n=" << n << " level " << lv.level;
        for (const auto& s : lv.segments) {
          EXPECT_GT(s.length, 0);
          if (s.uneven) EXPECT_LE(s.length, max_uneven_length(factor, s.formed_level)) << "n=" << n;
        }
      }
      // boundaries of a level are boundaries of every finer level
      for (std::size_t k = 1; k < l.size(); ++k) {
        const auto coarse = l[k].boundaries();
        const auto fine = l[k - 1].boundaries();
        for (int b : coarse) EXPECT_TRUE(std::find(fine.begin(), fine.end(), b) != fine.end()) << "n=" << n;
      }
    }
  }
}
