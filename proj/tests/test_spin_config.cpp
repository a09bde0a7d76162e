#include <gtest/gtest.h>

#include <sstream>

#include "toomdtc/spin_config.hpp"

using namespace toomdtc;

TEST(SpinConfig, DimensionsAndIndexing) {
  SpinConfig c(5, 3);
  EXPECT_EQ(c.size(), 15u);
  c.set(4, 2, -1);
  EXPECT_EQ(c.at(4, 2), -1);
  EXPECT_EQ(c.cells()[2 * 5 + 4], -1);
  EXPECT_THROW(c.at(5, 0), std::out_of_range);
  EXPECT_THROW(c.set(0, 3, 1), std::out_of_range);
  EXPECT_THROW(c.set(0, 0, 0), std::invalid_argument);
  EXPECT_THROW(SpinConfig(0, 3), std::invalid_argument);
  EXPECT_TRUE(c.valid());
}

TEST(SpinConfig, PeriodicAndFixedNeighbours) {
  SpinConfig p(3, 3);
  p.set(0, 0, -1);
  EXPECT_EQ(p.neighbor(3, 3), -1);
  EXPECT_EQ(p.neighbor(-3, 0), -1);
  SpinConfig f(3, 3, +1, Boundary::fixed, -1);
  EXPECT_EQ(f.neighbor(3, 0), -1);
  EXPECT_EQ(f.neighbor(2, 2), +1);
}

TEST(SpinConfig, NegateAndCheckerboard) {
  const auto cb = checkerboard(4, 4);
  EXPECT_EQ(cb.at(0, 0), 1);
  EXPECT_EQ(cb.at(1, 0), -1);
  const auto n = negate(cb);
  for (std::size_t i = 0; i < cb.size(); ++i) EXPECT_EQ(n.cells()[i], -cb.cells()[i]);
  EXPECT_EQ(negate(n), cb);
}

TEST(SpinConfig, TextRoundTrip) {
  SpinConfig c(4, 2);
  c.set(1, 0, -1);
  c.set(3, 1, -1);
  EXPECT_EQ(to_text(c), "+-++\n+++-\n");
  std::istringstream in(to_text(c));
  EXPECT_EQ(read_text(in), c);
}

TEST(SpinConfig, TextRejectsRaggedRowsAndBadCharacters) {
  std::istringstream ragged("++\n+\n");
  EXPECT_ANY_THROW(read_text(ragged));
  std::istringstream bad("+x\n");
  EXPECT_ANY_THROW(read_text(bad));
}

TEST(SpinConfig, BinaryHeaderLayout) {
  SpinConfig c(9, 2, -1);
  c.set(0, 0, +1);
  c.set(8, 0, +1);
  std::ostringstream os;
  write_binary(os, c, 0x01020304);
  const std::string b = os.str();
  ASSERT_EQ(b.size(), 16u + 3u);
  EXPECT_EQ(b.substr(0, 4), "PCA1");
  EXPECT_EQ(static_cast<unsigned char>(b[4]), 9);
  EXPECT_EQ(static_cast<unsigned char>(b[8]), 2);
  EXPECT_EQ(static_cast<unsigned char>(b[12]), 0x04);
  EXPECT_EQ(static_cast<unsigned char>(b[15]), 0x01);
  EXPECT_EQ(static_cast<unsigned char>(b[16]), 0x01);  // cell 0
  EXPECT_EQ(static_cast<unsigned char>(b[17]), 0x01);  // cell 8
}

TEST(SpinConfig, BinaryRoundTrip) {
  SpinConfig c = checkerboard(13, 7);
  c.set(12, 6, -1);
  std::stringstream ss;
  write_binary(ss, c, 77);
  const auto back = read_binary(ss);
  EXPECT_EQ(back.config, c);
  EXPECT_EQ(back.step, 77u);
}

TEST(SpinConfig, BinaryRejectsBadMagicAndTruncation) {
  std::istringstream bad(std::string("PCA2") + std::string(12, '\0'));
  EXPECT_ANY_THROW(read_binary(bad));
  std::ostringstream os;
  write_binary(os, SpinConfig(16, 16), 0);
  std::istringstream cut(os.str().substr(0, 20));
  EXPECT_ANY_THROW(read_binary(cut));
}
