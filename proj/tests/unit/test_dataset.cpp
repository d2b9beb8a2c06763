// SPDX-License-Identifier: Apache-2.0

#include "trajpred/dataset.hpp"
#include "trajpred/errors.hpp"
#include "trajpred/synthetic.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace trajpred {
namespace {

std::string straight_track(int agent, int steps, int frame_step = 10) {
  std::ostringstream s;
  for (int i = 0; i < steps; ++i) s << i * frame_step << ' ' << agent << ' ' << 0.5 * i << " 1.0\n";
  return s.str();
}

TEST(EthParser, MinimalFile) {
  const auto rec = parse_ethucy_text("0 1 0.0 0.0\n10 1 1.0 0.0\n", "toy");
  ASSERT_EQ(rec.tracks.size(), 1u);
  EXPECT_EQ(rec.tracks[0].frames, (std::vector<int>{0, 10}));
  EXPECT_DOUBLE_EQ(rec.tracks[0].positions[1].x(), 1.0);
  EXPECT_EQ(rec.annotation_count(), 2u);
}

TEST(EthParser, MalformedFieldNamesLine) {
  try {
    parse_ethucy_text("0 1 abc 0.0\n", "toy");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
  try {
    parse_ethucy_text("0 1 0 0\n10 1 0\n", "toy");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(EthParser, DuplicatePairIsDataError) {
  EXPECT_THROW(parse_ethucy_text("0 1 0 0\n0 1 1 1\n", "toy"), DataError);
}

TEST(EthParser, UnsortedInputIsOrdered) {
  const auto rec = parse_ethucy_text("10 2 1 1\n0 1 0 0\n0 2 2 2\n10 1 3 3\n", "toy");
  ASSERT_EQ(rec.tracks.size(), 2u);
  EXPECT_EQ(rec.tracks[0].agent_id, 1);
  EXPECT_EQ(rec.tracks[1].frames, (std::vector<int>{0, 10}));
  EXPECT_DOUBLE_EQ(rec.tracks[1].positions[0].x(), 2.0);
}

TEST(EthParser, WriteReadRoundTrip) {
  SyntheticSceneOptions o;
  o.steps = 60;
  o.seed = 3;
  const auto rec = generate_synthetic_scene(o);
  const auto path = std::filesystem::temp_directory_path() / "trajpred_roundtrip.txt";
  write_ethucy_file(rec, path);
  const auto back = parse_ethucy_file(path);
  std::filesystem::remove(path);
  ASSERT_EQ(back.tracks.size(), rec.tracks.size());
  for (std::size_t a = 0; a < rec.tracks.size(); ++a) {
    EXPECT_EQ(back.tracks[a].frames, rec.tracks[a].frames);
    for (std::size_t i = 0; i < rec.tracks[a].positions.size(); ++i) {
      EXPECT_EQ(back.tracks[a].positions[i], rec.tracks[a].positions[i]);
    }
  }
}

// Counted once from the public ETH scene file; the test runs when the file
// is provided through TRAJPRED_ETH_FILE.
TEST(EthParser, RealEthSceneAgentCount) {
  const char* path = std::getenv("TRAJPRED_ETH_FILE");
  if (!path) GTEST_SKIP() << "TRAJPRED_ETH_FILE not set";
  const auto rec = parse_ethucy_file(path);
  EXPECT_EQ(rec.tracks.size(), 360u);
}

TEST(SddParser, BoxCenterAndLostRows) {
  ParseOptions o{2.5, 12, 1.0};
  const std::string text =
      "1 10 10 20 20 0 0 0 0 \"Pedestrian\"\n"
      "1 12 10 22 20 12 0 0 0 \"Pedestrian\"\n"
      "1 30 30 40 40 24 1 0 0 \"Pedestrian\"\n"
      "2 0 0 2 2 0 0 0 0 \"Biker\"\n"
      "2 0 0 2 2 5 0 0 0 \"Biker\"\n";
  const auto rec = parse_sdd_text(text, "video0", o);
  ASSERT_EQ(rec.tracks.size(), 2u);
  const auto& t1 = rec.tracks[0];
  ASSERT_EQ(t1.frames, (std::vector<int>{0, 12}));
  EXPECT_DOUBLE_EQ(t1.positions[0].x(), 15.0);
  EXPECT_DOUBLE_EQ(t1.positions[0].y(), 15.0);
  EXPECT_DOUBLE_EQ(t1.positions[1].x(), 17.0);
  // Off-cadence frame 5 is dropped.
  EXPECT_EQ(rec.tracks[1].frames.size(), 1u);
}

TEST(SddParser, WrongColumnCount) {
  EXPECT_THROW(parse_sdd_text("1 10 10 20 20 0 0 0\n", "v", ParseOptions{2.5, 12, 1.0}), ParseError);
}

TEST(Kinematics, FiniteDifferences) {
  RowMat p(3, 2);
  p << 0, 0, 1, 0, 3, 0;
  const auto k = estimate_kinematics(p, 0.4);
  const double v[] = {2.5, 2.5, 5.0};
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(k.velocity(i, 0), v[i], 1e-12);
    EXPECT_NEAR(k.acceleration(i, 0), 6.25, 1e-12);
    EXPECT_EQ(k.velocity(i, 1), 0.0);
  }
  RowMat two(2, 2);
  two << 0, 0, 1, 0;
  const auto k2 = estimate_kinematics(two, 0.4);
  EXPECT_NEAR(k2.velocity(0, 0), 2.5, 1e-12);
  EXPECT_NEAR(k2.velocity(1, 0), 2.5, 1e-12);
  EXPECT_TRUE(k2.acceleration.isZero(0.0));
}

TEST(Kinematics, ConstantAndSingle) {
  const auto k = estimate_kinematics(RowMat::Constant(5, 2, 3.0), 0.4);
  EXPECT_TRUE(k.velocity.isZero(0.0));
  EXPECT_TRUE(k.acceleration.isZero(0.0));
  const auto one = estimate_kinematics(RowMat::Constant(1, 2, 3.0), 0.4);
  EXPECT_TRUE(one.velocity.isZero(0.0));
  EXPECT_THROW(estimate_kinematics(RowMat::Zero(2, 2), 0.0), ContractError);
}

TEST(Windows, BoundaryCounts) {
  const WindowOptions w{8, 12, 1};
  EXPECT_EQ(build_windows(parse_ethucy_text(straight_track(1, 20), "s"), w).size(), 1u);
  EXPECT_EQ(build_windows(parse_ethucy_text(straight_track(1, 21), "s"), w).size(), 2u);
  EXPECT_EQ(build_windows(parse_ethucy_text(straight_track(1, 19), "s"), w).size(), 0u);
  EXPECT_EQ(build_windows(parse_ethucy_text(straight_track(1, 30), "s"), WindowOptions{8, 12, 5}).size(), 3u);
}

TEST(Windows, GapBreaksContiguity) {
  std::string text = straight_track(1, 20);
  text += "200 1 10.0 1.0\n";  // next annotation would be 200: contiguous
  text += "230 1 11.0 1.0\n";  // skips 210 and 220
  const auto ws = build_windows(parse_ethucy_text(text, "s"), WindowOptions{8, 12, 1});
  EXPECT_EQ(ws.size(), 2u);
}

TEST(Windows, FeaturesAndNeighbours) {
  std::string text = straight_track(1, 20);
  std::ostringstream other;
  for (int i = 0; i < 8; ++i) other << i * 10 << " 2 0 3\n";
  for (int i = 2; i < 8; ++i) other << i * 10 << " 3 0 4\n";
  const auto ws = build_windows(parse_ethucy_text(text + other.str(), "s"), WindowOptions{8, 12, 1});
  ASSERT_EQ(ws.size(), 1u);
  const auto& s = ws[0];
  EXPECT_EQ(s.X.rows(), 8);
  EXPECT_EQ(s.X.cols(), 6);
  EXPECT_EQ(s.Y.rows(), 12);
  EXPECT_NEAR(s.X(3, 2), 0.5 / 0.4, 1e-12);
  EXPECT_NEAR(s.Y(11, 0), 0.5 * 19, 1e-12);
  ASSERT_EQ(s.neighbors.size(), 1u);  // agent 3 misses the first two frames
  EXPECT_EQ(s.neighbors[0].agent_id, 2);
  EXPECT_EQ(s.observed_frames(), (std::vector<int>{0, 10, 20, 30, 40, 50, 60, 70}));
}

TEST(Rotation, KnownAngles) {
  const auto rec = parse_ethucy_text("0 1 1 0\n0 2 1 1\n", "r");
  const auto r90 = rotate_scene(rec, 90);
  EXPECT_NEAR(r90.tracks[0].positions[0].x(), 0.0, 1e-9);
  EXPECT_NEAR(r90.tracks[0].positions[0].y(), 1.0, 1e-9);
  const auto r30 = rotate_scene(rec, 30);
  const double c = std::cos(M_PI / 6.0);
  const double s = std::sin(M_PI / 6.0);
  EXPECT_NEAR(r30.tracks[1].positions[0].x(), c - s, 1e-12);
  EXPECT_NEAR(r30.tracks[1].positions[0].y(), s + c, 1e-12);
  EXPECT_NEAR(r30.tracks[1].positions[0].x(), 0.3660, 1e-4);
  EXPECT_NEAR(r30.tracks[1].positions[0].y(), 1.3660, 1e-4);
  const auto r0 = rotate_scene(rec, 0);
  EXPECT_EQ(r0.tracks[1].positions[0], rec.tracks[1].positions[0]);
  EXPECT_THROW(rotate_scene(rec, 45), ConfigError);
}

TEST(Rotation, BoundsFollowPositions) {
  SyntheticSceneOptions o;
  o.steps = 40;
  const auto rec = generate_synthetic_scene(o);
  for (int deg = 0; deg < 360; deg += 30) {
    const auto r = rotate_scene(rec, deg);
    for (const auto& t : r.tracks) {
      for (const auto& p : t.positions) {
        EXPECT_GE(p.x(), r.bounds.min.x() + r.margin - 1e-9);
        EXPECT_LE(p.y(), r.bounds.max.y() - r.margin + 1e-9);
      }
    }
  }
}

TEST(Splits, LeaveOneOut) {
  const std::vector<std::string> all{"eth", "hotel", "univ", "zara1", "zara2"};
  const auto s = leave_one_out_split(all, "eth");
  EXPECT_EQ(s.train_scenes.size(), 4u);
  EXPECT_EQ(s.test_scenes, (std::vector<std::string>{"eth"}));
  EXPECT_EQ(std::count(s.train_scenes.begin(), s.train_scenes.end(), "eth"), 0);
  EXPECT_THROW(leave_one_out_split(all, "nowhere"), ConfigError);
}

TEST(Splits, CarveValidationTakesLatestWindows) {
  const auto ws = build_windows(parse_ethucy_text(straight_track(1, 40), "s"), WindowOptions{8, 12, 1});
  ASSERT_EQ(ws.size(), 21u);
  const auto [train, val] = carve_validation(ws, 0.1);
  EXPECT_EQ(val.size(), 2u);
  EXPECT_EQ(train.size(), 19u);
  EXPECT_LT(train.back().t0, val.front().t0);
}

TEST(Splits, ManifestSections) {
  std::ostringstream text;
  text << "# video split\n[train]\n";
  for (int i = 0; i < 36; ++i) text << "scene_video" << i << '\n';
  text << "[val]\n";
  for (int i = 36; i < 48; ++i) text << "scene_video" << i << '\n';
  text << "\n[test]\n";
  for (int i = 48; i < 60; ++i) text << "scene_video" << i << '\n';
  const auto s = parse_split_manifest(text.str());
  EXPECT_EQ(s.train_scenes.size(), 36u);
  EXPECT_EQ(s.val_scenes.size(), 12u);
  EXPECT_EQ(s.test_scenes.size(), 12u);
  std::set<std::string> all(s.train_scenes.begin(), s.train_scenes.end());
  all.insert(s.val_scenes.begin(), s.val_scenes.end());
  all.insert(s.test_scenes.begin(), s.test_scenes.end());
  EXPECT_EQ(all.size(), 60u);

  EXPECT_THROW(parse_split_manifest("[train]\na\n[test]\na\n"), DataError);
  EXPECT_THROW(parse_split_manifest("a\n"), ParseError);
  EXPECT_THROW(parse_split_manifest("[bogus]\n"), ParseError);
}

TEST(Synthetic, SeededAndWellFormed) {
  SyntheticSceneOptions o;
  o.steps = 120;
  o.seed = 11;
  const auto a = generate_synthetic_scene(o);
  const auto b = generate_synthetic_scene(o);
  ASSERT_EQ(a.tracks.size(), b.tracks.size());
  ASSERT_FALSE(a.tracks.empty());
  for (std::size_t i = 0; i < a.tracks.size(); ++i) {
    EXPECT_EQ(a.tracks[i].positions, b.tracks[i].positions);
    for (std::size_t j = 1; j < a.tracks[i].frames.size(); ++j) {
      EXPECT_EQ(a.tracks[i].frames[j] - a.tracks[i].frames[j - 1], o.frame_step);
    }
  }
  EXPECT_FALSE(build_windows(a, WindowOptions{}).empty());
}

}  // namespace
}  // namespace trajpred
