// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "faigcn/error.hpp"
#include "faigcn/format.hpp"
#include "faigcn/pose.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace faigcn;

namespace {

std::string keypoint_array(double base) {
  std::string s = "[";
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    if (j) s += ",";
    s += fmt::shortest(base + double(j)) + "," + fmt::shortest(base + 100.0 + double(j)) + ",0.5";
  }
  return s + "]";
}

}  // namespace

TEST_SUITE("pose") {
  TEST_CASE("joint and label names") {
    CHECK(joint_name(JointId::RKnee) == "Right Knee");
    for (std::size_t j = 0; j < kNumJoints; ++j) {
      const auto id = static_cast<JointId>(j);
      CHECK(joint_from_name(joint_name(id)) == id);
    }
    CHECK_FALSE(joint_from_name("Tail").has_value());
    CHECK(label_from_name("abnormal") == Label::Abnormal);
    CHECK_FALSE(label_from_name("sick").has_value());
  }

  TEST_CASE("keypoint documents in all accepted shapes") {
    const auto flat = parse_keypoint_frame(keypoint_array(1.0));
    CHECK(flat[3].x == 4.0);
    CHECK(flat[3].y == 104.0);
    CHECK(flat[3].confidence == 0.5);

    const auto nested = parse_keypoint_frame("[" + keypoint_array(5.0) + "," + keypoint_array(9.0) + "]");
    CHECK(nested[0].x == 5.0);

    const auto people =
        parse_keypoint_frame(R"({"version":1.3,"people":[{"pose_keypoints_2d":)" + keypoint_array(2.0) + "}]}");
    CHECK(people[17].x == 19.0);

    const auto nobody = parse_keypoint_frame(R"({"people":[]})");
    for (const auto& kp : nobody) CHECK(kp.missing());

    CHECK(parse_keypoint_frame(serialize_keypoint_frame(people)) == people);
  }

  TEST_CASE("malformed keypoint documents") {
    CHECK_THROWS_AS(parse_keypoint_frame("[1,2,3]"), FormatError);
    CHECK_THROWS_AS(parse_keypoint_frame("{\"people\": [ {\"pose_keypoints_2d\": [1,2"), ParseError);
    CHECK_THROWS_AS(parse_keypoint_frame("{\"persons\": []}"), FormatError);
    CHECK_THROWS_AS(parse_keypoint_frame("42"), FormatError);
  }

  TEST_CASE("interpolation matches a brute-force oracle exactly") {
    std::mt19937_64 gen(11);
    for (int trial = 0; trial < 100; ++trial) {
      auto seq = testing::random_sequence(gen, 5 + gen() % 40);
      const double p = 0.1 + 0.6 * double(gen() % 100) / 100.0;
      std::bernoulli_distribution mask(p);
      for (auto& fr : seq.frames)
        for (auto& kp : fr)
          if (mask(gen)) kp = {};
      const auto got = interpolate_missing(seq);
      const auto want = testing::brute_force_fill(seq);
      for (std::size_t f = 0; f < seq.frames.size(); ++f)
        for (std::size_t j = 0; j < kNumJoints; ++j) CHECK(got.sequence.frames[f][j] == want.frames[f][j]);
    }
  }

  TEST_CASE("joints missing throughout are reported and zeroed") {
    std::mt19937_64 gen(3);
    auto seq = testing::random_sequence(gen, 10);
    for (auto& fr : seq.frames) fr[index(JointId::LEar)] = {0.0, 0.0, 0.7};
    const auto r = interpolate_missing(seq);
    REQUIRE(r.all_missing.size() == 1);
    CHECK(r.all_missing[0] == JointId::LEar);
    for (const auto& fr : r.sequence.frames) CHECK(fr[index(JointId::LEar)] == Keypoint{});
  }

  TEST_CASE("low-confidence keypoints count as missing under a threshold") {
    std::mt19937_64 gen(5);
    auto seq = testing::random_sequence(gen, 3);
    seq.frames[1][0].confidence = 0.1;
    seq.frames[0][0].confidence = seq.frames[2][0].confidence = 0.9;
    const auto r = interpolate_missing(seq, 0.15);
    CHECK(r.sequence.frames[1][0].x == doctest::Approx((seq.frames[0][0].x + seq.frames[2][0].x) / 2));
    CHECK_THROWS_AS(interpolate_missing(seq, 1.0), ParameterError);
  }

  TEST_CASE("normalization is invariant to rigid motion") {
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
    std::uniform_real_distribution<double> shift(-500.0, 500.0);
    for (int trial = 0; trial < 100; ++trial) {
      PoseSequence a;
      a.frames.push_back(testing::random_frame(gen));
      PoseSequence b = a;
      b.frames[0] = testing::rigid(a.frames[0], ang(gen), shift(gen), shift(gen));
      const auto na = normalize_global(a);
      const auto nb = normalize_global(b);
      for (std::size_t j = 0; j < kNumJoints; ++j) {
        CHECK(std::abs(na.frames[0][j].x - nb.frames[0][j].x) <= 1e-9);
        CHECK(std::abs(na.frames[0][j].y - nb.frames[0][j].y) <= 1e-9);
      }
    }
  }

  TEST_CASE("normalized frames put the body centre at the origin and the neck on +y") {
    std::mt19937_64 gen(23);
    PoseSequence s;
    s.frames.push_back(testing::random_frame(gen));
    const auto n = normalize_global(s).frames[0];
    const double cx = (n[index(JointId::Neck)].x + n[index(JointId::RHip)].x + n[index(JointId::LHip)].x) / 3.0;
    const double cy = (n[index(JointId::Neck)].y + n[index(JointId::RHip)].y + n[index(JointId::LHip)].y) / 3.0;
    CHECK(std::abs(cx) < 1e-9);
    CHECK(std::abs(cy) < 1e-9);
    CHECK(n[index(JointId::Neck)].x == 0.0);
    CHECK(n[index(JointId::Neck)].y > 0.0);
  }

  TEST_CASE("degenerate frames are all listed") {
    std::mt19937_64 gen(29);
    auto seq = testing::random_sequence(gen, 5);
    for (std::size_t f : {1u, 3u}) {
      auto& fr = seq.frames[f];
      fr[index(JointId::Neck)] = {10.0, 10.0, 1.0};
      fr[index(JointId::RHip)] = {5.0, 10.0, 1.0};
      fr[index(JointId::LHip)] = {15.0, 10.0, 1.0};
    }
    try {
      (void)normalize_global(seq);
      FAIL("expected DegenerateFrameError");
    } catch (const DegenerateFrameError& e) {
      CHECK(e.frames() == std::vector<std::size_t>{1, 3});
    }
  }

  TEST_CASE("sequence file round trip") {
    std::mt19937_64 gen(31);
    auto seq = testing::random_sequence(gen, 7, 30.0, "subject-7");
    seq.label = Label::Abnormal;
    for (auto& fr : seq.frames) fr[index(JointId::REar)] = {};
    const std::vector<JointId> missing{JointId::REar};
    const auto text = serialize_sequence(seq, missing);
    const auto back = parse_sequence(text);
    CHECK(back.sequence.subject_id == "subject-7");
    CHECK(back.sequence.fps == 30.0);
    CHECK(back.sequence.label == Label::Abnormal);
    CHECK(back.missing == missing);
    REQUIRE(back.sequence.frames.size() == 7);
    for (std::size_t f = 0; f < 7; ++f)
      for (std::size_t j = 0; j < kNumJoints; ++j) {
        CHECK(back.sequence.frames[f][j].x == seq.frames[f][j].x);
        CHECK(back.sequence.frames[f][j].y == seq.frames[f][j].y);
      }
    CHECK(back.sequence.frames[0][index(JointId::REar)].confidence == 0.0);
    CHECK(back.sequence.frames[0][0].confidence == 1.0);
    CHECK(serialize_sequence(back.sequence, back.missing) == text);
  }

  TEST_CASE("sequence file errors") {
    CHECK_THROWS_AS(parse_sequence("faigcn-sequence 2\n"), FormatError);
    CHECK_THROWS_AS(parse_sequence("faigcn-sequence 1\nsubject_id a\nfps 25\nlabel maybe\nframes 0\nmissing -\n"),
                    FormatError);
    CHECK_THROWS_AS(parse_sequence("faigcn-sequence 1\nsubject_id a\nfps 25\nlabel normal\nframes 2\nmissing -\n"),
                    FormatError);
    PoseSequence bad;
    bad.fps = 12.0;
    bad.frames.resize(1);
    CHECK_THROWS_AS(bad.validate(), FormatError);
  }

  TEST_CASE("keypoint directory loads in filename order") {
    testing::ScratchDir dir("pose");
    fmt::write_file_atomic(dir.path() / "000002.json", keypoint_array(20.0));
    fmt::write_file_atomic(dir.path() / "000001.json", keypoint_array(10.0));
    fmt::write_file_atomic(dir.path() / "notes.txt", "ignored");
    const auto seq = load_keypoint_directory(dir.path(), 25.0, "d", Label::Normal);
    REQUIRE(seq.frames.size() == 2);
    CHECK(seq.frames[0][0].x == 10.0);
    CHECK(seq.frames[1][0].x == 20.0);
    CHECK_THROWS_AS(load_keypoint_directory(dir.path(), 10.0, "d"), FormatError);
  }
}
