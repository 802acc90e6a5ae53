#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "hoil/metrics.hpp"

using namespace hoil;

namespace {

KeypointSet standard_pose() {
  KeypointSet k;
  k.coords.assign(15, Vec3{0, 0, 1.0});
  k.valid.assign(15, 1);
  k.contact.assign(15, 0);
  k.coords[KeypointNames::kLeftShoulder] = {0.2, 0, 1.4};
  k.coords[KeypointNames::kRightShoulder] = {-0.2, 0, 1.4};
  k.coords[KeypointNames::kLeftHip] = {0.1, 0, 0.9};
  k.coords[KeypointNames::kRightHip] = {-0.1, 0, 0.9};
  return k;  // torso length 0.5
}

}  // namespace

TEST_CASE("mpjpe: exact cases") {
  const KeypointSet gt = standard_pose();
  CHECK(mpjpe({gt}, {gt}) == 0.0);

  SECTION("uniform 10 mm offset gives 10.0") {
    KeypointSet pred = gt;
    for (auto& c : pred.coords) c = c + Vec3{0.01, 0, 0};
    CHECK(mpjpe({pred}, {gt}) == Catch::Approx(10.0).margin(1e-9));
  }
  SECTION("errors 0 and 20 mm average to 10") {
    KeypointSet gt2;
    gt2.coords = {{0, 0, 0}, {1, 0, 0}};
    gt2.valid = {1, 1};
    gt2.contact = {0, 0};
    KeypointSet pred = gt2;
    pred.coords[1] = {1, 0.02, 0};
    CHECK(mpjpe({pred}, {gt2}) == Catch::Approx(10.0).margin(1e-9));
  }
  SECTION("zero valid pairs is an error") {
    KeypointSet none = gt;
    none.valid.assign(15, 0);
    REQUIRE_THROWS_AS(mpjpe({gt}, {none}), std::invalid_argument);
  }
  SECTION("symmetric in its arguments") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> d(-0.05, 0.05);
    KeypointSet pred = gt;
    for (auto& c : pred.coords) c = c + Vec3{d(rng), d(rng), d(rng)};
    CHECK(mpjpe({pred}, {gt}) == Catch::Approx(mpjpe({gt}, {pred})).margin(1e-12));
  }
  SECTION("invariant to a consistent joint permutation") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> d(-0.05, 0.05);
    KeypointSet pred = gt;
    for (auto& c : pred.coords) c = c + Vec3{d(rng), d(rng), d(rng)};
    const double base = mpjpe({pred}, {gt});
    KeypointSet predp = pred, gtp = gt;
    std::reverse(predp.coords.begin(), predp.coords.end());
    std::reverse(gtp.coords.begin(), gtp.coords.end());
    CHECK(mpjpe({predp}, {gtp}) == Catch::Approx(base).margin(1e-12));
  }
}

TEST_CASE("pck: threshold behavior") {
  const KeypointSet gt = standard_pose();  // torso 0.5

  SECTION("perfect prediction scores 100") {
    CHECK(pck({gt}, {gt}, 0.3, KeypointProfile::Smpl15) == 100.0);
  }
  SECTION("errors exactly at the threshold fail the strict comparison") {
    // fraction 0.25 of torso 0.5 = 0.125, exactly representable
    KeypointSet pred = gt;
    for (auto& c : pred.coords) c = c + Vec3{0.125, 0, 0};
    CHECK(pck({pred}, {gt}, 0.25, KeypointProfile::Smpl15) == 0.0);
  }
  SECTION("3 of 4 joints within threshold gives 75") {
    KeypointSet gt2 = standard_pose();
    gt2.valid.assign(15, 0);
    // keep shoulders/hips valid for the torso plus nothing else; use 4 joints
    gt2.valid[KeypointNames::kLeftShoulder] = gt2.valid[KeypointNames::kRightShoulder] = 1;
    gt2.valid[KeypointNames::kLeftHip] = gt2.valid[KeypointNames::kRightHip] = 1;
    KeypointSet pred = gt2;
    pred.coords[KeypointNames::kLeftShoulder] = gt2.coords[KeypointNames::kLeftShoulder] +
                                                Vec3{1.0, 0, 0};  // far out
    CHECK(pck({pred}, {gt2}, 0.3, KeypointProfile::Smpl15) == 75.0);
  }
  SECTION("degenerate torso excludes the frame with a warning") {
    KeypointSet degenerate;
    degenerate.coords.assign(15, Vec3{0, 0, 0});
    degenerate.valid.assign(15, 1);
    degenerate.contact.assign(15, 0);
    std::vector<std::string> warnings;
    const double v = pck({gt, degenerate}, {gt, degenerate}, 0.3, KeypointProfile::Smpl15,
                         &warnings);
    CHECK(v == 100.0);  // only the good frame counts
    REQUIRE(warnings.size() == 1);
    // all frames degenerate -> error
    REQUIRE_THROWS_AS(pck({degenerate}, {degenerate}, 0.3, KeypointProfile::Smpl15),
                      std::invalid_argument);
  }
}

TEST_CASE("pck5 >= pck3 on 100 random reports") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> noise(-0.2, 0.2);
  for (int trial = 0; trial < 100; ++trial) {
    const KeypointSet gt = standard_pose();
    KeypointSet pred = gt;
    for (auto& c : pred.coords) c = c + Vec3{noise(rng), noise(rng), noise(rng)};
    const auto report = evaluate_pose({pred}, {gt}, KeypointProfile::Smpl15);
    REQUIRE(report.pck5 >= report.pck3);
    REQUIRE(report.pck3 >= 0.0);
    REQUIRE(report.pck5 <= 100.0);
  }
}

TEST_CASE("per_joint_error: absent joints marked NaN") {
  KeypointSet gt = standard_pose();
  gt.valid[3] = 0;
  KeypointSet pred = gt;
  pred.coords[0] = gt.coords[0] + Vec3{0.02, 0, 0};
  const auto pj = per_joint_error({pred}, {gt});
  CHECK(pj[0] == Catch::Approx(20.0).margin(1e-9));
  CHECK(pj[1] == 0.0);
  CHECK(std::isnan(pj[3]));
}

TEST_CASE("seg_accuracy and pearson") {
  CHECK(seg_accuracy({1, 2, 3}, {1, 2, 3}) == 100.0);
  CHECK(seg_accuracy({1, 2, 3, 4}, {1, 2, 0, 0}) == 50.0);

  SECTION("zero variance is undefined, not a number") {
    CHECK_FALSE(pearson({1, 1, 1}, {1, 2, 3}).has_value());
    CHECK_FALSE(pearson({1, 2, 3}, {5, 5, 5}).has_value());
  }
  SECTION("anti-correlated series approaches -1") {
    std::vector<double> x, y;
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> d(-1e-9, 1e-9);
    for (int i = 0; i < 50; ++i) {
      x.push_back(i);
      y.push_back(-static_cast<double>(i) + d(rng));
    }
    const auto r = pearson(x, y);
    REQUIRE(r.has_value());
    CHECK(*r == Catch::Approx(-1.0).margin(1e-6));
  }
  SECTION("needs 3 samples") {
    REQUIRE_THROWS_AS(pearson({1, 2}, {3, 4}), std::invalid_argument);
  }
}

TEST_CASE("CSV formats follow the documented schemas") {
  const KeypointSet gt = standard_pose();
  KeypointSet pred = gt;
  pred.coords[0] = gt.coords[0] + Vec3{0.015, 0, 0};
  const auto report = evaluate_pose({pred}, {gt}, KeypointProfile::Smpl15);

  const std::string csv = report_csv(report);
  CHECK(csv.rfind("metric,value\n", 0) == 0);
  CHECK(csv.find("mpjpe_mm,") != std::string::npos);
  CHECK(csv.find("pck3,") != std::string::npos);
  CHECK(csv.find("pck5,") != std::string::npos);

  const std::string pj = per_joint_csv(report, KeypointProfile::Smpl15);
  CHECK(pj.rfind("joint_index,joint_name,error_mm\n", 0) == 0);
  CHECK(pj.find("0,pelvis,") != std::string::npos);
  CHECK(pj.find("14,right_wrist,") != std::string::npos);
}
