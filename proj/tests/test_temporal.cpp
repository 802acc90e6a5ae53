#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "hoil/temporal.hpp"

using namespace hoil;
using namespace hoil::temporal;

namespace {

Trajectory constant_trajectory(std::size_t t_len, std::size_t nk, Vec3 value) {
  KeypointSet frame;
  frame.coords.assign(nk, value);
  frame.valid.assign(nk, 1);
  frame.contact.assign(nk, 0);
  return Trajectory(t_len, frame);
}

Trajectory from_signal(const std::vector<double>& signal) {
  Trajectory traj;
  for (double v : signal) {
    KeypointSet f;
    f.coords = {{v, 0, 0}};
    f.valid = {1};
    f.contact = {0};
    traj.push_back(f);
  }
  return traj;
}

std::vector<double> to_signal(const Trajectory& traj) {
  std::vector<double> out;
  for (const auto& f : traj) out.push_back(f.coords[0][0]);
  return out;
}

}  // namespace

TEST_CASE("constant trajectories are fixed points of all three filters") {
  const FilterConfig cfg;
  const auto traj = constant_trajectory(12, 3, {0.4, -1.2, 2.0});
  for (const auto& filtered :
       {gaussian_smooth(traj, cfg), savitzky_golay(traj, cfg), one_euro(traj, cfg, 0.1)}) {
    for (std::size_t t = 0; t < traj.size(); ++t)
      for (std::size_t k = 0; k < 3; ++k)
        for (int a = 0; a < 3; ++a)
          REQUIRE(filtered[t].coords[k][a] ==
                  Catch::Approx(traj[t].coords[k][a]).margin(1e-12));
  }
}

TEST_CASE("all filters are translation-equivariant") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> signal(20);
  for (double& v : signal) v = d(rng);
  const auto traj = from_signal(signal);
  const Vec3 shift = {2.5, 0, 0};
  auto shifted = traj;
  for (auto& f : shifted) f.coords[0] = f.coords[0] + shift;

  const FilterConfig cfg;
  auto check = [&](const Trajectory& a, const Trajectory& b) {
    for (std::size_t t = 0; t < a.size(); ++t)
      REQUIRE(b[t].coords[0][0] == Catch::Approx(a[t].coords[0][0] + 2.5).margin(1e-9));
  };
  check(gaussian_smooth(traj, cfg), gaussian_smooth(shifted, cfg));
  check(savitzky_golay(traj, cfg), savitzky_golay(shifted, cfg));
  check(one_euro(traj, cfg, 0.1), one_euro(shifted, cfg, 0.1));
}

TEST_CASE("savitzky-golay reproduces polynomials up to its order exactly") {
  FilterConfig cfg;
  cfg.sg_window = 7;
  cfg.sg_order = 3;
  std::vector<double> cubic;
  for (int t = 0; t < 25; ++t) {
    const double x = 0.1 * t;
    cubic.push_back(2.0 - 1.5 * x + 0.8 * x * x - 0.3 * x * x * x);
  }
  const auto filtered = to_signal(savitzky_golay(from_signal(cubic), cfg));
  // interior samples (reflection padding distorts the fit near the edges)
  for (int t = cfg.sg_window / 2; t < 25 - cfg.sg_window / 2; ++t)
    REQUIRE(filtered[t] == Catch::Approx(cubic[t]).margin(1e-9));

  SECTION("coefficients sum to one") {
    const auto coeff = savitzky_golay_coefficients(7, 2);
    double s = 0.0;
    for (double c : coeff) s += c;
    CHECK(s == Catch::Approx(1.0).margin(1e-12));
  }
  SECTION("too-short trajectories are rejected") {
    REQUIRE_THROWS_AS(savitzky_golay(from_signal({1, 2, 3}), cfg), std::invalid_argument);
  }
}

TEST_CASE("gaussian kernel is normalized") {
  // a delta input spreads into weights that sum to 1
  std::vector<double> delta(21, 0.0);
  delta[10] = 1.0;
  FilterConfig cfg;
  const auto filtered = to_signal(gaussian_smooth(from_signal(delta), cfg));
  double s = 0.0;
  for (double v : filtered) s += v;
  CHECK(s == Catch::Approx(1.0).margin(1e-9));  // reflection keeps all the mass
}

TEST_CASE("one-euro: beta=0 is a fixed-cutoff low-pass; lag grows as cutoff falls") {
  std::vector<double> step(30, 0.0);
  for (int t = 10; t < 30; ++t) step[t] = 1.0;
  const auto traj = from_signal(step);
  const double dt = 0.1;

  SECTION("beta=0 matches the manual exponential filter") {
    FilterConfig cfg;
    cfg.one_euro_beta = 0.0;
    cfg.one_euro_min_cutoff = 1.0;
    const auto filtered = to_signal(one_euro(traj, cfg, dt));
    const double tau = 1.0 / (2.0 * M_PI * cfg.one_euro_min_cutoff);
    const double alpha = 1.0 / (1.0 + tau / dt);
    double x_hat = step[0];
    for (std::size_t t = 1; t < step.size(); ++t) {
      x_hat = alpha * step[t] + (1.0 - alpha) * x_hat;
      REQUIRE(filtered[t] == Catch::Approx(x_hat).margin(1e-12));
    }
  }

  SECTION("smaller min_cutoff lags more on a unit step") {
    FilterConfig fast, mid, slow;
    fast.one_euro_beta = mid.one_euro_beta = slow.one_euro_beta = 0.0;
    fast.one_euro_min_cutoff = 4.0;
    mid.one_euro_min_cutoff = 1.0;
    slow.one_euro_min_cutoff = 0.25;
    const auto f = to_signal(one_euro(traj, fast, dt));
    const auto m = to_signal(one_euro(traj, mid, dt));
    const auto s = to_signal(one_euro(traj, slow, dt));
    for (int t = 11; t < 25; ++t) {
      REQUIRE(f[t] > m[t]);
      REQUIRE(m[t] > s[t]);
    }
  }
}

TEST_CASE("ctrefine: identity at initialization and shape preservation") {
  CTRefineConfig cfg;
  cfg.hidden = 32;
  CTRefine model(cfg);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (auto [t_len, nk] : std::vector<std::pair<int, int>>{{4, 2}, {9, 5}, {16, 16}}) {
    Trajectory traj;
    for (int t = 0; t < t_len; ++t) {
      KeypointSet f;
      for (int k = 0; k < nk; ++k) {
        f.coords.push_back({d(rng), d(rng), d(rng)});
        f.valid.push_back(1);
        f.contact.push_back(k % 2);
      }
      traj.push_back(f);
    }
    const auto refined = model.refine(traj);
    REQUIRE(refined.size() == traj.size());
    for (int t = 0; t < t_len; ++t)
      for (int k = 0; k < nk; ++k)
        for (int a = 0; a < 3; ++a)
          REQUIRE(refined[t].coords[k][a] == traj[t].coords[k][a]);  // exact residual identity
  }
}

TEST_CASE("ctrefine: a short training run reduces the denoising loss") {
  CTRefineConfig cfg;
  cfg.hidden = 16;
  cfg.heads = 2;
  cfg.seed = 3;
  CTRefine model(cfg);

  std::mt19937_64 rng(21);
  std::normal_distribution<double> noise(0.0, 0.03);
  std::vector<RefinePair> pairs;
  for (int s = 0; s < 4; ++s) {
    RefinePair pair;
    for (int t = 0; t < 12; ++t) {
      KeypointSet gt;
      for (int k = 0; k < 3; ++k) {
        gt.coords.push_back({0.3 * std::sin(0.4 * t + k), 0.2 * k, 1.0 + 0.1 * std::cos(0.4 * t)});
        gt.valid.push_back(1);
        gt.contact.push_back(0);
      }
      pair.ground_truth.push_back(gt);
      KeypointSet noisy = gt;
      for (auto& c : noisy.coords) c = c + Vec3{noise(rng), noise(rng), noise(rng)};
      pair.noisy.push_back(noisy);
    }
    pairs.push_back(std::move(pair));
  }
  const auto stats = train_ctrefine(model, pairs, 60, 3e-3, 7);
  CHECK(stats.final_loss < stats.initial_loss);
}

TEST_CASE("compare_filters: noiseless input, row order, determinism") {
  // gait-like ground truth with enough frames for every filter
  Trajectory gt;
  for (int t = 0; t < 20; ++t) {
    KeypointSet f;
    f.coords.assign(15, Vec3{0.05 * std::sin(0.3 * t), 0, 1.0});
    f.valid.assign(15, 1);
    f.contact.assign(15, 0);
    f.coords[KeypointNames::kLeftShoulder] = {0.2, 0, 1.4};
    f.coords[KeypointNames::kRightShoulder] = {-0.2, 0, 1.4};
    f.coords[KeypointNames::kLeftHip] = {0.1, 0, 0.9};
    f.coords[KeypointNames::kRightHip] = {-0.1, 0, 0.9};
    gt.push_back(f);
  }
  const FilterConfig cfg;
  const auto rows = compare_filters(gt, gt, cfg, 0.1, KeypointProfile::Smpl15);
  REQUIRE(rows.size() == 4);  // none + 3 filters
  CHECK(rows[0].method == "none");
  CHECK(rows[0].mpjpe_mm == 0.0);

  const auto rows2 = compare_filters(gt, gt, cfg, 0.1, KeypointProfile::Smpl15);
  for (std::size_t i = 0; i < rows.size(); ++i)
    CHECK(rows[i].mpjpe_mm == rows2[i].mpjpe_mm);

  const std::string csv = comparison_csv(rows);
  CHECK(csv.rfind("method,mpjpe_mm,pck3,pck5\n", 0) == 0);

  CTRefine refiner;
  const auto with_ct = compare_filters(gt, gt, cfg, 0.1, KeypointProfile::Smpl15, &refiner);
  REQUIRE(with_ct.size() == 5);
  CHECK(with_ct[4].method == "ctrefine");
  CHECK(with_ct[4].mpjpe_mm == Catch::Approx(0.0).margin(1e-9));  // identity at init
}
