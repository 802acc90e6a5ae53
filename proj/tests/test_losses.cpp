#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "hoil/losses.hpp"
#include "oracles.hpp"

using namespace hoil;
using ad::Tensor;

namespace {

Tensor unit_rows(std::size_t m, std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> data(m * d);
  for (double& v : data) v = dist(rng);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += data[i * d + j] * data[i * d + j];
    s = std::sqrt(s);
    for (std::size_t j = 0; j < d; ++j) data[i * d + j] /= s;
  }
  return Tensor::from({m, d}, std::move(data));
}

oracle::Matrix to_rows(const Tensor& t) {
  oracle::Matrix rows(t.shape()[0], std::vector<double>(t.shape()[1]));
  for (std::size_t i = 0; i < t.shape()[0]; ++i)
    for (std::size_t j = 0; j < t.shape()[1]; ++j) rows[i][j] = t.data()[i * t.shape()[1] + j];
  return rows;
}

std::vector<std::vector<uint8_t>> to_mask_rows(const std::vector<uint8_t>& flat, std::size_t m) {
  std::vector<std::vector<uint8_t>> rows(m, std::vector<uint8_t>(m));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) rows[i][j] = flat[i * m + j];
  return rows;
}

Tensor basis_targets(std::size_t classes, std::size_t dim) {
  std::vector<double> data(classes * dim, 0.0);
  for (std::size_t c = 0; c < classes; ++c) data[c * dim + c] = 1.0;
  return Tensor::from({classes, dim}, std::move(data));
}

}  // namespace

TEST_CASE("supcon: two identical same-class embeddings give zero loss") {
  Tensor z = Tensor::from({2, 3}, {1, 0, 0, 1, 0, 0});
  ContrastiveBatch batch{z, {0, 0}, mask_from_labels({0, 0}), 0.07};
  CHECK(supcon(batch).item() == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("supcon: anchors without positives are skipped, not zero-counted") {
  std::mt19937_64 rng(1);
  Tensor z = unit_rows(5, 4, rng);
  // labels: {0,0,1,1,2} -> the last anchor has no positives
  const std::vector<int> labels = {0, 0, 1, 1, 2};
  ContrastiveBatch batch{z, labels, mask_from_labels(labels), 0.07};
  const double ours = supcon(batch).item();
  const double ref = oracle::supcon(to_rows(z), to_mask_rows(batch.mask, 5), 0.07);
  CHECK(ours == Catch::Approx(ref).margin(1e-9));
}

TEST_CASE("supcon: matches the brute-force oracle on 100 random batches") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    std::uniform_int_distribution<std::size_t> msize(2, 32);
    std::uniform_int_distribution<int> nclass(1, 4);
    const std::size_t m = msize(rng);
    const int classes = nclass(rng);
    Tensor z = unit_rows(m, 8, rng);
    std::vector<int> labels(m);
    std::uniform_int_distribution<int> lab(0, classes - 1);
    for (auto& l : labels) l = lab(rng);
    const auto mask = mask_from_labels(labels);
    if (!mask_has_positive(mask)) continue;
    ContrastiveBatch batch{z, labels, mask, 0.07};
    const double ref = oracle::supcon(to_rows(z), to_mask_rows(mask, m), 0.07);
    REQUIRE(supcon(batch).item() == Catch::Approx(ref).margin(1e-9));
  }
}

TEST_CASE("supcon: degenerate batches and malformed masks are rejected") {
  std::mt19937_64 rng(3);
  Tensor z = unit_rows(3, 4, rng);
  ContrastiveBatch no_pos{z, {0, 1, 2}, mask_from_labels({0, 1, 2}), 0.07};
  REQUIRE_THROWS_AS(supcon(no_pos), std::invalid_argument);

  std::vector<uint8_t> diag(9, 0);
  diag[0] = 1;  // self-pair
  REQUIRE_THROWS_AS(supcon({z, {}, diag, 0.07}), std::invalid_argument);

  std::vector<uint8_t> asym(9, 0);
  asym[1] = 1;  // (0,1) positive but not (1,0)
  REQUIRE_THROWS_AS(supcon({z, {}, asym, 0.07}), std::invalid_argument);
}

TEST_CASE("supcon: invariant under a common rotation of all embeddings") {
  std::mt19937_64 rng(4);
  Tensor z = unit_rows(10, 6, rng);
  const std::vector<int> labels = {0, 1, 0, 1, 2, 2, 0, 1, 2, 0};
  ContrastiveBatch batch{z, labels, mask_from_labels(labels), 0.07};
  const double base = supcon(batch).item();

  // compose Givens rotations over a few planes
  auto rows = to_rows(z);
  std::uniform_real_distribution<double> angle(0.0, 6.28);
  for (auto [i, j] : std::vector<std::pair<int, int>>{{0, 3}, {1, 4}, {2, 5}, {0, 5}}) {
    const double a = angle(rng), c = std::cos(a), s = std::sin(a);
    for (auto& r : rows) {
      const double vi = r[i], vj = r[j];
      r[i] = c * vi - s * vj;
      r[j] = s * vi + c * vj;
    }
  }
  std::vector<double> data;
  for (const auto& r : rows) data.insert(data.end(), r.begin(), r.end());
  ContrastiveBatch rotated{Tensor::from({10, 6}, std::move(data)), labels, batch.mask, 0.07};
  CHECK(supcon(rotated).item() == Catch::Approx(base).margin(1e-9));
}

TEST_CASE("build_fir_mask: same-category positives only") {
  IndexSets sets;
  sets.fir = {0, 1};
  sets.obj = {2, 3};
  const auto sel = build_fir_mask(sets);
  REQUIRE(sel.indices == std::vector<int>{0, 1, 2, 3});
  const std::size_t m = 4;
  // block diagonal: (0,1) and (2,3) positive, cross pairs negative
  CHECK(sel.mask[0 * m + 1] == 1);
  CHECK(sel.mask[2 * m + 3] == 1);
  CHECK(sel.mask[0 * m + 2] == 0);
  CHECK(sel.mask[1 * m + 3] == 0);
  for (std::size_t i = 0; i < m; ++i) CHECK(sel.mask[i * m + i] == 0);

  SECTION("all FIR gives an all-true off-diagonal") {
    IndexSets only_fir;
    only_fir.fir = {0, 1, 2};
    const auto s = build_fir_mask(only_fir);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) CHECK(s.mask[i * 3 + j] == (i != j ? 1 : 0));
  }

  SECTION("overlapping sets are rejected") {
    IndexSets bad;
    bad.fir = {0, 1};
    bad.obj = {1, 2};
    REQUIRE_THROWS_AS(build_fir_mask(bad), std::invalid_argument);
  }
}

TEST_CASE("build_hoc_mask: human-contact vs object-contact categories") {
  IndexSets sets;
  sets.human_contact = {4, 7};
  sets.object_contact = {9};
  const auto sel = build_hoc_mask(sets);
  REQUIRE(sel.indices == std::vector<int>{4, 7, 9});
  CHECK(sel.mask[0 * 3 + 1] == 1);  // both human contact
  CHECK(sel.mask[0 * 3 + 2] == 0);  // human vs object contact
  CHECK(sel.mask[1 * 3 + 2] == 0);
}

TEST_CASE("part hierarchy: consistent refinement; fine level is the identity") {
  const auto h = PartHierarchy::default_hierarchy();
  REQUIRE(h.levels.size() == 3);
  h.check_consistent();
  for (int p = 0; p < PartLabelSpace::kNumClasses; ++p) CHECK(h.levels[2][p] == p);
  // hands and feet sit in their own middle groups, apart from arms/legs
  CHECK(h.levels[1][kLeftHand] == h.levels[1][kRightHand]);
  CHECK(h.levels[1][kLeftHand] != h.levels[1][kLeftElbow]);
  CHECK(h.levels[1][kLeftFoot] != h.levels[1][kLeftKnee]);

  PartHierarchy broken = h;
  broken.levels[1][kLeftHand] = broken.levels[1][kPelvis];
  std::swap(broken.levels[0], broken.levels[1]);  // middle no longer refines "coarse"
  REQUIRE_THROWS_AS(broken.check_consistent(), std::invalid_argument);
}

TEST_CASE("hmlc: matches the level-weighted oracle; single level reduces to supcon") {
  std::mt19937_64 rng(5);
  Tensor z = unit_rows(12, 8, rng);
  // labels drawn from a small pool so every level has positive pairs
  const std::vector<int> pool = {kLeftHand, kSpine1, PartLabelSpace::kObjectClass,
                                 PartLabelSpace::kBackgroundClass};
  std::vector<int> fine(12);
  for (std::size_t i = 0; i < fine.size(); ++i) fine[i] = pool[i % pool.size()];
  const auto h = PartHierarchy::default_hierarchy();
  const double ref = oracle::hmlc(to_rows(z), fine, h.levels, 0.07);
  CHECK(hmlc(z, fine, h, 0.07).item() == Catch::Approx(ref).margin(1e-9));

  PartHierarchy single;
  single.levels = {h.levels[2]};
  ContrastiveBatch batch{z, fine, mask_from_labels(fine), 0.07};
  CHECK(hmlc(z, fine, single, 0.07).item() == Catch::Approx(supcon(batch).item()).margin(1e-12));
}

TEST_CASE("hmlc: orthogonal coarse classes beat mixed embeddings") {
  // two coarse groups (human part vs object); orthogonal embeddings
  const std::vector<int> fine = {kPelvis, kPelvis, PartLabelSpace::kObjectClass,
                                 PartLabelSpace::kObjectClass};
  Tensor separated = Tensor::from({4, 2}, {1, 0, 1, 0, 0, 1, 0, 1});
  Tensor mixed = Tensor::from({4, 2}, {1, 0, 0, 1, 1, 0, 0, 1});
  const auto h = PartHierarchy::default_hierarchy();
  CHECK(hmlc(separated, fine, h, 0.07).item() < hmlc(mixed, fine, h, 0.07).item());
}

TEST_CASE("tsc: closed forms") {
  SECTION("embedding on its target, others orthogonal, tau = 1") {
    Tensor targets = basis_targets(26, 26);
    Tensor z = Tensor::from({1, 26}, [] {
      std::vector<double> v(26, 0.0);
      v[7] = 1.0;
      return v;
    }());
    const double expected = -std::log(std::exp(1.0) / (std::exp(1.0) + 25.0));
    CHECK(tsc(z, {7}, targets, 1.0).item() == Catch::Approx(expected).margin(1e-12));
  }
  SECTION("uniform similarity to all targets gives log 26") {
    Tensor targets = basis_targets(26, 27);
    std::vector<double> v(27, 0.0);
    v[26] = 1.0;  // orthogonal to every target
    Tensor z = Tensor::from({1, 27}, std::move(v));
    CHECK(tsc(z, {3}, targets, 0.07).item() == Catch::Approx(std::log(26.0)).margin(1e-12));
  }
  SECTION("relabeling invariance") {
    std::mt19937_64 rng(6);
    Tensor z = unit_rows(6, 26, rng);
    Tensor targets = basis_targets(26, 26);
    std::vector<int> labels = {0, 1, 2, 3, 4, 5};
    const double base = tsc(z, labels, targets, 0.07).item();
    // swap classes 0 and 5 in both labels and target rows
    std::vector<double> tdata = targets.data();
    for (int j = 0; j < 26; ++j) std::swap(tdata[0 * 26 + j], tdata[5 * 26 + j]);
    std::vector<int> relabeled = labels;
    for (auto& l : relabeled) l = l == 0 ? 5 : (l == 5 ? 0 : l);
    CHECK(tsc(z, relabeled, Tensor::from({26, 26}, std::move(tdata)), 0.07).item() ==
          Catch::Approx(base).margin(1e-12));
  }
  SECTION("unnormalized targets rejected") {
    Tensor targets = Tensor::from({2, 2}, {2, 0, 0, 1});
    Tensor z = Tensor::from({1, 2}, {1, 0});
    REQUIRE_THROWS_AS(tsc(z, {0}, targets, 0.07), std::invalid_argument);
  }
  SECTION("matches the oracle on random batches") {
    std::mt19937_64 rng(7);
    Tensor targets = make_tsc_targets(26, 16, 99);
    for (int trial = 0; trial < 20; ++trial) {
      Tensor z = unit_rows(10, 16, rng);
      std::vector<int> labels(10);
      std::uniform_int_distribution<int> lab(0, 25);
      for (auto& l : labels) l = lab(rng);
      const double ref = oracle::tsc(to_rows(z), labels, to_rows(targets), 0.07);
      REQUIRE(tsc(z, labels, targets, 0.07).item() == Catch::Approx(ref).margin(1e-9));
    }
  }
}

TEST_CASE("make_tsc_targets: deterministic, unit-norm, well separated") {
  const Tensor a = make_tsc_targets(26, 64, 42);
  const Tensor b = make_tsc_targets(26, 64, 42);
  REQUIRE(a.data() == b.data());
  const auto rows = to_rows(a);
  double max_dot = -1.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(std::abs(oracle::dot(rows[i], rows[i]) - 1.0) < 1e-9);
    for (std::size_t j = 0; j < i; ++j) max_dot = std::max(max_dot, oracle::dot(rows[i], rows[j]));
  }
  CHECK(max_dot < 0.1);
}

namespace {

struct HoiclFixture {
  Tensor z;
  std::vector<int> parts;
  std::vector<uint8_t> contacts;
  HOICLConfig cfg;
  PartHierarchy hierarchy = PartHierarchy::default_hierarchy();
  Tensor targets = make_tsc_targets(26, 8, 7);

  HoiclFixture() {
    std::mt19937_64 rng(8);
    z = unit_rows(32, 8, rng);
    parts.resize(32);
    contacts.resize(32);
    // 8 FIR (hand), 8 torso, 8 object, 8 background; some contacts
    for (int i = 0; i < 32; ++i) {
      if (i < 8) {
        parts[i] = kLeftHand;
        contacts[i] = i < 4;
      } else if (i < 16) {
        parts[i] = kSpine1;
        contacts[i] = 0;
      } else if (i < 24) {
        parts[i] = PartLabelSpace::kObjectClass;
        contacts[i] = i < 20;
      } else {
        parts[i] = PartLabelSpace::kBackgroundClass;
        contacts[i] = 0;
      }
    }
  }
};

}  // namespace

TEST_CASE_METHOD(HoiclFixture, "hoicl: zero fir/hoc weights reduce to the global term") {
  cfg.lambda_fir = 0.0;
  cfg.lambda_hoc = 0.0;
  std::mt19937_64 rng(11);
  const auto r = hoicl(z, parts, contacts, cfg, hierarchy, targets, rng);
  // compare against directly computed global term on the full frame
  const double expected = cfg.lambda_hmlc * hmlc(z, parts, hierarchy, cfg.tau_global).item() +
                          cfg.lambda_tsc * tsc(z, parts, targets, cfg.tau_global).item();
  CHECK(r.total.item() == Catch::Approx(expected).margin(1e-9));
}

TEST_CASE_METHOD(HoiclFixture, "hoicl: object-free frame skips fir and hoc with warnings") {
  for (auto& p : parts)
    if (p == PartLabelSpace::kObjectClass) p = kSpine2;
  for (auto& c : contacts) c = 0;
  std::mt19937_64 rng(12);
  const auto r = hoicl(z, parts, contacts, cfg, hierarchy, targets, rng);
  CHECK(r.breakdown.count("fir") == 0);
  CHECK(r.breakdown.count("hoc") == 0);
  CHECK(r.breakdown.count("hmlc") == 1);
  REQUIRE(r.warnings.size() >= 2);
}

TEST_CASE_METHOD(HoiclFixture, "hoicl: hand-assembled sum of terms matches within 1e-12") {
  std::mt19937_64 rng(13);
  const auto r = hoicl(z, parts, contacts, cfg, hierarchy, targets, rng);
  const double assembled = cfg.lambda_hmlc * r.breakdown.at("hmlc") +
                           cfg.lambda_tsc * r.breakdown.at("tsc") +
                           cfg.lambda_fir * r.breakdown.at("fir") +
                           cfg.lambda_hoc * r.breakdown.at("hoc");
  CHECK(r.total.item() == Catch::Approx(assembled).margin(1e-12));

  // independent recomputation of fir/hoc from the reported selections
  std::vector<std::size_t> fir_rows(r.fir_selection.indices.begin(), r.fir_selection.indices.end());
  const double fir_ref = oracle::supcon(
      to_rows(ad::gather_rows(z, fir_rows)),
      to_mask_rows(r.fir_selection.mask, fir_rows.size()), cfg.tau_fir);
  CHECK(r.breakdown.at("fir") == Catch::Approx(fir_ref).margin(1e-9));
}

TEST_CASE_METHOD(HoiclFixture, "hoicl: respects the per-category sample cap") {
  cfg.sample_cap = 3;
  std::mt19937_64 rng(14);
  const auto r = hoicl(z, parts, contacts, cfg, hierarchy, targets, rng);
  CHECK(r.fir_selection.indices.size() <= 6);   // 3 FIR + 3 object
  CHECK(r.global_selection.size() <= 4 * 3);    // 4 classes, 3 each
}

TEST_CASE("hoicl: empty input is an error, not a silent zero") {
  HOICLConfig cfg;
  std::mt19937_64 rng(15);
  const Tensor z = Tensor::zeros({0, 8});
  REQUIRE_THROWS_AS(
      hoicl(z, {}, {}, cfg, PartHierarchy::default_hierarchy(), make_tsc_targets(26, 8, 1), rng),
      std::invalid_argument);
}

TEST_CASE("cross_entropy: uniform logits and saturated logits") {
  Tensor uniform = Tensor::zeros({4, 26});
  CHECK(cross_entropy(uniform, {0, 5, 12, 25}).item() ==
        Catch::Approx(std::log(26.0)).margin(1e-12));
  std::vector<double> sat(2 * 3, 0.0);
  sat[0 * 3 + 1] = 200.0;
  sat[1 * 3 + 2] = 200.0;
  CHECK(cross_entropy(Tensor::from({2, 3}, std::move(sat)), {1, 2}).item() ==
        Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("cppool_loss: stage arithmetic") {
  // one stage, perfect logits
  std::vector<double> part_logits(4 * 26, 0.0);
  const std::vector<int> labels = {0, 3, 24, 25};
  for (int i = 0; i < 4; ++i) part_logits[i * 26 + labels[i]] = 300.0;
  std::vector<double> contact_logits = {40.0, -40.0, 40.0, 0.0};
  const std::vector<uint8_t> contact = {1, 0, 1, 0};
  const Tensor pl = Tensor::from({4, 26}, std::move(part_logits));
  const Tensor cl = Tensor::from({4, 1}, std::move(contact_logits));

  const double one_stage = cppool_loss({pl}, {cl}, {labels}, {contact}).item();
  CHECK(one_stage == Catch::Approx(0.0).margin(1e-9));  // background contact excluded

  SECTION("uniform part logits cost log 26 per point") {
    const Tensor upl = Tensor::zeros({4, 26});
    const Tensor ucl = Tensor::zeros({4, 1});
    const double v = cppool_loss({upl}, {ucl}, {labels}, {contact}).item();
    CHECK(v == Catch::Approx(std::log(26.0) + std::log(2.0)).margin(1e-12));
  }

  SECTION("two stages sum") {
    const double two = cppool_loss({pl, pl}, {cl, cl}, {labels, labels}, {contact, contact}).item();
    CHECK(two == Catch::Approx(2.0 * one_stage).margin(1e-12));
  }

  SECTION("label propagation mismatch is an error") {
    REQUIRE_THROWS_AS(cppool_loss({pl}, {cl}, {{0, 1}}, {contact}), std::invalid_argument);
  }
}

TEST_CASE("heatmap_kl_loss: identity, one-hot uniform, range handling") {
  HeatmapSpec spec;
  spec.center = {0, 0, 0};
  spec.half_extent = 1.0;
  spec.bins = 16;
  KeypointSet gt;
  gt.coords = {{0.2, -0.4, 0.8}};
  gt.valid = {1};
  gt.contact = {0};

  SECTION("predicted = target distribution gives zero") {
    std::vector<double> logits(1 * 3 * 16);
    for (int a = 0; a < 3; ++a) {
      const auto t = heatmap_target(spec, a, gt.coords[0][a]);
      for (std::size_t b = 0; b < 16; ++b) logits[a * 16 + b] = std::log(t[b] + 1e-300);
    }
    const auto r = heatmap_kl_loss(Tensor::from({1, 3, 16}, std::move(logits)), spec, gt);
    CHECK(r.loss.item() == Catch::Approx(0.0).margin(1e-9));
    CHECK(r.range_warnings == 0);
  }

  SECTION("uniform prediction vs one-hot target costs log(bins)") {
    HeatmapSpec onehot = spec;
    onehot.sigma_bins = 0.0;
    const auto r = heatmap_kl_loss(Tensor::zeros({1, 3, 16}), onehot, gt);
    CHECK(r.loss.item() == Catch::Approx(std::log(16.0)).margin(1e-12));
  }

  SECTION("all keypoints invalid is an error") {
    KeypointSet bad = gt;
    bad.valid = {0};
    REQUIRE_THROWS_AS(heatmap_kl_loss(Tensor::zeros({1, 3, 16}), spec, bad),
                      std::invalid_argument);
  }

  SECTION("out-of-range target clamps to the edge bin with a warning") {
    KeypointSet far = gt;
    far.coords = {{5.0, 0.0, 0.0}};
    const auto r = heatmap_kl_loss(Tensor::zeros({1, 3, 16}), spec, far);
    CHECK(r.range_warnings == 1);
  }
}

TEST_CASE("limb_loss: translation invariance and the doubling case") {
  KeypointSet gt;
  gt.coords = {{0, 0, 0}, {0.3, 0, 0}, {0.3, 0.4, 0}};
  gt.valid = {1, 1, 1};
  gt.contact = {0, 0, 0};
  Skeleton skel;
  skel.edges = {{0, 1}, {1, 2}};
  auto as_tensor = [](const KeypointSet& k) {
    std::vector<double> d;
    for (const auto& c : k.coords) d.insert(d.end(), c.begin(), c.end());
    return Tensor::from({k.size(), 3}, std::move(d));
  };

  CHECK(limb_loss(as_tensor(gt), gt, skel).item() == Catch::Approx(0.0).margin(1e-9));

  KeypointSet shifted = gt;
  for (auto& c : shifted.coords) c = c + Vec3{1.5, -2.0, 0.25};
  CHECK(limb_loss(as_tensor(shifted), gt, skel).item() == Catch::Approx(0.0).margin(1e-9));

  SECTION("pred = 2*gt: direction zero, SmoothL1 length penalty") {
    KeypointSet doubled = gt;
    for (auto& c : doubled.coords) c = 2.0 * c;
    // bones: lengths 0.3 and 0.4 -> doubled 0.6 and 0.8
    const double expected =
        (oracle::smooth_l1(0.6, 0.3) + oracle::smooth_l1(0.8, 0.4)) / 2.0;
    CHECK(limb_loss(as_tensor(doubled), gt, skel).item() ==
          Catch::Approx(expected).margin(1e-9));
  }

  SECTION("bones touching invalid keypoints are excluded; empty set errors") {
    KeypointSet partial = gt;
    partial.valid = {1, 1, 0};
    const Skeleton pruned = prune_skeleton(skel, partial);
    CHECK(limb_loss(as_tensor(gt), partial, pruned).item() == Catch::Approx(0.0).margin(1e-9));
    KeypointSet none = gt;
    none.valid = {0, 0, 0};
    REQUIRE_THROWS_AS(limb_loss(as_tensor(gt), none, prune_skeleton(skel, none)),
                      std::invalid_argument);
  }

  SECTION("direction term is bounded by [0,2] per bone") {
    KeypointSet flipped = gt;
    flipped.coords = {{0, 0, 0}, {-0.3, 0, 0}, {-0.3, -0.4, 0}};
    // exactly opposite directions, equal lengths: dir term = 2, len term = 0
    CHECK(limb_loss(as_tensor(flipped), gt, skel).item() == Catch::Approx(2.0).margin(1e-9));
  }
}

TEST_CASE("loss gradients pass finite-difference checks") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> dist(0.0, 1.0);

  auto make_param = [&](ad::Shape shape) {
    std::vector<double> d(ad::numel(shape));
    for (double& v : d) v = dist(rng);
    return Tensor::from(std::move(shape), std::move(d), true);
  };

  SECTION("supcon / hmlc / tsc through row normalization") {
    Tensor raw = make_param({6, 5});
    ad::Parameter p("raw", raw);
    const std::vector<int> labels = {0, 0, 1, 1, 2, 2};
    const auto mask = mask_from_labels(labels);
    const double e1 = ad::finite_difference_check(
        [&] { return supcon({ad::normalize_rows(raw), labels, mask, 0.07}); }, {&p});
    CHECK(e1 < 1e-4);

    const auto h = PartHierarchy::default_hierarchy();
    const std::vector<int> fine = {kLeftHand, kLeftHand, kSpine1, kSpine1,
                                   PartLabelSpace::kObjectClass, PartLabelSpace::kObjectClass};
    const double e2 = ad::finite_difference_check(
        [&] { return hmlc(ad::normalize_rows(raw), fine, h, 0.07); }, {&p});
    CHECK(e2 < 1e-4);

    const Tensor targets = make_tsc_targets(26, 5, 3);
    const double e3 = ad::finite_difference_check(
        [&] { return tsc(ad::normalize_rows(raw), fine, targets, 0.07); }, {&p});
    CHECK(e3 < 1e-4);
  }

  SECTION("hoicl end to end (fresh rng per evaluation keeps it deterministic)") {
    Tensor raw = make_param({12, 5});
    ad::Parameter p("raw", raw);
    std::vector<int> parts(12);
    std::vector<uint8_t> contacts(12);
    for (int i = 0; i < 12; ++i) {
      parts[i] = i < 4 ? kLeftHand : (i < 8 ? kSpine1 : PartLabelSpace::kObjectClass);
      contacts[i] = (i < 2) || (i >= 8 && i < 10);
    }
    HOICLConfig cfg;
    const auto h = PartHierarchy::default_hierarchy();
    const Tensor targets = make_tsc_targets(26, 5, 4);
    const double err = ad::finite_difference_check(
        [&] {
          std::mt19937_64 local(77);
          return hoicl(ad::normalize_rows(raw), parts, contacts, cfg, h, targets, local).total;
        },
        {&p});
    CHECK(err < 1e-4);
  }

  SECTION("cross entropies and heatmap KL") {
    Tensor logits = make_param({5, 26});
    ad::Parameter p("logits", logits);
    const std::vector<int> labels = {0, 25, 3, 24, 7};
    CHECK(ad::finite_difference_check([&] { return cross_entropy(logits, labels); }, {&p}) < 1e-4);

    Tensor blogits = make_param({5, 1});
    ad::Parameter pb("blogits", blogits);
    const std::vector<uint8_t> targets = {1, 0, 1, 1, 0};
    CHECK(ad::finite_difference_check(
              [&] { return binary_cross_entropy(blogits, targets, balanced_row_weights(targets)); },
              {&pb}) < 1e-4);

    Tensor hlogits = make_param({2, 3, 8});
    ad::Parameter ph("hlogits", hlogits);
    HeatmapSpec spec;
    spec.bins = 8;
    spec.half_extent = 1.0;
    KeypointSet gt;
    gt.coords = {{0.1, -0.2, 0.4}, {0.0, 0.3, -0.5}};
    gt.valid = {1, 1};
    gt.contact = {0, 0};
    CHECK(ad::finite_difference_check(
              [&] { return heatmap_kl_loss(hlogits, spec, gt).loss; }, {&ph}) < 1e-4);
  }

  SECTION("limb loss") {
    Tensor pred = make_param({4, 3});
    ad::Parameter p("pred", pred);
    KeypointSet gt;
    gt.coords = {{0, 0, 0}, {0.3, 0, 0}, {0.3, 0.4, 0}, {0.1, 0.4, 0.3}};
    gt.valid = {1, 1, 1, 1};
    gt.contact = {0, 0, 0, 0};
    Skeleton skel;
    skel.edges = {{0, 1}, {1, 2}, {2, 3}};
    CHECK(ad::finite_difference_check([&] { return limb_loss(pred, gt, skel); }, {&p}) < 1e-4);
  }
}
