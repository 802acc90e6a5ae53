#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "hoil/pipeline/report.hpp"

using namespace hoil;
using namespace hoil::pipeline;
namespace fs = std::filesystem;

namespace {

std::string read_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is);
  return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

json toy_config_json() {
  return json::parse(R"({
    "seed": 9,
    "keypoint_profile": "smpl15obj",
    "model": {
      "channels": [16, 16, 24],
      "num_stages": 2,
      "projection_dim": 16,
      "base_grid_size": 0.08,
      "attention_window": 8,
      "heatmap_bins": 32
    },
    "hoicl": { "sample_cap": 8 },
    "optimizer": { "batch": 4, "epochs": 2 },
    "simulator": { "azimuth_step_deg": 1.2, "elevation_step_deg": 1.2 }
  })");
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("hoil_pipe_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("config: defaults, unknown keys, and seed override") {
  const RunConfig defaults = parse_config(json::object());
  CHECK(defaults.optimizer.lr_pretrain == 3e-4);
  CHECK(defaults.optimizer.lr_finetune == 5e-4);
  CHECK(defaults.hoicl.sample_cap == 128);
  CHECK(defaults.contact.threshold == 0.05);
  CHECK(defaults.model.cppool.part_weights[kLeftHand] == 4.0);

  SECTION("unknown root key is an error") {
    json j;
    j["optimizr"] = json::object();
    REQUIRE_THROWS_WITH(parse_config(j), Catch::Matchers::ContainsSubstring("optimizr"));
  }
  SECTION("unknown nested key is an error") {
    json j;
    j["model"]["chanels"] = {8, 8};
    REQUIRE_THROWS_WITH(parse_config(j), Catch::Matchers::ContainsSubstring("chanels"));
  }
  SECTION("HOIL_SEED overrides the configured seed") {
    TempDir tmp;
    const auto cfg_path = tmp.path / "c.json";
    std::ofstream(cfg_path) << toy_config_json().dump();
    setenv("HOIL_SEED", "777", 1);
    const RunConfig cfg = load_config(cfg_path.string());
    unsetenv("HOIL_SEED");
    CHECK(cfg.seed == 777);
  }
  SECTION("profile drives the keypoint count") {
    json j;
    j["keypoint_profile"] = "waymo14";
    CHECK(parse_config(j).model.num_keypoints == 14);
  }
}

TEST_CASE("frame record: write-read-write is byte identical") {
  TempDir tmp;
  FrameRecord rec;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  for (int i = 0; i < 37; ++i) {
    rec.cloud.cloud.coords.push_back({d(rng), d(rng), d(rng)});
    rec.cloud.part.push_back(i % 26);
    rec.cloud.contact.push_back(i % 26 == PartLabelSpace::kBackgroundClass ? 0 : i % 2);
    rec.cloud.face_id.push_back(-1);
  }
  for (int k = 0; k < 16; ++k) {
    rec.keypoints.coords.push_back({d(rng), d(rng), d(rng)});
    rec.keypoints.valid.push_back(1);
    rec.keypoints.contact.push_back(k % 2);
  }
  rec.frame_index = 12;

  const auto p1 = tmp.path / "a.bin";
  const auto p2 = tmp.path / "b.bin";
  write_frame_record(p1.string(), rec);
  const FrameRecord loaded = read_frame_record(p1.string());
  CHECK(loaded.frame_index == 12);
  CHECK(loaded.cloud.part == rec.cloud.part);
  CHECK(loaded.keypoints.valid == rec.keypoints.valid);
  write_frame_record(p2.string(), loaded);
  REQUIRE(read_bytes(p1) == read_bytes(p2));

  SECTION("truncated file is rejected") {
    auto bytes = read_bytes(p1);
    std::ofstream(tmp.path / "trunc.bin", std::ios::binary)
        << bytes.substr(0, bytes.size() - 5);
    REQUIRE_THROWS_WITH(read_frame_record((tmp.path / "trunc.bin").string()),
                        Catch::Matchers::ContainsSubstring("shorter"));
  }
  SECTION("trailing bytes are rejected") {
    auto bytes = read_bytes(p1);
    std::ofstream(tmp.path / "long.bin", std::ios::binary) << bytes << "xx";
    REQUIRE_THROWS_WITH(read_frame_record((tmp.path / "long.bin").string()),
                        Catch::Matchers::ContainsSubstring("trailing"));
  }
  SECTION("bad magic is rejected") {
    std::ofstream(tmp.path / "bad.bin", std::ios::binary) << "NOTMAGIC" << read_bytes(p1);
    REQUIRE_THROWS_WITH(read_frame_record((tmp.path / "bad.bin").string()),
                        Catch::Matchers::ContainsSubstring("magic"));
  }
}

TEST_CASE("simulate_sequence: determinism and labeling sanity") {
  TempDir tmp;
  const RunConfig cfg = parse_config(toy_config_json());
  const auto dir1 = tmp.path / "seq1";
  const auto dir2 = tmp.path / "seq2";
  const auto m1 = simulate_sequence(cfg, 5, dir1.string());
  const auto m2 = simulate_sequence(cfg, 5, dir2.string());
  REQUIRE(m1.frame_files.size() == 5);
  for (std::size_t i = 0; i < 5; ++i)
    REQUIRE(read_bytes(dir1 / m1.frame_files[i]) == read_bytes(dir2 / m2.frame_files[i]));
  REQUIRE(read_bytes(dir1 / "manifest.json") == read_bytes(dir2 / "manifest.json"));

  const Dataset ds = load_dataset(dir1.string(), /*center=*/false);
  REQUIRE(ds.frames.size() == 5);
  for (const auto& rec : ds.frames) {
    CHECK(validate(rec.cloud).empty());
    CHECK(rec.keypoints.size() == 16);
    // cropped cloud still shows the human
    std::size_t human = 0;
    for (int p : rec.cloud.part) human += p < PartLabelSpace::kNumBodyParts;
    CHECK(human > 30);
  }

  SECTION("training load centers each frame at the cloud centroid") {
    const Dataset centered = load_dataset(dir1.string(), /*center=*/true);
    for (const auto& rec : centered.frames) {
      Vec3 c = {0, 0, 0};
      for (const auto& p : rec.cloud.cloud.coords) c = c + p;
      c = (1.0 / static_cast<double>(rec.cloud.size())) * c;
      CHECK(std::abs(c[0]) < 1e-9);
      CHECK(std::abs(c[1]) < 1e-9);
      CHECK(std::abs(c[2]) < 1e-9);
    }
  }
}

TEST_CASE("dataset mix: ratios drive draw frequencies") {
  SECTION("single source takes every draw") {
    DatasetMix mix({10}, {1.0}, 3);
    for (int i = 0; i < 100; ++i) REQUIRE(mix.draw().first == 0);
  }
  SECTION("equal ratios split within the binomial band") {
    DatasetMix mix({100, 100}, {1.0, 1.0}, 4);
    std::size_t first = 0;
    for (int i = 0; i < 10000; ++i) first += mix.draw().first == 0;
    CHECK(first > 4800);
    CHECK(first < 5200);
  }
  SECTION("zero-ratio sources are never drawn") {
    DatasetMix mix({10, 10, 10}, {1.0, 0.0, 2.0}, 5);
    for (int i = 0; i < 1000; ++i) REQUIRE(mix.draw().first != 1);
  }
  SECTION("empty source with positive ratio is an error") {
    REQUIRE_THROWS_AS(DatasetMix({10, 0}, {1.0, 1.0}, 6), std::invalid_argument);
  }
  SECTION("all-zero ratios are an error") {
    REQUIRE_THROWS_AS(DatasetMix({10}, {0.0}, 7), std::invalid_argument);
  }
}

TEST_CASE("pretrain: loss log recombines and resume is bitwise exact") {
  TempDir tmp;
  RunConfig cfg = parse_config(toy_config_json());
  simulate_sequence(cfg, 4, (tmp.path / "data").string());
  const Dataset ds = load_dataset((tmp.path / "data").string());

  // uninterrupted 2-epoch run
  HoilModel direct(cfg.model, Mode::Pretrain, cfg.seed);
  const auto run_a = pretrain(cfg, direct, ds, (tmp.path / "a.ckpt").string());

  SECTION("per-term columns sum to the total within 1e-9") {
    std::istringstream log(run_a.stats.loss_log);
    std::string line;
    std::getline(log, line);  // header
    int rows = 0;
    while (std::getline(log, line)) {
      std::vector<double> cols;
      std::stringstream ls(line);
      std::string tok;
      while (std::getline(ls, tok, ',')) cols.push_back(std::stod(tok));
      REQUIRE(cols.size() == 8);  // step, total, 6 terms
      double sum = 0.0;
      for (std::size_t c = 2; c < cols.size(); ++c) sum += cols[c];
      REQUIRE(sum == Catch::Approx(cols[1]).margin(1e-9));
      ++rows;
    }
    CHECK(rows == run_a.stats.steps_run);
  }

  SECTION("one epoch + resume equals the uninterrupted run bitwise") {
    RunConfig one_epoch = cfg;
    one_epoch.optimizer.epochs = 1;
    HoilModel first(cfg.model, Mode::Pretrain, cfg.seed);
    pretrain(one_epoch, first, ds, (tmp.path / "b.ckpt").string());

    HoilModel resumed(cfg.model, Mode::Pretrain, cfg.seed);
    pretrain(cfg, resumed, ds, (tmp.path / "c.ckpt").string(), (tmp.path / "b.ckpt").string());

    const auto& pa = direct.params().params();
    const auto& pb = resumed.params().params();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
      INFO("parameter " << pa[i].name);
      REQUIRE(pa[i].tensor.data() == pb[i].tensor.data());
    }
  }
}

TEST_CASE("finetune: query re-initialization flow and heatmap checkpoints") {
  TempDir tmp;
  RunConfig cfg = parse_config(toy_config_json());
  cfg.optimizer.epochs = 1;
  simulate_sequence(cfg, 3, (tmp.path / "data").string());
  const Dataset ds = load_dataset((tmp.path / "data").string());

  HoilModel pre_model(cfg.model, Mode::Pretrain, cfg.seed);
  pretrain(cfg, pre_model, ds, (tmp.path / "pre.ckpt").string());
  const auto entries = ad::read_checkpoint((tmp.path / "pre.ckpt").string());
  CHECK_FALSE(checkpoint_is_finetune(entries));

  HoilModel ft_model(cfg.model, Mode::Finetune, cfg.seed);
  ft_model.load_pretrained(entries, /*reinit_queries=*/false);  // same keypoint count
  const auto stats = finetune(cfg, ft_model, ds, (tmp.path / "ft.ckpt").string());
  CHECK(stats.steps_run == 1);
  CHECK(checkpoint_is_finetune(ad::read_checkpoint((tmp.path / "ft.ckpt").string())));

  SECTION("mismatched keypoint count needs the re-init flag") {
    ModelConfig waymo_model = cfg.model;
    waymo_model.num_keypoints = 14;
    HoilModel mismatched(waymo_model, Mode::Finetune, cfg.seed);
    REQUIRE_THROWS_AS(mismatched.load_pretrained(entries, false), std::runtime_error);
    mismatched.load_pretrained(entries, true);
  }
}

TEST_CASE("evaluate_model and run_refine produce coherent tables") {
  TempDir tmp;
  RunConfig cfg = parse_config(toy_config_json());
  cfg.optimizer.epochs = 1;
  simulate_sequence(cfg, 4, (tmp.path / "data").string());
  const Dataset ds = load_dataset((tmp.path / "data").string());
  HoilModel model(cfg.model, Mode::Pretrain, cfg.seed);
  pretrain(cfg, model, ds, (tmp.path / "m.ckpt").string());

  const EvalResult result = evaluate_model(model, ds);
  CHECK(result.predictions.size() == 4);
  CHECK(result.report.n_frames == 4);
  CHECK(result.report.pck5 >= result.report.pck3);
  const std::string csv = eval_report_csv(result);
  CHECK(csv.find("mpjpe_mm,") != std::string::npos);
  CHECK(csv.find("seg_pose_correlation,") != std::string::npos);

  const auto outcome = run_refine(cfg, model, ds, "gaussian", false);
  REQUIRE(outcome.rows.size() == 2);
  CHECK(outcome.rows[0].method == "none");
  CHECK(outcome.rows[1].method == "gaussian");

  SECTION("svg plots are well-formed enough to embed") {
    const std::string svg = per_joint_svg(result.report, ds.profile);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    const std::string scatter = seg_pose_scatter_svg(result.frame_seg_accuracy,
                                                     result.frame_mpjpe_mm,
                                                     result.seg_pose_correlation);
    CHECK(scatter.find("circle") != std::string::npos);
  }
}
