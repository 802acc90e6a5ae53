#pragma once

// Sequence generation (gait poses on the capsule rig, ray casting, contact
// labeling, object dropout, cropping) and dataset loading with the train-time
// centering normalization, plus the ratio-weighted multi-source sampler.

#include <filesystem>
#include <iomanip>

#include "hoil/pipeline/config.hpp"
#include "hoil/pipeline/framerecord.hpp"

namespace hoil::pipeline {

/// Arm-swing walking pose at the given phase (radians). The left arm reaches
/// forward far enough to meet the object placed by the frame-0 scene.
inline sim::PoseParams gait_pose(double phase) {
  sim::PoseParams p;
  p.left_shoulder = 0.95 + 0.20 * std::sin(phase);
  p.right_shoulder = 0.95 - 0.20 * std::sin(phase);
  p.left_elbow = 0.85 + 0.15 * std::sin(phase + 0.6);
  p.right_elbow = 0.45 + 0.15 * std::cos(phase);
  p.left_hip = 0.30 * std::sin(phase);
  p.right_hip = -0.30 * std::sin(phase);
  p.left_knee = 0.22 * (1.0 + std::sin(phase + 1.3)) * 0.5;
  p.right_knee = 0.22 * (1.0 - std::sin(phase + 1.3)) * 0.5;
  return p;
}

/// Drops points outside an xy box of half-width `radius` around `center`
/// (and above 2.4 m, where only stray wall points live).
inline void crop_around(LabeledPointCloud& cloud, KeypointSet& keypoints, const Vec3& center,
                        double radius) {
  LabeledPointCloud kept;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.cloud.coords[i];
    if (std::abs(p[0] - center[0]) > radius || std::abs(p[1] - center[1]) > radius ||
        p[2] > 2.4)
      continue;
    kept.cloud.coords.push_back(p);
    kept.part.push_back(cloud.part[i]);
    kept.contact.push_back(cloud.contact[i]);
    kept.face_id.push_back(cloud.face_id[i]);
  }
  cloud = std::move(kept);
  (void)keypoints;
}

/// One simulated frame: gait pose, per-frame object dropout, ray casting with
/// contact labels, and the crop around the human.
inline FrameRecord simulate_frame(const RunConfig& cfg, uint32_t frame_index, double phase,
                                  const std::optional<Vec3>& object_center) {
  auto rng = nn::step_rng(cfg.seed, frame_index, /*salt=*/101);

  sim::ObjectSpec object_spec;
  object_spec.subdiv = cfg.simulator.box_subdiv;
  if (object_center) object_spec.center = *object_center;
  sim::TestScene ts = sim::make_test_scene(gait_pose(phase), object_spec);
  ts.scene = sim::object_dropout(ts.scene, cfg.simulator.object_dropout, rng);

  FrameRecord rec;
  rec.frame_index = frame_index;
  rec.keypoints = ts.keypoints;
  const uint64_t noise_seed = rng();
  rec.cloud = sim::cast_rays(ts.scene, cfg.simulator.sensor(), noise_seed);

  if (ts.scene.object) {
    const auto labels = sim::contact_labels(ts.scene.human, *ts.scene.object, cfg.contact);
    sim::propagate_contact(rec.cloud, labels.human_face, labels.object_face);
    const auto kc = sim::keypoint_contact(labels.human_vertex, labels.object_vertex,
                                          ts.part_vertices, KeypointProfile::Smpl15Obj);
    rec.keypoints.contact = kc.contact;
  } else {
    rec.keypoints.valid[KeypointNames::kObject] = 0;
    std::fill(rec.keypoints.contact.begin(), rec.keypoints.contact.end(), 0);
  }

  const Vec3 pelvis = ts.keypoints.coords[KeypointNames::kPelvis];
  crop_around(rec.cloud, rec.keypoints, pelvis, cfg.simulator.crop_radius);
  if (rec.cloud.size() == 0)
    throw std::runtime_error("simulate_frame: crop removed every point");

  // profile restriction (simulation is always rigged in Smpl15Obj order)
  if (cfg.profile == KeypointProfile::Smpl15) {
    rec.keypoints.coords.resize(15);
    rec.keypoints.valid.resize(15);
    rec.keypoints.contact.resize(15);
  } else if (cfg.profile == KeypointProfile::Waymo14) {
    KeypointSet w;
    for (const auto& name : profile_joint_names(KeypointProfile::Waymo14)) {
      const int src = profile_joint_index(KeypointProfile::Smpl15Obj,
                                          name == "neck_base" ? "neck" : name);
      w.coords.push_back(rec.keypoints.coords[src]);
      w.valid.push_back(rec.keypoints.valid[src]);
      w.contact.push_back(rec.keypoints.contact[src]);
    }
    rec.keypoints = w;
  }
  return rec;
}

/// Writes `frames` simulated records plus the manifest into `dir`.
inline Manifest simulate_sequence(const RunConfig& cfg, int frames, const std::string& dir) {
  if (frames <= 0) throw std::invalid_argument("simulate_sequence: frames must be >= 1");
  std::filesystem::create_directories(dir);

  // the object sits where the frame-0 reach puts it, then stays fixed
  const sim::TestScene anchor = sim::make_test_scene(gait_pose(0.0), {});
  const Vec3 object_center = anchor.keypoints.coords[KeypointNames::kObject];

  Manifest manifest;
  manifest.dt = cfg.simulator.dt;
  manifest.keypoint_profile = profile_to_name(cfg.profile);
  for (int t = 0; t < frames; ++t) {
    const double phase = 2.0 * M_PI * t / 12.0;
    const FrameRecord rec = simulate_frame(cfg, static_cast<uint32_t>(t), phase, object_center);
    std::ostringstream name;
    name << "frame_" << std::setw(6) << std::setfill('0') << t << ".bin";
    write_frame_record((std::filesystem::path(dir) / name.str()).string(), rec);
    manifest.frame_files.push_back(name.str());
  }
  write_manifest(dir, manifest);
  return manifest;
}

struct Dataset {
  std::vector<FrameRecord> frames;
  double dt = 0.1;
  KeypointProfile profile = KeypointProfile::Smpl15Obj;
};

/// Loads a sequence directory. When `center` is set, each frame is shifted so
/// its cloud centroid sits at the origin (keypoints shift identically); this
/// is the training-time normalization.
inline Dataset load_dataset(const std::string& dir, bool center = true) {
  const Manifest manifest = read_manifest(dir);
  Dataset ds;
  ds.dt = manifest.dt;
  ds.profile = profile_from_name(manifest.keypoint_profile);
  for (const auto& file : manifest.frame_files) {
    FrameRecord rec = read_frame_record((std::filesystem::path(dir) / file).string());
    if (center && rec.cloud.size() > 0) {
      Vec3 c = {0, 0, 0};
      for (const auto& p : rec.cloud.cloud.coords) c = c + p;
      c = (1.0 / static_cast<double>(rec.cloud.size())) * c;
      for (auto& p : rec.cloud.cloud.coords) p = p - c;
      for (auto& k : rec.keypoints.coords) k = k - c;
    }
    ds.frames.push_back(std::move(rec));
  }
  if (ds.frames.empty()) throw std::runtime_error("load_dataset: no frames in " + dir);
  return ds;
}

// ---------------------------------------------------------------------------
// Multi-source sampling
// ---------------------------------------------------------------------------

/// Draw = (source, element). Sources are drawn with probability proportional
/// to their ratio; elements uniformly within the source. Deterministic under
/// the seed.
struct DatasetMix {
  std::vector<std::size_t> sizes;
  std::vector<double> ratios;
  std::mt19937_64 rng;

  DatasetMix(std::vector<std::size_t> source_sizes, std::vector<double> source_ratios,
             uint64_t seed)
      : sizes(std::move(source_sizes)), ratios(std::move(source_ratios)), rng(seed) {
    if (sizes.size() != ratios.size() || sizes.empty())
      throw std::invalid_argument("DatasetMix: sizes/ratios mismatch");
    double total = 0.0;
    for (std::size_t s = 0; s < sizes.size(); ++s) {
      if (ratios[s] < 0) throw std::invalid_argument("DatasetMix: negative ratio");
      if (ratios[s] > 0 && sizes[s] == 0)
        throw std::invalid_argument("DatasetMix: empty source with positive ratio");
      total += ratios[s];
    }
    if (total <= 0) throw std::invalid_argument("DatasetMix: all ratios zero");
  }

  std::pair<std::size_t, std::size_t> draw() {
    std::discrete_distribution<std::size_t> pick(ratios.begin(), ratios.end());
    const std::size_t source = pick(rng);
    std::uniform_int_distribution<std::size_t> elem(0, sizes[source] - 1);
    return {source, elem(rng)};
  }
};

}  // namespace hoil::pipeline
