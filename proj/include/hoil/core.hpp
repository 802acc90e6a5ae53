#pragma once

// Core domain types shared across the library: point clouds, label spaces,
// keypoints, skeletons, grid configuration.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hoil {

using Vec3 = std::array<double, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline bool finite(const Vec3& a) {
  return std::isfinite(a[0]) && std::isfinite(a[1]) && std::isfinite(a[2]);
}

/// Part label space: 24 human body-part classes, one object class, one
/// background class. Class indices are dense in [0, 26).
struct PartLabelSpace {
  static constexpr int kNumBodyParts = 24;
  static constexpr int kObjectClass = 24;
  static constexpr int kBackgroundClass = 25;
  static constexpr int kNumClasses = 26;
};

// Body-part indices follow the SMPL joint ordering (part k = region driven
// by joint k).
enum BodyPart : int {
  kPelvis = 0,
  kLeftHip = 1,
  kRightHip = 2,
  kSpine1 = 3,
  kLeftKnee = 4,
  kRightKnee = 5,
  kSpine2 = 6,
  kLeftAnkle = 7,
  kRightAnkle = 8,
  kSpine3 = 9,
  kLeftFoot = 10,
  kRightFoot = 11,
  kNeck = 12,
  kLeftCollar = 13,
  kRightCollar = 14,
  kHead = 15,
  kLeftShoulder = 16,
  kRightShoulder = 17,
  kLeftElbow = 18,
  kRightElbow = 19,
  kLeftWrist = 20,
  kRightWrist = 21,
  kLeftHand = 22,
  kRightHand = 23,
};

/// Frequently interacting regions: both hands and both feet.
inline const std::vector<int>& fir_part_classes() {
  static const std::vector<int> parts = {kLeftFoot, kRightFoot, kLeftHand, kRightHand};
  return parts;
}

inline bool is_fir_part(int part) {
  return part == kLeftFoot || part == kRightFoot || part == kLeftHand || part == kRightHand;
}

/// Default part weight vector for pooling: frequently interacting parts get
/// 4x weight, background half weight.
inline std::vector<double> default_part_weights() {
  std::vector<double> w(PartLabelSpace::kNumClasses, 1.0);
  for (int p : fir_part_classes()) w[p] = 4.0;
  w[PartLabelSpace::kBackgroundClass] = 0.5;
  return w;
}

struct PointCloud {
  std::vector<Vec3> coords;              // meters, sensor frame
  std::vector<double> intensity;         // optional; empty or size N

  std::size_t size() const { return coords.size(); }
  bool has_intensity() const { return !intensity.empty(); }
};

/// Point cloud with per-point part labels, contact flags, and mesh-face
/// provenance. face_id is -1 for points without provenance (background).
struct LabeledPointCloud {
  PointCloud cloud;
  std::vector<int> part;        // class index < 26
  std::vector<uint8_t> contact; // 0/1; always 0 on background points
  std::vector<int> face_id;     // face index in the source mesh, -1 if none

  std::size_t size() const { return cloud.size(); }
};

struct KeypointSet {
  std::vector<Vec3> coords;      // meters
  std::vector<uint8_t> valid;
  std::vector<uint8_t> contact;

  std::size_t size() const { return coords.size(); }
};

/// Kinematic tree as (parent, child) keypoint-index pairs.
struct Skeleton {
  std::vector<std::pair<int, int>> edges;
};

struct GridConfig {
  double base_grid_size = 0.01;  // meters
  double stage_multiplier = 2.0;
  int num_stages = 2;

  double stage_grid_size(int stage) const {
    double g = base_grid_size;
    for (int i = 0; i < stage; ++i) g *= stage_multiplier;
    return g;
  }
};

struct FrameSequence {
  struct Frame {
    LabeledPointCloud cloud;
    KeypointSet keypoints;
  };
  std::vector<Frame> frames;
  double dt = 0.1;  // seconds per frame
};

// ---------------------------------------------------------------------------
// Keypoint profiles
// ---------------------------------------------------------------------------

/// Named keypoint orderings. Indices are never implicit: every consumer goes
/// through the profile tables below.
enum class KeypointProfile { Smpl15, Smpl15Obj, Waymo14 };

struct KeypointNames {
  // Shared 15-joint body ordering used by Smpl15 / Smpl15Obj.
  static constexpr int kPelvis = 0;
  static constexpr int kLeftHip = 1;
  static constexpr int kRightHip = 2;
  static constexpr int kLeftKnee = 3;
  static constexpr int kRightKnee = 4;
  static constexpr int kLeftAnkle = 5;
  static constexpr int kRightAnkle = 6;
  static constexpr int kNeck = 7;
  static constexpr int kHead = 8;
  static constexpr int kLeftShoulder = 9;
  static constexpr int kRightShoulder = 10;
  static constexpr int kLeftElbow = 11;
  static constexpr int kRightElbow = 12;
  static constexpr int kLeftWrist = 13;
  static constexpr int kRightWrist = 14;
  static constexpr int kObject = 15;  // Smpl15Obj only
};

inline int profile_num_keypoints(KeypointProfile p) {
  switch (p) {
    case KeypointProfile::Smpl15: return 15;
    case KeypointProfile::Smpl15Obj: return 16;
    case KeypointProfile::Waymo14: return 14;
  }
  throw std::invalid_argument("profile_num_keypoints: unknown profile");
}

inline const std::vector<std::string>& profile_joint_names(KeypointProfile p) {
  static const std::vector<std::string> smpl15 = {
      "pelvis",     "left_hip",      "right_hip",      "left_knee",  "right_knee",
      "left_ankle", "right_ankle",   "neck",           "head",       "left_shoulder",
      "right_shoulder", "left_elbow", "right_elbow",   "left_wrist", "right_wrist"};
  static const std::vector<std::string> smpl15obj = [] {
    auto v = smpl15;
    v.push_back("object");
    return v;
  }();
  // Waymo profile drops the pelvis; otherwise the same joints.
  static const std::vector<std::string> waymo14 = {
      "head",       "neck_base",     "left_shoulder", "right_shoulder", "left_elbow",
      "right_elbow", "left_wrist",   "right_wrist",   "left_hip",       "right_hip",
      "left_knee",  "right_knee",    "left_ankle",    "right_ankle"};
  switch (p) {
    case KeypointProfile::Smpl15: return smpl15;
    case KeypointProfile::Smpl15Obj: return smpl15obj;
    case KeypointProfile::Waymo14: return waymo14;
  }
  throw std::invalid_argument("profile_joint_names: unknown profile");
}

inline int profile_joint_index(KeypointProfile p, const std::string& name) {
  const auto& names = profile_joint_names(p);
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  throw std::invalid_argument("profile_joint_index: no joint named '" + name + "'");
}

inline Skeleton profile_skeleton(KeypointProfile p) {
  auto e = [&](const char* a, const char* b) {
    return std::make_pair(profile_joint_index(p, a), profile_joint_index(p, b));
  };
  Skeleton s;
  switch (p) {
    case KeypointProfile::Smpl15:
    case KeypointProfile::Smpl15Obj:
      s.edges = {e("pelvis", "left_hip"),      e("pelvis", "right_hip"),
                 e("left_hip", "left_knee"),   e("right_hip", "right_knee"),
                 e("left_knee", "left_ankle"), e("right_knee", "right_ankle"),
                 e("pelvis", "neck"),          e("neck", "head"),
                 e("neck", "left_shoulder"),   e("neck", "right_shoulder"),
                 e("left_shoulder", "left_elbow"), e("right_shoulder", "right_elbow"),
                 e("left_elbow", "left_wrist"),    e("right_elbow", "right_wrist")};
      break;
    case KeypointProfile::Waymo14:
      s.edges = {e("neck_base", "head"),
                 e("neck_base", "left_shoulder"),  e("neck_base", "right_shoulder"),
                 e("left_shoulder", "left_elbow"), e("right_shoulder", "right_elbow"),
                 e("left_elbow", "left_wrist"),    e("right_elbow", "right_wrist"),
                 e("neck_base", "left_hip"),       e("neck_base", "right_hip"),
                 e("left_hip", "left_knee"),       e("right_hip", "right_knee"),
                 e("left_knee", "left_ankle"),     e("right_knee", "right_ankle")};
      break;
  }
  return s;
}

/// Drops skeleton edges whose endpoints are invalid in `k`.
inline Skeleton prune_skeleton(const Skeleton& s, const KeypointSet& k) {
  Skeleton out;
  for (auto [a, b] : s.edges) {
    if (a < 0 || b < 0 || a >= static_cast<int>(k.size()) || b >= static_cast<int>(k.size()))
      throw std::invalid_argument("prune_skeleton: edge index out of range");
    if (k.valid[a] && k.valid[b]) out.edges.emplace_back(a, b);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Distance between the shoulder midpoint and the hip midpoint. Returns 0 for
/// a degenerate (collapsed) keypoint set; throws if the shoulder or hip
/// keypoints are missing or invalid.
inline double torso_length(const KeypointSet& k, KeypointProfile profile) {
  const int ls = profile_joint_index(profile, "left_shoulder");
  const int rs = profile_joint_index(profile, "right_shoulder");
  const int lh = profile_joint_index(profile, "left_hip");
  const int rh = profile_joint_index(profile, "right_hip");
  for (int idx : {ls, rs, lh, rh}) {
    if (idx >= static_cast<int>(k.size()) || !k.valid[idx])
      throw std::invalid_argument("torso_length: shoulder/hip keypoint missing or invalid");
  }
  const Vec3 shoulder_mid = 0.5 * (k.coords[ls] + k.coords[rs]);
  const Vec3 hip_mid = 0.5 * (k.coords[lh] + k.coords[rh]);
  return norm(shoulder_mid - hip_mid);
}

struct Violation {
  int point = -1;  // -1 when not tied to a specific point
  std::string rule;
  std::string detail;
};

/// Reports every type-invariant violation in `lc`. Empty result means the
/// cloud is well formed. Side-effect free.
inline std::vector<Violation> validate(const LabeledPointCloud& lc) {
  std::vector<Violation> out;
  const std::size_t n = lc.size();
  if (n == 0) out.push_back({-1, "non-empty", "cloud has no points"});
  if (lc.part.size() != n) out.push_back({-1, "part-size", "part label count != point count"});
  if (lc.contact.size() != n) out.push_back({-1, "contact-size", "contact flag count != point count"});
  if (lc.face_id.size() != n) out.push_back({-1, "face-size", "face_id count != point count"});
  if (lc.cloud.has_intensity() && lc.cloud.intensity.size() != n)
    out.push_back({-1, "intensity-size", "intensity count != point count"});
  for (std::size_t i = 0; i < n; ++i) {
    if (!finite(lc.cloud.coords[i]))
      out.push_back({static_cast<int>(i), "finite-coords", "non-finite coordinate"});
    if (i < lc.part.size()) {
      if (lc.part[i] < 0 || lc.part[i] >= PartLabelSpace::kNumClasses)
        out.push_back({static_cast<int>(i), "part-range", "part index out of [0,26)"});
      if (i < lc.contact.size() && lc.part[i] == PartLabelSpace::kBackgroundClass && lc.contact[i])
        out.push_back({static_cast<int>(i), "background-contact",
                       "background point must not carry a contact label"});
    }
  }
  return out;
}

}  // namespace hoil
