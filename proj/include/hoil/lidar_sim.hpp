#pragma once

// Synthetic LiDAR generation: ray casting onto labeled triangle meshes with
// ground/wall planes, per-point part and contact labeling, keypoint-contact
// extraction, the zero-velocity contact heuristic, object dropout, and a
// procedural capsule-limb human + box object standing in for body-model
// meshes.

#include <fstream>
#include <optional>
#include <random>
#include <sstream>

#include "hoil/core.hpp"

namespace hoil::sim {

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
  std::vector<int> face_part;  // class index per face

  std::size_t num_vertices() const { return vertices.size(); }
  std::size_t num_faces() const { return faces.size(); }

  void check_valid() const {
    if (face_part.size() != faces.size())
      throw std::invalid_argument("TriangleMesh: face_part count != face count");
    for (const auto& f : faces) {
      for (int v : f)
        if (v < 0 || v >= static_cast<int>(vertices.size()))
          throw std::invalid_argument("TriangleMesh: vertex index out of range");
      const Vec3 e1 = vertices[f[1]] - vertices[f[0]];
      const Vec3 e2 = vertices[f[2]] - vertices[f[0]];
      if (norm(cross(e1, e2)) <= 0.0)
        throw std::invalid_argument("TriangleMesh: degenerate (zero-area) face");
    }
  }
};

/// Angular scan grid. Ray direction at (azimuth a, elevation e) is
/// (cos e cos a, cos e sin a, sin e) from the origin.
struct SensorModel {
  Vec3 origin = {-6.0, 0.0, 1.0};
  double azimuth_min = -60.0 * M_PI / 180.0;
  double azimuth_max = 60.0 * M_PI / 180.0;
  double azimuth_step = 0.2 * M_PI / 180.0;
  double elevation_min = -25.0 * M_PI / 180.0;
  double elevation_max = 5.0 * M_PI / 180.0;
  double elevation_step = 0.33 * M_PI / 180.0;
  double max_range = 30.0;
  double range_noise_sigma = 0.0;  // meters along the ray

  void check() const {
    if (azimuth_step <= 0 || elevation_step <= 0)
      throw std::invalid_argument("SensorModel: steps must be positive");
    if (azimuth_max < azimuth_min || elevation_max < elevation_min)
      throw std::invalid_argument("SensorModel: empty angular range");
  }
  std::size_t azimuth_count() const {
    return static_cast<std::size_t>((azimuth_max - azimuth_min) / azimuth_step + 1e-9) + 1;
  }
  std::size_t elevation_count() const {
    return static_cast<std::size_t>((elevation_max - elevation_min) / elevation_step + 1e-9) + 1;
  }
};

struct Plane {
  Vec3 point;
  Vec3 normal;  // unit length
};

struct Scene {
  TriangleMesh human;
  std::optional<TriangleMesh> object;
  std::vector<Plane> planes;
};

struct ContactConfig {
  double threshold = 0.05;  // meters; comparison is strict less-than
};

// ---------------------------------------------------------------------------
// Intersection primitives
// ---------------------------------------------------------------------------

struct RayHit {
  double t = 0.0;
  double u = 0.0, v = 0.0;  // barycentric on the triangle
};

/// Moller-Trumbore ray/triangle test. Rejects near-parallel rays with
/// |det| < 1e-12 and hits behind the origin.
inline bool ray_triangle(const Vec3& orig, const Vec3& dir, const Vec3& v0, const Vec3& v1,
                         const Vec3& v2, RayHit& hit) {
  constexpr double kParallelEps = 1e-12;
  constexpr double kTMin = 1e-9;
  const Vec3 e1 = v1 - v0;
  const Vec3 e2 = v2 - v0;
  const Vec3 p = cross(dir, e2);
  const double det = dot(e1, p);
  if (det > -kParallelEps && det < kParallelEps) return false;
  const double inv_det = 1.0 / det;
  const Vec3 s = orig - v0;
  const double u = dot(s, p) * inv_det;
  if (u < 0.0 || u > 1.0) return false;
  const Vec3 q = cross(s, e1);
  const double v = dot(dir, q) * inv_det;
  if (v < 0.0 || u + v > 1.0) return false;
  const double t = dot(e2, q) * inv_det;
  if (t <= kTMin) return false;
  hit = {t, u, v};
  return true;
}

inline bool ray_plane(const Vec3& orig, const Vec3& dir, const Plane& plane, double& t) {
  const double denom = dot(dir, plane.normal);
  if (std::abs(denom) < 1e-12) return false;
  t = dot(plane.point - orig, plane.normal) / denom;
  return t > 1e-9;
}

/// Exact distance from a point to a triangle (closest-point computation over
/// the face, edges, and corners).
inline double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = dot(ab, ap), d2 = dot(ac, ap);
  if (d1 <= 0.0 && d2 <= 0.0) return norm(p - a);
  const Vec3 bp = p - b;
  const double d3 = dot(ab, bp), d4 = dot(ac, bp);
  if (d3 >= 0.0 && d4 <= d3) return norm(p - b);
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double t = d1 / (d1 - d3);
    return norm(p - (a + t * ab));
  }
  const Vec3 cp = p - c;
  const double d5 = dot(ab, cp), d6 = dot(ac, cp);
  if (d6 >= 0.0 && d5 <= d6) return norm(p - c);
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double t = d2 / (d2 - d6);
    return norm(p - (a + t * ac));
  }
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return norm(p - (b + t * (c - b)));
  }
  const double denom = 1.0 / (va + vb + vc);
  const Vec3 closest = a + (vb * denom) * ab + (vc * denom) * ac;
  return norm(p - closest);
}

inline double point_mesh_distance(const Vec3& p, const TriangleMesh& mesh) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& f : mesh.faces)
    best = std::min(best, point_triangle_distance(p, mesh.vertices[f[0]], mesh.vertices[f[1]],
                                                  mesh.vertices[f[2]]));
  return best;
}

// ---------------------------------------------------------------------------
// Ray casting
// ---------------------------------------------------------------------------

/// Casts the sensor's angular grid against the scene and returns the nearest
/// hit per ray as a labeled point (part label filled from the hit primitive;
/// contact flags all false until propagate_contact).
inline LabeledPointCloud cast_rays(const Scene& scene, const SensorModel& sensor,
                                   uint64_t noise_seed = 0) {
  sensor.check();
  scene.human.check_valid();
  if (scene.object) scene.object->check_valid();
  for (const auto& plane : scene.planes)
    if (std::abs(norm(plane.normal) - 1.0) > 1e-9)
      throw std::invalid_argument("cast_rays: plane normal must be unit length");

  LabeledPointCloud out;
  std::mt19937_64 rng(noise_seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  const std::size_t n_el = sensor.elevation_count();
  const std::size_t n_az = sensor.azimuth_count();
  for (std::size_t ei = 0; ei < n_el; ++ei) {
    const double el = sensor.elevation_min + static_cast<double>(ei) * sensor.elevation_step;
    for (std::size_t ai = 0; ai < n_az; ++ai) {
      const double az = sensor.azimuth_min + static_cast<double>(ai) * sensor.azimuth_step;
      const Vec3 dir = {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};

      double best_t = sensor.max_range;
      int best_part = -1;
      int best_face = -1;
      auto consider_mesh = [&](const TriangleMesh& mesh, bool is_object) {
        RayHit hit;
        for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
          const auto& tri = mesh.faces[f];
          if (ray_triangle(sensor.origin, dir, mesh.vertices[tri[0]], mesh.vertices[tri[1]],
                           mesh.vertices[tri[2]], hit) &&
              hit.t < best_t) {
            best_t = hit.t;
            best_part = is_object ? PartLabelSpace::kObjectClass : mesh.face_part[f];
            best_face = static_cast<int>(f);
          }
        }
      };
      consider_mesh(scene.human, false);
      if (scene.object) consider_mesh(*scene.object, true);
      for (const auto& plane : scene.planes) {
        double t;
        if (ray_plane(sensor.origin, dir, plane, t) && t < best_t) {
          best_t = t;
          best_part = PartLabelSpace::kBackgroundClass;
          best_face = -1;
        }
      }
      if (best_part < 0) continue;  // ray missed everything

      double t = best_t;
      if (sensor.range_noise_sigma > 0.0) t += sensor.range_noise_sigma * noise(rng);
      out.cloud.coords.push_back(sensor.origin + t * dir);
      out.part.push_back(best_part);
      out.contact.push_back(0);
      out.face_id.push_back(best_face);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Contact labeling
// ---------------------------------------------------------------------------

struct ContactLabels {
  std::vector<uint8_t> human_vertex;
  std::vector<uint8_t> object_vertex;
  std::vector<uint8_t> human_face;
  std::vector<uint8_t> object_face;

  bool any_object_contact() const {
    for (uint8_t v : object_vertex)
      if (v) return true;
    return false;
  }
};

/// Vertex flag: point-to-surface distance strictly below the threshold.
/// Face flag: any incident vertex flagged.
inline ContactLabels contact_labels(const TriangleMesh& human, const TriangleMesh& object,
                                    const ContactConfig& cfg) {
  if (cfg.threshold <= 0) throw std::invalid_argument("contact_labels: threshold must be > 0");
  ContactLabels labels;
  labels.human_vertex.resize(human.num_vertices());
  labels.object_vertex.resize(object.num_vertices());
  for (std::size_t v = 0; v < human.num_vertices(); ++v)
    labels.human_vertex[v] = point_mesh_distance(human.vertices[v], object) < cfg.threshold;
  for (std::size_t v = 0; v < object.num_vertices(); ++v)
    labels.object_vertex[v] = point_mesh_distance(object.vertices[v], human) < cfg.threshold;

  auto face_flags = [](const TriangleMesh& mesh, const std::vector<uint8_t>& vertex_flags) {
    std::vector<uint8_t> flags(mesh.num_faces(), 0);
    for (std::size_t f = 0; f < mesh.num_faces(); ++f)
      flags[f] = vertex_flags[mesh.faces[f][0]] || vertex_flags[mesh.faces[f][1]] ||
                 vertex_flags[mesh.faces[f][2]];
    return flags;
  };
  labels.human_face = face_flags(human, labels.human_vertex);
  labels.object_face = face_flags(object, labels.object_vertex);
  return labels;
}

/// Fills point contact from the face flags of the originating mesh faces.
/// Background points stay false.
inline void propagate_contact(LabeledPointCloud& points, const std::vector<uint8_t>& human_face,
                              const std::vector<uint8_t>& object_face) {
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points.part[i] == PartLabelSpace::kBackgroundClass) {
      points.contact[i] = 0;
      continue;
    }
    if (points.face_id[i] < 0)
      throw std::invalid_argument("propagate_contact: mesh point " + std::to_string(i) +
                                  " is missing face provenance");
    const auto& flags =
        points.part[i] == PartLabelSpace::kObjectClass ? object_face : human_face;
    if (points.face_id[i] >= static_cast<int>(flags.size()))
      throw std::invalid_argument("propagate_contact: face id out of range at point " +
                                  std::to_string(i));
    points.contact[i] = flags[points.face_id[i]];
  }
}

/// part class -> vertex indices of the human mesh.
using PartVertexMap = std::vector<std::vector<int>>;

/// Keypoint -> associated part classes, per profile. The object keypoint (when
/// present) is resolved against the object mesh instead.
inline std::vector<std::vector<int>> keypoint_part_association(KeypointProfile profile) {
  const std::vector<std::pair<std::string, std::vector<int>>> table = {
      {"pelvis", {kPelvis}},
      {"left_hip", {kLeftHip}},
      {"right_hip", {kRightHip}},
      {"left_knee", {kLeftKnee}},
      {"right_knee", {kRightKnee}},
      {"left_ankle", {kLeftAnkle, kLeftFoot}},
      {"right_ankle", {kRightAnkle, kRightFoot}},
      {"neck", {kNeck}},
      {"neck_base", {kNeck}},
      {"head", {kHead}},
      {"left_shoulder", {kLeftCollar, kLeftShoulder}},
      {"right_shoulder", {kRightCollar, kRightShoulder}},
      {"left_elbow", {kLeftElbow}},
      {"right_elbow", {kRightElbow}},
      {"left_wrist", {kLeftWrist, kLeftHand}},
      {"right_wrist", {kRightWrist, kRightHand}},
      {"object", {}}};
  const auto& names = profile_joint_names(profile);
  std::vector<std::vector<int>> assoc;
  for (const auto& name : names) {
    bool found = false;
    for (const auto& [joint, parts] : table)
      if (joint == name) {
        assoc.push_back(parts);
        found = true;
        break;
      }
    if (!found)
      throw std::invalid_argument("keypoint_part_association: no part set for joint " + name);
  }
  return assoc;
}

struct KeypointContactResult {
  std::vector<uint8_t> contact;
  std::vector<std::string> warnings;
};

/// OR-reduction of vertex contact over each keypoint's associated part
/// vertices; the object keypoint aggregates the object mesh vertices.
inline KeypointContactResult keypoint_contact(const std::vector<uint8_t>& human_vertex_flags,
                                              const std::vector<uint8_t>& object_vertex_flags,
                                              const PartVertexMap& part_vertices,
                                              KeypointProfile profile) {
  const auto assoc = keypoint_part_association(profile);
  const auto& names = profile_joint_names(profile);
  KeypointContactResult r;
  r.contact.assign(assoc.size(), 0);
  for (std::size_t k = 0; k < assoc.size(); ++k) {
    if (names[k] == "object") {
      for (uint8_t f : object_vertex_flags) r.contact[k] |= f;
      continue;
    }
    bool any_vertex = false;
    for (int part : assoc[k]) {
      if (part < 0 || part >= static_cast<int>(part_vertices.size())) continue;
      for (int v : part_vertices[part]) {
        any_vertex = true;
        r.contact[k] |= human_vertex_flags[v];
      }
    }
    if (!any_vertex)
      r.warnings.push_back("keypoint " + names[k] + " has no associated vertices; contact false");
  }
  return r;
}

// ---------------------------------------------------------------------------
// Zero-velocity heuristic and object dropout
// ---------------------------------------------------------------------------

/// Flags a keypoint as in contact at frame t when its mean speed over a
/// centered window of `window` frames stays strictly below the threshold.
inline std::vector<std::vector<uint8_t>> zero_velocity_contact(
    const std::vector<KeypointSet>& trajectory, double dt, double velocity_threshold,
    int window) {
  const int t_len = static_cast<int>(trajectory.size());
  if (t_len < 2) throw std::invalid_argument("zero_velocity_contact: need at least 2 frames");
  if (window < 2 || window > t_len)
    throw std::invalid_argument("zero_velocity_contact: window must be in [2, num_frames]");
  if (dt <= 0) throw std::invalid_argument("zero_velocity_contact: dt must be > 0");
  const std::size_t nk = trajectory[0].size();
  for (const auto& f : trajectory)
    if (f.size() != nk)
      throw std::invalid_argument("zero_velocity_contact: inconsistent keypoint counts");

  std::vector<std::vector<uint8_t>> contact(t_len, std::vector<uint8_t>(nk, 0));
  const int half = window / 2;
  for (int t = 0; t < t_len; ++t) {
    int lo = std::max(0, t - half);
    int hi = std::min(t_len - 1, lo + window - 1);
    lo = std::max(0, hi - window + 1);
    for (std::size_t k = 0; k < nk; ++k) {
      double speed_sum = 0.0;
      int count = 0;
      for (int i = lo + 1; i <= hi; ++i) {
        speed_sum += norm(trajectory[i].coords[k] - trajectory[i - 1].coords[k]) / dt;
        ++count;
      }
      contact[t][k] = count > 0 && (speed_sum / count) < velocity_threshold;
    }
  }
  return contact;
}

/// Removes the object with probability p. Contact labels are recomputed by
/// the caller (they are all false once the object is gone).
inline Scene object_dropout(const Scene& scene, double p, std::mt19937_64& rng) {
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("object_dropout: p must be in [0,1]");
  Scene out = scene;
  if (out.object && std::bernoulli_distribution(p)(rng)) out.object.reset();
  return out;
}

// ---------------------------------------------------------------------------
// Procedural meshes
// ---------------------------------------------------------------------------

namespace meshgen {

/// Capsule from p0 to p1: a latitude/longitude sphere split at the equator
/// and stretched along the axis. Poles are single vertices, so no face is
/// degenerate.
inline void add_capsule(TriangleMesh& mesh, const Vec3& p0, const Vec3& p1, double radius,
                        int part, int segments = 8, int cap_rings = 2) {
  const Vec3 axis = p1 - p0;
  const double len = norm(axis);
  if (len <= 0) throw std::invalid_argument("add_capsule: zero-length axis");
  const Vec3 w = (1.0 / len) * axis;
  // orthonormal frame around w
  const Vec3 seed = std::abs(w[0]) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
  Vec3 u = cross(seed, w);
  u = (1.0 / norm(u)) * u;
  const Vec3 v = cross(w, u);

  const int base = static_cast<int>(mesh.vertices.size());
  auto emit = [&](double local_u, double local_v, double local_w) {
    mesh.vertices.push_back(p0 + local_u * u + local_v * v + local_w * w);
  };

  // vertex layout: bottom pole, then rings bottom-to-top, then top pole
  emit(0, 0, -radius);
  std::vector<int> ring_start;
  const int total_rings = 2 * cap_rings + 2;  // cap rings + both equators
  for (int r = 0; r < total_rings; ++r) {
    double lat, offset;
    if (r < cap_rings + 1) {  // bottom hemisphere incl. equator
      lat = -M_PI / 2.0 + M_PI / 2.0 * static_cast<double>(r + 1) / (cap_rings + 1);
      offset = 0.0;
    } else {  // top hemisphere incl. equator
      lat = M_PI / 2.0 * static_cast<double>(r - cap_rings - 1) / (cap_rings + 1);
      offset = len;
    }
    ring_start.push_back(static_cast<int>(mesh.vertices.size()));
    for (int s = 0; s < segments; ++s) {
      const double ang = 2.0 * M_PI * s / segments;
      emit(radius * std::cos(lat) * std::cos(ang), radius * std::cos(lat) * std::sin(ang),
           radius * std::sin(lat) + offset);
    }
  }
  emit(0, 0, len + radius);
  const int top_pole = static_cast<int>(mesh.vertices.size()) - 1;

  auto face = [&](int a, int b, int c) {
    mesh.faces.push_back({a, b, c});
    mesh.face_part.push_back(part);
  };
  for (int s = 0; s < segments; ++s) {
    const int sn = (s + 1) % segments;
    face(base, ring_start[0] + sn, ring_start[0] + s);  // bottom fan
    for (int r = 0; r + 1 < total_rings; ++r) {
      face(ring_start[r] + s, ring_start[r] + sn, ring_start[r + 1] + s);
      face(ring_start[r + 1] + s, ring_start[r] + sn, ring_start[r + 1] + sn);
    }
    face(top_pole, ring_start[total_rings - 1] + s, ring_start[total_rings - 1] + sn);
  }
}

/// Axis-aligned box with each face split into an n x n grid.
inline TriangleMesh make_box(const Vec3& center, const Vec3& half_extent, int part,
                             int subdiv = 3) {
  TriangleMesh mesh;
  auto add_face = [&](const Vec3& origin, const Vec3& du, const Vec3& dv) {
    const int base = static_cast<int>(mesh.vertices.size());
    for (int i = 0; i <= subdiv; ++i)
      for (int j = 0; j <= subdiv; ++j)
        mesh.vertices.push_back(origin + (static_cast<double>(i) / subdiv) * du +
                                (static_cast<double>(j) / subdiv) * dv);
    for (int i = 0; i < subdiv; ++i)
      for (int j = 0; j < subdiv; ++j) {
        const int a = base + i * (subdiv + 1) + j;
        const int b = a + subdiv + 1;
        mesh.faces.push_back({a, a + 1, b});
        mesh.face_part.push_back(part);
        mesh.faces.push_back({b, a + 1, b + 1});
        mesh.face_part.push_back(part);
      }
  };
  const Vec3 c = center, h = half_extent;
  add_face({c[0] - h[0], c[1] - h[1], c[2] - h[2]}, {2 * h[0], 0, 0}, {0, 2 * h[1], 0});  // bottom
  add_face({c[0] - h[0], c[1] - h[1], c[2] + h[2]}, {0, 2 * h[1], 0}, {2 * h[0], 0, 0});  // top
  add_face({c[0] - h[0], c[1] - h[1], c[2] - h[2]}, {0, 2 * h[1], 0}, {0, 0, 2 * h[2]});  // -x
  add_face({c[0] + h[0], c[1] - h[1], c[2] - h[2]}, {0, 0, 2 * h[2]}, {0, 2 * h[1], 0});  // +x
  add_face({c[0] - h[0], c[1] - h[1], c[2] - h[2]}, {0, 0, 2 * h[2]}, {2 * h[0], 0, 0});  // -y
  add_face({c[0] - h[0], c[1] + h[1], c[2] - h[2]}, {2 * h[0], 0, 0}, {0, 0, 2 * h[2]});  // +y
  return mesh;
}

}  // namespace meshgen

// ---------------------------------------------------------------------------
// Procedural test scene
// ---------------------------------------------------------------------------

/// Joint angles of the capsule rig, radians. Zero everywhere is a T-pose
/// facing -x (toward the default sensor); arms extend laterally along y.
struct PoseParams {
  double left_shoulder = 0.0;   // lowers the arm toward the body
  double right_shoulder = 0.0;
  double left_elbow = 0.0;      // bends the forearm toward the facing direction
  double right_elbow = 0.0;
  double left_hip = 0.0;        // swings the leg toward the facing direction
  double right_hip = 0.0;
  double left_knee = 0.0;       // bends the shank backward
  double right_knee = 0.0;

  void check() const {
    auto in = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
    if (!in(left_shoulder, -1.0, 2.0) || !in(right_shoulder, -1.0, 2.0) ||
        !in(left_elbow, 0.0, 2.5) || !in(right_elbow, 0.0, 2.5) || !in(left_hip, -1.9, 1.9) ||
        !in(right_hip, -1.9, 1.9) || !in(left_knee, 0.0, 2.5) || !in(right_knee, 0.0, 2.5))
      throw std::invalid_argument("PoseParams: joint angle outside the rig's limits");
  }
};

struct ObjectSpec {
  bool present = true;
  // When center is unset the box is placed just beyond the left hand, at
  // `gap` meters from the hand tip.
  std::optional<Vec3> center;
  Vec3 half_extent = {0.15, 0.15, 0.15};
  double gap = 0.02;
  int subdiv = 3;
};

struct TestScene {
  Scene scene;
  KeypointSet keypoints;        // Smpl15Obj order; object entry invalid if absent
  PartVertexMap part_vertices;  // human mesh: part class -> vertex indices
};

/// Builds the capsule-limb human (24-part face labels), the box object, a
/// ground plane and a back wall, plus ground-truth keypoints in Smpl15Obj
/// order.
inline TestScene make_test_scene(const PoseParams& pose, const ObjectSpec& object_spec = {}) {
  pose.check();
  TestScene ts;

  // forward kinematics; facing direction is -x, lateral is y, up is z
  const Vec3 facing = {-1, 0, 0};
  const Vec3 pelvis = {0, 0, 0.95};
  const Vec3 chest = {0, 0, 1.28};
  const Vec3 neck = {0, 0, 1.44};
  const Vec3 head_base = {0, 0, 1.52};
  const Vec3 head_top = {0, 0, 1.66};

  auto leg = [&](double side, double hip_flex, double knee_flex) {
    const Vec3 hip = {0, side * 0.09, 0.92};
    const Vec3 thigh_dir = {-std::sin(hip_flex), 0, -std::cos(hip_flex)};
    const Vec3 knee = hip + 0.42 * thigh_dir;
    const double shank_angle = hip_flex - knee_flex;
    const Vec3 shank_dir = {-std::sin(shank_angle), 0, -std::cos(shank_angle)};
    const Vec3 ankle = knee + 0.40 * shank_dir;
    return std::array<Vec3, 3>{hip, knee, ankle};
  };
  auto arm = [&](double side, double shoulder_angle, double elbow_flex) {
    const Vec3 shoulder = {0, side * 0.19, 1.42};
    const Vec3 arm_dir = {0, side * std::cos(shoulder_angle), -std::sin(shoulder_angle)};
    const Vec3 elbow = shoulder + 0.28 * arm_dir;
    const Vec3 fore_dir = std::cos(elbow_flex) * arm_dir + std::sin(elbow_flex) * facing;
    const Vec3 wrist = elbow + 0.26 * fore_dir;
    const Vec3 hand_tip = wrist + 0.15 * fore_dir;
    return std::array<Vec3, 4>{shoulder, elbow, wrist, hand_tip};
  };

  const auto lleg = leg(+1, pose.left_hip, pose.left_knee);
  const auto rleg = leg(-1, pose.right_hip, pose.right_knee);
  const auto larm = arm(+1, pose.left_shoulder, pose.left_elbow);
  const auto rarm = arm(-1, pose.right_shoulder, pose.right_elbow);

  TriangleMesh& human = ts.scene.human;
  ts.part_vertices.assign(PartLabelSpace::kNumClasses, {});
  auto capsule = [&](const Vec3& a, const Vec3& b, double r, int part) {
    const int v0 = static_cast<int>(human.vertices.size());
    meshgen::add_capsule(human, a, b, r, part);
    for (int v = v0; v < static_cast<int>(human.vertices.size()); ++v)
      ts.part_vertices[part].push_back(v);
  };

  capsule(pelvis - Vec3{0, 0, 0.12}, chest, 0.13, kPelvis);
  capsule(chest, neck, 0.11, kSpine3);
  capsule(neck, head_base, 0.045, kNeck);
  capsule(head_base, head_top, 0.085, kHead);
  capsule(lleg[0], lleg[1], 0.07, kLeftHip);
  capsule(rleg[0], rleg[1], 0.07, kRightHip);
  capsule(lleg[1], lleg[2], 0.055, kLeftKnee);
  capsule(rleg[1], rleg[2], 0.055, kRightKnee);
  // feet extend toward the facing direction from the ankles
  capsule(lleg[2], lleg[2] + 0.16 * facing - Vec3{0, 0, 0.04}, 0.035, kLeftFoot);
  capsule(rleg[2], rleg[2] + 0.16 * facing - Vec3{0, 0, 0.04}, 0.035, kRightFoot);
  capsule(larm[0], larm[1], 0.045, kLeftShoulder);
  capsule(rarm[0], rarm[1], 0.045, kRightShoulder);
  capsule(larm[1], larm[2], 0.04, kLeftElbow);
  capsule(rarm[1], rarm[2], 0.04, kRightElbow);
  capsule(larm[2], larm[3], 0.035, kLeftHand);
  capsule(rarm[2], rarm[3], 0.035, kRightHand);
  human.check_valid();

  ts.keypoints.coords.assign(16, Vec3{0, 0, 0});
  ts.keypoints.valid.assign(16, 1);
  ts.keypoints.contact.assign(16, 0);
  auto set = [&](int idx, const Vec3& p) { ts.keypoints.coords[idx] = p; };
  set(KeypointNames::kPelvis, pelvis);
  set(KeypointNames::kLeftHip, lleg[0]);
  set(KeypointNames::kRightHip, rleg[0]);
  set(KeypointNames::kLeftKnee, lleg[1]);
  set(KeypointNames::kRightKnee, rleg[1]);
  set(KeypointNames::kLeftAnkle, lleg[2]);
  set(KeypointNames::kRightAnkle, rleg[2]);
  set(KeypointNames::kNeck, neck);
  set(KeypointNames::kHead, 0.5 * (head_base + head_top));
  set(KeypointNames::kLeftShoulder, larm[0]);
  set(KeypointNames::kRightShoulder, rarm[0]);
  set(KeypointNames::kLeftElbow, larm[1]);
  set(KeypointNames::kRightElbow, rarm[1]);
  set(KeypointNames::kLeftWrist, larm[2]);
  set(KeypointNames::kRightWrist, rarm[2]);

  if (object_spec.present) {
    Vec3 center;
    if (object_spec.center) {
      center = *object_spec.center;
    } else {
      Vec3 reach = larm[3] - larm[2];
      reach = (1.0 / norm(reach)) * reach;
      const double standoff = 0.035 + object_spec.gap + object_spec.half_extent[0];
      center = larm[3] + standoff * reach;
    }
    ts.scene.object = meshgen::make_box(center, object_spec.half_extent,
                                        PartLabelSpace::kObjectClass, object_spec.subdiv);
    ts.scene.object->check_valid();
    set(KeypointNames::kObject, center);
  } else {
    ts.keypoints.valid[KeypointNames::kObject] = 0;
  }

  ts.scene.planes.push_back({{0, 0, 0}, {0, 0, 1}});    // ground
  ts.scene.planes.push_back({{1.6, 0, 0}, {-1, 0, 0}}); // wall behind the human
  return ts;
}

// ---------------------------------------------------------------------------
// Mesh I/O: ASCII OBJ plus sidecar label files
// ---------------------------------------------------------------------------

inline void save_obj(const std::string& path, const TriangleMesh& mesh) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_obj: cannot open " + path);
  os.precision(17);
  for (const auto& v : mesh.vertices) os << "v " << v[0] << " " << v[1] << " " << v[2] << "\n";
  for (const auto& f : mesh.faces)
    os << "f " << f[0] + 1 << " " << f[1] + 1 << " " << f[2] + 1 << "\n";
}

/// Sidecar face labels: one class index per face line.
inline void save_face_labels(const std::string& path, const TriangleMesh& mesh) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_face_labels: cannot open " + path);
  for (int p : mesh.face_part) os << p << "\n";
}

inline TriangleMesh load_obj(const std::string& obj_path, const std::string& labels_path = "") {
  std::ifstream is(obj_path);
  if (!is) throw std::runtime_error("load_obj: cannot open " + obj_path);
  TriangleMesh mesh;
  std::string line;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Vec3 v;
      ls >> v[0] >> v[1] >> v[2];
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::array<int, 3> f;
      for (int& idx : f) {
        std::string tok;
        ls >> tok;
        idx = std::stoi(tok.substr(0, tok.find('/'))) - 1;
      }
      mesh.faces.push_back(f);
    }
  }
  if (!labels_path.empty()) {
    std::ifstream ls(labels_path);
    if (!ls) throw std::runtime_error("load_obj: cannot open labels " + labels_path);
    int p;
    while (ls >> p) mesh.face_part.push_back(p);
    if (mesh.face_part.size() != mesh.faces.size())
      throw std::runtime_error("load_obj: face label count does not match face count");
  } else {
    mesh.face_part.assign(mesh.faces.size(), 0);
  }
  return mesh;
}

/// Sidecar part->vertex map: lines of `part v1 v2 ...`.
inline void save_part_vertex_map(const std::string& path, const PartVertexMap& map) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_part_vertex_map: cannot open " + path);
  for (std::size_t p = 0; p < map.size(); ++p) {
    if (map[p].empty()) continue;
    os << p;
    for (int v : map[p]) os << " " << v;
    os << "\n";
  }
}

inline PartVertexMap load_part_vertex_map(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_part_vertex_map: cannot open " + path);
  PartVertexMap map(PartLabelSpace::kNumClasses);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    int part;
    ls >> part;
    if (part < 0 || part >= static_cast<int>(map.size()))
      throw std::runtime_error("load_part_vertex_map: part index out of range");
    int v;
    while (ls >> v) map[part].push_back(v);
  }
  return map;
}

}  // namespace hoil::sim
