#pragma once

// FrameRecord: fixed little-endian binary layout for one simulated frame.
//
//   magic "HOILSEQ1" | u32 N | u32 N_k | u32 frame_index
//   points     N*3 f32
//   part       N   u8
//   contact    N   u8
//   keypoints  N_k*3 f32
//   kp_valid   N_k u8
//   kp_contact N_k u8
//
// A sequence directory holds frame files plus a manifest.json naming them in
// order along with dt and the keypoint profile.

#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "hoil/core.hpp"

namespace hoil::pipeline {

constexpr char kFrameMagic[8] = {'H', 'O', 'I', 'L', 'S', 'E', 'Q', '1'};

namespace detail_record {

inline void write_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("FrameRecord: truncated header");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

inline void write_f32(std::ostream& os, float v) {
  uint32_t u;
  std::memcpy(&u, &v, 4);
  write_u32(os, u);
}

inline float read_f32(std::istream& is) {
  const uint32_t u = read_u32(is);
  float v;
  std::memcpy(&v, &u, 4);
  return v;
}

}  // namespace detail_record

struct FrameRecord {
  LabeledPointCloud cloud;  // face_id is not persisted (provenance is sim-internal)
  KeypointSet keypoints;
  uint32_t frame_index = 0;
};

inline void write_frame_record(const std::string& path, const FrameRecord& rec) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_frame_record: cannot open " + path);
  const std::size_t n = rec.cloud.size(), nk = rec.keypoints.size();
  if (rec.cloud.part.size() != n || rec.cloud.contact.size() != n)
    throw std::invalid_argument("write_frame_record: inconsistent cloud sections");
  if (rec.keypoints.valid.size() != nk || rec.keypoints.contact.size() != nk)
    throw std::invalid_argument("write_frame_record: inconsistent keypoint sections");

  os.write(kFrameMagic, 8);
  detail_record::write_u32(os, static_cast<uint32_t>(n));
  detail_record::write_u32(os, static_cast<uint32_t>(nk));
  detail_record::write_u32(os, rec.frame_index);
  for (const auto& p : rec.cloud.cloud.coords)
    for (int a = 0; a < 3; ++a) detail_record::write_f32(os, static_cast<float>(p[a]));
  for (int p : rec.cloud.part) os.put(static_cast<char>(p));
  for (uint8_t c : rec.cloud.contact) os.put(static_cast<char>(c));
  for (const auto& k : rec.keypoints.coords)
    for (int a = 0; a < 3; ++a) detail_record::write_f32(os, static_cast<float>(k[a]));
  for (uint8_t v : rec.keypoints.valid) os.put(static_cast<char>(v));
  for (uint8_t c : rec.keypoints.contact) os.put(static_cast<char>(c));
  if (!os) throw std::runtime_error("write_frame_record: write failed for " + path);
}

inline FrameRecord read_frame_record(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_frame_record: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kFrameMagic, 8) != 0)
    throw std::runtime_error("read_frame_record: bad magic in " + path);
  const uint32_t n = detail_record::read_u32(is);
  const uint32_t nk = detail_record::read_u32(is);
  FrameRecord rec;
  rec.frame_index = detail_record::read_u32(is);
  rec.cloud.cloud.coords.resize(n);
  for (auto& p : rec.cloud.cloud.coords)
    for (int a = 0; a < 3; ++a) p[a] = detail_record::read_f32(is);
  rec.cloud.part.resize(n);
  for (auto& p : rec.cloud.part) p = static_cast<unsigned char>(is.get());
  rec.cloud.contact.resize(n);
  for (auto& c : rec.cloud.contact) c = static_cast<uint8_t>(is.get());
  rec.cloud.face_id.assign(n, -1);
  rec.keypoints.coords.resize(nk);
  for (auto& k : rec.keypoints.coords)
    for (int a = 0; a < 3; ++a) k[a] = detail_record::read_f32(is);
  rec.keypoints.valid.resize(nk);
  for (auto& v : rec.keypoints.valid) v = static_cast<uint8_t>(is.get());
  rec.keypoints.contact.resize(nk);
  for (auto& c : rec.keypoints.contact) c = static_cast<uint8_t>(is.get());
  if (!is) throw std::runtime_error("read_frame_record: sections shorter than the header claims");
  is.peek();
  if (!is.eof()) throw std::runtime_error("read_frame_record: trailing bytes after sections");
  return rec;
}

struct Manifest {
  std::vector<std::string> frame_files;
  double dt = 0.1;
  std::string keypoint_profile = "smpl15obj";
};

inline void write_manifest(const std::string& dir, const Manifest& m) {
  nlohmann::json j;
  j["num_frames"] = m.frame_files.size();
  j["frames"] = m.frame_files;
  j["dt"] = m.dt;
  j["keypoint_profile"] = m.keypoint_profile;
  std::ofstream os(std::filesystem::path(dir) / "manifest.json", std::ios::binary);
  if (!os) throw std::runtime_error("write_manifest: cannot open manifest in " + dir);
  os << j.dump(2) << "\n";
}

inline Manifest read_manifest(const std::string& dir) {
  const auto path = std::filesystem::path(dir) / "manifest.json";
  std::ifstream is(path);
  if (!is) throw std::runtime_error("read_manifest: cannot open " + path.string());
  nlohmann::json j;
  is >> j;
  Manifest m;
  m.frame_files = j.at("frames").get<std::vector<std::string>>();
  m.dt = j.at("dt").get<double>();
  m.keypoint_profile = j.at("keypoint_profile").get<std::string>();
  if (j.at("num_frames").get<std::size_t>() != m.frame_files.size())
    throw std::runtime_error("read_manifest: frame count mismatch");
  return m;
}

}  // namespace hoil::pipeline
