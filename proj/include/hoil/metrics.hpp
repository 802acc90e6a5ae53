#pragma once

// Pose evaluation: MPJPE (millimeters), PCK against a torso-length fraction,
// per-joint error breakdown, segmentation accuracy, and the segmentation-vs-
// pose Pearson correlation. Reports serialize to CSV with a fixed column
// order.

#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "hoil/core.hpp"

namespace hoil {

struct PoseEvalReport {
  double mpjpe_mm = 0.0;
  double pck3 = 0.0;  // percent
  double pck5 = 0.0;  // percent
  std::vector<double> per_joint_mm;  // NaN where a joint is never valid
  std::size_t n_frames = 0;
  std::vector<std::string> warnings;
};

namespace detail_metrics {

inline void check_matched(const std::vector<KeypointSet>& pred,
                          const std::vector<KeypointSet>& gt) {
  if (pred.size() != gt.size())
    throw std::invalid_argument("metrics: prediction/ground-truth frame counts differ");
  if (pred.empty()) throw std::invalid_argument("metrics: no frames");
  for (std::size_t f = 0; f < pred.size(); ++f)
    if (pred[f].size() != gt[f].size())
      throw std::invalid_argument("metrics: keypoint count mismatch at frame " +
                                  std::to_string(f));
}

}  // namespace detail_metrics

/// Mean Euclidean distance over valid (frame, joint) pairs, in millimeters.
/// A joint counts when it is valid in the ground truth.
inline double mpjpe(const std::vector<KeypointSet>& pred, const std::vector<KeypointSet>& gt) {
  detail_metrics::check_matched(pred, gt);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t f = 0; f < pred.size(); ++f)
    for (std::size_t k = 0; k < gt[f].size(); ++k) {
      if (!gt[f].valid[k]) continue;
      total += norm(pred[f].coords[k] - gt[f].coords[k]);
      ++count;
    }
  if (count == 0) throw std::invalid_argument("mpjpe: no valid (frame, joint) pairs");
  return 1000.0 * total / static_cast<double>(count);
}

/// Percentage of valid joints with error strictly below
/// fraction * torso_length of the ground-truth frame. Frames with a
/// degenerate (zero-length) torso are excluded with a warning.
inline double pck(const std::vector<KeypointSet>& pred, const std::vector<KeypointSet>& gt,
                  double fraction, KeypointProfile profile,
                  std::vector<std::string>* warnings = nullptr) {
  detail_metrics::check_matched(pred, gt);
  std::size_t hit = 0, count = 0;
  for (std::size_t f = 0; f < pred.size(); ++f) {
    const double torso = torso_length(gt[f], profile);
    if (torso <= 0.0) {
      if (warnings)
        warnings->push_back("frame " + std::to_string(f) + " excluded: degenerate torso");
      continue;
    }
    for (std::size_t k = 0; k < gt[f].size(); ++k) {
      if (!gt[f].valid[k]) continue;
      ++count;
      hit += norm(pred[f].coords[k] - gt[f].coords[k]) < fraction * torso;
    }
  }
  if (count == 0) throw std::invalid_argument("pck: no valid joints after exclusions");
  return 100.0 * static_cast<double>(hit) / static_cast<double>(count);
}

/// Per-joint mean error in millimeters; NaN marks joints never valid.
inline std::vector<double> per_joint_error(const std::vector<KeypointSet>& pred,
                                           const std::vector<KeypointSet>& gt) {
  detail_metrics::check_matched(pred, gt);
  const std::size_t nk = gt[0].size();
  std::vector<double> total(nk, 0.0);
  std::vector<std::size_t> count(nk, 0);
  for (std::size_t f = 0; f < pred.size(); ++f)
    for (std::size_t k = 0; k < nk; ++k) {
      if (!gt[f].valid[k]) continue;
      total[k] += norm(pred[f].coords[k] - gt[f].coords[k]);
      ++count[k];
    }
  std::vector<double> out(nk);
  for (std::size_t k = 0; k < nk; ++k)
    out[k] = count[k] ? 1000.0 * total[k] / static_cast<double>(count[k])
                      : std::numeric_limits<double>::quiet_NaN();
  return out;
}

inline PoseEvalReport evaluate_pose(const std::vector<KeypointSet>& pred,
                                    const std::vector<KeypointSet>& gt,
                                    KeypointProfile profile) {
  PoseEvalReport r;
  r.mpjpe_mm = mpjpe(pred, gt);
  r.pck3 = pck(pred, gt, 0.3, profile, &r.warnings);
  r.pck5 = pck(pred, gt, 0.5, profile, &r.warnings);
  r.per_joint_mm = per_joint_error(pred, gt);
  r.n_frames = pred.size();
  return r;
}

/// Argmax accuracy of part logits against labels, in percent.
inline double seg_accuracy(const std::vector<int>& pred_argmax, const std::vector<int>& gt) {
  if (pred_argmax.size() != gt.size() || gt.empty())
    throw std::invalid_argument("seg_accuracy: size mismatch or empty");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) hit += pred_argmax[i] == gt[i];
  return 100.0 * static_cast<double>(hit) / static_cast<double>(gt.size());
}

/// Pearson correlation; std::nullopt when either series has zero variance.
inline std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: size mismatch");
  const std::size_t n = x.size();
  if (n < 3) throw std::invalid_argument("pearson: need at least 3 samples");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

// ---------------------------------------------------------------------------
// CSV report output
// ---------------------------------------------------------------------------

inline std::string report_csv(const PoseEvalReport& r) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "metric,value\n";
  os << "mpjpe_mm," << r.mpjpe_mm << "\n";
  os << "pck3," << r.pck3 << "\n";
  os << "pck5," << r.pck5 << "\n";
  os << "n_frames," << r.n_frames << "\n";
  return os.str();
}

inline std::string per_joint_csv(const PoseEvalReport& r, KeypointProfile profile) {
  const auto& names = profile_joint_names(profile);
  std::ostringstream os;
  os << std::setprecision(17);
  os << "joint_index,joint_name,error_mm\n";
  for (std::size_t k = 0; k < r.per_joint_mm.size(); ++k) {
    os << k << "," << (k < names.size() ? names[k] : "joint" + std::to_string(k)) << ",";
    if (std::isnan(r.per_joint_mm[k]))
      os << "absent";
    else
      os << r.per_joint_mm[k];
    os << "\n";
  }
  return os.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_text_file: cannot open " + path);
  os << content;
}

}  // namespace hoil
