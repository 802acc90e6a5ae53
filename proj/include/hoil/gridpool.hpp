#pragma once

// Voxel-grid cell assignment, baseline max pooling, contact-aware part-guided
// pooling (CPPool), unpooling via stored mappings, and skip fusion.
//
// CPPool replaces per-cell max pooling with a weighted sum whose weights are
// a softmax, within each cell, of
//   l = l_imp / T + lambda_part * log(s_part) + lambda_contact * log(s_contact)
// so that points from frequently interacting, contact-prone parts keep
// representation after downsampling.

#include <cstdint>
#include <functional>
#include <map>
#include <unordered_map>

#include "hoil/core.hpp"
#include "hoil/tensor.hpp"

namespace hoil {

using ad::Tensor;

/// Fine-point -> grid-cell assignment at one encoder stage, reused by the
/// decoder for unpooling.
struct PoolMapping {
  std::vector<int> cell_of_point;               // N_fine
  std::vector<std::vector<int>> points_of_cell; // N_coarse, each non-empty
  std::vector<Vec3> cell_centroids;             // N_coarse

  std::size_t num_cells() const { return points_of_cell.size(); }
  std::size_t num_points() const { return cell_of_point.size(); }

  void check_consistent() const {
    for (std::size_t c = 0; c < points_of_cell.size(); ++c) {
      if (points_of_cell[c].empty())
        throw std::invalid_argument("PoolMapping: empty cell " + std::to_string(c));
      for (int p : points_of_cell[c])
        if (p < 0 || p >= static_cast<int>(cell_of_point.size()) ||
            cell_of_point[p] != static_cast<int>(c))
          throw std::invalid_argument("PoolMapping: inconsistent membership for cell " +
                                      std::to_string(c));
    }
  }
};

struct CPPoolConfig {
  double temperature = 1.0;
  double lambda_part = 1.0;
  double lambda_contact = 1.0;
  std::vector<double> part_weights = default_part_weights();  // 26 positive reals
  double log_epsilon = 1e-8;

  void check() const {
    if (temperature <= 0) throw std::invalid_argument("CPPoolConfig: temperature must be > 0");
    if (part_weights.size() != PartLabelSpace::kNumClasses)
      throw std::invalid_argument("CPPoolConfig: part_weights must have 26 entries");
    for (double w : part_weights)
      if (w <= 0) throw std::invalid_argument("CPPoolConfig: part_weights must be positive");
  }
};

/// Per-point pooling signals at one stage.
struct PoolLogits {
  Tensor importance;     // [N]   l_imp
  Tensor part_score;     // [N]   s_part = pi_part . w_part
  Tensor contact_score;  // [N]   s_contact in (0,1)
  Tensor combined;       // [N]   pooling logit l
  Tensor part_logits;    // [N,26] raw aux head output (for the CPPool loss)
  Tensor contact_logits; // [N,1]  raw aux head output (for the CPPool loss)
};

struct PoolWeights {
  Tensor w;  // [N], positive, sums to one within each cell
};

/// Buckets points into axis-aligned cells of size grid_size (floor rule) and
/// computes member centroids. Cell ids are dense, in first-seen point order.
inline PoolMapping assign_cells(const std::vector<Vec3>& points, double grid_size) {
  if (grid_size <= 0) throw std::invalid_argument("assign_cells: grid_size must be > 0");
  PoolMapping m;
  m.cell_of_point.resize(points.size());
  std::map<std::array<int64_t, 3>, int> seen;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!finite(points[i])) throw std::invalid_argument("assign_cells: non-finite coordinate");
    const std::array<int64_t, 3> key = {static_cast<int64_t>(std::floor(points[i][0] / grid_size)),
                                        static_cast<int64_t>(std::floor(points[i][1] / grid_size)),
                                        static_cast<int64_t>(std::floor(points[i][2] / grid_size))};
    auto [it, inserted] = seen.try_emplace(key, static_cast<int>(m.points_of_cell.size()));
    if (inserted) m.points_of_cell.emplace_back();
    m.cell_of_point[i] = it->second;
    m.points_of_cell[it->second].push_back(static_cast<int>(i));
  }
  m.cell_centroids.resize(m.num_cells());
  for (std::size_t c = 0; c < m.num_cells(); ++c) {
    Vec3 acc = {0, 0, 0};
    for (int p : m.points_of_cell[c]) acc = acc + points[p];
    m.cell_centroids[c] = (1.0 / static_cast<double>(m.points_of_cell[c].size())) * acc;
  }
  return m;
}

/// Per-cell, per-channel maximum of fine features.
inline Tensor max_pool(const Tensor& features, const PoolMapping& m) {
  if (features.ndim() != 2 || features.shape()[0] != m.num_points())
    throw std::invalid_argument("max_pool: features " + ad::shape_str(features.shape()) +
                                " do not match mapping with " + std::to_string(m.num_points()) +
                                " points");
  return ad::segment_max(features, m.cell_of_point, static_cast<int>(m.num_cells()));
}

/// Computes the three CPPool signals and the combined pooling logit.
///
/// `part_head` and `contact_head` map stage features [N,C] to [N,26] and
/// [N,1]; `imp_head` maps the channel concatenation of (point, global,
/// keypoint) features to [N,1]. The global feature is the mean of the point
/// features; `keypoint_feat` is the stage-projected query summary, broadcast
/// to every point.
inline PoolLogits cppool_logits(const Tensor& point_feats, const Tensor& keypoint_feat,
                                const std::function<Tensor(const Tensor&)>& part_head,
                                const std::function<Tensor(const Tensor&)>& contact_head,
                                const std::function<Tensor(const Tensor&)>& imp_head,
                                const CPPoolConfig& cfg) {
  cfg.check();
  if (point_feats.ndim() != 2) throw std::invalid_argument("cppool_logits: expected [N,C] features");
  const std::size_t n = point_feats.shape()[0];

  PoolLogits out;
  out.part_logits = part_head(point_feats);
  if (ad::has_nonfinite(out.part_logits))
    throw std::runtime_error("cppool_logits: non-finite output from part head");
  if (out.part_logits.ndim() != 2 ||
      out.part_logits.shape()[1] != static_cast<std::size_t>(PartLabelSpace::kNumClasses))
    throw std::invalid_argument("cppool_logits: part head must emit [N,26]");
  const Tensor pi_part = ad::softmax(out.part_logits, -1);
  const Tensor w_part = Tensor::from({static_cast<std::size_t>(PartLabelSpace::kNumClasses), 1},
                                     std::vector<double>(cfg.part_weights.begin(), cfg.part_weights.end()));
  out.part_score = ad::reshape(ad::matmul(pi_part, w_part), {n});

  out.contact_logits = contact_head(point_feats);
  if (ad::has_nonfinite(out.contact_logits))
    throw std::runtime_error("cppool_logits: non-finite output from contact head");
  out.contact_score = ad::reshape(ad::sigmoid(out.contact_logits), {n});

  const Tensor global_feat = ad::mean(point_feats, 0);  // [C]
  Tensor imp_in = ad::concat(
      {point_feats, ad::expand_leading(global_feat, n), ad::expand_leading(
          keypoint_feat.ndim() == 1 ? keypoint_feat : ad::reshape(keypoint_feat, {keypoint_feat.size()}), n)},
      1);
  out.importance = ad::reshape(imp_head(imp_in), {n});
  if (ad::has_nonfinite(out.importance))
    throw std::runtime_error("cppool_logits: non-finite output from importance head");

  out.combined = ad::add(
      ad::scale(out.importance, 1.0 / cfg.temperature),
      ad::add(ad::scale(ad::log(ad::clamp_min(out.part_score, cfg.log_epsilon)), cfg.lambda_part),
              ad::scale(ad::log(ad::clamp_min(out.contact_score, cfg.log_epsilon)),
                        cfg.lambda_contact)));
  return out;
}

/// Softmax of the combined logits within each cell.
inline PoolWeights cppool_weights(const PoolLogits& logits, const PoolMapping& m) {
  if (logits.combined.shape()[0] != m.num_points())
    throw std::invalid_argument("cppool_weights: logit count does not match mapping");
  m.check_consistent();
  return {ad::segment_softmax(logits.combined, m.cell_of_point, static_cast<int>(m.num_cells()))};
}

/// H_j = sum_{n in cell j} w_n * proj_pool(F_n).
inline Tensor cppool_aggregate(const Tensor& feats, const PoolWeights& w, const PoolMapping& m,
                               const std::function<Tensor(const Tensor&)>& proj_pool) {
  if (feats.ndim() != 2 || feats.shape()[0] != m.num_points())
    throw std::invalid_argument("cppool_aggregate: features do not match mapping");
  Tensor projected = proj_pool(feats);
  if (projected.shape()[0] != m.num_points())
    throw std::invalid_argument("cppool_aggregate: projection changed the row count");
  return ad::segment_sum(ad::scale_rows(projected, w.w), m.cell_of_point,
                         static_cast<int>(m.num_cells()));
}

/// Copies each cell's coarse feature back to its member points. Output rows
/// match the pre-pooling fine set exactly.
inline Tensor unpool(const Tensor& coarse_feats, const PoolMapping& m) {
  if (coarse_feats.ndim() != 2 || coarse_feats.shape()[0] != m.num_cells())
    throw std::invalid_argument("unpool: coarse rows " + ad::shape_str(coarse_feats.shape()) +
                                " != cell count " + std::to_string(m.num_cells()));
  std::vector<std::size_t> rows(m.num_points());
  for (std::size_t i = 0; i < m.num_points(); ++i)
    rows[i] = static_cast<std::size_t>(m.cell_of_point[i]);
  return ad::gather_rows(coarse_feats, rows);
}

/// Elementwise-sum skip fusion. Branch projections (when widths differ) are
/// applied by the caller before fusing.
inline Tensor skip_fuse(const Tensor& decoder_feats, const Tensor& encoder_feats) {
  if (decoder_feats.shape() != encoder_feats.shape())
    throw std::invalid_argument("skip_fuse: shape mismatch " +
                                ad::shape_str(decoder_feats.shape()) + " vs " +
                                ad::shape_str(encoder_feats.shape()));
  return ad::add(decoder_feats, encoder_feats);
}

/// Majority part label and any-contact flag per cell; used to carry labels to
/// coarser stages for the CPPool auxiliary losses.
inline void propagate_labels(const PoolMapping& m, const std::vector<int>& part,
                             const std::vector<uint8_t>& contact, std::vector<int>& part_out,
                             std::vector<uint8_t>& contact_out) {
  if (part.size() != m.num_points() || contact.size() != m.num_points())
    throw std::invalid_argument("propagate_labels: label count does not match mapping");
  part_out.resize(m.num_cells());
  contact_out.resize(m.num_cells());
  for (std::size_t c = 0; c < m.num_cells(); ++c) {
    std::unordered_map<int, int> counts;
    int best = -1, best_count = 0;
    uint8_t any_contact = 0;
    for (int p : m.points_of_cell[c]) {
      const int cnt = ++counts[part[p]];
      // ties resolved toward the smaller class index for determinism
      if (cnt > best_count || (cnt == best_count && part[p] < best)) {
        best = part[p];
        best_count = cnt;
      }
      any_contact |= contact[p];
    }
    part_out[c] = best;
    contact_out[c] = any_contact;
  }
}

}  // namespace hoil
