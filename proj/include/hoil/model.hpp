#pragma once

// The toy-scale HOIL network: point embedding, a multi-stage encoder with
// grid pooling (max or CPPool) and serialized windowed attention, a mirrored
// decoder that reuses the stored pool mappings, a keypoint-query
// cross-attention decoder updated at every decoder stage, and the prediction
// heads (segmentation, point contact, keypoint coordinates or heatmaps,
// keypoint contact, contrastive embeddings).

#include "hoil/core.hpp"
#include "hoil/gridpool.hpp"
#include "hoil/losses.hpp"
#include "hoil/nn.hpp"
#include "hoil/serialization.hpp"

namespace hoil {

enum class PoolingKind { Max, CPPool };
enum class Mode { Pretrain, Finetune };

struct ModelConfig {
  // channel widths: embedding + one per encoder stage (length num_stages+1)
  std::vector<std::size_t> channels = {32, 32, 64};
  int num_stages = 2;
  int num_keypoints = 16;
  int num_parts = PartLabelSpace::kNumClasses;
  std::size_t projection_dim = 64;  // contrastive embedding width D
  CurveKind curve;
  GridConfig grid{0.05, 2.0, 2};
  PoolingKind pooling = PoolingKind::CPPool;
  CPPoolConfig cppool;
  std::size_t attention_heads = 2;
  std::size_t attention_window = 16;  // 0 = full attention
  bool use_intensity = false;
  std::size_t heatmap_bins = 64;
  double heatmap_half_extent = 1.5;
  double heatmap_sigma_bins = 1.0;

  std::size_t query_dim() const { return channels.back(); }

  void check() const {
    if (num_stages < 1) throw std::invalid_argument("ModelConfig: num_stages must be >= 1");
    if (channels.size() != static_cast<std::size_t>(num_stages) + 1)
      throw std::invalid_argument("ModelConfig: channels must list embedding + one width per stage (" +
                                  std::to_string(num_stages + 1) + " entries)");
    if (num_keypoints < 1) throw std::invalid_argument("ModelConfig: num_keypoints must be >= 1");
    cppool.check();
  }
};

/// Per-stage bookkeeping kept by the forward pass: the pool mapping, the
/// post-pool serialization, and the CPPool auxiliary logits (at the stage's
/// input resolution).
struct StageTrace {
  PoolMapping mapping;
  std::vector<std::size_t> perm;        // serialization of the pooled points
  ad::Tensor aux_part_logits;           // [N_in, 26]; undefined under max pooling
  ad::Tensor aux_contact_logits;        // [N_in, 1]
};

struct HeadOutputs {
  ad::Tensor seg;               // [N,26] logits, input point order
  ad::Tensor point_contact;     // [N,1] logits, input point order
  ad::Tensor keypoints;         // [N_k,3] meters
  ad::Tensor keypoint_contact;  // [N_k,1] logits
  ad::Tensor embeddings;        // [N,D] unit rows (pretrain mode only)
  ad::Tensor heatmap_logits;    // [N_k,3,bins] (finetune mode only)
  ad::Tensor heatmaps;          // softmax-normalized heatmaps
  HeatmapSpec heatmap_spec;
  std::vector<std::size_t> input_perm;  // input serialization
  std::vector<StageTrace> stages;
};

/// Propagates ground-truth labels along the forward trace: returns the part
/// and contact labels seen by each encoder stage's input points.
struct StageLabels {
  std::vector<std::vector<int>> part;
  std::vector<std::vector<uint8_t>> contact;
};

inline StageLabels propagate_stage_labels(const HeadOutputs& out, const std::vector<int>& part,
                                          const std::vector<uint8_t>& contact) {
  StageLabels labels;
  std::vector<int> cur_part = apply_permutation(part, out.input_perm);
  std::vector<uint8_t> cur_contact = apply_permutation(contact, out.input_perm);
  for (const auto& stage : out.stages) {
    labels.part.push_back(cur_part);
    labels.contact.push_back(cur_contact);
    std::vector<int> pooled_part;
    std::vector<uint8_t> pooled_contact;
    propagate_labels(stage.mapping, cur_part, cur_contact, pooled_part, pooled_contact);
    cur_part = apply_permutation(pooled_part, stage.perm);
    cur_contact = apply_permutation(pooled_contact, stage.perm);
  }
  return labels;
}

class HoilModel {
 public:
  HoilModel(ModelConfig cfg, Mode mode, uint64_t seed)
      : cfg_(std::move(cfg)), mode_(mode), store_(seed) {
    cfg_.check();
    const std::size_t c0 = cfg_.channels[0];
    const std::size_t cq = cfg_.query_dim();
    const std::size_t in_dim = cfg_.use_intensity ? 4 : 3;

    embed_ = nn::Mlp(store_, "embed", in_dim, c0);
    for (int i = 1; i <= cfg_.num_stages; ++i) {
      const std::string tag = "enc" + std::to_string(i);
      const std::size_t cin = cfg_.channels[i - 1], cout = cfg_.channels[i];
      EncoderStage st;
      st.proj_pool = nn::Mlp(store_, tag + ".proj_pool", cin, cout);
      if (cfg_.pooling == PoolingKind::CPPool) {
        st.part_head = nn::Mlp(store_, tag + ".part_head", cin, cfg_.num_parts);
        st.contact_head = nn::Mlp(store_, tag + ".contact_head", cin, 1);
        st.imp_head = nn::Mlp(store_, tag + ".imp_head", 3 * cin, 1);
        st.query_proj = nn::Linear(store_, tag + ".query_proj", cq, cin);
      }
      st.pos = nn::Mlp(store_, tag + ".pos", 3, cout);
      st.block = nn::TransformerBlock(store_, tag + ".block", cout, cfg_.attention_heads);
      encoder_.push_back(std::move(st));
    }
    for (int i = cfg_.num_stages; i >= 1; --i) {
      const std::string tag = "dec" + std::to_string(i);
      const std::size_t c_coarse = cfg_.channels[i], c_fine = cfg_.channels[i - 1];
      DecoderStage st;
      st.proj_dec = nn::Linear(store_, tag + ".proj_dec", c_coarse, c_fine);
      st.proj_enc = nn::Linear(store_, tag + ".proj_enc", c_fine, c_fine);
      st.norm = nn::LayerNorm(store_, tag + ".norm", c_fine);
      st.mlp = nn::Mlp(store_, tag + ".mlp", c_fine, c_fine);
      st.kv_proj = nn::Linear(store_, tag + ".kv_proj", c_fine, cq);
      st.kv_pos = nn::Mlp(store_, tag + ".kv_pos", 3, cq);
      st.query_block = nn::CrossAttentionBlock(store_, tag + ".query_block", cq, cfg_.attention_heads);
      decoder_.push_back(std::move(st));
    }
    queries_ = store_.create("queries", {static_cast<std::size_t>(cfg_.num_keypoints), cq},
                             nn::Init::Normal, 0.02);
    seg_head_ = nn::Mlp(store_, "seg_head", c0, cfg_.num_parts);
    point_contact_head_ = nn::Mlp(store_, "point_contact_head", c0, 1);
    keypoint_contact_head_ = nn::Mlp(store_, "keypoint_contact_head", cq, 1);
    if (mode_ == Mode::Pretrain) {
      coord_head_ = nn::Mlp(store_, "coord_head", cq, 3);
      proj_cl_ = nn::Mlp(store_, "proj_cl", c0, cfg_.projection_dim);
    } else {
      heatmap_head_ = nn::Mlp(store_, "heatmap_head", cq, 3 * cfg_.heatmap_bins);
    }
  }

  const ModelConfig& config() const { return cfg_; }
  Mode mode() const { return mode_; }
  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }
  ad::Tensor queries() const { return queries_; }

  /// Per-point embedding MLP over coordinates (plus intensity when enabled).
  ad::Tensor embed(const PointCloud& cloud) const {
    if (cloud.size() == 0) throw std::invalid_argument("embed: empty cloud");
    const std::size_t n = cloud.size();
    const std::size_t in_dim = cfg_.use_intensity ? 4 : 3;
    std::vector<double> data(n * in_dim);
    for (std::size_t i = 0; i < n; ++i) {
      for (int a = 0; a < 3; ++a) data[i * in_dim + a] = cloud.coords[i][a];
      if (cfg_.use_intensity)
        data[i * in_dim + 3] = cloud.has_intensity() ? cloud.intensity[i] : 0.0;
    }
    return embed_(ad::Tensor::from({n, in_dim}, std::move(data)));
  }

  struct StageResult {
    std::vector<Vec3> points;  // pooled, serialized order
    ad::Tensor feats;          // [N_coarse, C_i]
    StageTrace trace;
  };

  /// One encoder stage: pool (max or CPPool), re-serialize, attention block.
  StageResult encoder_stage(const std::vector<Vec3>& points, const ad::Tensor& feats,
                            int stage) const {
    if (stage < 1 || stage > cfg_.num_stages)
      throw std::invalid_argument("encoder_stage: stage out of range");
    if (feats.shape()[0] != points.size())
      throw std::invalid_argument("encoder_stage: feature/point count mismatch");
    const EncoderStage& st = encoder_[stage - 1];

    StageResult r;
    r.trace.mapping = assign_cells(points, cfg_.grid.stage_grid_size(stage));
    if (r.trace.mapping.num_cells() == 0) throw std::invalid_argument("encoder_stage: empty pooled set");

    ad::Tensor pooled;
    if (cfg_.pooling == PoolingKind::CPPool) {
      const ad::Tensor query_summary = st.query_proj(ad::reshape(ad::mean(queries_, 0),
                                                                 {1, cfg_.query_dim()}));
      PoolLogits logits = cppool_logits(
          feats, ad::reshape(query_summary, {cfg_.channels[stage - 1]}),
          [&](const ad::Tensor& x) { return st.part_head(x); },
          [&](const ad::Tensor& x) { return st.contact_head(x); },
          [&](const ad::Tensor& x) { return st.imp_head(x); }, cfg_.cppool);
      r.trace.aux_part_logits = logits.part_logits;
      r.trace.aux_contact_logits = logits.contact_logits;
      const PoolWeights w = cppool_weights(logits, r.trace.mapping);
      pooled = cppool_aggregate(feats, w, r.trace.mapping,
                                [&](const ad::Tensor& x) { return st.proj_pool(x); });
    } else {
      pooled = max_pool(st.proj_pool(feats), r.trace.mapping);
    }

    PointCloud pooled_cloud;
    pooled_cloud.coords = r.trace.mapping.cell_centroids;
    r.trace.perm = serialize(pooled_cloud, cfg_.curve).permutation;
    r.points = apply_permutation(pooled_cloud.coords, r.trace.perm);
    ad::Tensor h = ad::gather_rows(pooled, r.trace.perm);
    h = ad::add(h, st.pos(coords_tensor(r.points)));
    r.feats = st.block(h, cfg_.attention_window);
    return r;
  }

  /// One decoder stage: unpool through the stored mapping, fuse the encoder
  /// skip, and run the pointwise block.
  ad::Tensor decoder_stage(const ad::Tensor& coarse_feats, const StageTrace& trace,
                           const ad::Tensor& encoder_skip, int stage) const {
    if (stage < 1 || stage > cfg_.num_stages)
      throw std::invalid_argument("decoder_stage: stage out of range");
    if (coarse_feats.shape()[0] != trace.mapping.num_cells() ||
        encoder_skip.shape()[0] != trace.mapping.num_points())
      throw std::invalid_argument("decoder_stage: trace does not match this stage");
    const DecoderStage& st = decoder_[cfg_.num_stages - stage];
    const ad::Tensor cell_order = ad::gather_rows(coarse_feats, invert_permutation(trace.perm));
    const ad::Tensor fine = unpool(cell_order, trace.mapping);
    ad::Tensor fused = skip_fuse(st.proj_dec(fine), st.proj_enc(encoder_skip));
    return ad::add(fused, st.mlp(st.norm(fused)));
  }

  /// Cross-attention update of the keypoint queries against point features;
  /// point coordinates enter the keys/values through a learned positional map.
  ad::Tensor keypoint_decoder(const ad::Tensor& queries, const ad::Tensor& point_feats,
                              const std::vector<Vec3>& coords, int stage) const {
    if (coords.empty()) throw std::invalid_argument("keypoint_decoder: no points");
    if (point_feats.shape()[0] != coords.size())
      throw std::invalid_argument("keypoint_decoder: feature/coordinate mismatch");
    const DecoderStage& st = decoder_[cfg_.num_stages - stage];
    const ad::Tensor kv = ad::add(st.kv_proj(point_feats), st.kv_pos(coords_tensor(coords)));
    return st.query_block(queries, kv);
  }

  HeadOutputs forward(const PointCloud& cloud) const {
    if (cloud.size() == 0) throw std::invalid_argument("forward: empty cloud");
    HeadOutputs out;

    const SerializationResult ser = serialize(cloud, cfg_.curve);
    out.input_perm = ser.permutation;
    PointCloud ordered;
    ordered.coords = apply_permutation(cloud.coords, ser.permutation);
    if (cloud.has_intensity()) ordered.intensity = apply_permutation(cloud.intensity, ser.permutation);

    std::vector<std::vector<Vec3>> stage_points;  // input points per stage
    std::vector<ad::Tensor> stage_feats;          // encoder features per level
    stage_points.push_back(ordered.coords);
    stage_feats.push_back(embed(ordered));

    for (int i = 1; i <= cfg_.num_stages; ++i) {
      StageResult r = encoder_stage(stage_points[i - 1], stage_feats[i - 1], i);
      out.stages.push_back(std::move(r.trace));
      stage_points.push_back(std::move(r.points));
      stage_feats.push_back(std::move(r.feats));
    }

    ad::Tensor dec = stage_feats[cfg_.num_stages];
    ad::Tensor q = queries_;
    for (int i = cfg_.num_stages; i >= 1; --i) {
      dec = decoder_stage(dec, out.stages[i - 1], stage_feats[i - 1], i);
      q = keypoint_decoder(q, dec, stage_points[i - 1], i);
    }

    const auto inv = invert_permutation(ser.permutation);
    out.seg = ad::gather_rows(seg_head_(dec), inv);
    out.point_contact = ad::gather_rows(point_contact_head_(dec), inv);
    out.keypoint_contact = keypoint_contact_head_(q);

    if (mode_ == Mode::Pretrain) {
      out.keypoints = coord_head_(q);
      out.embeddings = ad::gather_rows(ad::normalize_rows(proj_cl_(dec)), inv);
    } else {
      out.heatmap_spec = heatmap_spec(cloud);
      out.heatmap_logits =
          ad::reshape(heatmap_head_(q),
                      {static_cast<std::size_t>(cfg_.num_keypoints), 3, cfg_.heatmap_bins});
      out.heatmaps = ad::softmax(out.heatmap_logits, -1);
      out.keypoints = heatmap_expectation(out.heatmaps, out.heatmap_spec);
    }
    return out;
  }

  /// Heatmap geometry for a sample: a cube centered on the cloud centroid.
  HeatmapSpec heatmap_spec(const PointCloud& cloud) const {
    HeatmapSpec spec;
    Vec3 c = {0, 0, 0};
    for (const auto& p : cloud.coords) c = c + p;
    spec.center = (1.0 / static_cast<double>(cloud.size())) * c;
    spec.half_extent = cfg_.heatmap_half_extent;
    spec.bins = cfg_.heatmap_bins;
    spec.sigma_bins = cfg_.heatmap_sigma_bins;
    return spec;
  }

  /// Loads pre-training weights into a fine-tuning model. Queries are copied
  /// only when the keypoint counts match; otherwise `reinit_queries` must be
  /// set and the fresh initialization is kept.
  void load_pretrained(const ad::NamedTensors& entries, bool reinit_queries) {
    ad::NamedTensors filtered;
    for (const auto& [name, t] : entries) {
      if (name.rfind("__opt", 0) == 0 || name.rfind("__", 0) == 0) continue;
      if (name == "queries") {
        auto* own = store_.find("queries");
        if (t.shape() != own->tensor.shape()) {
          if (!reinit_queries)
            throw std::runtime_error(
                "load_pretrained: keypoint count differs from the checkpoint; pass "
                "reinit_queries to re-initialize the keypoint query embeddings");
          continue;  // keep the fresh initialization
        }
      }
      filtered.emplace_back(name, t);
    }
    store_.load(filtered, /*strict=*/false);
  }

 private:
  struct EncoderStage {
    nn::Mlp proj_pool, part_head, contact_head, imp_head, pos;
    nn::Linear query_proj;
    nn::TransformerBlock block;
  };
  struct DecoderStage {
    nn::Linear proj_dec, proj_enc, kv_proj;
    nn::LayerNorm norm;
    nn::Mlp mlp, kv_pos;
    nn::CrossAttentionBlock query_block;
  };

  static ad::Tensor coords_tensor(const std::vector<Vec3>& pts) {
    std::vector<double> data;
    data.reserve(pts.size() * 3);
    for (const auto& p : pts) data.insert(data.end(), p.begin(), p.end());
    return ad::Tensor::from({pts.size(), 3}, std::move(data));
  }

  ModelConfig cfg_;
  Mode mode_;
  nn::ParamStore store_;
  nn::Mlp embed_;
  std::vector<EncoderStage> encoder_;
  std::vector<DecoderStage> decoder_;
  ad::Tensor queries_;
  nn::Mlp seg_head_, point_contact_head_, keypoint_contact_head_, coord_head_, proj_cl_,
      heatmap_head_;
};

}  // namespace hoil
