#pragma once

// Composite training objectives over model outputs: the pre-training sum
// (segmentation, contact, coordinates, keypoint contact, HOICL, CPPool) and
// the fine-tuning sum (heatmap KL + limb), each with a per-term breakdown
// that recombines exactly to the total.

#include "hoil/losses.hpp"
#include "hoil/model.hpp"

namespace hoil {

struct PretrainLossWeights {
  double seg = 1.0;
  double contact = 1.0;
  double coord = 0.5;
  double k_contact = 0.02;
  double hoicl = 1.0;
  double cppool = 1.0;
};

struct FinetuneLossWeights {
  double heatmap = 1.0;
  double limb = 0.1;
};

struct LossBreakdown {
  ad::Tensor total;
  std::map<std::string, double> terms;  // weighted contribution per term
  std::vector<std::string> warnings;
  HoiclResult hoicl;  // populated when the HOICL term was computed

  double term(const std::string& name) const {
    auto it = terms.find(name);
    return it == terms.end() ? 0.0 : it->second;
  }
};

/// Masked MSE over valid keypoints (mean over valid coordinates).
inline ad::Tensor keypoint_mse(const ad::Tensor& pred, const KeypointSet& gt) {
  if (pred.ndim() != 2 || pred.shape()[1] != 3 || pred.shape()[0] != gt.size())
    throw std::invalid_argument("keypoint_mse: pred must be [N_k,3] matching ground truth");
  const std::size_t nk = gt.size();
  std::vector<double> gt_data(nk * 3, 0.0), mask(nk, 0.0);
  std::size_t n_valid = 0;
  for (std::size_t k = 0; k < nk; ++k) {
    if (!gt.valid[k]) continue;
    ++n_valid;
    mask[k] = 1.0;
    for (int a = 0; a < 3; ++a) gt_data[k * 3 + a] = gt.coords[k][a];
  }
  if (n_valid == 0) throw std::invalid_argument("keypoint_mse: no valid keypoints");
  ad::Tensor diff = ad::sub(pred, ad::Tensor::from({nk, 3}, std::move(gt_data)));
  ad::Tensor masked = ad::scale_rows(ad::mul(diff, diff), ad::Tensor::from({nk}, std::move(mask)));
  return ad::scale(ad::sum_all(masked), 1.0 / static_cast<double>(3 * n_valid));
}

/// Pre-training objective. Term weights follow the published recipe
/// (1.0, 1.0, 0.5, 0.02, 1.0, 1.0); the contrastive admixture for the
/// segmentation feature space lives inside the HOICL global term. Terms whose
/// weight is zero are skipped entirely.
inline LossBreakdown pretrain_loss(const HeadOutputs& out, const LabeledPointCloud& gt,
                                   const KeypointSet& gt_keypoints,
                                   const PretrainLossWeights& weights, const HOICLConfig& hoicl_cfg,
                                   const PartHierarchy& hierarchy, const ad::Tensor& tsc_targets,
                                   std::mt19937_64& rng) {
  const std::size_t n = gt.size();
  if (!out.seg.defined() || out.seg.shape()[0] != n)
    throw std::invalid_argument("pretrain_loss: segmentation labels missing or wrong count (seg term)");
  if (gt.part.size() != n) throw std::invalid_argument("pretrain_loss: part labels missing (seg term)");
  if (gt.contact.size() != n)
    throw std::invalid_argument("pretrain_loss: contact labels missing (contact term)");
  if (gt_keypoints.size() != out.keypoints.shape()[0])
    throw std::invalid_argument("pretrain_loss: keypoint labels missing (coord term)");

  LossBreakdown r;
  r.total = ad::Tensor::scalar(0.0);
  auto accumulate = [&r](const std::string& name, const ad::Tensor& term, double weight) {
    ad::Tensor weighted = ad::scale(term, weight);
    r.terms[name] = weighted.item();
    r.total = ad::add(r.total, weighted);
  };

  if (weights.seg != 0.0) accumulate("seg", cross_entropy(out.seg, gt.part), weights.seg);

  if (weights.contact != 0.0) {
    // contact supervision excludes background points; classes are balanced
    std::vector<double> w(n, 0.0);
    std::size_t pos = 0, neg = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (gt.part[i] == PartLabelSpace::kBackgroundClass) continue;
      (gt.contact[i] ? pos : neg) += 1;
    }
    if (pos + neg == 0) {
      r.warnings.push_back("contact term skipped: no non-background points");
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        if (gt.part[i] == PartLabelSpace::kBackgroundClass) continue;
        w[i] = gt.contact[i] ? (pos ? 1.0 / static_cast<double>(pos) : 0.0)
                             : (neg ? 1.0 / static_cast<double>(neg) : 0.0);
      }
      accumulate("contact", binary_cross_entropy(out.point_contact, gt.contact, w),
                 weights.contact);
    }
  }

  if (weights.coord != 0.0)
    accumulate("coord", keypoint_mse(out.keypoints, gt_keypoints), weights.coord);

  if (weights.k_contact != 0.0) {
    std::vector<double> w(gt_keypoints.size(), 0.0);
    std::size_t pos = 0, neg = 0;
    for (std::size_t k = 0; k < gt_keypoints.size(); ++k)
      if (gt_keypoints.valid[k]) (gt_keypoints.contact[k] ? pos : neg) += 1;
    if (pos + neg == 0) {
      r.warnings.push_back("keypoint contact term skipped: no valid keypoints");
    } else {
      for (std::size_t k = 0; k < gt_keypoints.size(); ++k) {
        if (!gt_keypoints.valid[k]) continue;
        w[k] = gt_keypoints.contact[k] ? (pos ? 1.0 / static_cast<double>(pos) : 0.0)
                                       : (neg ? 1.0 / static_cast<double>(neg) : 0.0);
      }
      accumulate("k_contact",
                 binary_cross_entropy(out.keypoint_contact, gt_keypoints.contact, w),
                 weights.k_contact);
    }
  }

  if (weights.hoicl != 0.0) {
    if (!out.embeddings.defined())
      throw std::invalid_argument("pretrain_loss: embeddings missing (hoicl term)");
    r.hoicl = hoicl(out.embeddings, gt.part, gt.contact, hoicl_cfg, hierarchy, tsc_targets, rng);
    for (const auto& w : r.hoicl.warnings) r.warnings.push_back("hoicl: " + w);
    ad::Tensor weighted = ad::scale(r.hoicl.total, weights.hoicl);
    r.terms["hoicl"] = weighted.item();
    r.total = ad::add(r.total, weighted);
  }

  if (weights.cppool != 0.0) {
    if (!out.stages.empty() && out.stages.front().aux_part_logits.defined()) {
      const StageLabels labels = propagate_stage_labels(out, gt.part, gt.contact);
      std::vector<ad::Tensor> part_logits, contact_logits;
      for (const auto& s : out.stages) {
        part_logits.push_back(s.aux_part_logits);
        contact_logits.push_back(s.aux_contact_logits);
      }
      accumulate("cppool", cppool_loss(part_logits, contact_logits, labels.part, labels.contact),
                 weights.cppool);
    } else {
      r.warnings.push_back("cppool term skipped: model ran without CPPool heads");
    }
  }

  return r;
}

/// Fine-tuning objective: heatmap KL plus the limb regularizer on the decoded
/// keypoints, weighted 1.0 and 0.1.
inline LossBreakdown finetune_loss(const HeadOutputs& out, const KeypointSet& gt,
                                   const Skeleton& skeleton,
                                   const FinetuneLossWeights& weights = {}) {
  if (!out.heatmap_logits.defined())
    throw std::invalid_argument("finetune_loss: model outputs carry no heatmaps");
  LossBreakdown r;
  r.total = ad::Tensor::scalar(0.0);

  HeatmapLossResult hm = heatmap_kl_loss(out.heatmap_logits, out.heatmap_spec, gt);
  if (hm.range_warnings > 0)
    r.warnings.push_back(std::to_string(hm.range_warnings) +
                         " keypoint axes clamped to the heatmap range");
  ad::Tensor weighted_hm = ad::scale(hm.loss, weights.heatmap);
  r.terms["heatmap"] = weighted_hm.item();
  r.total = ad::add(r.total, weighted_hm);

  const Skeleton usable = prune_skeleton(skeleton, gt);
  ad::Tensor weighted_limb = ad::scale(limb_loss(out.keypoints, gt, usable), weights.limb);
  r.terms["limb"] = weighted_limb.item();
  r.total = ad::add(r.total, weighted_limb);
  return r;
}

}  // namespace hoil
