#pragma once

// Training objectives: cross-entropy and MSE basics, supervised contrastive
// learning (SupCon) with its hierarchical (HMLC) and targeted (TSC) variants,
// the interaction-aware composite (HOICL), the pooling auxiliary losses, the
// heatmap KL loss, and the limb loss.

#include <map>
#include <random>
#include <set>

#include "hoil/core.hpp"
#include "hoil/nn.hpp"
#include "hoil/tensor.hpp"

namespace hoil {

using ad::Tensor;

// ---------------------------------------------------------------------------
// Cross-entropy helpers
// ---------------------------------------------------------------------------

/// Mean cross-entropy of row logits against integer labels. `row_weight`
/// (optional) weights rows; the result is sum(w*ce)/sum(w).
inline Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                            const std::vector<double>& row_weight = {}) {
  if (logits.ndim() != 2 || logits.shape()[0] != labels.size())
    throw std::invalid_argument("cross_entropy: logits " + ad::shape_str(logits.shape()) +
                                " do not match " + std::to_string(labels.size()) + " labels");
  const std::size_t n = logits.shape()[0], c = logits.shape()[1];
  if (!row_weight.empty() && row_weight.size() != n)
    throw std::invalid_argument("cross_entropy: row weight count mismatch");
  std::vector<double> pick(n * c, 0.0);
  double total_w = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= static_cast<int>(c))
      throw std::invalid_argument("cross_entropy: label out of range at row " + std::to_string(i));
    const double w = row_weight.empty() ? 1.0 : row_weight[i];
    pick[i * c + labels[i]] = -w;
    total_w += w;
  }
  if (total_w <= 0.0) throw std::invalid_argument("cross_entropy: no weighted rows");
  return ad::scale(ad::sum_all(ad::mul(ad::log_softmax(logits, -1), Tensor::from({n, c}, pick))),
                   1.0 / total_w);
}

/// Binary cross-entropy with logits [N] or [N,1] against 0/1 targets, with
/// optional row weights (sum(w*bce)/sum(w)).
inline Tensor binary_cross_entropy(const Tensor& logits, const std::vector<uint8_t>& targets,
                                   const std::vector<double>& row_weight = {}) {
  const std::size_t n = targets.size();
  if (logits.size() != n)
    throw std::invalid_argument("binary_cross_entropy: logit count " +
                                std::to_string(logits.size()) + " != target count " +
                                std::to_string(n));
  Tensor x = logits.ndim() == 1 ? logits : ad::reshape(logits, {n});
  // bce(x, y) = softplus(x) - x*y
  std::vector<double> y(n), w(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) y[i] = targets[i] ? 1.0 : 0.0;
  if (!row_weight.empty()) {
    if (row_weight.size() != n)
      throw std::invalid_argument("binary_cross_entropy: row weight count mismatch");
    w = row_weight;
  }
  const double total_w = std::accumulate(w.begin(), w.end(), 0.0);
  if (total_w <= 0.0) throw std::invalid_argument("binary_cross_entropy: no weighted rows");
  Tensor per = ad::sub(ad::softplus(x), ad::mul(x, Tensor::from({n}, std::move(y))));
  return ad::scale(ad::sum_all(ad::mul(per, Tensor::from({n}, std::move(w)))), 1.0 / total_w);
}

/// Row weights that equalize the total contribution of each class present in
/// `labels` (inverse-frequency weighting).
template <typename Label>
std::vector<double> balanced_row_weights(const std::vector<Label>& labels) {
  std::map<Label, std::size_t> counts;
  for (const Label& l : labels) ++counts[l];
  std::vector<double> w(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    w[i] = 1.0 / static_cast<double>(counts[labels[i]]);
  return w;
}

// ---------------------------------------------------------------------------
// Supervised contrastive loss
// ---------------------------------------------------------------------------

struct ContrastiveBatch {
  Tensor embeddings;          // [M,D], rows unit-norm
  std::vector<int> labels;    // optional bookkeeping, size M or empty
  std::vector<uint8_t> mask;  // [M*M] positives; diagonal false, symmetric
  double temperature = 0.07;
};

/// Positive-pair mask from category labels: mask[n,m] = (labels[n]==labels[m]),
/// diagonal false.
inline std::vector<uint8_t> mask_from_labels(const std::vector<int>& labels) {
  const std::size_t m = labels.size();
  std::vector<uint8_t> mask(m * m, 0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) mask[i * m + j] = (i != j && labels[i] == labels[j]);
  return mask;
}

inline bool mask_has_positive(const std::vector<uint8_t>& mask) {
  for (uint8_t v : mask)
    if (v) return true;
  return false;
}

/// SupCon: for each anchor n with positive set P(n),
///   -(1/|P(n)|) sum_{m in P(n)} log( exp(z_n.z_m/tau) / sum_{l!=n} exp(z_n.z_l/tau) ),
/// averaged over anchors that have at least one positive. Anchors without
/// positives are skipped, not zero-counted.
inline Tensor supcon(const ContrastiveBatch& batch) {
  const std::size_t m = batch.embeddings.shape()[0];
  if (batch.embeddings.ndim() != 2 || m < 2)
    throw std::invalid_argument("supcon: need at least 2 embeddings, got " +
                                ad::shape_str(batch.embeddings.shape()));
  if (batch.mask.size() != m * m)
    throw std::invalid_argument("supcon: mask size != M*M");
  if (batch.temperature <= 0) throw std::invalid_argument("supcon: temperature must be > 0");
  for (std::size_t i = 0; i < m; ++i) {
    if (batch.mask[i * m + i]) throw std::invalid_argument("supcon: mask diagonal must be false");
    for (std::size_t j = 0; j < i; ++j)
      if (batch.mask[i * m + j] != batch.mask[j * m + i])
        throw std::invalid_argument("supcon: mask must be symmetric");
  }

  std::vector<double> pos_count(m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) pos_count[i] += batch.mask[i * m + j];
  std::size_t contributing = 0;
  for (double c : pos_count) contributing += c > 0;
  if (contributing == 0) throw std::invalid_argument("supcon: degenerate batch, no positive pairs");

  const Tensor sims =
      ad::scale(ad::matmul(batch.embeddings, ad::transpose(batch.embeddings)),
                1.0 / batch.temperature);

  // Constant per-row shift (max over the off-diagonal) for a stable logsumexp.
  std::vector<double> shift(m, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (i != j) shift[i] = std::max(shift[i], sims.data()[i * m + j]);
  std::vector<double> shift_mat(m * m), offdiag(m * m, 1.0);
  for (std::size_t i = 0; i < m; ++i) {
    offdiag[i * m + i] = 0.0;
    for (std::size_t j = 0; j < m; ++j) shift_mat[i * m + j] = shift[i];
  }

  Tensor expd = ad::mul(ad::exp(ad::sub(sims, Tensor::from({m, m}, std::move(shift_mat)))),
                        Tensor::from({m, m}, std::move(offdiag)));
  Tensor log_denom = ad::add(ad::log(ad::sum(expd, 1)), Tensor::from({m}, std::move(shift)));

  // Mean positive similarity per anchor, then the average over contributing
  // anchors of (log_denom - mean_pos).
  std::vector<double> pos_w(m * m, 0.0), anchor_w(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    if (pos_count[i] == 0) continue;
    anchor_w[i] = 1.0 / static_cast<double>(contributing);
    for (std::size_t j = 0; j < m; ++j)
      if (batch.mask[i * m + j]) pos_w[i * m + j] = 1.0 / pos_count[i];
  }
  Tensor mean_pos = ad::sum(ad::mul(sims, Tensor::from({m, m}, std::move(pos_w))), 1);
  return ad::sum_all(
      ad::mul(ad::sub(log_denom, mean_pos), Tensor::from({m}, std::move(anchor_w))));
}

// ---------------------------------------------------------------------------
// Index sets and masks for the interaction terms
// ---------------------------------------------------------------------------

struct IndexSets {
  std::vector<int> fir;           // frequently interacting body points
  std::vector<int> obj;           // object points
  std::vector<int> human_contact; // human points in contact
  std::vector<int> object_contact;

  static IndexSets from_labels(const std::vector<int>& parts,
                               const std::vector<uint8_t>& contacts) {
    if (parts.size() != contacts.size())
      throw std::invalid_argument("IndexSets: parts/contacts size mismatch");
    IndexSets s;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const int idx = static_cast<int>(i);
      if (is_fir_part(parts[i])) s.fir.push_back(idx);
      if (parts[i] == PartLabelSpace::kObjectClass) {
        s.obj.push_back(idx);
        if (contacts[i]) s.object_contact.push_back(idx);
      } else if (parts[i] < PartLabelSpace::kNumBodyParts && contacts[i]) {
        s.human_contact.push_back(idx);
      }
    }
    return s;
  }
};

/// Selection of points plus a positive-pair mask over them.
struct MaskedSelection {
  std::vector<int> indices;      // into the frame's point order
  std::vector<int> categories;   // binary category per selected point
  std::vector<uint8_t> mask;     // |indices|^2 positives
};

namespace detail_losses {

inline MaskedSelection two_set_mask(const char* op, const std::vector<int>& set_a,
                                    const std::vector<int>& set_b) {
  std::set<int> sa(set_a.begin(), set_a.end());
  for (int i : set_b)
    if (sa.count(i)) throw std::invalid_argument(std::string(op) + ": overlapping index sets");
  MaskedSelection sel;
  for (int i : set_a) {
    sel.indices.push_back(i);
    sel.categories.push_back(0);
  }
  for (int i : set_b) {
    sel.indices.push_back(i);
    sel.categories.push_back(1);
  }
  sel.mask = mask_from_labels(sel.categories);
  return sel;
}

}  // namespace detail_losses

/// M^fir over Y_fir and Y_obj: positives are same-category pairs (both FIR or
/// both object).
inline MaskedSelection build_fir_mask(const IndexSets& sets) {
  return detail_losses::two_set_mask("build_fir_mask", sets.fir, sets.obj);
}

/// M^hoc over Y_hc and Y_oc: positives are both-human-contact or
/// both-object-contact pairs.
inline MaskedSelection build_hoc_mask(const IndexSets& sets) {
  return detail_losses::two_set_mask("build_hoc_mask", sets.human_contact, sets.object_contact);
}

// ---------------------------------------------------------------------------
// Hierarchical and targeted contrastive objectives
// ---------------------------------------------------------------------------

/// Three-level label hierarchy over the 26 part classes. Level 0 is the
/// coarsest; each level maps a fine class to its group at that level.
struct PartHierarchy {
  std::vector<std::vector<int>> levels;

  static PartHierarchy default_hierarchy() {
    PartHierarchy h;
    const int C = PartLabelSpace::kNumClasses;
    std::vector<int> coarse(C), middle(C), fine(C);
    for (int p = 0; p < C; ++p) {
      fine[p] = p;
      if (p == PartLabelSpace::kObjectClass)
        coarse[p] = 1;
      else if (p == PartLabelSpace::kBackgroundClass)
        coarse[p] = 2;
      else
        coarse[p] = 0;
    }
    auto mid = [&](int p) {
      switch (p) {
        case kNeck:
        case kHead:
          return 0;  // head
        case kPelvis:
        case kSpine1:
        case kSpine2:
        case kSpine3:
        case kLeftCollar:
        case kRightCollar:
          return 1;  // torso
        case kLeftShoulder:
        case kRightShoulder:
        case kLeftElbow:
        case kRightElbow:
        case kLeftWrist:
        case kRightWrist:
          return 2;  // arm
        case kLeftHand:
        case kRightHand:
          return 3;  // hand
        case kLeftHip:
        case kRightHip:
        case kLeftKnee:
        case kRightKnee:
        case kLeftAnkle:
        case kRightAnkle:
          return 4;  // leg
        case kLeftFoot:
        case kRightFoot:
          return 5;  // foot
        case PartLabelSpace::kObjectClass:
          return 6;
        default:
          return 7;  // background
      }
    };
    for (int p = 0; p < C; ++p) middle[p] = mid(p);
    h.levels = {coarse, middle, fine};
    return h;
  }

  /// Checks that each level refines the one above it.
  void check_consistent() const {
    for (std::size_t l = 1; l < levels.size(); ++l) {
      std::map<int, int> seen;  // finer group -> coarser group
      for (std::size_t p = 0; p < levels[l].size(); ++p) {
        auto [it, inserted] = seen.try_emplace(levels[l][p], levels[l - 1][p]);
        if (!inserted && it->second != levels[l - 1][p])
          throw std::invalid_argument("PartHierarchy: level " + std::to_string(l) +
                                      " does not refine level " + std::to_string(l - 1));
      }
    }
  }
};

/// Hierarchical multi-level contrastive loss: level-weighted SupCon with
/// positives defined by same-label-at-level; weight 1/2^depth, depth 0 the
/// coarsest.
inline Tensor hmlc(const Tensor& embeddings, const std::vector<int>& fine_labels,
                   const PartHierarchy& hierarchy, double tau) {
  if (embeddings.ndim() != 2 || embeddings.shape()[0] < 2)
    throw std::invalid_argument("hmlc: need at least 2 embeddings");
  if (fine_labels.size() != embeddings.shape()[0])
    throw std::invalid_argument("hmlc: label count mismatch");
  hierarchy.check_consistent();
  Tensor total = Tensor::scalar(0.0);
  double weight = 1.0;
  for (const auto& level : hierarchy.levels) {
    std::vector<int> labels(fine_labels.size());
    for (std::size_t i = 0; i < fine_labels.size(); ++i) {
      if (fine_labels[i] < 0 || fine_labels[i] >= static_cast<int>(level.size()))
        throw std::invalid_argument("hmlc: fine label out of range");
      labels[i] = level[fine_labels[i]];
    }
    ContrastiveBatch batch{embeddings, labels, mask_from_labels(labels), tau};
    total = ad::add(total, ad::scale(supcon(batch), weight));
    weight *= 0.5;
  }
  return total;
}

/// Targeted contrastive loss: attracts each embedding to its class target on
/// the hypersphere, -log( exp(z.t_y/tau) / sum_c exp(z.t_c/tau) ), averaged.
inline Tensor tsc(const Tensor& embeddings, const std::vector<int>& labels, const Tensor& targets,
                  double tau) {
  if (embeddings.ndim() != 2 || targets.ndim() != 2 ||
      embeddings.shape()[1] != targets.shape()[1])
    throw std::invalid_argument("tsc: embedding/target width mismatch");
  if (labels.size() != embeddings.shape()[0])
    throw std::invalid_argument("tsc: label count mismatch");
  const std::size_t c = targets.shape()[0], d = targets.shape()[1];
  for (std::size_t i = 0; i < c; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += targets.data()[i * d + j] * targets.data()[i * d + j];
    if (std::abs(s - 1.0) > 1e-6)
      throw std::invalid_argument("tsc: target row " + std::to_string(i) + " is not unit-norm");
  }
  const Tensor logits = ad::scale(ad::matmul(embeddings, ad::transpose(targets)), 1.0 / tau);
  return cross_entropy(logits, labels);
}

/// Maximally separated unit targets: minimizes a smoothed maximum of pairwise
/// inner products from a seeded start. Deterministic given (classes, dim,
/// seed); frozen and stored with the checkpoint.
inline Tensor make_tsc_targets(std::size_t num_classes, std::size_t dim, uint64_t seed,
                               int steps = 400) {
  nn::ParamStore store(seed);
  Tensor free = store.create("targets", {num_classes, dim}, nn::Init::Normal, 1.0);
  nn::AdamW opt;
  opt.lr = 0.05;
  std::vector<double> offdiag(num_classes * num_classes, 1.0);
  for (std::size_t i = 0; i < num_classes; ++i) offdiag[i * num_classes + i] = 0.0;
  const Tensor mask = Tensor::from({num_classes, num_classes}, std::move(offdiag));
  const double beta = 10.0;
  for (int it = 0; it < steps; ++it) {
    store.zero_grad();
    Tensor t = ad::normalize_rows(free);
    Tensor sims = ad::matmul(t, ad::transpose(t));
    // smoothed max of pairwise similarity
    Tensor potential = ad::log(ad::sum_all(ad::mul(ad::exp(ad::scale(sims, beta)), mask)));
    ad::backward(potential);
    opt.step(store.params());
  }
  Tensor final = ad::normalize_rows(free);
  return Tensor::from(final.shape(), final.data());  // detach
}

// ---------------------------------------------------------------------------
// HOICL composite
// ---------------------------------------------------------------------------

struct HOICLConfig {
  double lambda_fir = 1.0;
  double lambda_hoc = 1.0;
  double lambda_hmlc = 0.05;
  double lambda_tsc = 0.05;
  double tau_fir = 0.07;
  double tau_hoc = 0.07;
  double tau_global = 0.07;
  std::size_t sample_cap = 128;  // per-category subsampling bound
};

struct HoiclResult {
  Tensor total;
  std::map<std::string, double> breakdown;  // value per computed term
  std::vector<std::string> warnings;        // skipped terms
  // Selections actually used, for independent recomputation in tests.
  std::vector<int> global_selection;
  MaskedSelection fir_selection;
  MaskedSelection hoc_selection;
};

namespace detail_losses {

/// Uniform subsample without replacement to `cap`, preserving index order.
inline std::vector<int> subsample(const std::vector<int>& indices, std::size_t cap,
                                  std::mt19937_64& rng) {
  if (indices.size() <= cap) return indices;
  std::vector<int> out;
  out.reserve(cap);
  std::sample(indices.begin(), indices.end(), std::back_inserter(out), cap, rng);
  return out;
}

}  // namespace detail_losses

/// L_HOICL = L_global + lambda_fir * L_fir + lambda_hoc * L_hoc, with
/// L_global = lambda_hmlc * L_HMLC + lambda_tsc * L_TSC. Degenerate index
/// sets skip their term with a warning; if every term degenerates the batch
/// is an error rather than a silent zero.
inline HoiclResult hoicl(const Tensor& embeddings, const std::vector<int>& parts,
                         const std::vector<uint8_t>& contacts, const HOICLConfig& cfg,
                         const PartHierarchy& hierarchy, const Tensor& targets,
                         std::mt19937_64& rng) {
  if (embeddings.ndim() != 2 || embeddings.shape()[0] != parts.size() ||
      parts.size() != contacts.size())
    throw std::invalid_argument("hoicl: embeddings/labels size mismatch");

  HoiclResult result;
  result.total = Tensor::scalar(0.0);
  bool any_term = false;

  // Global term over a per-fine-class subsample.
  {
    std::map<int, std::vector<int>> by_class;
    for (std::size_t i = 0; i < parts.size(); ++i) by_class[parts[i]].push_back(static_cast<int>(i));
    for (auto& [cls, members] : by_class) {
      const auto picked = detail_losses::subsample(members, cfg.sample_cap, rng);
      result.global_selection.insert(result.global_selection.end(), picked.begin(), picked.end());
    }
    std::sort(result.global_selection.begin(), result.global_selection.end());
    std::vector<std::size_t> rows(result.global_selection.begin(), result.global_selection.end());
    std::vector<int> labels;
    for (int i : result.global_selection) labels.push_back(parts[i]);

    bool has_pair = mask_has_positive(mask_from_labels(labels));
    if (rows.size() >= 2 && has_pair) {
      const Tensor z = ad::gather_rows(embeddings, rows);
      Tensor l_hmlc = hmlc(z, labels, hierarchy, cfg.tau_global);
      Tensor l_tsc = tsc(z, labels, targets, cfg.tau_global);
      result.breakdown["hmlc"] = l_hmlc.item();
      result.breakdown["tsc"] = l_tsc.item();
      result.total = ad::add(result.total, ad::add(ad::scale(l_hmlc, cfg.lambda_hmlc),
                                                   ad::scale(l_tsc, cfg.lambda_tsc)));
      any_term = true;
    } else if (!rows.empty()) {
      // TSC needs no pairs, only labels; keep it if we have at least one row.
      const Tensor z = ad::gather_rows(embeddings, rows);
      Tensor l_tsc = tsc(z, labels, targets, cfg.tau_global);
      result.breakdown["tsc"] = l_tsc.item();
      result.total = ad::add(result.total, ad::scale(l_tsc, cfg.lambda_tsc));
      result.warnings.push_back("hmlc skipped: no positive pair in global selection");
      any_term = true;
    } else {
      result.warnings.push_back("global term skipped: no points");
    }
  }

  IndexSets sets = IndexSets::from_labels(parts, contacts);
  sets.fir = detail_losses::subsample(sets.fir, cfg.sample_cap, rng);
  sets.obj = detail_losses::subsample(sets.obj, cfg.sample_cap, rng);
  sets.human_contact = detail_losses::subsample(sets.human_contact, cfg.sample_cap, rng);
  sets.object_contact = detail_losses::subsample(sets.object_contact, cfg.sample_cap, rng);

  auto add_pair_term = [&](const char* name, const MaskedSelection& sel, double tau,
                           double lambda) {
    if (sel.indices.size() < 2 || !mask_has_positive(sel.mask)) {
      result.warnings.push_back(std::string(name) + " skipped: degenerate index sets");
      return;
    }
    std::vector<std::size_t> rows(sel.indices.begin(), sel.indices.end());
    ContrastiveBatch batch{ad::gather_rows(embeddings, rows), sel.categories, sel.mask, tau};
    Tensor term = supcon(batch);
    result.breakdown[name] = term.item();
    result.total = ad::add(result.total, ad::scale(term, lambda));
    any_term = true;
  };

  if (sets.fir.empty() || sets.obj.empty()) {
    result.warnings.push_back("fir skipped: empty FIR or object set");
  } else {
    result.fir_selection = build_fir_mask(sets);
    add_pair_term("fir", result.fir_selection, cfg.tau_fir, cfg.lambda_fir);
  }
  if (sets.human_contact.empty() || sets.object_contact.empty()) {
    result.warnings.push_back("hoc skipped: empty contact set");
  } else {
    result.hoc_selection = build_hoc_mask(sets);
    add_pair_term("hoc", result.hoc_selection, cfg.tau_hoc, cfg.lambda_hoc);
  }

  if (!any_term)
    throw std::invalid_argument("hoicl: every term degenerate; refusing to return silent zero");
  result.breakdown["total"] = result.total.item();
  return result;
}

// ---------------------------------------------------------------------------
// CPPool auxiliary loss
// ---------------------------------------------------------------------------

/// Sum over encoder stages of the auxiliary part CE and contact CE. Each
/// stage's logits live at that stage's input resolution; labels are the
/// originals propagated through the pooling mappings. Background points carry
/// no contact labels and are excluded from the contact term.
inline Tensor cppool_loss(const std::vector<Tensor>& part_logits,
                          const std::vector<Tensor>& contact_logits,
                          const std::vector<std::vector<int>>& part_labels,
                          const std::vector<std::vector<uint8_t>>& contact_labels) {
  if (part_logits.size() != part_labels.size() || contact_logits.size() != contact_labels.size() ||
      part_logits.size() != contact_logits.size())
    throw std::invalid_argument("cppool_loss: stage count mismatch");
  Tensor total = Tensor::scalar(0.0);
  for (std::size_t s = 0; s < part_logits.size(); ++s) {
    if (part_logits[s].shape()[0] != part_labels[s].size() ||
        contact_logits[s].size() != contact_labels[s].size())
      throw std::invalid_argument("cppool_loss: label propagation mismatch at stage " +
                                  std::to_string(s));
    total = ad::add(total, cross_entropy(part_logits[s], part_labels[s]));
    std::vector<double> keep(contact_labels[s].size(), 0.0);
    double kept = 0.0;
    for (std::size_t i = 0; i < keep.size(); ++i) {
      if (part_labels[s][i] != PartLabelSpace::kBackgroundClass) {
        keep[i] = 1.0;
        kept += 1.0;
      }
    }
    if (kept > 0.0)
      total = ad::add(total, binary_cross_entropy(contact_logits[s], contact_labels[s], keep));
  }
  return total;
}

// ---------------------------------------------------------------------------
// Heatmap KL loss
// ---------------------------------------------------------------------------

/// Axis-aligned 1D heatmap geometry: `bins` cells spanning
/// [center-half_extent, center+half_extent] per axis.
struct HeatmapSpec {
  Vec3 center = {0, 0, 0};
  double half_extent = 1.5;
  std::size_t bins = 64;
  double sigma_bins = 1.0;  // target Gaussian width; 0 gives a one-hot target

  double bin_width() const { return 2.0 * half_extent / static_cast<double>(bins); }
  double bin_center(int axis, std::size_t b) const {
    return center[axis] - half_extent + (static_cast<double>(b) + 0.5) * bin_width();
  }
  /// Continuous bin coordinate of a value (0 at the center of bin 0).
  double to_bin(int axis, double v) const {
    return (v - (center[axis] - half_extent)) / bin_width() - 0.5;
  }
};

/// Discretized Gaussian target over the spec's bins, centered on `value`.
/// Values outside the range clamp to the edge bin; `clamped` reports it.
inline std::vector<double> heatmap_target(const HeatmapSpec& spec, int axis, double value,
                                          bool* clamped = nullptr) {
  double b = spec.to_bin(axis, value);
  const double last = static_cast<double>(spec.bins - 1);
  bool clip = false;
  if (b < 0.0) {
    b = 0.0;
    clip = true;
  } else if (b > last) {
    b = last;
    clip = true;
  }
  if (clamped) *clamped = clip;
  std::vector<double> t(spec.bins, 0.0);
  if (spec.sigma_bins <= 0.0) {
    t[static_cast<std::size_t>(std::llround(b))] = 1.0;
    return t;
  }
  double z = 0.0;
  for (std::size_t i = 0; i < spec.bins; ++i) {
    const double d = (static_cast<double>(i) - b) / spec.sigma_bins;
    t[i] = std::exp(-0.5 * d * d);
    z += t[i];
  }
  for (double& v : t) v /= z;
  return t;
}

struct HeatmapLossResult {
  Tensor loss;
  int range_warnings = 0;
};

/// Mean over valid keypoints and axes of KL(target || predicted), with
/// discretized-Gaussian targets built from the ground-truth coordinates.
inline HeatmapLossResult heatmap_kl_loss(const Tensor& heatmap_logits, const HeatmapSpec& spec,
                                         const KeypointSet& gt) {
  if (heatmap_logits.ndim() != 3 || heatmap_logits.shape()[1] != 3 ||
      heatmap_logits.shape()[2] != spec.bins)
    throw std::invalid_argument("heatmap_kl_loss: expected [N_k,3,bins] logits");
  const std::size_t nk = heatmap_logits.shape()[0];
  if (gt.size() != nk) throw std::invalid_argument("heatmap_kl_loss: keypoint count mismatch");
  std::size_t n_valid = 0;
  for (auto v : gt.valid) n_valid += v != 0;
  if (n_valid == 0) throw std::invalid_argument("heatmap_kl_loss: no valid keypoints");

  HeatmapLossResult out;
  const Tensor logp = ad::log_softmax(heatmap_logits, -1);
  // -sum t*logp  (cross term), plus the constant target entropy so that
  // a perfect prediction scores exactly zero.
  std::vector<double> tmat(nk * 3 * spec.bins, 0.0);
  double entropy_sum = 0.0;
  for (std::size_t k = 0; k < nk; ++k) {
    if (!gt.valid[k]) continue;
    for (int a = 0; a < 3; ++a) {
      bool clipped = false;
      const auto t = heatmap_target(spec, a, gt.coords[k][a], &clipped);
      out.range_warnings += clipped;
      for (std::size_t b = 0; b < spec.bins; ++b) {
        tmat[(k * 3 + a) * spec.bins + b] = t[b];
        if (t[b] > 0.0) entropy_sum += t[b] * std::log(t[b]);
      }
    }
  }
  const double denom = static_cast<double>(n_valid * 3);
  Tensor cross = ad::scale(ad::sum_all(ad::mul(logp, Tensor::from(heatmap_logits.shape(),
                                                                  std::move(tmat)))),
                           -1.0 / denom);
  out.loss = ad::add_scalar(cross, entropy_sum / denom);
  return out;
}

/// Per-axis expectation decode: sum_b p_b * center_b for each keypoint/axis.
inline Tensor heatmap_expectation(const Tensor& heatmap_probs, const HeatmapSpec& spec) {
  if (heatmap_probs.ndim() != 3 || heatmap_probs.shape()[1] != 3 ||
      heatmap_probs.shape()[2] != spec.bins)
    throw std::invalid_argument("heatmap_expectation: expected [N_k,3,bins]");
  const std::size_t nk = heatmap_probs.shape()[0];
  std::vector<double> centers(3 * spec.bins);
  for (int a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < spec.bins; ++b) centers[a * spec.bins + b] = spec.bin_center(a, b);
  Tensor cmat = Tensor::from({3, spec.bins}, std::move(centers));
  return ad::sum(ad::mul(heatmap_probs, cmat), -1);  // broadcast over keypoints -> [N_k,3]
}

// ---------------------------------------------------------------------------
// Limb loss
// ---------------------------------------------------------------------------

/// Bone direction + length penalty. Bones touching invalid ground-truth
/// keypoints are excluded; zero-length ground-truth bones are excluded from
/// the direction term only.
inline Tensor limb_loss(const Tensor& pred, const KeypointSet& gt, const Skeleton& skeleton,
                        double lambda_dir = 1.0, double lambda_len = 1.0) {
  if (pred.ndim() != 2 || pred.shape()[1] != 3 || pred.shape()[0] != gt.size())
    throw std::invalid_argument("limb_loss: pred must be [N_k,3] matching ground truth");
  std::vector<std::size_t> parents, children;
  std::vector<double> gt_dir, gt_len;
  std::vector<double> dir_mask;
  for (auto [a, b] : skeleton.edges) {
    if (a < 0 || b < 0 || a >= static_cast<int>(gt.size()) || b >= static_cast<int>(gt.size()))
      throw std::invalid_argument("limb_loss: skeleton index out of range");
    if (!gt.valid[a] || !gt.valid[b]) continue;
    const Vec3 bone = gt.coords[b] - gt.coords[a];
    parents.push_back(static_cast<std::size_t>(a));
    children.push_back(static_cast<std::size_t>(b));
    gt_dir.insert(gt_dir.end(), bone.begin(), bone.end());
    const double len = norm(bone);
    gt_len.push_back(len);
    dir_mask.push_back(len > 0.0 ? 1.0 : 0.0);
  }
  const std::size_t nb = parents.size();
  if (nb == 0) throw std::invalid_argument("limb_loss: no usable bones");

  const Tensor bones = ad::sub(ad::gather_rows(pred, children), ad::gather_rows(pred, parents));
  const Tensor pred_len = ad::sqrt(ad::add_scalar(ad::sum(ad::mul(bones, bones), 1), 1e-12));

  // direction: 1 - cos(pred, gt), over bones with nonzero gt length
  const double n_dir = std::accumulate(dir_mask.begin(), dir_mask.end(), 0.0);
  Tensor dir_term = Tensor::scalar(0.0);
  if (n_dir > 0) {
    std::vector<double> inv_gt(nb);
    for (std::size_t i = 0; i < nb; ++i) inv_gt[i] = dir_mask[i] ? 1.0 / gt_len[i] : 0.0;
    Tensor dots = ad::sum(ad::mul(bones, Tensor::from({nb, 3}, std::move(gt_dir))), 1);
    Tensor cosine = ad::mul(ad::div(dots, pred_len), Tensor::from({nb}, std::move(inv_gt)));
    // masked mean of (1 - cos); the mask is folded into cosine already being 0
    Tensor one_minus = ad::sub(Tensor::from({nb}, dir_mask), cosine);
    dir_term = ad::scale(ad::sum_all(one_minus), 1.0 / n_dir);
  }

  Tensor len_term = ad::mean_all(ad::smooth_l1(pred_len, Tensor::from({nb}, std::move(gt_len)), 1.0));
  return ad::add(ad::scale(dir_term, lambda_dir), ad::scale(len_term, lambda_len));
}

}  // namespace hoil
