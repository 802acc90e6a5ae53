#pragma once

// Post-hoc trajectory refinement: Gaussian, Savitzky-Golay, and One-Euro
// filter baselines, plus CTRefine, a small learned module that runs
// self-attention over time per keypoint track and cross-attends against
// contact-augmented tokens, with a residual connection so a zero output
// projection is the identity map.

#include "hoil/core.hpp"
#include "hoil/metrics.hpp"
#include "hoil/nn.hpp"

namespace hoil::temporal {

using Trajectory = std::vector<KeypointSet>;  // T frames, shared keypoint count

struct FilterConfig {
  double gaussian_sigma = 1.5;  // frames
  int sg_window = 7;            // odd, > sg_order
  int sg_order = 2;
  double one_euro_min_cutoff = 1.0;  // Hz
  double one_euro_beta = 0.007;
  double one_euro_d_cutoff = 1.0;  // Hz

  void check() const {
    if (gaussian_sigma <= 0) throw std::invalid_argument("FilterConfig: sigma must be > 0");
    if (sg_window % 2 == 0 || sg_window <= sg_order)
      throw std::invalid_argument("FilterConfig: sg_window must be odd and exceed sg_order");
    if (one_euro_min_cutoff <= 0 || one_euro_d_cutoff <= 0)
      throw std::invalid_argument("FilterConfig: cutoffs must be > 0");
  }
};

namespace detail_temporal {

inline void check_trajectory(const Trajectory& traj, int min_frames) {
  if (static_cast<int>(traj.size()) < min_frames)
    throw std::invalid_argument("temporal: trajectory too short (" +
                                std::to_string(traj.size()) + " frames, need " +
                                std::to_string(min_frames) + ")");
  for (const auto& f : traj)
    if (f.size() != traj[0].size())
      throw std::invalid_argument("temporal: inconsistent keypoint counts");
}

/// Mirror index without duplicating the edge sample, folded into range.
inline int reflect(int idx, int t_len) {
  if (t_len == 1) return 0;
  const int period = 2 * (t_len - 1);
  idx = ((idx % period) + period) % period;
  return idx < t_len ? idx : period - idx;
}

template <typename Kernel>
Trajectory convolve(const Trajectory& traj, const std::vector<double>& weights, Kernel center) {
  const int t_len = static_cast<int>(traj.size());
  const int radius = static_cast<int>(weights.size()) / 2;
  Trajectory out = traj;
  for (int t = 0; t < t_len; ++t)
    for (std::size_t k = 0; k < traj[0].size(); ++k)
      for (int a = 0; a < 3; ++a) {
        double acc = 0.0;
        for (int d = -radius; d <= radius; ++d)
          acc += weights[d + radius] * traj[reflect(t + d, t_len)].coords[k][a];
        out[t].coords[k][a] = acc;
      }
  (void)center;
  return out;
}

}  // namespace detail_temporal

/// Gaussian smoothing per coordinate, reflection-padded; kernel radius 3*sigma.
inline Trajectory gaussian_smooth(const Trajectory& traj, const FilterConfig& cfg) {
  cfg.check();
  detail_temporal::check_trajectory(traj, 2);
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * cfg.gaussian_sigma)));
  std::vector<double> w(2 * radius + 1);
  double z = 0.0;
  for (int d = -radius; d <= radius; ++d) {
    w[d + radius] = std::exp(-0.5 * (d / cfg.gaussian_sigma) * (d / cfg.gaussian_sigma));
    z += w[d + radius];
  }
  for (double& v : w) v /= z;
  return detail_temporal::convolve(traj, w, 0);
}

/// Center-sample Savitzky-Golay convolution coefficients for the given odd
/// window and polynomial order (least-squares fit evaluated at offset 0).
inline std::vector<double> savitzky_golay_coefficients(int window, int order) {
  const int m = window / 2;
  const int n = order + 1;
  // normal equations G = A^T A, with A[i][j] = offset_i^j
  std::vector<std::vector<double>> g(n, std::vector<double>(n, 0.0));
  for (int i = -m; i <= m; ++i) {
    double pi = 1.0;
    std::vector<double> pows(2 * n - 1);
    for (int j = 0; j < 2 * n - 1; ++j) {
      pows[j] = pi;
      pi *= i;
    }
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) g[r][c] += pows[r + c];
  }
  // solve G x = e0 by Gaussian elimination with partial pivoting
  std::vector<double> x(n, 0.0);
  std::vector<std::vector<double>> aug = g;
  for (int r = 0; r < n; ++r) aug[r].push_back(r == 0 ? 1.0 : 0.0);
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(aug[r][col]) > std::abs(aug[pivot][col])) pivot = r;
    std::swap(aug[col], aug[pivot]);
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = aug[r][col] / aug[col][col];
      for (int c = col; c <= n; ++c) aug[r][c] -= f * aug[col][c];
    }
  }
  for (int r = 0; r < n; ++r) x[r] = aug[r][n] / aug[r][r];
  // c_i = sum_j x_j * offset_i^j
  std::vector<double> coeff(window);
  for (int i = -m; i <= m; ++i) {
    double acc = 0.0, pi = 1.0;
    for (int j = 0; j < n; ++j) {
      acc += x[j] * pi;
      pi *= i;
    }
    coeff[i + m] = acc;
  }
  return coeff;
}

inline Trajectory savitzky_golay(const Trajectory& traj, const FilterConfig& cfg) {
  cfg.check();
  detail_temporal::check_trajectory(traj, cfg.sg_window);
  return detail_temporal::convolve(traj, savitzky_golay_coefficients(cfg.sg_window, cfg.sg_order),
                                   0);
}

/// One-Euro filter per coordinate; the first sample warm-starts the state.
inline Trajectory one_euro(const Trajectory& traj, const FilterConfig& cfg, double dt) {
  cfg.check();
  detail_temporal::check_trajectory(traj, 2);
  if (dt <= 0) throw std::invalid_argument("one_euro: dt must be > 0");
  auto alpha = [dt](double cutoff) {
    const double tau = 1.0 / (2.0 * M_PI * cutoff);
    return 1.0 / (1.0 + tau / dt);
  };
  Trajectory out = traj;
  const std::size_t nk = traj[0].size();
  for (std::size_t k = 0; k < nk; ++k)
    for (int a = 0; a < 3; ++a) {
      double x_hat = traj[0].coords[k][a];
      double dx_hat = 0.0;
      out[0].coords[k][a] = x_hat;
      for (std::size_t t = 1; t < traj.size(); ++t) {
        const double x = traj[t].coords[k][a];
        const double dx = (x - x_hat) / dt;
        const double ad = alpha(cfg.one_euro_d_cutoff);
        dx_hat = ad * dx + (1.0 - ad) * dx_hat;
        const double cutoff = cfg.one_euro_min_cutoff + cfg.one_euro_beta * std::abs(dx_hat);
        const double ax = alpha(cutoff);
        x_hat = ax * x + (1.0 - ax) * x_hat;
        out[t].coords[k][a] = x_hat;
      }
    }
  return out;
}

// ---------------------------------------------------------------------------
// CTRefine
// ---------------------------------------------------------------------------

struct CTRefineConfig {
  std::size_t hidden = 64;
  std::size_t heads = 2;
  uint64_t seed = 0;
};

/// Learned contact-based refinement. Per keypoint track: embed the coordinate
/// sequence with sinusoidal time encoding, run temporal self-attention, then
/// cross-attend against tokens built from (coordinates, contact), and add a
/// zero-initialized projection of the result back onto the input coordinates.
class CTRefine {
 public:
  explicit CTRefine(const CTRefineConfig& cfg = {})
      : cfg_(cfg),
        store_(cfg.seed),
        in_proj_(store_, "in_proj", 3, cfg.hidden),
        kv_proj_(store_, "kv_proj", 4, cfg.hidden),
        self_block_(store_, "self_block", cfg.hidden, cfg.heads),
        cross_block_(store_, "cross_block", cfg.hidden, cfg.heads),
        out_proj_(store_, "out_proj", cfg.hidden, 3, nn::Init::Zeros) {}

  nn::ParamStore& params() { return store_; }
  const CTRefineConfig& config() const { return cfg_; }

  /// Refined coordinates as a [T*N_k, 3] tensor in (frame-major) order; stays
  /// connected to the tape for training.
  ad::Tensor refine_tensor(const Trajectory& seq) const {
    detail_temporal::check_trajectory(seq, 1);
    const std::size_t t_len = seq.size(), nk = seq[0].size();
    const ad::Tensor pe = time_encoding(t_len);

    std::vector<ad::Tensor> track_deltas;  // [T,3] per keypoint
    for (std::size_t k = 0; k < nk; ++k) {
      std::vector<double> coords(t_len * 3), kv_in(t_len * 4);
      for (std::size_t t = 0; t < t_len; ++t) {
        for (int a = 0; a < 3; ++a) {
          coords[t * 3 + a] = seq[t].coords[k][a];
          kv_in[t * 4 + a] = seq[t].coords[k][a];
        }
        kv_in[t * 4 + 3] = seq[t].contact[k] ? 1.0 : 0.0;
      }
      const ad::Tensor coord_t = ad::Tensor::from({t_len, 3}, coords);
      ad::Tensor tokens = ad::add(in_proj_(coord_t), pe);
      tokens = self_block_(tokens, /*window=*/0);
      const ad::Tensor kv = ad::add(kv_proj_(ad::Tensor::from({t_len, 4}, kv_in)), pe);
      const ad::Tensor fused = cross_block_(tokens, kv);
      track_deltas.push_back(ad::add(out_proj_(fused), coord_t));
    }
    // interleave tracks back into frame-major order
    ad::Tensor stacked = ad::concat(track_deltas, 0);  // [N_k*T, 3]
    std::vector<std::size_t> order(t_len * nk);
    for (std::size_t t = 0; t < t_len; ++t)
      for (std::size_t k = 0; k < nk; ++k) order[t * nk + k] = k * t_len + t;
    return ad::gather_rows(stacked, order);
  }

  Trajectory refine(const Trajectory& seq) const {
    const ad::Tensor refined = refine_tensor(seq);
    Trajectory out = seq;
    const std::size_t nk = seq[0].size();
    for (std::size_t t = 0; t < seq.size(); ++t)
      for (std::size_t k = 0; k < nk; ++k)
        for (int a = 0; a < 3; ++a)
          out[t].coords[k][a] = refined.data()[(t * nk + k) * 3 + a];
    return out;
  }

 private:
  ad::Tensor time_encoding(std::size_t t_len) const {
    std::vector<double> pe(t_len * cfg_.hidden, 0.0);
    for (std::size_t t = 0; t < t_len; ++t)
      for (std::size_t i = 0; i + 1 < cfg_.hidden; i += 2) {
        const double rate = std::pow(10000.0, -static_cast<double>(i) / cfg_.hidden);
        pe[t * cfg_.hidden + i] = std::sin(t * rate);
        pe[t * cfg_.hidden + i + 1] = std::cos(t * rate);
      }
    return ad::Tensor::from({t_len, cfg_.hidden}, std::move(pe));
  }

  CTRefineConfig cfg_;
  nn::ParamStore store_;
  nn::Linear in_proj_, kv_proj_;
  nn::TransformerBlock self_block_;
  nn::CrossAttentionBlock cross_block_;
  nn::Linear out_proj_;
};

/// One (noisy observation, ground truth) training pair; the observation's
/// contact flags are the conditioning signal.
struct RefinePair {
  Trajectory noisy;
  Trajectory ground_truth;
};

struct RefineTrainStats {
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

inline ad::Tensor trajectory_mse(const ad::Tensor& refined, const Trajectory& gt) {
  const std::size_t nk = gt[0].size();
  std::vector<double> target(gt.size() * nk * 3);
  for (std::size_t t = 0; t < gt.size(); ++t)
    for (std::size_t k = 0; k < nk; ++k)
      for (int a = 0; a < 3; ++a) target[(t * nk + k) * 3 + a] = gt[t].coords[k][a];
  return ad::mse(refined, ad::Tensor::from({gt.size() * nk, 3}, std::move(target)));
}

inline RefineTrainStats train_ctrefine(CTRefine& model, const std::vector<RefinePair>& data,
                                       int steps, double lr, uint64_t seed) {
  if (data.empty()) throw std::invalid_argument("train_ctrefine: no training pairs");
  nn::AdamW opt;
  opt.lr = lr;
  RefineTrainStats stats;
  for (int step = 0; step < steps; ++step) {
    auto rng = nn::step_rng(seed, step);
    const auto& pair = data[rng() % data.size()];
    model.params().zero_grad();
    const ad::Tensor loss = trajectory_mse(model.refine_tensor(pair.noisy), pair.ground_truth);
    if (step == 0) stats.initial_loss = loss.item();
    stats.final_loss = loss.item();
    ad::backward(loss);
    opt.step(model.params().params(), nn::cosine_lr_scale(step, steps));
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Filter comparison
// ---------------------------------------------------------------------------

struct FilterComparisonRow {
  std::string method;
  double mpjpe_mm;
  double pck3;
  double pck5;
};

/// Evaluates "none" plus the three filters (and CTRefine when provided)
/// against ground truth; rows come back in a fixed order.
inline std::vector<FilterComparisonRow> compare_filters(const Trajectory& pred,
                                                        const Trajectory& gt,
                                                        const FilterConfig& cfg, double dt,
                                                        KeypointProfile profile,
                                                        const CTRefine* ctrefine = nullptr) {
  auto eval = [&](const std::string& name, const Trajectory& t) {
    return FilterComparisonRow{name, mpjpe(t, gt), pck(t, gt, 0.3, profile),
                               pck(t, gt, 0.5, profile)};
  };
  std::vector<FilterComparisonRow> rows;
  rows.push_back(eval("none", pred));
  rows.push_back(eval("gaussian", gaussian_smooth(pred, cfg)));
  rows.push_back(eval("sg", savitzky_golay(pred, cfg)));
  rows.push_back(eval("oneeuro", one_euro(pred, cfg, dt)));
  if (ctrefine) rows.push_back(eval("ctrefine", ctrefine->refine(pred)));
  return rows;
}

inline std::string comparison_csv(const std::vector<FilterComparisonRow>& rows) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "method,mpjpe_mm,pck3,pck5\n";
  for (const auto& r : rows)
    os << r.method << "," << r.mpjpe_mm << "," << r.pck3 << "," << r.pck5 << "\n";
  return os.str();
}

}  // namespace hoil::temporal
