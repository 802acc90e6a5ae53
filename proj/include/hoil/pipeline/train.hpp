#pragma once

// Seeded pre-train / fine-tune loops at desk scale: deterministic per-step
// RNG streams, cosine learning-rate schedule, per-term CSV loss logs, an
// epoch checkpoint that carries optimizer state for bitwise resumption, and a
// NaN abort that names the offending batch.

#include <functional>
#include <iostream>

#include "hoil/objectives.hpp"
#include "hoil/pipeline/dataset.hpp"

namespace hoil::pipeline {

/// Raised when the loss goes non-finite; carries the batch for diagnostics.
struct NumericalError : std::runtime_error {
  std::vector<std::size_t> batch_indices;
  int64_t step;
  NumericalError(int64_t s, std::vector<std::size_t> batch)
      : std::runtime_error("non-finite loss at step " + std::to_string(s)),
        batch_indices(std::move(batch)),
        step(s) {}
};

struct TrainStats {
  double step0_loss = 0.0;
  double final_loss = 0.0;
  int64_t steps_run = 0;
  std::string loss_log;  // CSV
};

struct TrainState {
  int start_epoch = 0;
  int64_t global_step = 0;
};

namespace detail_train {

inline std::vector<std::size_t> epoch_order(std::size_t n, uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = nn::step_rng(seed, static_cast<uint64_t>(epoch), /*salt=*/7);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

}  // namespace detail_train

/// Shared training driver. `frame_loss(index, step)` evaluates one frame's
/// loss with its per-term breakdown; batch losses are averaged. The
/// checkpoint callback runs after every epoch.
inline TrainStats run_training(
    nn::ParamStore& params, nn::AdamW& opt, std::size_t num_frames, const OptimizerConfig& optim,
    double lr, uint64_t seed, const std::vector<std::string>& term_names,
    const std::function<LossBreakdown(std::size_t frame, int64_t step)>& frame_loss,
    const std::function<void(int epoch, int64_t step)>& on_epoch_end, TrainState state = {}) {
  const std::size_t batch = std::max<std::size_t>(1, std::min(optim.batch, num_frames));
  const int64_t steps_per_epoch = static_cast<int64_t>((num_frames + batch - 1) / batch);
  const int64_t total_steps = steps_per_epoch * optim.epochs;

  TrainStats stats;
  std::ostringstream log;
  log << std::setprecision(17) << "step,total";
  for (const auto& t : term_names) log << "," << t;
  log << "\n";

  opt.lr = lr;
  opt.weight_decay = optim.weight_decay;
  int64_t step = state.global_step;
  for (int epoch = state.start_epoch; epoch < optim.epochs; ++epoch) {
    const auto order = detail_train::epoch_order(num_frames, seed, epoch);
    for (std::size_t chunk = 0; chunk < num_frames; chunk += batch, ++step) {
      std::vector<std::size_t> indices(order.begin() + chunk,
                                       order.begin() + std::min(chunk + batch, num_frames));
      params.zero_grad();
      ad::Tensor total = ad::Tensor::scalar(0.0);
      std::map<std::string, double> terms;
      for (std::size_t idx : indices) {
        LossBreakdown lb = frame_loss(idx, step);
        total = ad::add(total, lb.total);
        for (const auto& [name, value] : lb.terms) terms[name] += value;
      }
      const double inv_batch = 1.0 / static_cast<double>(indices.size());
      total = ad::scale(total, inv_batch);

      const double loss_value = total.item();
      if (!std::isfinite(loss_value)) throw NumericalError(step, indices);
      if (step == 0) stats.step0_loss = loss_value;
      stats.final_loss = loss_value;

      ad::backward(total);
      const double scale =
          optim.schedule == "cosine" ? nn::cosine_lr_scale(step, total_steps) : 1.0;
      opt.step(params.params(), scale);

      log << step << "," << loss_value;
      for (const auto& t : term_names) log << "," << (terms.count(t) ? terms[t] * inv_batch : 0.0);
      log << "\n";
    }
    on_epoch_end(epoch, step);
  }
  stats.steps_run = step - state.global_step;
  stats.loss_log = log.str();
  return stats;
}

// ---------------------------------------------------------------------------
// Pre-training
// ---------------------------------------------------------------------------

constexpr const char* kTscTargetsKey = "__tsc_targets";
constexpr const char* kProgressKey = "__progress";

inline void save_training_checkpoint(const std::string& path, HoilModel& model,
                                     const nn::AdamW& opt, const ad::Tensor& tsc_targets,
                                     int next_epoch, int64_t global_step) {
  ad::NamedTensors entries = model.params().named_tensors();
  if (tsc_targets.defined()) entries.emplace_back(kTscTargetsKey, tsc_targets);
  entries.emplace_back(kProgressKey,
                       ad::Tensor::from({2}, {static_cast<double>(next_epoch),
                                              static_cast<double>(global_step)}));
  const auto opt_state = opt.state(model.params().params());
  entries.insert(entries.end(), opt_state.begin(), opt_state.end());
  ad::write_checkpoint(path, entries);
}

struct PretrainRun {
  TrainStats stats;
  ad::Tensor tsc_targets;
};

/// Pre-trains on the dataset. When `resume_from` is set, parameters,
/// optimizer moments, the TSC targets, and the epoch/step counters are
/// restored so the continuation reproduces an uninterrupted run bitwise.
inline PretrainRun pretrain(const RunConfig& cfg, HoilModel& model, const Dataset& ds,
                            const std::string& checkpoint_path,
                            const std::string& resume_from = "") {
  ad::Tensor tsc_targets =
      make_tsc_targets(PartLabelSpace::kNumClasses, cfg.model.projection_dim, cfg.seed);
  nn::AdamW opt;
  TrainState state;
  if (!resume_from.empty()) {
    const auto entries = ad::read_checkpoint(resume_from);
    model.params().load(entries, /*strict=*/false);
    opt.load_state(entries);
    for (const auto& [name, t] : entries) {
      if (name == kTscTargetsKey) tsc_targets = t;
      if (name == kProgressKey) {
        state.start_epoch = static_cast<int>(t.data()[0]);
        state.global_step = static_cast<int64_t>(t.data()[1]);
      }
    }
  }

  const PartHierarchy hierarchy = PartHierarchy::default_hierarchy();
  auto frame_loss = [&](std::size_t idx, int64_t step) {
    const FrameRecord& rec = ds.frames[idx];
    const HeadOutputs out = model.forward(rec.cloud.cloud);
    auto rng = nn::step_rng(cfg.seed, static_cast<uint64_t>(step), /*salt=*/idx + 11);
    return pretrain_loss(out, rec.cloud, rec.keypoints, cfg.loss.pretrain, cfg.hoicl, hierarchy,
                         tsc_targets, rng);
  };
  auto on_epoch = [&](int epoch, int64_t step) {
    save_training_checkpoint(checkpoint_path, model, opt, tsc_targets, epoch + 1, step);
  };

  PretrainRun run;
  run.tsc_targets = tsc_targets;
  run.stats = run_training(model.params(), opt, ds.frames.size(), cfg.optimizer,
                           cfg.optimizer.lr_pretrain, cfg.seed,
                           {"seg", "contact", "coord", "k_contact", "hoicl", "cppool"},
                           frame_loss, on_epoch, state);
  return run;
}

// ---------------------------------------------------------------------------
// Fine-tuning
// ---------------------------------------------------------------------------

inline TrainStats finetune(const RunConfig& cfg, HoilModel& model, const Dataset& ds,
                           const std::string& checkpoint_path, const std::string& resume_from = "") {
  nn::AdamW opt;
  TrainState state;
  if (!resume_from.empty()) {
    const auto entries = ad::read_checkpoint(resume_from);
    model.params().load(entries, /*strict=*/false);
    opt.load_state(entries);
    for (const auto& [name, t] : entries)
      if (name == kProgressKey) {
        state.start_epoch = static_cast<int>(t.data()[0]);
        state.global_step = static_cast<int64_t>(t.data()[1]);
      }
  }
  const Skeleton skeleton = profile_skeleton(ds.profile);
  auto frame_loss = [&](std::size_t idx, int64_t) {
    const FrameRecord& rec = ds.frames[idx];
    const HeadOutputs out = model.forward(rec.cloud.cloud);
    return finetune_loss(out, rec.keypoints, skeleton, cfg.loss.finetune);
  };
  auto on_epoch = [&](int epoch, int64_t step) {
    save_training_checkpoint(checkpoint_path, model, opt, ad::Tensor(), epoch + 1, step);
  };
  return run_training(model.params(), opt, ds.frames.size(), cfg.optimizer,
                      cfg.optimizer.lr_finetune, cfg.seed, {"heatmap", "limb"}, frame_loss,
                      on_epoch, state);
}

/// True when the checkpoint was written by a fine-tuning run (heatmap head
/// present) rather than a pre-training run (coordinate head present).
inline bool checkpoint_is_finetune(const ad::NamedTensors& entries) {
  for (const auto& [name, t] : entries)
    if (name.rfind("heatmap_head.", 0) == 0) return true;
  return false;
}

}  // namespace hoil::pipeline
