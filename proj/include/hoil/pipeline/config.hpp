#pragma once

// Run configuration: a single JSON document with a default for every field.
// Unknown keys are rejected at any nesting level so typos fail loudly instead
// of silently running with defaults.

#include <cstdlib>
#include <fstream>
#include <set>

#include <json.hpp>

#include "hoil/gridpool.hpp"
#include "hoil/lidar_sim.hpp"
#include "hoil/losses.hpp"
#include "hoil/model.hpp"
#include "hoil/objectives.hpp"
#include "hoil/temporal.hpp"

namespace hoil::pipeline {

using nlohmann::json;

struct SimulatorConfig {
  double azimuth_min_deg = -60.0;
  double azimuth_max_deg = 60.0;
  double azimuth_step_deg = 0.2;
  double elevation_min_deg = -25.0;
  double elevation_max_deg = 5.0;
  double elevation_step_deg = 0.33;
  Vec3 origin = {-6.0, 0.0, 1.0};
  double max_range = 30.0;
  double range_noise_sigma = 0.0;
  double object_dropout = 0.5;
  double crop_radius = 1.6;  // xy crop around the human, meters
  double dt = 0.1;
  int box_subdiv = 3;

  sim::SensorModel sensor() const {
    sim::SensorModel s;
    const double rad = M_PI / 180.0;
    s.origin = origin;
    s.azimuth_min = azimuth_min_deg * rad;
    s.azimuth_max = azimuth_max_deg * rad;
    s.azimuth_step = azimuth_step_deg * rad;
    s.elevation_min = elevation_min_deg * rad;
    s.elevation_max = elevation_max_deg * rad;
    s.elevation_step = elevation_step_deg * rad;
    s.max_range = max_range;
    s.range_noise_sigma = range_noise_sigma;
    return s;
  }
};

struct OptimizerConfig {
  double lr_pretrain = 3e-4;
  double lr_finetune = 5e-4;
  std::size_t batch = 8;
  int epochs = 10;
  double weight_decay = 0.0;
  std::string schedule = "cosine";  // or "constant"
};

struct LossConfig {
  PretrainLossWeights pretrain;
  FinetuneLossWeights finetune;
};

struct RunConfig {
  uint64_t seed = 1;
  KeypointProfile profile = KeypointProfile::Smpl15Obj;
  ModelConfig model;
  HOICLConfig hoicl;
  sim::ContactConfig contact;
  temporal::FilterConfig filters;
  OptimizerConfig optimizer;
  LossConfig loss;
  SimulatorConfig simulator;
  std::vector<double> dataset_mix_ratios;
};

// ---------------------------------------------------------------------------
// JSON parsing
// ---------------------------------------------------------------------------

namespace detail_config {

inline void require_known_keys(const json& j, const std::set<std::string>& allowed,
                               const std::string& context) {
  if (!j.is_object())
    throw std::runtime_error("config: expected an object at '" + context + "'");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key))
      throw std::runtime_error("config: unknown key '" + key + "' in '" + context + "'");
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline void get_vec3(const json& j, const char* key, Vec3& out) {
  if (!j.contains(key)) return;
  const auto arr = j.at(key).get<std::vector<double>>();
  if (arr.size() != 3) throw std::runtime_error(std::string("config: '") + key + "' needs 3 numbers");
  out = {arr[0], arr[1], arr[2]};
}

inline KeypointProfile parse_profile(const std::string& name) {
  if (name == "smpl15") return KeypointProfile::Smpl15;
  if (name == "smpl15obj") return KeypointProfile::Smpl15Obj;
  if (name == "waymo14") return KeypointProfile::Waymo14;
  throw std::runtime_error("config: unknown keypoint profile '" + name + "'");
}

inline std::string profile_name(KeypointProfile p) {
  switch (p) {
    case KeypointProfile::Smpl15: return "smpl15";
    case KeypointProfile::Smpl15Obj: return "smpl15obj";
    case KeypointProfile::Waymo14: return "waymo14";
  }
  return "smpl15obj";
}

}  // namespace detail_config

inline RunConfig parse_config(const json& j) {
  using detail_config::get_if;
  using detail_config::get_vec3;
  using detail_config::require_known_keys;

  RunConfig cfg;
  require_known_keys(j, {"seed", "keypoint_profile", "model", "cppool", "hoicl", "contact",
                         "filters", "optimizer", "loss", "simulator", "dataset_mix"},
                     "<root>");
  get_if(j, "seed", cfg.seed);
  if (j.contains("keypoint_profile"))
    cfg.profile = detail_config::parse_profile(j.at("keypoint_profile").get<std::string>());
  cfg.model.num_keypoints = profile_num_keypoints(cfg.profile);

  if (j.contains("model")) {
    const json& m = j.at("model");
    require_known_keys(m, {"channels", "num_stages", "projection_dim", "curve", "bit_depth",
                           "base_grid_size", "stage_multiplier", "pooling", "attention_heads",
                           "attention_window", "heatmap_bins", "heatmap_half_extent",
                           "heatmap_sigma_bins"},
                       "model");
    get_if(m, "channels", cfg.model.channels);
    get_if(m, "num_stages", cfg.model.num_stages);
    get_if(m, "projection_dim", cfg.model.projection_dim);
    if (m.contains("curve")) {
      const auto name = m.at("curve").get<std::string>();
      if (name == "hilbert")
        cfg.model.curve.variant = CurveVariant::Hilbert;
      else if (name == "zorder")
        cfg.model.curve.variant = CurveVariant::ZOrder;
      else
        throw std::runtime_error("config: unknown curve '" + name + "'");
    }
    get_if(m, "bit_depth", cfg.model.curve.bit_depth);
    get_if(m, "base_grid_size", cfg.model.grid.base_grid_size);
    get_if(m, "stage_multiplier", cfg.model.grid.stage_multiplier);
    cfg.model.grid.num_stages = cfg.model.num_stages;
    if (m.contains("pooling")) {
      const auto name = m.at("pooling").get<std::string>();
      if (name == "cppool")
        cfg.model.pooling = PoolingKind::CPPool;
      else if (name == "max")
        cfg.model.pooling = PoolingKind::Max;
      else
        throw std::runtime_error("config: unknown pooling '" + name + "'");
    }
    get_if(m, "attention_heads", cfg.model.attention_heads);
    get_if(m, "attention_window", cfg.model.attention_window);
    get_if(m, "heatmap_bins", cfg.model.heatmap_bins);
    get_if(m, "heatmap_half_extent", cfg.model.heatmap_half_extent);
    get_if(m, "heatmap_sigma_bins", cfg.model.heatmap_sigma_bins);
  }

  if (j.contains("cppool")) {
    const json& c = j.at("cppool");
    require_known_keys(c, {"temperature", "lambda_part", "lambda_contact", "log_epsilon",
                           "fir_weight", "body_weight", "object_weight", "background_weight"},
                       "cppool");
    get_if(c, "temperature", cfg.model.cppool.temperature);
    get_if(c, "lambda_part", cfg.model.cppool.lambda_part);
    get_if(c, "lambda_contact", cfg.model.cppool.lambda_contact);
    get_if(c, "log_epsilon", cfg.model.cppool.log_epsilon);
    double fir = 4.0, body = 1.0, object = 1.0, background = 0.5;
    get_if(c, "fir_weight", fir);
    get_if(c, "body_weight", body);
    get_if(c, "object_weight", object);
    get_if(c, "background_weight", background);
    auto& w = cfg.model.cppool.part_weights;
    w.assign(PartLabelSpace::kNumClasses, body);
    for (int p : fir_part_classes()) w[p] = fir;
    w[PartLabelSpace::kObjectClass] = object;
    w[PartLabelSpace::kBackgroundClass] = background;
  }

  if (j.contains("hoicl")) {
    const json& h = j.at("hoicl");
    require_known_keys(h, {"lambda_fir", "lambda_hoc", "lambda_hmlc", "lambda_tsc", "tau_fir",
                           "tau_hoc", "tau_global", "sample_cap"},
                       "hoicl");
    get_if(h, "lambda_fir", cfg.hoicl.lambda_fir);
    get_if(h, "lambda_hoc", cfg.hoicl.lambda_hoc);
    get_if(h, "lambda_hmlc", cfg.hoicl.lambda_hmlc);
    get_if(h, "lambda_tsc", cfg.hoicl.lambda_tsc);
    get_if(h, "tau_fir", cfg.hoicl.tau_fir);
    get_if(h, "tau_hoc", cfg.hoicl.tau_hoc);
    get_if(h, "tau_global", cfg.hoicl.tau_global);
    get_if(h, "sample_cap", cfg.hoicl.sample_cap);
  }

  if (j.contains("contact")) {
    require_known_keys(j.at("contact"), {"threshold"}, "contact");
    get_if(j.at("contact"), "threshold", cfg.contact.threshold);
  }

  if (j.contains("filters")) {
    const json& f = j.at("filters");
    require_known_keys(f, {"gaussian_sigma", "sg_window", "sg_order", "one_euro_min_cutoff",
                           "one_euro_beta", "one_euro_d_cutoff"},
                       "filters");
    get_if(f, "gaussian_sigma", cfg.filters.gaussian_sigma);
    get_if(f, "sg_window", cfg.filters.sg_window);
    get_if(f, "sg_order", cfg.filters.sg_order);
    get_if(f, "one_euro_min_cutoff", cfg.filters.one_euro_min_cutoff);
    get_if(f, "one_euro_beta", cfg.filters.one_euro_beta);
    get_if(f, "one_euro_d_cutoff", cfg.filters.one_euro_d_cutoff);
  }

  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    require_known_keys(o, {"lr_pretrain", "lr_finetune", "batch", "epochs", "weight_decay",
                           "schedule"},
                       "optimizer");
    get_if(o, "lr_pretrain", cfg.optimizer.lr_pretrain);
    get_if(o, "lr_finetune", cfg.optimizer.lr_finetune);
    get_if(o, "batch", cfg.optimizer.batch);
    get_if(o, "epochs", cfg.optimizer.epochs);
    get_if(o, "weight_decay", cfg.optimizer.weight_decay);
    get_if(o, "schedule", cfg.optimizer.schedule);
    if (cfg.optimizer.lr_pretrain <= 0 || cfg.optimizer.lr_finetune <= 0)
      throw std::runtime_error("config: learning rates must be > 0");
    if (cfg.optimizer.schedule != "cosine" && cfg.optimizer.schedule != "constant")
      throw std::runtime_error("config: unknown schedule '" + cfg.optimizer.schedule + "'");
  }

  if (j.contains("loss")) {
    const json& l = j.at("loss");
    require_known_keys(l, {"seg", "contact", "coord", "k_contact", "hoicl", "cppool", "heatmap",
                           "limb"},
                       "loss");
    get_if(l, "seg", cfg.loss.pretrain.seg);
    get_if(l, "contact", cfg.loss.pretrain.contact);
    get_if(l, "coord", cfg.loss.pretrain.coord);
    get_if(l, "k_contact", cfg.loss.pretrain.k_contact);
    get_if(l, "hoicl", cfg.loss.pretrain.hoicl);
    get_if(l, "cppool", cfg.loss.pretrain.cppool);
    get_if(l, "heatmap", cfg.loss.finetune.heatmap);
    get_if(l, "limb", cfg.loss.finetune.limb);
  }

  if (j.contains("simulator")) {
    const json& s = j.at("simulator");
    require_known_keys(s, {"azimuth_min_deg", "azimuth_max_deg", "azimuth_step_deg",
                           "elevation_min_deg", "elevation_max_deg", "elevation_step_deg",
                           "origin", "max_range", "range_noise_sigma", "object_dropout",
                           "crop_radius", "dt", "box_subdiv"},
                       "simulator");
    get_if(s, "azimuth_min_deg", cfg.simulator.azimuth_min_deg);
    get_if(s, "azimuth_max_deg", cfg.simulator.azimuth_max_deg);
    get_if(s, "azimuth_step_deg", cfg.simulator.azimuth_step_deg);
    get_if(s, "elevation_min_deg", cfg.simulator.elevation_min_deg);
    get_if(s, "elevation_max_deg", cfg.simulator.elevation_max_deg);
    get_if(s, "elevation_step_deg", cfg.simulator.elevation_step_deg);
    get_vec3(s, "origin", cfg.simulator.origin);
    get_if(s, "max_range", cfg.simulator.max_range);
    get_if(s, "range_noise_sigma", cfg.simulator.range_noise_sigma);
    get_if(s, "object_dropout", cfg.simulator.object_dropout);
    get_if(s, "crop_radius", cfg.simulator.crop_radius);
    get_if(s, "dt", cfg.simulator.dt);
    get_if(s, "box_subdiv", cfg.simulator.box_subdiv);
    if (cfg.simulator.dt <= 0) throw std::runtime_error("config: simulator.dt must be > 0");
  }

  if (j.contains("dataset_mix")) {
    require_known_keys(j.at("dataset_mix"), {"ratios"}, "dataset_mix");
    get_if(j.at("dataset_mix"), "ratios", cfg.dataset_mix_ratios);
  }

  cfg.model.check();
  cfg.filters.check();
  return cfg;
}

/// Loads a config file; the HOIL_SEED environment variable overrides the seed.
inline RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("config: parse error in " + path + ": " + e.what());
  }
  RunConfig cfg = parse_config(j);
  if (const char* env = std::getenv("HOIL_SEED")) cfg.seed = std::strtoull(env, nullptr, 10);
  return cfg;
}

inline KeypointProfile profile_from_name(const std::string& name) {
  return detail_config::parse_profile(name);
}
inline std::string profile_to_name(KeypointProfile p) {
  return detail_config::profile_name(p);
}

}  // namespace hoil::pipeline
