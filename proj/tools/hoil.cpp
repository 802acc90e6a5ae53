// hoil: command-line front end for the pipeline.
//
//   simulate  --config C --frames T --out DIR        synthetic sequence
//   pretrain  --config C --data DIR --out CKPT       pre-training loop
//   finetune  --config C --ckpt CKPT --data DIR ...  fine-tuning loop
//   eval      --config C --ckpt CKPT --data DIR ...  metric reports + plots
//   refine    --config C --ckpt CKPT --data DIR ...  temporal refinement table
//
// Exit codes: 0 ok, 1 usage, 2 data/config, 3 numerical failure.

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "hoil/pipeline/report.hpp"

namespace fs = std::filesystem;
using namespace hoil;

namespace {

pipeline::RunConfig load_or_die(const std::string& path) { return pipeline::load_config(path); }

HoilModel build_model_for_checkpoint(const pipeline::RunConfig& cfg,
                                     const ad::NamedTensors& entries) {
  const Mode mode = pipeline::checkpoint_is_finetune(entries) ? Mode::Finetune : Mode::Pretrain;
  HoilModel model(cfg.model, mode, cfg.seed);
  model.params().load(entries, /*strict=*/false);
  return model;
}

int cmd_simulate(const std::string& config_path, int frames, const std::string& out_dir) {
  const auto cfg = load_or_die(config_path);
  if (frames <= 0) throw std::invalid_argument("simulate: --frames must be >= 1");
  const auto manifest = pipeline::simulate_sequence(cfg, frames, out_dir);
  std::cout << "wrote " << manifest.frame_files.size() << " frames to " << out_dir << "\n";
  return 0;
}

int cmd_pretrain(const std::string& config_path, const std::string& data_dir,
                 const std::string& out_ckpt, const std::string& resume,
                 const std::string& log_path) {
  const auto cfg = load_or_die(config_path);
  const auto ds = pipeline::load_dataset(data_dir);
  if (ds.profile != cfg.profile)
    throw std::runtime_error("pretrain: dataset profile differs from the config profile");
  HoilModel model(cfg.model, Mode::Pretrain, cfg.seed);
  const auto run = pipeline::pretrain(cfg, model, ds, out_ckpt, resume);
  if (!log_path.empty()) write_text_file(log_path, run.stats.loss_log);
  std::cout << "pretrain: " << run.stats.steps_run << " steps, loss " << run.stats.step0_loss
            << " -> " << run.stats.final_loss << "\n";
  return 0;
}

int cmd_finetune(const std::string& config_path, const std::string& ckpt_path,
                 const std::string& data_dir, const std::string& out_ckpt, bool reinit_queries,
                 const std::string& resume, const std::string& log_path) {
  const auto cfg = load_or_die(config_path);
  const auto ds = pipeline::load_dataset(data_dir);
  if (ds.profile != cfg.profile)
    throw std::runtime_error("finetune: dataset profile differs from the config profile");
  HoilModel model(cfg.model, Mode::Finetune, cfg.seed);
  if (resume.empty()) model.load_pretrained(ad::read_checkpoint(ckpt_path), reinit_queries);
  const auto stats = pipeline::finetune(cfg, model, ds, out_ckpt, resume);
  if (!log_path.empty()) write_text_file(log_path, stats.loss_log);
  std::cout << "finetune: " << stats.steps_run << " steps, loss " << stats.step0_loss << " -> "
            << stats.final_loss << "\n";
  return 0;
}

int cmd_eval(const std::string& config_path, const std::string& ckpt_path,
             const std::string& data_dir, const std::string& report_path,
             const std::string& per_joint_path, const std::string& plot_dir) {
  const auto cfg = load_or_die(config_path);
  const auto ds = pipeline::load_dataset(data_dir);
  HoilModel model = build_model_for_checkpoint(cfg, ad::read_checkpoint(ckpt_path));
  const auto result = pipeline::evaluate_model(model, ds);
  write_text_file(report_path, pipeline::eval_report_csv(result));
  if (!per_joint_path.empty())
    write_text_file(per_joint_path, per_joint_csv(result.report, ds.profile));
  if (!plot_dir.empty()) {
    fs::create_directories(plot_dir);
    write_text_file((fs::path(plot_dir) / "per_joint.svg").string(),
                    pipeline::per_joint_svg(result.report, ds.profile));
    write_text_file((fs::path(plot_dir) / "seg_pose_scatter.svg").string(),
                    pipeline::seg_pose_scatter_svg(result.frame_seg_accuracy,
                                                   result.frame_mpjpe_mm,
                                                   result.seg_pose_correlation));
  }
  std::cout << "eval: MPJPE " << result.report.mpjpe_mm << " mm, PCK-3 " << result.report.pck3
            << ", PCK-5 " << result.report.pck5 << " over " << result.report.n_frames
            << " frames\n";
  return 0;
}

int cmd_refine(const std::string& config_path, const std::string& ckpt_path,
               const std::string& data_dir, const std::string& method,
               const std::string& out_csv, bool oracle_contact) {
  const auto cfg = load_or_die(config_path);
  const auto ds = pipeline::load_dataset(data_dir);
  HoilModel model = build_model_for_checkpoint(cfg, ad::read_checkpoint(ckpt_path));
  const auto outcome = pipeline::run_refine(cfg, model, ds, method, oracle_contact);
  write_text_file(out_csv, temporal::comparison_csv(outcome.rows));
  for (const auto& row : outcome.rows)
    std::cout << row.method << ": MPJPE " << row.mpjpe_mm << " mm\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"human-object interaction pose pipeline"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_path, ckpt_path, resume, log_path, per_joint_path,
      plot_dir, method = "all";
  int frames = 8;
  bool reinit_queries = false, oracle_contact = false;

  auto* sim_cmd = app.add_subcommand("simulate", "generate a synthetic labeled sequence");
  sim_cmd->add_option("--config", config_path)->required();
  sim_cmd->add_option("--frames", frames)->required();
  sim_cmd->add_option("--out", out_path)->required();

  auto* pre = app.add_subcommand("pretrain", "pre-train on a sequence directory");
  pre->add_option("--config", config_path)->required();
  pre->add_option("--data", data_dir)->required();
  pre->add_option("--out", out_path)->required();
  pre->add_option("--resume", resume);
  pre->add_option("--log", log_path);

  auto* fin = app.add_subcommand("finetune", "fine-tune from a pre-training checkpoint");
  fin->add_option("--config", config_path)->required();
  fin->add_option("--ckpt", ckpt_path)->required();
  fin->add_option("--data", data_dir)->required();
  fin->add_option("--out", out_path)->required();
  fin->add_flag("--reinit-queries", reinit_queries,
                "re-initialize keypoint queries when the keypoint count changes");
  fin->add_option("--resume", resume);
  fin->add_option("--log", log_path);

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint and write reports");
  ev->add_option("--config", config_path)->required();
  ev->add_option("--ckpt", ckpt_path)->required();
  ev->add_option("--data", data_dir)->required();
  ev->add_option("--report", out_path)->required();
  ev->add_option("--per-joint", per_joint_path);
  ev->add_option("--plots", plot_dir);

  auto* ref = app.add_subcommand("refine", "temporal refinement comparison table");
  ref->add_option("--config", config_path)->required();
  ref->add_option("--ckpt", ckpt_path)->required();
  ref->add_option("--data", data_dir)->required();
  ref->add_option("--method", method)
      ->check(CLI::IsMember({"none", "gaussian", "sg", "oneeuro", "ctrefine", "all"}));
  ref->add_option("--out", out_path)->required();
  ref->add_flag("--oracle-contact", oracle_contact,
                "condition CTRefine on ground-truth contact instead of predictions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (sim_cmd->parsed()) return cmd_simulate(config_path, frames, out_path);
    if (pre->parsed()) return cmd_pretrain(config_path, data_dir, out_path, resume, log_path);
    if (fin->parsed())
      return cmd_finetune(config_path, ckpt_path, data_dir, out_path, reinit_queries, resume,
                          log_path);
    if (ev->parsed())
      return cmd_eval(config_path, ckpt_path, data_dir, out_path, per_joint_path, plot_dir);
    if (ref->parsed())
      return cmd_refine(config_path, ckpt_path, data_dir, method, out_path, oracle_contact);
  } catch (const pipeline::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "; batch frames:";
    for (std::size_t idx : e.batch_indices) std::cerr << " " << idx;
    std::cerr << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
