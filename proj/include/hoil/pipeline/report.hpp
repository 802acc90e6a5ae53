#pragma once

// Evaluation and refinement reporting: per-frame inference, metric reports
// with the segmentation-vs-pose correlation, the filter comparison table, and
// static SVG plots (per-joint error bars, segmentation/pose scatter).

#include "hoil/metrics.hpp"
#include "hoil/pipeline/train.hpp"
#include "hoil/temporal.hpp"

namespace hoil::pipeline {

struct EvalResult {
  PoseEvalReport report;
  std::vector<KeypointSet> predictions;  // with thresholded contact flags
  std::vector<double> frame_seg_accuracy;
  std::vector<double> frame_mpjpe_mm;
  std::optional<double> seg_pose_correlation;
};

inline EvalResult evaluate_model(HoilModel& model, const Dataset& ds) {
  EvalResult r;
  std::vector<KeypointSet> gts;
  for (const auto& rec : ds.frames) {
    const HeadOutputs out = model.forward(rec.cloud.cloud);
    KeypointSet pred;
    const std::size_t nk = out.keypoints.shape()[0];
    for (std::size_t k = 0; k < nk; ++k) {
      pred.coords.push_back({out.keypoints.data()[k * 3 + 0], out.keypoints.data()[k * 3 + 1],
                             out.keypoints.data()[k * 3 + 2]});
      pred.valid.push_back(1);
      pred.contact.push_back(out.keypoint_contact.data()[k] > 0.0);  // logit threshold
    }
    // per-frame segmentation accuracy from argmax
    std::vector<int> argmax(rec.cloud.size());
    for (std::size_t i = 0; i < rec.cloud.size(); ++i) {
      int best = 0;
      for (int c = 1; c < PartLabelSpace::kNumClasses; ++c)
        if (out.seg.data()[i * PartLabelSpace::kNumClasses + c] >
            out.seg.data()[i * PartLabelSpace::kNumClasses + best])
          best = c;
      argmax[i] = best;
    }
    r.frame_seg_accuracy.push_back(seg_accuracy(argmax, rec.cloud.part));
    r.frame_mpjpe_mm.push_back(mpjpe({pred}, {rec.keypoints}));
    r.predictions.push_back(std::move(pred));
    gts.push_back(rec.keypoints);
  }
  r.report = evaluate_pose(r.predictions, gts, ds.profile);
  if (r.frame_seg_accuracy.size() >= 3)
    r.seg_pose_correlation = pearson(r.frame_seg_accuracy, r.frame_mpjpe_mm);
  return r;
}

inline std::string eval_report_csv(const EvalResult& r) {
  std::string csv = report_csv(r.report);
  std::ostringstream os;
  os << std::setprecision(17);
  os << "seg_pose_correlation,";
  if (r.seg_pose_correlation)
    os << *r.seg_pose_correlation;
  else
    os << "undefined";
  os << "\n";
  double mean_seg = 0.0;
  for (double v : r.frame_seg_accuracy) mean_seg += v;
  os << "seg_accuracy," << mean_seg / static_cast<double>(r.frame_seg_accuracy.size()) << "\n";
  return csv + os.str();
}

// ---------------------------------------------------------------------------
// SVG plots
// ---------------------------------------------------------------------------

namespace detail_svg {

inline std::string header(int w, int h) {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\" viewBox=\"0 0 " << w << " " << h << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  return os.str();
}

}  // namespace detail_svg

/// Horizontal bar chart of per-joint error, one bar per joint.
inline std::string per_joint_svg(const PoseEvalReport& report, KeypointProfile profile) {
  const auto& names = profile_joint_names(profile);
  const int bar_h = 18, left = 130, width = 640, top = 30;
  const int height = top + bar_h * static_cast<int>(report.per_joint_mm.size()) + 20;
  double max_err = 1.0;
  for (double v : report.per_joint_mm)
    if (!std::isnan(v)) max_err = std::max(max_err, v);

  std::ostringstream os;
  os << detail_svg::header(width, height);
  os << "<text x=\"10\" y=\"18\" font-size=\"13\" font-family=\"sans-serif\">per-joint error (mm)"
     << "</text>\n";
  for (std::size_t k = 0; k < report.per_joint_mm.size(); ++k) {
    const int y = top + static_cast<int>(k) * bar_h;
    const double v = report.per_joint_mm[k];
    const double frac = std::isnan(v) ? 0.0 : v / max_err;
    os << "<text x=\"5\" y=\"" << y + 12 << "\" font-size=\"10\" font-family=\"sans-serif\">"
       << (k < names.size() ? names[k] : "joint" + std::to_string(k)) << "</text>\n";
    os << "<rect x=\"" << left << "\" y=\"" << y + 2 << "\" width=\""
       << static_cast<int>(frac * (width - left - 80)) << "\" height=\"" << bar_h - 6
       << "\" fill=\"#4878cf\"/>\n";
    os << "<text x=\"" << left + static_cast<int>(frac * (width - left - 80)) + 4 << "\" y=\""
       << y + 12 << "\" font-size=\"10\" font-family=\"sans-serif\">";
    if (std::isnan(v))
      os << "absent";
    else
      os << std::fixed << std::setprecision(1) << v;
    os << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

/// Scatter of per-frame segmentation accuracy against per-frame MPJPE.
inline std::string seg_pose_scatter_svg(const std::vector<double>& seg_acc,
                                        const std::vector<double>& mpjpe_mm,
                                        std::optional<double> correlation) {
  const int w = 480, h = 360, margin = 45;
  double min_x = 100.0, max_x = 0.0, min_y = 1e30, max_y = -1e30;
  for (double v : seg_acc) {
    min_x = std::min(min_x, v);
    max_x = std::max(max_x, v);
  }
  for (double v : mpjpe_mm) {
    min_y = std::min(min_y, v);
    max_y = std::max(max_y, v);
  }
  if (max_x <= min_x) max_x = min_x + 1.0;
  if (max_y <= min_y) max_y = min_y + 1.0;

  std::ostringstream os;
  os << detail_svg::header(w, h);
  os << "<line x1=\"" << margin << "\" y1=\"" << h - margin << "\" x2=\"" << w - 10 << "\" y2=\""
     << h - margin << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << margin << "\" y1=\"" << h - margin << "\" x2=\"" << margin
     << "\" y2=\"10\" stroke=\"black\"/>\n";
  os << "<text x=\"" << w / 2 - 60 << "\" y=\"" << h - 8
     << "\" font-size=\"11\" font-family=\"sans-serif\">segmentation accuracy (%)</text>\n";
  os << "<text x=\"12\" y=\"" << h / 2
     << "\" font-size=\"11\" font-family=\"sans-serif\" transform=\"rotate(-90 12 " << h / 2
     << ")\">MPJPE (mm)</text>\n";
  for (std::size_t i = 0; i < seg_acc.size(); ++i) {
    const double px = margin + (seg_acc[i] - min_x) / (max_x - min_x) * (w - margin - 20);
    const double py = (h - margin) - (mpjpe_mm[i] - min_y) / (max_y - min_y) * (h - margin - 20);
    os << "<circle cx=\"" << px << "\" cy=\"" << py << "\" r=\"3\" fill=\"#c44e52\"/>\n";
  }
  os << "<text x=\"" << margin + 6 << "\" y=\"22\" font-size=\"12\" font-family=\"sans-serif\">r = ";
  if (correlation)
    os << std::fixed << std::setprecision(3) << *correlation;
  else
    os << "undefined";
  os << "</text>\n</svg>\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Refinement driver
// ---------------------------------------------------------------------------

struct RefineOutcome {
  std::vector<temporal::FilterComparisonRow> rows;
};

/// Builds the prediction trajectory (optionally with oracle contact), applies
/// the requested refinement methods, and evaluates each against ground truth.
/// CTRefine is trained on seeded noisy copies of the dataset's ground truth.
inline RefineOutcome run_refine(const RunConfig& cfg, HoilModel& model, const Dataset& ds,
                                const std::string& method, bool oracle_contact) {
  EvalResult eval = evaluate_model(model, ds);
  temporal::Trajectory pred = eval.predictions;
  temporal::Trajectory gt;
  for (const auto& rec : ds.frames) gt.push_back(rec.keypoints);
  for (std::size_t t = 0; t < pred.size(); ++t) {
    pred[t].valid = gt[t].valid;  // evaluate on the ground-truth validity mask
    if (oracle_contact) pred[t].contact = gt[t].contact;
  }

  auto eval_row = [&](const std::string& name, const temporal::Trajectory& traj) {
    return temporal::FilterComparisonRow{name, mpjpe(traj, gt), pck(traj, gt, 0.3, ds.profile),
                                         pck(traj, gt, 0.5, ds.profile)};
  };

  RefineOutcome out;
  out.rows.push_back(eval_row("none", pred));
  if (method == "none") return out;

  if (method == "gaussian" || method == "all")
    out.rows.push_back(eval_row("gaussian", temporal::gaussian_smooth(pred, cfg.filters)));
  if (method == "sg" || method == "all")
    out.rows.push_back(eval_row("sg", temporal::savitzky_golay(pred, cfg.filters)));
  if (method == "oneeuro" || method == "all")
    out.rows.push_back(eval_row("oneeuro", temporal::one_euro(pred, cfg.filters, ds.dt)));
  if (method == "ctrefine" || method == "all") {
    temporal::CTRefineConfig rc;
    rc.seed = cfg.seed;
    temporal::CTRefine refiner(rc);
    // train on seeded noisy copies of the ground truth
    std::vector<temporal::RefinePair> pairs;
    std::mt19937_64 rng(cfg.seed ^ 0x5eedULL);
    std::normal_distribution<double> noise(0.0, 0.03);
    for (int copy = 0; copy < 12; ++copy) {
      temporal::RefinePair pair;
      pair.ground_truth = gt;
      pair.noisy = gt;
      for (auto& frame : pair.noisy)
        for (auto& c : frame.coords) c = c + Vec3{noise(rng), noise(rng), noise(rng)};
      pairs.push_back(std::move(pair));
    }
    temporal::train_ctrefine(refiner, pairs, 240, 2e-3, cfg.seed);
    out.rows.push_back(eval_row("ctrefine", refiner.refine(pred)));
  }
  if (out.rows.size() == 1)
    throw std::runtime_error("run_refine: unknown method '" + method + "'");
  return out;
}

}  // namespace hoil::pipeline
