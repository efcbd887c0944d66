#include <iostream>
#include <map>
#include <set>

#include "commands.hpp"
#include "common.hpp"
#include "echogcn/agreement.hpp"
#include "echogcn/anatomy.hpp"
#include "echogcn/io.hpp"
#include "echogcn/metrics.hpp"

namespace echogcn::cli {

namespace {

json summary_json(const std::vector<double>& v) {
  if (v.empty()) return nullptr;
  const MeanSd m = mean_sd(v);
  return {{"mean", m.mean}, {"sd", m.sd}, {"n", v.size()}};
}

double keypoint_error_px(const KeypointSet& a, const KeypointSet& b, int width, int height) {
  validate_layout(a);
  validate_layout(b);
  if (a.sampling().total() != b.sampling().total())
    throw Error(Errc::LayoutMismatch, kModule, "predicted and reference keypoints use different sampling");
  double sum = 0;
  std::size_t n = 0;
  for (auto [p, q] : {std::pair{&a.endo, &b.endo}, std::pair{&a.epi, &b.epi}, std::pair{&a.la, &b.la}}) {
    for (std::size_t i = 0; i < p->size(); ++i, ++n)
      sum += distance(to_pixels((*p)[i], width, height), to_pixels((*q)[i], width, height));
  }
  return sum / static_cast<double>(n);
}

std::string join(const std::vector<std::string>& v, char sep) {
  std::string s;
  for (const std::string& x : v) s += (s.empty() ? "" : std::string(1, sep)) + x;
  return s;
}

}  // namespace

int run_evaluate(const EvaluateOptions& o) {
  const RunConfig cfg = load_config(o.config);
  if (o.pred.empty() || o.ref.empty() || o.out.empty()) usage_error("evaluate needs --pred, --ref and --out");
  const fs::path pred = o.pred, ref = o.ref;
  PixelSpacing spacing{cfg.data.spacing_mm, cfg.data.spacing_mm};
  if (fs::exists(ref / "manifest.json")) spacing = read_dataset(ref).spacing;

  const auto files = list_files(pred / "masks", ".png", true);
  if (files.empty()) throw Error(Errc::EmptyDataset, kModule, "no masks under " + (pred / "masks").string());

  std::string csv = "id,dice_lv,dice_myo,dice_la,dice_combined,hausdorff_endo_mm,hausdorff_epi_mm,"
                    "keypoint_error_px,anatomy_ok,anatomy_failures\n";
  std::vector<double> d_lv, d_myo, d_la, d_comb, h_endo, h_epi, kp_err;
  std::map<std::string, int> failure_counts;
  int passed = 0;
  for (const std::string& rel : files) {
    const std::string id = stem_id(rel);
    const LabelMask pm = read_mask_png((pred / "masks" / rel).string());
    const LabelMask rm = read_mask_png((ref / "masks" / rel).string());
    const MetricReport m = evaluate_masks(pm, rm, spacing);

    const fs::path pk = pred / "keypoints" / (id + ".json"), rk = ref / "keypoints" / (id + ".json");
    std::optional<KeypointSet> pred_kps;
    if (fs::exists(pk)) pred_kps = read_keypoints(pk.string());
    std::optional<double> err;
    if (pred_kps && fs::exists(rk)) err = keypoint_error_px(*pred_kps, read_keypoints(rk.string()), pm.width, pm.height);

    const AnatomyReport an = pred_kps ? check_keypoints(*pred_kps, pm.width, pm.height) : check_mask(pm);
    const auto fails = an.failures();
    for (const std::string& f : fails) ++failure_counts[f];
    passed += an.overall() ? 1 : 0;

    d_lv.push_back(m.dice_lv);
    d_myo.push_back(m.dice_myo);
    d_la.push_back(m.dice_la);
    d_comb.push_back(m.dice_combined);
    if (m.hausdorff_endo) h_endo.push_back(*m.hausdorff_endo);
    if (m.hausdorff_epi) h_epi.push_back(*m.hausdorff_epi);
    if (err) kp_err.push_back(*err);
    csv += id + "," + fmt(m.dice_lv) + "," + fmt(m.dice_myo) + "," + fmt(m.dice_la) + "," + fmt(m.dice_combined) + "," +
           fmt(m.hausdorff_endo, 4) + "," + fmt(m.hausdorff_epi, 4) + "," + fmt(err, 4) + "," +
           (an.overall() ? "1" : "0") + "," + join(fails, ';') + "\n";
  }

  const int n = static_cast<int>(files.size());
  json failures = json::object();
  for (const auto& [k, v] : failure_counts) failures[k] = v;
  const json report{{"n", n},
                    {"spacing", {spacing.sx, spacing.sy}},
                    {"dice_lv", summary_json(d_lv)},
                    {"dice_myo", summary_json(d_myo)},
                    {"dice_la", summary_json(d_la)},
                    {"dice_combined", summary_json(d_comb)},
                    {"hausdorff_endo_mm", summary_json(h_endo)},
                    {"hausdorff_epi_mm", summary_json(h_epi)},
                    {"keypoint_error_px", summary_json(kp_err)},
                    {"anatomy_pass", passed},
                    {"anatomically_incorrect", n - passed},
                    {"failure_counts", failures}};
  ensure_dir(o.out);
  write_text((fs::path(o.out) / "samples.csv").string(), csv);
  write_json(fs::path(o.out) / "report.json", report);
  std::cout << "evaluated " << n << " samples: combined Dice " << fmt(mean_sd(d_comb).mean, 4)
            << ", anatomically incorrect " << n - passed << "\n";
  return 0;
}

namespace {

struct ViewSegmentation {
  std::map<int, FrameSegmentation> a, b;
  int width = 0, height = 0;
};

ViewSegmentation segment_view(const Recording& rec, const fs::path& base, GCNModel<float>& model_a,
                              GCNModel<float>* model_b) {
  std::set<int> needed;
  for (const Cycle& c : rec.cycles) needed.insert({c.ed, c.es});
  std::vector<int> idx(needed.begin(), needed.end());
  std::vector<Image> images;
  for (int i : idx) images.push_back(read_image_png((base / rec.frames[static_cast<std::size_t>(i)]).string()));
  ViewSegmentation out;
  if (images.empty()) return out;
  out.width = images.front().width;
  out.height = images.front().height;
  std::vector<InferResult> ra = infer_batch(model_a, images);
  std::vector<InferResult> rb;
  if (model_b) rb = infer_batch(*model_b, images);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    FrameSegmentation fa{ra[k].keypoints, ra[k].mask, std::nullopt};
    if (model_b) {
      const double agree = inter_model_dice(ra[k].mask, rb[k].mask);
      fa.agreement = agree;
      out.b[idx[k]] = {rb[k].keypoints, rb[k].mask, agree};
    }
    out.a[idx[k]] = std::move(fa);
  }
  return out;
}

}  // namespace

int run_ef(const EfOptions& o) {
  RunConfig cfg = load_config(o.config);
  if (o.exams.empty() || o.model.empty() || o.out.empty()) usage_error("ef needs --exams, --model and --out");
  if (o.filter && o.second.empty()) usage_error("--filter needs --second: agreement compares two models");
  std::optional<double> threshold;
  if (o.filter) threshold = o.threshold.value_or(cfg.agreement.filter_threshold);
  if (threshold && !(*threshold >= 0.0 && *threshold <= 1.0)) usage_error("--threshold must lie in [0, 1]");

  const std::vector<ExamManifest> exams = read_exams(o.exams);
  const fs::path base = fs::path(o.exams).parent_path();
  GCNModel<float> model_a = load_model(o.model);
  std::optional<GCNModel<float>> model_b;
  if (!o.second.empty()) model_b = load_model(o.second);

  std::string csv = "patient_id,status,usable_cycles,ef_a,ef_b,ef,reference_ef,abs_error\n";
  std::vector<double> auto_ef, ref_ef;
  int feasible = 0, excluded = 0, infeasible = 0;
  for (const ExamManifest& e : exams) {
    ViewSegmentation v2 = segment_view(e.a2c, base, model_a, model_b ? &*model_b : nullptr);
    ViewSegmentation v4 = segment_view(e.a4c, base, model_a, model_b ? &*model_b : nullptr);
    ExamSegmentations sa{v4.width, v4.height, std::move(v2.a), std::move(v4.a)};
    ExamSegmentations sb{v4.width, v4.height, std::move(v2.b), std::move(v4.b)};
    std::string status = "ok";
    std::optional<double> ef_a, ef_b, ef;
    int usable_cycles = 0;
    try {
      const EFResult ra = exam_ef(e, sa, threshold);
      usable_cycles = ra.usable_cycles;
      if (ra.excluded) {
        status = "excluded";
      } else {
        ef_a = ef = ra.mean_ef;
        if (model_b) {
          const EFResult rb = exam_ef(e, sb, threshold);
          if (rb.excluded) {
            status = "excluded";
            ef_a = ef = std::nullopt;
          } else {
            ef_b = rb.mean_ef;
            ef = ensemble_ef(*ef_a, *ef_b);
          }
        }
      }
    } catch (const Error& err) {
      if (err.code() != Errc::NoUsableCycle) throw;
      status = "infeasible";
    }
    std::optional<double> abs_err;
    if (status == "ok") {
      ++feasible;
      if (e.reference.ef) {
        auto_ef.push_back(*ef);
        ref_ef.push_back(*e.reference.ef);
        abs_err = std::abs(*ef - *e.reference.ef);
      }
    } else {
      (status == "excluded" ? excluded : infeasible) += 1;
    }
    csv += e.patient_id + "," + status + "," + std::to_string(usable_cycles) + "," + fmt(ef_a) + "," + fmt(ef_b) +
           "," + fmt(ef) + "," + fmt(e.reference.ef) + "," + fmt(abs_err) + "\n";
  }

  json summary{{"patients", exams.size()},
               {"feasible", feasible},
               {"excluded", excluded},
               {"infeasible", infeasible},
               {"filter_threshold", threshold ? json(*threshold) : json(nullptr)},
               {"ensemble", model_b.has_value()}};
  if (!auto_ef.empty()) {
    const MeanSd m = mae(auto_ef, ref_ef);
    summary["mae"] = {{"mean", m.mean}, {"sd", m.sd}, {"n", auto_ef.size()}};
  }
  if (auto_ef.size() >= 2) {
    const BlandAltman ba = bland_altman(auto_ef, ref_ef);
    summary["bland_altman"] = {{"bias", ba.bias}, {"sd", ba.sd}, {"loa_low", ba.loa_low}, {"loa_high", ba.loa_high}};
  }
  ensure_dir(o.out);
  write_text((fs::path(o.out) / "ef.csv").string(), csv);
  write_json(fs::path(o.out) / "ef_summary.json", summary);
  std::cout << feasible << " of " << exams.size() << " patients feasible";
  if (summary.contains("mae")) std::cout << ", EF MAE " << fmt(summary["mae"]["mean"].get<double>(), 4);
  std::cout << "\n";
  return 0;
}

int run_agreement(const AgreementOptions& o) {
  const RunConfig cfg = load_config(o.config);
  if (o.a.empty() || o.b.empty() || o.out.empty()) usage_error("agreement needs --a, --b and --out");
  const auto fa = list_files(o.a, ".png", true), fb = list_files(o.b, ".png", true);
  if (fa != fb) {
    std::vector<std::string> diff;
    std::set_symmetric_difference(fa.begin(), fa.end(), fb.begin(), fb.end(), std::back_inserter(diff));
    throw Error(Errc::LengthMismatch, kModule,
                "mask directories differ (" + std::to_string(diff.size()) + " unpaired, first: " + diff.front() + ")");
  }
  std::vector<AgreementRecord> records;
  std::vector<double> values;
  std::string csv = "frame_id,dice,class,retained\n";
  int counts[3] = {0, 0, 0}, retained = 0;
  for (const std::string& rel : fa) {
    const double d = inter_model_dice(read_mask_png((fs::path(o.a) / rel).string()),
                                      read_mask_png((fs::path(o.b) / rel).string()));
    AgreementRecord r = make_record(stem_id(rel), d, cfg.agreement);
    ++counts[static_cast<int>(r.cls)];
    retained += r.retained ? 1 : 0;
    values.push_back(d);
    csv += r.frame_id + "," + fmt(d) + "," + to_string(r.cls) + "," + (r.retained ? "1" : "0") + "\n";
    records.push_back(std::move(r));
  }
  const Histogram h = histogram(values, cfg.agreement.bin_width);
  const std::vector<AgreementRecord> sample =
      partition_sample(records, o.k_low, o.k_high, o.seed.value_or(cfg.seeds.data));
  std::string sample_csv = "frame_id,dice,class\n";
  for (const AgreementRecord& r : sample) sample_csv += r.frame_id + "," + fmt(r.dice) + "," + to_string(r.cls) + "\n";

  ensure_dir(o.out);
  write_text((fs::path(o.out) / "records.csv").string(), csv);
  write_text((fs::path(o.out) / "sample.csv").string(), sample_csv);
  write_json(fs::path(o.out) / "histogram.json",
             {{"bin_width", h.bin_width},
              {"counts", h.counts},
              {"n", records.size()},
              {"low", counts[0]},
              {"mid", counts[1]},
              {"high", counts[2]},
              {"retained", retained},
              {"thresholds",
               {{"low", cfg.agreement.low_threshold},
                {"high", cfg.agreement.high_threshold},
                {"filter", cfg.agreement.filter_threshold}}}});
  std::cout << records.size() << " frames: " << counts[0] << " low, " << counts[1] << " mid, " << counts[2]
            << " high; " << retained << " retained\n";
  return 0;
}

}  // namespace echogcn::cli
