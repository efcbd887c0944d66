#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "commands.hpp"
#include "common.hpp"

namespace {

using namespace echogcn;
using namespace echogcn::cli;

void print_error(const std::string& code, const std::string& module, const std::string& message) {
  std::cerr << json{{"error", code}, {"module", module}, {"message", message}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contour-keypoint cardiac segmentation tools", "echogcn"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "echogcn 0.1.0");
  int code = 0;

  SynthOptions synth;
  auto* s = app.add_subcommand("synth", "Generate a phantom corpus (images, masks, keypoints, manifest)");
  s->add_option("--config", synth.config, "Run config JSON");
  s->add_option("--out", synth.out, "Output directory (default: paths.data_dir)");
  s->add_option("--n", synth.n, "Number of samples (default: data.count)");
  s->add_option("--seed", synth.seed, "First phantom seed (default: seeds.data)");
  s->add_option("--exams", synth.exams, "Also write this many two-view exams")->capture_default_str();
  s->add_option("--cycles", synth.cycles, "Cycles per exam recording")->capture_default_str();
  s->callback([&] { code = run_synth(synth); });

  ExtractOptions ex;
  auto* e = app.add_subcommand("extract-keypoints", "Extract contour keypoints from label-mask PNGs");
  e->add_option("--config", ex.config, "Run config JSON (sampling, spacing)");
  e->add_option("--masks", ex.masks, "Directory of mask PNGs")->required();
  e->add_option("--out", ex.out, "Output directory for keypoint JSON")->required();
  e->callback([&] { code = run_extract(ex); });

  RasterizeOptions ras;
  auto* r = app.add_subcommand("rasterize", "Rasterize keypoint JSON files into label masks");
  r->add_option("--keypoints", ras.keypoints, "Directory of keypoint JSON")->required();
  r->add_option("--out", ras.out, "Output directory for mask PNGs")->required();
  r->add_option("--width", ras.width)->capture_default_str();
  r->add_option("--height", ras.height)->capture_default_str();
  r->callback([&] { code = run_rasterize(ras); });

  TrainOptions tr;
  auto* t = app.add_subcommand("train", "Train a GCN on a synth corpus");
  t->add_option("--config", tr.config, "Run config JSON");
  t->add_option("--data", tr.data, "Corpus directory (default: paths.data_dir)");
  t->add_option("--out", tr.out, "Output directory (default: paths.out_dir)");
  t->add_option("--seed", tr.seed, "Overrides seeds.init and seeds.train");
  t->add_option("--epochs", tr.epochs, "Overrides train.epochs");
  t->add_flag("--quiet", tr.quiet, "No per-epoch progress on stderr");
  t->callback([&] { code = run_train(tr); });

  InferOptions inf;
  auto* i = app.add_subcommand("infer", "Predict keypoints and masks for a corpus split");
  i->add_option("--model", inf.model, "Weights file")->required();
  i->add_option("--data", inf.data, "Corpus directory")->required();
  i->add_option("--out", inf.out, "Output directory")->required();
  i->add_option("--split", inf.split, "train, val, test or all")->capture_default_str();
  i->callback([&] { code = run_infer(inf); });

  EvaluateOptions ev;
  auto* v = app.add_subcommand("evaluate", "Dice, Hausdorff and anatomy report of predictions against a reference");
  v->add_option("--config", ev.config, "Run config JSON (spacing fallback)");
  v->add_option("--pred", ev.pred, "Directory with masks/ and optionally keypoints/")->required();
  v->add_option("--ref", ev.ref, "Reference directory with the same layout")->required();
  v->add_option("--out", ev.out, "Report directory")->required();
  v->callback([&] { code = run_evaluate(ev); });

  EfOptions ef;
  auto* f = app.add_subcommand("ef", "Biplane Simpson EF per patient");
  f->add_option("--config", ef.config, "Run config JSON");
  f->add_option("--exams", ef.exams, "Exam list JSON")->required();
  f->add_option("--model", ef.model, "Weights file")->required();
  f->add_option("--second", ef.second, "Second model for agreement and ensemble EF");
  f->add_flag("--filter", ef.filter, "Drop frames whose inter-model agreement is below the threshold");
  f->add_option("--threshold", ef.threshold, "Filter threshold (default: agreement.filter_threshold)");
  f->add_option("--out", ef.out, "Output directory")->required();
  f->callback([&] { code = run_ef(ef); });

  AgreementOptions ag;
  auto* a = app.add_subcommand("agreement", "Inter-model agreement records, histogram and partition sample");
  a->add_option("--config", ag.config, "Run config JSON (thresholds)");
  a->add_option("--a", ag.a, "First mask directory")->required();
  a->add_option("--b", ag.b, "Second mask directory")->required();
  a->add_option("--out", ag.out, "Output directory")->required();
  a->add_option("--k-low", ag.k_low, "Low-agreement frames to sample")->capture_default_str();
  a->add_option("--k-high", ag.k_high, "High-agreement frames to sample")->capture_default_str();
  a->add_option("--seed", ag.seed, "Sampling seed (default: seeds.data)");
  a->callback([&] { code = run_agreement(ag); });

  BenchOptions be;
  auto* b = app.add_subcommand("bench", "Time single-image inference");
  b->add_option("--config", be.config, "Run config JSON");
  b->add_option("--model", be.model, "Weights file (default: fresh model of --variant)");
  b->add_option("--variant", be.variant, "wide, medium, default or none")->capture_default_str();
  b->add_option("--seed", be.seed, "Input seed (default: seeds.bench)");
  b->add_option("--warmup", be.warmup, "Warm-up inputs");
  b->add_option("--runs", be.runs, "Timed runs");
  b->add_option("--per-run", be.per_run, "Inputs per timed run");
  b->callback([&] { code = run_bench(be); });

  GradcheckOptions gc;
  auto* g = app.add_subcommand("gradcheck", "Finite-difference checks of every layer and the reduced model");
  g->add_option("--seed", gc.seed)->capture_default_str();
  g->callback([&] { code = run_gradcheck(gc); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& ok) {
    return app.exit(ok);
  } catch (const CLI::ParseError& err) {
    print_error("UsageError", kModule, err.what());
    return 2;
  } catch (const Error& err) {
    print_error(std::string(to_string(err.code())), err.module(), err.what());
    return err.code() == Errc::UsageError ? 2 : 1;
  } catch (const std::filesystem::filesystem_error& err) {
    print_error("IoError", kModule, err.what());
    return 1;
  } catch (const std::exception& err) {
    print_error("InternalError", kModule, err.what());
    return 1;
  }
  return code;
}
