#include <cstdio>
#include <iostream>

#include "commands.hpp"
#include "common.hpp"
#include "echogcn/bench.hpp"
#include "echogcn/gradcheck.hpp"
#include "echogcn/io.hpp"

namespace echogcn::cli {

namespace {

std::vector<Sample> load_samples(const Dataset& d, const std::string& split) {
  std::vector<Sample> out;
  for (const DatasetSample* s : d.split(split))
    out.push_back({read_image_png((d.root / s->image).string()), read_keypoints((d.root / s->keypoints).string())});
  return out;
}

}  // namespace

int run_train(const TrainOptions& o) {
  RunConfig cfg = load_config(o.config);
  if (o.seed) cfg.seeds.init = cfg.seeds.train = cfg.train.seed = *o.seed;
  if (o.epochs) cfg.train.epochs = *o.epochs;
  cfg.validate();
  const Dataset data = read_dataset(pick(o.data, cfg.paths.data_dir));
  const fs::path out = pick(o.out, cfg.paths.out_dir);
  ensure_dir(out);

  const std::vector<Sample> train_set = load_samples(data, "train");
  const std::vector<Sample> val_set = load_samples(data, "val");
  GCNModel<float> model(cfg.model);
  model.init(cfg.seeds.init);

  std::string curve = "epoch,learning_rate,train_loss,val_loss\n";
  const TrainResult res = train(model, train_set, val_set, cfg.train, [&](const EpochStats& s) {
    curve += std::to_string(s.epoch) + "," + fmt(cfg.train.learning_rate_at(s.epoch), 8) + "," +
             fmt(s.train_loss) + "," + fmt(s.val_loss) + "\n";
    // Timing goes to the terminal only; files stay reproducible.
    if (!o.quiet)
      std::fprintf(stderr, "epoch %d  train %.4f  val %.4f  %.1fs\n", s.epoch, s.train_loss, s.val_loss, s.seconds);
  });

  save_model((out / "model.weights").string(), model);
  write_text((out / "curve.csv").string(), curve);
  save_run_config((out / "run_config.json").string(), cfg);
  write_json(out / "train_summary.json", {{"best_epoch", res.best_epoch},
                                          {"best_loss", res.best_loss},
                                          {"epochs", cfg.train.epochs},
                                          {"parameter_count", model.parameter_count()},
                                          {"train_samples", train_set.size()},
                                          {"val_samples", val_set.size()}});
  std::cout << "best epoch " << res.best_epoch << " loss " << fmt(res.best_loss) << "; model at "
            << (out / "model.weights").generic_string() << "\n";
  return 0;
}

int run_infer(const InferOptions& o) {
  if (o.model.empty() || o.data.empty() || o.out.empty()) usage_error("infer needs --model, --data and --out");
  if (o.split != "train" && o.split != "val" && o.split != "test" && o.split != "all")
    usage_error("--split must be train, val, test or all");
  GCNModel<float> model = load_model(o.model);
  const Dataset data = read_dataset(o.data);
  const fs::path out = o.out;
  ensure_dir(out / "keypoints");
  ensure_dir(out / "masks");

  const auto picked = data.split(o.split);
  json ids = json::array();
  constexpr std::size_t kChunk = 32;
  for (std::size_t start = 0; start < picked.size(); start += kChunk) {
    const std::size_t end = std::min(picked.size(), start + kChunk);
    std::vector<Image> images;
    for (std::size_t i = start; i < end; ++i) images.push_back(read_image_png((data.root / picked[i]->image).string()));
    const std::vector<InferResult> res = infer_batch(model, images);
    for (std::size_t i = start; i < end; ++i) {
      const std::string& id = picked[i]->id;
      write_keypoints((out / "keypoints" / (id + ".json")).string(), res[i - start].keypoints, data.spacing);
      write_mask_png((out / "masks" / (id + ".png")).string(), res[i - start].mask);
      ids.push_back(id);
    }
  }
  write_json(out / "predictions.json", {{"split", o.split}, {"samples", ids}});
  std::cout << "inferred " << picked.size() << " samples\n";
  return 0;
}

int run_bench(const BenchOptions& o) {
  RunConfig cfg = load_config(o.config);
  if (o.warmup) cfg.bench.warmup_inputs = *o.warmup;
  if (o.runs) cfg.bench.test_runs = *o.runs;
  if (o.per_run) cfg.bench.inputs_per_run = *o.per_run;
  cfg.bench.validate();
  GCNModel<float> model;
  std::string name;
  if (!o.model.empty()) {
    model = load_model(o.model);
    name = fs::path(o.model).stem().string();
  } else {
    ModelConfig mc = cfg.model;
    mc.decoder = DecoderConfig::variant(o.variant);
    mc.decoder.displacement_head = cfg.model.decoder.displacement_head;
    model = GCNModel<float>(mc);
    model.init(cfg.seeds.init);
    name = "gcn-" + o.variant;
  }
  const BenchResult r = bench_model(model, cfg.bench, o.seed.value_or(cfg.seeds.bench));
  std::cout << format_bench_row(name, r) << "\n";
  return 0;
}

int run_gradcheck(const GradcheckOptions& o) {
  double worst = 0;
  bool ok = true;
  for (const GradcheckResult& r : run_gradchecks(o.seed)) {
    std::printf("%-28s rel_err %.3e  tol %.0e  %zu coords  %s\n", r.name.c_str(), r.rel_error, r.tolerance, r.coords,
                r.pass() ? "ok" : "FAIL");
    worst = std::max(worst, r.rel_error);
    ok = ok && r.pass();
  }
  std::printf("max relative error %.3e\n", worst);
  return ok ? 0 : 1;
}

}  // namespace echogcn::cli
