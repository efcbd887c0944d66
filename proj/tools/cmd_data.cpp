#include <cstdio>
#include <iostream>

#include "commands.hpp"
#include "common.hpp"
#include "echogcn/io.hpp"
#include "echogcn/raster.hpp"

namespace echogcn::cli {

namespace {

std::string sample_id(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06d", i);
  return buf;
}

std::string patient_id(int k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "p%03d", k);
  return buf;
}

// Writes frames under exams/<pid>/<view>/ and truth masks under exam_masks/.
Recording write_recording(const fs::path& root, const std::string& pid, const std::string& view,
                          const SyntheticRecording& rec, PixelSpacing spacing) {
  const std::string rel_dir = pid + "/" + view;
  ensure_dir(root / "exams" / rel_dir);
  ensure_dir(root / "exam_masks" / rel_dir);
  Recording r;
  r.spacing = spacing;
  r.cycles = rec.cycles;
  for (std::size_t f = 0; f < rec.images.size(); ++f) {
    const std::string name = std::to_string(f) + ".png";
    write_image_png((root / "exams" / rel_dir / name).string(), rec.images[f]);
    write_mask_png((root / "exam_masks" / rel_dir / name).string(), rec.masks[f]);
    r.frames.push_back(rel_dir + "/" + name);
  }
  return r;
}

}  // namespace

int run_synth(const SynthOptions& o) {
  const RunConfig cfg = load_config(o.config);
  const fs::path root = pick(o.out, cfg.paths.data_dir);
  const int n = o.n.value_or(cfg.data.count);
  const std::uint64_t seed = o.seed.value_or(cfg.seeds.data);
  if (n < 1) usage_error("--n must be >= 1");
  if (o.exams < 0 || o.cycles < 1) usage_error("--exams must be >= 0 and --cycles >= 1");
  const PhantomParams params;
  const PixelSpacing spacing{cfg.data.spacing_mm, cfg.data.spacing_mm};
  for (const char* d : {"images", "masks", "keypoints"}) ensure_dir(root / d);

  const int n_train = std::min(cfg.data.train, n);
  const int n_val = std::min(cfg.data.val, n - n_train);
  json samples = json::array();
  for (int i = 0; i < n; ++i) {
    const std::uint64_t s = seed + static_cast<std::uint64_t>(i);
    const Phantom ph = generate_phantom(s, params);
    const std::string id = sample_id(i);
    const std::string img = "images/" + id + ".png", msk = "masks/" + id + ".png", kp = "keypoints/" + id + ".json";
    write_image_png((root / img).string(), ph.image);
    write_mask_png((root / msk).string(), ph.mask);
    write_keypoints((root / kp).string(), extract_keypoints(ph.mask), spacing);
    const char* split = i < n_train ? "train" : i < n_train + n_val ? "val" : "test";
    samples.push_back({{"id", id},
                       {"seed", s},
                       {"split", split},
                       {"image", img},
                       {"mask", msk},
                       {"keypoints", kp},
                       {"geometry", geometry_json(ph.geometry)}});
  }
  write_json(root / "manifest.json", {{"version", kDatasetVersion},
                                      {"seed", seed},
                                      {"count", n},
                                      {"spacing", {spacing.sx, spacing.sy}},
                                      {"width", params.width},
                                      {"height", params.height},
                                      {"splits", {{"train", n_train}, {"val", n_val}, {"test", n - n_train - n_val}}},
                                      {"phantom", phantom_params_json(params)},
                                      {"samples", samples}});

  if (o.exams > 0) {
    // A separate stream so adding exams never changes the sample corpus.
    Rng rng(seed ^ 0x6578616d73ULL);
    std::vector<ExamManifest> exams;
    for (int k = 0; k < o.exams; ++k) {
      std::vector<double> scales;
      double ef_sum = 0;
      for (int c = 0; c < o.cycles; ++c) {
        scales.push_back(rng.uniform(0.78, 0.9));
        ef_sum += 1.0 - scales.back() * scales.back() * scales.back();
      }
      const std::uint64_t s2 = rng.below(1ULL << 62), s4 = rng.below(1ULL << 62);
      ExamManifest e;
      e.patient_id = patient_id(k);
      e.a2c = write_recording(root, e.patient_id, "a2c", generate_recording(s2, scales, params), spacing);
      e.a4c = write_recording(root, e.patient_id, "a4c", generate_recording(s4, scales, params), spacing);
      e.reference.ef = ef_sum / o.cycles;
      exams.push_back(std::move(e));
    }
    write_exams((root / "exams" / "exams.json").string(), exams);
  }
  std::cout << "wrote " << n << " samples" << (o.exams > 0 ? " and " + std::to_string(o.exams) + " exams" : "")
            << " to " << root.generic_string() << "\n";
  return 0;
}

int run_extract(const ExtractOptions& o) {
  const RunConfig cfg = load_config(o.config);
  if (o.masks.empty() || o.out.empty()) usage_error("extract-keypoints needs --masks and --out");
  const ExtractionConfig ex{cfg.model.sampling, AnnulusMode::LvLaInterface};
  const PixelSpacing spacing{cfg.data.spacing_mm, cfg.data.spacing_mm};
  const auto files = list_files(o.masks, ".png", true);
  for (const std::string& rel : files) {
    const LabelMask mask = read_mask_png((fs::path(o.masks) / rel).string());
    KeypointSet kps;
    try {
      kps = extract_keypoints(mask, ex);
    } catch (const Error& e) {
      throw Error(e.code(), e.module(), rel + ": " + e.what());
    }
    const fs::path dst = fs::path(o.out) / (stem_id(rel) + ".json");
    ensure_dir(dst.parent_path());
    write_keypoints(dst.string(), kps, spacing);
  }
  std::cout << "extracted " << files.size() << " keypoint sets\n";
  return 0;
}

int run_rasterize(const RasterizeOptions& o) {
  if (o.keypoints.empty() || o.out.empty()) usage_error("rasterize needs --keypoints and --out");
  if (o.width < 1 || o.height < 1) usage_error("--width and --height must be >= 1");
  const auto files = list_files(o.keypoints, ".json", true);
  for (const std::string& rel : files) {
    const KeypointSet kps = read_keypoints((fs::path(o.keypoints) / rel).string());
    LabelMask mask;
    try {
      mask = rasterize_keypoints(kps, o.width, o.height);
    } catch (const Error& e) {
      throw Error(e.code(), e.module(), rel + ": " + e.what());
    }
    const fs::path dst = fs::path(o.out) / (stem_id(rel) + ".png");
    ensure_dir(dst.parent_path());
    write_mask_png(dst.string(), mask);
  }
  std::cout << "rasterized " << files.size() << " masks\n";
  return 0;
}

}  // namespace echogcn::cli
