#include "echogcn/run_config.hpp"

#include <algorithm>
#include <initializer_list>
#include <nlohmann/json.hpp>

#include "echogcn/error.hpp"
#include "echogcn/io.hpp"

namespace echogcn {

namespace {

constexpr const char* kModule = "cli";
using json = nlohmann::json;

[[noreturn]] void bad(const std::string& msg) { throw Error(Errc::ConfigError, kModule, msg); }

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) bad(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; })) {
      bad("unknown key '" + it.key() + "' in " + where);
    }
  }
}

template <class V>
void read_opt(const json& j, const char* key, V& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const json::exception&) {
    bad(where + "." + key + " has the wrong type");
  }
}

const char* schedule_name(LrSchedule s) { return s == LrSchedule::Cosine ? "cosine" : "constant"; }

}  // namespace

void RunConfig::validate() const {
  model.validate();
  train.validate();
  agreement.validate();
  bench.validate();
  if (data.count < 1 || data.train < 1 || data.val < 0 || data.train + data.val > data.count) {
    bad("data split must satisfy 1 <= train, 0 <= val, train + val <= count");
  }
  if (!(data.spacing_mm > 0.0)) bad("data.spacing_mm must be positive");
  const AugmentConfig& a = train.augment;
  if (a.rotation_deg < 0 || !(a.scale.lo > 0) || a.scale.hi < a.scale.lo || !(a.crop_fraction > 0) ||
      a.crop_fraction > 1 || a.brightness < 0 || a.mirror_probability < 0 || a.mirror_probability > 1 ||
      a.max_retries < 1) {
    bad("augment settings out of range");
  }
}

std::string run_config_to_json(const RunConfig& c) {
  const TrainConfig& t = c.train;
  const AugmentConfig& a = t.augment;
  json j{
      {"version", kRunConfigVersion},
      {"model", json::parse(model_config_to_json(c.model))},
      {"train",
       {{"epochs", t.epochs},
        {"batch_size", t.batch_size},
        {"learning_rate", t.adam.learning_rate},
        {"beta1", t.adam.beta1},
        {"beta2", t.adam.beta2},
        {"eps_hat", t.adam.eps_hat},
        {"schedule", schedule_name(t.schedule)},
        {"final_lr_fraction", t.final_lr_fraction}}},
      {"augment",
       {{"rotation_deg", a.rotation_deg},
        {"scale", {a.scale.lo, a.scale.hi}},
        {"crop_fraction", a.crop_fraction},
        {"brightness", a.brightness},
        {"mirror_probability", a.mirror_probability},
        {"max_retries", a.max_retries}}},
      {"agreement",
       {{"low_threshold", c.agreement.low_threshold},
        {"high_threshold", c.agreement.high_threshold},
        {"filter_threshold", c.agreement.filter_threshold},
        {"bin_width", c.agreement.bin_width}}},
      {"bench",
       {{"warmup_inputs", c.bench.warmup_inputs},
        {"test_runs", c.bench.test_runs},
        {"inputs_per_run", c.bench.inputs_per_run}}},
      {"data",
       {{"count", c.data.count}, {"train", c.data.train}, {"val", c.data.val}, {"spacing_mm", c.data.spacing_mm}}},
      {"seeds",
       {{"data", c.seeds.data}, {"init", c.seeds.init}, {"train", c.seeds.train}, {"bench", c.seeds.bench}}},
      {"paths", {{"data_dir", c.paths.data_dir}, {"out_dir", c.paths.out_dir}}},
  };
  return j.dump(2) + "\n";
}

RunConfig run_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    bad(std::string("run config is not JSON: ") + e.what());
  }
  check_keys(j, {"version", "model", "train", "augment", "agreement", "bench", "data", "seeds", "paths"}, "config");
  if (!j.contains("version")) bad("run config lacks 'version'");
  if (!j["version"].is_number_integer() || j["version"].get<int>() != kRunConfigVersion) {
    bad("unsupported run config version");
  }
  RunConfig c;
  if (j.contains("model")) c.model = model_config_from_json(j["model"].dump());
  if (j.contains("train")) {
    const json& t = j["train"];
    check_keys(t, {"epochs", "batch_size", "learning_rate", "beta1", "beta2", "eps_hat", "schedule", "final_lr_fraction"},
               "train");
    read_opt(t, "epochs", c.train.epochs, "train");
    read_opt(t, "batch_size", c.train.batch_size, "train");
    read_opt(t, "learning_rate", c.train.adam.learning_rate, "train");
    read_opt(t, "beta1", c.train.adam.beta1, "train");
    read_opt(t, "beta2", c.train.adam.beta2, "train");
    read_opt(t, "eps_hat", c.train.adam.eps_hat, "train");
    read_opt(t, "final_lr_fraction", c.train.final_lr_fraction, "train");
    if (t.contains("schedule")) {
      std::string s;
      read_opt(t, "schedule", s, "train");
      if (s == "cosine") {
        c.train.schedule = LrSchedule::Cosine;
      } else if (s == "constant") {
        c.train.schedule = LrSchedule::Constant;
      } else {
        bad("train.schedule must be 'cosine' or 'constant'");
      }
    }
  }
  if (j.contains("augment")) {
    const json& a = j["augment"];
    check_keys(a, {"rotation_deg", "scale", "crop_fraction", "brightness", "mirror_probability", "max_retries"},
               "augment");
    AugmentConfig& g = c.train.augment;
    read_opt(a, "rotation_deg", g.rotation_deg, "augment");
    if (a.contains("scale")) {
      std::vector<double> s;
      read_opt(a, "scale", s, "augment");
      if (s.size() != 2) bad("augment.scale must be [lo, hi]");
      g.scale = {s[0], s[1]};
    }
    read_opt(a, "crop_fraction", g.crop_fraction, "augment");
    read_opt(a, "brightness", g.brightness, "augment");
    read_opt(a, "mirror_probability", g.mirror_probability, "augment");
    read_opt(a, "max_retries", g.max_retries, "augment");
  }
  if (j.contains("agreement")) {
    const json& a = j["agreement"];
    check_keys(a, {"low_threshold", "high_threshold", "filter_threshold", "bin_width"}, "agreement");
    read_opt(a, "low_threshold", c.agreement.low_threshold, "agreement");
    read_opt(a, "high_threshold", c.agreement.high_threshold, "agreement");
    read_opt(a, "filter_threshold", c.agreement.filter_threshold, "agreement");
    read_opt(a, "bin_width", c.agreement.bin_width, "agreement");
  }
  if (j.contains("bench")) {
    const json& b = j["bench"];
    check_keys(b, {"warmup_inputs", "test_runs", "inputs_per_run"}, "bench");
    read_opt(b, "warmup_inputs", c.bench.warmup_inputs, "bench");
    read_opt(b, "test_runs", c.bench.test_runs, "bench");
    read_opt(b, "inputs_per_run", c.bench.inputs_per_run, "bench");
  }
  if (j.contains("data")) {
    const json& d = j["data"];
    check_keys(d, {"count", "train", "val", "spacing_mm"}, "data");
    read_opt(d, "count", c.data.count, "data");
    read_opt(d, "train", c.data.train, "data");
    read_opt(d, "val", c.data.val, "data");
    read_opt(d, "spacing_mm", c.data.spacing_mm, "data");
  }
  if (j.contains("seeds")) {
    const json& s = j["seeds"];
    check_keys(s, {"data", "init", "train", "bench"}, "seeds");
    read_opt(s, "data", c.seeds.data, "seeds");
    read_opt(s, "init", c.seeds.init, "seeds");
    read_opt(s, "train", c.seeds.train, "seeds");
    read_opt(s, "bench", c.seeds.bench, "seeds");
  }
  if (j.contains("paths")) {
    const json& p = j["paths"];
    check_keys(p, {"data_dir", "out_dir"}, "paths");
    read_opt(p, "data_dir", c.paths.data_dir, "paths");
    read_opt(p, "out_dir", c.paths.out_dir, "paths");
  }
  c.train.seed = c.seeds.train;
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) { return run_config_from_json(read_text(path)); }

void save_run_config(const std::string& path, const RunConfig& cfg) { write_text(path, run_config_to_json(cfg)); }

}  // namespace echogcn
