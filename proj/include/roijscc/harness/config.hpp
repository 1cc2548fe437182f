#pragma once

// RunConfig: everything needed to reproduce a training or evaluation run,
// read from a nested JSON file.

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "roijscc/data.hpp"
#include "roijscc/harness/system.hpp"
#include "roijscc/nn/optim.hpp"

namespace roijscc::harness {

using json = nlohmann::json;

struct TrainSchedule {
  long long steps = 2000;
  double epochs = 0;  // > 0 overrides steps: ceil(epochs * |train| / batch)
  int batch = 11;
  std::string lr_schedule = "constant";  // or "cosine" (decays to lr_floor * lr)
  double lr_floor = 0.05;
  int checkpoint_every = 500;
  int log_every = 50;
  bool mixed_snr = false;  // draw SNR uniformly from snr_range per sample
  double snr_min = 1.0;
  double snr_max = 10.0;
};

struct RunConfig {
  std::string variant = "roi-jscc";
  SystemConfig system{};
  double snr_db = 10.0;
  std::string cpp;  // "1/12" style; when set it determines system.k
  data::DatasetSpec train_data{};
  data::DatasetSpec eval_data{};
  std::string optimizer = "adam";
  nn::AdamConfig adam{};
  TrainSchedule schedule{};
  std::uint64_t seed = 0;
  std::string output_dir = "runs/default";

  // Train-steps implied by the schedule for a dataset of n images.
  long long total_steps(std::size_t n) const {
    if (schedule.epochs > 0) {
      return static_cast<long long>(std::ceil(schedule.epochs * static_cast<double>(n) / schedule.batch));
    }
    return schedule.steps;
  }
};

// "1/12", "0.0833" -> value
inline double parse_ratio(const std::string& s) {
  const auto slash = s.find('/');
  try {
    std::size_t used = 0;
    if (slash == std::string::npos) {
      const double v = std::stod(s, &used);
      if (used != s.size()) throw ConfigError("bad ratio '" + s + "'");
      return v;
    }
    const double num = std::stod(s.substr(0, slash), &used);
    if (used != slash) throw ConfigError("bad ratio '" + s + "'");
    const std::string den_s = s.substr(slash + 1);
    const double den = std::stod(den_s, &used);
    if (used != den_s.size() || den == 0) throw ConfigError("bad ratio '" + s + "'");
    return num / den;
  } catch (const std::logic_error&) {
    throw ConfigError("bad ratio '" + s + "'");
  }
}

namespace detail {

inline void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw ConfigError("unknown config key '" + where + "." + k + "'");
  }
}

template <class V>
void read(const json& j, const char* key, V& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

inline data::DatasetSpec read_dataset(const json& j, data::DatasetSpec d, const std::string& where) {
  check_keys(j, where, {"root", "split", "crop", "crop_size", "multiple", "seed", "toy", "count", "size"});
  read(j, "root", d.root);
  read(j, "split", d.split);
  if (j.contains("crop")) d.crop = data::parse_crop_mode(j.at("crop").get<std::string>());
  read(j, "crop_size", d.crop_size);
  read(j, "multiple", d.multiple);
  read(j, "seed", d.seed);
  read(j, "toy", d.toy);
  read(j, "count", d.toy_count);
  read(j, "size", d.toy_size);
  return d;
}

inline json dataset_json(const data::DatasetSpec& d) {
  const char* crop = d.crop == data::CropMode::Random ? "random"
                     : d.crop == data::CropMode::CenterMultiple ? "center-multiple"
                                                               : "fixed";
  return {{"root", d.root}, {"split", d.split},  {"crop", crop},         {"crop_size", d.crop_size},
          {"multiple", d.multiple}, {"seed", d.seed}, {"toy", d.toy}, {"count", d.toy_count}, {"size", d.toy_size}};
}

}  // namespace detail

// Cross-field checks; throws ConfigError.
inline void validate(RunConfig& c) {
  c.system.variant = parse_variant(c.variant);
  c.system.stages.validate();
  c.system.grid.validate();
  c.system.weights.validate();
  if (!c.cpp.empty()) {
    c.system.k = bandwidth_for_cpp(parse_ratio(c.cpp), c.system.image_h, c.system.image_w);
  }
  const model::Geometry geo =
      model::make_geometry(c.system.image_h, c.system.image_w, c.system.stages, c.system.grid);
  average_dims(c.system.k, geo.feature_rows(), c.system.stages.symbol_width);
  if (!(c.system.tau > 0 && c.system.tau < 1)) throw ConfigError("tau must lie in (0, 1)");
  if (c.optimizer != "adam") throw ConfigError("unsupported optimizer '" + c.optimizer + "'");
  if (!(c.adam.learning_rate > 0)) throw ConfigError("learning rate must be positive");
  if (c.schedule.batch < 1) throw ConfigError("batch must be >= 1");
  if (c.schedule.lr_schedule != "constant" && c.schedule.lr_schedule != "cosine") {
    throw ConfigError("unknown lr_schedule '" + c.schedule.lr_schedule + "'");
  }
  if (!(c.schedule.lr_floor >= 0 && c.schedule.lr_floor <= 1)) throw ConfigError("lr_floor must lie in [0, 1]");
  if (c.schedule.steps < 0 || c.schedule.epochs < 0) throw ConfigError("steps/epochs must be non-negative");
  if (c.schedule.checkpoint_every < 0 || c.schedule.log_every < 1) throw ConfigError("bad checkpoint/log interval");
  if (!(c.system.power > 0)) throw ConfigError("power must be positive");
  if (c.train_data.toy && c.train_data.toy_size != c.system.image_h) {
    throw ConfigError("toy image size differs from model image size");
  }
}

inline RunConfig config_from_json(const json& j) {
  using detail::read;
  detail::check_keys(j, "config", {"variant", "seed", "output_dir", "model", "grid", "image", "bandwidth", "loss",
                                   "channel", "dataset", "eval_dataset", "optimizer", "train"});
  RunConfig c;
  read(j, "variant", c.variant);
  read(j, "seed", c.seed);
  read(j, "output_dir", c.output_dir);
  if (j.contains("model")) {
    const json& m = j.at("model");
    detail::check_keys(m, "model", {"channels", "blocks", "symbol_width", "heads", "window", "gate_kernel",
                                    "routing_threshold", "preset"});
    if (m.contains("preset")) {
      const std::string p = m.at("preset").get<std::string>();
      if (p == "full") c.system.stages = model::StageConfig::full_scale();
      else if (p != "desk") throw ConfigError("unknown model preset '" + p + "'");
    }
    auto& s = c.system.stages;
    read(m, "channels", s.channels);
    read(m, "blocks", s.blocks);
    read(m, "symbol_width", s.symbol_width);
    read(m, "heads", s.heads);
    read(m, "window", s.window);
    read(m, "gate_kernel", s.gate_kernel);
    read(m, "routing_threshold", s.routing_threshold);
  }
  if (j.contains("grid")) {
    detail::check_keys(j.at("grid"), "grid", {"n_h", "n_w"});
    read(j.at("grid"), "n_h", c.system.grid.n_h);
    read(j.at("grid"), "n_w", c.system.grid.n_w);
  }
  if (j.contains("image")) {
    detail::check_keys(j.at("image"), "image", {"height", "width"});
    read(j.at("image"), "height", c.system.image_h);
    read(j.at("image"), "width", c.system.image_w);
  }
  if (j.contains("bandwidth")) {
    const json& b = j.at("bandwidth");
    detail::check_keys(b, "bandwidth", {"k", "cpp", "tau"});
    read(b, "k", c.system.k);
    read(b, "cpp", c.cpp);
    read(b, "tau", c.system.tau);
    if (b.contains("k") && b.contains("cpp")) throw ConfigError("give bandwidth.k or bandwidth.cpp, not both");
  }
  if (j.contains("loss")) {
    detail::check_keys(j.at("loss"), "loss", {"alpha", "beta"});
    read(j.at("loss"), "alpha", c.system.weights.alpha);
    read(j.at("loss"), "beta", c.system.weights.beta);
  }
  if (j.contains("channel")) {
    detail::check_keys(j.at("channel"), "channel", {"snr_db", "power"});
    read(j.at("channel"), "snr_db", c.snr_db);
    read(j.at("channel"), "power", c.system.power);
  }
  // Default: the procedural corpus at the model resolution.
  c.train_data.toy = true;
  c.train_data.toy_size = c.system.image_h;
  c.train_data.crop = data::CropMode::Fixed;
  c.train_data.seed = c.seed;
  if (j.contains("dataset")) c.train_data = detail::read_dataset(j.at("dataset"), c.train_data, "dataset");
  c.eval_data = c.train_data;
  c.eval_data.split = "test";
  c.eval_data.crop = data::CropMode::Fixed;
  c.eval_data.toy_count = 24;
  if (j.contains("eval_dataset")) c.eval_data = detail::read_dataset(j.at("eval_dataset"), c.eval_data, "eval_dataset");
  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    detail::check_keys(o, "optimizer", {"name", "learning_rate", "beta1", "beta2", "epsilon", "clip_norm"});
    read(o, "name", c.optimizer);
    read(o, "learning_rate", c.adam.learning_rate);
    read(o, "beta1", c.adam.beta1);
    read(o, "beta2", c.adam.beta2);
    read(o, "epsilon", c.adam.epsilon);
    read(o, "clip_norm", c.adam.clip_norm);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    detail::check_keys(t, "train", {"steps", "epochs", "batch", "lr_schedule", "lr_floor", "checkpoint_every",
                                    "log_every", "mixed_snr", "snr_min", "snr_max"});
    read(t, "steps", c.schedule.steps);
    read(t, "epochs", c.schedule.epochs);
    read(t, "batch", c.schedule.batch);
    read(t, "lr_schedule", c.schedule.lr_schedule);
    read(t, "lr_floor", c.schedule.lr_floor);
    read(t, "checkpoint_every", c.schedule.checkpoint_every);
    read(t, "log_every", c.schedule.log_every);
    read(t, "mixed_snr", c.schedule.mixed_snr);
    read(t, "snr_min", c.schedule.snr_min);
    read(t, "snr_max", c.schedule.snr_max);
  }
  validate(c);
  return c;
}

inline json config_to_json(const RunConfig& c) {
  const auto& s = c.system.stages;
  json j;
  j["variant"] = c.variant;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["model"] = {{"channels", s.channels},   {"blocks", s.blocks}, {"symbol_width", s.symbol_width},
                {"heads", s.heads},         {"window", s.window}, {"gate_kernel", s.gate_kernel},
                {"routing_threshold", s.routing_threshold}};
  j["grid"] = {{"n_h", c.system.grid.n_h}, {"n_w", c.system.grid.n_w}};
  j["image"] = {{"height", c.system.image_h}, {"width", c.system.image_w}};
  j["bandwidth"] = {{"k", c.system.k}, {"tau", c.system.tau}};
  j["loss"] = {{"alpha", c.system.weights.alpha}, {"beta", c.system.weights.beta}};
  j["channel"] = {{"snr_db", c.snr_db}, {"power", c.system.power}};
  j["dataset"] = detail::dataset_json(c.train_data);
  j["eval_dataset"] = detail::dataset_json(c.eval_data);
  j["optimizer"] = {{"name", c.optimizer},
                    {"learning_rate", c.adam.learning_rate},
                    {"beta1", c.adam.beta1},
                    {"beta2", c.adam.beta2},
                    {"epsilon", c.adam.epsilon},
                    {"clip_norm", c.adam.clip_norm}};
  j["train"] = {{"steps", c.schedule.steps},
                {"epochs", c.schedule.epochs},
                {"batch", c.schedule.batch},
                {"lr_schedule", c.schedule.lr_schedule},
                {"lr_floor", c.schedule.lr_floor},
                {"checkpoint_every", c.schedule.checkpoint_every},
                {"log_every", c.schedule.log_every},
                {"mixed_snr", c.schedule.mixed_snr},
                {"snr_min", c.schedule.snr_min},
                {"snr_max", c.schedule.snr_max}};
  return j;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

}  // namespace roijscc::harness
