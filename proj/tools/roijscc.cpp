// roijscc: train / evaluate / ablate / render / flops

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "roijscc/harness/ablate.hpp"
#include "roijscc/harness/evaluate.hpp"
#include "roijscc/harness/flops.hpp"
#include "roijscc/harness/train.hpp"

using namespace roijscc;
using namespace roijscc::harness;

namespace {

std::string default_cpp(const SystemConfig& s) {
  return std::to_string(s.k) + "/" + std::to_string(3 * s.image_h * s.image_w);
}

RoiPosition parse_gamma(const std::string& text) {
  const auto parts = split_list(text);
  if (parts.size() != 2) throw ConfigError("gamma must be given as h,w");
  try {
    return {std::stoi(parts[0]), std::stoi(parts[1])};
  } catch (const std::logic_error&) {
    throw ConfigError("gamma must be two integers, got '" + text + "'");
  }
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  for (const auto& s : split_list(text)) {
    try {
      out.push_back(std::stoull(s));
    } catch (const std::logic_error&) {
      throw ConfigError("bad seed '" + s + "'");
    }
  }
  return out;
}

int cmd_train(const std::string& config_path, const std::string& resume, long long steps) {
  RunConfig cfg = load_config(config_path);
  if (steps >= 0) {
    cfg.schedule.steps = steps;
    cfg.schedule.epochs = 0;
  }
  Trainer trainer(cfg);
  if (!resume.empty()) trainer.resume(resume);
  std::cout << "variant " << cfg.variant << ", " << nn::parameter_count(trainer.system().params())
            << " parameters, k=" << cfg.system.k << ", " << trainer.total_steps() << " steps\n";
  trainer.run(-1, &std::cout);
  std::cout << "checkpoint " << trainer.last_checkpoint_path() << "\n";
  return 0;
}

int cmd_evaluate(const std::string& ckpt, const std::string& snrs, const std::string& cpps, const std::string& out,
                 std::uint64_t seed, int draws, const std::string& root, const std::string& split,
                 const std::string& label) {
  RunConfig cfg;
  auto sys = load_system(ckpt, &cfg);
  data::DatasetSpec spec = cfg.eval_data;
  if (!root.empty()) {
    spec.toy = false;
    spec.root = root;
    spec.crop = data::CropMode::Fixed;
  }
  if (!split.empty()) spec.split = split;
  const data::Dataset data(spec);
  EvalOptions opt;
  opt.snrs = snrs.empty() ? std::vector<double>{cfg.snr_db} : parse_snr_list(snrs);
  opt.cpps = cpps.empty() ? std::vector<std::string>{default_cpp(cfg.system)} : split_list(cpps);
  opt.seed = seed;
  opt.gamma_draws = draws;
  ResultsTable table;
  table.rows = evaluate_system(*sys, label.empty() ? cfg.variant : label, data, opt);
  write_results(table, out);
  for (const auto& c : table.summary()) {
    std::cout << c.variant << " snr " << format_number(c.snr_db) << " cpp " << format_number(c.cpp) << " (k=" << c.k
              << "): PSNR_ROI " << format_number(c.psnr_roi) << " PSNR_Avg " << format_number(c.psnr_avg) << " over "
              << c.samples << " samples\n";
  }
  std::cout << "wrote " << table.rows.size() << " rows to " << out << "\n";
  return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& variants, const std::string& seeds,
               const std::string& snrs, const std::string& cpps, const std::string& out) {
  RunConfig cfg = load_config(config_path);
  if (!out.empty()) cfg.output_dir = out;
  AblationOptions opt;
  opt.variants = split_list(variants);
  opt.seeds = seeds.empty() ? std::vector<std::uint64_t>{cfg.seed} : parse_seeds(seeds);
  opt.eval.snrs = snrs.empty() ? std::vector<double>{cfg.snr_db} : parse_snr_list(snrs);
  opt.eval.cpps = cpps.empty() ? std::vector<std::string>{default_cpp(cfg.system)} : split_list(cpps);
  opt.eval.seed = cfg.seed;
  const AblationReport report = ablate(cfg, opt, &std::cout);
  std::cout << "variant,runs,psnr_roi,psnr_avg,roi_vs_full,roi_vs_baseline\n";
  for (const auto& s : report.summary()) {
    std::cout << s.variant << ',' << s.runs << ',' << format_number(s.psnr_roi) << ',' << format_number(s.psnr_avg)
              << ',' << format_number(s.roi_vs_full) << ',' << format_number(s.roi_vs_baseline) << '\n';
  }
  std::cout << "wrote " << cfg.output_dir << "/ablation.csv\n";
  return 0;
}

int cmd_render(const std::vector<std::string>& ckpts, const std::string& image_path, const std::string& gamma_text,
               const std::string& snr_text, std::uint64_t seed, const std::string& out) {
  const RoiPosition gamma = parse_gamma(gamma_text);
  data::Image img = data::load_image(image_path);
  std::vector<data::PanelEntry> entries;
  GridSpec grid;
  for (const auto& ck : ckpts) {
    RunConfig cfg;
    auto sys = load_system(ck, &cfg);
    grid = cfg.system.grid;
    check_in_grid(gamma, grid);
    if (img.h != cfg.system.image_h || img.w != cfg.system.image_w) {
      if (img.h < cfg.system.image_h || img.w < cfg.system.image_w) {
        throw ConfigError("image smaller than the model input " + std::to_string(cfg.system.image_h) + "x" +
                          std::to_string(cfg.system.image_w));
      }
      img = data::crop(img, (img.h - cfg.system.image_h) / 2, (img.w - cfg.system.image_w) / 2, cfg.system.image_h,
                       cfg.system.image_w);
    }
    const double snr = snr_text.empty() ? cfg.snr_db : parse_snr_list(snr_text).at(0);
    nn::Rng noise = data::derive_rng({seed, kKeyEvalNoise, 0, 0});
    const auto res = sys->run(img, gamma, snr, noise);
    entries.push_back({cfg.variant, clamp_unit(res.reconstruction)});
  }
  const data::PanelLayout lay = data::render_panel(out, img, entries, gamma, grid);
  std::cout << "wrote " << out << " (" << lay.width << "x" << lay.height << ")\n";
  return 0;
}

int cmd_flops(const std::string& config_path) {
  RunConfig cfg = load_config(config_path);
  SystemConfig all_heavy = cfg.system;
  all_heavy.variant.split_processing = false;
  std::cout << "h,w,macs_routed,macs_all_heavy,ratio\n";
  for (int h = 1; h <= cfg.system.grid.n_h; ++h) {
    for (int w = 1; w <= cfg.system.grid.n_w; ++w) {
      const long long a = codec_macs(cfg.system, {h, w});
      const long long b = codec_macs(all_heavy, {h, w});
      std::cout << h << ',' << w << ',' << a << ',' << b << ',' << format_number(static_cast<double>(a) / b) << '\n';
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ROI-guided joint source-channel coding: training, evaluation and ablation"};
  app.require_subcommand(1);

  std::string config, resume, checkpoint, snrs, cpps, out, root, split, label, variants, seeds, image, gamma;
  std::vector<std::string> checkpoints;
  long long steps = -1;
  std::uint64_t seed = 0;
  int draws = 1;

  auto* train = app.add_subcommand("train", "train a model from a JSON config");
  train->add_option("--config", config, "run config")->required();
  train->add_option("--resume", resume, "checkpoint to resume from");
  train->add_option("--steps", steps, "override the number of steps");

  auto* eval = app.add_subcommand("evaluate", "evaluate a checkpoint over SNR and CPP cells");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--snr", snrs, "comma-separated SNRs in dB ('inf' = noiseless)");
  eval->add_option("--cpp", cpps, "comma-separated channel uses per pixel, e.g. 1/12,1/24");
  eval->add_option("--out", out, "output directory")->required();
  eval->add_option("--seed", seed, "seed for ROI and noise draws");
  eval->add_option("--gamma-draws", draws, "ROI draws per image");
  eval->add_option("--root", root, "image dataset root (default: the checkpoint's evaluation set)");
  eval->add_option("--split", split, "dataset split");
  eval->add_option("--label", label, "variant label in the results");

  auto* abl = app.add_subcommand("ablate", "train and compare model variants");
  abl->add_option("--config", config, "base run config")->required();
  abl->add_option("--variants", variants, "comma-separated variants (roi-jscc, uniform-baseline, conv-baseline, "
                                          "wo-rb, w-rl, w-rb, w-rlb, flags:a+b)")
      ->required();
  abl->add_option("--seeds", seeds, "comma-separated training seeds");
  abl->add_option("--snr", snrs, "evaluation SNRs");
  abl->add_option("--cpp", cpps, "evaluation CPPs");
  abl->add_option("--out", out, "output directory (default: config output_dir)");

  auto* render = app.add_subcommand("render", "write a side-by-side reconstruction panel");
  render->add_option("--checkpoint", checkpoints, "checkpoint file (repeat for several variants)")->required();
  render->add_option("--image", image, "input image")->required();
  render->add_option("--gamma", gamma, "ROI position h,w (1-based)")->required();
  render->add_option("--snr", snrs, "channel SNR in dB (default: the training SNR)");
  render->add_option("--seed", seed, "noise seed");
  render->add_option("--out", out, "output PNG")->default_val("panel.png");

  auto* flops = app.add_subcommand("flops", "multiply-accumulate counts per ROI position");
  flops->add_option("--config", config, "run config")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(config, resume, steps);
    if (*eval) return cmd_evaluate(checkpoint, snrs, cpps, out, seed, draws, root, split, label);
    if (*abl) return cmd_ablate(config, variants, seeds, snrs, cpps, out);
    if (*render) return cmd_render(checkpoints, image, gamma, snrs, seed, out);
    if (*flops) return cmd_flops(config);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "domain error: " << e.what() << "\n";
    return 3;
  } catch (const ProtocolError& e) {
    std::cerr << "protocol error: " << e.what() << "\n";
    return 4;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return 5;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 6;
  } catch (const InternalError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 70;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
