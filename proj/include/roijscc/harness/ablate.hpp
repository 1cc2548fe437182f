#pragma once

// Trains and evaluates several variants under identical seeds, images, ROI
// draws and noise, and reports PSNR deltas against the full model and the
// uniform baseline.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "roijscc/harness/evaluate.hpp"
#include "roijscc/harness/train.hpp"

namespace roijscc::harness {

struct AblationRun {
  std::string variant;
  std::uint64_t seed = 0;
  std::size_t params = 0;
  double psnr_roi = 0;
  double psnr_avg = 0;
};

struct VariantSummary {
  std::string variant;
  int runs = 0;
  double psnr_roi = 0;
  double psnr_avg = 0;
  double roi_vs_full = 0;
  double roi_vs_baseline = 0;
  double avg_vs_full = 0;
  double avg_vs_baseline = 0;
};

struct AblationReport {
  std::vector<AblationRun> runs;
  ResultsTable table;

  std::vector<VariantSummary> summary() const {
    std::vector<VariantSummary> out;
    std::map<std::string, std::size_t> index;
    for (const auto& r : runs) {
      auto it = index.find(r.variant);
      if (it == index.end()) {
        it = index.emplace(r.variant, out.size()).first;
        out.push_back({r.variant});
      }
      VariantSummary& s = out[it->second];
      ++s.runs;
      s.psnr_roi += r.psnr_roi;
      s.psnr_avg += r.psnr_avg;
    }
    for (auto& s : out) {
      s.psnr_roi /= s.runs;
      s.psnr_avg /= s.runs;
    }
    const VariantSummary* full = find(out, "roi-jscc");
    const VariantSummary* base = find(out, "uniform-baseline");
    for (auto& s : out) {
      if (full) {
        s.roi_vs_full = s.psnr_roi - full->psnr_roi;
        s.avg_vs_full = s.psnr_avg - full->psnr_avg;
      }
      if (base) {
        s.roi_vs_baseline = s.psnr_roi - base->psnr_roi;
        s.avg_vs_baseline = s.psnr_avg - base->psnr_avg;
      }
    }
    return out;
  }

  // Mean over runs of one variant; NaN when absent.
  double mean_roi(const std::string& v) const {
    for (const auto& s : summary()) {
      if (s.variant == v) return s.psnr_roi;
    }
    return std::numeric_limits<double>::quiet_NaN();
  }
  double mean_avg(const std::string& v) const {
    for (const auto& s : summary()) {
      if (s.variant == v) return s.psnr_avg;
    }
    return std::numeric_limits<double>::quiet_NaN();
  }

  void write(const std::string& dir) const {
    std::filesystem::create_directories(dir);
    const std::filesystem::path d(dir);
    {
      std::ofstream out(d / "ablation_runs.csv");
      if (!out) throw IoError("cannot write " + (d / "ablation_runs.csv").string());
      out << "variant,seed,params,psnr_roi,psnr_avg\n";
      for (const auto& r : runs) {
        out << r.variant << ',' << r.seed << ',' << r.params << ',' << format_number(r.psnr_roi) << ','
            << format_number(r.psnr_avg) << '\n';
      }
    }
    {
      std::ofstream out(d / "ablation.csv");
      if (!out) throw IoError("cannot write " + (d / "ablation.csv").string());
      out << "variant,runs,psnr_roi,psnr_avg,roi_vs_full,roi_vs_baseline,avg_vs_full,avg_vs_baseline\n";
      for (const auto& s : summary()) {
        out << s.variant << ',' << s.runs << ',' << format_number(s.psnr_roi) << ',' << format_number(s.psnr_avg)
            << ',' << format_number(s.roi_vs_full) << ',' << format_number(s.roi_vs_baseline) << ','
            << format_number(s.avg_vs_full) << ',' << format_number(s.avg_vs_baseline) << '\n';
      }
    }
    table.write_rows((d / "results.csv").string());
    table.write_summary((d / "summary.csv").string());
  }

 private:
  static const VariantSummary* find(const std::vector<VariantSummary>& v, const std::string& name) {
    for (const auto& s : v) {
      if (s.variant == name) return &s;
    }
    return nullptr;
  }
};

struct AblationOptions {
  std::vector<std::string> variants;
  std::vector<std::uint64_t> seeds{0};
  EvalOptions eval{};
  bool include_references = true;  // add roi-jscc and uniform-baseline
  bool write_files = true;
};

inline AblationReport ablate(const RunConfig& base, AblationOptions opt, std::ostream* progress = nullptr) {
  std::vector<std::string> variants = opt.variants;
  if (opt.include_references) {
    for (const char* ref : {"uniform-baseline", "roi-jscc"}) {
      if (std::find(variants.begin(), variants.end(), ref) == variants.end()) variants.insert(variants.begin(), ref);
    }
  }
  for (const auto& v : variants) parse_variant(v);  // fail before any training
  if (opt.seeds.empty()) throw ConfigError("ablation needs at least one seed");

  AblationReport report;
  data::Dataset eval_data(base.eval_data);
  for (const auto& v : variants) {
    for (std::uint64_t seed : opt.seeds) {
      RunConfig cfg = base;
      cfg.variant = v;
      cfg.seed = seed;
      cfg.train_data.seed = seed;
      cfg.output_dir = (std::filesystem::path(base.output_dir) / v / ("seed_" + std::to_string(seed))).string();
      validate(cfg);
      Trainer trainer(cfg);
      if (progress) *progress << "training " << v << " seed " << seed << " (" << trainer.total_steps() << " steps)\n";
      trainer.run(-1, nullptr, opt.write_files);
      const auto rows = evaluate_system(trainer.system(), v, eval_data, opt.eval);
      AblationRun run{v, seed, nn::parameter_count(trainer.system().params()), 0, 0};
      for (const auto& r : rows) {
        run.psnr_roi += r.report.psnr_roi;
        run.psnr_avg += r.report.psnr_avg;
      }
      if (!rows.empty()) {
        run.psnr_roi /= static_cast<double>(rows.size());
        run.psnr_avg /= static_cast<double>(rows.size());
      }
      if (progress) {
        *progress << "  " << v << " seed " << seed << ": PSNR_ROI " << run.psnr_roi << " dB, PSNR_Avg "
                  << run.psnr_avg << " dB\n";
      }
      report.runs.push_back(run);
      report.table.rows.insert(report.table.rows.end(), rows.begin(), rows.end());
    }
  }
  if (opt.write_files) report.write(base.output_dir);
  return report;
}

}  // namespace roijscc::harness
