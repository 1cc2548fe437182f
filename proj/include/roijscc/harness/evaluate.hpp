#pragma once

// Paired evaluation over (SNR, CPP) cells. The ROI position and the noise
// realization of image i, draw d depend only on (seed, i, d), so every model
// evaluated with the same seed sees the same draws.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "roijscc/harness/config.hpp"
#include "roijscc/harness/plot.hpp"

namespace roijscc::harness {

inline constexpr std::uint64_t kKeyEvalGamma = 0x6567616dULL;
inline constexpr std::uint64_t kKeyEvalNoise = 0x656e6f69ULL;
inline constexpr std::uint64_t kKeyEvalCrop = 0x65637270ULL;

struct EvalOptions {
  std::vector<double> snrs{10.0};
  std::vector<std::string> cpps{"1/12"};
  std::uint64_t seed = 0;
  int gamma_draws = 1;
};

struct EvalRow {
  std::string variant;
  int k = 0;
  RegionReport report;
};

struct CellSummary {
  std::string variant;
  double snr_db = 0;
  double cpp = 0;
  int k = 0;
  int samples = 0;
  double psnr_roi = 0;  // mean over images and draws
  double psnr_avg = 0;
};

struct ResultsTable {
  std::vector<EvalRow> rows;

  // One entry per (variant, SNR, CPP) in first-seen order.
  std::vector<CellSummary> summary() const {
    std::vector<CellSummary> out;
    std::map<std::tuple<std::string, double, int>, std::size_t> index;
    for (const auto& r : rows) {
      const auto key = std::make_tuple(r.variant, r.report.snr_db, r.k);
      auto it = index.find(key);
      if (it == index.end()) {
        it = index.emplace(key, out.size()).first;
        out.push_back({r.variant, r.report.snr_db, r.report.cpp, r.k, 0, 0, 0});
      }
      CellSummary& c = out[it->second];
      ++c.samples;
      c.psnr_roi += r.report.psnr_roi;
      c.psnr_avg += r.report.psnr_avg;
    }
    for (auto& c : out) {
      c.psnr_roi /= c.samples;
      c.psnr_avg /= c.samples;
    }
    return out;
  }

  void write_rows(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    write_report_header(out);
    for (const auto& r : rows) write_report_row(out, r.report);
  }

  void write_summary(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "variant,snr_db,cpp,k,samples,psnr_roi,psnr_avg\n";
    for (const auto& c : summary()) {
      out << c.variant << ',' << format_number(c.snr_db) << ',' << format_number(c.cpp) << ',' << c.k << ','
          << c.samples << ',' << format_number(c.psnr_roi) << ',' << format_number(c.psnr_avg) << '\n';
    }
  }

  // PSNR vs SNR, one solid (ROI) and one dotted (Avg) line per (variant, CPP).
  void write_plot(const std::string& path) const {
    std::map<std::pair<std::string, int>, std::pair<Series, Series>> lines;
    int colour = 0;
    for (const auto& c : summary()) {
      const auto key = std::make_pair(c.variant, c.k);
      auto it = lines.find(key);
      if (it == lines.end()) {
        char label[96];
        std::snprintf(label, sizeof label, "%s k=%d", c.variant.c_str(), c.k);
        Series roi{std::string(label) + " ROI", {}, {}, false, colour};
        Series avg{std::string(label) + " Avg", {}, {}, true, colour};
        ++colour;
        it = lines.emplace(key, std::make_pair(roi, avg)).first;
      }
      if (!std::isfinite(c.snr_db)) continue;
      it->second.first.x.push_back(c.snr_db);
      it->second.first.y.push_back(c.psnr_roi);
      it->second.second.x.push_back(c.snr_db);
      it->second.second.y.push_back(c.psnr_avg);
    }
    std::vector<Series> all;
    for (auto& [k, v] : lines) {
      all.push_back(v.first);
      all.push_back(v.second);
    }
    plot_lines(path, "PSNR vs SNR (solid: ROI, dotted: Avg)", "SNR [dB]", "PSNR [dB]", all);
  }
};

// Evaluates one model on every (CPP, SNR) cell. Cells whose CPP does not
// give a valid budget for this model are skipped with a warning.
template <class T>
std::vector<EvalRow> evaluate_system(JsccSystem<T>& sys, const std::string& variant, const data::Dataset& data,
                                     const EvalOptions& opt, std::ostream& warn = std::cerr) {
  if (opt.gamma_draws < 1) throw ConfigError("gamma draws must be >= 1");
  const SystemConfig cfg = sys.config();
  std::vector<Tensor<T>> images;
  for (std::size_t i = 0; i < data.size(); ++i) {
    nn::Rng crop = data::derive_rng({opt.seed, kKeyEvalCrop, i});
    const data::Image img = data.get(i, crop);
    if (img.m.size() == 0) {
      images.emplace_back();
      continue;
    }
    if (img.h != cfg.image_h || img.w != cfg.image_w) {
      throw ConfigError("evaluation image " + data.id(i) + " is " + std::to_string(img.h) + "x" +
                        std::to_string(img.w) + " but the model expects " + std::to_string(cfg.image_h) + "x" +
                        std::to_string(cfg.image_w));
    }
    images.emplace_back(img.h, img.w, img.m.template cast<T>().eval());
  }

  std::vector<EvalRow> rows;
  const int k0 = cfg.k;
  for (const auto& cpp_text : opt.cpps) {
    int k = 0;
    try {
      k = bandwidth_for_cpp(parse_ratio(cpp_text), cfg.image_h, cfg.image_w);
      sys.set_bandwidth(k);
    } catch (const ConfigError& e) {
      warn << "warning: skipping CPP " << cpp_text << ": " << e.what() << "\n";
      continue;
    }
    const double cpp_value = cpp(k, cfg.image_h, cfg.image_w);
    for (double snr : opt.snrs) {
      for (std::size_t i = 0; i < images.size(); ++i) {
        if (images[i].m.size() == 0) continue;
        for (int d = 0; d < opt.gamma_draws; ++d) {
          const auto di = static_cast<std::uint64_t>(d);
          nn::Rng grng = data::derive_rng({opt.seed, kKeyEvalGamma, i, di});
          const RoiPosition gamma = data::sample_gamma(data::GammaMode::Test, cfg.grid, grng);
          nn::Rng noise = data::derive_rng({opt.seed, kKeyEvalNoise, i, di});
          const auto res = sys.run(images[i], gamma, snr, noise);
          ROIJSCC_ASSERT(res.symbols <= k, "transmission exceeds the cell budget");
          const RegionPsnr q = region_psnr(images[i], res.reconstruction, classify_regions(gamma, cfg.grid));
          std::string id = data.id(i);
          if (opt.gamma_draws > 1) id += "#" + std::to_string(d);
          rows.push_back({variant, k, {id, gamma, snr, cpp_value, q.roi, q.avg}});
        }
      }
    }
  }
  sys.set_bandwidth(k0);
  return rows;
}

// "1,4,7,10" / "inf" -> values
inline std::vector<double> parse_snr_list(const std::string& s) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t next = s.find(',', pos);
    const std::string tok = s.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
    if (tok == "inf" || tok == "noiseless") {
      out.push_back(std::numeric_limits<double>::infinity());
    } else {
      try {
        std::size_t used = 0;
        out.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw ConfigError("bad SNR '" + tok + "'");
      } catch (const std::logic_error&) {
        throw ConfigError("bad SNR '" + tok + "'");
      }
    }
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return out;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t next = s.find(',', pos);
    std::string tok = s.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
    if (tok.empty()) throw ConfigError("empty entry in list '" + s + "'");
    out.push_back(std::move(tok));
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return out;
}

inline void write_results(const ResultsTable& table, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path d(dir);
  table.write_rows((d / "results.csv").string());
  table.write_summary((d / "summary.csv").string());
  table.write_plot((d / "psnr_vs_snr.png").string());
}

}  // namespace roijscc::harness
