#pragma once

// Image ingestion (directory datasets and a procedural toy corpus), crops,
// ROI position sampling, and comparison panels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "roijscc/geometry.hpp"
#include "roijscc/metrics.hpp"
#include "roijscc/nn/tensor.hpp"

namespace roijscc::data {

using Image = nn::Tensor<float>;
using Rng = std::mt19937_64;

// Independent stream for a tuple of integers (run seed, step, sample, ...).
inline Rng derive_rng(std::initializer_list<std::uint64_t> keys) {
  std::vector<std::uint32_t> words;
  for (std::uint64_t k : keys) {
    words.push_back(static_cast<std::uint32_t>(k));
    words.push_back(static_cast<std::uint32_t>(k >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

inline Image from_cv(const cv::Mat& bgr8) {
  cv::Mat rgb;
  cv::cvtColor(bgr8, rgb, cv::COLOR_BGR2RGB);
  Image out(rgb.rows, rgb.cols, 3);
  for (int y = 0; y < rgb.rows; ++y) {
    const auto* row = rgb.ptr<cv::Vec3b>(y);
    for (int x = 0; x < rgb.cols; ++x) {
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = static_cast<float>(row[x][c]) / 255.0f;
    }
  }
  return out;
}

template <class T>
cv::Mat to_cv(const nn::Tensor<T>& img) {
  cv::Mat bgr(img.h, img.w, CV_8UC3);
  for (int y = 0; y < img.h; ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.w; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(static_cast<double>(img.at(y, x, c)), 0.0, 1.0);
        row[x][2 - c] = static_cast<unsigned char>(std::lround(v * 255.0));
      }
    }
  }
  return bgr;
}

inline Image load_image(const std::string& path) {
  const cv::Mat m = cv::imread(path, cv::IMREAD_COLOR);
  if (m.empty()) throw IoError("cannot decode image " + path);
  return from_cv(m);
}

template <class T>
void save_png(const std::string& path, const nn::Tensor<T>& img) {
  if (!cv::imwrite(path, to_cv(img))) throw IoError("cannot write " + path);
}

inline Image crop(const Image& img, int y0, int x0, int h, int w) {
  if (y0 < 0 || x0 < 0 || y0 + h > img.h || x0 + w > img.w) throw DomainError("crop window outside image");
  Image out(h, w, img.channels());
  for (int y = 0; y < h; ++y) {
    out.m.middleRows(static_cast<Eigen::Index>(y) * w, w) =
        img.m.middleRows(static_cast<Eigen::Index>(y0 + y) * img.w + x0, w);
  }
  return out;
}

// Each side cut down to the largest multiple, centered.
inline Image center_crop_multiple(const Image& img, int multiple) {
  const int h = img.h / multiple * multiple;
  const int w = img.w / multiple * multiple;
  if (h == 0 || w == 0) throw DomainError("image smaller than crop multiple");
  return crop(img, (img.h - h) / 2, (img.w - w) / 2, h, w);
}

inline Image random_crop(const Image& img, int size, Rng& rng) {
  if (img.h < size || img.w < size) throw DomainError("image smaller than random crop size");
  std::uniform_int_distribution<int> dy(0, img.h - size);
  std::uniform_int_distribution<int> dx(0, img.w - size);
  const int y0 = dy(rng);
  const int x0 = dx(rng);
  return crop(img, y0, x0, size, size);
}

// Procedural image: a colour gradient background with a few filled shapes,
// some carrying a sinusoidal texture.
inline Image make_toy_image(std::uint64_t seed, int size = 64) {
  Rng rng = derive_rng({0x746f79ULL, seed});
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto colour = [&] { return cv::Scalar(255 * u(rng), 255 * u(rng), 255 * u(rng)); };

  cv::Mat img(size, size, CV_8UC3);
  const cv::Scalar c0 = colour();
  const cv::Scalar c1 = colour();
  const double angle = 2 * M_PI * u(rng);
  const double ca = std::cos(angle);
  const double sa = std::sin(angle);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double t = std::clamp(0.5 + ((x - size / 2.0) * ca + (y - size / 2.0) * sa) / size, 0.0, 1.0);
      auto& px = img.at<cv::Vec3b>(y, x);
      for (int c = 0; c < 3; ++c) px[c] = cv::saturate_cast<unsigned char>((1 - t) * c0[c] + t * c1[c]);
    }
  }

  std::uniform_int_distribution<int> nshapes(3, 6);
  std::uniform_int_distribution<int> kind(0, 3);
  const int n = nshapes(rng);
  for (int s = 0; s < n; ++s) {
    const cv::Scalar col = colour();
    const cv::Point centre(static_cast<int>(u(rng) * size), static_cast<int>(u(rng) * size));
    const int radius = 4 + static_cast<int>(u(rng) * size / 4.0);
    switch (kind(rng)) {
      case 0:
        cv::circle(img, centre, radius, col, cv::FILLED, cv::LINE_AA);
        break;
      case 1:
        cv::rectangle(img, centre - cv::Point(radius, radius / 2), centre + cv::Point(radius, radius / 2), col,
                      cv::FILLED);
        break;
      case 2: {
        std::vector<cv::Point> tri{centre + cv::Point(0, -radius), centre + cv::Point(radius, radius),
                                   centre + cv::Point(-radius, radius)};
        cv::fillConvexPoly(img, tri, col, cv::LINE_AA);
        break;
      }
      default: {
        // Striped disc.
        const double freq = 0.3 + 0.6 * u(rng);
        const cv::Scalar col2 = colour();
        for (int y = std::max(0, centre.y - radius); y < std::min(size, centre.y + radius); ++y) {
          for (int x = std::max(0, centre.x - radius); x < std::min(size, centre.x + radius); ++x) {
            const int dx = x - centre.x;
            const int dy = y - centre.y;
            if (dx * dx + dy * dy > radius * radius) continue;
            const double t = 0.5 + 0.5 * std::sin(freq * (dx * ca - dy * sa));
            auto& px = img.at<cv::Vec3b>(y, x);
            for (int c = 0; c < 3; ++c) px[c] = cv::saturate_cast<unsigned char>(t * col[c] + (1 - t) * col2[c]);
          }
        }
      }
    }
  }
  return from_cv(img);
}

inline std::vector<Image> make_toy_corpus(std::size_t count, int size, std::uint64_t seed) {
  std::vector<Image> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(make_toy_image(seed * 1000003ULL + i, size));
  return out;
}

// FNV-1a over the float bytes; used to check corpus reproducibility.
inline std::uint64_t image_hash(const Image& img) {
  std::uint64_t h = 1469598103934665603ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(img.m.data());
  for (std::size_t i = 0; i < static_cast<std::size_t>(img.m.size()) * sizeof(float); ++i) {
    h = (h ^ bytes[i]) * 1099511628211ULL;
  }
  return h;
}

enum class CropMode { Random, CenterMultiple, Fixed };

inline CropMode parse_crop_mode(const std::string& s) {
  if (s == "random") return CropMode::Random;
  if (s == "center-multiple") return CropMode::CenterMultiple;
  if (s == "fixed") return CropMode::Fixed;
  throw ConfigError("unknown crop mode '" + s + "'");
}

struct DatasetSpec {
  std::string root;           // "<root>/<split>/*.png|jpg|jpeg|bmp"; unused for the toy corpus
  std::string split = "train";
  CropMode crop = CropMode::Random;
  int crop_size = 256;        // random crop side
  int multiple = 128;         // center-multiple crop
  std::uint64_t seed = 0;
  bool toy = false;
  int toy_count = 256;
  int toy_size = 64;
};

// In-memory (toy) or on-disk image collection.
class Dataset {
 public:
  explicit Dataset(DatasetSpec spec) : spec_(std::move(spec)) {
    if (spec_.toy) {
      // Train and evaluation splits draw from disjoint seed ranges.
      const std::uint64_t split_key = spec_.split == "train" ? 1 : spec_.split == "val" ? 2 : 3;
      images_ = make_toy_corpus(static_cast<std::size_t>(spec_.toy_count), spec_.toy_size,
                                spec_.seed * 16 + split_key);
      for (std::size_t i = 0; i < images_.size(); ++i) ids_.push_back("toy-" + spec_.split + "-" + std::to_string(i));
    } else {
      namespace fs = std::filesystem;
      const fs::path dir = fs::path(spec_.root) / spec_.split;
      if (!fs::is_directory(dir)) throw ConfigError("dataset directory not found: " + dir.string());
      for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        std::string ext = e.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp") files_.push_back(e.path().string());
      }
      std::sort(files_.begin(), files_.end());
      for (const auto& f : files_) ids_.push_back(std::filesystem::path(f).stem().string());
    }
    if (ids_.empty()) throw ConfigError("dataset is empty");
  }

  std::size_t size() const { return ids_.size(); }
  const std::string& id(std::size_t i) const { return ids_[i]; }
  const DatasetSpec& spec() const { return spec_; }

  // Cropped image i; nullopt-like empty tensor when the file cannot be read.
  Image get(std::size_t i, Rng& rng) const {
    Image img;
    if (spec_.toy) {
      img = images_[i];
    } else {
      try {
        img = load_image(files_[i]);
      } catch (const IoError& e) {
        std::cerr << "warning: skipping " << files_[i] << ": " << e.what() << "\n";
        return Image();
      }
    }
    switch (spec_.crop) {
      case CropMode::Random: return img.h == spec_.crop_size && img.w == spec_.crop_size ? img : random_crop(img, spec_.crop_size, rng);
      case CropMode::CenterMultiple: return center_crop_multiple(img, spec_.multiple);
      case CropMode::Fixed: return img;
    }
    return img;
  }

 private:
  DatasetSpec spec_;
  std::vector<std::string> files_;
  std::vector<std::string> ids_;
  std::vector<Image> images_;
};

struct Batch {
  std::vector<Image> images;
  std::vector<std::size_t> indices;
};

// Shuffled epochs; batch contents are a pure function of (seed, step).
class BatchStream {
 public:
  BatchStream(const Dataset& data, int batch) : data_(&data), batch_(batch) {
    if (batch < 1) throw ConfigError("batch size must be >= 1");
  }

  Batch at_step(long long step) const {
    Batch b;
    const std::size_t n = data_->size();
    for (int j = 0; j < batch_; ++j) {
      const long long flat = step * batch_ + j;
      const long long epoch = flat / static_cast<long long>(n);
      const std::size_t slot = static_cast<std::size_t>(flat % static_cast<long long>(n));
      const std::vector<std::size_t> order = permutation(static_cast<std::uint64_t>(epoch));
      const std::size_t idx = order[slot];
      Rng crop_rng = derive_rng({data_->spec().seed, 0x63726f70ULL, static_cast<std::uint64_t>(flat)});
      Image img = data_->get(idx, crop_rng);
      if (img.m.size() == 0) continue;
      b.images.push_back(std::move(img));
      b.indices.push_back(idx);
    }
    return b;
  }

 private:
  std::vector<std::size_t> permutation(std::uint64_t epoch) const {
    if (cached_epoch_ != epoch || order_.empty()) {
      order_.resize(data_->size());
      std::iota(order_.begin(), order_.end(), std::size_t{0});
      Rng rng = derive_rng({data_->spec().seed, 0x73687566ULL, epoch});
      std::shuffle(order_.begin(), order_.end(), rng);
      cached_epoch_ = epoch;
    }
    return order_;
  }

  const Dataset* data_;
  int batch_;
  mutable std::uint64_t cached_epoch_ = ~0ULL;
  mutable std::vector<std::size_t> order_;
};

inline BatchStream load_batches(const Dataset& data, int batch) { return BatchStream(data, batch); }

enum class GammaMode { Train, Test };

// Train: any cell. Test: strictly interior cells.
inline RoiPosition sample_gamma(GammaMode mode, const GridSpec& grid, Rng& rng) {
  grid.validate();
  if (mode == GammaMode::Train) {
    std::uniform_int_distribution<int> dh(1, grid.n_h);
    std::uniform_int_distribution<int> dw(1, grid.n_w);
    const int h = dh(rng);
    return {h, dw(rng)};
  }
  if (grid.n_h < 3 || grid.n_w < 3) throw ConfigError("test-mode ROI sampling needs an interior (grid >= 3x3)");
  std::uniform_int_distribution<int> dh(2, grid.n_h - 1);
  std::uniform_int_distribution<int> dw(2, grid.n_w - 1);
  const int h = dh(rng);
  return {h, dw(rng)};
}

struct PanelEntry {
  std::string label;
  Image image;
};

struct PanelLayout {
  int scale = 1;
  int tile_w = 0;
  int tile_h = 0;
  int caption_h = 22;
  int gap = 4;
  int width = 0;
  int height = 0;
};

inline PanelLayout panel_layout(int tiles, int h, int w) {
  PanelLayout p;
  p.scale = std::max(1, 256 / std::max(1, w));
  p.tile_w = w * p.scale;
  p.tile_h = h * p.scale;
  p.width = tiles * p.tile_w + (tiles - 1) * p.gap;
  p.height = p.tile_h + p.caption_h;
  return p;
}

// Original plus reconstructions side by side, ROI outlined in red, each
// reconstruction captioned with its ROI PSNR.
inline PanelLayout render_panel(const std::string& path, const Image& original,
                                const std::vector<PanelEntry>& reconstructions, const RoiPosition& gamma,
                                const GridSpec& grid) {
  const RegionMap map = classify_regions(gamma, grid);
  for (const auto& r : reconstructions) {
    if (r.image.h != original.h || r.image.w != original.w) throw DomainError("panel images differ in size");
  }
  const int tiles = static_cast<int>(reconstructions.size()) + 1;
  const PanelLayout lay = panel_layout(tiles, original.h, original.w);
  cv::Mat canvas(lay.height, lay.width, CV_8UC3, cv::Scalar(255, 255, 255));
  const BlockShape b = block_shape(grid, original.h, original.w);

  auto draw = [&](int t, const Image& img, const std::string& caption) {
    cv::Mat tile;
    cv::resize(to_cv(img), tile, cv::Size(lay.tile_w, lay.tile_h), 0, 0, cv::INTER_NEAREST);
    const int x0 = t * (lay.tile_w + lay.gap);
    tile.copyTo(canvas(cv::Rect(x0, 0, lay.tile_w, lay.tile_h)));
    const cv::Point tl(x0 + gamma.col() * b.bw * lay.scale, gamma.row() * b.bh * lay.scale);
    cv::rectangle(canvas, cv::Rect(tl.x, tl.y, b.bw * lay.scale, b.bh * lay.scale), cv::Scalar(0, 0, 255), 2);
    cv::putText(canvas, caption, cv::Point(x0 + 2, lay.tile_h + 15), cv::FONT_HERSHEY_SIMPLEX, 0.4,
                cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
  };
  draw(0, original, "original");
  for (std::size_t i = 0; i < reconstructions.size(); ++i) {
    const RegionPsnr q = region_psnr(original, reconstructions[i].image, map);
    char db[32];
    if (std::isinf(q.roi)) {
      std::snprintf(db, sizeof db, "inf");
    } else {
      std::snprintf(db, sizeof db, "%.2f", q.roi);
    }
    draw(static_cast<int>(i) + 1, reconstructions[i].image, reconstructions[i].label + "  ROI " + db + " dB");
  }
  if (!cv::imwrite(path, canvas)) throw IoError("cannot write panel " + path);
  return lay;
}

}  // namespace roijscc::data
