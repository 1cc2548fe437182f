#pragma once

// Minimal line charts rendered with OpenCV.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "roijscc/errors.hpp"

namespace roijscc::harness {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool dotted = false;
  int colour = 0;  // palette index
};

inline cv::Scalar palette(int i) {
  static const cv::Scalar colours[] = {{180, 119, 31}, {14, 127, 255}, {44, 160, 44},
                                       {40, 39, 214},  {189, 103, 148}, {75, 86, 140}};
  return colours[static_cast<std::size_t>(i) % 6];
}

inline void plot_lines(const std::string& path, const std::string& title, const std::string& xlabel,
                       const std::string& ylabel, const std::vector<Series>& series) {
  const int W = 640, H = 440, left = 60, right = 170, top = 36, bottom = 50;
  cv::Mat img(H, W, CV_8UC3, cv::Scalar(255, 255, 255));
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!std::isfinite(x0)) {
    x0 = 0;
    x1 = 1;
    y0 = 0;
    y1 = 1;
  }
  if (x1 - x0 < 1e-9) {
    x0 -= 1;
    x1 += 1;
  }
  const double pad = std::max(0.5, 0.08 * (y1 - y0));
  y0 -= pad;
  y1 += pad;
  const int pw = W - left - right, ph = H - top - bottom;
  auto px = [&](double x) { return left + static_cast<int>(std::lround((x - x0) / (x1 - x0) * pw)); };
  auto py = [&](double y) { return top + ph - static_cast<int>(std::lround((y - y0) / (y1 - y0) * ph)); };

  const cv::Scalar black(0, 0, 0), grey(215, 215, 215);
  char buf[32];
  for (int t = 0; t <= 5; ++t) {
    const double yv = y0 + (y1 - y0) * t / 5.0;
    cv::line(img, {left, py(yv)}, {left + pw, py(yv)}, grey, 1);
    std::snprintf(buf, sizeof buf, "%.1f", yv);
    cv::putText(img, buf, {6, py(yv) + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.38, black, 1, cv::LINE_AA);
    const double xv = x0 + (x1 - x0) * t / 5.0;
    std::snprintf(buf, sizeof buf, "%.1f", xv);
    cv::putText(img, buf, {px(xv) - 10, top + ph + 16}, cv::FONT_HERSHEY_SIMPLEX, 0.38, black, 1, cv::LINE_AA);
  }
  cv::rectangle(img, {left, top}, {left + pw, top + ph}, black, 1);
  cv::putText(img, title, {left, 22}, cv::FONT_HERSHEY_SIMPLEX, 0.5, black, 1, cv::LINE_AA);
  cv::putText(img, xlabel, {left + pw / 2 - 20, H - 12}, cv::FONT_HERSHEY_SIMPLEX, 0.42, black, 1, cv::LINE_AA);
  cv::putText(img, ylabel, {6, top - 8}, cv::FONT_HERSHEY_SIMPLEX, 0.42, black, 1, cv::LINE_AA);

  int ly = top + 10;
  for (const auto& s : series) {
    const cv::Scalar c = palette(s.colour);
    cv::Point prev(-1, -1);
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      const cv::Point p(px(s.x[i]), py(s.y[i]));
      if (prev.x >= 0) {
        if (s.dotted) {
          const double len = std::hypot(p.x - prev.x, p.y - prev.y);
          for (double d = 0; d < len; d += 8) {
            const double a = d / len, b = std::min(1.0, (d + 4) / len);
            cv::line(img, prev + (p - prev) * a, prev + (p - prev) * b, c, 2, cv::LINE_AA);
          }
        } else {
          cv::line(img, prev, p, c, 2, cv::LINE_AA);
        }
      }
      cv::circle(img, p, 3, c, cv::FILLED, cv::LINE_AA);
      prev = p;
    }
    if (s.dotted) {
      for (int d = 0; d < 24; d += 8) cv::line(img, {left + pw + 8 + d, ly}, {left + pw + 12 + d, ly}, c, 2);
    } else {
      cv::line(img, {left + pw + 8, ly}, {left + pw + 32, ly}, c, 2);
    }
    cv::putText(img, s.label, {left + pw + 38, ly + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.38, black, 1, cv::LINE_AA);
    ly += 18;
  }
  if (!cv::imwrite(path, img)) throw IoError("cannot write plot " + path);
}

}  // namespace roijscc::harness
