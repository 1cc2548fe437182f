#pragma once

// Analytical multiply-accumulate counts for the ROI block and the codec.
// Counted: pointwise/linear layers, convolutions, attention products and
// elementwise gating. Normalization and activations are not counted.

#include <vector>

#include "roijscc/harness/system.hpp"

namespace roijscc::harness {

struct BlockMacs {
  long long injection = 0;
  long long heavy = 0;
  long long light = 0;
  long long tail = 0;
  long long ffn = 0;

  long long total() const { return injection + heavy + light + tail + ffn; }
  BlockMacs& operator+=(const BlockMacs& o) {
    injection += o.injection;
    heavy += o.heavy;
    light += o.light;
    tail += o.tail;
    ffn += o.ffn;
    return *this;
  }
};

inline BlockMacs roi_block_macs(const model::StageLayout& layout, int channels, int gate_kernel,
                                const model::BlockOptions& opt = {}) {
  const long long C = channels;
  const long long P = layout.positions();
  const long long Nh = static_cast<long long>(layout.heavy_order.size());
  const long long Nl = static_cast<long long>(layout.light_positions.size());
  const long long T = layout.window_tokens;
  BlockMacs m;
  if (opt.mask_injection) m.injection = P * C;
  // qkv, QK^T and AV over all heads, output projection
  m.heavy = Nh * C * 3 * C + 2 * Nh * T * C + Nh * C * C;
  // channel mean, k x k conv over 2 pooled maps, gating, output projection
  m.light = Nl * C + Nl * gate_kernel * gate_kernel * 2 + Nl * C + Nl * C * C;
  if (opt.joint_tail) {
    const long long r = std::max<long long>(1, C / 4);
    m.tail = 9 * P * C + 2 * C * r + P * C + P * C * C;
    const long long hid = 2 * C;
    m.ffn = P * C * 2 * hid + 9 * P * 2 * hid + P * hid + P * hid * C;
  }
  return m;
}

// Whole encoder + decoder block stack (patch merging/division and heads
// included) for one ROI position.
inline long long codec_macs(const SystemConfig& cfg, const RoiPosition& gamma) {
  const model::Geometry geo = model::make_geometry(cfg.image_h, cfg.image_w, cfg.stages, cfg.grid);
  const RegionMap map = classify_regions(gamma, cfg.grid);
  const auto layouts = model::build_layouts(geo, map, cfg.stages, cfg.variant.model_flags());
  const model::BlockOptions opt{cfg.variant.mask_injection, true};
  long long total = 0;
  for (int i = 1; i <= geo.stages; ++i) {
    const long long P = static_cast<long long>(geo.stage_h(i)) * geo.stage_w(i);
    const long long C = cfg.stages.channels[static_cast<std::size_t>(i - 1)];
    const long long Cin = i == 1 ? 3 : cfg.stages.channels[static_cast<std::size_t>(i - 2)];
    total += P * 4 * Cin * C;  // encoder patch merging
    total += P * C * 4 * Cin;  // decoder patch division
    const int nb = cfg.stages.blocks[static_cast<std::size_t>(i - 1)];
    long long per_block = 0;
    if (cfg.variant.arch == model::Architecture::Attention) {
      per_block = roi_block_macs(layouts[static_cast<std::size_t>(i - 1)], static_cast<int>(C),
                                 cfg.stages.gate_kernel, opt)
                      .total();
    } else {
      per_block = 2 * 9 * P * C * C;
    }
    total += 2LL * nb * per_block;  // encoder and decoder
  }
  const long long B = geo.feature_rows();
  total += 2 * B * cfg.stages.channels.back() * 2 * cfg.stages.symbol_width;  // heads
  return total;
}

}  // namespace roijscc::harness
