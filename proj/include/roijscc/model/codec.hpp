#pragma once

// Encoder f_theta and decoder g_phi: L stages of down/upsampling with a
// group of blocks per stage, plus the pointwise maps to and from the
// 2*C_m-wide real representation of the complex feature matrix.

#include <memory>
#include <string>
#include <vector>

#include "roijscc/model/roi_block.hpp"

namespace roijscc::model {

enum class Architecture { Attention, Convolutional };

inline const char* architecture_name(Architecture a) {
  return a == Architecture::Attention ? "attention" : "convolutional";
}

struct StageConfig {
  std::vector<int> channels{32, 64};
  std::vector<int> blocks{1, 2};
  int symbol_width = 16;  // C_m, complex symbols per feature vector
  int heads = 2;
  int window = 4;
  int gate_kernel = SpatialGate<double>::kDefaultKernel;
  int routing_threshold = kDefaultRoutingThreshold;

  int stages() const { return static_cast<int>(channels.size()); }

  static StageConfig full_scale() {
    StageConfig c;
    c.channels = {64, 96, 128, 192};
    c.blocks = {2, 2, 4, 2};
    c.symbol_width = 32;
    c.heads = 4;
    c.window = 8;
    return c;
  }
  static StageConfig desk_scale() { return StageConfig{}; }

  void validate() const {
    if (channels.empty()) throw ConfigError("stage config needs at least one stage");
    if (blocks.size() != channels.size()) throw ConfigError("channels and blocks lists differ in length");
    for (int c : channels) {
      if (c <= 0) throw ConfigError("stage widths must be positive");
      if (c % heads != 0) throw ConfigError("stage width " + std::to_string(c) + " not divisible by heads");
    }
    for (int b : blocks) {
      if (b < 0) throw ConfigError("block counts must be non-negative");
    }
    if (symbol_width <= 0 || heads <= 0 || window <= 0) throw ConfigError("symbol width, heads and window must be positive");
    if (gate_kernel <= 0 || gate_kernel % 2 == 0) throw ConfigError("gate kernel must be odd and positive");
    if (routing_threshold < 1) throw ConfigError("routing threshold must be >= 1");
  }

  bool operator==(const StageConfig&) const = default;
};

// Architectural switches that change how the ROI position is consumed.
struct ModelFlags {
  bool mask_injection = true;
  bool split_processing = true;
  bool operator==(const ModelFlags&) const = default;
};

// Image/feature geometry derived from (H, W, config).
struct Geometry {
  int height = 0;
  int width = 0;
  int stages = 0;

  int stage_h(int i) const { return height >> i; }  // i = 1..L
  int stage_w(int i) const { return width >> i; }
  int feature_rows() const { return stage_h(stages) * stage_w(stages); }
};

inline Geometry make_geometry(int height, int width, const StageConfig& cfg, const GridSpec& grid) {
  cfg.validate();
  const int L = cfg.stages();
  const int f = 1 << L;
  if (height <= 0 || width <= 0 || height % f != 0 || width % f != 0) {
    throw DomainError("image " + std::to_string(height) + "x" + std::to_string(width) + " not divisible by 2^" +
                      std::to_string(L));
  }
  Geometry g{height, width, L};
  for (int i = 1; i <= L; ++i) block_shape(grid, g.stage_h(i), g.stage_w(i));
  return g;
}

// One layout per stage (index 0 is stage 1, the finest resolution).
inline std::vector<StageLayout> build_layouts(const Geometry& geo, const RegionMap& map, const StageConfig& cfg,
                                              const ModelFlags& flags) {
  const AttentionRouting routing =
      flags.split_processing ? route_attention(map, cfg.routing_threshold) : all_heavy_routing(map.grid());
  std::vector<StageLayout> out;
  for (int i = 1; i <= geo.stages; ++i) {
    out.push_back(make_stage_layout(map, routing, geo.stage_h(i), geo.stage_w(i), cfg.window));
  }
  return out;
}

template <class T>
class StageBlock {
 public:
  virtual ~StageBlock() = default;
  virtual Tensor<T> forward(const Tensor<T>& x, const StageLayout& layout, BlockOptions opt) = 0;
  virtual Tensor<T> backward(const Tensor<T>& dy) = 0;
  virtual void collect(ParamList<T>& out) = 0;
  virtual void init(Rng& rng) = 0;
};

template <class T>
class RoiStageBlock final : public StageBlock<T> {
 public:
  RoiStageBlock(const std::string& name, int channels, const StageConfig& cfg)
      : block_(name, channels, cfg.heads, cfg.gate_kernel) {}
  Tensor<T> forward(const Tensor<T>& x, const StageLayout& layout, BlockOptions opt) override {
    return block_.forward(x, layout, opt);
  }
  Tensor<T> backward(const Tensor<T>& dy) override { return block_.backward(dy); }
  void collect(ParamList<T>& out) override { block_.collect(out); }
  void init(Rng& rng) override { block_.init(rng); }
  RoiBlock<T>& block() { return block_; }

 private:
  RoiBlock<T> block_;
};

// Residual conv-GELU-conv block used by the convolutional baseline.
template <class T>
class ConvStageBlock final : public StageBlock<T> {
 public:
  ConvStageBlock(const std::string& name, int channels)
      : conv1_(name + ".conv1", channels, channels), conv2_(name + ".conv2", channels, channels) {}

  Tensor<T> forward(const Tensor<T>& x, const StageLayout&, BlockOptions) override {
    pre_ = conv1_.forward(x);
    Tensor<T> act(pre_.h, pre_.w, pre_.m.unaryExpr([](T v) { return nn::gelu(v); }).eval());
    Tensor<T> y = conv2_.forward(act);
    y.m += x.m;
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) override {
    Tensor<T> dact = conv2_.backward(dy);
    dact.m = dact.m.array() * pre_.m.unaryExpr([](T v) { return nn::gelu_grad(v); }).array();
    Tensor<T> dx = conv1_.backward(dact);
    dx.m += dy.m;
    return dx;
  }
  void collect(ParamList<T>& out) override {
    conv1_.collect(out);
    conv2_.collect(out);
  }
  void init(Rng& rng) override {
    conv1_.init_default(rng);
    conv2_.init(rng, 0.02);
  }

 private:
  nn::Conv3x3<T> conv1_;
  nn::Conv3x3<T> conv2_;
  Tensor<T> pre_;
};

template <class T>
std::unique_ptr<StageBlock<T>> make_block(Architecture arch, const std::string& name, int channels,
                                          const StageConfig& cfg) {
  if (arch == Architecture::Attention) return std::make_unique<RoiStageBlock<T>>(name, channels, cfg);
  return std::make_unique<ConvStageBlock<T>>(name, channels);
}

template <class T>
class Encoder {
 public:
  Encoder() = default;
  Encoder(const StageConfig& cfg, Architecture arch) : cfg_(cfg) {
    cfg.validate();
    const int L = cfg.stages();
    for (int i = 0; i < L; ++i) {
      const std::string s = "enc.s" + std::to_string(i + 1);
      const int in = i == 0 ? 3 : cfg.channels[static_cast<std::size_t>(i - 1)];
      const int out = cfg.channels[static_cast<std::size_t>(i)];
      Stage st;
      st.down_norm = nn::LayerNorm<T>(s + ".down.norm", 4 * in);
      st.down = Linear<T>(s + ".down", 4 * in, out);
      for (int b = 0; b < cfg.blocks[static_cast<std::size_t>(i)]; ++b) {
        st.blocks.push_back(make_block<T>(arch, s + ".b" + std::to_string(b), out, cfg));
      }
      stages_.push_back(std::move(st));
    }
    head_norm_ = nn::LayerNorm<T>("enc.head.norm", cfg.channels.back());
    head_ = Linear<T>("enc.head", cfg.channels.back(), 2 * cfg.symbol_width);
  }

  void init(Rng& rng) {
    for (auto& st : stages_) {
      st.down.init_default(rng);
      for (auto& b : st.blocks) b->init(rng);
    }
    head_.init_default(rng);
  }

  // Returns B x 2*C_m reals, (re, im) interleaved per complex symbol.
  Mat<T> forward(const Tensor<T>& image, const std::vector<StageLayout>& layouts, BlockOptions opt) {
    require_shape(image, image.h, image.w, 3, "encoder input");
    ROIJSCC_ASSERT(layouts.size() == stages_.size(), "layout count");
    Tensor<T> x = image;
    for (std::size_t i = 0; i < stages_.size(); ++i) {
      Stage& st = stages_[i];
      Tensor<T> s2d = nn::space_to_depth(x);
      // Stage 1 embeds raw pixels; later stages normalize the merged patch first.
      if (i > 0) s2d = st.down_norm.forward(s2d);
      x = st.down.forward(s2d);
      for (auto& b : st.blocks) x = b->forward(x, layouts[i], opt);
    }
    last_h_ = x.h;
    last_w_ = x.w;
    return head_.forward(head_norm_.forward(x.m));
  }

  Tensor<T> backward(const Mat<T>& dz) {
    Tensor<T> dx(last_h_, last_w_, head_norm_.backward(head_.backward(dz)));
    for (std::size_t i = stages_.size(); i-- > 0;) {
      Stage& st = stages_[i];
      for (std::size_t b = st.blocks.size(); b-- > 0;) dx = st.blocks[b]->backward(dx);
      Tensor<T> ds = st.down.backward(dx);
      if (i > 0) ds = st.down_norm.backward(ds);
      dx = nn::depth_to_space(ds);
    }
    return dx;
  }

  void collect(ParamList<T>& out) {
    for (std::size_t i = 0; i < stages_.size(); ++i) {
      if (i > 0) stages_[i].down_norm.collect(out);
      stages_[i].down.collect(out);
      for (auto& b : stages_[i].blocks) b->collect(out);
    }
    head_norm_.collect(out);
    head_.collect(out);
  }

  std::vector<StageBlock<T>*> blocks(int stage) {
    std::vector<StageBlock<T>*> out;
    for (auto& b : stages_[static_cast<std::size_t>(stage)].blocks) out.push_back(b.get());
    return out;
  }

 private:
  struct Stage {
    nn::LayerNorm<T> down_norm;
    Linear<T> down;
    std::vector<std::unique_ptr<StageBlock<T>>> blocks;
  };
  StageConfig cfg_;
  std::vector<Stage> stages_;
  nn::LayerNorm<T> head_norm_;
  Linear<T> head_;
  int last_h_ = 0;
  int last_w_ = 0;
};

template <class T>
class Decoder {
 public:
  Decoder() = default;
  Decoder(const StageConfig& cfg, Architecture arch) : cfg_(cfg) {
    cfg.validate();
    const int L = cfg.stages();
    head_ = Linear<T>("dec.head", 2 * cfg.symbol_width, cfg.channels.back());
    // Stage j processes width C_{L-j} and divides into C_{L-j-1} (C_0 = RGB).
    for (int j = 0; j < L; ++j) {
      const int level = L - j;  // 1-based encoder stage mirrored here
      const std::string s = "dec.s" + std::to_string(j + 1);
      const int width = cfg.channels[static_cast<std::size_t>(level - 1)];
      const int next = level == 1 ? 3 : cfg.channels[static_cast<std::size_t>(level - 2)];
      Stage st;
      for (int b = 0; b < cfg.blocks[static_cast<std::size_t>(level - 1)]; ++b) {
        st.blocks.push_back(make_block<T>(arch, s + ".b" + std::to_string(b), width, cfg));
      }
      st.up_norm = nn::LayerNorm<T>(s + ".up.norm", width);
      st.up = Linear<T>(s + ".up", width, 4 * next);
      st.level = level;
      stages_.push_back(std::move(st));
    }
  }

  void init(Rng& rng) {
    head_.init_default(rng);
    for (auto& st : stages_) {
      for (auto& b : st.blocks) b->init(rng);
      st.up.init_default(rng);
    }
    // Start reconstructions at mid-grey.
    stages_.back().up.bias().value.setConstant(T(0.5));
  }

  // z: B x 2*C_m reals. Returns the unclamped H x W x 3 reconstruction.
  Tensor<T> forward(const Mat<T>& z, const std::vector<StageLayout>& layouts, BlockOptions opt) {
    ROIJSCC_ASSERT(layouts.size() == stages_.size(), "layout count");
    const StageLayout& coarsest = layouts.back();
    if (z.rows() != coarsest.positions() || z.cols() != 2 * cfg_.symbol_width) {
      throw DomainError("decoder input has " + std::to_string(z.rows()) + " rows, expected " +
                        std::to_string(coarsest.positions()));
    }
    Tensor<T> x(coarsest.h, coarsest.w, head_.forward(z));
    for (auto& st : stages_) {
      for (auto& b : st.blocks) x = b->forward(x, layouts[static_cast<std::size_t>(st.level - 1)], opt);
      x = nn::depth_to_space(st.up.forward(st.up_norm.forward(x)));
    }
    return x;
  }

  Mat<T> backward(const Tensor<T>& dimage) {
    Tensor<T> dx = dimage;
    for (std::size_t j = stages_.size(); j-- > 0;) {
      Stage& st = stages_[j];
      dx = st.up_norm.backward(st.up.backward(nn::space_to_depth(dx)));
      for (std::size_t b = st.blocks.size(); b-- > 0;) dx = st.blocks[b]->backward(dx);
    }
    return head_.backward(dx.m);
  }

  void collect(ParamList<T>& out) {
    head_.collect(out);
    for (auto& st : stages_) {
      for (auto& b : st.blocks) b->collect(out);
      st.up_norm.collect(out);
      st.up.collect(out);
    }
  }

 private:
  struct Stage {
    std::vector<std::unique_ptr<StageBlock<T>>> blocks;
    nn::LayerNorm<T> up_norm;
    Linear<T> up;
    int level = 1;
  };
  StageConfig cfg_;
  Linear<T> head_;
  std::vector<Stage> stages_;
};

// Encoder + decoder pair sharing one parameter list.
template <class T>
class Codec {
 public:
  Codec(const StageConfig& cfg, Architecture arch, std::uint64_t seed)
      : cfg_(cfg), arch_(arch), encoder_(cfg, arch), decoder_(cfg, arch) {
    Rng rng(seed);
    encoder_.init(rng);
    decoder_.init(rng);
    encoder_.collect(params_);
    decoder_.collect(params_);
  }
  Codec(const Codec&) = delete;
  Codec& operator=(const Codec&) = delete;

  Encoder<T>& encoder() { return encoder_; }
  Decoder<T>& decoder() { return decoder_; }
  const ParamList<T>& params() const { return params_; }
  const StageConfig& config() const { return cfg_; }
  Architecture architecture() const { return arch_; }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }

 private:
  StageConfig cfg_;
  Architecture arch_;
  Encoder<T> encoder_;
  Decoder<T> decoder_;
  ParamList<T> params_;
};

}  // namespace roijscc::model
