#pragma once

// End-to-end transmission: encode -> allocate/pack -> power normalize ->
// AWGN -> zero-pad unpack -> decode, with the matching backward pass.

#include <map>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "roijscc/bandwidth.hpp"
#include "roijscc/channel.hpp"
#include "roijscc/metrics.hpp"
#include "roijscc/model/codec.hpp"

namespace roijscc::harness {

using model::Architecture;
using nn::Tensor;

// Which of the four ROI mechanisms a model uses.
struct Variant {
  Architecture arch = Architecture::Attention;
  bool mask_injection = true;
  bool split_processing = true;
  bool roi_loss = true;
  bool roi_bandwidth = true;

  static Variant roi_jscc() { return {}; }
  static Variant uniform_baseline() { return {Architecture::Attention, false, false, false, false}; }
  static Variant conv_baseline() { return {Architecture::Convolutional, false, false, false, false}; }

  model::ModelFlags model_flags() const { return {mask_injection, split_processing}; }
  bool operator==(const Variant&) const = default;
};

inline const std::vector<std::string>& ablation_flag_names() {
  static const std::vector<std::string> names{"mask_injection", "split_processing", "roi_loss", "roi_bandwidth"};
  return names;
}

// Attention variant enabling exactly the named mechanisms.
inline Variant variant_from_flags(const std::set<std::string>& flags) {
  Variant v = Variant::uniform_baseline();
  for (const auto& f : flags) {
    if (f == "mask_injection") v.mask_injection = true;
    else if (f == "split_processing") v.split_processing = true;
    else if (f == "roi_loss") v.roi_loss = true;
    else if (f == "roi_bandwidth") v.roi_bandwidth = true;
    else throw ConfigError("unknown ablation flag '" + f + "'");
  }
  return v;
}

inline std::string variant_name(const Variant& v) {
  if (v.arch == Architecture::Convolutional) return "conv-baseline";
  if (v == Variant::roi_jscc()) return "roi-jscc";
  if (v == Variant::uniform_baseline()) return "uniform-baseline";
  std::string s;
  const bool on[] = {v.mask_injection, v.split_processing, v.roi_loss, v.roi_bandwidth};
  const char* tags[] = {"M", "S", "L", "B"};
  for (int i = 0; i < 4; ++i) {
    if (on[i]) s += tags[i];
  }
  return "roi-jscc[" + (s.empty() ? std::string("-") : s) + "]";
}

inline Variant parse_variant(const std::string& name) {
  if (name == "roi-jscc") return Variant::roi_jscc();
  if (name == "uniform-baseline") return Variant::uniform_baseline();
  if (name == "conv-baseline") return Variant::conv_baseline();
  if (name == "wo-rb") {
    Variant v = Variant::roi_jscc();
    v.roi_bandwidth = false;
    return v;
  }
  if (name == "w-rl") return variant_from_flags({"roi_loss"});
  if (name == "w-rb") return variant_from_flags({"roi_bandwidth"});
  if (name == "w-rlb") return variant_from_flags({"roi_loss", "roi_bandwidth"});
  // "flags:a+b" names an explicit subset.
  if (name.rfind("flags:", 0) == 0) {
    std::set<std::string> flags;
    std::string rest = name.substr(6);
    std::size_t pos = 0;
    while (pos <= rest.size() && !rest.empty()) {
      const std::size_t next = rest.find('+', pos);
      const std::string tok = rest.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
      if (!tok.empty()) flags.insert(tok);
      if (next == std::string::npos) break;
      pos = next + 1;
    }
    return variant_from_flags(flags);
  }
  throw ConfigError("unknown model variant '" + name + "'");
}

struct SystemConfig {
  model::StageConfig stages{};
  GridSpec grid{};
  int image_h = 64;
  int image_w = 64;
  int k = 1024;
  double tau = 0.1;
  LossWeights weights{};
  double power = 1.0;
  Variant variant{};
};

template <class T>
struct PassResult {
  double loss = 0;
  Tensor<T> reconstruction;  // unclamped
  int symbols = 0;           // complex channel uses actually transmitted
};

template <class T>
class JsccSystem {
 public:
  JsccSystem(const SystemConfig& cfg, std::uint64_t init_seed)
      : cfg_(cfg),
        geo_(model::make_geometry(cfg.image_h, cfg.image_w, cfg.stages, cfg.grid)),
        codec_(std::make_unique<model::Codec<T>>(cfg.stages, cfg.variant.arch, init_seed)) {
    cfg.weights.validate();
    bw_.grid = cfg.grid;
    bw_.k = cfg.k;
    bw_.tau = cfg.tau;
    bw_.symbol_width = cfg.stages.symbol_width;
    bw_.feat_h = geo_.stage_h(geo_.stages);
    bw_.feat_w = geo_.stage_w(geo_.stages);
    bw_.roi_adaptive = cfg.variant.roi_bandwidth;
    average_dims(cfg.k, geo_.feature_rows(), cfg.stages.symbol_width);
  }

  const SystemConfig& config() const { return cfg_; }
  const model::Geometry& geometry() const { return geo_; }
  const BandwidthConfig& bandwidth() const { return bw_; }
  model::Codec<T>& codec() { return *codec_; }
  const nn::ParamList<T>& params() const { return codec_->params(); }

  const std::vector<model::StageLayout>& layouts(const RoiPosition& gamma) {
    const auto key = std::make_pair(gamma.h, gamma.w);
    auto it = layout_cache_.find(key);
    if (it == layout_cache_.end()) {
      const RegionMap map = classify_regions(gamma, cfg_.grid);
      it = layout_cache_.emplace(key, model::build_layouts(geo_, map, cfg_.stages, cfg_.variant.model_flags())).first;
    }
    return it->second;
  }

  // Re-targets the channel budget (evaluation at another CPP).
  void set_bandwidth(int k) {
    average_dims(k, geo_.feature_rows(), cfg_.stages.symbol_width);
    cfg_.k = k;
    bw_.k = k;
  }

  model::BlockOptions block_options() const { return {cfg_.variant.mask_injection, true}; }

  // One transmission. When grad_scale != 0 the loss gradient (times
  // grad_scale) is backpropagated into the parameter gradients.
  template <class NoiseRng>
  PassResult<T> run(const Tensor<T>& x, const RoiPosition& gamma, double snr_db, NoiseRng& noise,
                    double grad_scale = 0.0) {
    require_shape(x, cfg_.image_h, cfg_.image_w, 3, "system input");
    const RegionMap map = classify_regions(gamma, cfg_.grid);
    const auto& lay = layouts(gamma);
    const model::BlockOptions opt = block_options();

    const nn::Mat<T> zr = codec_->encoder().forward(x, lay, opt);
    const FeatureMatrix<T> z = FeatureMatrix<T>::from_real(zr);
    const Allocation alloc = layout_for(gamma, bw_);
    ROIJSCC_ASSERT(alloc.total() <= cfg_.k, "transmission exceeds k");
    PowerNormalizer<T> normalizer;
    const auto sent = normalizer.forward(pack(z, alloc), cfg_.power);
    const auto received = awgn(sent, snr_db, noise);
    const FeatureMatrix<T> zp = unpack_zero_pad(received, alloc);

    PassResult<T> out;
    out.symbols = alloc.total();
    out.reconstruction = codec_->decoder().forward(zp.to_real(), lay, opt);
    Tensor<T> grad;
    out.loss = weighted_loss_and_grad(x, out.reconstruction, map, cfg_.weights, cfg_.variant.roi_loss, grad);
    if (grad_scale == 0.0) return out;

    grad.m *= static_cast<T>(grad_scale);
    const nn::Mat<T> dzp = codec_->decoder().backward(grad);
    const auto dsent = pack(FeatureMatrix<T>::from_real(dzp), alloc);
    const auto dpacked = normalizer.backward(dsent);
    const FeatureMatrix<T> dz = unpack_zero_pad(dpacked, alloc);
    codec_->encoder().backward(dz.to_real());
    return out;
  }

 private:
  SystemConfig cfg_;
  model::Geometry geo_;
  BandwidthConfig bw_;
  std::unique_ptr<model::Codec<T>> codec_;
  std::map<std::pair<int, int>, std::vector<model::StageLayout>> layout_cache_;
};

}  // namespace roijscc::harness
