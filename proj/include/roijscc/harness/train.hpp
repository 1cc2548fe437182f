#pragma once

// Training loop. Batches, per-sample ROI positions and channel noise are
// pure functions of (seed, step, sample), so a resumed run replays the
// uninterrupted one exactly.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "roijscc/harness/checkpoint.hpp"

namespace roijscc::harness {

// Stream keys for derive_rng.
inline constexpr std::uint64_t kKeyTrainGamma = 0x7467616dULL;
inline constexpr std::uint64_t kKeyTrainNoise = 0x746e6f69ULL;
inline constexpr std::uint64_t kKeyTrainSnr = 0x74736e72ULL;

struct LogEntry {
  long long step = 0;
  double loss = 0;
  double grad_norm = 0;
  double seconds = 0;
};

class Trainer {
 public:
  using System = JsccSystem<float>;

  explicit Trainer(RunConfig cfg)
      : cfg_(std::move(cfg)), system_(std::make_unique<System>(cfg_.system, cfg_.seed)),
        adam_(system_->params(), cfg_.adam), data_(cfg_.train_data), stream_(data_, cfg_.schedule.batch) {}
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  const RunConfig& config() const { return cfg_; }
  System& system() { return *system_; }
  nn::Adam<float>& optimizer() { return adam_; }
  long long step() const { return step_; }
  long long total_steps() const { return cfg_.total_steps(data_.size()); }
  const std::vector<LogEntry>& log() const { return log_; }

  // Mean batch loss of the step just taken.
  double train_step() {
    const data::Batch batch = stream_.at_step(step_);
    if (batch.images.empty()) throw IoError("training batch at step " + std::to_string(step_) + " is empty");
    for (auto* p : system_->params()) p->zero_grad();
    const double scale = 1.0 / static_cast<double>(batch.images.size());
    double loss = 0;
    for (std::size_t j = 0; j < batch.images.size(); ++j) {
      const auto s = static_cast<std::uint64_t>(step_);
      nn::Rng grng = data::derive_rng({cfg_.seed, kKeyTrainGamma, s, j});
      const RoiPosition gamma = data::sample_gamma(data::GammaMode::Train, cfg_.system.grid, grng);
      double snr = cfg_.snr_db;
      if (cfg_.schedule.mixed_snr) {
        nn::Rng srng = data::derive_rng({cfg_.seed, kKeyTrainSnr, s, j});
        snr = std::uniform_real_distribution<double>(cfg_.schedule.snr_min, cfg_.schedule.snr_max)(srng);
      }
      nn::Rng noise = data::derive_rng({cfg_.seed, kKeyTrainNoise, s, j});
      loss += system_->run(batch.images[j], gamma, snr, noise, scale).loss;
    }
    loss *= scale;
    if (!std::isfinite(loss)) {
      throw DivergenceError("non-finite training loss at step " + std::to_string(step_));
    }
    adam_.set_learning_rate(learning_rate_at(step_));
    last_grad_norm_ = adam_.step();
    if (!std::isfinite(last_grad_norm_)) {
      throw DivergenceError("non-finite gradient norm at step " + std::to_string(step_));
    }
    ++step_;
    return loss;
  }

  double learning_rate_at(long long step) const {
    const double base = cfg_.adam.learning_rate;
    if (cfg_.schedule.lr_schedule != "cosine") return base;
    const double total = static_cast<double>(std::max<long long>(1, total_steps()));
    const double t = std::min(1.0, static_cast<double>(step) / total);
    const double floor = cfg_.schedule.lr_floor;
    return base * (floor + (1.0 - floor) * 0.5 * (1.0 + std::cos(M_PI * t)));
  }

  // Trains to `until` (default: the schedule's end). Writes the loss log and
  // periodic checkpoints under output_dir when write_files is set.
  void run(long long until = -1, std::ostream* progress = nullptr, bool write_files = true) {
    if (until < 0) until = total_steps();
    const auto t0 = std::chrono::steady_clock::now();
    double window = 0;
    int in_window = 0;
    if (write_files) std::filesystem::create_directories(cfg_.output_dir);
    while (step_ < until) {
      window += train_step();
      ++in_window;
      const bool log_now = step_ % cfg_.schedule.log_every == 0 || step_ == until;
      if (log_now) {
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log_.push_back({step_, window / in_window, last_grad_norm_, secs});
        if (write_files) append_log(log_.back());
        if (progress) {
          *progress << "step " << step_ << "/" << until << " loss " << log_.back().loss << " grad_norm "
                    << last_grad_norm_ << " (" << secs << " s)\n";
        }
        window = 0;
        in_window = 0;
      }
      if (write_files && cfg_.schedule.checkpoint_every > 0 && step_ % cfg_.schedule.checkpoint_every == 0) {
        save(checkpoint_path(step_));
      }
    }
    if (write_files) save(last_checkpoint_path());
  }

  void save(const std::string& path) { save_checkpoint(path, cfg_, step_, system_->params(), &adam_); }

  // Restores parameters, optimizer state and the step counter.
  void resume(const std::string& path) {
    const CheckpointHeader h = load_checkpoint(path, system_->params(), &adam_);
    step_ = h.step;
  }

  std::string checkpoint_path(long long step) const {
    return (std::filesystem::path(cfg_.output_dir) / ("checkpoint_" + std::to_string(step) + ".bin")).string();
  }
  std::string last_checkpoint_path() const {
    return (std::filesystem::path(cfg_.output_dir) / "checkpoint_last.bin").string();
  }

 private:
  void append_log(const LogEntry& e) {
    const auto path = std::filesystem::path(cfg_.output_dir) / "train_log.csv";
    const bool fresh = !std::filesystem::exists(path);
    std::ofstream out(path, std::ios::app);
    if (!out) throw IoError("cannot write " + path.string());
    if (fresh) out << "step,loss,grad_norm,seconds\n";
    char buf[128];
    std::snprintf(buf, sizeof buf, "%lld,%.8f,%.6f,%.3f\n", e.step, e.loss, e.grad_norm, e.seconds);
    out << buf;
  }

  RunConfig cfg_;
  std::unique_ptr<System> system_;
  nn::Adam<float> adam_;
  data::Dataset data_;
  data::BatchStream stream_;
  long long step_ = 0;
  double last_grad_norm_ = 0;
  std::vector<LogEntry> log_;
};

// Builds an inference system from a checkpoint.
inline std::unique_ptr<JsccSystem<float>> load_system(const std::string& path, RunConfig* cfg_out = nullptr) {
  const CheckpointHeader h = read_checkpoint_header(path);
  auto sys = std::make_unique<JsccSystem<float>>(h.config.system, h.config.seed);
  load_checkpoint<float>(path, sys->params(), nullptr);
  if (cfg_out) *cfg_out = h.config;
  return sys;
}

}  // namespace roijscc::harness
