#pragma once

// Checkpoint archive: magic, version, a JSON header (run config, step,
// parameter table), then float32 parameter values and Adam moments in
// header order. Little-endian.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "roijscc/harness/config.hpp"

namespace roijscc::harness {

inline constexpr char kCheckpointMagic[4] = {'R', 'J', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointHeader {
  RunConfig config;
  long long step = 0;
  long long optimizer_steps = 0;
  bool has_optimizer = false;
};

namespace detail {

template <class T>
void write_floats(std::ofstream& out, const nn::Mat<T>& m) {
  std::vector<float> buf(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.size(); ++i) buf[static_cast<std::size_t>(i)] = static_cast<float>(m.data()[i]);
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

template <class T>
void read_floats(std::ifstream& in, nn::Mat<T>& m, const std::string& path) {
  std::vector<float> buf(static_cast<std::size_t>(m.size()));
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!in) throw IoError("checkpoint " + path + " is truncated");
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(buf[static_cast<std::size_t>(i)]);
}

}  // namespace detail

// adam may be null (inference-only archive).
template <class T>
void save_checkpoint(const std::string& path, const RunConfig& cfg, long long step, const nn::ParamList<T>& params,
                     nn::Adam<T>* adam) {
  json header;
  header["config"] = config_to_json(cfg);
  header["step"] = step;
  header["optimizer_steps"] = adam ? adam->steps() : 0;
  header["has_optimizer"] = adam != nullptr;
  json table = json::array();
  for (const auto* p : params) table.push_back({{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}});
  header["params"] = table;
  const std::string text = header.dump();

  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint " + path);
    const std::uint64_t len = text.size();
    out.write(kCheckpointMagic, 4);
    out.write(reinterpret_cast<const char*>(&kCheckpointVersion), 4);
    out.write(reinterpret_cast<const char*>(&len), 8);
    out.write(text.data(), static_cast<std::streamsize>(len));
    for (const auto* p : params) detail::write_floats(out, p->value);
    if (adam) {
      for (const auto& m : adam->first_moments()) detail::write_floats(out, m);
      for (const auto& v : adam->second_moments()) detail::write_floats(out, v);
    }
    if (!out) throw IoError("write failed for checkpoint " + path);
  }
  std::filesystem::rename(tmp, path);
}

namespace detail {

inline json read_header(std::ifstream& in, const std::string& path) {
  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&len), 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0) throw IoError(path + " is not a checkpoint");
  if (version != kCheckpointVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
  if (len > (1u << 26)) throw IoError("checkpoint header too large");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw IoError("checkpoint " + path + " is truncated");
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw IoError("corrupt checkpoint header: " + std::string(e.what()));
  }
}

}  // namespace detail

inline CheckpointHeader read_checkpoint_header(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  const json h = detail::read_header(in, path);
  CheckpointHeader out;
  out.config = config_from_json(h.at("config"));
  out.step = h.at("step").get<long long>();
  out.optimizer_steps = h.at("optimizer_steps").get<long long>();
  out.has_optimizer = h.at("has_optimizer").get<bool>();
  return out;
}

// Loads values (and optimizer state when adam != null) into params, which
// must match the archived table name for name and shape for shape.
template <class T>
CheckpointHeader load_checkpoint(const std::string& path, const nn::ParamList<T>& params, nn::Adam<T>* adam) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  const json h = detail::read_header(in, path);
  const json& table = h.at("params");
  if (table.size() != params.size()) throw ConfigError("checkpoint parameter count does not match the model");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const json& e = table[i];
    if (e.at("name").get<std::string>() != params[i]->name || e.at("rows").get<long>() != params[i]->value.rows() ||
        e.at("cols").get<long>() != params[i]->value.cols()) {
      throw ConfigError("checkpoint parameter '" + e.at("name").get<std::string>() + "' does not match the model");
    }
  }
  // The payload length is fully determined by the table; catch truncation
  // before any parameter is overwritten.
  std::uint64_t floats = 0;
  for (const auto* p : params) floats += static_cast<std::uint64_t>(p->value.size());
  const std::uint64_t expected = floats * sizeof(float) * (h.at("has_optimizer").get<bool>() ? 3 : 1);
  const auto here = in.tellg();
  in.seekg(0, std::ios::end);
  const auto remaining = static_cast<std::uint64_t>(in.tellg() - here);
  in.seekg(here);
  if (remaining != expected) {
    throw IoError("checkpoint " + path + " has " + std::to_string(remaining) + " payload bytes, expected " +
                  std::to_string(expected));
  }
  for (auto* p : params) detail::read_floats(in, p->value, path);
  CheckpointHeader out;
  out.config = config_from_json(h.at("config"));
  out.step = h.at("step").get<long long>();
  out.optimizer_steps = h.at("optimizer_steps").get<long long>();
  out.has_optimizer = h.at("has_optimizer").get<bool>();
  if (adam) {
    if (!out.has_optimizer) throw ConfigError("checkpoint has no optimizer state to resume from");
    for (auto& m : adam->first_moments()) detail::read_floats(in, m, path);
    for (auto& v : adam->second_moments()) detail::read_floats(in, v, path);
    adam->set_steps(out.optimizer_steps);
  }
  return out;
}

}  // namespace roijscc::harness
