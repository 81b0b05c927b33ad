#pragma once

// Checkpoint container:
//
//   PCMETA-CKPT\n
//   <one-line JSON header>\n
//   <parameters as little-endian raw arrays, in header order>
//
// The header carries the format version, precision tag, network config,
// parameter names and shapes, and free-form metadata.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcmeta/error.hpp"
#include "pcmeta/params.hpp"
#include "pcmeta/pointnet.hpp"

namespace pcmeta {

inline constexpr std::string_view kCheckpointMagic = "PCMETA-CKPT";
inline constexpr int kCheckpointVersion = 1;

enum class Precision { float32, float64 };

inline std::string to_string(Precision p) { return p == Precision::float32 ? "float32" : "float64"; }

inline Precision parse_precision(const std::string& s) {
  if (s == "float32" || s == "32") return Precision::float32;
  if (s == "float64" || s == "64") return Precision::float64;
  throw ConfigError("unknown precision '" + s + "' (expected float32 or float64)");
}

template <std::floating_point T>
constexpr Precision precision_of() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? Precision::float32 : Precision::float64;
}

template <std::floating_point T>
struct Checkpoint {
  PointNetConfig config;
  ParamStore<T> params;
  nlohmann::json metadata = nlohmann::json::object();
};

namespace detail {

template <class U>
U byteswap_value(U v) {
  auto bytes = std::bit_cast<std::array<unsigned char, sizeof(U)>>(v);
  std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<U>(bytes);
}

inline std::string read_line(std::istream& in, const std::string& path) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("truncated checkpoint header in " + path);
  return line;
}

}  // namespace detail

template <std::floating_point T>
void save_checkpoint(const std::filesystem::path& path, const Checkpoint<T>& ckpt) {
  nlohmann::json header;
  header["format_version"] = kCheckpointVersion;
  header["precision"] = to_string(precision_of<T>());
  header["config"] = ckpt.config;
  header["metadata"] = ckpt.metadata;
  auto& entries = header["parameters"] = nlohmann::json::array();
  for (const auto& [name, t] : ckpt.params) {
    entries.push_back({{"name", name}, {"shape", {t.rows(), t.cols()}}});
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
  out << kCheckpointMagic << '\n' << header.dump() << '\n';
  for (const auto& [name, t] : ckpt.params) {
    if constexpr (std::endian::native == std::endian::little) {
      out.write(reinterpret_cast<const char*>(t.values().data()),
                static_cast<std::streamsize>(t.size() * sizeof(T)));
    } else {
      for (T v : t.values()) {
        const T swapped = detail::byteswap_value(v);
        out.write(reinterpret_cast<const char*>(&swapped), sizeof(T));
      }
    }
  }
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

/// Reads only the JSON header; useful to dispatch on precision.
inline nlohmann::json read_checkpoint_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  if (detail::read_line(in, path.string()) != kCheckpointMagic) {
    throw IoError("not a checkpoint file: " + path.string());
  }
  try {
    return nlohmann::json::parse(detail::read_line(in, path.string()));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt checkpoint header in " + path.string() + ": " + e.what());
  }
}

template <std::floating_point T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  if (detail::read_line(in, path.string()) != kCheckpointMagic) {
    throw IoError("not a checkpoint file: " + path.string());
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(detail::read_line(in, path.string()));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt checkpoint header in " + path.string() + ": " + e.what());
  }
  if (header.value("format_version", 0) != kCheckpointVersion) {
    throw IoError("unsupported checkpoint format version in " + path.string());
  }
  if (parse_precision(header.at("precision").get<std::string>()) != precision_of<T>()) {
    throw ConfigError("checkpoint " + path.string() + " stores " + header.at("precision").get<std::string>() +
                      " parameters");
  }

  Checkpoint<T> ckpt;
  ckpt.config = header.at("config").get<PointNetConfig>();
  ckpt.metadata = header.value("metadata", nlohmann::json::object());
  for (const auto& entry : header.at("parameters")) {
    const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 2) throw IoError("parameter shapes must be rank 2 in " + path.string());
    Tensor<T> t(Shape{shape[0], shape[1]});
    in.read(reinterpret_cast<char*>(t.values().data()), static_cast<std::streamsize>(t.size() * sizeof(T)));
    if (!in) throw IoError("truncated parameter data in " + path.string());
    if constexpr (std::endian::native != std::endian::little) {
      for (auto& v : t.values()) v = detail::byteswap_value(v);
    }
    ckpt.params.emplace(entry.at("name").get<std::string>(), std::move(t));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw IoError("trailing bytes after parameter data in " + path.string());
  }
  return ckpt;
}

}  // namespace pcmeta
