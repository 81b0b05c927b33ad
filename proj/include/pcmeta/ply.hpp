#pragma once

// ASCII PLY 1.0 output: one vertex per point with float x/y/z and uchar
// red/green/blue.

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <fmt/format.h>
#include <fmt/os.h>

#include "pcmeta/data.hpp"
#include "pcmeta/error.hpp"
#include "pcmeta/synthetic.hpp"

namespace pcmeta {

using Rgb = std::array<std::uint8_t, 3>;
using Palette = std::map<int, Rgb>;

/// Class colours of the synthetic generator, keyed by vocabulary index.
/// Classes without a known colour are left out.
inline Palette default_palette(const ClassVocabulary& vocab) {
  const auto colors = default_class_colors();
  Palette p;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    if (auto it = colors.find(vocab.names[i]); it != colors.end()) {
      const auto& c = it->second;
      p[static_cast<int>(i)] = {static_cast<std::uint8_t>(c[0]), static_cast<std::uint8_t>(c[1]),
                                static_cast<std::uint8_t>(c[2])};
    }
  }
  return p;
}

/// Text file of `class_id r g b` lines; '#' comments allowed.
inline Palette load_palette(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open palette " + path.string());
  Palette p;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    int id = 0, r = 0, g = 0, b = 0;
    std::string extra;
    if (!(fields >> id >> r >> g >> b) || (fields >> extra))
      throw ParseError("expected 'class_id r g b' in " + path.string(), lineno);
    for (int v : {r, g, b})
      if (v < 0 || v > 255) throw ParseError("palette colour outside [0, 255] in " + path.string(), lineno);
    p[id] = {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)};
  }
  return p;
}

inline void write_ply(const std::filesystem::path& path, std::span<const Point> points, std::span<const Rgb> colors) {
  if (points.size() != colors.size()) {
    throw DimensionError(fmt::format("write_ply: {} points but {} colours", points.size(), colors.size()));
  }
  try {
    auto out = fmt::output_file(path.string());
    out.print("ply\nformat ascii 1.0\nelement vertex {}\n", points.size());
    out.print("property float x\nproperty float y\nproperty float z\n");
    out.print("property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n");
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto& p = points[i];
      out.print("{} {} {} {} {} {}\n", static_cast<float>(p.x), static_cast<float>(p.y), static_cast<float>(p.z),
                colors[i][0], colors[i][1], colors[i][2]);
    }
    out.close();
  } catch (const std::system_error& e) {
    throw IoError("cannot write " + path.string() + ": " + e.what());
  }
}

/// Colours each point of `block` by `labels` through `palette`.
inline void export_ply(const Block& block, std::span<const int> labels, const Palette& palette,
                       const std::filesystem::path& path) {
  if (labels.size() != block.point_count()) {
    throw DimensionError(fmt::format("export_ply: {} labels for {} points", labels.size(), block.point_count()));
  }
  std::vector<Rgb> colors;
  colors.reserve(labels.size());
  for (int l : labels) {
    auto it = palette.find(l);
    if (it == palette.end()) throw ConfigError("palette has no colour for class " + std::to_string(l));
    colors.push_back(it->second);
  }
  write_ply(path, block.points, colors);
}

/// Vertex count declared in a PLY header.
inline std::size_t ply_vertex_count(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "ply") throw IoError(path.string() + " is not a PLY file");
  while (std::getline(in, line) && line != "end_header") {
    std::istringstream fields(line);
    std::string keyword, element;
    std::size_t count = 0;
    if (fields >> keyword >> element >> count && keyword == "element" && element == "vertex") return count;
  }
  throw IoError(path.string() + " declares no vertex element");
}

}  // namespace pcmeta
