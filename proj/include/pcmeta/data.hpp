#pragma once

// Rooms, 1m x 1m blocks and the 9-column block features.
//
// Room file (one point per line, '#' starts a comment):
//   x y z r g b label_id
// File name `<room_type>_<index>.txt`, stored under `<dataset>/<area>/`.
// The class vocabulary lives in `<dataset>/classes.txt` as `label_id name`
// lines.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <fmt/os.h>

#include "pcmeta/error.hpp"
#include "pcmeta/tensor.hpp"

namespace pcmeta {

inline const std::vector<std::string>& s3dis_room_types() {
  static const std::vector<std::string> types{"office",   "conferenceRoom", "auditorium", "lobby",
                                              "lounge",   "hallway",        "copyRoom",   "pantry",
                                              "openspace", "storage",       "WC"};
  return types;
}

inline const std::vector<std::string>& s3dis_classes() {
  static const std::vector<std::string> classes{"ceiling", "floor", "wall",  "beam",     "column",
                                                "window",  "door",  "table", "chair",    "sofa",
                                                "bookcase", "board", "clutter"};
  return classes;
}

inline bool is_room_type(std::string_view name) {
  const auto& t = s3dis_room_types();
  return std::find(t.begin(), t.end(), name) != t.end();
}

struct ClassVocabulary {
  std::vector<std::string> names;

  [[nodiscard]] std::size_t size() const noexcept { return names.size(); }
  [[nodiscard]] int index_of(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return static_cast<int>(i);
    throw ValidationError("unknown class '" + std::string(name) + "'");
  }
  static ClassVocabulary s3dis() { return {s3dis_classes()}; }
  friend bool operator==(const ClassVocabulary&, const ClassVocabulary&) = default;
};

/// Ids must be 0..m-1, each exactly once, in any order.
inline ClassVocabulary load_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open class vocabulary " + path.string());
  std::map<int, std::string> entries;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    int id = 0;
    std::string name;
    if (!(fields >> id)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw ParseError("expected 'label_id class_name' in " + path.string(), lineno);
    }
    if (!(fields >> name)) throw ParseError("missing class name in " + path.string(), lineno);
    if (!entries.emplace(id, name).second) throw ParseError("duplicate class id " + std::to_string(id), lineno);
  }
  ClassVocabulary vocab;
  for (const auto& [id, name] : entries) {
    if (id != static_cast<int>(vocab.names.size())) {
      throw ValidationError("class ids in " + path.string() + " must be 0.." + std::to_string(entries.size() - 1));
    }
    vocab.names.push_back(name);
  }
  if (vocab.names.empty()) throw EmptyInputError("empty class vocabulary " + path.string());
  return vocab;
}

inline void write_vocabulary(const std::filesystem::path& path, const ClassVocabulary& vocab) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (std::size_t i = 0; i < vocab.size(); ++i) out << i << ' ' << vocab.names[i] << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

struct Point {
  double x = 0.0, y = 0.0, z = 0.0;
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct Room {
  std::string name;       ///< file stem, e.g. "office_3"
  std::string room_type;  ///< one of s3dis_room_types()
  std::vector<Point> points;
  std::vector<int> labels;

  [[nodiscard]] std::size_t size() const noexcept { return points.size(); }
  friend bool operator==(const Room&, const Room&) = default;
};

struct Area {
  std::string name;
  std::vector<Room> rooms;
  ClassVocabulary vocabulary;
};

struct Bounds {
  std::array<double, 3> min{};
  std::array<double, 3> max{};
};

inline Bounds bounds_of(const std::vector<Point>& points) {
  if (points.empty()) throw EmptyInputError("bounds of an empty point set");
  Bounds b{{points[0].x, points[0].y, points[0].z}, {points[0].x, points[0].y, points[0].z}};
  for (const auto& p : points) {
    const std::array<double, 3> v{p.x, p.y, p.z};
    for (int a = 0; a < 3; ++a) {
      b.min[a] = std::min(b.min[a], v[a]);
      b.max[a] = std::max(b.max[a], v[a]);
    }
  }
  return b;
}

/// Splits "conferenceRoom_2" into ("conferenceRoom", 2).
inline std::pair<std::string, int> parse_room_name(const std::string& stem) {
  const auto underscore = stem.rfind('_');
  if (underscore == std::string::npos || underscore == 0 || underscore + 1 == stem.size()) {
    throw ValidationError("room name '" + stem + "' is not <room_type>_<index>");
  }
  const std::string type = stem.substr(0, underscore);
  int index = 0;
  const char* first = stem.data() + underscore + 1;
  const char* last = stem.data() + stem.size();
  auto [ptr, ec] = std::from_chars(first, last, index);
  if (ec != std::errc() || ptr != last) throw ValidationError("room name '" + stem + "' has no numeric index");
  if (!is_room_type(type)) throw ValidationError("unknown room type '" + type + "' in " + stem);
  return {type, index};
}

namespace detail {

inline std::string_view next_field(std::string_view& rest) {
  const auto begin = rest.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) {
    rest = {};
    return {};
  }
  rest.remove_prefix(begin);
  const auto end = std::min(rest.find_first_of(" \t\r"), rest.size());
  auto field = rest.substr(0, end);
  rest.remove_prefix(end);
  return field;
}

template <class V>
bool parse_field(std::string_view field, V& out) {
  if (field.empty()) return false;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  return ec == std::errc() && ptr == field.data() + field.size();
}

}  // namespace detail

inline Room load_room(const std::filesystem::path& path, const ClassVocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open room file " + path.string());
  Room room;
  room.name = path.stem().string();
  room.room_type = parse_room_name(room.name).first;

  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    std::string_view rest(line);
    if (auto hash = rest.find('#'); hash != std::string_view::npos) rest = rest.substr(0, hash);
    if (rest.find_first_not_of(" \t\r") == std::string_view::npos) continue;

    std::array<double, 3> xyz{};
    std::array<int, 3> rgb{};
    int label = 0;
    for (auto& v : xyz)
      if (!detail::parse_field(detail::next_field(rest), v))
        throw ParseError("expected 'x y z r g b label' in " + path.string(), lineno);
    for (auto& v : rgb)
      if (!detail::parse_field(detail::next_field(rest), v))
        throw ParseError("expected integer colour in " + path.string(), lineno);
    if (!detail::parse_field(detail::next_field(rest), label))
      throw ParseError("expected integer label in " + path.string(), lineno);
    if (!detail::next_field(rest).empty()) throw ParseError("trailing fields in " + path.string(), lineno);

    for (double v : xyz)
      if (!std::isfinite(v))
        throw ValidationError(fmt::format("non-finite coordinate at {}:{}", path.string(), lineno));
    for (int v : rgb)
      if (v < 0 || v > 255)
        throw ValidationError(fmt::format("colour {} outside [0, 255] at {}:{}", v, path.string(), lineno));
    if (label < 0 || static_cast<std::size_t>(label) >= vocab.size())
      throw ValidationError(fmt::format("label {} not in the {}-class vocabulary at {}:{}", label, vocab.size(),
                                        path.string(), lineno));

    room.points.push_back({xyz[0], xyz[1], xyz[2], static_cast<std::uint8_t>(rgb[0]),
                           static_cast<std::uint8_t>(rgb[1]), static_cast<std::uint8_t>(rgb[2])});
    room.labels.push_back(label);
  }
  if (room.points.empty()) throw EmptyInputError("room file " + path.string() + " has no points");
  return room;
}

/// Coordinates are written with 4 decimals (0.1 mm).
inline void write_room(const std::filesystem::path& path, const Room& room) {
  try {
    auto out = fmt::output_file(path.string());
    for (std::size_t i = 0; i < room.size(); ++i) {
      const auto& p = room.points[i];
      out.print("{:.4f} {:.4f} {:.4f} {} {} {} {}\n", p.x, p.y, p.z, p.r, p.g, p.b, room.labels[i]);
    }
    out.close();
  } catch (const std::system_error& e) {
    throw IoError("cannot write room file " + path.string() + ": " + e.what());
  }
}

/// Rooms of one area directory, sorted by file name.
inline Area load_area(const std::filesystem::path& dir, const ClassVocabulary& vocab) {
  if (!std::filesystem::is_directory(dir)) throw IoError("area directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  Area area{dir.filename().string(), {}, vocab};
  for (const auto& f : files) area.rooms.push_back(load_room(f, vocab));
  if (area.rooms.empty()) throw EmptyInputError("no room files in " + dir.string());
  return area;
}

/// Every subdirectory of `root` is an area; `root/classes.txt` overrides the
/// default 13-class vocabulary. Pass `only` to restrict to named areas.
inline std::vector<Area> load_dataset(const std::filesystem::path& root, const std::vector<std::string>& only = {}) {
  if (!std::filesystem::is_directory(root)) throw IoError("dataset directory not found: " + root.string());
  const auto vocab_path = root / "classes.txt";
  const auto vocab = std::filesystem::exists(vocab_path) ? load_vocabulary(vocab_path) : ClassVocabulary::s3dis();
  std::vector<std::filesystem::path> dirs;
  for (const auto& entry : std::filesystem::directory_iterator(root))
    if (entry.is_directory()) dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  std::vector<Area> areas;
  for (const auto& name : only) {
    if (std::none_of(dirs.begin(), dirs.end(), [&](const auto& d) { return d.filename() == name; }))
      throw IoError("area '" + name + "' not found under " + root.string());
  }
  for (const auto& d : dirs) {
    if (!only.empty() && std::find(only.begin(), only.end(), d.filename().string()) == only.end()) continue;
    areas.push_back(load_area(d, vocab));
  }
  if (areas.empty()) throw EmptyInputError("no areas under " + root.string());
  return areas;
}

/// One cell of the XY grid: every point satisfies
/// i <= (x - x_min) / size < i + 1 and likewise for j. Blocks span the full
/// room height.
struct Block {
  std::string room;
  std::size_t i = 0, j = 0;
  double size = 1.0;
  std::array<double, 2> origin{};  ///< (x_min + i*size, y_min + j*size)
  std::vector<Point> points;
  std::vector<int> labels;

  [[nodiscard]] std::size_t point_count() const noexcept { return points.size(); }
  [[nodiscard]] std::array<double, 2> center() const noexcept {
    return {origin[0] + 0.5 * size, origin[1] + 0.5 * size};
  }
  friend bool operator==(const Block&, const Block&) = default;
};

/// Half-open grid anchored at the room's XY minimum; empty cells are omitted.
/// Blocks come back ordered by (i, j).
inline std::vector<Block> partition_blocks(const Room& room, double block_size = 1.0) {
  if (!(block_size > 0.0)) throw ContractError("block_size must be > 0");
  if (room.points.empty()) return {};
  const auto b = bounds_of(room.points);
  std::map<std::pair<std::size_t, std::size_t>, Block> cells;
  for (std::size_t p = 0; p < room.size(); ++p) {
    const auto& pt = room.points[p];
    const auto i = static_cast<std::size_t>(std::floor((pt.x - b.min[0]) / block_size));
    const auto j = static_cast<std::size_t>(std::floor((pt.y - b.min[1]) / block_size));
    auto [it, fresh] = cells.try_emplace({i, j});
    auto& block = it->second;
    if (fresh) {
      block.room = room.name;
      block.i = i;
      block.j = j;
      block.size = block_size;
      block.origin = {b.min[0] + static_cast<double>(i) * block_size, b.min[1] + static_cast<double>(j) * block_size};
    }
    block.points.push_back(pt);
    block.labels.push_back(room.labels[p]);
  }
  std::vector<Block> blocks;
  blocks.reserve(cells.size());
  for (auto& [key, block] : cells) blocks.push_back(std::move(block));
  return blocks;
}

inline constexpr std::size_t kFeatureColumns = 9;

/// [P x 9] rows of X Y Z R G B NX NY NZ: XY relative to the block centre (Z
/// unchanged), colour / 255, and coordinates normalised to [0, 1] over the room
/// extent. An axis with zero extent normalises to 0.5.
template <std::floating_point T>
Tensor<T> featurize(const Block& block, const Bounds& room) {
  Tensor<T> out(Shape{block.point_count(), kFeatureColumns});
  const auto c = block.center();
  std::array<double, 3> extent{};
  for (int a = 0; a < 3; ++a) extent[a] = room.max[a] - room.min[a];
  auto normalized = [&](double v, int a) {
    if (extent[a] <= 0.0) return 0.5;
    return std::clamp((v - room.min[a]) / extent[a], 0.0, 1.0);
  };
  for (std::size_t p = 0; p < block.point_count(); ++p) {
    const auto& pt = block.points[p];
    const double row[kFeatureColumns] = {pt.x - c[0],       pt.y - c[1],       pt.z,
                                         pt.r / 255.0,      pt.g / 255.0,      pt.b / 255.0,
                                         normalized(pt.x, 0), normalized(pt.y, 1), normalized(pt.z, 2)};
    for (std::size_t k = 0; k < kFeatureColumns; ++k) out(p, k) = static_cast<T>(row[k]);
  }
  return out;
}

template <std::floating_point T>
Tensor<T> featurize(const Block& block, const Room& room) {
  if (block.room != room.name) throw ContractError("block of " + block.room + " featurized against " + room.name);
  return featurize<T>(block, bounds_of(room.points));
}

/// Fixed-size copy of `block`. More than P points: P distinct points drawn
/// uniformly, kept in their original order. Fewer: every point once plus
/// P - count extra copies drawn uniformly with replacement.
inline Block resample_block(const Block& block, std::size_t P, std::mt19937_64& rng) {
  if (block.points.empty()) throw EmptyInputError("cannot resample empty block of " + block.room);
  if (P < 1) throw ContractError("points per block must be >= 1");
  const std::size_t n = block.point_count();
  std::vector<std::size_t> picks;
  if (n >= P) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t k = 0; k < P && n > P; ++k) {
      std::uniform_int_distribution<std::size_t> u(k, n - 1);
      std::swap(idx[k], idx[u(rng)]);
    }
    picks.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(P));
    std::sort(picks.begin(), picks.end());
  } else {
    picks.resize(n);
    std::iota(picks.begin(), picks.end(), 0);
    std::uniform_int_distribution<std::size_t> u(0, n - 1);
    while (picks.size() < P) picks.push_back(u(rng));
  }
  Block out = block;
  out.points.clear();
  out.labels.clear();
  for (auto k : picks) {
    out.points.push_back(block.points[k]);
    out.labels.push_back(block.labels[k]);
  }
  return out;
}

inline Block resample_block(const Block& block, std::size_t P, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return resample_block(block, P, rng);
}

}  // namespace pcmeta
