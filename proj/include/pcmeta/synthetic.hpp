#pragma once

// Procedural indoor areas with exact per-point labels.
//
// A room is an axis-aligned shell (floor, ceiling, four walls) plus boxes
// (furniture, columns, beams) and thin wall patches (doors, windows, boards).
// Every planar face receives round(area * density) uniformly placed points.
//
// Spec (JSON):
//   {
//     "density": 30, "color_noise": 6,
//     "class_colors": {"table": [150, 100, 60], ...},      // optional overrides
//     "templates": {"office": {...}, ...},                 // optional overrides
//     "areas": [{"name": "Area_1", "rooms": {"office": 3, "hallway": 2},
//                "color_shift": [0, 0, 0], "size_scale": 1.0}]
//   }
// Template:
//   {"size": [w, d, h], "jitter": 0.2, "density": 30,
//    "boxes":   [{"label": "table", "size": [1.4, 0.7, 0.75], "count": 2, "anchor": "floor"}],
//    "patches": [{"label": "door", "size": [0.9, 2.1], "z": 0.0, "count": 1}]}
// Box anchors: floor, ceiling, wall (on the floor, flush with a wall). A box
// height of 0 means full room height.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcmeta/data.hpp"
#include "pcmeta/error.hpp"
#include "pcmeta/rng.hpp"

namespace pcmeta {

struct BoxTemplate {
  std::string label;
  std::array<double, 3> size{};
  int count = 1;
  std::string anchor = "floor";
};

struct PatchTemplate {
  std::string label;
  std::array<double, 2> size{};  ///< width along the wall, height
  double z = 0.0;
  int count = 1;
};

struct RoomTemplate {
  std::array<double, 3> size{4.0, 3.0, 3.0};
  double jitter = 0.0;  ///< each extent scaled by U(1 - jitter, 1 + jitter)
  double density = 0.0; ///< 0 means the spec-wide density
  std::vector<BoxTemplate> boxes;
  std::vector<PatchTemplate> patches;
};

struct AreaSpec {
  std::string name;
  std::vector<std::pair<std::string, int>> rooms;  ///< room type, count; in spec order
  std::array<int, 3> color_shift{};
  double size_scale = 1.0;
};

struct SyntheticSpec {
  double density = 30.0;  ///< points per square metre
  double color_noise = 6.0;
  ClassVocabulary vocabulary = ClassVocabulary::s3dis();
  std::map<std::string, std::array<int, 3>> class_colors;
  std::map<std::string, RoomTemplate> templates;
  std::vector<AreaSpec> areas;
};

inline std::map<std::string, std::array<int, 3>> default_class_colors() {
  return {{"ceiling", {225, 225, 215}}, {"floor", {120, 95, 70}},  {"wall", {190, 185, 170}},
          {"beam", {160, 160, 60}},     {"column", {100, 140, 160}}, {"window", {90, 170, 230}},
          {"door", {150, 60, 40}},      {"table", {200, 130, 40}},  {"chair", {40, 120, 60}},
          {"sofa", {120, 40, 130}},     {"bookcase", {70, 50, 30}}, {"board", {245, 245, 250}},
          {"clutter", {60, 60, 60}}};
}

inline std::map<std::string, RoomTemplate> default_room_templates() {
  using B = BoxTemplate;
  using P = PatchTemplate;
  std::map<std::string, RoomTemplate> t;
  t["office"] = {{4.5, 3.5, 3.0}, 0.25, 0.0,
                 {B{"table", {1.4, 0.7, 0.75}, 2, "floor"}, B{"chair", {0.5, 0.5, 0.9}, 3, "floor"},
                  B{"bookcase", {1.0, 0.4, 2.0}, 1, "wall"}, B{"clutter", {0.4, 0.3, 0.3}, 2, "floor"}},
                 {P{"window", {1.5, 1.2}, 0.9, 1}, P{"door", {0.9, 2.1}, 0.0, 1}, P{"board", {1.8, 1.1}, 1.0, 1}}};
  t["conferenceRoom"] = {{7.0, 5.0, 3.0}, 0.2, 0.0,
                         {B{"table", {3.5, 1.4, 0.75}, 1, "floor"}, B{"chair", {0.5, 0.5, 0.9}, 8, "floor"},
                          B{"clutter", {0.5, 0.4, 0.4}, 1, "floor"}},
                         {P{"board", {2.5, 1.2}, 0.9, 1}, P{"window", {1.5, 1.2}, 0.9, 2}, P{"door", {0.9, 2.1}, 0.0, 1}}};
  t["auditorium"] = {{12.0, 10.0, 5.0}, 0.1, 0.0,
                     {B{"chair", {0.5, 0.5, 0.9}, 30, "floor"}, B{"column", {0.5, 0.5, 0.0}, 2, "wall"}},
                     {P{"door", {1.6, 2.2}, 0.0, 2}, P{"board", {4.0, 2.0}, 1.0, 1}}};
  t["lobby"] = {{8.0, 6.0, 4.0}, 0.2, 0.0,
                {B{"sofa", {2.0, 0.9, 0.8}, 2, "floor"}, B{"column", {0.5, 0.5, 0.0}, 2, "floor"},
                 B{"clutter", {0.5, 0.5, 0.6}, 2, "floor"}},
                {P{"door", {1.6, 2.2}, 0.0, 2}, P{"window", {2.0, 1.8}, 0.8, 2}}};
  t["lounge"] = {{6.0, 5.0, 3.0}, 0.2, 0.0,
                 {B{"sofa", {2.0, 0.9, 0.8}, 3, "floor"}, B{"table", {1.0, 0.6, 0.45}, 1, "floor"},
                  B{"clutter", {0.4, 0.4, 0.5}, 2, "floor"}},
                 {P{"window", {1.5, 1.2}, 0.9, 2}, P{"door", {0.9, 2.1}, 0.0, 1}}};
  t["hallway"] = {{10.0, 2.2, 3.0}, 0.3, 0.0,
                  {B{"beam", {0.3, 2.2, 0.4}, 2, "ceiling"}, B{"column", {0.4, 0.4, 0.0}, 1, "wall"},
                   B{"clutter", {0.4, 0.4, 0.8}, 1, "wall"}},
                  {P{"door", {0.9, 2.1}, 0.0, 3}}};
  t["copyRoom"] = {{3.0, 3.0, 3.0}, 0.2, 0.0,
                   {B{"clutter", {1.0, 0.7, 1.0}, 2, "wall"}, B{"bookcase", {1.0, 0.4, 1.8}, 1, "wall"}},
                   {P{"door", {0.9, 2.1}, 0.0, 1}}};
  t["pantry"] = {{3.5, 2.5, 3.0}, 0.2, 0.0,
                 {B{"table", {1.2, 0.6, 0.9}, 1, "wall"}, B{"clutter", {0.3, 0.3, 0.4}, 3, "floor"},
                  B{"bookcase", {1.2, 0.5, 2.0}, 1, "wall"}},
                 {P{"door", {0.9, 2.1}, 0.0, 1}, P{"window", {1.0, 1.0}, 1.1, 1}}};
  t["openspace"] = {{10.0, 8.0, 3.5}, 0.15, 0.0,
                    {B{"table", {1.6, 0.8, 0.75}, 4, "floor"}, B{"chair", {0.5, 0.5, 0.9}, 8, "floor"},
                     B{"sofa", {2.0, 0.9, 0.8}, 1, "floor"}, B{"column", {0.5, 0.5, 0.0}, 2, "floor"}},
                    {P{"window", {2.0, 1.5}, 0.9, 3}, P{"door", {1.2, 2.2}, 0.0, 1}}};
  t["storage"] = {{3.0, 2.5, 3.0}, 0.2, 0.0,
                  {B{"bookcase", {1.0, 0.5, 2.2}, 3, "wall"}, B{"clutter", {0.5, 0.5, 0.5}, 4, "floor"}},
                  {P{"door", {0.9, 2.1}, 0.0, 1}}};
  t["WC"] = {{3.0, 2.5, 3.0}, 0.2, 0.0,
             {B{"clutter", {0.6, 0.5, 0.8}, 3, "wall"}, B{"clutter", {0.9, 0.1, 2.0}, 1, "floor"}},
             {P{"door", {0.8, 2.1}, 0.0, 1}, P{"board", {0.6, 0.8}, 1.2, 1}}};
  return t;
}

namespace detail {

template <std::size_t N>
std::array<double, N> json_reals(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.size() != N) throw ConfigError(std::string(what) + " must be an array of " + std::to_string(N));
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    if (!j[i].is_number()) throw ConfigError(std::string(what) + " must be numeric");
    out[i] = j[i].get<double>();
  }
  return out;
}

inline RoomTemplate parse_template(const nlohmann::json& j, RoomTemplate t) {
  if (j.contains("size")) t.size = json_reals<3>(j["size"], "template size");
  t.jitter = j.value("jitter", t.jitter);
  t.density = j.value("density", t.density);
  if (j.contains("boxes")) {
    t.boxes.clear();
    for (const auto& b : j["boxes"]) {
      t.boxes.push_back({b.at("label").get<std::string>(), json_reals<3>(b.at("size"), "box size"),
                         b.value("count", 1), b.value("anchor", std::string("floor"))});
    }
  }
  if (j.contains("patches")) {
    t.patches.clear();
    for (const auto& p : j["patches"]) {
      t.patches.push_back({p.at("label").get<std::string>(), json_reals<2>(p.at("size"), "patch size"),
                           p.value("z", 0.0), p.value("count", 1)});
    }
  }
  return t;
}

}  // namespace detail

/// Checks labels, room types and extents; throws ConfigError.
inline void validate(const SyntheticSpec& spec) {
  if (!(spec.density > 0.0)) throw ConfigError("density must be > 0");
  if (spec.color_noise < 0.0) throw ConfigError("color_noise must be >= 0");
  auto known_label = [&](const std::string& l) {
    const auto& n = spec.vocabulary.names;
    if (std::find(n.begin(), n.end(), l) == n.end()) throw ConfigError("unknown class label '" + l + "'");
    if (!spec.class_colors.contains(l)) throw ConfigError("no colour for class '" + l + "'");
  };
  for (const auto& l : {"floor", "ceiling", "wall"}) known_label(l);
  for (const auto& [type, t] : spec.templates) {
    if (!is_room_type(type)) throw ConfigError("unknown room type '" + type + "'");
    for (double s : t.size)
      if (!(s > 0.0)) throw ConfigError("room size for " + type + " must be positive");
    if (t.jitter < 0.0 || t.jitter >= 1.0) throw ConfigError("jitter for " + type + " must be in [0, 1)");
    if (t.density < 0.0) throw ConfigError("density for " + type + " must be >= 0");
    for (const auto& b : t.boxes) {
      known_label(b.label);
      if (b.count < 0 || b.size[0] <= 0.0 || b.size[1] <= 0.0 || b.size[2] < 0.0)
        throw ConfigError("bad box '" + b.label + "' in " + type);
      if (b.anchor != "floor" && b.anchor != "ceiling" && b.anchor != "wall")
        throw ConfigError("box anchor must be floor, ceiling or wall (got '" + b.anchor + "')");
    }
    for (const auto& p : t.patches) {
      known_label(p.label);
      if (p.count < 0 || p.size[0] <= 0.0 || p.size[1] <= 0.0 || p.z < 0.0)
        throw ConfigError("bad patch '" + p.label + "' in " + type);
    }
  }
  if (spec.areas.empty()) throw ConfigError("synthetic spec lists no areas");
  for (const auto& a : spec.areas) {
    if (a.name.empty() || a.name.find('/') != std::string::npos) throw ConfigError("bad area name '" + a.name + "'");
    if (!(a.size_scale > 0.0)) throw ConfigError("size_scale must be > 0 in " + a.name);
    for (const auto& [type, count] : a.rooms) {
      if (!spec.templates.contains(type)) throw ConfigError("no template for room type '" + type + "' in " + a.name);
      if (count < 0) throw ConfigError("negative room count in " + a.name);
    }
  }
}

inline SyntheticSpec parse_synthetic_spec(const nlohmann::json& j) {
  SyntheticSpec spec;
  spec.class_colors = default_class_colors();
  spec.templates = default_room_templates();
  try {
    spec.density = j.value("density", spec.density);
    spec.color_noise = j.value("color_noise", spec.color_noise);
    if (j.contains("classes")) spec.vocabulary.names = j["classes"].get<std::vector<std::string>>();
    if (j.contains("class_colors")) {
      for (const auto& [name, c] : j["class_colors"].items()) {
        const auto rgb = detail::json_reals<3>(c, "class colour");
        spec.class_colors[name] = {static_cast<int>(rgb[0]), static_cast<int>(rgb[1]), static_cast<int>(rgb[2])};
      }
    }
    if (j.contains("templates")) {
      for (const auto& [type, t] : j["templates"].items()) {
        const auto base = spec.templates.contains(type) ? spec.templates[type] : RoomTemplate{};
        spec.templates[type] = detail::parse_template(t, base);
      }
    }
    for (const auto& a : j.at("areas")) {
      AreaSpec area;
      area.name = a.at("name").get<std::string>();
      area.size_scale = a.value("size_scale", 1.0);
      if (a.contains("color_shift")) {
        const auto s = detail::json_reals<3>(a["color_shift"], "color_shift");
        area.color_shift = {static_cast<int>(s[0]), static_cast<int>(s[1]), static_cast<int>(s[2])};
      }
      // Room order follows the vocabulary of room types so that JSON key
      // order never affects the output.
      const auto& rooms = a.at("rooms");
      for (const auto& [type, count] : rooms.items()) {
        if (!is_room_type(type)) throw ConfigError("unknown room type '" + type + "' in " + area.name);
      }
      for (const auto& type : s3dis_room_types())
        if (rooms.contains(type)) area.rooms.emplace_back(type, rooms[type].get<int>());
      spec.areas.push_back(std::move(area));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed synthetic spec: ") + e.what());
  }
  validate(spec);
  return spec;
}

inline SyntheticSpec load_synthetic_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open synthetic spec " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("synthetic spec " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_synthetic_spec(j);
}

/// One sampled planar face: origin + a*u + b*v for a, b in [0, 1).
struct SurfaceRecord {
  std::string label;
  double area = 0.0;
  std::size_t count = 0;
};

namespace detail {

class RoomBuilder {
 public:
  RoomBuilder(const SyntheticSpec& spec, const AreaSpec& area, double density, std::mt19937_64& rng,
              std::vector<SurfaceRecord>* log)
      : spec_(spec), area_(area), density_(density), rng_(rng), log_(log) {}

  void face(const std::string& label, std::array<double, 3> origin, std::array<double, 3> u,
            std::array<double, 3> v) {
    auto norm = [](const std::array<double, 3>& w) { return std::sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2]); };
    const double area = norm(u) * norm(v);
    const auto count = static_cast<std::size_t>(std::llround(area * density_));
    const int id = spec_.vocabulary.index_of(label);
    const auto base = spec_.class_colors.at(label);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, spec_.color_noise);
    auto channel = [&](int c) {
      const double v = base[c] + area_.color_shift[c] + (spec_.color_noise > 0.0 ? noise(rng_) : 0.0);
      return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    };
    for (std::size_t k = 0; k < count; ++k) {
      const double a = unit(rng_), b = unit(rng_);
      Point p;
      p.x = quantize(origin[0] + a * u[0] + b * v[0]);
      p.y = quantize(origin[1] + a * u[1] + b * v[1]);
      p.z = quantize(origin[2] + a * u[2] + b * v[2]);
      p.r = channel(0);
      p.g = channel(1);
      p.b = channel(2);
      room.points.push_back(p);
      room.labels.push_back(id);
    }
    if (log_) log_->push_back({label, area, count});
  }

  /// Five visible faces of an axis-aligned box; the face touching the floor
  /// (or ceiling) is skipped.
  void box(const std::string& label, std::array<double, 3> lo, std::array<double, 3> s, bool hanging) {
    const double x = lo[0], y = lo[1], z = lo[2];
    if (hanging) {
      face(label, {x, y, z}, {s[0], 0, 0}, {0, s[1], 0});
    } else {
      face(label, {x, y, z + s[2]}, {s[0], 0, 0}, {0, s[1], 0});
    }
    face(label, {x, y, z}, {s[0], 0, 0}, {0, 0, s[2]});
    face(label, {x, y + s[1], z}, {s[0], 0, 0}, {0, 0, s[2]});
    face(label, {x, y, z}, {0, s[1], 0}, {0, 0, s[2]});
    face(label, {x + s[0], y, z}, {0, s[1], 0}, {0, 0, s[2]});
  }

  Room room;

 private:
  static double quantize(double v) { return std::round(v * 1e4) / 1e4; }

  const SyntheticSpec& spec_;
  const AreaSpec& area_;
  double density_;
  std::mt19937_64& rng_;
  std::vector<SurfaceRecord>* log_;
};

}  // namespace detail

/// One room of type `type` whose XY footprint starts at `offset_x`. `log`, if
/// given, receives one record per sampled face.
inline Room generate_room(const SyntheticSpec& spec, const AreaSpec& area, const std::string& type, int index,
                          double offset_x, std::uint64_t seed, std::vector<SurfaceRecord>* log = nullptr) {
  const auto& t = spec.templates.at(type);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::array<double, 3> size{};
  for (int a = 0; a < 3; ++a) size[a] = t.size[a] * area.size_scale * (1.0 + t.jitter * (2.0 * unit(rng) - 1.0));
  const double W = size[0], D = size[1], H = size[2];
  const double x0 = offset_x;

  detail::RoomBuilder b(spec, area, t.density > 0.0 ? t.density : spec.density, rng, log);
  b.room.name = type + "_" + std::to_string(index);
  b.room.room_type = type;

  b.face("floor", {x0, 0, 0}, {W, 0, 0}, {0, D, 0});
  b.face("ceiling", {x0, 0, H}, {W, 0, 0}, {0, D, 0});
  b.face("wall", {x0, 0, 0}, {W, 0, 0}, {0, 0, H});
  b.face("wall", {x0, D, 0}, {W, 0, 0}, {0, 0, H});
  b.face("wall", {x0, 0, 0}, {0, D, 0}, {0, 0, H});
  b.face("wall", {x0 + W, 0, 0}, {0, D, 0}, {0, 0, H});

  for (const auto& box : t.boxes) {
    for (int n = 0; n < box.count; ++n) {
      std::array<double, 3> s = box.size;
      if (unit(rng) < 0.5) std::swap(s[0], s[1]);
      if (s[2] == 0.0) s[2] = H;
      s[0] = std::min(s[0], W);
      s[1] = std::min(s[1], D);
      s[2] = std::min(s[2], H);
      std::array<double, 3> lo{x0 + unit(rng) * (W - s[0]), unit(rng) * (D - s[1]), 0.0};
      if (box.anchor == "ceiling") lo[2] = H - s[2];
      if (box.anchor == "wall") {
        switch (static_cast<int>(unit(rng) * 4.0)) {
          case 0: lo[0] = x0; break;
          case 1: lo[0] = x0 + W - s[0]; break;
          case 2: lo[1] = 0.0; break;
          default: lo[1] = D - s[1]; break;
        }
      }
      b.box(box.label, lo, s, box.anchor == "ceiling");
    }
  }

  constexpr double inset = 0.02;
  for (const auto& patch : t.patches) {
    for (int n = 0; n < patch.count; ++n) {
      const int wall = static_cast<int>(unit(rng) * 4.0) % 4;
      const double along = wall < 2 ? W : D;
      const double w = std::min(patch.size[0], along);
      const double h = std::min(patch.size[1], H - std::min(patch.z, H));
      const double start = unit(rng) * (along - w);
      switch (wall) {
        case 0: b.face(patch.label, {x0 + start, inset, patch.z}, {w, 0, 0}, {0, 0, h}); break;
        case 1: b.face(patch.label, {x0 + start, D - inset, patch.z}, {w, 0, 0}, {0, 0, h}); break;
        case 2: b.face(patch.label, {x0 + inset, start, patch.z}, {0, w, 0}, {0, 0, h}); break;
        default: b.face(patch.label, {x0 + W - inset, start, patch.z}, {0, w, 0}, {0, 0, h}); break;
      }
    }
  }
  return std::move(b.room);
}

/// Rooms are laid out side by side along x with a 1 m gap; every room draws
/// from its own sub-seed of (seed, area index, room ordinal).
inline Area generate_synthetic_area(const SyntheticSpec& spec, std::size_t area_index, std::uint64_t seed) {
  const auto& a = spec.areas.at(area_index);
  Area area{a.name, {}, spec.vocabulary};
  double offset = 0.0;
  std::uint64_t ordinal = 0;
  for (const auto& [type, count] : a.rooms) {
    for (int n = 1; n <= count; ++n) {
      auto room = generate_room(spec, a, type, n, offset, derive_seed(seed, {area_index, ordinal++}));
      if (room.points.empty()) throw ConfigError("room " + room.name + " in " + a.name + " produced no points");
      offset = bounds_of(room.points).max[0] + 1.0;
      area.rooms.push_back(std::move(room));
    }
  }
  return area;
}

inline std::vector<Area> generate_synthetic_dataset(const SyntheticSpec& spec, std::uint64_t seed) {
  std::vector<Area> areas;
  for (std::size_t i = 0; i < spec.areas.size(); ++i) areas.push_back(generate_synthetic_area(spec, i, seed));
  return areas;
}

/// Writes `root/classes.txt` and `root/<area>/<room>.txt`.
inline void write_dataset(const std::filesystem::path& root, const std::vector<Area>& areas) {
  std::error_code ec;
  std::filesystem::create_directories(root, ec);
  if (ec) throw IoError("cannot create " + root.string() + ": " + ec.message());
  if (!areas.empty()) write_vocabulary(root / "classes.txt", areas.front().vocabulary);
  for (const auto& area : areas) {
    const auto dir = root / area.name;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    for (const auto& room : area.rooms) write_room(dir / (room.name + ".txt"), room);
  }
}

}  // namespace pcmeta
