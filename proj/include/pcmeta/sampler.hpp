#pragma once

// N-way K-shot episode construction.
//
// A sample is one block of one room; its category is the room type
// (room_type mode) or the block's most frequent semantic class
// (semantic_composition mode). An episode draws n categories without
// replacement, then per category k support blocks and t*k further query
// blocks, all distinct.

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <ranges>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcmeta/data.hpp"
#include "pcmeta/error.hpp"
#include "pcmeta/rng.hpp"
#include "pcmeta/tensor.hpp"

namespace pcmeta {

enum class CategoryMode { room_type, semantic_composition };

inline std::string to_string(CategoryMode m) {
  return m == CategoryMode::room_type ? "room_type" : "semantic_composition";
}

inline CategoryMode parse_category_mode(const std::string& s) {
  if (s == "room_type") return CategoryMode::room_type;
  if (s == "semantic_composition") return CategoryMode::semantic_composition;
  throw ConfigError("unknown category mode '" + s + "' (expected room_type or semantic_composition)");
}

struct EpisodeSpec {
  std::size_t n = 2;  ///< ways
  std::size_t k = 6;  ///< shots
  std::size_t t = 1;  ///< query blocks per category = t * k
  CategoryMode mode = CategoryMode::room_type;

  void validate() const {
    if (n < 1 || k < 1 || t < 1) throw ConfigError("episode spec needs n, k, t >= 1");
  }
  [[nodiscard]] std::size_t per_category() const noexcept { return k + t * k; }
  friend bool operator==(const EpisodeSpec&, const EpisodeSpec&) = default;
};

inline void to_json(nlohmann::json& j, const EpisodeSpec& s) {
  j = {{"ways", s.n}, {"shots", s.k}, {"query_multiplier", s.t}, {"category_mode", to_string(s.mode)}};
}

inline void from_json(const nlohmann::json& j, EpisodeSpec& s) {
  const EpisodeSpec d;
  s.n = j.value("ways", d.n);
  s.k = j.value("shots", d.k);
  s.t = j.value("query_multiplier", d.t);
  s.mode = parse_category_mode(j.value("category_mode", to_string(d.mode)));
}

/// One candidate sample: a block plus where it came from.
struct Candidate {
  std::string area;
  std::string room;
  std::string category;
  Block block;
  Bounds room_bounds;
};

/// Candidates grouped by category. Categories are kept in name order and
/// candidates in (area, room, i, j) order, so indices are stable.
class CategoryIndex {
 public:
  CategoryIndex(std::vector<Candidate> candidates, CategoryMode mode) : mode_(mode) {
    if (candidates.empty()) throw EmptyInputError("category index has no samples");
    candidates_ = std::make_shared<const std::vector<Candidate>>(std::move(candidates));
    for (std::size_t c = 0; c < candidates_->size(); ++c) by_category_[(*candidates_)[c].category].push_back(c);
  }

  [[nodiscard]] CategoryMode mode() const noexcept { return mode_; }
  [[nodiscard]] const std::vector<Candidate>& candidates() const noexcept { return *candidates_; }
  [[nodiscard]] const Candidate& candidate(std::size_t id) const { return candidates_->at(id); }
  [[nodiscard]] const std::map<std::string, std::vector<std::size_t>>& categories() const noexcept {
    return by_category_;
  }
  [[nodiscard]] const std::vector<std::size_t>& members(const std::string& category) const {
    auto it = by_category_.find(category);
    if (it == by_category_.end()) throw ContractError("no category '" + category + "' in index");
    return it->second;
  }

  /// Categories with at least `needed` samples, in name order.
  [[nodiscard]] std::vector<std::string> eligible(std::size_t needed) const {
    std::vector<std::string> out;
    for (const auto& [name, ids] : by_category_)
      if (ids.size() >= needed) out.push_back(name);
    return out;
  }

  [[nodiscard]] std::size_t find(const std::string& area, const std::string& room, std::size_t i, std::size_t j) const {
    for (std::size_t c = 0; c < candidates_->size(); ++c) {
      const auto& x = (*candidates_)[c];
      if (x.area == area && x.room == room && x.block.i == i && x.block.j == j) return c;
    }
    throw ValidationError("no block (" + std::to_string(i) + ", " + std::to_string(j) + ") of " + area + "/" + room);
  }

 private:
  CategoryMode mode_;
  std::shared_ptr<const std::vector<Candidate>> candidates_;
  std::map<std::string, std::vector<std::size_t>> by_category_;
};

/// Most frequent label of a block; ties go to the lowest class id.
inline int dominant_label(const std::vector<int>& labels) {
  std::map<int, std::size_t> counts;
  for (int l : labels) ++counts[l];
  int best = -1;
  std::size_t best_count = 0;
  for (const auto& [l, c] : counts)
    if (c > best_count) best = l, best_count = c;
  return best;
}

inline CategoryIndex index_categories(const std::vector<Area>& areas, CategoryMode mode, double block_size = 1.0) {
  std::vector<Candidate> candidates;
  for (const auto& area : areas) {
    for (const auto& room : area.rooms) {
      if (room.points.empty()) continue;
      const auto bounds = bounds_of(room.points);
      for (auto& block : partition_blocks(room, block_size)) {
        std::string category = room.room_type;
        if (mode == CategoryMode::semantic_composition) {
          const auto l = static_cast<std::size_t>(dominant_label(block.labels));
          category = l < area.vocabulary.size() ? area.vocabulary.names[l] : std::to_string(l);
        }
        candidates.push_back({area.name, room.name, std::move(category), std::move(block), bounds});
      }
    }
  }
  return CategoryIndex(std::move(candidates), mode);
}

struct EpisodeSample {
  std::size_t candidate = 0;
  std::string category;
  std::uint64_t resample_seed = 0;
  friend bool operator==(const EpisodeSample&, const EpisodeSample&) = default;
};

struct Episode {
  std::vector<std::string> categories;  ///< V, in draw order
  std::vector<EpisodeSample> support;   ///< n*k, grouped by category
  std::vector<EpisodeSample> query;     ///< t*n*k, grouped by category
  friend bool operator==(const Episode&, const Episode&) = default;
};

namespace detail {

/// First `m` entries of a partial Fisher-Yates shuffle of `pool` (copied).
template <class V>
std::vector<V> draw_without_replacement(std::vector<V> pool, std::size_t m, std::mt19937_64& rng) {
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> u(i, pool.size() - 1);
    std::swap(pool[i], pool[u(rng)]);
  }
  pool.resize(m);
  return pool;
}

inline std::vector<std::string> check_capacity(const CategoryIndex& index, const EpisodeSpec& spec) {
  spec.validate();
  const std::size_t needed = spec.per_category();
  auto eligible = index.eligible(needed);
  if (eligible.size() < spec.n) {
    std::string shortfall;
    for (const auto& [name, ids] : index.categories()) {
      if (ids.size() < needed) shortfall += " " + name + " (" + std::to_string(ids.size()) + ")";
    }
    throw CapacityError(std::to_string(spec.n) + "-way episodes need " + std::to_string(spec.n) +
                        " categories with >= " + std::to_string(needed) + " blocks, found " +
                        std::to_string(eligible.size()) + "; short:" + shortfall);
  }
  return eligible;
}

}  // namespace detail

/// Categories too small for k + t*k distinct blocks are left out of the draw.
inline Episode sample_episode(const CategoryIndex& index, const EpisodeSpec& spec, std::mt19937_64& rng) {
  const auto eligible = detail::check_capacity(index, spec);
  Episode ep;
  ep.categories = detail::draw_without_replacement(eligible, spec.n, rng);
  for (const auto& category : ep.categories) {
    const auto picks = detail::draw_without_replacement(index.members(category), spec.per_category(), rng);
    for (std::size_t m = 0; m < picks.size(); ++m) {
      EpisodeSample s{picks[m], category, rng()};
      (m < spec.k ? ep.support : ep.query).push_back(std::move(s));
    }
  }
  return ep;
}

inline Episode sample_episode(const CategoryIndex& index, const EpisodeSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_episode(index, spec, rng);
}

/// `count` episodes, episode i drawn from sub-seed derive_seed(seed, {i}).
/// Episodes are produced on demand and any index can be requested directly.
class TaskDistribution {
 public:
  TaskDistribution(const CategoryIndex& index, EpisodeSpec spec, std::size_t count, std::uint64_t seed)
      : index_(&index), spec_(spec), count_(count), seed_(seed) {
    detail::check_capacity(index, spec);
  }

  [[nodiscard]] std::size_t size() const noexcept { return count_; }
  [[nodiscard]] const EpisodeSpec& spec() const noexcept { return spec_; }
  [[nodiscard]] const CategoryIndex& index() const noexcept { return *index_; }
  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }

  [[nodiscard]] Episode episode(std::size_t i) const {
    if (i >= count_) throw ContractError("episode " + std::to_string(i) + " of " + std::to_string(count_));
    return sample_episode(*index_, spec_, derive_seed(seed_, {i}));
  }

  [[nodiscard]] auto episodes() const {
    return std::views::iota(std::size_t{0}, count_) |
           std::views::transform([this](std::size_t i) { return episode(i); });
  }

 private:
  const CategoryIndex* index_;
  EpisodeSpec spec_;
  std::size_t count_;
  std::uint64_t seed_;
};

/// One network input: [P x 9] features and P labels.
template <std::floating_point T>
struct LabeledBlock {
  Tensor<T> features;
  std::vector<int> labels;
};

template <std::floating_point T>
struct Task {
  std::vector<LabeledBlock<T>> support;
  std::vector<LabeledBlock<T>> query;
};

template <std::floating_point T>
LabeledBlock<T> materialize(const CategoryIndex& index, const EpisodeSample& s, std::size_t points_per_block) {
  const auto& c = index.candidate(s.candidate);
  auto block = resample_block(c.block, points_per_block, s.resample_seed);
  return {featurize<T>(block, c.room_bounds), std::move(block.labels)};
}

template <std::floating_point T>
Task<T> materialize(const CategoryIndex& index, const Episode& ep, std::size_t points_per_block) {
  Task<T> task;
  for (const auto& s : ep.support) task.support.push_back(materialize<T>(index, s, points_per_block));
  for (const auto& s : ep.query) task.query.push_back(materialize<T>(index, s, points_per_block));
  return task;
}

// Episode manifest: every sample is recorded by (area, room, i, j,
// resample_seed) so a run can be replayed against a re-ingested dataset.

inline nlohmann::json episode_to_json(const CategoryIndex& index, const Episode& ep) {
  auto samples = [&](const std::vector<EpisodeSample>& v) {
    auto arr = nlohmann::json::array();
    for (const auto& s : v) {
      const auto& c = index.candidate(s.candidate);
      arr.push_back({{"area", c.area},
                     {"room", c.room},
                     {"block", {c.block.i, c.block.j}},
                     {"category", s.category},
                     {"resample_seed", s.resample_seed}});
    }
    return arr;
  };
  return {{"categories", ep.categories}, {"support", samples(ep.support)}, {"query", samples(ep.query)}};
}

inline Episode episode_from_json(const CategoryIndex& index, const nlohmann::json& j) {
  auto samples = [&](const nlohmann::json& arr) {
    std::vector<EpisodeSample> out;
    for (const auto& s : arr) {
      const auto ij = s.at("block").get<std::vector<std::size_t>>();
      if (ij.size() != 2) throw ValidationError("episode manifest block must be [i, j]");
      out.push_back({index.find(s.at("area").get<std::string>(), s.at("room").get<std::string>(), ij[0], ij[1]),
                     s.at("category").get<std::string>(), s.at("resample_seed").get<std::uint64_t>()});
    }
    return out;
  };
  try {
    return {j.at("categories").get<std::vector<std::string>>(), samples(j.at("support")), samples(j.at("query"))};
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed episode manifest: ") + e.what());
  }
}

inline nlohmann::json episode_manifest(const TaskDistribution& dist) {
  auto episodes = nlohmann::json::array();
  for (const auto& ep : dist.episodes()) episodes.push_back(episode_to_json(dist.index(), ep));
  return {{"spec", dist.spec()}, {"seed", dist.seed()}, {"episodes", std::move(episodes)}};
}

}  // namespace pcmeta
