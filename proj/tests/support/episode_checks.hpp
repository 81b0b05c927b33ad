#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "pcmeta/sampler.hpp"

namespace pcmeta::testing {

/// Every structural rule an episode must satisfy; returns the violations.
inline std::vector<std::string> episode_violations(const Episode& ep, const EpisodeSpec& spec) {
  std::vector<std::string> bad;
  if (ep.support.size() != spec.n * spec.k) bad.push_back("support size");
  if (ep.query.size() != spec.t * spec.n * spec.k) bad.push_back("query size");
  const std::set<std::string> cats(ep.categories.begin(), ep.categories.end());
  if (cats.size() != spec.n || ep.categories.size() != spec.n) bad.push_back("category count");
  std::map<std::string, std::size_t> in_support, in_query;
  for (const auto& s : ep.support) ++in_support[s.category];
  for (const auto& s : ep.query) ++in_query[s.category];
  for (const auto& c : cats) {
    if (in_support[c] != spec.k) bad.push_back("support balance for " + c);
    if (in_query[c] != spec.t * spec.k) bad.push_back("query balance for " + c);
  }
  if (in_support.size() != cats.size() || in_query.size() != cats.size()) bad.push_back("foreign category");
  std::set<std::size_t> ids;
  for (const auto& s : ep.support) ids.insert(s.candidate);
  if (ids.size() != ep.support.size()) bad.push_back("repeated support sample");
  for (const auto& s : ep.query) {
    if (!ids.insert(s.candidate).second) bad.push_back("sample shared between or within sets");
  }
  return bad;
}

/// Index with `per_category` one-point blocks in each listed category.
inline CategoryIndex toy_index(const std::map<std::string, std::size_t>& sizes) {
  std::vector<Candidate> cands;
  for (const auto& [cat, count] : sizes) {
    for (std::size_t b = 0; b < count; ++b) {
      Candidate c;
      c.area = "Area_1";
      c.room = cat + "_1";
      c.category = cat;
      c.block.room = c.room;
      c.block.i = b;
      c.block.points.push_back({static_cast<double>(b), 0.0, 0.0, 0, 0, 0});
      c.block.labels.push_back(0);
      c.room_bounds = bounds_of(c.block.points);
      cands.push_back(std::move(c));
    }
  }
  return CategoryIndex(std::move(cands), CategoryMode::room_type);
}

}  // namespace pcmeta::testing
