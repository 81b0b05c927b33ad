#include <gtest/gtest.h>

#include <cmath>

#include "pcmeta/sampler.hpp"
#include "pcmeta/synthetic.hpp"
#include "support/episode_checks.hpp"

namespace pcmeta {
namespace {

using testing::episode_violations;
using testing::toy_index;

TEST(IndexCategories, RoomTypesOfArea) {
  const auto spec = parse_synthetic_spec(
      nlohmann::json::parse(R"({"density": 5, "areas": [{"name": "A", "rooms": {"office": 2, "hallway": 1}}]})"));
  const auto areas = generate_synthetic_dataset(spec, 1);
  const auto index = index_categories(areas, CategoryMode::room_type);
  ASSERT_EQ(index.categories().size(), 2u);

  std::size_t office_blocks = 0;
  for (const auto& room : areas[0].rooms)
    if (room.room_type == "office") office_blocks += partition_blocks(room).size();
  const auto& office = index.members("office");
  EXPECT_EQ(office.size(), office_blocks);
  for (auto id : office) EXPECT_EQ(index.candidate(id).room.rfind("office_", 0), 0u);
}

TEST(IndexCategories, FirstAreaOfTheS3disTableHasSixRoomTypes) {
  // Room counts of Area 1 in the S3DIS statistics table.
  const auto spec = parse_synthetic_spec(nlohmann::json::parse(R"({"density": 2, "areas": [{"name": "Area_1",
      "rooms": {"office": 31, "conferenceRoom": 2, "hallway": 8, "copyRoom": 1, "pantry": 1, "WC": 1}}]})"));
  const auto areas = generate_synthetic_dataset(spec, 4);
  EXPECT_EQ(areas[0].rooms.size(), 44u);
  const auto index = index_categories(areas, CategoryMode::room_type);
  std::vector<std::string> names;
  for (const auto& [name, ids] : index.categories()) names.push_back(name);
  EXPECT_EQ(names, (std::vector<std::string>{"WC", "conferenceRoom", "copyRoom", "hallway", "office", "pantry"}));
}

TEST(IndexCategories, SemanticCompositionUsesDominantClass) {
  Area area{"A", {}, ClassVocabulary::s3dis()};
  area.rooms.push_back({"office_1", "office", {{0.1, 0.1, 0, 0, 0, 0}, {0.2, 0.2, 0, 0, 0, 0}, {0.3, 0.3, 0, 0, 0, 0},
                                               {1.5, 0.1, 0, 0, 0, 0}},
                        {7, 7, 8, 2}});
  const auto index = index_categories({area}, CategoryMode::semantic_composition);
  EXPECT_EQ(index.members("table").size(), 1u);
  EXPECT_EQ(index.members("wall").size(), 1u);
  EXPECT_EQ(dominant_label({3, 1, 1, 3}), 1);
}

TEST(IndexCategories, EmptyDatasetIsAnError) {
  EXPECT_THROW(index_categories({}, CategoryMode::room_type), EmptyInputError);
}

TEST(SampleEpisode, TwoWaySixShotSizes) {
  const auto index = toy_index({{"a", 12}, {"b", 20}, {"c", 30}});
  const EpisodeSpec spec{2, 6, 1, CategoryMode::room_type};
  const auto ep = sample_episode(index, spec, 5);
  EXPECT_EQ(ep.support.size(), 12u);
  EXPECT_EQ(ep.query.size(), 12u);
  EXPECT_TRUE(episode_violations(ep, spec).empty());
}

TEST(SampleEpisode, ForcedDisjointness) {
  const auto index = toy_index({{"only", 2}});
  const auto ep = sample_episode(index, EpisodeSpec{1, 1, 1, CategoryMode::room_type}, 0);
  ASSERT_EQ(ep.support.size(), 1u);
  ASSERT_EQ(ep.query.size(), 1u);
  EXPECT_NE(ep.support[0].candidate, ep.query[0].candidate);
}

TEST(SampleEpisode, NoCollisionsOverThousandEpisodes) {
  const auto index = toy_index({{"a", 13}, {"b", 14}, {"c", 15}, {"d", 40}});
  const EpisodeSpec spec{3, 4, 2, CategoryMode::room_type};
  std::mt19937_64 rng(8);
  for (int e = 0; e < 1000; ++e) {
    const auto ep = sample_episode(index, spec, rng);
    const auto bad = episode_violations(ep, spec);
    ASSERT_TRUE(bad.empty()) << "episode " << e << ": " << bad.front();
  }
}

TEST(SampleEpisode, SmallCategoriesAreExcluded) {
  const auto index = toy_index({{"big", 30}, {"tiny", 3}, {"mid", 12}});
  const EpisodeSpec spec{2, 6, 1, CategoryMode::room_type};
  std::mt19937_64 rng(1);
  for (int e = 0; e < 50; ++e) {
    const auto ep = sample_episode(index, spec, rng);
    for (const auto& c : ep.categories) EXPECT_NE(c, "tiny");
  }
}

TEST(SampleEpisode, CapacityErrorNamesShortCategory) {
  const auto index = toy_index({{"big", 30}, {"tiny", 3}});
  try {
    sample_episode(index, EpisodeSpec{2, 6, 1, CategoryMode::room_type}, 0);
    FAIL() << "expected CapacityError";
  } catch (const CapacityError& e) {
    EXPECT_NE(std::string(e.what()).find("tiny"), std::string::npos) << e.what();
  }
  EXPECT_THROW(sample_episode(index, EpisodeSpec{0, 6, 1, CategoryMode::room_type}, 0), ConfigError);
}

TEST(SampleEpisode, DoesNotTouchTheIndex) {
  const auto index = toy_index({{"a", 12}, {"b", 12}});
  const auto before = index.categories();
  (void)sample_episode(index, EpisodeSpec{}, 3);
  EXPECT_EQ(index.categories(), before);
}

TEST(TaskDistribution, EmptyAndDeterministic) {
  const auto index = toy_index({{"a", 12}, {"b", 12}, {"c", 12}});
  EXPECT_TRUE(TaskDistribution(index, EpisodeSpec{}, 0, 1).episodes().empty());
  const TaskDistribution d1(index, EpisodeSpec{}, 20, 42), d2(index, EpisodeSpec{}, 20, 42);
  std::vector<Episode> a, b;
  for (const auto& ep : d1.episodes()) a.push_back(ep);
  for (const auto& ep : d2.episodes()) b.push_back(ep);
  EXPECT_EQ(a, b);
  EXPECT_EQ(d1.episode(7), a[7]);
  EXPECT_NE(a[0], TaskDistribution(index, EpisodeSpec{}, 1, 43).episode(0));
}

TEST(TaskDistribution, CapacityCheckedUpFront) {
  const auto index = toy_index({{"a", 12}});
  EXPECT_THROW(TaskDistribution(index, EpisodeSpec{}, 5, 0), CapacityError);
}

TEST(TaskDistribution, CategoryFrequenciesAreUniform) {
  const std::size_t C = 5, episodes = 10000;
  const auto index = toy_index({{"a", 12}, {"b", 12}, {"c", 12}, {"d", 12}, {"e", 12}});
  const TaskDistribution dist(index, EpisodeSpec{2, 6, 1, CategoryMode::room_type}, episodes, 2024);
  std::map<std::string, double> counts;
  for (const auto& ep : dist.episodes())
    for (const auto& c : ep.categories) counts[c] += 1.0;
  const double p = 2.0 / C;
  const double mean = episodes * p, sigma = std::sqrt(episodes * p * (1.0 - p));
  ASSERT_EQ(counts.size(), C);
  for (const auto& [c, n] : counts) EXPECT_LE(std::abs(n - mean), 3.0 * sigma) << c;
}

TEST(EpisodeManifest, ReplaysExactly) {
  const auto index = toy_index({{"a", 12}, {"b", 15}, {"c", 12}});
  const TaskDistribution dist(index, EpisodeSpec{}, 6, 77);
  const auto manifest = nlohmann::json::parse(episode_manifest(dist).dump());
  ASSERT_EQ(manifest["episodes"].size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(episode_from_json(index, manifest["episodes"][i]), dist.episode(i));
  EXPECT_EQ(manifest["spec"].get<EpisodeSpec>(), dist.spec());
}

TEST(Materialize, ShapesFollowPointsPerBlock) {
  const auto spec = parse_synthetic_spec(
      nlohmann::json::parse(R"({"density": 10, "areas": [{"name": "A", "rooms": {"office": 2, "hallway": 2}}]})"));
  const auto index = index_categories(generate_synthetic_dataset(spec, 3), CategoryMode::room_type);
  const auto ep = sample_episode(index, EpisodeSpec{2, 2, 1, CategoryMode::room_type}, 9);
  const auto task = materialize<float>(index, ep, 48);
  ASSERT_EQ(task.support.size(), 4u);
  for (const auto& b : task.support) {
    EXPECT_EQ(b.features.shape(), (Shape{48, 9}));
    EXPECT_EQ(b.labels.size(), 48u);
  }
  const auto again = materialize<float>(index, ep, 48);
  EXPECT_EQ(again.query[1].features, task.query[1].features);
}

}  // namespace
}  // namespace pcmeta
