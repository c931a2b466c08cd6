#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "fcmf/datamodel/types.hpp"

namespace fcmf::data {

struct SyntheticConfig {
  std::uint64_t seed = 7;
  std::size_t n_samples = 400;
  // Per-sample probability that one labeled aspect is shown only through an image.
  double implicit_rate = 0.3;
  // Standard deviation of the per-dimension Gaussian noise around each feature centroid.
  double noise = 0.1;
  // Probability of an image illustrating the explicit aspects.
  double image_rate = 0.4;
  // Probability of an extra image with background features and no categories.
  double irrelevant_image_rate = 0.2;
  double dev_fraction = 0.15;
  double test_fraction = 0.15;
};

// Centroids are drawn from this seed regardless of the run seed, so features from
// different synthetic runs share clusters.
inline constexpr std::uint64_t kCentroidSeed = 0x46434d46u;

struct SyntheticResult {
  std::vector<MultimodalSample> train, dev, test;
  nlohmann::json recipe;
};

// Writes train.jsonl, dev.jsonl, test.jsonl, features/*.fcmt and recipe.json into out_dir.
SyntheticResult generate_synthetic(const SyntheticConfig& config, const std::filesystem::path& out_dir);

// Fixed cue vocabulary used by the generator.
std::string_view aspect_cue(AspectCategory a);
std::string_view sentiment_cue(AspectCategory a, SentimentLabel l);
std::string_view generic_cue(SentimentLabel l);

}  // namespace fcmf::data
