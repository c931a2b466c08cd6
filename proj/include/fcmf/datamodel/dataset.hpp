#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "fcmf/datamodel/fcmt.hpp"
#include "fcmf/datamodel/preprocess.hpp"
#include "fcmf/datamodel/types.hpp"

namespace fcmf::data {

struct LoadOptions {
  PreprocessOptions preprocess;
  // Verify that every feature_ref exists and has the contracted shape.
  bool check_features = true;
  std::size_t max_images = kMaxImages;
  std::size_t max_rois = kMaxRois;
};

struct Dataset {
  std::vector<MultimodalSample> samples;
  // feature_refs resolve relative to this directory.
  std::filesystem::path base_dir;
};

// One JSON object per line. Errors are DataError/IoError naming the line.
Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& options = {});
MultimodalSample parse_sample(const std::string& line, std::size_t line_no, const LoadOptions& options);

void write_dataset(const std::filesystem::path& path, const std::vector<MultimodalSample>& samples);
std::string sample_to_json_line(const MultimodalSample& sample);

// Read-through cache of FCMT feature files keyed by feature_ref.
class FeatureStore {
 public:
  explicit FeatureStore(std::filesystem::path base_dir) : base_dir_(std::move(base_dir)) {}

  // 49 × 2048 image grid.
  const FeatureArray& grid(const std::string& ref);
  // 2048 RoI vector.
  const FeatureArray& roi(const std::string& ref);
  std::filesystem::path resolve(const std::string& ref) const { return base_dir_ / ref; }

 private:
  const FeatureArray& load(const std::string& ref, const std::vector<std::uint32_t>& expected);

  std::filesystem::path base_dir_;
  std::map<std::string, std::shared_ptr<FeatureArray>> cache_;
};

}  // namespace fcmf::data
