#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "fcmf/datamodel/dataset.hpp"
#include "fcmf/datamodel/types.hpp"
#include "fcmf/numerics/layers.hpp"

namespace fcmf::perception {

using data::AspectCategory;
using num::Tensor;

inline constexpr double kCategoryThreshold = 0.5;

// Linear 2048 -> 6 heads: sigmoid multi-label for images, softmax multi-class for RoIs.
struct CategoryHeads {
  num::LinearParams image_head;
  num::LinearParams roi_head;

  // Zero weights and biases.
  static CategoryHeads zeros();
  void collect(num::ParamList& out, const std::string& prefix) const;
};

// Image head logits on the mean-pooled grid: (49 × 2048) -> (1 × 6).
Tensor image_category_logits(const CategoryHeads& heads, const Tensor& grid);
// Six independent probabilities.
std::array<double, data::kNumAspects> detect_image_categories(const CategoryHeads& heads, const Tensor& grid);
// Six-way distribution over the aspect categories.
std::array<double, data::kNumAspects> detect_roi_category(const CategoryHeads& heads, const Tensor& roi);
// Categories whose probability reaches the threshold, canonical order.
std::vector<AspectCategory> threshold_categories(const std::array<double, data::kNumAspects>& probs,
                                                 double threshold = kCategoryThreshold);
AspectCategory argmax_category(const std::array<double, data::kNumAspects>& dist);

// W_I and W_R, each d × 2048 without bias.
struct VisualProjection {
  num::LinearParams image;
  num::LinearParams roi;

  static VisualProjection init(std::size_t d, double stddev, num::Rng& rng);
  std::size_t dim() const { return image.out(); }
  void collect(num::ParamList& out, const std::string& prefix) const;
};

// Column convention: grid (49 × 2048) -> W_I · gridᵀ, shape (d × 49); RoI (2048) -> (d).
Tensor project_visual(const Tensor& features, const num::LinearParams& w);
// Row convention used by the attention blocks: (n × 2048) -> (n × d).
Tensor project_rows(const Tensor& features, const num::LinearParams& w);

// Unprojected per-sample visual input: features, geometry and category sets, padded to K_max / J_max.
struct RawImage {
  Tensor grid;               // 49 × 2048, undefined when masked
  Tensor rois;               // j × 2048 for the j real RoIs, undefined when j == 0
  std::vector<data::Box> boxes;  // j boxes
  num::KeyMask roi_mask;     // J_max entries, 1 = padded
};

struct RawVisual {
  std::vector<RawImage> images;  // K_max slots
  num::KeyMask image_mask;       // K_max entries, 1 = padded
  std::vector<AspectCategory> image_categories;  // deduplicated, canonical order
  std::vector<AspectCategory> roi_categories;
  std::size_t real_images() const;
};

struct PipelineOptions {
  std::size_t max_images = data::kMaxImages;
  std::size_t max_rois = data::kMaxRois;
  // Gold categories in the data override detector output when present.
  bool prefer_gold = true;
  // When false no feature file is read: every slot stays masked and only gold categories are collected.
  bool load_features = true;
};

// Walks images then RoIs, gathering features, geometry and categories. `heads` may be null, in which
// case only gold categories are used.
RawVisual run_image_pipeline(const data::MultimodalSample& sample, data::FeatureStore& store,
                             const CategoryHeads* heads, const PipelineOptions& options = {});

// Projected visual batch: per image slot, d-dim rows for the 49 cells and the real RoIs.
struct VisualBatch {
  std::vector<Tensor> grids;  // K_max entries; 49 × d, undefined when masked
  std::vector<Tensor> rois;   // K_max entries; j × d, undefined when no RoIs
  std::vector<std::vector<data::Box>> boxes;
  num::KeyMask image_mask;
  std::vector<num::KeyMask> roi_masks;
};

VisualBatch project_batch(const RawVisual& raw, const VisualProjection& projection);

// Two-stage detector training, separate from the main model.
struct HeadTrainOptions {
  std::size_t epochs = 200;
  double lr = 1e-3;
  std::uint64_t seed = 1;
};

struct HeadAccuracy {
  double image_accuracy = 0.0;  // exact match of the thresholded 6-label set
  double roi_accuracy = 0.0;    // argmax matches gold
  std::size_t images = 0;
  std::size_t rois = 0;
};

CategoryHeads train_category_heads(const std::vector<data::MultimodalSample>& samples, data::FeatureStore& store,
                                   const HeadTrainOptions& options, std::vector<double>* loss_history = nullptr);
HeadAccuracy evaluate_category_heads(const CategoryHeads& heads, const std::vector<data::MultimodalSample>& samples,
                                     data::FeatureStore& store);

Tensor to_tensor(const data::FeatureArray& features);

}  // namespace fcmf::perception
