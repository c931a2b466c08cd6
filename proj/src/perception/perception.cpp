#include "fcmf/perception/perception.hpp"

#include <algorithm>
#include <set>

#include "fcmf/errors.hpp"
#include "fcmf/numerics/optim.hpp"
#include "fcmf/numerics/tape.hpp"

namespace fcmf::perception {

using data::kFeatureDim;
using data::kGridCells;
using data::kNumAspects;

namespace {

num::LinearParams zero_linear(std::size_t in, std::size_t out) {
  num::LinearParams p;
  p.weight = num::constant_param(num::Shape{out, in}, 0.0);
  p.bias = num::constant_param(num::Shape{out}, 0.0);
  return p;
}

void check_grid(const Tensor& grid) {
  if (grid.rank() != 2 || grid.rows() != kGridCells || grid.cols() != kFeatureDim) {
    throw DimensionError("image grid must be (49, 2048), got " + num::shape_str(grid.shape()));
  }
}

void check_roi(const Tensor& roi) {
  if (roi.size() != kFeatureDim || roi.rows() != 1) {
    throw DimensionError("RoI feature must be (2048), got " + num::shape_str(roi.shape()));
  }
}

std::array<double, kNumAspects> to_array(const Tensor& t) {
  std::array<double, kNumAspects> out{};
  for (std::size_t i = 0; i < kNumAspects; ++i) out[i] = t[i];
  return out;
}

std::vector<AspectCategory> canonical(const std::set<AspectCategory>& s) { return {s.begin(), s.end()}; }

}  // namespace

CategoryHeads CategoryHeads::zeros() {
  return CategoryHeads{zero_linear(kFeatureDim, kNumAspects), zero_linear(kFeatureDim, kNumAspects)};
}

void CategoryHeads::collect(num::ParamList& out, const std::string& prefix) const {
  image_head.collect(out, prefix + ".image_head");
  roi_head.collect(out, prefix + ".roi_head");
}

Tensor image_category_logits(const CategoryHeads& heads, const Tensor& grid) {
  check_grid(grid);
  return heads.image_head(num::mean_rows(grid));
}

std::array<double, kNumAspects> detect_image_categories(const CategoryHeads& heads, const Tensor& grid) {
  num::Tape::Pause pause;
  return to_array(num::sigmoid(image_category_logits(heads, grid)));
}

std::array<double, kNumAspects> detect_roi_category(const CategoryHeads& heads, const Tensor& roi) {
  check_roi(roi);
  num::Tape::Pause pause;
  return to_array(num::softmax(heads.roi_head(roi)));
}

std::vector<AspectCategory> threshold_categories(const std::array<double, kNumAspects>& probs, double threshold) {
  std::vector<AspectCategory> out;
  for (auto a : data::kAspects)
    if (probs[data::index_of(a)] >= threshold) out.push_back(a);
  return out;
}

AspectCategory argmax_category(const std::array<double, kNumAspects>& dist) {
  return data::kAspects[static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin())];
}

VisualProjection VisualProjection::init(std::size_t d, double stddev, num::Rng& rng) {
  VisualProjection p;
  p.image = num::LinearParams::init(kFeatureDim, d, stddev, rng, false);
  p.roi = num::LinearParams::init(kFeatureDim, d, stddev, rng, false);
  return p;
}

void VisualProjection::collect(num::ParamList& out, const std::string& prefix) const {
  image.collect(out, prefix + ".image");
  roi.collect(out, prefix + ".roi");
}

Tensor project_rows(const Tensor& features, const num::LinearParams& w) {
  if (features.cols() != w.in()) {
    throw DimensionError("visual features have width " + std::to_string(features.cols()) + ", projection expects " +
                         std::to_string(w.in()));
  }
  return w(features);
}

Tensor project_visual(const Tensor& features, const num::LinearParams& w) {
  Tensor rows = project_rows(features, w);
  if (features.rank() == 1) return rows;
  return num::transpose(rows);
}

Tensor to_tensor(const data::FeatureArray& f) {
  num::Shape shape(f.dims.begin(), f.dims.end());
  return Tensor(std::move(shape), std::vector<double>(f.values.begin(), f.values.end()));
}

std::size_t RawVisual::real_images() const {
  return static_cast<std::size_t>(std::count(image_mask.begin(), image_mask.end(), 0));
}

RawVisual run_image_pipeline(const data::MultimodalSample& sample, data::FeatureStore& store,
                             const CategoryHeads* heads, const PipelineOptions& options) {
  if (sample.images.size() > options.max_images) {
    throw DataError(sample.id + ": " + std::to_string(sample.images.size()) + " images exceed the limit of " +
                    std::to_string(options.max_images));
  }
  RawVisual out;
  out.images.resize(options.max_images);
  out.image_mask.assign(options.max_images, 1);
  std::set<AspectCategory> image_cats, roi_cats;

  for (std::size_t k = 0; k < sample.images.size(); ++k) {
    const auto& img = sample.images[k];
    if (img.rois.size() > options.max_rois) {
      throw DataError(sample.id + ": image " + std::to_string(k) + " has more than " +
                      std::to_string(options.max_rois) + " RoIs");
    }
    const bool gold_image = options.prefer_gold && img.categories.has_value();
    if (!options.load_features) {
      if (gold_image) image_cats.insert(img.categories->begin(), img.categories->end());
      for (const auto& roi : img.rois)
        if (options.prefer_gold && roi.category) roi_cats.insert(*roi.category);
      continue;
    }
    RawImage& slot = out.images[k];
    out.image_mask[k] = 0;
    slot.grid = to_tensor(store.grid(img.feature_ref));
    if (gold_image) {
      image_cats.insert(img.categories->begin(), img.categories->end());
    } else if (heads) {
      for (auto a : threshold_categories(detect_image_categories(*heads, slot.grid))) image_cats.insert(a);
    }

    slot.roi_mask.assign(options.max_rois, 1);
    std::vector<double> values;
    for (std::size_t j = 0; j < img.rois.size(); ++j) {
      const auto& roi = img.rois[j];
      const auto& f = store.roi(roi.feature_ref);
      values.insert(values.end(), f.values.begin(), f.values.end());
      slot.boxes.push_back(roi.box);
      slot.roi_mask[j] = 0;
      // An annotated image makes an unlabeled RoI a gold "no category".
      if (options.prefer_gold && (roi.category || gold_image)) {
        if (roi.category) roi_cats.insert(*roi.category);
      } else if (heads) {
        Tensor t(num::Shape{kFeatureDim}, std::vector<double>(f.values.begin(), f.values.end()));
        roi_cats.insert(argmax_category(detect_roi_category(*heads, t)));
      }
    }
    if (!img.rois.empty()) slot.rois = Tensor(num::Shape{img.rois.size(), kFeatureDim}, std::move(values));
  }
  out.image_categories = canonical(image_cats);
  out.roi_categories = canonical(roi_cats);
  return out;
}

VisualBatch project_batch(const RawVisual& raw, const VisualProjection& projection) {
  VisualBatch b;
  const std::size_t k_max = raw.images.size();
  b.grids.resize(k_max);
  b.rois.resize(k_max);
  b.boxes.resize(k_max);
  b.roi_masks.resize(k_max);
  b.image_mask = raw.image_mask;
  for (std::size_t k = 0; k < k_max; ++k) {
    const RawImage& img = raw.images[k];
    b.roi_masks[k] = img.roi_mask.empty() ? num::KeyMask(data::kMaxRois, 1) : img.roi_mask;
    if (raw.image_mask[k]) continue;
    b.grids[k] = project_rows(img.grid, projection.image);
    if (img.rois.defined()) b.rois[k] = project_rows(img.rois, projection.roi);
    b.boxes[k] = img.boxes;
  }
  return b;
}

namespace {

struct HeadData {
  Tensor pooled;                 // n_img × 2048
  std::vector<double> img_targets;  // n_img × 6
  Tensor rois;                   // n_roi × 2048
  std::vector<int> roi_targets;
};

HeadData gather_head_data(const std::vector<data::MultimodalSample>& samples, data::FeatureStore& store) {
  std::vector<double> pooled, rois;
  HeadData d;
  std::size_t n_img = 0, n_roi = 0;
  for (const auto& s : samples) {
    for (const auto& img : s.images) {
      if (img.categories) {
        const auto& g = store.grid(img.feature_ref).values;
        std::vector<double> mean(kFeatureDim, 0.0);
        for (std::size_t c = 0; c < kGridCells; ++c)
          for (std::size_t i = 0; i < kFeatureDim; ++i) mean[i] += g[c * kFeatureDim + i];
        for (auto& m : mean) m /= static_cast<double>(kGridCells);
        pooled.insert(pooled.end(), mean.begin(), mean.end());
        std::array<double, kNumAspects> t{};
        for (auto a : *img.categories) t[data::index_of(a)] = 1.0;
        d.img_targets.insert(d.img_targets.end(), t.begin(), t.end());
        ++n_img;
      }
      for (const auto& r : img.rois) {
        if (!r.category) continue;
        const auto& f = store.roi(r.feature_ref).values;
        rois.insert(rois.end(), f.begin(), f.end());
        d.roi_targets.push_back(static_cast<int>(data::index_of(*r.category)));
        ++n_roi;
      }
    }
  }
  if (n_img) d.pooled = Tensor(num::Shape{n_img, kFeatureDim}, std::move(pooled));
  if (n_roi) d.rois = Tensor(num::Shape{n_roi, kFeatureDim}, std::move(rois));
  return d;
}

}  // namespace

CategoryHeads train_category_heads(const std::vector<data::MultimodalSample>& samples, data::FeatureStore& store,
                                   const HeadTrainOptions& options, std::vector<double>* loss_history) {
  CategoryHeads heads = CategoryHeads::zeros();
  const HeadData d = gather_head_data(samples, store);
  num::ParamList params;
  heads.collect(params, "heads");
  num::AdamOptions adam_opts;
  adam_opts.lr = options.lr;
  num::Adam adam(params, adam_opts);

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    num::zero_grads(params);
    num::Tape tape;
    double total = 0.0;
    {
      num::Tape::Scope scope(tape);
      Tensor loss;
      if (d.pooled.defined()) {
        loss = num::binary_cross_entropy(heads.image_head(d.pooled), d.img_targets);
      }
      if (d.rois.defined()) {
        Tensor roi_loss = num::cross_entropy(heads.roi_head(d.rois), d.roi_targets);
        loss = loss.defined() ? num::add(loss, roi_loss) : roi_loss;
      }
      if (!loss.defined()) break;
      total = loss.item();
      tape.backward(loss);
    }
    if (loss_history) loss_history->push_back(total);
    adam.step();
  }
  return heads;
}

HeadAccuracy evaluate_category_heads(const CategoryHeads& heads, const std::vector<data::MultimodalSample>& samples,
                                     data::FeatureStore& store) {
  HeadAccuracy acc;
  std::size_t img_ok = 0, roi_ok = 0;
  for (const auto& s : samples) {
    for (const auto& img : s.images) {
      if (img.categories) {
        auto predicted = threshold_categories(detect_image_categories(heads, to_tensor(store.grid(img.feature_ref))));
        auto gold = *img.categories;
        std::sort(gold.begin(), gold.end());
        gold.erase(std::unique(gold.begin(), gold.end()), gold.end());
        img_ok += predicted == gold;
        ++acc.images;
      }
      for (const auto& r : img.rois) {
        if (!r.category) continue;
        roi_ok += argmax_category(detect_roi_category(heads, to_tensor(store.roi(r.feature_ref)))) == *r.category;
        ++acc.rois;
      }
    }
  }
  if (acc.images) acc.image_accuracy = static_cast<double>(img_ok) / static_cast<double>(acc.images);
  if (acc.rois) acc.roi_accuracy = static_cast<double>(roi_ok) / static_cast<double>(acc.rois);
  return acc;
}

}  // namespace fcmf::perception
