#include "fcmf/training/training.hpp"

namespace fcmf::training {

num::GradCheckReport model_grad_check(const ModelGradCheckOptions& o) {
  num::Rng rng(num::splitmix64(o.seed));

  data::Vocabulary vocab;
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < o.tokens; ++i) {
    tokens.push_back("w" + std::to_string(i));
    vocab.add(tokens.back());
  }

  TrainConfig cfg;
  cfg.dim = o.dim;
  cfg.heads = o.heads;
  cfg.layers = o.layers;
  cfg.dropout = 0.0;
  cfg.max_len = textenc::kFixedOverhead + 2 * data::kNumAspects + o.tokens;
  cfg.geo_dim = 8;
  cfg.init_std = o.init_std;
  cfg.max_images = o.images;
  cfg.max_rois = o.rois;
  FcmfModel model = FcmfModel::init(cfg, vocab, o.seed);

  PreparedSample s;
  s.id = "gradcheck";
  s.tokens = tokens;
  s.visual.images.resize(o.images);
  s.visual.image_mask.assign(o.images, 0);
  for (std::size_t k = 0; k < o.images; ++k) {
    auto& img = s.visual.images[k];
    std::vector<double> grid(data::kGridCells * data::kFeatureDim), rois(o.rois * data::kFeatureDim);
    for (auto& v : grid) v = rng.normal();
    for (auto& v : rois) v = rng.normal();
    img.grid = num::Tensor(num::Shape{data::kGridCells, data::kFeatureDim}, std::move(grid));
    img.rois = num::Tensor(num::Shape{o.rois, data::kFeatureDim}, std::move(rois));
    img.roi_mask.assign(o.rois, 0);
    for (std::size_t j = 0; j < o.rois; ++j) {
      const double w = 0.1 + 0.3 * rng.uniform(), h = 0.1 + 0.3 * rng.uniform();
      img.boxes.push_back({rng.uniform() * (1 - w), rng.uniform() * (1 - h), w, h});
    }
  }
  s.visual.image_categories = {data::AspectCategory::Room};
  s.visual.roi_categories = {data::AspectCategory::Food, data::AspectCategory::Room};
  for (std::size_t a = 0; a < data::kNumAspects; ++a) s.targets[a] = static_cast<int>(rng.below(data::kNumLabels));

  num::GradCheckOptions go;
  go.eps = o.eps;
  go.tol = o.tol;
  go.samples = o.samples;
  go.seed = o.seed;
  const std::vector<const PreparedSample*> batch{&s};
  return num::grad_check([&] { return forward_loss(model, batch, {}); }, model.params(), go);
}

}  // namespace fcmf::training
