#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "fcmf/datamodel/dataset.hpp"
#include "fcmf/datamodel/vocab.hpp"
#include "fcmf/fusion/fusion.hpp"
#include "fcmf/metrics/metrics.hpp"
#include "fcmf/numerics/gradcheck.hpp"
#include "fcmf/numerics/optim.hpp"
#include "fcmf/perception/perception.hpp"
#include "fcmf/textenc/textenc.hpp"

namespace fcmf::training {

using num::Tensor;

struct Ablation {
  bool no_aux_categories = false;
  bool no_geometric = false;
  bool no_visual_features = false;
  bool no_preprocess = false;
  bool operator==(const Ablation&) const = default;
};

struct TrainConfig {
  double learning_rate = 3e-5;
  std::size_t batch_size = 4;
  std::size_t epochs = 50;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  double dropout = 0.1;
  std::size_t heads = 12;
  // Smallest multiple of 12 heads at or above the 64-wide toy size.
  std::size_t dim = 72;
  std::size_t layers = 2;
  std::size_t max_len = 170;
  std::size_t max_images = data::kMaxImages;
  std::size_t max_rois = data::kMaxRois;
  std::size_t geo_dim = 64;
  std::size_t ffn_mult = 4;
  double init_std = 0.02;
  bool share_cm = true;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 1.0;  // <= 0 disables clipping
  std::size_t min_count = 1;
  Ablation ablation;
  metrics::EvalOptions eval;
  data::PreprocessOptions preprocess;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  // Missing keys keep their defaults; unknown keys are rejected.
  static TrainConfig from_json(const nlohmann::json& j, const TrainConfig& base);
  static TrainConfig from_json(const nlohmann::json& j);
  std::string hash() const;
};

// Everything that a forward pass needs.
struct FcmfModel {
  TrainConfig config;
  data::Vocabulary vocab;
  textenc::EncoderParams encoder;
  perception::VisualProjection projection;
  fusion::FusionParams fusion;
  std::optional<perception::CategoryHeads> heads;  // used only when gold categories are missing

  static FcmfModel init(const TrainConfig& config, data::Vocabulary vocab, std::uint64_t seed);
  // Trainable tensors in serialization and optimizer order.
  num::ParamList params() const;
};

// One sample with its visual input gathered and ablations applied.
struct PreparedSample {
  std::string id;
  std::vector<std::string> tokens;
  perception::RawVisual visual;
  std::array<int, data::kNumAspects> targets{};
};

data::LoadOptions load_options(const TrainConfig& config);
std::vector<PreparedSample> prepare_samples(const std::vector<data::MultimodalSample>& samples,
                                            data::FeatureStore& store, const TrainConfig& config,
                                            const perception::CategoryHeads* heads = nullptr);

// 6 × 4 logits, one row per aspect in canonical order.
Tensor forward_sample(const FcmfModel& model, const PreparedSample& sample, const num::RunContext& ctx);
// Mean NLL over the D × 6 (sample, aspect) pairs. Non-finite loss raises NumericError naming the sample.
Tensor forward_loss(const FcmfModel& model, const std::vector<const PreparedSample*>& batch,
                    const num::RunContext& ctx, std::vector<Tensor>* logits_out = nullptr);

struct HistoryRow {
  std::size_t epoch = 0;
  std::string split;
  double loss = 0.0;
  metrics::MacroScores macro;
};

void write_history_csv(std::ostream& os, const std::vector<HistoryRow>& rows);

// Resumable state at an epoch boundary.
struct TrainState {
  std::uint64_t seed = 0;
  std::size_t next_epoch = 1;
  double best_dev_f1 = -1.0;
  std::size_t best_epoch = 0;
  std::map<std::string, std::string> rng_states;
  std::uint64_t adam_steps = 0;
  std::vector<std::vector<double>> adam_m, adam_v;
  std::vector<HistoryRow> history;
};

struct Checkpoint {
  FcmfModel model;
  TrainState state;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

struct Prediction {
  std::array<int, data::kNumAspects> labels{};
  std::array<std::array<double, data::kNumLabels>, data::kNumAspects> probs{};
};

struct Evaluation {
  metrics::EvalReport report;
  std::vector<Prediction> predictions;
  double loss = 0.0;
};

// Eval mode; `threads` > 1 splits samples across workers with results kept in input order.
Evaluation evaluate_model(const FcmfModel& model, const std::vector<PreparedSample>& samples, std::size_t threads = 1);

struct TrainResult {
  Checkpoint best;
  Checkpoint last;
  std::vector<HistoryRow> history;
  double best_dev_f1 = 0.0;
  std::size_t best_epoch = 0;
};

struct TrainHooks {
  // Called after every epoch with its history rows; returning false stops training.
  std::function<bool(std::size_t epoch, const std::vector<HistoryRow>&)> on_epoch;
  // Stop after this many epochs in this call (0 = run to config.epochs).
  std::size_t max_epochs_this_call = 0;
};

// Trains one seed. `resume` continues from an epoch-boundary checkpoint.
TrainResult train(const std::vector<PreparedSample>& train_set, const std::vector<PreparedSample>& dev_set,
                  const TrainConfig& config, const data::Vocabulary& vocab, std::uint64_t seed,
                  const Checkpoint* resume = nullptr, const TrainHooks& hooks = {});

// Majority label per aspect, taken from the training split.
std::array<int, data::kNumAspects> majority_labels(const std::vector<PreparedSample>& train_set);

}  // namespace fcmf::training

namespace fcmf::training {

// End-to-end gradient check over encoder + fusion + loss on one random sample.
struct ModelGradCheckOptions {
  std::size_t dim = 8;
  std::size_t layers = 1;
  std::size_t heads = 2;
  std::size_t images = 2;
  std::size_t rois = 2;
  std::size_t tokens = 6;
  std::size_t samples = 100;
  double tol = 1e-4;
  double eps = 1e-5;
  double init_std = 0.2;
  std::uint64_t seed = 1;
};

num::GradCheckReport model_grad_check(const ModelGradCheckOptions& options);

}  // namespace fcmf::training

namespace fcmf::training {

// Category heads stored as FCMT f64 records plus a vocabulary-free manifest.
void save_heads(const perception::CategoryHeads& heads, const std::filesystem::path& dir,
                const nlohmann::ordered_json& manifest_extra = {});
perception::CategoryHeads load_heads(const std::filesystem::path& dir);

}  // namespace fcmf::training
