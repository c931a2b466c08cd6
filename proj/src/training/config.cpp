#include <set>

#include "fcmf/errors.hpp"
#include "fcmf/numerics/rng.hpp"
#include "fcmf/training/training.hpp"

namespace fcmf::training {

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (!(learning_rate > 0)) fail("learning_rate must be positive");
  if (batch_size == 0) fail("batch_size must be positive");
  if (seeds.empty()) fail("at least one seed is required");
  if (!(dropout >= 0 && dropout < 1)) fail("dropout must lie in [0, 1)");
  if (heads == 0 || dim % heads != 0) {
    fail("hidden size " + std::to_string(dim) + " is not divisible by " + std::to_string(heads) + " attention heads");
  }
  if (layers == 0) fail("at least one encoder layer is required");
  if (max_len < textenc::kFixedOverhead + 2 * data::kNumAspects) {
    fail("max_len must hold the fixed auxiliary segments (at least " +
         std::to_string(textenc::kFixedOverhead + 2 * data::kNumAspects) + ")");
  }
  if (max_images == 0 || max_images > data::kMaxImages) fail("max_images must lie in [1, 7]");
  if (max_rois == 0 || max_rois > data::kMaxRois) fail("max_rois must lie in [1, 4]");
  if (geo_dim == 0 || geo_dim % 8 != 0) fail("geo_dim must be a positive multiple of 8");
  if (ffn_mult == 0) fail("ffn_mult must be positive");
  if (!(init_std > 0)) fail("init_std must be positive");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && adam_eps > 0)) fail("invalid Adam hyperparameters");
}

nlohmann::ordered_json TrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["learning_rate"] = learning_rate;
  j["batch_size"] = batch_size;
  j["epochs"] = epochs;
  j["seeds"] = seeds;
  j["dropout"] = dropout;
  j["heads"] = heads;
  j["dim"] = dim;
  j["layers"] = layers;
  j["max_len"] = max_len;
  j["max_images"] = max_images;
  j["max_rois"] = max_rois;
  j["geo_dim"] = geo_dim;
  j["ffn_mult"] = ffn_mult;
  j["init_std"] = init_std;
  j["share_cm"] = share_cm;
  j["beta1"] = beta1;
  j["beta2"] = beta2;
  j["adam_eps"] = adam_eps;
  j["clip_norm"] = clip_norm;
  j["min_count"] = min_count;
  j["ablation"] = {{"no_aux_categories", ablation.no_aux_categories},
                   {"no_geometric", ablation.no_geometric},
                   {"no_visual_features", ablation.no_visual_features},
                   {"no_preprocess", ablation.no_preprocess}};
  j["eval"] = {{"flat", eval.flat}, {"exclude_none", eval.exclude_none}};
  j["preprocess"] = {{"lexicon", preprocess.lexicon}, {"replacements", preprocess.replacements}};
  return j;
}

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown config key '" + where + key + "'");
  }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

}  // namespace

TrainConfig TrainConfig::from_json(const nlohmann::json& j, const TrainConfig& base) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j,
                 {"learning_rate", "batch_size", "epochs", "seeds", "dropout", "heads", "dim", "layers", "max_len",
                  "max_images", "max_rois", "geo_dim", "ffn_mult", "init_std", "share_cm", "beta1", "beta2",
                  "adam_eps", "clip_norm", "min_count", "ablation", "eval", "preprocess"},
                 "");
  TrainConfig c = base;
  read(j, "learning_rate", c.learning_rate);
  read(j, "batch_size", c.batch_size);
  read(j, "epochs", c.epochs);
  read(j, "seeds", c.seeds);
  read(j, "dropout", c.dropout);
  read(j, "heads", c.heads);
  read(j, "dim", c.dim);
  read(j, "layers", c.layers);
  read(j, "max_len", c.max_len);
  read(j, "max_images", c.max_images);
  read(j, "max_rois", c.max_rois);
  read(j, "geo_dim", c.geo_dim);
  read(j, "ffn_mult", c.ffn_mult);
  read(j, "init_std", c.init_std);
  read(j, "share_cm", c.share_cm);
  read(j, "beta1", c.beta1);
  read(j, "beta2", c.beta2);
  read(j, "adam_eps", c.adam_eps);
  read(j, "clip_norm", c.clip_norm);
  read(j, "min_count", c.min_count);
  if (auto it = j.find("ablation"); it != j.end()) {
    reject_unknown(*it, {"no_aux_categories", "no_geometric", "no_visual_features", "no_preprocess"}, "ablation.");
    read(*it, "no_aux_categories", c.ablation.no_aux_categories);
    read(*it, "no_geometric", c.ablation.no_geometric);
    read(*it, "no_visual_features", c.ablation.no_visual_features);
    read(*it, "no_preprocess", c.ablation.no_preprocess);
  }
  if (auto it = j.find("eval"); it != j.end()) {
    reject_unknown(*it, {"flat", "exclude_none"}, "eval.");
    read(*it, "flat", c.eval.flat);
    read(*it, "exclude_none", c.eval.exclude_none);
  }
  if (auto it = j.find("preprocess"); it != j.end()) {
    reject_unknown(*it, {"lexicon", "replacements"}, "preprocess.");
    read(*it, "lexicon", c.preprocess.lexicon);
    read(*it, "replacements", c.preprocess.replacements);
  }
  c.validate();
  return c;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) { return from_json(j, TrainConfig{}); }

std::string TrainConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(num::fnv1a64(to_json().dump())));
  return buf;
}

}  // namespace fcmf::training
