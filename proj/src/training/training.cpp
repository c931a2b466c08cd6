#include "fcmf/training/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <thread>

#include "fcmf/errors.hpp"
#include "fcmf/numerics/tape.hpp"

namespace fcmf::training {

namespace {

void copy_values(const num::ParamList& src, const num::ParamList& dst) {
  if (src.size() != dst.size()) throw DataError("parameter lists differ in length");
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i].second.shape() != dst[i].second.shape()) {
      throw DataError("parameter " + src[i].first + " has shape " + num::shape_str(src[i].second.shape()) +
                      ", expected " + num::shape_str(dst[i].second.shape()));
    }
    Tensor d = dst[i].second;
    std::copy(src[i].second.data().begin(), src[i].second.data().end(), d.data().begin());
  }
}

FcmfModel clone_model(const FcmfModel& m) {
  FcmfModel c = FcmfModel::init(m.config, m.vocab, 0);
  copy_values(m.params(), c.params());
  if (m.heads) {
    c.heads = perception::CategoryHeads::zeros();
    num::ParamList a, b;
    m.heads->collect(a, "heads");
    c.heads->collect(b, "heads");
    copy_values(a, b);
  }
  return c;
}

int argmax(const double* p, std::size_t n) {
  return static_cast<int>(std::max_element(p, p + n) - p);
}

}  // namespace

FcmfModel FcmfModel::init(const TrainConfig& config, data::Vocabulary vocab, std::uint64_t seed) {
  config.validate();
  num::RngStreams streams(seed);
  num::Rng& rng = streams.stream("init");
  FcmfModel m;
  m.config = config;
  textenc::EncoderConfig ec;
  ec.vocab_size = vocab.size();
  ec.dim = config.dim;
  ec.heads = config.heads;
  ec.layers = config.layers;
  ec.max_len = config.max_len;
  ec.ffn_mult = config.ffn_mult;
  ec.init_std = config.init_std;
  m.encoder = textenc::EncoderParams::init(ec, rng);
  m.projection = perception::VisualProjection::init(config.dim, config.init_std, rng);
  fusion::FusionConfig fc;
  fc.dim = config.dim;
  fc.heads = config.heads;
  fc.geo_dim = config.geo_dim;
  fc.max_images = config.max_images;
  fc.share_cm = config.share_cm;
  fc.init_std = config.init_std;
  m.fusion = fusion::FusionParams::init(fc, rng);
  m.vocab = std::move(vocab);
  return m;
}

num::ParamList FcmfModel::params() const {
  num::ParamList out;
  encoder.collect(out, "encoder");
  projection.collect(out, "projection");
  fusion.collect(out, "fusion");
  return out;
}

data::LoadOptions load_options(const TrainConfig& config) {
  data::LoadOptions o;
  o.preprocess = config.preprocess;
  o.preprocess.enabled = !config.ablation.no_preprocess;
  o.max_images = config.max_images;
  o.max_rois = config.max_rois;
  return o;
}

std::vector<PreparedSample> prepare_samples(const std::vector<data::MultimodalSample>& samples,
                                            data::FeatureStore& store, const TrainConfig& config,
                                            const perception::CategoryHeads* heads) {
  perception::PipelineOptions po;
  po.max_images = config.max_images;
  po.max_rois = config.max_rois;
  po.load_features = !config.ablation.no_visual_features;
  std::vector<PreparedSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    PreparedSample p;
    p.id = s.id;
    p.tokens = s.tokens;
    p.visual = perception::run_image_pipeline(s, store, heads, po);
    if (config.ablation.no_aux_categories) {
      p.visual.image_categories.clear();
      p.visual.roi_categories.clear();
    }
    for (auto a : data::kAspects) p.targets[data::index_of(a)] = static_cast<int>(data::index_of(s.label(a)));
    out.push_back(std::move(p));
  }
  return out;
}

Tensor forward_sample(const FcmfModel& model, const PreparedSample& sample, const num::RunContext& ctx) {
  const auto& cfg = model.config;
  const std::size_t k_max = sample.visual.images.size();
  const std::size_t d = cfg.dim;
  const bool use_visual = !cfg.ablation.no_visual_features && sample.visual.real_images() > 0;
  const bool use_geometry = use_visual && !cfg.ablation.no_geometric;

  perception::VisualBatch vb;
  std::vector<Tensor> h_o(k_max);
  if (use_visual) {
    vb = perception::project_batch(sample.visual, model.projection);
    if (use_geometry) {
      for (std::size_t k = 0; k < k_max; ++k) {
        if (vb.image_mask[k] || !vb.rois[k].defined()) continue;
        h_o[k] = fusion::object_relation(vb.rois[k], vb.boxes[k], model.fusion.relation, ctx);
      }
    }
  }

  std::vector<Tensor> rows;
  rows.reserve(data::kNumAspects);
  for (auto a : data::kAspects) {
    const auto seq = textenc::build_auxiliary_sequence(a, sample.tokens, sample.visual.image_categories,
                                                       sample.visual.roi_categories, model.vocab, cfg.max_len);
    const auto enc = textenc::encode_text(seq, model.encoder, ctx);
    const auto h_i = use_visual ? fusion::image_guided_attention(enc.hidden, vb.grids, vb.image_mask, model.fusion, ctx)
                                : fusion::masked_rows(k_max, d);
    const auto h_r = use_geometry ? fusion::geometric_rows(enc.hidden, h_o, vb.image_mask, model.fusion, ctx)
                                  : fusion::masked_rows(k_max, d);
    rows.push_back(fusion::fuse_logits(enc.first, h_i, h_r, model.fusion, ctx));
  }
  return num::concat_rows(rows);
}

Tensor forward_loss(const FcmfModel& model, const std::vector<const PreparedSample*>& batch,
                    const num::RunContext& ctx, std::vector<Tensor>* logits_out) {
  if (batch.empty()) throw DataError("empty batch");
  std::vector<Tensor> logits;
  std::vector<int> targets;
  for (const auto* s : batch) {
    logits.push_back(forward_sample(model, *s, ctx));
    targets.insert(targets.end(), s->targets.begin(), s->targets.end());
  }
  Tensor loss = num::cross_entropy(num::concat_rows(logits), targets);
  if (!std::isfinite(loss.item())) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (!num::all_finite(logits[i].data())) throw NumericError("non-finite logits for sample " + batch[i]->id);
    }
    throw NumericError("non-finite loss in batch starting at sample " + batch.front()->id);
  }
  if (logits_out) *logits_out = std::move(logits);
  return loss;
}

void write_history_csv(std::ostream& os, const std::vector<HistoryRow>& rows) {
  const auto old = os.precision(std::numeric_limits<double>::max_digits10);
  os << "epoch,split,loss,macro_p,macro_r,macro_f1\n";
  for (const auto& r : rows) {
    os << r.epoch << ',' << r.split << ',' << r.loss << ',' << r.macro.precision << ',' << r.macro.recall << ','
       << r.macro.f1 << '\n';
  }
  os.precision(old);
}

Evaluation evaluate_model(const FcmfModel& model, const std::vector<PreparedSample>& samples, std::size_t threads) {
  Evaluation ev;
  ev.predictions.resize(samples.size());
  std::vector<double> nll(samples.size(), 0.0);
  auto work = [&](std::size_t begin, std::size_t end) {
    num::Tape::Pause pause;
    for (std::size_t i = begin; i < end; ++i) {
      const Tensor logits = forward_sample(model, samples[i], {});
      const Tensor probs = num::softmax(logits);
      auto& pred = ev.predictions[i];
      for (std::size_t a = 0; a < data::kNumAspects; ++a) {
        for (std::size_t c = 0; c < data::kNumLabels; ++c) pred.probs[a][c] = probs.at(a, c);
        pred.labels[a] = argmax(pred.probs[a].data(), data::kNumLabels);
        // log-softmax from logits for a stable NLL
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < data::kNumLabels; ++c) mx = std::max(mx, logits.at(a, c));
        double z = 0;
        for (std::size_t c = 0; c < data::kNumLabels; ++c) z += std::exp(logits.at(a, c) - mx);
        nll[i] -= logits.at(a, static_cast<std::size_t>(samples[i].targets[a])) - mx - std::log(z);
      }
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, samples.size()));
  if (threads == 1) {
    work(0, samples.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (samples.size() + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      const std::size_t b = t * chunk, e = std::min(samples.size(), b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) th.join();
  }
  std::vector<std::array<int, data::kNumAspects>> gold, pred;
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    gold.push_back(samples[i].targets);
    pred.push_back(ev.predictions[i].labels);
    total += nll[i];
  }
  ev.report = metrics::evaluate_predictions(gold, pred, model.config.eval);
  ev.loss = samples.empty() ? 0.0 : total / static_cast<double>(samples.size() * data::kNumAspects);
  return ev;
}

std::array<int, data::kNumAspects> majority_labels(const std::vector<PreparedSample>& train_set) {
  std::array<int, data::kNumAspects> out{};
  for (std::size_t a = 0; a < data::kNumAspects; ++a) {
    std::array<std::size_t, data::kNumLabels> counts{};
    for (const auto& s : train_set) ++counts[static_cast<std::size_t>(s.targets[a])];
    out[a] = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  }
  return out;
}

TrainResult train(const std::vector<PreparedSample>& train_set, const std::vector<PreparedSample>& dev_set,
                  const TrainConfig& config, const data::Vocabulary& vocab, std::uint64_t seed,
                  const Checkpoint* resume, const TrainHooks& hooks) {
  config.validate();
  if (train_set.empty()) throw DataError("training split is empty");

  FcmfModel model = FcmfModel::init(config, vocab, seed);
  const num::ParamList params = model.params();
  num::AdamOptions ao;
  ao.lr = config.learning_rate;
  ao.beta1 = config.beta1;
  ao.beta2 = config.beta2;
  ao.eps = config.adam_eps;
  num::Adam adam(params, ao);
  num::RngStreams streams(seed);
  TrainState state;
  state.seed = seed;

  if (resume) {
    if (resume->model.config.hash() != config.hash()) throw ConfigError("checkpoint was trained with a different config");
    if (!(resume->model.vocab == vocab)) throw ConfigError("checkpoint vocabulary differs from the data vocabulary");
    copy_values(resume->model.params(), params);
    state = resume->state;
    adam.restore(state.adam_steps, state.adam_m, state.adam_v);
    streams.restore(state.rng_states);
    if (resume->model.heads) model.heads = clone_model(resume->model).heads;
  }

  auto snapshot = [&]() {
    Checkpoint c{clone_model(model), state};
    c.state.rng_states = streams.states();
    c.state.adam_steps = adam.steps();
    c.state.adam_m = adam.first_moments();
    c.state.adam_v = adam.second_moments();
    return c;
  };

  TrainResult result;
  if (!resume) {
    const auto tr = evaluate_model(model, train_set);
    state.history.push_back({0, "train", tr.loss, tr.report.macro});
    if (!dev_set.empty()) {
      const auto dv = evaluate_model(model, dev_set);
      state.history.push_back({0, "dev", dv.loss, dv.report.macro});
    }
  }
  std::optional<Checkpoint> best;
  if (resume) best = *resume;

  num::Rng& shuffle_rng = streams.stream("shuffle");
  num::Rng& dropout_rng = streams.stream("dropout");
  std::size_t ran = 0;
  for (std::size_t epoch = state.next_epoch; epoch <= config.epochs; ++epoch) {
    if (hooks.max_epochs_this_call && ran == hooks.max_epochs_this_call) break;
    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle_rng.shuffle(order.begin(), order.end());

    num::RunContext ctx{true, config.dropout, &dropout_rng};
    double loss_sum = 0.0;
    std::vector<std::array<int, data::kNumAspects>> gold, pred;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      std::vector<const PreparedSample*> batch;
      for (std::size_t i = b; i < std::min(order.size(), b + config.batch_size); ++i) batch.push_back(&train_set[order[i]]);
      num::zero_grads(params);
      num::Tape tape;
      std::vector<Tensor> logits;
      {
        num::Tape::Scope scope(tape);
        Tensor loss = forward_loss(model, batch, ctx, &logits);
        loss_sum += loss.item() * static_cast<double>(batch.size());
        tape.backward(loss);
      }
      if (config.clip_norm > 0) num::clip_grad_norm(params, config.clip_norm);
      adam.step();
      for (std::size_t i = 0; i < batch.size(); ++i) {
        gold.push_back(batch[i]->targets);
        std::array<int, data::kNumAspects> p{};
        for (std::size_t a = 0; a < data::kNumAspects; ++a) {
          p[a] = argmax(logits[i].ptr() + a * data::kNumLabels, data::kNumLabels);
        }
        pred.push_back(p);
      }
    }
    for (const auto& [name, t] : params) {
      if (!num::all_finite(t.data())) throw NumericError("parameter " + name + " became non-finite in epoch " + std::to_string(epoch));
    }

    std::vector<HistoryRow> rows;
    rows.push_back({epoch, "train", loss_sum / static_cast<double>(train_set.size()),
                    metrics::evaluate_predictions(gold, pred, config.eval).macro});
    double dev_f1 = rows.back().macro.f1;
    if (!dev_set.empty()) {
      const auto dv = evaluate_model(model, dev_set);
      rows.push_back({epoch, "dev", dv.loss, dv.report.macro});
      dev_f1 = dv.report.macro.f1;
    }
    state.history.insert(state.history.end(), rows.begin(), rows.end());
    state.next_epoch = epoch + 1;
    ++ran;
    if (dev_f1 > state.best_dev_f1) {
      state.best_dev_f1 = dev_f1;
      state.best_epoch = epoch;
      best = snapshot();
    }
    if (hooks.on_epoch && !hooks.on_epoch(epoch, rows)) break;
  }

  result.last = snapshot();
  result.best = best ? *best : result.last;
  result.best.state.history = state.history;
  result.best.state.best_dev_f1 = state.best_dev_f1;
  result.best.state.best_epoch = state.best_epoch;
  result.history = state.history;
  result.best_dev_f1 = state.best_dev_f1;
  result.best_epoch = state.best_epoch;
  return result;
}

}  // namespace fcmf::training
