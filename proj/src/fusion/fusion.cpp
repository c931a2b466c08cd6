#include "fcmf/fusion/fusion.hpp"

#include <cmath>

#include "fcmf/errors.hpp"
#include "fcmf/numerics/tape.hpp"

namespace fcmf::fusion {

void RelationParams::collect(num::ParamList& out, const std::string& prefix) const {
  query.collect(out, prefix + ".query");
  key.collect(out, prefix + ".key");
  value.collect(out, prefix + ".value");
  geometry.collect(out, prefix + ".geometry");
}

FusionParams FusionParams::init(const FusionConfig& c, num::Rng& rng) {
  if (c.heads == 0 || c.dim % c.heads != 0) {
    throw ConfigError("hidden size " + std::to_string(c.dim) + " is not divisible by " + std::to_string(c.heads) +
                      " attention heads");
  }
  if (c.geo_dim == 0 || c.geo_dim % 8 != 0) throw ConfigError("geometric embedding width must be a multiple of 8");
  FusionParams p;
  const std::size_t n_cm = c.share_cm ? 1 : c.max_images;
  for (std::size_t k = 0; k < n_cm; ++k) p.cm.push_back(num::MultiHeadAttentionParams::init(c.dim, c.heads, c.init_std, rng));
  p.relation.heads = c.heads;
  p.relation.geo_dim = c.geo_dim;
  p.relation.query = num::LinearParams::init(c.dim, c.dim, c.init_std, rng);
  p.relation.key = num::LinearParams::init(c.dim, c.dim, c.init_std, rng);
  p.relation.value = num::LinearParams::init(c.dim, c.dim, c.init_std, rng);
  p.relation.geometry = num::LinearParams::init(c.geo_dim, c.heads, c.init_std, rng);
  // Start with w_G ≈ 1 so the geometric term begins neutral (log 1 = 0).
  for (auto& b : p.relation.geometry.bias.data()) b = 1.0;
  p.text_object = num::MultiHeadAttentionParams::init(c.dim, c.heads, c.init_std, rng);
  p.multimodal = num::MultiHeadAttentionParams::init(c.dim, c.heads, c.init_std, rng);
  p.classifier = num::LinearParams::init(c.dim, c.num_classes, c.init_std, rng);
  return p;
}

void FusionParams::collect(num::ParamList& out, const std::string& prefix) const {
  for (std::size_t k = 0; k < cm.size(); ++k) cm[k].collect(out, prefix + ".cm" + std::to_string(k));
  relation.collect(out, prefix + ".relation");
  text_object.collect(out, prefix + ".text_object");
  multimodal.collect(out, prefix + ".multimodal");
  classifier.collect(out, prefix + ".classifier");
}

std::array<double, 4> pair_geometry(const data::Box& bi, const data::Box& bj, double eps) {
  if (!(bi.w > 0 && bi.h > 0 && bj.w > 0 && bj.h > 0)) throw DataError("box width and height must be positive");
  const double xi = bi.x + 0.5 * bi.w, yi = bi.y + 0.5 * bi.h;
  const double xj = bj.x + 0.5 * bj.w, yj = bj.y + 0.5 * bj.h;
  return {std::log(std::max(std::abs(xi - xj), eps) / bi.w), std::log(std::max(std::abs(yi - yj), eps) / bi.h),
          std::log(bj.w / bi.w), std::log(bj.h / bi.h)};
}

Tensor geometric_embedding(const std::vector<data::Box>& boxes, std::size_t geo_dim, double eps) {
  if (geo_dim == 0 || geo_dim % 8 != 0) throw ConfigError("geometric embedding width must be a multiple of 8");
  const std::size_t j = boxes.size();
  if (j == 0) throw DimensionError("geometric embedding needs at least one box");
  const std::size_t freqs = geo_dim / 8;
  std::vector<double> out(j * j * geo_dim);
  for (std::size_t a = 0; a < j; ++a) {
    for (std::size_t b = 0; b < j; ++b) {
      const auto g = pair_geometry(boxes[a], boxes[b], eps);
      double* row = out.data() + (a * j + b) * geo_dim;
      // Layout per coordinate c: [sin f0, cos f0, sin f1, cos f1, ...].
      for (std::size_t c = 0; c < 4; ++c) {
        for (std::size_t k = 0; k < freqs; ++k) {
          const double freq = std::pow(1000.0, static_cast<double>(k) / static_cast<double>(freqs));
          const double v = 100.0 * g[c] / freq;
          row[c * 2 * freqs + 2 * k] = std::sin(v);
          row[c * 2 * freqs + 2 * k + 1] = std::cos(v);
        }
      }
    }
  }
  return Tensor(num::Shape{j * j, geo_dim}, std::move(out));
}

Tensor relation_bias(const RelationParams& params, const std::vector<data::Box>& boxes) {
  const Tensor e = geometric_embedding(boxes, params.geo_dim);
  const Tensor w_g = num::relu(params.geometry(e));  // (J·J) × heads
  return num::transpose(num::log_clamped(w_g, kGeometryWeightFloor));
}

Tensor object_relation(const Tensor& v_r, const std::vector<data::Box>& boxes, const RelationParams& params,
                       const num::RunContext& ctx) {
  if (v_r.rows() != boxes.size()) {
    throw DimensionError("object_relation: " + std::to_string(v_r.rows()) + " RoI rows but " +
                         std::to_string(boxes.size()) + " boxes");
  }
  const Tensor bias = relation_bias(params, boxes);
  Tensor a = num::attention(params.query(v_r), params.key(v_r), params.value(v_r), {}, params.heads, bias);
  a = num::dropout(a, ctx.dropout, ctx.training, ctx.rng);
  return num::add(v_r, a);
}

std::vector<std::vector<std::vector<double>>> object_relation_weights(const Tensor& v_r,
                                                                      const std::vector<data::Box>& boxes,
                                                                      const RelationParams& params) {
  num::Tape::Pause pause;
  const std::size_t j = boxes.size(), h = params.heads;
  // Value rows are one-hot per head, so the attention output is the weight matrix itself.
  Tensor eye(num::Shape{j, h * j});
  for (std::size_t r = 0; r < j; ++r)
    for (std::size_t head = 0; head < h; ++head) eye[r * h * j + head * j + r] = 1.0;
  const Tensor out = num::attention(params.query(v_r), params.key(v_r), eye, {}, h, relation_bias(params, boxes));
  std::vector<std::vector<std::vector<double>>> w(h, std::vector<std::vector<double>>(j, std::vector<double>(j)));
  for (std::size_t head = 0; head < h; ++head)
    for (std::size_t r = 0; r < j; ++r)
      for (std::size_t c = 0; c < j; ++c) w[head][r][c] = out.at(r, head * j + c);
  return w;
}

SlotRows masked_rows(std::size_t slots, std::size_t dim) {
  return SlotRows{Tensor(num::Shape{slots, dim}, 0.0), KeyMask(slots, 1)};
}

namespace {

void check_query(const Tensor& h_t, std::size_t dim) {
  if (h_t.rank() != 2 || h_t.cols() != dim) {
    throw DimensionError("expected hidden states of width " + std::to_string(dim) + ", got " +
                         num::shape_str(h_t.shape()));
  }
}

SlotRows stack_slots(const std::vector<Tensor>& rows, const KeyMask& mask, std::size_t dim) {
  std::vector<Tensor> parts;
  const Tensor zero(num::Shape{1, dim}, 0.0);
  for (std::size_t k = 0; k < mask.size(); ++k) parts.push_back(mask[k] ? zero : rows[k]);
  return SlotRows{num::concat_rows(parts), mask};
}

}  // namespace

SlotRows image_guided_attention(const Tensor& h_t, const std::vector<Tensor>& grids, const KeyMask& image_mask,
                                const FusionParams& params, const num::RunContext& ctx) {
  const std::size_t d = params.dim();
  check_query(h_t, d);
  if (grids.size() != image_mask.size()) throw DimensionError("image grids and image mask differ in length");
  const Tensor query = num::slice_rows(h_t, 0, 1);
  std::vector<Tensor> rows(grids.size());
  for (std::size_t k = 0; k < grids.size(); ++k) {
    if (image_mask[k]) continue;
    if (!grids[k].defined() || grids[k].cols() != d) {
      throw DimensionError("unmasked image slot " + std::to_string(k) + " lacks a (cells × " + std::to_string(d) +
                           ") grid");
    }
    Tensor r = params.cm_for(k)(query, grids[k], {});
    rows[k] = num::dropout(r, ctx.dropout, ctx.training, ctx.rng);
  }
  return stack_slots(rows, image_mask, d);
}

Tensor geometric_roi_attention(const Tensor& h_t, const Tensor& h_o, const FusionParams& params,
                               const num::RunContext& ctx) {
  const std::size_t d = params.dim();
  check_query(h_t, d);
  Tensor keys = h_t;
  if (h_o.defined()) {
    if (h_o.cols() != d) throw DimensionError("H_O width differs from the model width");
    keys = num::concat_rows({h_t, h_o});
  }
  Tensor r = params.text_object(num::slice_rows(h_t, 0, 1), keys, {});
  return num::dropout(r, ctx.dropout, ctx.training, ctx.rng);
}

SlotRows geometric_rows(const Tensor& h_t, const std::vector<Tensor>& h_o, const KeyMask& image_mask,
                        const FusionParams& params, const num::RunContext& ctx) {
  if (h_o.size() != image_mask.size()) throw DimensionError("H_O list and image mask differ in length");
  std::vector<Tensor> rows(h_o.size());
  for (std::size_t k = 0; k < h_o.size(); ++k) {
    if (image_mask[k]) continue;
    rows[k] = geometric_roi_attention(h_t, h_o[k], params, ctx);
  }
  return stack_slots(rows, image_mask, params.dim());
}

Tensor fuse_logits(const Tensor& h_s, const SlotRows& h_i, const SlotRows& h_r, const FusionParams& params,
                   const num::RunContext& ctx) {
  const std::size_t d = params.dim();
  check_query(h_s, d);
  if (h_s.rows() != 1) throw DimensionError("H_<s> must be a single row");
  if (h_i.rows.cols() != d || h_r.rows.cols() != d) throw DimensionError("fusion rows differ in width");
  if (h_i.rows.rows() != h_i.mask.size() || h_r.rows.rows() != h_r.mask.size()) {
    throw DimensionError("fusion rows and masks differ in length");
  }
  const Tensor h_m = num::concat_rows({h_s, h_i.rows, h_r.rows});
  KeyMask mask{0};
  mask.insert(mask.end(), h_i.mask.begin(), h_i.mask.end());
  mask.insert(mask.end(), h_r.mask.begin(), h_r.mask.end());
  Tensor h0 = params.multimodal(h_s, h_m, mask);
  h0 = num::dropout(h0, ctx.dropout, ctx.training, ctx.rng);
  return params.classifier(h0);
}

std::array<double, data::kNumLabels> fuse_and_classify(const Tensor& h_s, const SlotRows& h_i, const SlotRows& h_r,
                                                       const FusionParams& params) {
  num::Tape::Pause pause;
  const Tensor p = num::softmax(fuse_logits(h_s, h_i, h_r, params, {}));
  std::array<double, data::kNumLabels> out{};
  for (std::size_t c = 0; c < data::kNumLabels; ++c) out[c] = p[c];
  return out;
}

}  // namespace fcmf::fusion
