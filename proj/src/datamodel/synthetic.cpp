#include "fcmf/datamodel/synthetic.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <optional>
#include <fstream>

#include "fcmf/datamodel/dataset.hpp"
#include "fcmf/datamodel/fcmt.hpp"
#include "fcmf/datamodel/preprocess.hpp"
#include "fcmf/errors.hpp"
#include "fcmf/numerics/rng.hpp"

namespace fcmf::data {

namespace {

constexpr std::array<std::string_view, kNumAspects> kAspectCues{"vị_trí",    "đồ_ăn",    "phòng",
                                                                "tiện_nghi", "phục_vụ", "hồ_bơi"};

// [aspect][negative, neutral, positive]
constexpr std::array<std::array<std::string_view, 3>, kNumAspects> kSentimentCues{{
    {"xa_xôi", "tạm_được", "thuận_tiện"},
    {"nhạt_nhẽo", "vừa_miệng", "ngon"},
    {"ẩm_mốc", "vừa_phải", "sạch_sẽ"},
    {"hư_hỏng", "đủ_dùng", "hiện_đại"},
    {"thô_lỗ", "bình_thường", "nhiệt_tình"},
    {"ồn_ào", "khá_rộng", "thoáng_mát"},
}};

constexpr std::array<std::string_view, 3> kGenericCues{"thất_vọng", "tạm_ổn", "tuyệt_vời"};

constexpr std::array<std::string_view, 12> kFillers{"khách_sạn", "chúng_tôi", "ở", "đây", "lần",  "này",
                                                    "thấy",      "và",        "nhưng", "cũng", "đến", "nói_chung"};

using Vec = std::vector<float>;

struct Centroids {
  std::array<Vec, kNumAspects> aspect;
  Vec background;
};

Centroids make_centroids() {
  num::Rng rng(num::splitmix64(kCentroidSeed));
  Centroids c;
  auto draw = [&] {
    Vec v(kFeatureDim);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    return v;
  };
  for (auto& v : c.aspect) v = draw();
  c.background = draw();
  return c;
}

void add_noisy(float* dst, const Vec& centre, double noise, num::Rng& rng) {
  for (std::size_t i = 0; i < kFeatureDim; ++i) {
    const double n = noise > 0 ? noise * rng.normal() : 0.0;
    dst[i] = static_cast<float>(centre[i] + n);
  }
}

double round4(double v) { return std::floor(v * 1e4) / 1e4; }

Box random_box(num::Rng& rng) {
  const double w = round4(0.1 + 0.4 * rng.uniform());
  const double h = round4(0.1 + 0.4 * rng.uniform());
  return Box{round4(rng.uniform() * (1.0 - w)), round4(rng.uniform() * (1.0 - h)), w, h};
}

SentimentLabel draw_sentiment(num::Rng& rng) {
  const double u = rng.uniform();
  if (u < 0.5) return SentimentLabel::Positive;
  if (u < 0.8) return SentimentLabel::Negative;
  return SentimentLabel::Neutral;
}

// ASCII-only case changes; non-ASCII letters are left alone.
std::string capitalize_first(const std::string& w) {
  std::string out = w;
  if (!out.empty() && static_cast<unsigned char>(out[0]) < 0x80) {
    out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  }
  return out;
}

std::string ascii_upper(const std::string& w) {
  std::string out = w;
  for (auto& ch : out) {
    auto c = static_cast<unsigned char>(ch);
    if (c < 0x80) ch = static_cast<char>(std::toupper(c));
  }
  return out;
}

struct Writer {
  std::filesystem::path dir;
  std::size_t files = 0;
  void write(const std::string& ref, std::span<const std::uint32_t> dims, const Vec& values) {
    write_fcmt_file(dir / ref, dims, values);
    ++files;
  }
};

}  // namespace

std::string_view aspect_cue(AspectCategory a) { return kAspectCues[index_of(a)]; }

std::string_view sentiment_cue(AspectCategory a, SentimentLabel l) {
  if (l == SentimentLabel::None) throw DataError("no sentiment cue for the none label");
  return kSentimentCues[index_of(a)][index_of(l) - 1];
}

std::string_view generic_cue(SentimentLabel l) {
  if (l == SentimentLabel::None) throw DataError("no generic cue for the none label");
  return kGenericCues[index_of(l) - 1];
}

SyntheticResult generate_synthetic(const SyntheticConfig& cfg, const std::filesystem::path& out_dir) {
  auto check_rate = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0, 1]");
  };
  check_rate(cfg.implicit_rate, "implicit_rate");
  check_rate(cfg.image_rate, "image_rate");
  check_rate(cfg.irrelevant_image_rate, "irrelevant_image_rate");
  if (!(cfg.noise >= 0.0)) throw ConfigError("noise must be nonnegative");
  if (!(cfg.dev_fraction >= 0 && cfg.test_fraction >= 0 && cfg.dev_fraction + cfg.test_fraction < 1.0)) {
    throw ConfigError("dev_fraction + test_fraction must be below 1");
  }

  std::filesystem::create_directories(out_dir / "features");
  Writer writer{out_dir};
  const Centroids centroids = make_centroids();
  num::RngStreams streams(cfg.seed);
  num::Rng& rng = streams.stream("synthetic");

  const std::size_t n_test = static_cast<std::size_t>(std::llround(cfg.test_fraction * cfg.n_samples));
  const std::size_t n_dev = static_cast<std::size_t>(std::llround(cfg.dev_fraction * cfg.n_samples));
  const std::size_t n_train = cfg.n_samples - n_dev - n_test;

  SyntheticResult result;
  nlohmann::ordered_json planted = nlohmann::ordered_json::array();
  std::size_t total_tokens = 0, total_images = 0, total_rois = 0, total_implicit = 0, total_labels = 0;
  std::array<std::size_t, kNumLabels> sentiment_totals{};

  const std::uint32_t grid_dims[2] = {static_cast<std::uint32_t>(kGridCells), static_cast<std::uint32_t>(kFeatureDim)};
  const std::uint32_t roi_dims[1] = {static_cast<std::uint32_t>(kFeatureDim)};

  for (std::size_t i = 0; i < cfg.n_samples; ++i) {
    MultimodalSample s;
    char idbuf[16];
    std::snprintf(idbuf, sizeof idbuf, "s%05zu", i);
    s.id = idbuf;

    std::vector<AspectCategory> pool(kAspects.begin(), kAspects.end());
    rng.shuffle(pool.begin(), pool.end());
    const std::size_t n_labeled = 1 + rng.below(3);
    std::vector<AspectCategory> labeled(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_labeled));
    std::sort(labeled.begin(), labeled.end());
    for (auto a : labeled) s.labels[a] = draw_sentiment(rng);

    std::optional<AspectCategory> implicit;
    if (rng.bernoulli(cfg.implicit_rate)) implicit = labeled[rng.below(labeled.size())];

    // Text: one cue phrase per explicit aspect, a generic polarity word for the implicit one, fillers around.
    std::vector<std::vector<std::string>> phrases;
    nlohmann::ordered_json cues = nlohmann::ordered_json::object();
    for (auto a : labeled) {
      if (implicit && *implicit == a) {
        phrases.push_back({std::string(generic_cue(s.labels[a]))});
        cues[std::string(aspect_name(a))] = nlohmann::ordered_json::array();
      } else {
        phrases.push_back({std::string(aspect_cue(a)), std::string(sentiment_cue(a, s.labels[a]))});
        cues[std::string(aspect_name(a))] = {std::string(aspect_cue(a)), std::string(sentiment_cue(a, s.labels[a]))};
      }
    }
    rng.shuffle(phrases.begin(), phrases.end());
    std::vector<std::string> words;
    for (const auto& p : phrases) {
      const std::size_t n_fill = rng.below(3);
      for (std::size_t f = 0; f < n_fill; ++f) words.emplace_back(kFillers[rng.below(kFillers.size())]);
      words.insert(words.end(), p.begin(), p.end());
    }
    if (rng.bernoulli(0.5)) words.emplace_back(kFillers[rng.below(kFillers.size())]);

    std::string text;
    for (std::size_t w = 0; w < words.size(); ++w) {
      std::string word = words[w];
      if (w == 0 && rng.bernoulli(0.5)) word = capitalize_first(word);
      if (rng.bernoulli(0.05)) word = ascii_upper(word);
      if (w > 0) text += rng.bernoulli(0.1) ? "  " : " ";
      text += word;
    }
    if (rng.bernoulli(0.2)) text = to_nfd(text);
    s.raw_text = text;
    s.tokens = preprocess(text);
    total_tokens += s.tokens.size();

    // Images.
    auto make_grid = [&](const std::vector<AspectCategory>& cats) {
      Vec grid(kGridCells * kFeatureDim);
      std::vector<int> owner(kGridCells, -1);
      std::vector<std::size_t> cells(kGridCells);
      for (std::size_t c = 0; c < kGridCells; ++c) cells[c] = c;
      rng.shuffle(cells.begin(), cells.end());
      std::size_t next = 0;
      for (auto a : cats) {
        const std::size_t span = 10 + rng.below(11);
        for (std::size_t c = 0; c < span && next < kGridCells; ++c) owner[cells[next++]] = static_cast<int>(index_of(a));
      }
      for (std::size_t c = 0; c < kGridCells; ++c) {
        const Vec& centre = owner[c] < 0 ? centroids.background : centroids.aspect[static_cast<std::size_t>(owner[c])];
        add_noisy(grid.data() + c * kFeatureDim, centre, cfg.noise, rng);
      }
      return grid;
    };

    struct PendingImage {
      std::vector<AspectCategory> cats;
      std::vector<std::optional<AspectCategory>> roi_cats;
    };
    std::vector<PendingImage> pending;
    if (implicit) {
      PendingImage p{{*implicit}, {}};
      const std::size_t n_roi = 1 + rng.below(3);
      for (std::size_t r = 0; r < n_roi; ++r) p.roi_cats.emplace_back(*implicit);
      pending.push_back(std::move(p));
    }
    std::vector<AspectCategory> explicit_aspects;
    for (auto a : labeled)
      if (!(implicit && *implicit == a)) explicit_aspects.push_back(a);
    if (!explicit_aspects.empty() && rng.bernoulli(cfg.image_rate)) {
      PendingImage p{explicit_aspects, {}};
      for (auto a : explicit_aspects) p.roi_cats.emplace_back(a);
      pending.push_back(std::move(p));
    }
    if (rng.bernoulli(cfg.irrelevant_image_rate)) {
      PendingImage p{{}, {}};
      if (rng.bernoulli(0.5)) p.roi_cats.emplace_back(std::nullopt);
      pending.push_back(std::move(p));
    }
    rng.shuffle(pending.begin(), pending.end());

    for (std::size_t k = 0; k < pending.size(); ++k) {
      ImageEntry img;
      img.feature_ref = "features/" + s.id + "_img" + std::to_string(k) + ".fcmt";
      img.categories = pending[k].cats;
      writer.write(img.feature_ref, grid_dims, make_grid(pending[k].cats));
      for (std::size_t j = 0; j < pending[k].roi_cats.size(); ++j) {
        RoI roi;
        roi.feature_ref = "features/" + s.id + "_img" + std::to_string(k) + "_roi" + std::to_string(j) + ".fcmt";
        roi.box = random_box(rng);
        roi.category = pending[k].roi_cats[j];
        Vec feat(kFeatureDim);
        add_noisy(feat.data(), roi.category ? centroids.aspect[index_of(*roi.category)] : centroids.background,
                  cfg.noise, rng);
        writer.write(roi.feature_ref, roi_dims, feat);
        img.rois.push_back(std::move(roi));
        ++total_rois;
      }
      s.images.push_back(std::move(img));
      ++total_images;
    }

    total_labels += s.labels.size();
    for (const auto& [a, l] : s.labels) ++sentiment_totals[index_of(l)];
    if (implicit) ++total_implicit;

    const char* split = i < n_train ? "train" : (i < n_train + n_dev ? "dev" : "test");
    nlohmann::ordered_json labels = nlohmann::ordered_json::object();
    for (const auto& [a, l] : s.labels) labels[std::string(aspect_name(a))] = std::string(label_name(l));
    planted.push_back({{"id", s.id},
                       {"split", split},
                       {"labels", labels},
                       {"implicit", implicit ? nlohmann::ordered_json(std::string(aspect_name(*implicit)))
                                             : nlohmann::ordered_json(nullptr)},
                       {"cues", cues}});

    if (i < n_train) {
      result.train.push_back(std::move(s));
    } else if (i < n_train + n_dev) {
      result.dev.push_back(std::move(s));
    } else {
      result.test.push_back(std::move(s));
    }
  }

  write_dataset(out_dir / "train.jsonl", result.train);
  write_dataset(out_dir / "dev.jsonl", result.dev);
  write_dataset(out_dir / "test.jsonl", result.test);

  nlohmann::ordered_json recipe;
  recipe["config"] = {{"seed", cfg.seed},
                      {"n_samples", cfg.n_samples},
                      {"implicit_rate", cfg.implicit_rate},
                      {"noise", cfg.noise},
                      {"image_rate", cfg.image_rate},
                      {"irrelevant_image_rate", cfg.irrelevant_image_rate},
                      {"dev_fraction", cfg.dev_fraction},
                      {"test_fraction", cfg.test_fraction}};
  recipe["centroid_seed"] = kCentroidSeed;
  nlohmann::ordered_json lex = nlohmann::ordered_json::object();
  for (auto a : kAspects) {
    lex[std::string(aspect_name(a))] = {
        {"aspect", std::string(aspect_cue(a))},
        {"negative", std::string(sentiment_cue(a, SentimentLabel::Negative))},
        {"neutral", std::string(sentiment_cue(a, SentimentLabel::Neutral))},
        {"positive", std::string(sentiment_cue(a, SentimentLabel::Positive))}};
  }
  recipe["lexicon"] = lex;
  recipe["generic"] = {{"negative", std::string(kGenericCues[0])},
                       {"neutral", std::string(kGenericCues[1])},
                       {"positive", std::string(kGenericCues[2])}};
  recipe["totals"] = {{"reviews", cfg.n_samples},
                      {"train", result.train.size()},
                      {"dev", result.dev.size()},
                      {"test", result.test.size()},
                      {"tokens", total_tokens},
                      {"labeled_aspects", total_labels},
                      {"implicit_aspects", total_implicit},
                      {"negative", sentiment_totals[index_of(SentimentLabel::Negative)]},
                      {"neutral", sentiment_totals[index_of(SentimentLabel::Neutral)]},
                      {"positive", sentiment_totals[index_of(SentimentLabel::Positive)]},
                      {"images", total_images},
                      {"rois", total_rois},
                      {"feature_files", writer.files}};
  recipe["samples"] = planted;

  std::ofstream os(out_dir / "recipe.json");
  if (!os) throw IoError("cannot write " + (out_dir / "recipe.json").string());
  os << recipe.dump(1) << '\n';
  result.recipe = nlohmann::json::parse(recipe.dump());
  return result;
}

}  // namespace fcmf::data
