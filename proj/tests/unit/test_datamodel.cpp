#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "fcmf/datamodel/dataset.hpp"
#include "fcmf/datamodel/fcmt.hpp"
#include "fcmf/datamodel/preprocess.hpp"
#include "fcmf/datamodel/stats.hpp"
#include "fcmf/datamodel/synthetic.hpp"
#include "fcmf/datamodel/vocab.hpp"
#include "fcmf/errors.hpp"
#include "test_util.hpp"

using namespace fcmf;
using namespace fcmf::data;

namespace {

std::string join(const std::vector<std::string>& toks) {
  std::string out;
  for (const auto& t : toks) out += (out.empty() ? "" : " ") + t;
  return out;
}

void write_grid(const std::filesystem::path& p, std::uint32_t rows = 49, std::uint32_t cols = 2048) {
  std::vector<float> v(static_cast<std::size_t>(rows) * cols, 0.5f);
  const std::uint32_t dims[2] = {rows, cols};
  write_fcmt_file(p, dims, v);
}

void write_roi(const std::filesystem::path& p) {
  std::vector<float> v(2048, 0.25f);
  const std::uint32_t dims[1] = {2048};
  write_fcmt_file(p, dims, v);
}

}  // namespace

TEST_CASE("preprocess worked examples", "[datamodel][preprocess]") {
  CHECK(preprocess("Phòng   RẤT  sạch") == std::vector<std::string>{"phòng", "rất", "sạch"});
  CHECK(preprocess("").empty());
  CHECK(preprocess(" \t\n ").empty());

  // "ế" as e + combining circumflex + combining acute versus the precomposed code point.
  const std::string decomposed = "ti\x65\xCC\x82\xCC\x81ng";
  const std::string precomposed = "ti\xE1\xBA\xBFng";
  CHECK(preprocess(decomposed) == preprocess(precomposed));
  CHECK(preprocess(decomposed) == std::vector<std::string>{precomposed});

  PreprocessOptions lex;
  lex.lexicon = {"khách sạn"};
  CHECK(preprocess("khách sạn đẹp", lex) == std::vector<std::string>{"khách_sạn", "đẹp"});
  CHECK(preprocess("Khách  SẠN", lex) == std::vector<std::string>{"khách_sạn"});

  SECTION("longest match wins over a shorter prefix entry") {
    PreprocessOptions o;
    o.lexicon = {"bãi biển", "bãi biển mỹ khê"};
    CHECK(preprocess("gần bãi biển mỹ khê", o) == std::vector<std::string>{"gần", "bãi_biển_mỹ_khê"});
    CHECK(preprocess("gần bãi biển", o) == std::vector<std::string>{"gần", "bãi_biển"});
  }
  SECTION("control characters are stripped") {
    CHECK(preprocess("a\x01" "b c\x7f") == std::vector<std::string>{"ab", "c"});
  }
  SECTION("replacement table expands abbreviations") {
    PreprocessOptions o;
    o.replacements = {{"ks", "khách sạn"}};
    o.lexicon = {"khách sạn"};
    CHECK(preprocess("KS đẹp", o) == std::vector<std::string>{"khách_sạn", "đẹp"});
  }
  SECTION("disabled preprocessing splits on ASCII whitespace only") {
    PreprocessOptions o;
    o.enabled = false;
    CHECK(preprocess("Phòng   RẤT sạch", o) == std::vector<std::string>{"Phòng", "RẤT", "sạch"});
  }
}

TEST_CASE("preprocess is idempotent on random strings", "[datamodel][preprocess][property]") {
  const std::vector<std::string> pieces{"a",  "B",    "ph",   "Ò",  "ng", "\xCC\x81", "\xCC\x82", " ",
                                        "  ", "\t",   "\n",   "\x02", "đ",  "Đ",        "ư",        "_",
                                        "e",  "\xE1\xBA\xBF", "\xC2\xA0", "KHÁCH", "sạn", "x"};
  PreprocessOptions o;
  o.lexicon = {"khách sạn", "ph ò"};
  o.replacements = {{"x", "khách sạn"}};
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 500; ++trial) {
    std::string s;
    const auto len = gen() % 12;
    for (std::size_t i = 0; i < len; ++i) s += pieces[gen() % pieces.size()];
    const auto once = preprocess(s, o);
    INFO("input: " << s);
    CHECK(preprocess(join(once), o) == once);
    const auto plain = preprocess(s);
    CHECK(preprocess(join(plain)) == plain);
  }
}

TEST_CASE("FCMT header is bit exact", "[datamodel][fcmt]") {
  std::ostringstream os;
  const std::uint32_t dims[2] = {1, 2};
  const float vals[2] = {1.0f, -2.0f};
  write_fcmt(os, dims, vals);
  const std::string bytes = os.str();
  const std::string expected("FCMT\x01\x02\x01\x00\x00\x00\x02\x00\x00\x00"
                             "\x00\x00\x80\x3f\x00\x00\x00\xc0",
                             22);
  CHECK(bytes == expected);

  std::istringstream is(bytes);
  auto back = read_fcmt_f32(is);
  CHECK(back.dims == std::vector<std::uint32_t>{1, 2});
  CHECK(back.values == std::vector<float>{1.0f, -2.0f});

  std::ostringstream os2;
  const double dvals[2] = {0.1, 1e-300};
  write_fcmt(os2, dims, dvals);
  CHECK(static_cast<unsigned char>(os2.str()[4]) == 0x02);
  std::istringstream is2(os2.str());
  CHECK(read_fcmt_f64(is2).values == std::vector<double>{0.1, 1e-300});

  std::istringstream bad("FCMX\x01\x01");
  CHECK_THROWS_AS(read_fcmt_f32(bad), DataError);
  std::istringstream wrong_version(os2.str());
  CHECK_THROWS_AS(read_fcmt_f32(wrong_version), DataError);
}

TEST_CASE("load_dataset accepts the schema and rejects violations", "[datamodel][dataset]") {
  testutil::TempDir dir("ds");
  const auto file = dir.path() / "d.jsonl";

  SECTION("one line, no images") {
    testutil::spit(file, R"({"id":"a","text":"Phòng đẹp","images":[],"labels":{"Room":"positive"}})" "\n");
    auto ds = load_dataset(file);
    REQUIRE(ds.samples.size() == 1);
    const auto& s = ds.samples[0];
    CHECK(s.label(AspectCategory::Room) == SentimentLabel::Positive);
    std::size_t none = 0;
    for (auto a : kAspects) none += s.label(a) == SentimentLabel::None;
    CHECK(none == 5);
    CHECK(s.tokens == std::vector<std::string>{"phòng", "đẹp"});
  }
  SECTION("box overflowing the right edge names x+w > 1 and the line") {
    std::filesystem::create_directories(dir.path() / "f");
    write_grid(dir.path() / "f/g.fcmt");
    write_roi(dir.path() / "f/r.fcmt");
    testutil::spit(file, std::string(R"({"id":"ok","text":"","labels":{}})") + "\n" +
                             R"({"id":"b","text":"x","images":[{"feature_ref":"f/g.fcmt","rois":[{"feature_ref":"f/r.fcmt","box":[0.9,0.9,0.2,0.2]}]}],"labels":{}})" +
                             "\n");
    try {
      load_dataset(file);
      FAIL("expected rejection");
    } catch (const DataError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("x+w > 1") != std::string::npos);
      CHECK(msg.find("line 2") != std::string::npos);
    }
  }
  SECTION("unknown aspect, malformed JSON, bad label") {
    testutil::spit(file, R"({"id":"a","labels":{"Spa":"positive"}})" "\n");
    CHECK_THROWS_WITH(load_dataset(file), Catch::Matchers::ContainsSubstring("unknown aspect"));
    testutil::spit(file, "{\"id\":\n");
    CHECK_THROWS_WITH(load_dataset(file), Catch::Matchers::ContainsSubstring("malformed JSON"));
    testutil::spit(file, R"({"id":"a","labels":{"Room":"great"}})" "\n");
    CHECK_THROWS_AS(load_dataset(file), DataError);
  }
  SECTION("'Public Area' spelling and explicit none are accepted") {
    testutil::spit(file, R"({"id":"a","labels":{"Public Area":"neutral","Food":"none"}})" "\n");
    auto ds = load_dataset(file);
    CHECK(ds.samples[0].label(AspectCategory::PublicArea) == SentimentLabel::Neutral);
    CHECK(ds.samples[0].labels.size() == 1);
  }
  SECTION("feature files are checked") {
    std::filesystem::create_directories(dir.path() / "f");
    write_grid(dir.path() / "f/small.fcmt", 7, 2048);
    testutil::spit(file, R"({"id":"a","images":[{"feature_ref":"f/missing.fcmt"}],"labels":{}})" "\n");
    CHECK_THROWS_AS(load_dataset(file), IoError);
    testutil::spit(file, R"({"id":"a","images":[{"feature_ref":"f/small.fcmt"}],"labels":{}})" "\n");
    CHECK_THROWS_WITH(load_dataset(file), Catch::Matchers::ContainsSubstring("unexpected shape"));
    LoadOptions lax;
    lax.check_features = false;
    CHECK(load_dataset(file, lax).samples.size() == 1);
  }
  SECTION("too many images") {
    std::string imgs;
    for (int k = 0; k < 8; ++k) imgs += std::string(k ? "," : "") + R"({"feature_ref":"g"})";
    testutil::spit(file, R"({"id":"a","images":[)" + imgs + R"(],"labels":{}})" "\n");
    CHECK_THROWS_WITH(load_dataset(file), Catch::Matchers::ContainsSubstring("too many images"));
  }
}

TEST_CASE("vocabulary reserved block and persistence", "[datamodel][vocab]") {
  Vocabulary v;
  CHECK(v.id("<s>") == 0);
  CHECK(v.id("<pad>") == 1);
  CHECK(v.id("</s>") == 2);
  CHECK(v.id("<unk>") == 3);
  CHECK(v.id("room") == Vocabulary::aspect_id(AspectCategory::Room));
  CHECK(v.id("public_area") == 9);
  CHECK(v.id("never-seen") == Vocabulary::kUnk);

  MultimodalSample a, b;
  a.tokens = {"b", "a", "b", "c"};
  b.tokens = {"a", "b", "d"};
  auto built = Vocabulary::build({a, b});
  CHECK(built.token(10) == "b");
  CHECK(built.token(11) == "a");
  CHECK(built.token(12) == "c");
  CHECK(built.token(13) == "d");
  CHECK(Vocabulary::build({a, b}, 2).size() == 12);

  testutil::TempDir dir("vocab");
  built.save(dir.path() / "vocab.txt");
  CHECK(Vocabulary::load(dir.path() / "vocab.txt") == built);
  CHECK_THROWS_AS(built.token(99), DataError);
}

TEST_CASE("dataset_stats bookkeeping", "[datamodel][stats]") {
  MultimodalSample a, b;
  a.tokens = {"x", "y", "z"};
  b.tokens = {"x", "y", "z", "x", "w"};
  b.labels = {{AspectCategory::Room, SentimentLabel::Positive}, {AspectCategory::Food, SentimentLabel::Negative}};
  auto st = dataset_stats({a, b});
  CHECK(st.mean_tokens == 4.0);
  CHECK(st.mean_aspects == 1.0);
  CHECK(dataset_stats({b}).mean_aspects == 2.0);
  CHECK(st.top_tokens.front() == std::pair<std::string, std::size_t>{"x", 3});

  auto empty = dataset_stats({});
  CHECK(empty.reviews == 0);
  CHECK(empty.mean_tokens == 0.0);

  std::ostringstream os;
  write_stats_csv(os, st);
  CHECK(os.str().rfind("metric,value\nreviews,2\n", 0) == 0);
  CHECK(os.str().find("\ntoken,count\nx,3\n") != std::string::npos);
}

TEST_CASE("synthetic generator contracts", "[datamodel][synthetic]") {
  SyntheticConfig cfg;
  cfg.seed = 3;
  cfg.n_samples = 40;
  cfg.implicit_rate = 0.5;
  cfg.noise = 0.0;

  testutil::TempDir one("syn1"), two("syn2");
  auto r1 = generate_synthetic(cfg, one.path());
  generate_synthetic(cfg, two.path());

  SECTION("same seed gives byte-identical output") { CHECK(testutil::same_tree(one.path(), two.path())); }

  SECTION("different seed changes the output") {
    testutil::TempDir three("syn3");
    auto c2 = cfg;
    c2.seed = 4;
    generate_synthetic(c2, three.path());
    CHECK(testutil::slurp(one.path() / "train.jsonl") != testutil::slurp(three.path() / "train.jsonl"));
  }

  SECTION("written files load back to the same samples and satisfy every invariant") {
    std::vector<MultimodalSample> loaded;
    for (const char* split : {"train", "dev", "test"}) {
      auto ds = load_dataset(one.path() / (std::string(split) + ".jsonl"));
      loaded.insert(loaded.end(), ds.samples.begin(), ds.samples.end());
    }
    std::vector<MultimodalSample> generated = r1.train;
    generated.insert(generated.end(), r1.dev.begin(), r1.dev.end());
    generated.insert(generated.end(), r1.test.begin(), r1.test.end());
    CHECK(loaded == generated);
    for (const auto& s : loaded) {
      CHECK(s.images.size() <= kMaxImages);
      for (const auto& img : s.images) {
        CHECK(img.rois.size() <= kMaxRois);
        for (const auto& r : img.rois) CHECK_FALSE(box_violation(r.box).has_value());
      }
    }
    CHECK(r1.train.size() == 28);
    CHECK(r1.dev.size() == 6);
    CHECK(r1.test.size() == 6);
  }

  SECTION("stats equal the recipe totals") {
    std::vector<MultimodalSample> all = r1.train;
    all.insert(all.end(), r1.dev.begin(), r1.dev.end());
    all.insert(all.end(), r1.test.begin(), r1.test.end());
    auto st = dataset_stats(all);
    const auto& t = r1.recipe["totals"];
    CHECK(st.reviews == t["reviews"].get<std::size_t>());
    CHECK(st.tokens == t["tokens"].get<std::size_t>());
    CHECK(st.labeled_aspects == t["labeled_aspects"].get<std::size_t>());
    CHECK(st.images == t["images"].get<std::size_t>());
    CHECK(st.rois == t["rois"].get<std::size_t>());
    CHECK(st.sentiment_counts[index_of(SentimentLabel::Positive)] == t["positive"].get<std::size_t>());
    CHECK(st.sentiment_counts[index_of(SentimentLabel::Negative)] == t["negative"].get<std::size_t>());
    CHECK(st.sentiment_counts[index_of(SentimentLabel::Neutral)] == t["neutral"].get<std::size_t>());
    CHECK(t["implicit_aspects"].get<std::size_t>() > 0);
  }

  SECTION("implicit aspects carry no aspect cue in the text") {
    std::map<std::string, const MultimodalSample*> by_id;
    for (const auto* split : {&r1.train, &r1.dev, &r1.test})
      for (const auto& s : *split) by_id[s.id] = &s;
    for (const auto& p : r1.recipe["samples"]) {
      if (p["implicit"].is_null()) continue;
      const auto a = *parse_aspect(p["implicit"].get<std::string>());
      const auto& toks = by_id.at(p["id"].get<std::string>())->tokens;
      CHECK(std::find(toks.begin(), toks.end(), std::string(aspect_cue(a))) == toks.end());
    }
  }

  SECTION("nearest centroid recovers RoI categories at noise 0") {
    // Centroids estimated from the training split, then applied to every RoI.
    FeatureStore store(one.path());
    std::array<std::vector<double>, kNumAspects> centre;
    std::array<std::size_t, kNumAspects> count{};
    for (auto& c : centre) c.assign(kFeatureDim, 0.0);
    for (const auto& s : r1.train)
      for (const auto& img : s.images)
        for (const auto& r : img.rois) {
          if (!r.category) continue;
          const auto& f = store.roi(r.feature_ref).values;
          auto& c = centre[index_of(*r.category)];
          for (std::size_t i = 0; i < kFeatureDim; ++i) c[i] += f[i];
          ++count[index_of(*r.category)];
        }
    std::size_t total = 0, correct = 0;
    for (const auto* split : {&r1.train, &r1.dev, &r1.test})
      for (const auto& s : *split)
        for (const auto& img : s.images)
          for (const auto& r : img.rois) {
            if (!r.category || count[index_of(*r.category)] == 0) continue;
            const auto& f = store.roi(r.feature_ref).values;
            double best = INFINITY;
            std::size_t arg = 0;
            for (std::size_t a = 0; a < kNumAspects; ++a) {
              if (count[a] == 0) continue;
              double d = 0;
              for (std::size_t i = 0; i < kFeatureDim; ++i) {
                const double diff = f[i] - centre[a][i] / count[a];
                d += diff * diff;
              }
              if (d < best) best = d, arg = a;
            }
            ++total;
            correct += arg == index_of(*r.category);
          }
    REQUIRE(total > 0);
    CHECK(correct == total);
  }
}

TEST_CASE("implicit_rate 0 gives every labeled aspect a text cue", "[datamodel][synthetic]") {
  SyntheticConfig cfg;
  cfg.seed = 9;
  cfg.n_samples = 30;
  cfg.implicit_rate = 0.0;
  testutil::TempDir dir("syn0");
  auto r = generate_synthetic(cfg, dir.path());
  for (const auto* split : {&r.train, &r.dev, &r.test})
    for (const auto& s : *split)
      for (const auto& [a, l] : s.labels) {
        CHECK(std::find(s.tokens.begin(), s.tokens.end(), std::string(aspect_cue(a))) != s.tokens.end());
        CHECK(std::find(s.tokens.begin(), s.tokens.end(), std::string(sentiment_cue(a, l))) != s.tokens.end());
      }
  CHECK(r.recipe["totals"]["implicit_aspects"] == 0);

  auto bad = cfg;
  bad.implicit_rate = 1.5;
  CHECK_THROWS_AS(generate_synthetic(bad, dir.path()), ConfigError);
}
