#include "fcmf/datamodel/dataset.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "fcmf/errors.hpp"

namespace fcmf::data {

namespace {

using nlohmann::json;

[[noreturn]] void fail(std::size_t line_no, const std::string& what) {
  throw DataError("line " + std::to_string(line_no) + ": " + what);
}

std::string get_string(const json& obj, const char* key, std::size_t line_no, bool required) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (required) fail(line_no, std::string("missing field '") + key + "'");
    return {};
  }
  if (!it->is_string()) fail(line_no, std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

AspectCategory get_aspect(const json& v, std::size_t line_no) {
  if (!v.is_string()) fail(line_no, "aspect category must be a string");
  auto a = parse_aspect(v.get<std::string>());
  if (!a) fail(line_no, "unknown aspect category '" + v.get<std::string>() + "'");
  return *a;
}

Box get_box(const json& v, std::size_t line_no) {
  if (!v.is_array() || v.size() != 4) fail(line_no, "box must be an array of 4 numbers");
  for (const auto& c : v)
    if (!c.is_number()) fail(line_no, "box must be an array of 4 numbers");
  Box b{v[0].get<double>(), v[1].get<double>(), v[2].get<double>(), v[3].get<double>()};
  if (auto why = box_violation(b)) fail(line_no, "invalid box: " + *why);
  return b;
}

void check_feature(const std::filesystem::path& base, const std::string& ref,
                   const std::vector<std::uint32_t>& expected, std::size_t line_no) {
  const auto path = base / ref;
  if (!std::filesystem::exists(path)) {
    throw IoError("line " + std::to_string(line_no) + ": missing feature file '" + ref + "'");
  }
  std::vector<std::uint32_t> dims;
  try {
    dims = read_fcmt_dims(path);
  } catch (const DataError& e) {
    fail(line_no, e.what());
  }
  if (dims != expected) fail(line_no, "feature file '" + ref + "' has unexpected shape");
}

}  // namespace

MultimodalSample parse_sample(const std::string& line, std::size_t line_no, const LoadOptions& options) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    fail(line_no, std::string("malformed JSON: ") + e.what());
  }
  if (!obj.is_object()) fail(line_no, "expected a JSON object");

  MultimodalSample s;
  s.id = get_string(obj, "id", line_no, true);
  s.raw_text = get_string(obj, "text", line_no, false);
  s.tokens = preprocess(s.raw_text, options.preprocess);

  if (auto it = obj.find("images"); it != obj.end()) {
    if (!it->is_array()) fail(line_no, "'images' must be an array");
    if (it->size() > options.max_images) {
      fail(line_no, "too many images (" + std::to_string(it->size()) + " > " +
                        std::to_string(options.max_images) + ")");
    }
    for (const auto& img : *it) {
      if (!img.is_object()) fail(line_no, "image entry must be an object");
      ImageEntry entry;
      entry.feature_ref = get_string(img, "feature_ref", line_no, true);
      if (auto c = img.find("categories"); c != img.end() && !c->is_null()) {
        if (!c->is_array()) fail(line_no, "'categories' must be an array");
        std::vector<AspectCategory> cats;
        for (const auto& v : *c) cats.push_back(get_aspect(v, line_no));
        entry.categories = std::move(cats);
      }
      if (auto r = img.find("rois"); r != img.end()) {
        if (!r->is_array()) fail(line_no, "'rois' must be an array");
        if (r->size() > options.max_rois) {
          fail(line_no, "too many RoIs (" + std::to_string(r->size()) + " > " +
                            std::to_string(options.max_rois) + ")");
        }
        for (const auto& rv : *r) {
          if (!rv.is_object()) fail(line_no, "RoI entry must be an object");
          RoI roi;
          roi.feature_ref = get_string(rv, "feature_ref", line_no, true);
          auto b = rv.find("box");
          if (b == rv.end()) fail(line_no, "RoI missing 'box'");
          roi.box = get_box(*b, line_no);
          if (auto c = rv.find("category"); c != rv.end() && !c->is_null()) roi.category = get_aspect(*c, line_no);
          entry.rois.push_back(std::move(roi));
        }
      }
      s.images.push_back(std::move(entry));
    }
  }

  if (auto it = obj.find("labels"); it != obj.end()) {
    if (!it->is_object()) fail(line_no, "'labels' must be an object");
    for (const auto& [key, value] : it->items()) {
      auto a = parse_aspect(key);
      if (!a) fail(line_no, "unknown aspect category '" + key + "'");
      if (!value.is_string()) fail(line_no, "label for '" + key + "' must be a string");
      auto l = parse_label(value.get<std::string>());
      if (!l) fail(line_no, "unknown sentiment label '" + value.get<std::string>() + "'");
      if (*l != SentimentLabel::None) s.labels[*a] = *l;
    }
  }
  return s;
}

Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open dataset " + path.string());
  Dataset ds;
  ds.base_dir = path.parent_path();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto s = parse_sample(line, line_no, options);
    if (options.check_features) {
      for (const auto& img : s.images) {
        check_feature(ds.base_dir, img.feature_ref,
                      {static_cast<std::uint32_t>(kGridCells), static_cast<std::uint32_t>(kFeatureDim)}, line_no);
        for (const auto& roi : img.rois) {
          check_feature(ds.base_dir, roi.feature_ref, {static_cast<std::uint32_t>(kFeatureDim)}, line_no);
        }
      }
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

std::string sample_to_json_line(const MultimodalSample& s) {
  nlohmann::ordered_json obj;
  obj["id"] = s.id;
  obj["text"] = s.raw_text;
  auto images = nlohmann::ordered_json::array();
  for (const auto& img : s.images) {
    nlohmann::ordered_json e;
    e["feature_ref"] = img.feature_ref;
    if (img.categories) {
      auto cats = nlohmann::ordered_json::array();
      for (auto c : *img.categories) cats.push_back(std::string(aspect_name(c)));
      e["categories"] = cats;
    }
    auto rois = nlohmann::ordered_json::array();
    for (const auto& r : img.rois) {
      nlohmann::ordered_json rj;
      rj["feature_ref"] = r.feature_ref;
      rj["box"] = {r.box.x, r.box.y, r.box.w, r.box.h};
      if (r.category) rj["category"] = std::string(aspect_name(*r.category));
      rois.push_back(rj);
    }
    e["rois"] = rois;
    images.push_back(e);
  }
  obj["images"] = images;
  nlohmann::ordered_json labels = nlohmann::ordered_json::object();
  for (const auto& [a, l] : s.labels) labels[std::string(aspect_name(a))] = std::string(label_name(l));
  obj["labels"] = labels;
  return obj.dump();
}

void write_dataset(const std::filesystem::path& path, const std::vector<MultimodalSample>& samples) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  for (const auto& s : samples) os << sample_to_json_line(s) << '\n';
}

const FeatureArray& FeatureStore::grid(const std::string& ref) {
  return load(ref, {static_cast<std::uint32_t>(kGridCells), static_cast<std::uint32_t>(kFeatureDim)});
}

const FeatureArray& FeatureStore::roi(const std::string& ref) {
  return load(ref, {static_cast<std::uint32_t>(kFeatureDim)});
}

const FeatureArray& FeatureStore::load(const std::string& ref, const std::vector<std::uint32_t>& expected) {
  auto it = cache_.find(ref);
  if (it == cache_.end()) {
    auto arr = std::make_shared<FeatureArray>(read_fcmt_file(resolve(ref)));
    if (arr->dims != expected) throw DataError("feature file '" + ref + "' has unexpected shape");
    it = cache_.emplace(ref, std::move(arr)).first;
  }
  return *it->second;
}

}  // namespace fcmf::data
