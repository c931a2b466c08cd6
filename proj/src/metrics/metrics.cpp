#include "fcmf/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

#include "fcmf/errors.hpp"

namespace fcmf::metrics {

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::vector<int> all_classes(std::size_t n) {
  std::vector<int> c(n);
  std::iota(c.begin(), c.end(), 0);
  return c;
}

MacroScores mean_of(const std::vector<MacroScores>& xs) {
  MacroScores m;
  if (xs.empty()) return m;
  for (const auto& x : xs) {
    m.precision += x.precision;
    m.recall += x.recall;
    m.f1 += x.f1;
  }
  const double n = static_cast<double>(xs.size());
  m.precision /= n;
  m.recall /= n;
  m.f1 /= n;
  return m;
}

}  // namespace

ClassReport macro_prf1(const std::vector<int>& gold, const std::vector<int>& pred, std::size_t num_classes,
                       const std::vector<int>& classes) {
  if (gold.size() != pred.size()) {
    throw DataError("gold and predicted label lists differ in length (" + std::to_string(gold.size()) + " vs " +
                    std::to_string(pred.size()) + ")");
  }
  ClassReport r;
  r.classes.resize(num_classes);
  r.in_class_set.assign(num_classes, false);
  r.decisions = gold.size();
  for (int c : classes) {
    if (c < 0 || static_cast<std::size_t>(c) >= num_classes) throw DataError("class id out of range");
    r.in_class_set[static_cast<std::size_t>(c)] = true;
  }
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const int g = gold[i], p = pred[i];
    if (g < 0 || p < 0 || static_cast<std::size_t>(g) >= num_classes || static_cast<std::size_t>(p) >= num_classes) {
      throw DataError("label out of range at position " + std::to_string(i));
    }
    for (std::size_t c = 0; c < num_classes; ++c) {
      const bool is_g = static_cast<std::size_t>(g) == c, is_p = static_cast<std::size_t>(p) == c;
      auto& s = r.classes[c];
      if (is_g && is_p) ++s.tp;
      else if (is_p) ++s.fp;
      else if (is_g) ++s.fn;
      else ++s.tn;
    }
  }
  std::vector<MacroScores> per;
  for (std::size_t c = 0; c < num_classes; ++c) {
    auto& s = r.classes[c];
    s.precision = ratio(s.tp, s.tp + s.fp);
    s.recall = ratio(s.tp, s.tp + s.fn);
    s.f1 = ratio(2 * s.tp, 2 * s.tp + s.fp + s.fn);
    s.absent = s.tp + s.fp + s.fn == 0;
    if (r.in_class_set[c] && !s.absent) per.push_back({s.precision, s.recall, s.f1});
  }
  r.counted = per.size();
  r.macro = mean_of(per);
  return r;
}

ClassReport macro_prf1(const std::vector<int>& gold, const std::vector<int>& pred, std::size_t num_classes) {
  return macro_prf1(gold, pred, num_classes, all_classes(num_classes));
}

EvalReport evaluate_predictions(const std::vector<std::array<int, data::kNumAspects>>& gold,
                                const std::vector<std::array<int, data::kNumAspects>>& pred,
                                const EvalOptions& options) {
  if (gold.size() != pred.size()) throw DataError("gold and predicted sample counts differ");
  EvalReport rep;
  rep.options = options;
  rep.pairs = gold.size() * data::kNumAspects;
  std::vector<int> classes = all_classes(data::kNumLabels);
  if (options.exclude_none) classes.erase(classes.begin());

  std::vector<int> pooled_g, pooled_p;
  std::vector<MacroScores> per_aspect;
  for (auto a : data::kAspects) {
    std::vector<int> g, p;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      g.push_back(gold[i][data::index_of(a)]);
      p.push_back(pred[i][data::index_of(a)]);
    }
    pooled_g.insert(pooled_g.end(), g.begin(), g.end());
    pooled_p.insert(pooled_p.end(), p.begin(), p.end());
    auto r = macro_prf1(g, p, data::kNumLabels, classes);
    for (int c : classes) {
      if (r.classes[static_cast<std::size_t>(c)].absent) {
        rep.notes.push_back(std::string(data::aspect_name(a)) + "/" +
                            std::string(data::label_name(static_cast<data::SentimentLabel>(c))) +
                            ": class absent from gold and prediction, excluded from macro");
      }
    }
    if (r.counted > 0) {
      per_aspect.push_back(r.macro);
    } else {
      rep.notes.push_back(std::string(data::aspect_name(a)) + ": no scored class, excluded from the aspect mean");
    }
    rep.aspects.push_back(std::move(r));
  }
  rep.pooled = macro_prf1(pooled_g, pooled_p, data::kNumLabels, classes);
  rep.macro = options.flat ? rep.pooled.macro : mean_of(per_aspect);
  return rep;
}

void write_report_csv(std::ostream& os, const EvalReport& rep) {
  os << "aspect,class,precision,recall,f1\n";
  auto row = [&](std::string_view aspect, std::string_view cls, double p, double r, double f) {
    os << aspect << ',' << cls << ',' << p << ',' << r << ',' << f << '\n';
  };
  const auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
  for (auto a : data::kAspects) {
    const auto& r = rep.aspects[data::index_of(a)];
    for (auto l : data::kLabels) {
      const auto& s = r.classes[data::index_of(l)];
      row(data::aspect_name(a), data::label_name(l), s.precision, s.recall, s.f1);
    }
    row(data::aspect_name(a), "macro", r.macro.precision, r.macro.recall, r.macro.f1);
  }
  for (auto l : data::kLabels) {
    const auto& s = rep.pooled.classes[data::index_of(l)];
    row("all", data::label_name(l), s.precision, s.recall, s.f1);
  }
  row("all", "macro", rep.macro.precision, rep.macro.recall, rep.macro.f1);
  os.precision(old_precision);
}

nlohmann::json report_to_json(const EvalReport& rep) {
  auto scores = [](const ClassScores& s) {
    return nlohmann::json{{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"tp", s.tp},
                          {"fp", s.fp},               {"fn", s.fn},         {"tn", s.tn}, {"absent", s.absent}};
  };
  auto macro = [](const MacroScores& m) {
    return nlohmann::json{{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
  };
  nlohmann::json j;
  j["options"] = {{"flat", rep.options.flat}, {"exclude_none", rep.options.exclude_none}};
  j["pairs"] = rep.pairs;
  j["macro"] = macro(rep.macro);
  for (auto a : data::kAspects) {
    const auto& r = rep.aspects[data::index_of(a)];
    nlohmann::json aj;
    aj["macro"] = macro(r.macro);
    for (auto l : data::kLabels) aj["classes"][std::string(data::label_name(l))] = scores(r.classes[data::index_of(l)]);
    j["aspects"][std::string(data::aspect_name(a))] = aj;
  }
  for (auto l : data::kLabels) {
    j["pooled"]["classes"][std::string(data::label_name(l))] = scores(rep.pooled.classes[data::index_of(l)]);
  }
  j["pooled"]["macro"] = macro(rep.pooled.macro);
  j["notes"] = rep.notes;
  return j;
}

double cohen_kappa(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw DataError("annotator label lists differ in length");
  if (a.empty()) throw DataError("cohen_kappa needs at least one item");
  const double n = static_cast<double>(a.size());
  std::map<int, std::size_t> ca, cb;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++ca[a[i]];
    ++cb[b[i]];
    agree += a[i] == b[i];
  }
  const double p_o = static_cast<double>(agree) / n;
  double p_e = 0.0;
  for (const auto& [label, count] : ca) {
    auto it = cb.find(label);
    if (it != cb.end()) p_e += (static_cast<double>(count) / n) * (static_cast<double>(it->second) / n);
  }
  if (p_e >= 1.0) return p_o >= 1.0 ? 1.0 : 0.0;
  return (p_o - p_e) / (1.0 - p_e);
}

double iou(const data::Box& a, const data::Box& b) {
  if (!(a.w > 0 && a.h > 0 && b.w > 0 && b.h > 0)) throw DataError("iou: box width and height must be positive");
  const double ix = std::clamp(std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x), 0.0, std::min(a.w, b.w));
  const double iy = std::clamp(std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y), 0.0, std::min(a.h, b.h));
  const double inter = ix * iy;
  const double uni = a.w * a.h + b.w * b.h - inter;
  return inter / uni;
}

std::vector<double> matched_ious(const std::vector<data::Box>& a, const std::vector<data::Box>& b) {
  struct Cand {
    double v;
    std::size_t i, j;
  };
  std::vector<Cand> cands;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double v = iou(a[i], b[j]);
      if (v > 0) cands.push_back({v, i, j});
    }
  std::stable_sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) { return x.v > y.v; });
  std::vector<bool> used_a(a.size()), used_b(b.size());
  std::vector<double> out;
  for (const auto& c : cands) {
    if (used_a[c.i] || used_b[c.j]) continue;
    used_a[c.i] = used_b[c.j] = true;
    out.push_back(c.v);
  }
  out.resize(std::max(a.size(), b.size()), 0.0);
  return out;
}

std::vector<AnnotatedItem> read_annotations(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open annotation file " + path.string());
  std::vector<AnnotatedItem> items;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw DataError(path.string() + ": line " + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(std::string("malformed JSON: ") + e.what());
    }
    AnnotatedItem item;
    if (!obj.contains("id") || !obj["id"].is_string()) fail("missing string field 'id'");
    item.id = obj["id"].get<std::string>();
    if (obj.contains("labels")) {
      for (const auto& [key, value] : obj["labels"].items()) {
        auto a = data::parse_aspect(key);
        if (!a) fail("unknown aspect category '" + key + "'");
        auto l = value.is_string() ? data::parse_label(value.get<std::string>()) : std::nullopt;
        if (!l) fail("bad sentiment label for '" + key + "'");
        item.labels[data::index_of(*a)] = static_cast<int>(data::index_of(*l));
      }
    }
    if (obj.contains("images")) {
      for (const auto& img : obj["images"]) {
        std::vector<data::Box> boxes;
        if (img.contains("rois")) {
          for (const auto& r : img["rois"]) {
            const auto& b = r.at("box");
            if (!b.is_array() || b.size() != 4) fail("box must be an array of 4 numbers");
            data::Box box{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
            if (!(box.w > 0 && box.h > 0)) fail("box width and height must be positive");
            boxes.push_back(box);
          }
        }
        item.boxes.push_back(std::move(boxes));
      }
    }
    items.push_back(std::move(item));
  }
  return items;
}

RoundAgreement round_agreement(const std::string& name, const std::vector<AnnotatedItem>& a,
                               const std::vector<AnnotatedItem>& b) {
  std::map<std::string, const AnnotatedItem*> by_id;
  for (const auto& it : b) by_id[it.id] = &it;
  if (a.size() != b.size() || by_id.size() != b.size()) {
    throw DataError(name + ": annotators labeled different item sets");
  }
  RoundAgreement r;
  r.name = name;
  r.items = a.size();
  std::vector<int> pres_a, pres_b, sent_a, sent_b;
  double iou_sum = 0.0;
  std::size_t iou_n = 0;
  for (const auto& ia : a) {
    auto found = by_id.find(ia.id);
    if (found == by_id.end()) throw DataError(name + ": item '" + ia.id + "' has no counterpart");
    const AnnotatedItem& ib = *found->second;
    for (std::size_t k = 0; k < data::kNumAspects; ++k) {
      const bool pa = ia.labels[k] != 0, pb = ib.labels[k] != 0;
      pres_a.push_back(pa);
      pres_b.push_back(pb);
      if (pa && pb) {
        sent_a.push_back(ia.labels[k]);
        sent_b.push_back(ib.labels[k]);
      }
    }
    const std::size_t images = std::max(ia.boxes.size(), ib.boxes.size());
    for (std::size_t k = 0; k < images; ++k) {
      static const std::vector<data::Box> none;
      const auto& ba = k < ia.boxes.size() ? ia.boxes[k] : none;
      const auto& bb = k < ib.boxes.size() ? ib.boxes[k] : none;
      for (double v : matched_ious(ba, bb)) {
        iou_sum += v;
        ++iou_n;
      }
    }
  }
  if (pres_a.empty()) throw DataError(name + ": empty round");
  r.kappa_aspect = cohen_kappa(pres_a, pres_b);
  r.kappa_sentiment = sent_a.empty() ? std::numeric_limits<double>::quiet_NaN() : cohen_kappa(sent_a, sent_b);
  r.boxes = iou_n;
  r.mean_iou = iou_n == 0 ? 1.0 : iou_sum / static_cast<double>(iou_n);
  r.flagged = r.kappa_aspect < kAgreementThreshold || r.kappa_sentiment < kAgreementThreshold ||
              r.mean_iou < kAgreementThreshold;
  return r;
}

std::vector<RoundAgreement> agreement_report(const std::vector<std::filesystem::path>& files) {
  if (files.empty() || files.size() % 2 != 0) {
    throw DataError("agreement needs annotation files in pairs, got " + std::to_string(files.size()));
  }
  std::vector<RoundAgreement> out;
  for (std::size_t i = 0; i < files.size(); i += 2) {
    out.push_back(round_agreement("round" + std::to_string(i / 2 + 1), read_annotations(files[i]),
                                  read_annotations(files[i + 1])));
  }
  return out;
}

void write_agreement_csv(std::ostream& os, const std::vector<RoundAgreement>& rounds) {
  os << "round,kappa_aspect,kappa_sentiment,mean_iou,items,boxes,flagged\n";
  for (const auto& r : rounds) {
    os << r.name << ',' << r.kappa_aspect << ',';
    if (std::isnan(r.kappa_sentiment)) os << "nan";
    else os << r.kappa_sentiment;
    os << ',' << r.mean_iou << ',' << r.items << ',' << r.boxes << ',' << (r.flagged ? 1 : 0) << '\n';
  }
}

}  // namespace fcmf::metrics
