#pragma once

#include <filesystem>
#include <iosfwd>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "fcmf/datamodel/types.hpp"

namespace fcmf::metrics {

struct ClassScores {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  // TP + FP + FN == 0: the class never occurs in gold or prediction and is left out of the macro mean.
  bool absent = false;
};

struct MacroScores {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct ClassReport {
  std::vector<ClassScores> classes;  // indexed by class id
  std::vector<bool> in_class_set;    // classes scored (before the absent rule)
  MacroScores macro;
  std::size_t counted = 0;           // classes averaged into macro
  std::size_t decisions = 0;
};

// Per-class P/R/F1 with 0/0 -> 0, macro over `classes` minus absent classes.
// Labels are integers in [0, num_classes).
ClassReport macro_prf1(const std::vector<int>& gold, const std::vector<int>& pred, std::size_t num_classes,
                       const std::vector<int>& classes);
ClassReport macro_prf1(const std::vector<int>& gold, const std::vector<int>& pred, std::size_t num_classes);

struct EvalOptions {
  // Pool all (sample, aspect) pairs into one 4-class problem instead of averaging per aspect.
  bool flat = false;
  // Drop the none class from every macro average.
  bool exclude_none = false;
};

struct EvalReport {
  EvalOptions options;
  std::vector<ClassReport> aspects;  // kNumAspects entries
  ClassReport pooled;
  MacroScores macro;
  std::size_t pairs = 0;
  std::vector<std::string> notes;  // zero-division flags
};

// gold[i][a], pred[i][a]: SentimentLabel index per sample i and aspect a.
EvalReport evaluate_predictions(const std::vector<std::array<int, data::kNumAspects>>& gold,
                                const std::vector<std::array<int, data::kNumAspects>>& pred,
                                const EvalOptions& options = {});

// `aspect,class,precision,recall,f1` rows: per aspect and class, per-aspect macro, pooled classes, overall macro.
void write_report_csv(std::ostream& os, const EvalReport& report);
nlohmann::json report_to_json(const EvalReport& report);

// Chance-corrected agreement. Labels are arbitrary integers.
double cohen_kappa(const std::vector<int>& a, const std::vector<int>& b);

// Boxes as (x, y, w, h); any positive extent is accepted.
double iou(const data::Box& a, const data::Box& b);

// Greedy highest-IoU pairing; IoU-0 pairs count as unmatched. Returns the per-box scores,
// one entry per box of the larger side (unmatched boxes score 0).
std::vector<double> matched_ious(const std::vector<data::Box>& a, const std::vector<data::Box>& b);

inline constexpr double kAgreementThreshold = 0.80;

struct RoundAgreement {
  std::string name;
  double kappa_aspect = 0.0;
  double kappa_sentiment = 0.0;  // NaN when no (sample, aspect) is marked present by both
  double mean_iou = 1.0;         // 1 when neither side drew a box
  std::size_t items = 0;
  std::size_t boxes = 0;
  bool flagged = false;
};

struct AnnotatedItem {
  std::string id;
  std::array<int, data::kNumAspects> labels{};
  std::vector<std::vector<data::Box>> boxes;  // per image
};

// Reads the labels and RoI boxes of a dataset-schema JSONL file; feature references are ignored.
std::vector<AnnotatedItem> read_annotations(const std::filesystem::path& path);
RoundAgreement round_agreement(const std::string& name, const std::vector<AnnotatedItem>& a,
                               const std::vector<AnnotatedItem>& b);
// Files come in (annotator A, annotator B) pairs, one pair per round.
std::vector<RoundAgreement> agreement_report(const std::vector<std::filesystem::path>& files);
void write_agreement_csv(std::ostream& os, const std::vector<RoundAgreement>& rounds);

}  // namespace fcmf::metrics
