#include "fcmf/datamodel/stats.hpp"

#include <algorithm>
#include <map>
#include <ostream>

namespace fcmf::data {

DatasetStats dataset_stats(const std::vector<MultimodalSample>& samples, std::size_t top_n) {
  DatasetStats st;
  st.reviews = samples.size();
  std::map<std::string, std::size_t> counts;
  for (const auto& s : samples) {
    st.tokens += s.tokens.size();
    st.labeled_aspects += s.labels.size();
    for (const auto& [a, l] : s.labels) ++st.sentiment_counts[index_of(l)];
    st.images += s.images.size();
    for (const auto& img : s.images) st.rois += img.rois.size();
    for (const auto& t : s.tokens) ++counts[t];
  }
  if (st.reviews > 0) {
    st.mean_tokens = static_cast<double>(st.tokens) / static_cast<double>(st.reviews);
    st.mean_aspects = static_cast<double>(st.labeled_aspects) / static_cast<double>(st.reviews);
  }
  st.top_tokens.assign(counts.begin(), counts.end());
  std::stable_sort(st.top_tokens.begin(), st.top_tokens.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (st.top_tokens.size() > top_n) st.top_tokens.resize(top_n);
  return st;
}

namespace {
// Quotes a CSV field when needed.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}
}  // namespace

void write_stats_csv(std::ostream& os, const DatasetStats& st) {
  os << "metric,value\n";
  os << "reviews," << st.reviews << '\n';
  os << "tokens," << st.tokens << '\n';
  os << "mean_tokens," << st.mean_tokens << '\n';
  os << "labeled_aspects," << st.labeled_aspects << '\n';
  os << "mean_aspects," << st.mean_aspects << '\n';
  for (auto l : {SentimentLabel::Negative, SentimentLabel::Neutral, SentimentLabel::Positive}) {
    os << label_name(l) << ',' << st.sentiment_counts[index_of(l)] << '\n';
  }
  os << "images," << st.images << '\n';
  os << "rois," << st.rois << '\n';
  os << '\n' << "token,count\n";
  for (const auto& [tok, n] : st.top_tokens) os << csv_field(tok) << ',' << n << '\n';
}

}  // namespace fcmf::data
