#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "fcmf/datamodel/types.hpp"

namespace fcmf::data {

struct DatasetStats {
  std::size_t reviews = 0;
  std::size_t tokens = 0;
  double mean_tokens = 0.0;
  std::size_t labeled_aspects = 0;
  double mean_aspects = 0.0;
  // Indexed by SentimentLabel; the None slot stays zero because None is never stored.
  std::array<std::size_t, kNumLabels> sentiment_counts{};
  std::size_t images = 0;
  std::size_t rois = 0;
  // Most frequent tokens, descending count then lexicographic.
  std::vector<std::pair<std::string, std::size_t>> top_tokens;
};

DatasetStats dataset_stats(const std::vector<MultimodalSample>& samples, std::size_t top_n = 50);

// `metric,value` block, blank line, then `token,count` block.
void write_stats_csv(std::ostream& os, const DatasetStats& stats);

}  // namespace fcmf::data
